"""Pattern avoidance and weakly length-additive subset extraction.

A finite set T of non-identity free-product elements avoids patterns of type
size D when, for every reduced word w of type size D, some g in T of type
size at least 2 neither starts with w nor ends with w^-1.  Deciding this is
finite even though w ranges over infinitely many words: any defeating w is
pinned down, element by element, to either a prefix constraint or a suffix
constraint on its letters, and unconstrained positions only need to be
fillable into a reduced word.

The extraction operation realizes the constructive selection underlying weak
length additivity: given a weighted set F inside a ball, it produces a
subset A (optionally shifted by an element of T) whose k-fold products lose
at most 2*L*D length per factor, while retaining at least a (r*theta_T)^(-2D)
fraction of the weight.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import MalformedInputError, PreconditionError, UnsupportedContextError
from .words import (
    GroupContext,
    Letter,
    ReducedWord,
    ends_with,
    inverse,
    length,
    letter_length,
    multiply,
    starts_with,
    theta,
    type_size,
)


@dataclass(frozen=True)
class PatternVerdict:
    """Outcome of the avoidance decision for one set and one type size.

    ``defeating_pattern`` is present exactly when the set does not avoid;
    every tested element of type size >= 2 then starts with it or ends with
    its inverse.  ``vacuous`` marks sets with no element of type size >= 2,
    which are defeated by every pattern.
    """

    avoiding: bool
    defeating_pattern: Optional[ReducedWord]
    D: int
    vacuous: bool = False


@dataclass(frozen=True)
class WeightedSet:
    """Finite map from reduced words to non-negative weights."""

    entries: tuple[tuple[ReducedWord, float], ...]

    def __post_init__(self):
        seen = set()
        for w, p in self.entries:
            if w.is_identity:
                raise MalformedInputError("weighted sets here exclude the identity")
            if p < 0:
                raise MalformedInputError("weights must be non-negative")
            if w in seen:
                raise MalformedInputError("duplicate word in weighted set")
            seen.add(w)

    @property
    def total(self) -> float:
        return sum(p for _, p in self.entries)

    def words(self) -> list[ReducedWord]:
        return [w for w, _ in self.entries]


@dataclass(frozen=True)
class ExtractionResult:
    """Subset A, optional shift g, and the per-factor defect bound.

    ``order`` bounds the length defect per factor of products drawn from A
    (interleaved with ``shift`` when present); it never exceeds 2*L*D.
    ``weight_ratio`` is weight(A) / weight(F).
    """

    subset: WeightedSet
    shift: Optional[ReducedWord]
    order: int
    weight_ratio: float
    level: int
    case: str
    L: int
    D: int


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of the semigroup search for a small avoiding set."""

    found: Optional[tuple[ReducedWord, ...]]
    step_counts: dict[ReducedWord, int]
    frontier_size: int
    depth_reached: int


# -- avoidance decision ----------------------------------------------------


def _constraints_for(g: ReducedWord, D: int, ctx: GroupContext, choice: str) -> Optional[dict[int, Letter]]:
    """Positions of a defeating pattern forced by one element.

    choice 'P': g starts with w, fixing w's first k letters to g's prefix.
    choice 'S': g ends with w^-1, fixing w's last k letters to the letterwise
    inverses of g's reversed suffix.
    """
    m = len(g.letters)
    k = min(D, m // 2)
    out: dict[int, Letter] = {}
    if choice == "P":
        for i in range(k):
            out[i] = g.letters[i]
    else:
        # the last k letters of g equal the first k letters of w^-1, so the
        # pattern positions D-k+1 .. D hold the inverses of g's suffix in
        # reversed order: the final letter of g pins position D-k+1
        for j in range(k):
            f, c = g.letters[m - 1 - j]
            out[D - k + j] = (f, ctx.factors[f].inv(c))
    return out


def _fill_pattern(fixed: dict[int, Letter], D: int, ctx: GroupContext) -> Optional[ReducedWord]:
    """Complete fixed positions into a reduced word of type size exactly D.

    Adjacent positions must use distinct factors.  Feasibility is a forward
    pass over reachable factor sets; a witness is rebuilt backwards.  Returns
    None when no completion exists (possible for r = 2, where alternation
    forces factor parity along the whole word).
    """
    r = ctx.r
    all_factors = frozenset(range(r))
    reachable: list[frozenset[int]] = []
    prev = None
    for pos in range(D):
        if pos in fixed:
            allowed = frozenset((fixed[pos][0],))
        else:
            allowed = all_factors
        if prev is None:
            cur = allowed
        else:
            if len(prev) == 1:
                cur = allowed - prev
            else:
                cur = allowed  # some prior factor differs whenever r >= 2
        if not cur:
            return None
        reachable.append(cur)
        prev = cur
    # rebuild one factor assignment right to left
    factors_chosen: list[int] = [0] * D
    nxt: Optional[int] = None
    for pos in range(D - 1, -1, -1):
        options = reachable[pos] if nxt is None else reachable[pos] - {nxt}
        if not options:
            return None
        factors_chosen[pos] = min(options)
        nxt = factors_chosen[pos]
    letters: list[Letter] = []
    for pos in range(D):
        if pos in fixed:
            letters.append(fixed[pos])
        else:
            fidx = factors_chosen[pos]
            code = next(iter(ctx.factors[fidx].elements_up_to(float("inf"))), None)
            if code is None:
                return None
            letters.append((fidx, code))
    word = ReducedWord(tuple(letters))
    # the rebuild guarantees alternation, but verify rather than trust it
    for a, b in zip(word.letters, word.letters[1:]):
        if a[0] == b[0]:
            return None
    return word


def is_pattern_avoiding(tset: Sequence[ReducedWord], D: int, ctx: GroupContext) -> PatternVerdict:
    """Decide whether a finite set avoids patterns of type size D.

    Elements of type size below 2 can never witness avoidance; a set with no
    other elements is defeated by every pattern (vacuous verdict).  The
    search branches over the prefix-or-suffix choice per element, merges the
    forced letters, and checks that the free positions admit a reduced
    completion.
    """
    if ctx.r < 2:
        raise UnsupportedContextError("pattern machinery needs at least two factors")
    if D <= 0:
        raise MalformedInputError("pattern type size D must be positive")
    for g in tset:
        if g.is_identity:
            raise MalformedInputError("pattern sets must not contain the identity")
    witnesses = [g for g in tset if type_size(g) >= 2]
    if not witnesses:
        pat = _fill_pattern({}, D, ctx)
        return PatternVerdict(False, pat, D, vacuous=True)
    for choices in itertools.product("PS", repeat=len(witnesses)):
        fixed: dict[int, Letter] = {}
        ok = True
        for g, choice in zip(witnesses, choices):
            forced = _constraints_for(g, D, ctx, choice)
            for pos, letter in forced.items():
                if pos in fixed and fixed[pos] != letter:
                    ok = False
                    break
                fixed[pos] = letter
            if not ok:
                break
        if not ok:
            continue
        pat = _fill_pattern(fixed, D, ctx)
        if pat is not None:
            return PatternVerdict(False, pat, D)
    return PatternVerdict(True, None, D)


def pattern_defeats(tset: Sequence[ReducedWord], omega: ReducedWord, ctx: GroupContext) -> bool:
    """Direct check: does the pattern defeat every usable element of the set?"""
    omega_inv = inverse(omega, ctx)
    for g in tset:
        if type_size(g) < 2:
            continue
        if not starts_with(g, omega, ctx) and not ends_with(g, omega_inv, ctx):
            return False
    return True


@dataclass(frozen=True)
class MinimalSubsetResult:
    subset: Optional[tuple[ReducedWord, ...]]
    full_set_verdict: Optional[PatternVerdict]


def minimal_avoiding_subset(
    tset: Sequence[ReducedWord], D: int, ctx: GroupContext
) -> MinimalSubsetResult:
    """Smallest avoiding subset of cardinality at most 3, in input order.

    When no subset of size <= 3 avoids, the verdict for the full set is
    reported instead.
    """
    items = list(tset)
    for size in (1, 2, 3):
        if size > len(items):
            break
        for combo in itertools.combinations(items, size):
            if is_pattern_avoiding(combo, D, ctx).avoiding:
                return MinimalSubsetResult(tuple(combo), None)
    return MinimalSubsetResult(None, is_pattern_avoiding(items, D, ctx))


def semigroup_pattern_probe(
    measure,
    D: int,
    max_products: int,
    ctx: GroupContext,
    max_candidates: int = 64,
) -> ProbeResult:
    """Search the semigroup generated by a measure's support for a small
    avoiding set.

    Products of up to ``max_products`` support elements are enumerated
    breadth first; each element g keeps the first product count t(g) that
    realizes it, so the walk attains g at time t(g) with positive
    probability.  Candidate sets of size up to 3 are tried over elements of
    type size >= 2 (smaller elements can never witness avoidance).  An
    absent result is not a proof of non-avoidance.
    """
    support = [w for w, _ in measure.entries]
    first_seen: dict[ReducedWord, int] = {}
    frontier: list[ReducedWord] = [ReducedWord()]
    order: list[ReducedWord] = []
    depth = 0
    for depth in range(1, max_products + 1):
        nxt = []
        for w in frontier:
            for s in support:
                prod = multiply(w, s, ctx)
                if prod.is_identity:
                    continue
                if prod not in first_seen:
                    first_seen[prod] = depth
                    order.append(prod)
                    nxt.append(prod)
        frontier = nxt
        if not frontier:
            break
    candidates = [g for g in order if type_size(g) >= 2][:max_candidates]
    for size in (1, 2, 3):
        for combo in itertools.combinations(candidates, size):
            if is_pattern_avoiding(combo, D, ctx).avoiding:
                return ProbeResult(
                    found=tuple(combo),
                    step_counts={g: first_seen[g] for g in combo},
                    frontier_size=len(first_seen),
                    depth_reached=depth,
                )
    return ProbeResult(None, {}, len(first_seen), depth)


# -- weakly additive extraction ---------------------------------------------


def _argmax_class(classes: dict, weights: dict) -> tuple:
    best_key, best_w = None, -1.0
    for key in sorted(classes.keys()):
        w = weights[key]
        if w > best_w:
            best_key, best_w = key, w
    return best_key


def _in_conjugated_factor(
    g: ReducedWord, head: Sequence[Letter], factor_index: int, ctx: GroupContext
) -> bool:
    """Membership test for the conjugate of one factor by the word 'head'."""
    omega = ReducedWord(tuple(head))
    core = multiply(multiply(inverse(omega, ctx), g, ctx), omega, ctx)
    return type_size(core) == 1 and core.letters[0][0] == factor_index


def _pick_shift_conjugate(
    tset: Sequence[ReducedWord], head: Sequence[Letter], factor_index: int, ctx: GroupContext
) -> ReducedWord:
    for g in tset:
        if not _in_conjugated_factor(g, head, factor_index, ctx):
            return g
    raise PreconditionError(
        "no shift element found outside the conjugated factor; "
        "the set does not behave like a pattern-avoiding set"
    )


def _pick_shift_pattern(
    tset: Sequence[ReducedWord], omega: ReducedWord, ctx: GroupContext
) -> ReducedWord:
    omega_inv = inverse(omega, ctx)
    for g in tset:
        if not starts_with(g, omega, ctx) and not ends_with(g, omega_inv, ctx):
            return g
    raise PreconditionError(
        "no element of the set dodges the extracted pattern; "
        "the avoidance precondition fails"
    )


def extract_weakly_additive(
    fset: WeightedSet,
    tset: Sequence[ReducedWord],
    D: int,
    ctx: GroupContext,
) -> ExtractionResult:
    """Select a heavy subset on which lengths add up to a bounded defect.

    The selection refines F level by level: first by the factors of the
    s-th and s-th-from-last letters, then by the letters themselves, always
    keeping the heaviest class (argmax rather than the existential average,
    which can only improve the retained weight).  Classes whose boundary
    letters are mutual inverses descend a level; the remaining cases exit,
    some with a shift element taken from the avoiding set to break up the
    conjugation.  Words just long enough for the two probed positions to
    coincide are classed apart so the weight bound survives.
    """
    if not is_pattern_avoiding(tset, D, ctx).avoiding:
        raise PreconditionError("the auxiliary set must avoid patterns of type size D")
    if not fset.entries:
        return ExtractionResult(fset, None, 0, 1.0, 0, "empty", 0, D)
    L = max(length(g, ctx) for g in tset)
    total = fset.total
    if total <= 0:
        return ExtractionResult(fset, None, 0, 1.0, 0, "zero-weight", L, D)

    current: dict[ReducedWord, float] = dict(fset.entries)
    head: list[Letter] = []  # fixed letters y_1 .. y_{s-1}

    def result(entries, shift, order, level, case):
        sub = WeightedSet(tuple(sorted(entries.items(), key=lambda kv: kv[0].letters)))
        ratio = sum(entries.values()) / total
        return ExtractionResult(sub, shift, order, ratio, level, case, L, D)

    for s in range(1, D + 1):
        # stage 1: factors of the probed positions
        classes: dict[tuple[int, int], dict[ReducedWord, float]] = {}
        weights: dict[tuple[int, int], float] = {}
        for g, p in current.items():
            m = len(g.letters)
            i = g.letters[s - 1][0]
            j = g.letters[m - s][0]
            classes.setdefault((i, j), {})[g] = p
            weights[(i, j)] = weights.get((i, j), 0.0) + p
        i_s, j_s = _argmax_class(classes, weights)
        current = classes[(i_s, j_s)]
        if i_s != j_s:
            order = 0 if s == 1 else 2 * (s - 1) * L
            return result(current, None, order, s, "factor-split")

        # stage 2: the letters themselves; words of type size exactly 2s-1
        # probe the same position twice and get their own classes
        letter_classes: dict[tuple, dict[ReducedWord, float]] = {}
        lweights: dict[tuple, float] = {}
        for g, p in current.items():
            m = len(g.letters)
            y = g.letters[s - 1]
            z = g.letters[m - s]
            key = (y, z, m == 2 * s - 1)
            letter_classes.setdefault(key, {})[g] = p
            lweights[key] = lweights.get(key, 0.0) + p
        y, z, midpoint = _argmax_class(letter_classes, lweights)
        current = letter_classes[(y, z, midpoint)]
        ly = letter_length(y, ctx)
        lz = letter_length(z, ctx)
        fac = ctx.factors[y[0]]
        z_is_y_inv = z == (y[0], fac.inv(y[1]))

        if ly > L and lz > L:
            g = _pick_shift_conjugate(tset, head, i_s, ctx)
            return result(current, g, 2 * s * L, s, "shift-long-boundary")
        if (ly > L) != (lz > L) or not z_is_y_inv:
            return result(current, None, 2 * s * L, s, "plain")
        # boundary letters are mutual inverses and short
        if midpoint:
            g = _pick_shift_conjugate(tset, head, i_s, ctx)
            return result(current, g, 2 * s * L, s, "shift-midpoint")
        if s == D:
            omega = ReducedWord(tuple(head) + (y,))
            g = _pick_shift_pattern(tset, omega, ctx)
            return result(current, g, 2 * D * L, s, "shift-pattern")
        head.append(y)

    raise AssertionError("extraction cascade must exit within D levels")


@dataclass(frozen=True)
class AdditivityReport:
    """Observed length defects of products drawn from an extraction."""

    worst_defect_per_factor: float
    per_k: dict[int, float]
    checked: int
    order_bound: int
    global_bound: int
    within_order: bool
    within_global: bool


def verify_weak_additivity(
    res: ExtractionResult,
    ctx: GroupContext,
    k_max: int = 3,
    samples: int = 1000,
    tuple_cap: int = 200_000,
    seed: int = 0,
) -> AdditivityReport:
    """Check the defect inequality on k-tuples from an extraction result.

    All k-tuples are enumerated while |A|^k stays under ``tuple_cap``;
    larger spaces are sampled.  The report carries the worst observed defect
    per factor alongside the branch bound and the global 2*L*D bound.
    """
    words = res.subset.words()
    if not words:
        return AdditivityReport(0.0, {}, 0, res.order, 2 * res.L * res.D, True, True)
    lengths = {g: length(g, ctx) for g in words}
    shift = res.shift
    rng = np.random.default_rng(seed)
    worst = 0.0
    per_k: dict[int, float] = {}
    checked = 0
    for k in range(1, k_max + 1):
        if len(words) ** k <= tuple_cap:
            tuples = itertools.product(words, repeat=k)
        else:
            idx = rng.integers(0, len(words), size=(samples, k))
            tuples = ([words[i] for i in row] for row in idx)
        k_worst = 0.0
        for tup in tuples:
            prod = ReducedWord()
            for g in tup:
                prod = multiply(prod, g, ctx)
                if shift is not None:
                    prod = multiply(prod, shift, ctx)
            defect = (sum(lengths[g] for g in tup) - length(prod, ctx)) / k
            if defect > k_worst:
                k_worst = defect
            checked += 1
        per_k[k] = k_worst
        worst = max(worst, k_worst)
    return AdditivityReport(
        worst_defect_per_factor=worst,
        per_k=per_k,
        checked=checked,
        order_bound=res.order,
        global_bound=2 * res.L * res.D,
        within_order=worst <= res.order,
        within_global=worst <= 2 * res.L * res.D,
    )


def extraction_weight_floor(fset: WeightedSet, D: int, ctx: GroupContext) -> float:
    """The guaranteed weight fraction (r * theta_T)^(-2D), T = max length in F."""
    if not fset.entries:
        return 1.0
    t = max(length(g, ctx) for g in fset.words())
    return float(ctx.r * theta(ctx, t)) ** (-2 * D)

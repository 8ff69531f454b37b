"""Exact arithmetic for elements of a free product G = G_1 * ... * G_r.

Elements are kept in their canonical alternating-syllable normal form: a
reduced word is a sequence of letters, each letter a non-identity element of
one factor, with adjacent letters drawn from distinct factors.  The empty
sequence is the group identity.

Three factor kinds are supported:

* ``IntegerFactor``: the infinite cyclic group on a single generator;
  letter codes are signed exponents.
* ``FiniteCyclicFactor``: Z/m on a single generator; codes are residues
  1..m-1.
* ``FiniteTableFactor``: an explicit finite group given by its
  multiplication table, with a designated generating subset; codes are
  element indices (identity must sit at index 0).

Letter lengths are exact word lengths inside the factor (|k| for exponents,
min(c, m-c) for residues, breadth-first distance over the generators for
table factors), so the length of a reduced word is the sum of its letter
lengths.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, Union

from .errors import MalformedInputError, ResourceLimitError

Letter = tuple[int, int]  # (factor index, element code)

DEFAULT_BALL_CAP = 10_000_000


@dataclass(frozen=True)
class IntegerFactor:
    """Infinite cyclic factor with a single generator."""

    name: str

    def is_identity(self, code: int) -> bool:
        return code == 0

    def canonical(self, code: int) -> int:
        return int(code)

    def mul(self, a: int, b: int) -> int:
        return a + b

    def inv(self, code: int) -> int:
        return -code

    def letter_length(self, code: int) -> int:
        return abs(code)

    def ball_size(self, t: float) -> int:
        if t < 0:
            return 0
        return 2 * int(math.floor(t)) + 1

    def elements_up_to(self, t: float) -> Iterator[int]:
        """Non-identity codes of length at most t, shortest first.

        An infinite bound yields the whole factor lazily.
        """
        ks = itertools.count(1) if math.isinf(t) else range(1, int(math.floor(t)) + 1)
        for k in ks:
            yield k
            yield -k

    def generator_tokens(self) -> dict[str, int]:
        return {self.name: 1}


@dataclass(frozen=True)
class FiniteCyclicFactor:
    """Z/m on a single generator, m >= 2."""

    name: str
    order: int

    def __post_init__(self):
        if self.order < 2:
            raise MalformedInputError(
                f"cyclic factor {self.name!r} needs order >= 2, got {self.order}"
            )

    def is_identity(self, code: int) -> bool:
        return code % self.order == 0

    def canonical(self, code: int) -> int:
        return code % self.order

    def mul(self, a: int, b: int) -> int:
        return (a + b) % self.order

    def inv(self, code: int) -> int:
        return (-code) % self.order

    def letter_length(self, code: int) -> int:
        c = code % self.order
        return min(c, self.order - c)

    def ball_size(self, t: float) -> int:
        if t < 0:
            return 0
        return min(self.order, 2 * int(math.floor(t)) + 1)

    def elements_up_to(self, t: float) -> Iterator[int]:
        for c in range(1, self.order):
            if self.letter_length(c) <= t:
                yield c

    def generator_tokens(self) -> dict[str, int]:
        return {self.name: 1}


@dataclass(frozen=True)
class FiniteTableFactor:
    """Finite group from an explicit multiplication table.

    ``table[i][j]`` is the index of the product of elements i and j; index 0
    must be the identity.  ``generators`` maps a token name to the code of
    each designated generator; the designated set must generate the whole
    group (checked at construction along with the group axioms).
    """

    name: str
    table: tuple[tuple[int, ...], ...]
    generators: tuple[tuple[str, int], ...]
    _lengths: tuple[int, ...] = field(repr=False, default=())
    _inverses: tuple[int, ...] = field(repr=False, default=())

    def __post_init__(self):
        n = len(self.table)
        if n < 2:
            raise MalformedInputError(f"factor {self.name!r} must be non-trivial")
        for row in self.table:
            if len(row) != n or any(not (0 <= v < n) for v in row):
                raise MalformedInputError(f"factor {self.name!r}: malformed table row")
        # identity at index 0
        for i in range(n):
            if self.table[0][i] != i or self.table[i][0] != i:
                raise MalformedInputError(
                    f"factor {self.name!r}: index 0 is not a two-sided identity"
                )
        # inverses
        inverses = [-1] * n
        for i in range(n):
            for j in range(n):
                if self.table[i][j] == 0 and self.table[j][i] == 0:
                    inverses[i] = j
                    break
            if inverses[i] < 0:
                raise MalformedInputError(
                    f"factor {self.name!r}: element {i} has no inverse"
                )
        # associativity
        t = self.table
        for a in range(n):
            for b in range(n):
                ab = t[a][b]
                row_b = t[b]
                row_ab = t[ab]
                for c in range(n):
                    if row_ab[c] != t[a][row_b[c]]:
                        raise MalformedInputError(
                            f"factor {self.name!r}: table is not associative"
                        )
        if not self.generators:
            raise MalformedInputError(f"factor {self.name!r}: no generators given")
        gen_codes = [c for _, c in self.generators]
        if any(not (1 <= c < n) for c in gen_codes):
            raise MalformedInputError(
                f"factor {self.name!r}: generator codes must be non-identity elements"
            )
        # BFS from identity over generators and their inverses; also yields
        # the factor word-length table used for letter lengths.
        step = sorted({*gen_codes, *(inverses[c] for c in gen_codes)})
        lengths = [-1] * n
        lengths[0] = 0
        frontier = [0]
        while frontier:
            nxt = []
            for g in frontier:
                for s in step:
                    h = t[g][s]
                    if lengths[h] < 0:
                        lengths[h] = lengths[g] + 1
                        nxt.append(h)
            frontier = nxt
        if any(l < 0 for l in lengths):
            raise MalformedInputError(
                f"factor {self.name!r}: designated generators do not generate the group"
            )
        object.__setattr__(self, "_lengths", tuple(lengths))
        object.__setattr__(self, "_inverses", tuple(inverses))

    @property
    def order(self) -> int:
        return len(self.table)

    def is_identity(self, code: int) -> bool:
        return code == 0

    def canonical(self, code: int) -> int:
        if not (0 <= code < len(self.table)):
            raise MalformedInputError(
                f"factor {self.name!r}: element code {code} out of range"
            )
        return code

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]

    def inv(self, code: int) -> int:
        return self._inverses[code]

    def letter_length(self, code: int) -> int:
        return self._lengths[code]

    def ball_size(self, t: float) -> int:
        if t < 0:
            return 0
        return sum(1 for l in self._lengths if l <= t)

    def elements_up_to(self, t: float) -> Iterator[int]:
        for c in range(1, len(self.table)):
            if self._lengths[c] <= t:
                yield c

    def generator_tokens(self) -> dict[str, int]:
        return dict(self.generators)


FactorDescriptor = Union[IntegerFactor, FiniteCyclicFactor, FiniteTableFactor]


@dataclass(frozen=True)
class ReducedWord:
    """Canonical alternating-syllable form of a free-product element.

    ``letters`` is a tuple of (factor index, code) pairs; the empty tuple is
    the identity.  Adjacent letters must come from distinct factors and no
    code may be 0, the identity code of every factor kind.  Instances are
    immutable and hashable.
    """

    letters: tuple[Letter, ...] = ()

    def __post_init__(self):
        prev = -1
        for fidx, code in self.letters:
            if fidx == prev:
                raise MalformedInputError("adjacent letters share a factor")
            if code == 0:
                raise MalformedInputError("identity letters are forbidden")
            prev = fidx

    @property
    def is_identity(self) -> bool:
        return not self.letters

    def to_pairs(self) -> list[list[int]]:
        """Serialized form: a list of [factor_index, code] pairs."""
        return [[f, c] for f, c in self.letters]

    def __iter__(self) -> Iterator[Letter]:
        return iter(self.letters)

    def __len__(self) -> int:
        return len(self.letters)


IDENTITY = ReducedWord()


@dataclass(frozen=True)
class GroupContext:
    """An ordered free product of factor descriptors.

    Immutable after construction; all word operations are pure functions of
    the context, so instances are safe to share across workers.
    """

    factors: tuple[FactorDescriptor, ...]

    def __post_init__(self):
        if not self.factors:
            raise MalformedInputError("a free product needs at least one factor")
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise MalformedInputError("factor names must be unique")
        tokens: dict[str, Letter] = {}
        for idx, f in enumerate(self.factors):
            for tok, code in f.generator_tokens().items():
                if tok in tokens:
                    raise MalformedInputError(f"generator token {tok!r} is not unique")
                tokens[tok] = (idx, code)
        object.__setattr__(self, "_tokens", tokens)

    @property
    def r(self) -> int:
        return len(self.factors)

    def factor(self, index: int) -> FactorDescriptor:
        if not (0 <= index < len(self.factors)):
            raise MalformedInputError(f"factor index {index} out of range")
        return self.factors[index]

    # -- word text syntax -------------------------------------------------

    def parse_word(self, text: str) -> ReducedWord:
        """Parse whitespace-separated ``name^exp`` tokens into a reduced word.

        The exponent is optional and defaults to 1.  The token ``e`` (or an
        empty string) denotes the identity.  The result is normalized.
        """
        raw: list[Letter] = []
        for token in text.split():
            if token == "e":
                continue
            if "^" in token:
                name, _, exp_s = token.partition("^")
                try:
                    exp = int(exp_s)
                except ValueError as err:
                    raise MalformedInputError(f"bad exponent in token {token!r}") from err
            else:
                name, exp = token, 1
            if name not in self._tokens:
                raise MalformedInputError(f"unknown generator token {name!r}")
            fidx, code = self._tokens[name]
            fac = self.factors[fidx]
            if isinstance(fac, IntegerFactor):
                raw.append((fidx, exp))
            elif isinstance(fac, FiniteCyclicFactor):
                raw.append((fidx, exp % fac.order))
            else:
                c = 0
                base = code if exp >= 0 else fac.inv(code)
                for _ in range(abs(exp)):
                    c = fac.mul(c, base)
                raw.append((fidx, c))
        return normalize(raw, self)

    def format_word(self, word: ReducedWord) -> str:
        """Render a reduced word in the text syntax; identity renders as 'e'."""
        if word.is_identity:
            return "e"
        parts = []
        for fidx, code in word.letters:
            fac = self.factors[fidx]
            if isinstance(fac, (IntegerFactor, FiniteCyclicFactor)):
                parts.append(fac.name if code == 1 else f"{fac.name}^{code}")
            else:
                parts.append(self._format_table_letter(fac, code))
        return " ".join(parts)

    def _format_table_letter(self, fac: FiniteTableFactor, code: int) -> str:
        # shortest token word over the designated generators, found by BFS
        gens = list(fac.generator_tokens().items())
        step = [(tok, c) for tok, c in gens] + [
            (f"{tok}^-1", fac.inv(c)) for tok, c in gens if fac.inv(c) != c
        ]
        seen = {0: ""}
        frontier = [0]
        while frontier:
            nxt = []
            for g in frontier:
                for tok, c in step:
                    h = fac.mul(g, c)
                    if h not in seen:
                        seen[h] = (seen[g] + " " + tok).strip()
                        nxt.append(h)
                        if h == code:
                            return seen[h]
            frontier = nxt
        raise MalformedInputError(f"code {code} unreachable in factor {fac.name!r}")

    def word_from_pairs(self, pairs: Iterable[Sequence[int]]) -> ReducedWord:
        return normalize([(int(f), int(c)) for f, c in pairs], self)


# -- word operations ------------------------------------------------------


def normalize(raw: Sequence[Letter], ctx: GroupContext) -> ReducedWord:
    """Reduce an arbitrary letter sequence to its normal form.

    Adjacent same-factor letters are merged through the factor law, identity
    letters are dropped, and merges cascade after deletions.  The result is
    the unique reduced word equal to the product of the raw letters.
    """
    factors = ctx.factors
    out: list[Letter] = []
    for fidx, code in raw:
        if not (0 <= fidx < len(factors)):
            raise MalformedInputError(f"invalid factor index {fidx}")
        fac = factors[fidx]
        code = fac.canonical(code)
        if fac.is_identity(code):
            continue
        while out and out[-1][0] == fidx:
            merged = fac.mul(out[-1][1], code)
            out.pop()
            if fac.is_identity(merged):
                code = None
                break
            code = merged
        if code is not None:
            out.append((fidx, code))
    return ReducedWord(tuple(out))


def multiply(u: ReducedWord, v: ReducedWord, ctx: GroupContext) -> ReducedWord:
    """Product of two reduced words, with cancellation at the junction only."""
    a = list(u.letters)
    b = v.letters
    i = 0
    nb = len(b)
    while a and i < nb:
        fidx, code = b[i]
        if a[-1][0] != fidx:
            break
        fac = ctx.factors[fidx]
        merged = fac.mul(a[-1][1], code)
        a.pop()
        i += 1
        if not fac.is_identity(merged):
            a.append((fidx, merged))
            break
    return ReducedWord(tuple(a) + b[i:])


def inverse(u: ReducedWord, ctx: GroupContext) -> ReducedWord:
    """Reverse the letters and invert each one inside its factor."""
    return ReducedWord(
        tuple((f, ctx.factors[f].inv(c)) for f, c in reversed(u.letters))
    )


def length(u: ReducedWord, ctx: GroupContext) -> int:
    """Word length with respect to the union of the factor generating sets."""
    factors = ctx.factors
    return sum(factors[f].letter_length(c) for f, c in u.letters)


def letter_length(letter: Letter, ctx: GroupContext) -> int:
    return ctx.factors[letter[0]].letter_length(letter[1])


def type_size(u: ReducedWord) -> int:
    """Number of letters in the alternating decomposition; 0 for the identity."""
    return len(u.letters)


@dataclass(frozen=True)
class AffixCheck:
    """Outcome of a prefix/suffix comparison.

    ``degenerate`` flags the convention case: the tested element has type
    size below 2, where the comparison is not defined and reports False.
    """

    matched: bool
    degenerate: bool
    compared: int


def _affix_check(g: ReducedWord, omega: ReducedWord, ctx: GroupContext, side: str) -> AffixCheck:
    m = len(g.letters)
    d = len(omega.letters)
    if d == 0:
        raise MalformedInputError("pattern word must be non-empty")
    if m < 2:
        return AffixCheck(False, True, 0)
    k = min(d, m // 2)
    if side == "start":
        matched = g.letters[:k] == omega.letters[:k]
    else:
        # the last k letters of g are compared against the first k of omega
        matched = g.letters[m - k:] == omega.letters[:k]
    return AffixCheck(matched, False, k)


def starts_with(g: ReducedWord, omega: ReducedWord, ctx: GroupContext) -> bool:
    """Prefix agreement truncated at min(type size of omega, half of g's).

    Elements of type size below 2 report False (see ``AffixCheck`` for the
    diagnostic form).
    """
    return _affix_check(g, omega, ctx, "start").matched


def ends_with(g: ReducedWord, omega: ReducedWord, ctx: GroupContext) -> bool:
    """Suffix agreement: the last k letters of g against the first k of omega."""
    return _affix_check(g, omega, ctx, "end").matched


def affix_status(g: ReducedWord, omega: ReducedWord, ctx: GroupContext, side: str) -> AffixCheck:
    """Diagnostic variant of starts_with / ends_with ('start' or 'end')."""
    if side not in ("start", "end"):
        raise MalformedInputError(f"side must be 'start' or 'end', got {side!r}")
    return _affix_check(g, omega, ctx, side)


def ball_enumerate(ctx: GroupContext, t: float, cap: int = DEFAULT_BALL_CAP) -> list[ReducedWord]:
    """All reduced words of length at most t, exact and duplicate-free.

    Words are produced by breadth-first syllable extension, so uniqueness of
    the alternating decomposition guarantees no duplicates.  Raises
    ``ResourceLimitError`` when the ball exceeds ``cap`` elements.
    """
    if t < 0:
        return []
    result: list[ReducedWord] = [IDENTITY]
    frontier: list[tuple[tuple[Letter, ...], int, int]] = [((), 0, -1)]
    factors = ctx.factors
    while frontier:
        nxt = []
        for letters, ln, last in frontier:
            for fidx, fac in enumerate(factors):
                if fidx == last:
                    continue
                budget = t - ln
                for code in fac.elements_up_to(budget):
                    w = letters + ((fidx, code),)
                    result.append(ReducedWord(w))
                    if len(result) > cap:
                        raise ResourceLimitError(
                            f"ball enumeration exceeded the cap of {cap} elements; "
                            "lower the radius or raise the cap",
                            cap=cap,
                        )
                    nxt.append((w, ln + fac.letter_length(code), fidx))
        frontier = nxt
    return result


def sphere_sizes_by_length(ctx: GroupContext, t: int, cap: int = DEFAULT_BALL_CAP) -> list[int]:
    """Counts of reduced words per integer length 0..t."""
    counts = [0] * (t + 1)
    for w in ball_enumerate(ctx, t, cap=cap):
        counts[length(w, ctx)] += 1
    return counts


def theta(ctx: GroupContext, t: float) -> int:
    """Largest factor-ball cardinality at radius t."""
    if t < 0:
        raise MalformedInputError("radius must be non-negative")
    return max(f.ball_size(t) for f in ctx.factors)


def growth_estimate(
    subject: Union[GroupContext, FactorDescriptor],
    n_max: int,
    cap: int = DEFAULT_BALL_CAP,
) -> list[float]:
    """The sequence |B(n)|^(1/n) for n = 1..n_max.

    Accepts either a whole context or a single factor descriptor; the latter
    supports empirical subexponential-growth inspection of factors.
    """
    if n_max < 1:
        raise MalformedInputError("n_max must be at least 1")
    if isinstance(subject, GroupContext):
        counts = sphere_sizes_by_length(subject, n_max, cap=cap)
        sizes = list(itertools.accumulate(counts))
        return [sizes[n] ** (1.0 / n) for n in range(1, n_max + 1)]
    return [subject.ball_size(n) ** (1.0 / n) for n in range(1, n_max + 1)]

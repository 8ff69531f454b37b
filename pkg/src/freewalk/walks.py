"""Sampling and exact computation of word-length laws of right random walks.

Three exact engines coexist:

* ``exact_length_dist_bruteforce``: the general-purpose oracle.  It carries a
  full map from reduced words to probabilities and convolves it with the
  driving measure one step at a time.  Optional pruning drops tiny entries
  and accounts the lost mass as a one-sided error bound.
* ``srw_birth_death_dist``: for uniform nearest-neighbour walks on free
  groups (all factors infinite cyclic, optionally lazy), the length process
  is itself a Markov chain on the non-negative integers, because the uniform
  step law makes the exposed syllable after any cancellation uniform over
  admissible letters.  This one-dimensional recursion reaches step counts in
  the thousands.  Its validity is restricted to free groups and is verified
  against the word-level engines in the test suite.
* ``srw_tree_dist``: a per-word engine specialized to the same walks, with
  reduced words indexed by their position in the regular tree instead of
  hashed.  It evolves one probability per word exactly like the brute-force
  map but stores spheres as flat arrays, which keeps step counts around
  n = 12 tractable where the dictionary blows past 10^8 live words.

Monte Carlo sampling is reproducible and worker-count independent: the
trajectory index range is cut into fixed blocks of ``MC_BLOCK`` trajectories,
and block b draws its seed from splitmix64(master_seed, b).  Workers only
decide how blocks are dispatched; merged counts are identical for any worker
count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import MalformedInputError, ResourceLimitError
from .words import (
    GroupContext,
    IntegerFactor,
    Letter,
    ReducedWord,
    length,
)

MC_BLOCK = 4096
_MASK64 = (1 << 64) - 1

DEFAULT_WORD_CAP = 5_000_000


def splitmix64(master_seed: int, index: int) -> int:
    """Child seed for block ``index``: one splitmix64 avalanche round.

    z = master + (index+1) * 0x9E3779B97F4A7C15, then xor-shift-multiply with
    the standard constants.  Documented so results can be reproduced outside
    this package.
    """
    z = (master_seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class DrivingMeasure:
    """Finitely supported step law on reduced words."""

    entries: tuple[tuple[ReducedWord, float], ...]
    name: str = ""

    def __post_init__(self):
        if not self.entries:
            raise MalformedInputError("a driving measure needs a non-empty support")
        seen = set()
        total = 0.0
        for w, p in self.entries:
            if p <= 0:
                raise MalformedInputError("support probabilities must be positive")
            if w in seen:
                raise MalformedInputError("duplicate word in measure support")
            seen.add(w)
            total += p
        if abs(total - 1.0) > 1e-12:
            raise MalformedInputError(f"probabilities sum to {total}, not 1")

    def max_support_length(self, ctx: GroupContext) -> int:
        return max(length(w, ctx) for w, _ in self.entries)

    def as_uniform_srw(self, ctx: GroupContext) -> Optional[tuple[int, float]]:
        """Recognize a (possibly lazy) uniform nearest-neighbour walk on a
        free group; returns (rank, lazy mass) or None.

        Only contexts whose factors are all infinite cyclic qualify; the
        one-dimensional length recursion must not silently widen beyond free
        groups.
        """
        if any(not isinstance(f, IntegerFactor) for f in ctx.factors):
            return None
        r = ctx.r
        lazy = 0.0
        step_probs = {}
        for w, p in self.entries:
            if w.is_identity:
                lazy = p
                continue
            if len(w.letters) != 1 or abs(w.letters[0][1]) != 1:
                return None
            step_probs[w.letters[0]] = p
        expected = {(f, s) for f in range(r) for s in (1, -1)}
        if set(step_probs) != expected:
            return None
        share = (1.0 - lazy) / (2 * r)
        if any(abs(p - share) > 1e-12 for p in step_probs.values()):
            return None
        return r, lazy


@dataclass(frozen=True)
class LengthDistribution:
    """Law of the word length at a fixed step count.

    ``pruned_mass`` bounds the total probability discarded by pruning, hence
    bounds the error of every reported entry from below-cutoff truncation.
    """

    n: int
    mass: dict[int, float]
    pruned_mass: float = 0.0

    def __post_init__(self):
        total = math.fsum(self.mass.values()) + self.pruned_mass
        if abs(total - 1.0) > 1e-9:
            raise MalformedInputError(
                f"length distribution mass sums to {total}, outside tolerance"
            )
        if any(k < 0 for k in self.mass):
            raise MalformedInputError("lengths must be non-negative")

    def probability(self, k: int) -> float:
        return self.mass.get(k, 0.0)

    def mean(self) -> float:
        return math.fsum(k * p for k, p in self.mass.items())

    def max_length(self) -> int:
        return max(self.mass) if self.mass else 0

    def as_vector(self, size: Optional[int] = None) -> np.ndarray:
        size = (self.max_length() + 1) if size is None else size
        v = np.zeros(size)
        for k, p in self.mass.items():
            v[k] = p
        return v

    def tv_distance(self, other: "LengthDistribution") -> float:
        keys = set(self.mass) | set(other.mass)
        return 0.5 * math.fsum(
            abs(self.probability(k) - other.probability(k)) for k in keys
        )


@dataclass(frozen=True)
class TrajectoryStats:
    """Empirical length counts at one step count."""

    n: int
    sample_count: int
    counts: dict[int, int]
    seed: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.sample_count:
            raise MalformedInputError("counts must sum to the sample count")

    def to_distribution(self) -> LengthDistribution:
        n_total = self.sample_count
        return LengthDistribution(
            self.n, {k: c / n_total for k, c in self.counts.items()}
        )


# -- trajectory sampling ----------------------------------------------------


def _push_letter(stack: list[Letter], letter: Letter, ctx: GroupContext, ln: int) -> int:
    """Append one letter to a mutable word, returning the new length."""
    fidx, code = letter
    fac = ctx.factors[fidx]
    while stack and stack[-1][0] == fidx:
        top = stack.pop()
        ln -= fac.letter_length(top[1])
        merged = fac.mul(top[1], code)
        if fac.is_identity(merged):
            return ln
        code = merged
    stack.append((fidx, code))
    return ln + fac.letter_length(code)


def sample_trajectory(
    measure: DrivingMeasure, ctx: GroupContext, n: int, rng: np.random.Generator
) -> list[int]:
    """Lengths along one walk trajectory: l(Y_0), ..., l(Y_n)."""
    if n < 0:
        raise MalformedInputError("step count must be non-negative")
    words = [w.letters for w, _ in measure.entries]
    probs = np.array([p for _, p in measure.entries])
    cum = np.cumsum(probs)
    draws = np.searchsorted(cum, rng.random(n), side="right")
    stack: list[Letter] = []
    ln = 0
    out = [0]
    for d in draws:
        for letter in words[d]:
            ln = _push_letter(stack, letter, ctx, ln)
        out.append(ln)
    return out


def _simulate_block(args) -> dict[int, int]:
    measure, ctx, n, block_size, child_seed = args
    rng = np.random.default_rng(np.random.PCG64(child_seed))
    words = [w.letters for w, _ in measure.entries]
    probs = np.array([p for _, p in measure.entries])
    cum = np.cumsum(probs)
    counts: dict[int, int] = {}
    draws = np.searchsorted(cum, rng.random((block_size, n)), side="right")
    for row in draws:
        stack: list[Letter] = []
        ln = 0
        for d in row:
            for letter in words[d]:
                ln = _push_letter(stack, letter, ctx, ln)
        counts[ln] = counts.get(ln, 0) + 1
    return counts


def monte_carlo_length_dist(
    measure: DrivingMeasure,
    ctx: GroupContext,
    n: int,
    n_samples: int,
    master_seed: int,
    workers: int = 1,
) -> TrajectoryStats:
    """Empirical law of l(Y_n) over independent trajectories.

    Deterministic for a fixed master seed regardless of the worker count:
    block b of MC_BLOCK trajectories always runs under splitmix64(seed, b).
    """
    if n_samples < 1:
        raise MalformedInputError("need at least one trajectory")
    blocks = []
    start = 0
    b = 0
    while start < n_samples:
        size = min(MC_BLOCK, n_samples - start)
        blocks.append((measure, ctx, n, size, splitmix64(master_seed, b)))
        start += size
        b += 1
    if workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(_simulate_block, blocks))
    else:
        partials = [_simulate_block(blk) for blk in blocks]
    counts: dict[int, int] = {}
    for part in partials:
        for k, c in part.items():
            counts[k] = counts.get(k, 0) + c
    return TrajectoryStats(n, n_samples, counts, master_seed)


# -- exact engines -----------------------------------------------------------


def _flatten(letters: tuple[Letter, ...]) -> tuple[int, ...]:
    out = []
    for f, c in letters:
        out.append(f)
        out.append(c)
    return tuple(out)


def _mul_flat(word: tuple[int, ...], s: tuple[int, ...], muls, idents) -> tuple[int, ...]:
    """Junction-cancelling product of flat (factor, code, factor, code, ...) words."""
    if not s:
        return word
    a = list(word)
    i = 0
    ns = len(s)
    while a and i < ns:
        f = s[i]
        if a[-2] != f:
            break
        merged = muls[f](a[-1], s[i + 1])
        del a[-2:]
        i += 2
        if merged != idents[f]:
            a.append(f)
            a.append(merged)
            break
    return tuple(a) + s[i:]


def _word_map_to_distribution(
    word_map: dict[tuple[int, ...], float],
    n: int,
    pruned: float,
    lets: list,
) -> LengthDistribution:
    by_len: dict[int, list[float]] = {}
    for w, p in word_map.items():
        ln = 0
        for i in range(0, len(w), 2):
            ln += lets[w[i]](w[i + 1])
        by_len.setdefault(ln, []).append(p)
    mass = {k: math.fsum(v) for k, v in sorted(by_len.items())}
    return LengthDistribution(n, mass, pruned)


def exact_length_dist_bruteforce(
    measure: DrivingMeasure,
    ctx: GroupContext,
    n: int,
    prune_threshold: float = 0.0,
    cap: int = DEFAULT_WORD_CAP,
    all_steps: bool = False,
):
    """Exact law of l(Y_n) from a full word-probability map.

    One convolution step per iteration: every live word is multiplied by
    every support element and the probabilities accumulate.  Entries below
    ``prune_threshold`` are dropped into ``pruned_mass`` (the identity entry
    is always kept so return probabilities stay exact).  A zero threshold
    gives the exact law.  Raises ``ResourceLimitError`` when the live word
    count exceeds ``cap``.

    With ``all_steps`` the whole list [law at 0, ..., law at n] is returned.
    """
    if n < 0:
        raise MalformedInputError("step count must be non-negative")
    muls = [f.mul for f in ctx.factors]
    idents = [0] * ctx.r  # the identity code is 0 for every factor kind
    lets = [f.letter_length for f in ctx.factors]
    support = [(_flatten(w.letters), p) for w, p in measure.entries]
    cur: dict[tuple[int, ...], float] = {(): 1.0}
    pruned = 0.0
    snapshots = [_word_map_to_distribution(cur, 0, 0.0, lets)] if all_steps else None
    for step in range(1, n + 1):
        nxt: dict[tuple[int, ...], float] = {}
        get = nxt.get
        for w, p in cur.items():
            for s, q in support:
                nw = _mul_flat(w, s, muls, idents)
                nxt[nw] = get(nw, 0.0) + p * q
        if prune_threshold > 0.0:
            kept = {}
            for w, p in nxt.items():
                if p < prune_threshold and w != ():
                    pruned += p
                else:
                    kept[w] = p
            nxt = kept
        if len(nxt) > cap:
            raise ResourceLimitError(
                f"live word count {len(nxt)} exceeded the cap of {cap} at step "
                f"{step}; provide a prune threshold or raise the cap",
                cap=cap,
            )
        cur = nxt
        if all_steps:
            snapshots.append(_word_map_to_distribution(cur, step, pruned, lets))
    if all_steps:
        return snapshots
    return _word_map_to_distribution(cur, n, pruned, lets)


def _srw_rates(r: int, lazy_prob: float) -> tuple[float, float, float]:
    if r < 1:
        raise MalformedInputError("rank must be at least 1")
    if not (0.0 <= lazy_prob < 1.0):
        raise MalformedInputError("lazy probability must lie in [0, 1)")
    move = 1.0 - lazy_prob
    up = move * (2 * r - 1) / (2 * r)
    down = move / (2 * r)
    return move, up, down


def srw_birth_death_dist(
    r: int, n: int, lazy_prob: float = 0.0, all_steps: bool = False
):
    """Exact length law of the uniform nearest-neighbour walk on the free
    group of rank r, via the one-dimensional birth-death recursion.

    From length 0 the walk moves to 1 with probability 1 - lazy; from k >= 1
    it moves up with (1-lazy)(2r-1)/(2r), down with (1-lazy)/(2r), and stays
    with the lazy mass.  By symmetry of the uniform step law the exposed
    syllable after a cancellation is uniform over admissible letters, so the
    length alone is Markov; the recursion is cross-checked against the
    word-level engines in the tests.  Valid for free groups only.
    """
    move, up, down = _srw_rates(r, lazy_prob)
    p = np.zeros(n + 1)
    p[0] = 1.0
    out = [_vector_to_distribution(p, 0)] if all_steps else None
    for step in range(1, n + 1):
        q = np.zeros(n + 1)
        q[0] = lazy_prob * p[0] + down * p[1]
        q[1:] = lazy_prob * p[1:]
        q[1] += move * p[0]
        if n >= 2:
            q[2:] += up * p[1:-1]
            q[1:-1] += down * p[2:]
        p = q
        if all_steps:
            out.append(_vector_to_distribution(p, step))
    if all_steps:
        return out
    return _vector_to_distribution(p, n)


def _vector_to_distribution(p: np.ndarray, n: int) -> LengthDistribution:
    mass = {k: float(v) for k, v in enumerate(p) if v > 0.0}
    return LengthDistribution(n, mass)


def srw_tree_dist(r: int, n: int, lazy_prob: float = 0.0) -> LengthDistribution:
    """Exact length law of the uniform (possibly lazy) nearest-neighbour walk
    on the free group of rank r, carrying one probability per reduced word.

    Words are laid out sphere by sphere in the regular tree: the sphere of
    radius k+1 lists, for each word w of the previous sphere, its 2r-1
    geodesic extensions as a contiguous block (2r extensions from the
    identity).  Appending a letter maps index i to block i; erasing the last
    letter maps a block back to its parent.  This is the same per-word
    computation the brute-force map performs, with hashing replaced by the
    positional indexing, and it is exact.

    Memory grows like the ball of radius n, so this engine is for moderate
    step counts where the dictionary engine no longer fits.
    """
    move, up_total, down = _srw_rates(r, lazy_prob)
    step_prob = move / (2 * r)  # probability of each specific letter
    branch = 2 * r - 1
    spheres: list[np.ndarray] = [np.array([1.0])]
    for _ in range(n):
        k_top = len(spheres) - 1
        new: list[np.ndarray] = [None] * (k_top + 2)
        for k in range(k_top + 2):
            if k == 0:
                acc = lazy_prob * spheres[0]
                if k_top >= 1:
                    acc = acc + step_prob * spheres[1].sum()
                new[0] = acc
            else:
                parent = spheres[k - 1]
                width = 2 * r if k == 1 else branch
                arr = np.repeat(parent, width)
                arr *= step_prob
                if lazy_prob > 0.0 and k <= k_top:
                    arr += lazy_prob * spheres[k]
                if k + 1 <= k_top:
                    child_width = 2 * r if k + 1 == 1 else branch
                    arr += step_prob * spheres[k + 1].reshape(-1, child_width).sum(axis=1)
                new[k] = arr
            if k >= 2:
                spheres[k - 2] = None  # release as soon as no longer needed
        spheres = new
    mass = {k: float(arr.sum()) for k, arr in enumerate(spheres) if arr.sum() > 0.0}
    return LengthDistribution(n, mass)


# -- derived quantities -------------------------------------------------------


def return_probability(
    measure: DrivingMeasure,
    ctx: GroupContext,
    n: int,
    prune_threshold: float = 0.0,
    cap: int = DEFAULT_WORD_CAP,
) -> float:
    """P(Y_n = e), read off the identity entry of the brute-force engine."""
    dist = exact_length_dist_bruteforce(measure, ctx, n, prune_threshold, cap)
    return dist.probability(0)


@dataclass(frozen=True)
class SpectralRadiusEstimate:
    sequence: tuple[tuple[int, float], ...]
    estimate: float
    minus_log_estimate: float


def estimate_spectral_radius(
    measure: DrivingMeasure,
    ctx: GroupContext,
    n_max: int,
    cap: int = DEFAULT_WORD_CAP,
) -> SpectralRadiusEstimate:
    """The sequence P(Y_{2n} = e)^(1/2n) and its last value as estimate.

    Uniform nearest-neighbour walks on free groups route through the
    birth-death recursion; any other measure uses the brute-force engine, so
    n_max is then bounded by the word cap.  The companion value -log(rho)
    feeds the comparison against the empirical rate at zero.
    """
    srw = measure.as_uniform_srw(ctx)
    seq: list[tuple[int, float]] = []
    if srw is not None:
        r, lazy = srw
        dists = srw_birth_death_dist(r, n_max, lazy, all_steps=True)
        for m in range(2, n_max + 1, 2):
            p0 = dists[m].probability(0)
            if p0 > 0.0:
                seq.append((m, p0 ** (1.0 / m)))
    else:
        dists = exact_length_dist_bruteforce(
            measure, ctx, n_max, prune_threshold=0.0, cap=cap, all_steps=True
        )
        for m in range(2, n_max + 1, 2):
            p0 = dists[m].probability(0)
            if p0 > 0.0:
                seq.append((m, p0 ** (1.0 / m)))
    if not seq:
        est = 0.0
        minus_log = math.inf
    else:
        est = seq[-1][1]
        minus_log = -math.log(est)
    return SpectralRadiusEstimate(tuple(seq), est, minus_log)


@dataclass(frozen=True)
class EscapeRateEstimate:
    lambda_hat: float
    std_error: float
    n: int
    sample_count: int
    seed: int


def estimate_escape_rate(
    measure: DrivingMeasure,
    ctx: GroupContext,
    n: int,
    n_samples: int,
    seed: int,
    workers: int = 1,
) -> EscapeRateEstimate:
    """Mean of l(Y_n)/n over sampled trajectories, with its standard error."""
    stats = monte_carlo_length_dist(measure, ctx, n, n_samples, seed, workers)
    mean = sum(k * c for k, c in stats.counts.items()) / (n * n_samples)
    var = sum(c * (k / n - mean) ** 2 for k, c in stats.counts.items())
    var /= max(1, n_samples - 1)
    return EscapeRateEstimate(mean, math.sqrt(var / n_samples), n, n_samples, seed)


def uniform_srw_measure(ctx: GroupContext, lazy_prob: float = 0.0) -> DrivingMeasure:
    """Uniform measure on the generators and inverses, optionally lazy."""
    if any(not isinstance(f, IntegerFactor) for f in ctx.factors):
        raise MalformedInputError("uniform SRW helper expects a free group context")
    r = ctx.r
    share = (1.0 - lazy_prob) / (2 * r)
    entries = []
    if lazy_prob > 0.0:
        entries.append((ReducedWord(), lazy_prob))
    for f in range(r):
        entries.append((ReducedWord(((f, 1),)), share))
        entries.append((ReducedWord(((f, -1),)), share))
    return DrivingMeasure(tuple(entries), name=f"srw-free-{r}" + (f"-lazy{lazy_prob}" if lazy_prob else ""))

"""Rate functions, limiting log-moment-generating brackets and conjugates.

The empirical rate at a point x is read from an exact length law at step n
as -(1/n) log of the mass the law puts on the open window (n(x-eps),
n(x+eps)); window boundaries are excluded.  The limiting scaled log-MGF is
bracketed through subadditivity (for non-negative tilts the running minimum
of a_n/n is a certified upper bound; for negative tilts the running maximum
is a certified lower bound), and its convex conjugate recovers the rate
function on a tilt grid with concave refinement.

Tilted evolutions run with per-step renormalization so that step counts in
the thousands never overflow or underflow, even where the raw length law
leaves double-precision range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import MalformedInputError
from .walks import (
    DrivingMeasure,
    LengthDistribution,
    exact_length_dist_bruteforce,
    estimate_spectral_radius,
    srw_birth_death_dist,
)
from .words import GroupContext, length as word_length

INF = math.inf


def closed_form_rate_srw_free(r: int, x: float) -> float:
    """Rate function of the uniform nearest-neighbour walk on a free group.

    On [0, 1]:
        (1+x)/2 log(1+x) + (1-x)/2 log(1-x) + log r - (1+x)/2 log(2r-1),
    with the convention 0 log 0 = 0; infinite outside.  Its unique zero on
    [0, 1] sits at 1 - 1/r, the escape rate.
    """
    if r < 1:
        raise MalformedInputError("rank must be at least 1")
    if x < 0 or x > 1:
        return INF
    def xlogx(v: float) -> float:
        return 0.0 if v == 0.0 else v * math.log(v)
    return (
        0.5 * xlogx(1.0 + x)
        + 0.5 * xlogx(1.0 - x)
        + math.log(r)
        - 0.5 * (1.0 + x) * math.log(2 * r - 1)
    )


@dataclass(frozen=True)
class RateCurve:
    """Sampled rate curve; values may be infinite, encoded as math.inf.

    Provenance tags each point as closed-form, empirical(n, eps) or
    legendre.  ``caveats`` marks points whose emptiness may be a pruning
    artifact.
    """

    xs: tuple[float, ...]
    values: tuple[float, ...]
    provenance: tuple[str, ...]
    error_bars: tuple[float, ...] = ()
    caveats: tuple[bool, ...] = ()

    def value_at(self, x: float) -> float:
        return self.values[self.xs.index(x)]


def closed_form_curve(r: int, xs: Sequence[float]) -> RateCurve:
    vals = tuple(closed_form_rate_srw_free(r, x) for x in xs)
    return RateCurve(tuple(xs), vals, tuple("closed-form" for _ in xs))


def empirical_rate_point(dist: LengthDistribution, x: float, eps: float) -> tuple[float, bool]:
    """-(1/n) log mass of the open window (n(x-eps), n(x+eps)).

    Returns the value and a caveat flag set when the window is empty while
    pruned mass could have landed there.
    """
    if eps <= 0:
        raise MalformedInputError("window half-width must be positive")
    n = dist.n
    lo = n * (x - eps)
    hi = n * (x + eps)
    mass = math.fsum(
        p for k, p in dist.mass.items() if lo < k < hi
    )
    if mass <= 0.0:
        return INF, dist.pruned_mass > 0.0
    return -math.log(mass) / n, False


def empirical_rate_curve(
    dist_provider: Callable[[int], LengthDistribution],
    n_schedule: Sequence[int],
    xs: Sequence[float],
    eps: float,
) -> dict[int, RateCurve]:
    """One empirical curve per step count in the schedule."""
    out: dict[int, RateCurve] = {}
    for n in n_schedule:
        dist = dist_provider(n)
        vals, cavs = [], []
        for x in xs:
            v, c = empirical_rate_point(dist, x, eps)
            vals.append(v)
            cavs.append(c)
        out[n] = RateCurve(
            tuple(xs),
            tuple(vals),
            tuple(f"empirical(n={n},eps={eps})" for _ in xs),
            caveats=tuple(cavs),
        )
    return out


@dataclass(frozen=True)
class MgfBracket:
    """Bracket for the limiting scaled log-MGF at one tilt.

    For z >= 0 the upper end is the subadditive (Fekete) bound min a_n/n and
    is certain; for z < 0 the lower end is the superadditive bound max
    a_n/n.  The facing end is the last computed a_n/n, a heuristic that in
    practice coincides with the certified end.  Pruned mass widens the
    certified end for positive tilts by its worst-case contribution.
    """

    z: float
    lower: float
    upper: float
    n_used: int

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise MalformedInputError("bracket ends are crossed")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower


class SrwMgfProvider:
    """Length-law and tilted-series provider for free-group uniform walks.

    The length vectors are evolved once and cached; each tilt z then gets an
    exact renormalized tilted evolution, yielding the whole series
    a_n = log E[exp(z l(Y_n))] for n = 1..n_max without leaving
    double-precision range.
    """

    def __init__(self, r: int, n_max: int, lazy_prob: float = 0.0):
        self.r = r
        self.n_max = n_max
        self.lazy_prob = lazy_prob
        self.l_max = 1
        self._dists: Optional[list[LengthDistribution]] = None

    def length_dist(self, n: int) -> LengthDistribution:
        if n > self.n_max:
            raise MalformedInputError(f"n={n} beyond provider horizon {self.n_max}")
        if self._dists is None:
            self._dists = srw_birth_death_dist(
                self.r, self.n_max, self.lazy_prob, all_steps=True
            )
        return self._dists[n]

    def pruned_mass(self, n: int) -> float:
        return 0.0

    def mgf_log_series(self, z: float) -> np.ndarray:
        """a_n for n = 1..n_max via the tilted birth-death evolution."""
        r, n = self.r, self.n_max
        lazy = self.lazy_prob
        move = 1.0 - lazy
        up = move * (2 * r - 1) / (2 * r)
        down = move / (2 * r)
        ez = math.exp(z)
        iz = math.exp(-z)
        w = np.zeros(n + 1)
        w[0] = 1.0
        log_scale = 0.0
        out = np.empty(n)
        for step in range(1, n + 1):
            q = np.zeros(n + 1)
            # tilted kernel: moving up multiplies the weight by e^z,
            # moving down by e^-z, staying leaves it unchanged
            q[0] = lazy * w[0] + down * iz * w[1]
            q[1:] = lazy * w[1:]
            q[1] += move * ez * w[0]
            q[2:] += up * ez * w[1:-1]
            q[1:-1] += down * iz * w[2:]
            total = q.sum()
            q /= total
            log_scale += math.log(total)
            w = q
            out[step - 1] = log_scale
        return out


class BruteForceMgfProvider:
    """Same interface over the generic word-map engine, for small horizons."""

    def __init__(
        self,
        measure: DrivingMeasure,
        ctx: GroupContext,
        n_max: int,
        prune_threshold: float = 0.0,
        cap: int = 5_000_000,
    ):
        self.measure = measure
        self.ctx = ctx
        self.n_max = n_max
        self.l_max = measure.max_support_length(ctx)
        self._dists = exact_length_dist_bruteforce(
            measure, ctx, n_max, prune_threshold, cap, all_steps=True
        )

    def length_dist(self, n: int) -> LengthDistribution:
        return self._dists[n]

    def pruned_mass(self, n: int) -> float:
        return self._dists[n].pruned_mass

    def mgf_log_series(self, z: float) -> np.ndarray:
        out = np.empty(self.n_max)
        for n in range(1, self.n_max + 1):
            d = self._dists[n]
            terms = [z * k + math.log(p) for k, p in d.mass.items() if p > 0.0]
            m = max(terms)
            out[n - 1] = m + math.log(math.fsum(math.exp(t - m) for t in terms))
        return out


def log_mgf_bracket(provider, z: float, n_max: Optional[int] = None) -> MgfBracket:
    """Fekete bracket for the limiting scaled log-MGF at tilt z.

    z = 0 short-circuits to the exact bracket (0, 0): the MGF of any
    probability law is 1 there.  For z > 0 entries are widened by the
    worst-case contribution of pruned mass (placed at the maximal length)
    before taking the certified minimum.
    """
    n_max = provider.n_max if n_max is None else min(n_max, provider.n_max)
    if n_max < 1:
        raise MalformedInputError("need at least one step")
    if z == 0.0:
        return MgfBracket(0.0, 0.0, 0.0, n_max)  # the MGF of any law is 1 at z = 0
    series = provider.mgf_log_series(z)[:n_max]
    ns = np.arange(1, n_max + 1)
    if z > 0.0:
        widened = series.copy()
        for i, n in enumerate(ns):
            pm = provider.pruned_mass(int(n))
            if pm > 0.0:
                widened[i] = np.logaddexp(series[i], math.log(pm) + z * n * provider.l_max)
        ratios = widened / ns
        fekete = float(ratios.min())
        last = float(series[-1] / n_max)
        return MgfBracket(z, min(last, fekete), fekete, n_max)
    ratios = series / ns
    fekete = float(ratios.max())
    last = float(series[-1] / n_max)
    return MgfBracket(z, fekete, max(last, fekete), n_max)


def memoized_bracket_fn(provider, n_max: Optional[int] = None) -> Callable[[float], MgfBracket]:
    """Bracket evaluator with a shared cache, for conjugates over many x."""
    cache: dict[float, MgfBracket] = {}

    def fn(z: float) -> MgfBracket:
        if z not in cache:
            cache[z] = log_mgf_bracket(provider, z, n_max)
        return cache[z]

    return fn


@dataclass(frozen=True)
class LegendreValue:
    """Convex conjugate sup_z (z x - Lambda(z)) evaluated numerically."""

    x: float
    value: float
    error_bar: float
    z_star: float
    boundary: bool


def fenchel_legendre(
    bracket_fn: Callable[[float], MgfBracket],
    x: float,
    z_grid: Sequence[float],
    refinement: int = 20,
) -> LegendreValue:
    """Maximize z x - Lambda(z) over a tilt grid, then refine.

    The objective is concave in z, so after the grid scan a ternary search
    narrows the hosting interval.  The boundary flag reports a supremum
    attained at the grid edge, where the true value may lie outside the
    range.  Bracket widths propagate into the error bar.
    """
    if x < 0:
        raise MalformedInputError("the rate function lives on the non-negative axis")
    zs = sorted(z_grid)
    if len(zs) < 3:
        raise MalformedInputError("tilt grid needs at least three points")
    cache: dict[float, MgfBracket] = {}

    def h(z: float) -> float:
        if z not in cache:
            cache[z] = bracket_fn(z)
        return z * x - cache[z].midpoint

    vals = [h(z) for z in zs]
    best = int(np.argmax(vals))
    boundary = best in (0, len(zs) - 1)
    lo = zs[max(0, best - 1)]
    hi = zs[min(len(zs) - 1, best + 1)]
    for _ in range(refinement):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if h(m1) < h(m2):
            lo = m1
        else:
            hi = m2
    z_star = 0.5 * (lo + hi)
    value = h(z_star)
    width = cache[z_star].width if z_star in cache else 0.0
    probe = max(abs(h(lo) - value), abs(h(hi) - value))
    # the conjugate is non-negative: the zero tilt contributes z*x - 0 = 0
    return LegendreValue(x, max(value, 0.0), 0.5 * width + probe, z_star, boundary)


def legendre_curve(
    bracket_fn: Callable[[float], MgfBracket],
    xs: Sequence[float],
    z_grid: Sequence[float],
    refinement: int = 20,
) -> RateCurve:
    pts = [fenchel_legendre(bracket_fn, x, z_grid, refinement) for x in xs]
    return RateCurve(
        tuple(xs),
        tuple(p.value for p in pts),
        tuple("legendre" for _ in pts),
        error_bars=tuple(p.error_bar for p in pts),
        caveats=tuple(p.boundary for p in pts),
    )


# -- consistency report --------------------------------------------------------


@dataclass(frozen=True)
class ConsistencyParams:
    n_schedule: tuple[int, ...] = (100, 400, 1000)
    eps: float = 0.02
    x_grid: tuple[float, ...] = tuple(i / 20 for i in range(21))
    tau: float = 0.5
    big_m: float = 2.0
    word_cap: int = 5_000_000


@dataclass(frozen=True)
class ConsistencyReport:
    """Numerical checks tying the rate curve to walk quantities.

    The midpoint-convexity residuals are reported, not asserted: curves at a
    finite step count need not be convex.
    """

    escape_rate_hat: float
    rate_at_escape: tuple[tuple[int, float], ...]
    i_zero_hat: float
    minus_log_rho_hat: float
    zero_inequality_satisfied: bool
    support_max_ratio: float
    support_within_bound: bool
    midpoint_convexity_worst: float
    midpoint_residuals: tuple[float, ...]
    exp_tightness: tuple[tuple[int, float, float], ...]
    exp_tightness_satisfied: bool

    def to_dict(self) -> dict:
        return {
            "escape_rate_hat": self.escape_rate_hat,
            "rate_at_escape": [list(t) for t in self.rate_at_escape],
            "i_zero_hat": self.i_zero_hat,
            "minus_log_rho_hat": self.minus_log_rho_hat,
            "zero_inequality_satisfied": self.zero_inequality_satisfied,
            "support_max_ratio": self.support_max_ratio,
            "support_within_bound": self.support_within_bound,
            "midpoint_convexity_worst": self.midpoint_convexity_worst,
            "midpoint_residuals": list(self.midpoint_residuals),
            "exp_tightness": [list(t) for t in self.exp_tightness],
            "exp_tightness_satisfied": self.exp_tightness_satisfied,
        }


def consistency_report(
    measure: DrivingMeasure,
    ctx: GroupContext,
    params: ConsistencyParams = ConsistencyParams(),
) -> ConsistencyReport:
    """Cross-checks between exact laws, the spectral radius and the rate curve.

    Covers: the rate at the empirical escape rate trending to zero, the
    value at zero against -log of the spectral radius estimate, the support
    staying inside [0, L n], midpoint-convexity residuals of the empirical
    curve at the largest scheduled n, and the Markov exponential-tightness
    surrogate (1/n) log P(l(Y_n) > n M) <= log C(tau) - tau M.
    """
    srw = measure.as_uniform_srw(ctx)
    n_top = max(params.n_schedule)
    if srw is not None:
        r, lazy = srw
        dists = srw_birth_death_dist(r, n_top, lazy, all_steps=True)
    else:
        dists = exact_length_dist_bruteforce(
            measure, ctx, n_top, 0.0, params.word_cap, all_steps=True
        )
    provider = {n: dists[n] for n in params.n_schedule}
    l_max = measure.max_support_length(ctx)

    lam_hat = provider[n_top].mean() / n_top
    rate_at_escape = []
    for n in params.n_schedule:
        v, _ = empirical_rate_point(provider[n], lam_hat, params.eps)
        rate_at_escape.append((n, v))

    i_zero, _ = empirical_rate_point(provider[n_top], 0.0, params.eps)
    rho = estimate_spectral_radius(measure, ctx, n_top, cap=params.word_cap)

    support_ratio = max(
        (dists[n].max_length() / (n * l_max)) if n > 0 else 0.0
        for n in params.n_schedule
    )

    xs = params.x_grid
    curve = empirical_rate_curve(lambda n: provider[n], [n_top], xs, params.eps)[n_top]
    residuals = []
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            mid = 0.5 * (xs[i] + xs[j])
            if mid in xs:
                k = xs.index(mid)
                a, b, m = curve.values[i], curve.values[j], curve.values[k]
                if math.isfinite(a) and math.isfinite(b) and math.isfinite(m):
                    residuals.append(max(0.0, m - 0.5 * (a + b)))
    worst_residual = max(residuals) if residuals else 0.0

    log_c = math.log(
        math.fsum(
            p * math.exp(params.tau * word_length(w, ctx)) for w, p in measure.entries
        )
    )
    tight = []
    ok = True
    for n in params.n_schedule:
        tail = math.fsum(p for k, p in provider[n].mass.items() if k > n * params.big_m)
        lhs = -INF if tail <= 0.0 else math.log(tail) / n
        rhs = log_c - params.tau * params.big_m
        tight.append((n, lhs, rhs))
        if lhs > rhs + 1e-9:
            ok = False

    return ConsistencyReport(
        escape_rate_hat=lam_hat,
        rate_at_escape=tuple(rate_at_escape),
        i_zero_hat=i_zero,
        minus_log_rho_hat=rho.minus_log_estimate,
        zero_inequality_satisfied=i_zero <= rho.minus_log_estimate + 1e-6
        or not math.isfinite(rho.minus_log_estimate),
        support_max_ratio=support_ratio,
        support_within_bound=support_ratio <= 1.0 + 1e-12,
        midpoint_convexity_worst=worst_residual,
        midpoint_residuals=tuple(residuals),
        exp_tightness=tuple(tight),
        exp_tightness_satisfied=ok,
    )

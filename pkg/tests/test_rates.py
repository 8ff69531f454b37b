import math

import numpy as np
import pytest

from freewalk.rates import (
    BruteForceMgfProvider,
    ConsistencyParams,
    SrwMgfProvider,
    closed_form_curve,
    closed_form_rate_srw_free,
    consistency_report,
    empirical_rate_curve,
    empirical_rate_point,
    fenchel_legendre,
    legendre_curve,
    log_mgf_bracket,
    memoized_bracket_fn,
)
from freewalk.walks import (
    DrivingMeasure,
    srw_birth_death_dist,
    uniform_srw_measure,
)



I = closed_form_rate_srw_free


def test_closed_form_values():
    assert I(2, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert I(2, 0.0) == pytest.approx(math.log(2) - 0.5 * math.log(3), abs=1e-15)
    assert I(2, 0.0) == pytest.approx(0.143841, abs=1e-6)
    assert I(2, 1.0) == pytest.approx(math.log(4 / 3), abs=1e-15)
    assert I(2, 1.5) == math.inf
    assert I(2, -0.1) == math.inf
    # rank one reduces to the symmetric walk on the integers
    assert I(1, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_closed_form_convex_on_fine_grid():
    h = 1e-3
    for r in (2, 3, 5):
        xs = np.arange(0.0, 1.0 + h / 2, h)
        vals = np.array([I(r, x) for x in xs])
        second = vals[2:] - 2 * vals[1:-1] + vals[:-2]
        assert second.min() >= -1e-9


def _rate_derivative(r, x):
    # analytic derivative, used as an independent root oracle
    return 0.5 * math.log((1 + x) / (1 - x)) - 0.5 * math.log(2 * r - 1)


@pytest.mark.parametrize("r", [2, 3, 5])
def test_unique_zero_at_escape_rate(r):
    lo, hi = 1e-12, 1.0 - 1e-12
    assert _rate_derivative(r, lo) < 0 < _rate_derivative(r, hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _rate_derivative(r, mid) < 0:
            lo = mid
        else:
            hi = mid
    x_min = 0.5 * (lo + hi)
    assert x_min == pytest.approx(1 - 1 / r, abs=1e-9)
    assert I(r, x_min) == pytest.approx(0.0, abs=1e-12)
    assert I(r, 0.0) > 0 and I(r, 1.0) > 0


def test_empirical_rate_open_window():
    dist = srw_birth_death_dist(2, 10)
    # at x = 0.2, eps = 0.2 the window is (0, 4): boundary length 4 excluded
    v, _ = empirical_rate_point(dist, 0.2, 0.2)
    expected = -math.log(dist.probability(2)) / 10
    assert v == pytest.approx(expected, abs=1e-12)


def test_empirical_rate_curve_trends(free2, srw2):
    dists = srw_birth_death_dist(2, 800, all_steps=True)
    curves = empirical_rate_curve(lambda n: dists[n], [200, 800], [0.0, 0.5], 0.02)
    # the value at the escape rate shrinks toward zero
    assert curves[800].value_at(0.5) < curves[200].value_at(0.5)
    assert curves[800].value_at(0.5) < 0.01
    # beyond the maximal speed everything is infinite
    far = empirical_rate_curve(lambda n: dists[n], [800], [1.5, 2.0], 0.02)[800]
    assert all(v == math.inf for v in far.values)


def test_empirical_rate_at_zero_matches_closed_form():
    dist = srw_birth_death_dist(2, 2000)
    v, _ = empirical_rate_point(dist, 0.0, 0.02)
    assert v == pytest.approx(0.143841, abs=0.02)


def test_mgf_bracket_zero_exact():
    prov = SrwMgfProvider(2, 50)
    b = log_mgf_bracket(prov, 0.0)
    assert b.lower == 0.0 and b.upper == 0.0


def test_mgf_point_mass_linear(free2):
    mu_a = DrivingMeasure(((free2.parse_word("a"), 1.0),))
    prov = BruteForceMgfProvider(mu_a, free2, 12)
    for z in (-0.7, 0.3, 1.1):
        b = log_mgf_bracket(prov, z)
        assert b.lower == pytest.approx(z, abs=1e-12)
        assert b.upper == pytest.approx(z, abs=1e-12)


def test_mgf_bracket_sides_and_jensen():
    prov = SrwMgfProvider(2, 600)
    b = log_mgf_bracket(prov, 1.0)
    assert b.lower <= b.upper
    # Jensen hook: the limit dominates z times the escape rate
    assert b.upper >= 1.0 * 0.5
    bneg = log_mgf_bracket(prov, -1.0)
    assert bneg.lower <= bneg.upper <= 0.0


def test_mgf_bracket_nesting():
    prov = SrwMgfProvider(2, 400)
    for z in (0.5, -0.5):
        widths = []
        uppers = []
        lowers = []
        for n_max in (100, 200, 400):
            b = log_mgf_bracket(prov, z, n_max)
            widths.append(b.width)
            uppers.append(b.upper)
            lowers.append(b.lower)
        assert widths[0] >= widths[1] >= widths[2]
        if z > 0:
            assert uppers[0] >= uppers[1] >= uppers[2]
        else:
            assert lowers[0] <= lowers[1] <= lowers[2]


def test_mgf_srw_vs_bruteforce_series(free2, srw2):
    srw_prov = SrwMgfProvider(2, 10)
    bf_prov = BruteForceMgfProvider(srw2, free2, 10)
    for z in (-0.8, 0.4, 1.3):
        a = srw_prov.mgf_log_series(z)
        b = bf_prov.mgf_log_series(z)
        assert np.max(np.abs(a - b)) < 1e-10


def test_mgf_pruning_widens_upper(free2, srw2):
    exact = BruteForceMgfProvider(srw2, free2, 10)
    pruned = BruteForceMgfProvider(srw2, free2, 10, prune_threshold=1e-3)
    z = 0.8
    be = log_mgf_bracket(exact, z)
    bp = log_mgf_bracket(pruned, z)
    assert bp.upper >= be.upper - 1e-12
    # the widened upper end still brackets the exact value
    assert be.upper <= bp.upper + 1e-12


def test_fenchel_legendre_matches_closed_form():
    prov = SrwMgfProvider(2, 1200)
    fn = memoized_bracket_fn(prov)
    zg = list(np.linspace(-2, 2, 25))
    for x in (0.3, 0.5, 0.7):
        lv = fenchel_legendre(fn, x, zg, refinement=12)
        assert lv.value == pytest.approx(I(2, x), abs=0.02)
        assert not lv.boundary
    assert fenchel_legendre(fn, 0.5, zg, refinement=12).value <= 1e-3


def test_fenchel_legendre_boundary_flag():
    prov = SrwMgfProvider(2, 300)
    fn = memoized_bracket_fn(prov)
    zg = list(np.linspace(-0.05, 0.05, 5))
    lv = fenchel_legendre(fn, 0.99, zg, refinement=4)
    assert lv.boundary


def test_legendre_curve_convex_in_x():
    prov = SrwMgfProvider(2, 800)
    fn = memoized_bracket_fn(prov)
    xs = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    curve = legendre_curve(fn, xs, list(np.linspace(-2, 2, 21)), refinement=10)
    vals = np.array(curve.values)
    second = vals[2:] - 2 * vals[1:-1] + vals[:-2]
    tol = 3 * (max(curve.error_bars) + 1e-9)
    assert second.min() >= -tol


def test_consistency_report_srw(free2, srw2):
    params = ConsistencyParams(n_schedule=(100, 400, 1000))
    rep = consistency_report(srw2, free2, params)
    assert rep.escape_rate_hat == pytest.approx(0.5, abs=0.01)
    assert rep.zero_inequality_satisfied
    assert rep.i_zero_hat == pytest.approx(rep.minus_log_rho_hat, abs=0.02)
    assert rep.support_within_bound
    assert rep.exp_tightness_satisfied
    # the rate at the empirical escape rate trends to zero
    vals = [v for _, v in rep.rate_at_escape]
    assert vals[-1] < vals[0] and vals[-1] < 0.01
    d = rep.to_dict()
    assert set(d) >= {"escape_rate_hat", "i_zero_hat", "minus_log_rho_hat"}


def test_consistency_report_point_mass(free2):
    mu_a = DrivingMeasure(((free2.parse_word("a"), 1.0),))
    params = ConsistencyParams(n_schedule=(5, 9, 16), x_grid=(0.0, 0.5, 1.0, 1.5))
    rep = consistency_report(mu_a, free2, params)
    assert rep.escape_rate_hat == pytest.approx(1.0)
    assert not math.isfinite(rep.minus_log_rho_hat)  # the walk never returns
    assert rep.support_within_bound


def test_consistency_report_lazy_has_positive_radius(free2):
    mu = uniform_srw_measure(free2, 0.25)
    params = ConsistencyParams(n_schedule=(50, 150))
    rep = consistency_report(mu, free2, params)
    assert math.isfinite(rep.minus_log_rho_hat)
    assert rep.minus_log_rho_hat > 0
    assert rep.zero_inequality_satisfied


def test_closed_form_curve_infinite_tail():
    curve = closed_form_curve(2, [0.0, 0.5, 1.0, 1.25])
    assert curve.values[-1] == math.inf
    assert curve.provenance[0] == "closed-form"

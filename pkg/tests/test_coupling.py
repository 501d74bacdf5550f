import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from urnlab.coupling import (
    EXACT,
    MONTE_CARLO,
    couple_samples,
    default_gamma,
    lhs_box_law,
    main2_discrepancy,
    modif_expectation,
    modif_probability_exact,
    resampled_colors,
    rhs_box_law,
    schedule_window,
    tail_mass,
    tail_record_estimate,
)
from urnlab.displacement import DisplacementModel
from urnlab.measure import box_index, ks_critical, ks_distance, l1_box_discrepancy
from urnlab.streams import derive_rng
from urnlab.urn import UrnState, simulate_urn

CAUCHY = DisplacementModel.cauchy()
GAUSS = DisplacementModel.gaussian()


@pytest.fixture(scope="module")
def urn16():
    # T_16 = 1918, T_17 = 2239
    return simulate_urn(CAUCHY, schedule_window(16)[1], 1)


def rigged_urn(model, n, above):
    """Urn whose window parents are all above T_n (``above``) or all at ball 1."""
    t, t1, _ = schedule_window(n)
    rng = np.random.default_rng(0)
    parents = rng.integers(0, np.arange(1, t1))
    i = np.arange(t, t1)  # 0-based balls in the window
    parents[i - 1] = i - 1 if above else 0
    colors = np.empty((t1, 1))
    d = rng.standard_cauchy(t1)
    colors[0, 0] = d[0]
    for k in range(1, t1):
        colors[k, 0] = colors[parents[k - 1], 0] + d[k]
    return UrnState(model, 0, colors, parents)


# modification statistic -----------------------------------------------------------


def test_modif_extremes():
    n = 8
    assert modif_probability_exact(rigged_urn(CAUCHY, n, above=False), n) == 0.0
    t, t1, p = schedule_window(n)
    assert p == float(Fraction(109, 512))
    # U_{T+1} <= T always, so at most window - 1 indicators can fire
    assert modif_probability_exact(rigged_urn(CAUCHY, n, above=True), n) == (t1 - t - 1) / t1


def test_modif_expectation_oracle():
    t, t1 = 403, 512
    exact = sum(Fraction(i - 1 - t, (i - 1) * t1) for i in range(t + 1, t1 + 1))
    assert modif_expectation(8) == pytest.approx(float(exact), rel=1e-14)
    assert modif_expectation(8) == pytest.approx(0.024258, abs=1e-6)


def test_modif_mean_over_replicas():
    n = 8
    t1 = schedule_window(n)[1]
    vals = np.array([modif_probability_exact(simulate_urn(CAUCHY, t1, 3, r), n) for r in range(60)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - modif_expectation(n)) <= 4 * se


def test_modif_needs_enough_balls():
    with pytest.raises(ValueError):
        modif_probability_exact(simulate_urn(CAUCHY, 500, 0), 8)


# resampling -------------------------------------------------------------------------


def test_resampling_keeps_early_parents():
    s = rigged_urn(CAUCHY, 8, above=False)
    colors, mask = resampled_colors(s, 8, derive_rng(0))
    assert not mask.any()
    assert np.array_equal(colors, s.colors[403:512])


def test_resampling_point_mass_zero():
    s = simulate_urn(DisplacementModel.point_mass(0.0), 512, 0)
    colors, _ = resampled_colors(s, 8, derive_rng(0))
    assert np.all(colors == 0.0)


def test_resampled_fraction():
    n = 40
    t, t1, p = schedule_window(n)
    s = simulate_urn(CAUCHY, t1, 5)
    _, mask = resampled_colors(s, n, derive_rng(5))
    window = t1 - t
    # P(U_i > T) = (i - 1 - T) / (i - 1) rises from 0 across the window
    q = math.fsum((i - 1 - t) / (i - 1) for i in range(t + 1, t1 + 1)) / window
    assert q == pytest.approx(modif_expectation(n) * t1 / window)
    assert 0.4 * p < q < 0.6 * p
    assert abs(mask.mean() - q) <= 4 * math.sqrt(q / window)
    assert mask.sum() / t1 == modif_probability_exact(s, n)


def test_resampled_colors_follow_rhs_convolution():
    # a resampled ball is X_U + D with U uniform on the first T balls
    n = 8
    t, t1, _ = schedule_window(n)
    s = rigged_urn(CAUCHY, n, above=True)
    rng = derive_rng(6)
    draws = np.concatenate([resampled_colors(s, n, rng)[0][:, 0] for _ in range(60)])
    atoms = s.colors[:t, 0]
    cdf = lambda y: stats.cauchy.cdf(np.asarray(y)[:, None] - atoms[None, :]).mean(axis=1)  # noqa: E731
    assert ks_distance(draws, cdf) < ks_critical(draws.size)


# box laws -----------------------------------------------------------------------------


def test_lhs_point_mass():
    s = simulate_urn(DisplacementModel.point_mass(0.0), 512, 0)
    assert lhs_box_law(s, 8, 0.05).as_dict() == {(0,): 1.0}


def test_lhs_is_exact_recount(urn16):
    h = 0.05
    law = lhs_box_law(urn16, 16, h)
    assert law.total == pytest.approx(1.0, abs=1e-12)
    counts = {}
    t1 = schedule_window(16)[1]
    for x in urn16.colors[:t1, 0]:
        k = box_index(x, h)
        counts[k] = counts.get(k, 0) + 1
    got = law.as_dict()
    assert got.keys() == counts.keys()
    assert all(got[k] == pytest.approx(c / t1, rel=1e-12) for k, c in counts.items())
    assert lhs_box_law(urn16, 16, h).as_dict() == got


@pytest.mark.parametrize("mode", [EXACT, MONTE_CARLO])
def test_rhs_point_mass(mode):
    s = simulate_urn(DisplacementModel.point_mass(0.0), 512, 0)
    law = rhs_box_law(s, 8, 0.05, mode=mode, mc_samples=1000, rng=derive_rng(0))
    assert law.as_dict() == {(0,): 1.0} and law.overflow == 0.0


@pytest.mark.parametrize("model", [CAUCHY, GAUSS, DisplacementModel.cauchy(0.3)], ids=lambda m: m.spec)
def test_rhs_matches_brute_force(model):
    # independent oracle: scipy CDFs, one atom at a time, on every box in a wide window
    n, h = 2, 0.25
    t, t1, p = schedule_window(n)
    s = simulate_urn(model, t1, 2)
    law = rhs_box_law(s, n, h)
    assert law.total == pytest.approx(1.0, abs=1e-9)
    dist = stats.norm(scale=model.param("sigma")) if model.kind == "gaussian" else stats.cauchy(scale=model.param("scale"))
    atoms = s.colors[:t, 0]
    got = law.as_dict()
    for (k,) in got:
        conv = np.mean(dist.cdf((k + 1) * h - atoms) - dist.cdf(k * h - atoms))
        stay = np.mean((atoms >= k * h) & (atoms < (k + 1) * h))
        assert got[(k,)] == pytest.approx((1 - p) * stay + p * conv, abs=1e-12)
    assert law.overflow == pytest.approx(1.0 - math.fsum(got.values()), abs=1e-12)


def test_rhs_point_mass_shift_matches_brute_force():
    model = DisplacementModel.point_mass(1.0)
    n, h = 8, 0.5
    t, t1, p = schedule_window(n)
    s = simulate_urn(model, t1, 0)
    law = rhs_box_law(s, n, h)
    want = {}
    for x in s.colors[:t, 0]:
        for y, w in ((x, 1 - p), (x + 1.0, p)):
            k = box_index(y, h)
            want[k] = want.get(k, 0.0) + w / t
    got = law.as_dict()
    for k, v in got.items():
        assert v == pytest.approx(want.get(k, 0.0), abs=1e-12)
    assert law.total == pytest.approx(1.0, abs=1e-9)


def test_rhs_exact_vs_monte_carlo(urn16):
    h, mc = 0.05, 10**6
    exact = rhs_box_law(urn16, 16, h)
    approx = rhs_box_law(urn16, 16, h, mode=MONTE_CARLO, mc_samples=mc, rng=derive_rng(16))
    # lay the exact law on the same finite window: overflow compared against MC mass outside it
    keys = exact.index[:, 0]
    mc_in = approx.lookup(keys[:, None])
    l1 = math.fsum(np.abs(exact.mass - mc_in)) + abs(exact.overflow - (1 - mc_in.sum()))
    occupied = len(set(keys.tolist()) | set(approx.index[:, 0].tolist()))
    assert l1 <= 4 * math.sqrt(occupied / mc)


def test_rhs_mode_checks():
    s = simulate_urn(DisplacementModel.symmetric_pareto(1.5), 512, 0)
    with pytest.raises(ValueError):
        rhs_box_law(s, 8, 0.05, mode=EXACT)
    with pytest.raises(ValueError):
        rhs_box_law(s, 8, 0.05, mode=MONTE_CARLO)  # no rng
    with pytest.raises(ValueError):
        rhs_box_law(s, 8, 0.05, mode="nope")
    law = rhs_box_law(s, 8, 0.05, mode=MONTE_CARLO, mc_samples=5000, rng=derive_rng(0))
    assert law.total == pytest.approx(1.0)


# discrepancy reports -----------------------------------------------------------------


def test_discrepancy_point_mass_zero():
    s = simulate_urn(DisplacementModel.point_mass(0.0), 512, 0)
    r = main2_discrepancy(s, 8, 0.05)
    assert r.discrepancy == 0.0
    assert r.modif_prob == modif_probability_exact(s, 8)
    assert r.benchmark == pytest.approx(3 * 8 ** (-4 / 3))
    assert r.modif_benchmark == pytest.approx(r.p_n**2)


def test_report_fields(urn16):
    r = main2_discrepancy(urn16, 16, 0.05)
    assert (r.T_n, r.T_next) == (1918, 2239)
    assert 0 <= r.discrepancy <= 2
    assert 0 <= r.modif_prob <= 1 and 0 <= r.tail_lhs <= 1 and 0 <= r.tail_rhs <= 1
    assert r.gamma == default_gamma(CAUCHY) == 7.0
    assert r.rhs_total == pytest.approx(1.0, abs=1e-9)
    assert set(r.as_row()) >= {"discrepancy", "benchmark", "modif_prob", "tail_lhs", "tail_rhs", "mode"}


def test_discrepancy_bounds_box_subsets(urn16):
    h = 0.25
    lhs = lhs_box_law(urn16, 16, h)
    rhs = rhs_box_law(urn16, 16, h, support=lhs.index[:, 0])
    d = l1_box_discrepancy(lhs, rhs)
    rng = np.random.default_rng(0)
    keys = rhs.index[:, 0]
    for _ in range(200):
        pick = keys[rng.random(len(keys)) < rng.random()]
        a = lhs.lookup(pick[:, None]).sum()
        b = rhs.lookup(pick[:, None]).sum()
        assert d >= abs(a - b) - 1e-12
    # tail sets at a radius on the grid are unions of boxes
    gamma = 1.0  # radius 16 = 64 boxes
    tl, tr = tail_mass(urn16, 16, gamma)
    assert d >= abs(tl - tr) - 1e-12


def test_discrepancy_shrinks_from_10_to_40():
    h = 0.05
    med = {}
    for n in (10, 40):
        t1 = schedule_window(n)[1]
        med[n] = np.median([main2_discrepancy(simulate_urn(CAUCHY, t1, 100, r), n, h).discrepancy for r in range(5)])
    assert med[40] < med[10]


# coupling sampler -------------------------------------------------------------------


def test_coupling_point_mass():
    s = simulate_urn(DisplacementModel.point_mass(0.0), 512, 0)
    c = couple_samples(s, 8, 0.05, derive_rng(0), 1000)
    assert c.mismatches == 0
    assert np.array_equal(c.a, c.b)


def test_coupling_mismatch_rate(urn16):
    h, k = 0.05, 10**5
    q = 0.5 * main2_discrepancy(urn16, 16, h).discrepancy
    c = couple_samples(urn16, 16, h, derive_rng(7), k)
    assert c.mismatch_prob == pytest.approx(q, abs=1e-12)
    assert abs(c.mismatches / k - q) <= 4 * math.sqrt(q * (1 - q) / k)
    d = np.abs(c.a - c.b)[:, 0]
    assert np.all(d[c.matched] < h)


def test_coupling_marginals(urn16):
    n, h, k = 16, 0.05, 40_000
    t, t1, p = schedule_window(n)
    c = couple_samples(urn16, n, h, derive_rng(8), k)
    lhs_atoms = np.sort(urn16.colors[:t1, 0])
    stay = np.sort(urn16.colors[:t, 0])

    def lhs_cdf(y):
        return np.searchsorted(lhs_atoms, y, side="right") / t1

    def rhs_cdf(y):
        y = np.asarray(y)
        conv = np.array([stats.cauchy.cdf(v - stay).mean() for v in y])
        return (1 - p) * np.searchsorted(stay, y, side="right") / t + p * conv

    assert ks_distance(c.b[:, 0], lhs_cdf) < ks_critical(k)
    sub = c.a[:4000, 0]
    assert ks_distance(sub, rhs_cdf) < ks_critical(sub.size)


def test_coupling_monte_carlo_mode(urn16):
    h, k = 0.05, 20_000
    c = couple_samples(urn16, 16, h, derive_rng(9), k, mode=MONTE_CARLO, mc_samples=200_000)
    assert np.all(np.abs(c.a - c.b)[c.matched, 0] < h)
    q = 0.5 * main2_discrepancy(urn16, 16, h).discrepancy
    # the Monte Carlo law adds its own multinomial noise to q
    assert abs(c.mismatches / k - q) < 0.05


def test_coupling_rejects_multidimensional():
    s = simulate_urn(DisplacementModel.gaussian(d=2), 512, 0)
    with pytest.raises(ValueError):
        couple_samples(s, 8, 0.05, derive_rng(0), 10, mode=MONTE_CARLO)


# tails -------------------------------------------------------------------------------


def test_tail_extremes(urn16):
    assert tail_mass(urn16, 16, 50.0) == (0.0, 0.0)
    tl, tr = tail_mass(urn16, 16, 0.0)
    assert tl == np.mean(np.abs(urn16.colors[: schedule_window(16)[1], 0]) > 1.0)
    assert 0 < tr < 1


def test_tail_gaussian_negligible():
    n = 27
    s = simulate_urn(GAUSS, schedule_window(n)[1], 0)
    tl, tr = tail_mass(s, n, 2.0)
    assert tl < 1e-6 and tr < 1e-6


def test_tail_exact_vs_monte_carlo(urn16):
    tl, tr = tail_mass(urn16, 16, 0.5)
    ml, mr = tail_mass(urn16, 16, 0.5, mode=MONTE_CARLO, rng=derive_rng(3), mc_samples=10**6)
    assert ml == tl
    assert abs(mr - tr) <= 4 * math.sqrt(tr * (1 - tr) / 10**6)


def test_tail_record_estimates():
    assert tail_record_estimate(DisplacementModel.point_mass(0.0), 100, 1.0, 1000, derive_rng(0)).estimate == 0.0
    g = tail_record_estimate(GAUSS, 100, 4.0, 10**5, derive_rng(1))
    assert g.threshold == pytest.approx(math.log(100) ** 4) and 449 < g.threshold < 450
    assert g.estimate == 0.0
    assert g.radius95 > 0


def test_tail_record_decomposition():
    model = DisplacementModel.symmetric_pareto(1.5)
    samples = 10**5
    est = tail_record_estimate(model, 10**4, 6.0, samples, derive_rng(2))
    mc_err = 4 * math.sqrt(max(est.decomposition_bound, 1.0 / samples) / samples)
    assert est.estimate <= est.decomposition_bound + mc_err

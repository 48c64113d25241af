"""Fiber geometry: word metric, growth reports, hyperbolicity, band check."""
import numpy as np
import pytest
from conftest import random_function

import etale
from etale import (BudgetError, GroupoidElement, NonComposableError,
                   PreconditionError, band_check, distance_matrix,
                   fiber_distance, growth_stats, hyperbolicity_delta,
                   overlap_constant, sphere_indicator)


def oracle_four_point(D):
    """Brute-force largest defect: top pair-sum minus second, all quadruples."""
    n = len(D)
    best = 0
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    sums = sorted((D[a][b] + D[c][d],
                                   D[a][c] + D[b][d],
                                   D[a][d] + D[b][c]))
                    best = max(best, sums[2] - sums[1])
    return best


def test_fiber_distance_basic(f2):
    x = GroupoidElement(0, (1,))
    y = GroupoidElement(0, (1, 2))
    assert fiber_distance(f2, x, y) == 1
    assert fiber_distance(f2, x, x) == 0
    assert fiber_distance(f2, y, x) == 1


def test_fiber_distance_needs_common_fiber(f2_32):
    x = GroupoidElement(0, (1,))
    y = GroupoidElement(1, (1,))
    with pytest.raises(NonComposableError):
        fiber_distance(f2_32, x, y)


def test_left_invariance_and_triangle(f2_32):
    rng = np.random.default_rng(23)
    u = 0
    fiber = f2_32.ball(u, 3)
    for _ in range(50):
        x, y, w = (fiber[i] for i in rng.choice(len(fiber), size=3))
        assert fiber_distance(f2_32, x, y) <= (
            fiber_distance(f2_32, x, w) + fiber_distance(f2_32, w, y))
    z = GroupoidElement(5, (2,))
    v = f2_32.source_unit(z)
    for _ in range(20):
        i, j = rng.choice(len(fiber), size=2)
        x, y = fiber[i], fiber[j]
        xv = GroupoidElement(v, x.word)
        yv = GroupoidElement(v, y.word)
        assert fiber_distance(f2_32, f2_32.compose(z, xv), f2_32.compose(z, yv)) \
            == fiber_distance(f2_32, xv, yv)


def test_growth_free_rank_two(f2):
    rep = growth_stats(f2, 8)
    assert rep.sphere_counts == [1, 4, 12, 36, 108, 324, 972, 2916, 8748]
    assert rep.ball_counts[3] == 53
    assert rep.envelope_r == pytest.approx(4.0)
    assert rep.ratio_stabilized and rep.sphere_ratio == 3.0
    assert not rep.saturated and not rep.subexponential
    assert rep.certified_upper and rep.certified_lower
    assert 2.9 < rep.fit_r < 3.3
    # envelope really dominates, lower fit really minorizes
    for k in range(1, 9):
        assert rep.sphere_counts[k] <= rep.envelope_r ** k * (1 + 1e-9)
        assert rep.ball_counts[k] >= rep.fit_d * rep.fit_r ** k * (1 - 1e-9)


def test_growth_line_and_finite(z, z6):
    line = growth_stats(z, 8)
    assert line.sphere_ratio == 1.0 and line.subexponential
    assert not line.saturated
    fin = growth_stats(z6, 8)
    assert fin.saturated and fin.subexponential
    assert fin.sphere_counts[:5] == [1, 2, 2, 1, 0]
    assert fin.ball_counts[-1] == 6
    rows = fin.csv_rows()
    assert rows[0] == ("k", "sup_sphere", "inf_ball")
    assert len(rows) == 10


def test_growth_argument_validation(f2):
    with pytest.raises(ValueError):
        growth_stats(f2, 4, k_min=4)
    with pytest.raises(ValueError):
        growth_stats(f2, 4, k_min=0)


def test_distance_matrix(f2):
    pts = f2.ball(0, 2)
    D = distance_matrix(f2, pts)
    assert D.shape == (17, 17)
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) == 0)
    assert D[0, 1] == 1  # identity to a generator


def test_delta_tree_fiber_is_zero(f2):
    est = hyperbolicity_delta(f2, 0, 2)
    assert est.delta == 0.0
    assert est.n_points == 17
    D = distance_matrix(f2, f2.ball(0, 2)).tolist()
    assert oracle_four_point(D) == 0


def test_delta_cycle_against_oracle(z6):
    for radius in (2, 3):
        est = hyperbolicity_delta(z6, 0, radius)
        D = distance_matrix(z6, z6.ball(0, radius)).tolist()
        assert est.delta == oracle_four_point(D)
    assert hyperbolicity_delta(z6, 0, 3).delta == 2.0


def test_delta_monotone_in_radius(z6):
    vals = [hyperbolicity_delta(z6, 0, r).delta for r in (1, 2, 3)]
    assert vals == sorted(vals)


def test_delta_budget(f2):
    with pytest.raises(BudgetError):
        hyperbolicity_delta(f2, 0, 4)
    est = hyperbolicity_delta(f2, 0, 4, quad_budget=10 ** 10)
    assert est.delta == 0.0


def test_overlap_constant(f2, z, z6):
    assert overlap_constant(f2, 0.0) == 5
    assert overlap_constant(z, 0.0) == 3
    assert overlap_constant(z6, 2.0) == 6
    with pytest.raises(ValueError):
        overlap_constant(f2, -1.0)


def test_band_check_passes_with_overlap_constant(f2):
    rng = np.random.default_rng(29)
    f = random_function(f2, rng, 2, 10).length_slice(2)
    g = sphere_indicator(f2, 1)
    C = overlap_constant(f2, 0.0)
    rep = band_check(f, g, 2, 1, 0, C)
    assert rep.passed
    assert rep.band == (1, 3)
    assert rep.outside_mass == 0.0
    assert [r[0] for r in rep.rows] == [1, 2, 3]
    assert all(r[3] for r in rep.rows)


def test_band_check_parity_gap(z):
    f = sphere_indicator(z, 2)
    g = sphere_indicator(z, 1)
    rep = band_check(f, g, 2, 1, 0, 3.0)
    assert rep.passed
    by_m = {r[0]: r[1] for r in rep.rows}
    assert by_m[2] == 0.0  # odd/even parity kills the middle slice
    assert by_m[1] > 0 and by_m[3] > 0


def test_band_check_preconditions(f2):
    chi2 = sphere_indicator(f2, 2)
    chi1 = sphere_indicator(f2, 1)
    with pytest.raises(PreconditionError):
        band_check(chi2, chi1, 3, 1, 0, 5.0)  # f not on sphere 3
    with pytest.raises(PreconditionError):
        band_check(chi2, chi1, 2, 2, 0, 5.0)  # g not on sphere 2
    with pytest.raises(PreconditionError):
        band_check(chi2, 2.0 * chi1, 2, 1, 0, 5.0)  # g not bounded by 1


def test_band_check_fail_path(f2):
    rep = band_check(sphere_indicator(f2, 2), sphere_indicator(f2, 1),
                     2, 1, 0, 0.01)
    assert not rep.passed
    assert any(not r[3] for r in rep.rows)
    assert rep.outside_mass == 0.0

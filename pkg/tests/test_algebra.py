"""Convolution *-algebra: products, involution, norms, state pairing."""
import numpy as np
import pytest
from conftest import random_function

import etale
from etale import (BudgetError, CcFunction, ExpLengthKernel, GroupoidElement,
                   HaagerupKernel, ModelError, convolve, delta, i_norm,
                   involution, lp_norm, omega_pairing, sphere_indicator,
                   unit_indicator)


def brute_convolve(f, g):
    """Oracle: (f*g)(x) = sum_y f(y) g(y^-1 x), sweeping x over all products."""
    model = f.model
    out = {}
    for a in f.support():
        for b in g.support():
            if model.source_unit(a) != b.unit:
                continue
            x = model.compose(a, b)
            out.setdefault(x, 0j)
    for x in out:
        total = 0j
        for y, vy in f.items():
            if y.unit != x.unit:
                continue
            z = model.compose(model.inverse(y), x)
            total += vy * g.value(z)
        out[x] = total
    return {k: v for k, v in out.items() if v != 0}


def max_diff(f, g):
    keys = set(f.support()) | set(g.support())
    return max((abs(f.value(k) - g.value(k)) for k in keys), default=0.0)


def test_integer_line_square(z):
    f = sphere_indicator(z, 1)
    sq = convolve(f, f)
    assert sq.value(GroupoidElement(0, ())) == 2
    assert sq.value(GroupoidElement(0, (1, 1))) == 1
    assert sq.value(GroupoidElement(0, (-1, -1))) == 1
    assert len(sq) == 3


def test_unit_indicator_is_identity(f2_32):
    rng = np.random.default_rng(11)
    f = random_function(f2_32, rng, 2, 40)
    e = unit_indicator(f2_32)
    assert max_diff(convolve(e, f), f) == 0
    assert max_diff(convolve(f, e), f) == 0


def test_delta_composition(z2_swap):
    g = GroupoidElement(0, 1)
    h = GroupoidElement(1, 1)
    prod = convolve(delta(z2_swap, g), delta(z2_swap, h))
    assert prod.data == {z2_swap.unit_element(0): 1 + 0j}
    # non-composable pair contributes nothing
    assert len(convolve(delta(z2_swap, g), delta(z2_swap, g))) == 0


def test_convolve_against_oracle(f2_32, z6):
    rng = np.random.default_rng(3)
    for model in (f2_32, z6):
        f = random_function(model, rng, 2, 25)
        g = random_function(model, rng, 2, 25)
        got = convolve(f, g)
        want = brute_convolve(f, g)
        keys = set(got.support()) | set(want.keys())
        assert max(abs(got.value(k) - want.get(k, 0j)) for k in keys) < 1e-12


def test_associativity_and_involution(f2_32):
    rng = np.random.default_rng(5)
    f = random_function(f2_32, rng, 2, 20)
    g = random_function(f2_32, rng, 2, 20)
    h = random_function(f2_32, rng, 2, 20)
    assert max_diff(convolve(convolve(f, g), h), convolve(f, convolve(g, h))) < 1e-12
    assert max_diff(involution(involution(f)), f) == 0
    assert max_diff(involution(convolve(f, g)),
                    convolve(involution(g), involution(f))) < 1e-12


def test_support_length_subadditive(f2):
    rng = np.random.default_rng(9)
    f = random_function(f2, rng, 3, 15)
    g = random_function(f2, rng, 2, 10)
    assert convolve(f, g).max_length() <= f.max_length() + g.max_length()


def test_convolution_budget(f2):
    f = sphere_indicator(f2, 3)
    with pytest.raises(BudgetError):
        convolve(f, f, budget=10)


def test_mixed_models_rejected(f2, z):
    with pytest.raises(ModelError):
        convolve(unit_indicator(f2), unit_indicator(z))
    with pytest.raises(ModelError):
        unit_indicator(f2) + unit_indicator(z)


def test_i_norm(f2, f2_32):
    assert i_norm(sphere_indicator(f2, 1)) == 4.0
    assert i_norm(unit_indicator(f2_32)) == 1.0
    rng = np.random.default_rng(13)
    f = random_function(f2_32, rng, 2, 30)
    g = random_function(f2_32, rng, 2, 30)
    assert i_norm(convolve(f, g)) <= i_norm(f) * i_norm(g) + 1e-12


def test_lp_norm_values(f2, mu_f2, f2_32, mu_f2_32):
    assert lp_norm(sphere_indicator(f2, 1), 2, mu_f2) == pytest.approx(2.0)
    d = delta(f2_32, f2_32.unit_element(0))
    for p in (1, 2, 4):
        assert lp_norm(d, p, mu_f2_32) == pytest.approx((1 / 32) ** (1 / p))
    with pytest.raises(ValueError):
        lp_norm(d, 0.5, mu_f2_32)


def test_lp_monotone_in_p_for_indicators(f2, mu_f2):
    for k in (1, 2, 3):
        chi = sphere_indicator(f2, k)
        norms = [lp_norm(chi, p, mu_f2) for p in (1, 2, 3, 6)]
        assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))


def test_pairing_matches_lp_power(f2, mu_f2, f2_32, mu_f2_32):
    # omega_phi(phi^{p-1} . chi_k) equals |phi . chi_k|_p^p for real phi >= 0
    alpha, p, k = 0.6, 4, 3
    for model, mu in ((f2, mu_f2), (f2_32, mu_f2_32)):
        phi = ExpLengthKernel(alpha)
        f = etale.length_weighted(model, alpha ** (p - 1), k)
        lhs = omega_pairing(f, phi, mu)
        rhs = lp_norm(etale.length_weighted(model, alpha, k), p, mu) ** p
        assert lhs.imag == 0
        assert lhs.real == pytest.approx(rhs, rel=1e-12)


def test_pairing_positive_on_squares(f2, mu_f2):
    rng = np.random.default_rng(21)
    for phi in (ExpLengthKernel(0.5), HaagerupKernel(3)):
        for _ in range(20):
            f = random_function(f2, rng, 2, 8)
            val = omega_pairing(convolve(involution(f), f), phi, mu_f2)
            assert abs(val.imag) < 1e-10
            assert val.real > -1e-10


def test_scalar_and_linear_ops(f2_32, mu_f2_32):
    rng = np.random.default_rng(2)
    f = random_function(f2_32, rng, 2, 12)
    g = random_function(f2_32, rng, 2, 12)
    assert max_diff((f + g) - g, f) < 1e-12
    assert lp_norm(2j * f, 2, mu_f2_32) == pytest.approx(2 * lp_norm(f, 2, mu_f2_32))
    assert len(0 * f) == 0
    assert (f - f).data == {}


def test_length_slice_partition(f2):
    rng = np.random.default_rng(17)
    f = random_function(f2, rng, 3, 30)
    rebuilt = CcFunction(f2)
    for m in range(f.max_length() + 1):
        rebuilt = rebuilt + f.length_slice(m)
    assert max_diff(rebuilt, f) == 0


def test_function_json_roundtrip(f2_32, z6, tmp_path):
    rng = np.random.default_rng(31)
    for model in (f2_32, z6):
        f = random_function(model, rng, 2, 20)
        path = tmp_path / "f.json"
        etale.save_function(f, path)
        g = etale.load_function(model, path)
        assert max_diff(f, g) == 0


def test_function_json_accumulates_duplicates(z):
    entries = [
        {"unit": 0, "word": "a", "re": 1.0, "im": 0.0},
        {"unit": 0, "word": "a", "re": 2.0, "im": 1.0},
    ]
    f = etale.function_from_json(z, entries)
    assert f.value(GroupoidElement(0, (1,))) == 3 + 1j
    with pytest.raises(ModelError):
        etale.function_from_json(z, [{"unit": 4, "word": "a", "re": 1.0}])
    with pytest.raises(ModelError):
        etale.function_from_json(z, [{"word": "a"}])

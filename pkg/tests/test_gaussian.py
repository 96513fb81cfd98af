import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import pq_closed_form, pq_direct, xi_simpson
from stelab import DomainError, SampleBatch, estimate_expectation, gauss_capped_moments, gauss_indicator_moments, pq, xi
from stelab.gaussian import GL_ORDER, XI_INF, band_joint_vector

W_GRID = (0.25, 0.5, 1.0, 2.0, 8.0)


# --- xi ---------------------------------------------------------------------------


def test_xi_anchor_values():
    assert xi(0.0) == 0.0
    assert xi(math.inf) == pytest.approx(math.sqrt(math.pi / 2), abs=1e-12)
    assert XI_INF == pytest.approx(math.sqrt(math.pi / 2), abs=1e-15)
    assert xi(1.0) == pytest.approx(0.2491, abs=5e-5)


@pytest.mark.parametrize("x", [1e-4, 0.01, 0.3, 1.0, 2.0, 4.5, 9.0, 20.0])
def test_xi_matches_adaptive_simpson(x):
    assert abs(xi(x) - xi_simpson(x)) <= 1e-12


def test_xi_rejects_negative():
    with pytest.raises(DomainError):
        xi(-1e-9)
    with pytest.raises(DomainError):
        xi(np.array([1.0, -1.0]))


def test_xi_vectorized_monotone_bounded():
    x = np.linspace(0, 12, 2001)
    y = xi(x)
    assert np.all(np.diff(y) >= 0)
    assert np.all(np.diff(y[:1200]) > 0)
    assert np.all(y <= XI_INF)
    assert xi(50.0) == XI_INF


# --- p, q ---------------------------------------------------------------------------


def test_pq_anchor_values():
    for wn in W_GRID:
        end = pq(math.pi, wn)
        assert abs(end.p) <= 1e-15 and abs(end.q) <= 1e-15
        assert abs(pq(0.0, wn).q) <= 1e-15
    v = pq(math.pi / 2, 1.0)
    assert v.p <= v.q


def test_pq_validation():
    with pytest.raises(DomainError):
        pq(1.0, 0.0)
    with pytest.raises(DomainError):
        pq(1.0, -1.0)
    with pytest.raises(DomainError):
        pq(-0.1, 1.0)
    with pytest.raises(DomainError):
        pq(math.pi + 0.1, 1.0)


@pytest.mark.parametrize("wn", [1e-3, 0.1, *W_GRID, 100.0, 1e4])
def test_pq_matches_closed_form(wn):
    for theta in np.linspace(0, math.pi, 37):
        ref = pq_closed_form(theta, wn)
        got = pq(theta, wn)
        assert abs(got.p - ref[0]) <= 1e-9 and abs(got.q - ref[1]) <= 1e-9


@pytest.mark.parametrize("wn", [0.3, 1.0, 5.0])
def test_pq_matches_direct_quadrature(wn):
    for theta in np.linspace(0.05, math.pi - 0.05, 9):
        ref = pq_direct(theta, wn)
        got = pq(theta, wn)
        assert abs(got.p - ref[0]) <= 1e-8 and abs(got.q - ref[1]) <= 1e-8


def test_order_at_least_64():
    assert GL_ORDER >= 64


def _grid():
    return np.linspace(math.pi / 2, math.pi, 91)


def test_p_below_q_on_grid():
    for wn in W_GRID:
        for th in _grid():
            v = pq(th, wn)
            assert v.p <= v.q + 1e-9


def test_linear_bound_below_q_on_grid():
    for wn in W_GRID:
        p0 = pq(0.0, wn).p
        for th in _grid():
            assert (1 - th / math.pi) * p0 <= pq(th, wn).q + 1e-9


def test_q_symmetry_and_p_antisymmetry():
    for wn in W_GRID:
        p0 = pq(0.0, wn).p
        for th in np.linspace(0, math.pi / 2, 46):
            assert abs(pq(math.pi - th, wn).q - pq(th, wn).q) <= 1e-9
            d1 = (1 - th / math.pi) * p0 - pq(th, wn).p
            th2 = math.pi - th
            d2 = (1 - th2 / math.pi) * p0 - pq(th2, wn).p
            assert abs(d1 + d2) <= 1e-9


@settings(max_examples=200, deadline=None)
@given(st.floats(0, math.pi), st.floats(1e-2, 1e2))
def test_q_nonnegative(theta, wn):
    v = pq(theta, wn)
    assert v.q >= -1e-12 and v.p >= -1e-12


# --- indicator and band moments --------------------------------------------------------


def test_indicator_examples():
    m = gauss_indicator_moments([1, 0], [1, 0])
    assert m.prob_single == 0.5 and m.prob_joint == pytest.approx(0.5)
    m = gauss_indicator_moments([1, 0], [0, 1])
    assert m.prob_joint == pytest.approx(0.25)
    m = gauss_indicator_moments([1, 0], [-1, 0])
    np.testing.assert_array_equal(m.vec_joint, [0, 0])
    np.testing.assert_allclose(m.vec_single, [1 / math.sqrt(2 * math.pi), 0])
    with pytest.raises(DomainError):
        gauss_indicator_moments([0, 0], [1, 0])


def test_capped_examples():
    c = gauss_capped_moments([2, 0], [2, 0])
    assert c.vec_band[1] == 0 and c.vec_band[0] > 0
    assert c.vec_band[0] == pytest.approx(pq(0.0, 2.0).p, abs=1e-15)
    c = gauss_capped_moments([1, 0], [-3, 0])
    np.testing.assert_allclose(c.vec_band_joint, 0, atol=1e-15)
    # theta -> 0 limit is continuous
    w_hat = np.array([1.0, 0.0])
    near = band_joint_vector(w_hat, np.array([math.cos(1e-7), math.sin(1e-7)]), 1e-7, 1.3)
    at = band_joint_vector(w_hat, w_hat, 0.0, 1.3)
    np.testing.assert_allclose(near, at, atol=1e-6)


def _moments_mc(w, wt, n_samples, seed):
    w, wt = np.asarray(w, float), np.asarray(wt, float)

    def f(z):
        z = z[:, 0, :]
        a, b = z @ w, z @ wt
        one = (a > 0).astype(float)
        both = one * (b > 0)
        band = ((a > 0) & (a < 1)).astype(float)
        return np.concatenate(
            [one[:, None], both[:, None], z * one[:, None], z * both[:, None], z * band[:, None],
             z * (band * (b > 0))[:, None]], axis=1)

    return estimate_expectation(f, SampleBatch(1, w.size, n_samples, seed))


@pytest.mark.parametrize(
    "w, wt",
    [([1, 0], [0, 1]), ([0.4, -1.2, 0.3], [1, 1, 0]), ([2.5, 0.5, 0, -1], [-1, 0.2, 0.3, 0.1]), ([0.3, 0], [-1, 0.01])],
)
def test_moments_match_monte_carlo(w, wt):
    n = len(w)
    ind = gauss_indicator_moments(w, wt)
    cap = gauss_capped_moments(w, wt)
    expected = np.concatenate([[ind.prob_single, ind.prob_joint], ind.vec_single, ind.vec_joint, cap.vec_band,
                               cap.vec_band_joint])
    est = _moments_mc(w, wt, 10**6, seed=7 + n)
    assert est.agrees(expected, 4.0), est.z_scores(expected)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import saddle_scan
from stelab import (
    ModelParams,
    PointClass,
    SteKind,
    TeacherParams,
    classify_point,
    critical_points,
    reduced_hessian,
    stationarity_residual,
)
from stelab.landscape import reduced_loss_grad_v, saddle_condition


def _unit_at(t, theta):
    ws = t.w_star
    e = np.zeros(ws.size)
    e[np.argmin(np.abs(ws))] = 1
    u = e - (e @ ws) * ws
    u /= np.linalg.norm(u)
    return math.cos(theta) * ws + math.sin(theta) * u


def test_saddle_example():
    t = TeacherParams([1.0, -1.0], [1.0, 0.0, 0.0])
    r = critical_points(t)
    assert r.has_saddle and r.spurious_is_local_min
    np.testing.assert_allclose(r.saddle_v, [0, 0], atol=1e-15)
    assert r.saddle_theta == pytest.approx(math.pi / 2, abs=1e-15)
    assert abs(r.saddle_v @ t.v_star) <= 1e-10
    np.testing.assert_allclose(reduced_loss_grad_v(r.saddle_v, r.saddle_theta, t), 0, atol=1e-10)


def test_no_saddle_example():
    t = TeacherParams([1.0, 1.0], [1.0, 0.0])
    r = critical_points(t)
    assert not r.has_saddle and r.saddle_v is None and r.saddle_theta is None
    np.testing.assert_allclose(r.spurious_v, [1 / 3, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(reduced_loss_grad_v(r.spurious_v, math.pi, t), 0, atol=1e-15)
    np.testing.assert_array_equal(r.global_v, t.v_star)
    assert r.global_theta == 0.0 and r.spurious_theta == math.pi


def test_boundary_counts_as_no_saddle():
    # (1'v*)^2 = (m+1)/2 |v*|^2 exactly: m=1 gives s^2 = |v*|^2 always
    assert not saddle_condition([2.0])
    assert saddle_condition([1.0, -1.0])


finite = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 6).flatmap(lambda m: arrays(np.float64, m, elements=finite)))
def test_saddle_agrees_with_brute_force_scan(vs):
    if np.linalg.norm(vs) < 1e-2:
        return
    s2, bound = vs.sum() ** 2, (vs.size + 1) / 2 * (vs @ vs)
    if abs(s2 - bound) < 1e-6 * bound:
        return  # too close to the boundary for a grid scan to resolve
    t = TeacherParams(vs, np.eye(2)[0])
    r = critical_points(t)
    found = saddle_scan(vs)
    assert r.has_saddle == bool(found)
    if found:
        v, th = found[0]
        np.testing.assert_allclose(r.saddle_v, v, atol=1e-9)
        assert r.saddle_theta == pytest.approx(th, abs=1e-9)
        assert math.pi / 2 <= r.saddle_theta < math.pi


def test_stationarity_at_critical_points(rng):
    for _ in range(200):
        m, n = rng.integers(1, 6), rng.integers(2, 6)
        t = TeacherParams.random(m, n, rng)
        r = critical_points(t)
        pts = [ModelParams(r.global_v, 2.0 * t.w_star), ModelParams(r.spurious_v, -0.5 * t.w_star)]
        if r.has_saddle:
            assert abs(r.saddle_v @ t.v_star) <= 1e-10
            pts.append(ModelParams(r.saddle_v, 1.3 * _unit_at(t, r.saddle_theta)))
        for p in pts:
            for kind in (SteKind.RELU, SteKind.CAPPED_RELU):
                assert stationarity_residual(p, t, kind) <= 1e-8


def test_residual_examples():
    t = TeacherParams([1.0, -1.0], [1.0, 0.0])
    assert stationarity_residual(ModelParams([1.0, -1.0], [1.0, 0.0]), t, "relu") <= 1e-10
    r = critical_points(t)
    assert stationarity_residual(ModelParams(r.saddle_v, _unit_at(t, r.saddle_theta)), t, "crelu") <= 1e-6
    t2 = TeacherParams([1.0, 1.0], [1.0, 0.0])
    sp = critical_points(t2).spurious_v
    res = stationarity_residual(ModelParams(sp, [-1.0, 0.0]), t2, "identity")
    assert res == pytest.approx(8 / (9 * math.sqrt(2 * math.pi)), abs=1e-10)


def test_classification_examples():
    t = TeacherParams([1.0, 1.0], [0.0, 1.0])
    assert classify_point(ModelParams(t.v_star, t.w_star), t) is PointClass.GLOBAL_MIN
    sp = critical_points(t).spurious_v
    assert classify_point(ModelParams(sp, -t.w_star), t) is PointClass.SPURIOUS_LOCAL_MIN
    w = [math.sin(math.pi / 4), math.cos(math.pi / 4)]
    assert classify_point(ModelParams(0.7 * t.v_star, w), t) is PointClass.NON_CRITICAL
    assert classify_point(ModelParams(t.v_star, [0.0, 0.0]), t) is PointClass.UNDEFINED
    ts = TeacherParams([1.0, -1.0], [1.0, 0.0])
    assert classify_point(ModelParams([0.0, 0.0], [0.0, 1.0]), ts) is PointClass.SADDLE
    with pytest.raises(ValueError):
        classify_point(ModelParams(t.v_star, t.w_star), t, tol=0.0)


def test_exclusivity_of_vanishing(rng):
    """Away from the enumerated points the Relu/CappedRelu residual is bounded below."""
    smallest = math.inf
    count = 0
    while count < 10_000:
        m, n = rng.integers(1, 5), rng.integers(2, 5)
        t = TeacherParams.random(m, n, rng)
        p = ModelParams(rng.standard_normal(m), rng.standard_normal(n))
        if classify_point(p, t, tol=0.1) is not PointClass.NON_CRITICAL:
            continue
        count += 1
        smallest = min(smallest, stationarity_residual(p, t, "relu"))
        if count % 10 == 0:
            smallest = min(smallest, stationarity_residual(p, t, "crelu"))
    assert smallest > 1e-4


def test_reduced_hessian_indefinite():
    for vs in ([1.0, -1.0], [1.0, -0.5], [2.0, 0.3, -1.5]):
        t = TeacherParams(vs, [1.0, 0.0])
        r = critical_points(t)
        eig = np.linalg.eigvalsh(reduced_hessian(r.saddle_v, r.saddle_theta, t))
        assert eig.min() < 0 < eig.max()

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import Polynomial
from scipy.integrate import quad

from frenetdrive.errors import DomainError, HorizonError, InputError
from frenetdrive.polynomial import (MotionPoly, eval_poly, jerk_integral, max_abs_jerk, max_abs_jerk_many, sample,
                                    sample_many, solve_quartic, solve_quintic)

finite = st.floats(-50, 50, allow_nan=False)
horizon = st.floats(0.5, 10.0)
triple = st.tuples(finite, finite, finite)


def oracle_quintic(start, end, T):
    """Coefficients from the raw 6x6 boundary system."""
    rows, rhs = [], []
    for t, (p, v, a) in ((0.0, start), (T, end)):
        rows.append([t ** k for k in range(6)])
        rows.append([k * t ** (k - 1) if k else 0.0 for k in range(6)])
        rows.append([k * (k - 1) * t ** (k - 2) if k > 1 else 0.0 for k in range(6)])
        rhs += [p, v, a]
    return np.linalg.solve(np.array(rows), np.array(rhs))


def derivs(poly, t):
    P = Polynomial(poly.coeffs)
    return [float(P.deriv(k)(t)) if k else float(P(t)) for k in range(4)]


@given(triple, triple, horizon)
def test_quintic_meets_boundaries(start, end, T):
    poly = solve_quintic(start, end, T)
    scale = 1.0 + max(map(abs, start + end))
    assert np.allclose(derivs(poly, 0.0)[:3], start, atol=1e-9 * scale)
    assert np.allclose(derivs(poly, T)[:3], end, atol=1e-6 * scale)


@given(triple, triple, horizon)
def test_quintic_matches_linear_system(start, end, T):
    c = oracle_quintic(start, end, T)
    poly = solve_quintic(start, end, T)
    assert np.allclose(poly.coeffs, c, rtol=1e-7, atol=1e-7 * (1 + np.abs(c).max()))


@given(triple, st.tuples(finite, finite), horizon)
def test_quartic_meets_boundaries(start, end, T):
    poly = solve_quartic(start, end, T)
    assert poly.degree == 4
    p0, v0, a0, _ = derivs(poly, 0.0)
    _, v1, a1, _ = derivs(poly, T)
    scale = 1.0 + max(map(abs, start + end))
    assert np.allclose((p0, v0, a0), start, atol=1e-9 * scale)
    assert np.allclose((v1, a1), end, atol=1e-6 * scale)


def test_min_jerk_unit_quintic():
    poly = solve_quintic((0, 0, 0), (1, 0, 0), 1.0)
    assert np.allclose(poly.coeffs, (0, 0, 0, 10, -15, 6), atol=1e-12)
    assert abs(jerk_integral(poly) - 720.0) <= 1e-9


@given(triple, triple, horizon)
def test_jerk_integral_matches_quadrature(start, end, T):
    poly = solve_quintic(start, end, T)
    P3 = Polynomial(poly.coeffs).deriv(3)
    ref, _ = quad(lambda t: P3(t) ** 2, 0.0, T, epsabs=1e-10, epsrel=1e-12)
    assert jerk_integral(poly) == pytest.approx(ref, rel=1e-8, abs=1e-8)


@given(triple, triple, horizon)
def test_max_abs_jerk_bounds_dense_samples(start, end, T):
    poly = solve_quintic(start, end, T)
    t = np.linspace(0.0, T, 2001)
    dense = np.abs(Polynomial(poly.coeffs).deriv(3)(t)).max()
    exact = max_abs_jerk(poly)
    assert exact >= dense - 1e-9 * (1 + dense)
    # the vertex lies within half a grid step of some sample
    assert exact <= dense + abs(60 * poly.coeffs[5]) * (T / 2000) ** 2 + 1e-9 * (1 + dense)


def test_max_abs_jerk_many_agrees_with_scalar():
    rng = np.random.default_rng(3)
    polys = [solve_quintic(rng.normal(size=3), rng.normal(size=3), rng.uniform(0.5, 6)) for _ in range(50)]
    polys += [solve_quartic(rng.normal(size=3), rng.normal(size=2), rng.uniform(0.5, 6)) for _ in range(50)]
    assert np.allclose(max_abs_jerk_many(polys), [max_abs_jerk(p) for p in polys], rtol=0, atol=1e-12)


def test_sample_holds_constant_acceleration_past_horizon():
    poly = solve_quintic((0, 1, 0), (10, 3, 0.5), 4.0)
    pos, vel, acc, jerk = sample(poly, np.array([4.0, 5.0]))
    assert vel[1] == pytest.approx(3.5)
    assert acc[1] == pytest.approx(0.5)
    assert pos[1] == pytest.approx(10 + 3 + 0.25)
    assert jerk[1] == 0.0


def test_sample_many_shape_and_values():
    a = solve_quintic((0, 0, 0), (5, 1, 0), 2.0)
    b = solve_quartic((1, 2, 0), (4, 0), 3.0)
    t = np.linspace(0, 2, 9)
    out = sample_many([a, b], t)
    assert out.shape == (4, 2, 9)
    for i, p in enumerate((a, b)):
        for k, tk in enumerate(t):
            assert np.allclose(out[:, i, k], eval_poly(p, tk))


def test_sample_without_hold_rejects_late_times():
    poly = solve_quintic((0, 0, 0), (1, 0, 0), 1.0)
    with pytest.raises(DomainError):
        sample_many([poly], [0.0, 2.0], hold=False)


@pytest.mark.parametrize("T", [0.0, -1.0, 1e-4, math.nan, math.inf])
def test_bad_horizon(T):
    with pytest.raises(HorizonError):
        solve_quintic((0, 0, 0), (1, 0, 0), T)


def test_eval_outside_domain():
    poly = solve_quintic((0, 0, 0), (1, 0, 0), 1.0)
    with pytest.raises(DomainError):
        eval_poly(poly, 1.1)
    with pytest.raises(DomainError):
        eval_poly(poly, -0.1)


def test_non_finite_boundary_rejected():
    with pytest.raises(InputError):
        solve_quintic((0, math.nan, 0), (1, 0, 0), 1.0)
    with pytest.raises(InputError):
        solve_quartic((0, 0, 0), (math.inf, 0), 1.0)


def test_motion_poly_validation():
    with pytest.raises(InputError):
        MotionPoly((1, 2, 3), 1.0)
    with pytest.raises(InputError):
        MotionPoly((0, 0, 0, 0, 0, math.nan), 1.0)
    p = MotionPoly((1, 2, 3, 4, 5), 2)
    assert p.degree == 4 and p.padded()[5] == 0.0

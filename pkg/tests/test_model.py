import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from calogero_susy import (
    JacobiMap,
    ModelParams,
    SingularGeometry,
    SingularPointError,
    box_half_width,
    eval_superpotential,
    jacobi_forward,
    jacobi_inverse,
    singular_distance,
)
from calogero_susy.model import superpotential_fields, superpotential_value, superpotential_x

coords = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("n", [3, 4])
def test_jacobi_matrix_is_orthogonal(n):
    r = JacobiMap.for_particles(n).matrix_r
    assert np.allclose(r @ r.T, np.eye(n), atol=1e-14)


def test_jacobi_three_body_rows():
    r = JacobiMap.for_particles(3).matrix_r
    expected = np.array(
        [[1, -1, 0] / np.sqrt(2), [1, 1, -2] / np.sqrt(6), [1, 1, 1] / np.sqrt(3)]
    )
    assert np.allclose(r, expected, atol=1e-15)


def test_jacobi_pairwise_sum_identity():
    # sum_{i<j} (x_i - x_j)^2 == N * |y_rel|^2 for every N, checked symbolically
    for n in (3, 4):
        xs = sympy.symbols(f"x0:{n}", real=True)
        r = sympy.Matrix(JacobiMap.for_particles(n).matrix_r.tolist())
        lhs = sum((xs[i] - xs[j]) ** 2 for i in range(n) for j in range(i + 1, n))
        y = np.array(JacobiMap.for_particles(n).matrix_r) @ np.array([1.3, -0.2, 0.7, 2.1][:n])
        num_lhs = float(lhs.subs(dict(zip(xs, [1.3, -0.2, 0.7, 2.1][:n]))))
        assert num_lhs == pytest.approx(n * np.sum(y[: n - 1] ** 2), rel=1e-13)
        assert r.shape == (n, n)


@settings(max_examples=50, deadline=None)
@given(st.lists(coords, min_size=3, max_size=3))
def test_jacobi_round_trip(x):
    jm = JacobiMap.for_particles(3)
    x = np.array(x)
    assert np.allclose(jacobi_inverse(jacobi_forward(x, jm), jm), x, atol=1e-12)


def test_jacobi_rejects_wrong_width():
    with pytest.raises(ValueError):
        jacobi_forward(np.zeros(4), JacobiMap.for_particles(3))


def test_lines_are_unit_and_match_differences():
    geo = SingularGeometry.for_particles(3)
    assert np.allclose(np.linalg.norm(geo.normals, axis=1), 1.0)
    jm = JacobiMap.for_particles(3)
    x = np.array([0.3, -1.1, 2.0])
    y = jacobi_forward(x, jm)[:2]
    diffs = [(x[i] - x[j]) / np.sqrt(2) for i, j in geo.pairs]
    assert np.allclose(geo.values(y), diffs)


def test_three_body_lines_explicit():
    nrm = SingularGeometry.for_particles(3).normals
    r = np.sqrt(3) / 2
    assert np.allclose(nrm, [[1, 0], [0.5, r], [-0.5, r]])


def test_singular_distance_on_line_is_zero():
    geo = SingularGeometry.for_particles(3)
    assert singular_distance(np.array([0.0, 2.0]), geo) == 0.0
    assert singular_distance(np.array([1.5, 1.5 * np.sqrt(3)]), geo) == pytest.approx(1.5)


def test_value_at_reference_point_matches_high_precision():
    # w(1,1) = 4 N alpha / 2 * 2 + ln|f1 f2 f3| = 1 + ln(1/2) at alpha=1/12, gamma=1
    mpmath.mp.dps = 40
    ref = float(1 + mpmath.log(mpmath.mpf(1) / 2))
    ev = eval_superpotential(np.array([1.0, 1.0]), ModelParams(gamma=1.0))
    assert ev.w == pytest.approx(ref, abs=1e-15)
    assert ref == pytest.approx(0.3068528194400547, abs=1e-16)


def test_singular_point_raises():
    with pytest.raises(SingularPointError):
        eval_superpotential(np.array([0.0, 1.0]), ModelParams())
    # gamma = 0 has no singular planes
    assert np.isfinite(eval_superpotential(np.array([0.0, 1.0]), ModelParams(gamma=0.0)).w)


@pytest.mark.parametrize("n", [3, 4])
def test_gradient_and_hessian_against_differences(n):
    p = ModelParams(gamma=1.5, n_particles=n)
    y0 = np.array([1.1, 2.3, 0.4][: n - 1])
    ev = eval_superpotential(y0, p)
    errs = []
    for eps in (1e-3, 5e-4):
        g = np.zeros(n - 1)
        hs = np.zeros((n - 1, n - 1))
        for a in range(n - 1):
            e = np.zeros(n - 1)
            e[a] = eps
            g[a] = (superpotential_value(y0 + e, p) - superpotential_value(y0 - e, p)) / (2 * eps)
            hs[a] = (eval_superpotential(y0 + e, p).grad - eval_superpotential(y0 - e, p).grad) / (2 * eps)
        errs.append(max(np.abs(g - ev.grad).max(), np.abs(hs - ev.hess).max()))
    assert errs[0] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_hessian_is_symmetric():
    ev = eval_superpotential(np.array([0.7, 1.9]), ModelParams())
    assert np.array_equal(ev.hess, ev.hess.T)


@settings(max_examples=40, deadline=None)
@given(coords, coords)
def test_parity_invariance(a, b):
    p = ModelParams()
    y = np.array([a, b])
    if singular_distance(y, SingularGeometry.for_particles(3)) < 1e-3:
        return
    assert superpotential_value(-y, p) == pytest.approx(superpotential_value(y, p), rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(coords, min_size=3, max_size=3), coords)
def test_particle_space_translation_invariance_and_force_balance(x, shift):
    p = ModelParams()
    x = np.array(x)
    if min(abs(x[0] - x[1]), abs(x[0] - x[2]), abs(x[1] - x[2])) < 1e-2:
        return
    w0 = superpotential_x(x, p)
    assert superpotential_x(x + shift, p) == pytest.approx(w0, rel=1e-10, abs=1e-10)
    eps = 1e-6
    grad = [(superpotential_x(x + eps * e, p) - superpotential_x(x - eps * e, p)) / (2 * eps) for e in np.eye(3)]
    assert abs(sum(grad)) < 1e-5 * max(1.0, np.max(np.abs(grad)))


def test_particle_and_relative_forms_differ_by_constant():
    # W(x) - w(y) = gamma * P * ln(sqrt 2) for every configuration
    p = ModelParams()
    jm = JacobiMap.for_particles(3)
    for x in ([0.2, -1.0, 1.7], [3.0, 1.0, -2.5]):
        x = np.array(x)
        y = jacobi_forward(x, jm)[:2]
        diff = superpotential_x(x, p) - superpotential_value(y, p)
        assert diff == pytest.approx(p.gamma * 3 * np.log(np.sqrt(2)), rel=1e-12)


def test_vectorized_fields_match_pointwise():
    p = ModelParams()
    pts = np.array([[1.0, 2.0], [-0.5, 3.1], [2.2, -0.4]])
    w, g, h = superpotential_fields(pts, p)
    for i, y in enumerate(pts):
        ev = eval_superpotential(y, p)
        assert w[i] == pytest.approx(ev.w)
        assert np.allclose(g[i], ev.grad) and np.allclose(h[i], ev.hess)


def test_parameter_validation():
    with pytest.raises(ValueError):
        ModelParams(alpha=-1.0)
    with pytest.raises(ValueError):
        ModelParams(n_particles=5)
    with pytest.raises(ValueError):
        ModelParams(gamma=0.2)
    assert ModelParams(gamma=0.0).gamma == 0.0


def test_box_rule():
    assert box_half_width(ModelParams()) == 7.5
    assert box_half_width(ModelParams(n_particles=4)) == 6.5
    p = ModelParams()
    assert np.exp(-p.harmonic_w * 7.5**2) < 1e-12 < np.exp(-p.harmonic_w * 7.0**2)

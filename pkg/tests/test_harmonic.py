import json
import math
import warnings

import numpy as np
import pytest

from hornlab import curvature, harmonic
from hornlab.errors import ComplexRootsError, DegenerateNormalization, DomainError
from hornlab.harmonic import (cheng_yau_check, dirichlet_solve, fibonacci_sphere, indicial_exponents,
                              mean_square, radial_ode_coefficients, real_sph_harm,
                              real_sph_harm_grad, solve_radial, sphere_eigendata,
                              stated_exponent_relation, three_circle_check, three_circle_sweep,
                              weak_residual)

import oracles

Y1_SUP = math.sqrt(3 / (4 * math.pi))


@pytest.fixture(scope="module")
def pure_horn():
    return curvature.pure_horn_metric(0.5, 0.5)


@pytest.fixture(scope="module")
def horn_mode(pure_horn):
    return solve_radial(pure_horn, 1, (1e-10, 0.1))


def test_sphere_eigendata():
    assert sphere_eigendata(0) == (0, 1)
    assert sphere_eigendata(1) == (2, 3)
    assert sphere_eigendata(2) == (6, 5)
    with pytest.raises(DomainError):
        sphere_eigendata(-1)


def test_coefficient_examples():
    r = np.array([0.3, 2.0])
    p, q = radial_ode_coefficients(curvature.flat_metric(), 0)
    np.testing.assert_allclose(p(r), 2 / r, rtol=1e-15)
    np.testing.assert_array_equal(q(r), 0.0)
    eps, eta = 0.3, 0.5
    p, q = radial_ode_coefficients(curvature.pure_horn_metric(eps, eta), 2)
    np.testing.assert_allclose(p(r), (2 * (1 + eps) + (1 - eta)) / r, rtol=1e-14)
    np.testing.assert_allclose(q(r), -4 * 6 * r ** (-2 - 2 * eps), rtol=1e-14)
    p, q = radial_ode_coefficients(curvature.cone_metric(0.1), 1)
    np.testing.assert_allclose(p(r), 2 / r, rtol=1e-15)
    np.testing.assert_allclose(q(r), -2 / (0.01 * r**2), rtol=1e-14)


def _fd_weighted_laplacian(metric, u, r, th, az, h=1e-4):
    # divergence form (1/w) d_i (w g^ij d_j u) with w = phi^2 e^-chi sin(th),
    # evaluated with nested central differences
    phi = lambda x: float(metric.phi(np.array([x]))[0])
    dens = lambda x: phi(x) ** 2 * math.exp(-float(metric.chi(np.array([x]))[0]))

    def flux_r(x):
        return dens(x) * (u(x + h, th, az) - u(x - h, th, az)) / (2 * h)

    def flux_t(t):
        return math.sin(t) * (u(r, t + h, az) - u(r, t - h, az)) / (2 * h)

    lap_r = (flux_r(r + h) - flux_r(r - h)) / (2 * h) / dens(r)
    lap_t = (flux_t(th + h) - flux_t(th - h)) / (2 * h) / math.sin(th)
    lap_a = (u(r, th, az + h) - 2 * u(r, th, az) + u(r, th, az - h)) / h**2 / math.sin(th) ** 2
    return lap_r + (lap_t + lap_a) / phi(r) ** 2


def test_coefficients_against_finite_difference_laplacian():
    metric = curvature.pure_horn_metric(0.3, 0.4)
    k, m = 2, 1
    p, q = radial_ode_coefficients(metric, k)
    f = lambda x: x**3 + 0.5 * x

    def u(x, t, a):
        v = np.array([[math.sin(t) * math.cos(a), math.sin(t) * math.sin(a), math.cos(t)]])
        return f(x) * float(real_sph_harm(k, m, v)[0])

    r, th, az = 0.7, 1.1, 0.4
    Y = u(r, th, az) / f(r)
    ode = (6 * r + p(np.array([r]))[0] * (3 * r**2 + 0.5) + q(np.array([r]))[0] * f(r)) * Y
    assert _fd_weighted_laplacian(metric, u, r, th, az) == pytest.approx(ode, rel=1e-5)


def test_indicial_examples():
    assert stated_exponent_relation(0.0)[0] == pytest.approx(1.0, rel=1e-15)
    assert stated_exponent_relation(0.5)[0] == pytest.approx((-0.5 + math.sqrt(8.25)) / 2)
    assert stated_exponent_relation(0.5)[0] == pytest.approx(1.18614, abs=1e-5)
    p, q = radial_ode_coefficients(curvature.cone_metric(0.1), 1)
    r = np.array([3.0])
    alpha = indicial_exponents(float(r[0] * p(r)[0]), float(r[0] ** 2 * q(r)[0]))[0]
    assert alpha == pytest.approx(13.6509, abs=1e-4)
    assert alpha * (alpha + 1) == pytest.approx(200.0)
    with pytest.raises(ComplexRootsError):
        indicial_exponents(1.0, 1.0)


def test_flat_linear_mode():
    mode = solve_radial(curvature.flat_metric(), 1, (1e-6, 1.0))
    r = np.geomspace(1e-6, 1.0, 200)
    np.testing.assert_allclose(mode(r), r, rtol=1e-8)
    np.testing.assert_allclose(mode.derivative(r), 1.0, rtol=1e-8)


def test_flat_quadratic_mode():
    mode = solve_radial(curvature.flat_metric(), 2, (1e-5, 2.0))
    r = np.geomspace(1e-5, 2.0, 100)
    np.testing.assert_allclose(mode(r), (r / 2.0) ** 2, rtol=1e-8)


@pytest.mark.parametrize("slope, k", [(0.5, 1), (0.5, 2), (0.4076, 1), (1.3, 3)])
def test_cone_modes_are_powers(slope, k):
    alpha = oracles.cone_exponent(slope, k * (k + 1))
    assert harmonic.cone_exponent(slope, k) == pytest.approx(alpha, rel=1e-14)
    mode = solve_radial(curvature.cone_metric(slope), k, (1e-6, 1.0))
    r = np.geomspace(1e-5, 1.0, 100)
    np.testing.assert_allclose(mode(r), r**alpha, rtol=1e-6)


def test_start_normalization():
    mode = solve_radial(curvature.flat_metric(), 1, (1e-3, 1.0), normalization="start")
    assert mode.log_R[0] == 0.0
    assert float(mode(1.0)) == pytest.approx(1e3, rel=1e-8)


def test_continuation_below_start_is_power():
    mode = solve_radial(curvature.cone_metric(0.5), 1, (1e-4, 1.0))
    alpha = oracles.cone_exponent(0.5, 2)
    assert float(mode(1e-7)) == pytest.approx(1e-7**alpha, rel=1e-6)


def test_radial_validation():
    flat = curvature.flat_metric()
    with pytest.raises(DomainError):
        solve_radial(flat, 1, None)
    with pytest.raises(DomainError):
        solve_radial(flat, 1, (1.0, 0.5))
    with pytest.raises(DomainError):
        solve_radial(flat, -1, (0.1, 1.0))


def test_horn_wkb_slope(horn_mode):
    # log-derivative W = d log R / d log r ~ 2 sqrt(lam) r^-eps over one decade near the vertex
    eps, lam = 0.5, 2.0
    r = np.geomspace(1e-9, 1e-8, 20)
    W = horn_mode.log_derivative(r)
    slope = np.polyfit(np.log(r), np.log(W), 1)[0]
    assert slope == pytest.approx(-eps, rel=0.02)
    fit = np.polyfit(r**-eps, horn_mode.log_value(r), 1)[0]
    assert fit == pytest.approx(-2 * math.sqrt(lam) / eps, rel=0.02)
    assert horn_mode.small_r_asymptotic["wkb_constant"] == pytest.approx(2 * math.sqrt(lam) / eps)


def test_mode_residuals(horn_mode, horn_field):
    assert horn_mode.residual() < 1e-6
    assert solve_radial(curvature.cone_metric(0.5), 2, (1e-6, 1.0)).residual() < 1e-6
    for _, _, _, mode in horn_field.modes:
        assert mode.residual() < 1e-6


def test_horn_mode_vanishes_faster_than_powers(horn_mode):
    r = np.geomspace(1e-9, 1e-3, 30)
    for m in (1, 5, 10, 20):
        ratio = horn_mode.log_value(r) - m * np.log(r)
        assert np.all(np.diff(ratio) > 0)


def test_real_harmonics_orthonormal():
    pts, w = oracles.gauss_sphere()
    idx = [(k, m) for k in range(5) for m in range(-k, k + 1)]
    Y = np.array([real_sph_harm(k, m, pts) for k, m in idx])
    gram = (Y * w) @ Y.T
    np.testing.assert_allclose(gram, np.eye(len(idx)), atol=1e-12)


def test_real_degree_one_is_linear():
    pts = fibonacci_sphere(50)
    np.testing.assert_allclose(real_sph_harm(1, 1, pts), Y1_SUP * pts[:, 0], atol=1e-14)
    np.testing.assert_allclose(real_sph_harm(1, -1, pts), Y1_SUP * pts[:, 1], atol=1e-14)
    np.testing.assert_allclose(real_sph_harm(1, 0, pts), Y1_SUP * pts[:, 2], atol=1e-14)


@pytest.mark.parametrize("k, m", [(1, 0), (2, 1), (3, -2), (4, 3)])
def test_harmonic_gradient_matches_finite_differences(k, m):
    th, az, h = 1.0, 0.7, 1e-6

    def Y(t, a):
        v = np.array([[math.sin(t) * math.cos(a), math.sin(t) * math.sin(a), math.cos(t)]])
        return float(real_sph_harm(k, m, v)[0])

    v = np.array([[math.sin(th) * math.cos(az), math.sin(th) * math.sin(az), math.cos(th)]])
    y, dt, da = (float(c[0]) for c in real_sph_harm_grad(k, m, v))
    assert y == pytest.approx(Y(th, az), rel=1e-13)
    assert dt == pytest.approx((Y(th + h, az) - Y(th - h, az)) / (2 * h), rel=1e-7, abs=1e-9)
    fd = (Y(th, az + h) - Y(th, az - h)) / (2 * h) / math.sin(th)
    assert da == pytest.approx(fd, rel=1e-7, abs=1e-9)


# -- Dirichlet fields -------------------------------------------------------------------

def test_constant_boundary_data():
    c = 2.5
    fld = dirichlet_solve(curvature.pure_horn_metric(0.5, 0.5), 0.1,
                          {0: {0: c * math.sqrt(4 * math.pi)}})
    pts = fibonacci_sphere(20)
    for r in (1e-3, 0.05):
        np.testing.assert_allclose(fld(r, pts), c, rtol=1e-14)
    assert mean_square(fld, 0.05) == pytest.approx(c**2, rel=1e-12)
    assert cheng_yau_check(fld, 0.02, 1.0)["ratio"] == 0.0


def test_flat_linear_field(flat_field):
    pts = fibonacci_sphere(100)
    for r in (1e-4, 0.3, 1.0):
        np.testing.assert_allclose(flat_field(r, pts), r * real_sph_harm(1, 0, pts),
                                   rtol=1e-8, atol=1e-20)


def test_horn_field_tiny_near_vertex(pure_horn):
    fld = dirichlet_solve(pure_horn, 0.1, {1: {0: 1.0}})
    pts = np.vstack([[0.0, 0.0, 1.0], fibonacci_sphere(2000)])
    assert np.max(np.abs(fld(0.1, pts))) == pytest.approx(Y1_SUP, rel=1e-8)
    assert np.max(np.abs(fld(0.01, pts))) < 1e-10


def test_truncation_and_validation():
    flat = curvature.flat_metric()
    fld = dirichlet_solve(flat, 1.0, {1: {0: 1.0}, 3: {2: 0.5}}, k_max=2)
    assert fld.truncated == {3: {2: 0.5}}
    assert fld.coefficient_table() == [(1, 0, 1.0)]
    with pytest.raises(DomainError):
        dirichlet_solve(flat, 1.0, {1: {2: 1.0}})
    with pytest.raises(DomainError):
        dirichlet_solve(flat, 1.0, {1: {0: 1.0}}, k_max=40)


def test_field_json(tmp_path, flat_field):
    flat_field.to_json(tmp_path / "f.json")
    doc = json.loads((tmp_path / "f.json").read_text())
    assert doc["s"] == 1.0 and doc["modes"][0]["k"] == 1
    assert len(doc["modes"][0]["radial_samples"]["r"]) > 100


# -- mean values ------------------------------------------------------------------------

@pytest.mark.parametrize("r", [1e-3, 0.1, 0.5, 1.0])
def test_flat_mean_square_closed_form(flat_field, r):
    assert mean_square(flat_field, r) == pytest.approx(3 * r**2 / (20 * math.pi), rel=1e-10)


def test_mean_square_adds_over_orthogonal_modes():
    flat = curvature.flat_metric()
    both = dirichlet_solve(flat, 1.0, {1: {0: 1.0, 1: 1.0}, 2: {-2: 0.5}})
    parts = [dirichlet_solve(flat, 1.0, d) for d in ({1: {0: 1.0}}, {1: {1: 1.0}}, {2: {-2: 0.5}})]
    for r in (0.2, 0.7):
        assert mean_square(both, r) == pytest.approx(sum(mean_square(f, r) for f in parts),
                                                     rel=1e-10)


def test_mean_square_domain(flat_field):
    with pytest.raises(DomainError):
        mean_square(flat_field, 2.0)


def test_horn_doubling_ratio_grows(horn_field):
    s = horn_field.ball_radius
    ratios = [mean_square(horn_field, r, log=True) - mean_square(horn_field, r / 2, log=True)
              for r in s * np.array([0.5, 1e-2, 1e-4, 1e-6])]
    assert np.all(np.diff(ratios) > 0)


def test_maximum_principle(horn_field):
    pts = fibonacci_sphere(3000)
    s = horn_field.ball_radius
    bound = np.max(np.abs(horn_field(s, pts)))
    for r in s * np.array([1e-6, 1e-3, 0.1, 0.5, 0.9]):
        assert np.max(np.abs(horn_field(r, pts))) <= bound * (1 + 1e-12)


def test_weak_residual(horn_field, flat_field):
    assert weak_residual(horn_field) < 1e-5
    assert weak_residual(flat_field) < 1e-8


# -- three circles and gradient bounds ----------------------------------------------------

@pytest.fixture(scope="module")
def cone_field():
    return dirichlet_solve(curvature.cone_metric(0.5), 1.0, {1: {0: 1.0}})


def test_three_circle_single_mode_on_cone(cone_field):
    alpha = oracles.cone_exponent(0.5, 2)
    row = three_circle_check(cone_field, 0.8, alpha + 0.5, eta=None)
    assert row["premise"] and row["conclusion"] and row["implication_holds"]
    assert row["log2_ratio_outer"] == pytest.approx(alpha, rel=1e-8)
    assert row["log2_ratio_inner"] == pytest.approx(alpha, rel=1e-8)
    row = three_circle_check(cone_field, 0.8, alpha - 0.5, eta=None)
    assert not row["premise"] and row["implication_holds"]


def test_three_circle_resonance_flagged(cone_field):
    s = stated_exponent_relation(0.5)[0]
    with pytest.warns(UserWarning):
        row = three_circle_check(cone_field, 0.8, s, eta=0.5)
    assert row["admissible"] is False


def test_three_circle_sweep_k0(cone_field):
    alpha = oracles.cone_exponent(0.5, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sweep = three_circle_sweep(cone_field, np.geomspace(0.01, 1.0, 6), alpha + 0.1, eta=None)
    assert sweep["all_hold"] and sweep["k0"] == pytest.approx(0.01)


def test_cheng_yau_flat_linear(flat_field):
    # |grad (r Y_10)| = sqrt(3/4pi) and sup over B_2r of |u| is 2 r sqrt(3/4pi)
    out = cheng_yau_check(flat_field, 0.25, 1.0)
    assert out["ratio"] == pytest.approx(Y1_SUP, rel=1e-6)
    assert out["scaled"] == pytest.approx(0.5, rel=1e-3)
    assert out["pass"]


def test_cheng_yau_horn_bounded(horn_field):
    s = horn_field.ball_radius
    scaled = [cheng_yau_check(horn_field, r, 100.0, n_points=500, n_radii=12)["scaled"]
              for r in np.geomspace(1e-3 * s, s / 2, 6)]
    assert np.all(np.isfinite(scaled)) and max(scaled) < 100.0


def test_cheng_yau_domain(flat_field):
    with pytest.raises(DomainError):
        cheng_yau_check(flat_field, 0.6, 1.0)


# -- global construction ------------------------------------------------------------------

def test_global_construction_exact_cone():
    res = harmonic.global_harmonic_construct(curvature.cone_metric(0.4076), [10, 20, 40], 2.0)
    assert max(res.differences) < 1e-8 and res.converged


def test_global_construction_zero_data():
    with pytest.raises(DegenerateNormalization):
        harmonic.global_harmonic_construct(curvature.cone_metric(0.5), [10, 20], 2.0,
                                           boundary={1: 0.0})


def test_global_construction_needs_increasing_radii():
    with pytest.raises(DomainError):
        harmonic.global_harmonic_construct(curvature.cone_metric(0.5), [20, 10], 2.0)

import csv
import json
import math

import numpy as np
import pytest

from hornlab import curvature, decay, harmonic
from hornlab.decay import (DecayReport, boundary_sup, decay_certificate, decay_report,
                           quasipoly_fit, recursion_check, vio_table)
from hornlab.errors import DomainError, FitError

import oracles

Y1_SUP = math.sqrt(3 / (4 * math.pi))


def _synthetic(r, log_q, eps=0.5):
    return DecayReport(np.asarray(r), np.asarray(log_q), np.zeros(len(r)), eps, 2 * r[-1])


@pytest.fixture(scope="module")
def flat_report(flat_field):
    return decay_report(flat_field, n=30)


@pytest.fixture(scope="module")
def pure_horn_field():
    return harmonic.dirichlet_solve(curvature.pure_horn_metric(0.5, 0.5), 0.1, {1: {0: 1.0}},
                                    r_start=1e-10)


# -- boundary sup ---------------------------------------------------------------------------

def test_boundary_sup_constant():
    fld = harmonic.dirichlet_solve(curvature.flat_metric(), 1.0, {0: {0: -3.0}})
    assert boundary_sup(fld, 0.4) == pytest.approx(3.0 / math.sqrt(4 * math.pi), rel=1e-14)


@pytest.mark.parametrize("r", [1e-5, 0.01, 0.7])
def test_boundary_sup_flat_linear(flat_field, r):
    assert boundary_sup(flat_field, r) == pytest.approx(r * Y1_SUP, rel=1e-10)


def test_boundary_sup_horn_mode(pure_horn_field):
    fld = harmonic.dirichlet_solve(pure_horn_field.metric, 0.1, {1: {1: -2.0}}, r_start=1e-10)
    mode = fld.modes[0][3]
    r = 0.003
    want = 2.0 * float(mode(r) / mode(0.1)) * Y1_SUP
    assert boundary_sup(fld, r) == pytest.approx(want, rel=1e-8)


# -- quasi-polynomial fit ----------------------------------------------------------------------

def test_polynomial_vanishing_is_finite_order():
    r = np.geomspace(1e-6, 0.5, 40)
    fit = quasipoly_fit(_synthetic(r, 2 * np.log(r)))
    assert fit.B == pytest.approx(2.0, abs=1e-10) and abs(fit.c) < 1e-10
    assert str(fit.verdict) == "FiniteOrder(2)"


def test_quadratic_log_decay_recovered():
    r = np.geomspace(1e-6, 0.5, 40)
    fit = quasipoly_fit(_synthetic(r, -0.2 * np.log(r) ** 2))
    assert fit.c == pytest.approx(-0.2, abs=1e-6)
    assert fit.verdict.kind == "InfiniteOrder"


def test_fit_errors():
    with pytest.raises(FitError):
        quasipoly_fit(_synthetic(np.geomspace(1e-6, 0.5, 8), np.zeros(8)))
    with pytest.raises(FitError):
        quasipoly_fit(_synthetic(np.geomspace(0.1, 0.5, 20), np.zeros(20)))
    r = np.repeat([1e-6, 0.5], 10)
    with pytest.raises(FitError):
        quasipoly_fit(_synthetic(r, np.log(r)))


def test_flat_is_finite_order_one(flat_report):
    assert str(flat_report.verdict) == "FiniteOrder(1)"
    np.testing.assert_allclose(flat_report.effective_order, 1.0, atol=1e-8)
    np.testing.assert_allclose(flat_report.q_values, flat_report.r_grid * Y1_SUP, rtol=1e-10)
    np.testing.assert_allclose(flat_report.M_values, 3 * flat_report.r_grid**2 / (20 * math.pi),
                               rtol=1e-10)


@pytest.mark.parametrize("slope", [0.5, 0.8])
def test_cone_order_is_growth_exponent(slope):
    fld = harmonic.dirichlet_solve(curvature.cone_metric(slope), 1.0, {1: {0: 1.0}})
    fit = quasipoly_fit(decay_report(fld, n=30))
    assert fit.verdict.kind == "FiniteOrder"
    assert fit.verdict.order == pytest.approx(oracles.cone_exponent(slope, 2), rel=0.01)


def test_preset_horn_is_infinite_order(horn_report):
    fit = quasipoly_fit(horn_report)
    assert fit.verdict.kind == "InfiniteOrder" and fit.c < 0


def test_pure_horn_is_infinite_order(pure_horn_field):
    fit = quasipoly_fit(decay_report(pure_horn_field, n=30))
    assert fit.verdict.kind == "InfiniteOrder" and fit.c < 0


def test_annulus_sup(horn_report):
    r0 = horn_report.r_grid[-1]
    sel = horn_report.r_grid >= r0 / 2 * (1 - 1e-12)
    assert horn_report.annulus_sup == pytest.approx(horn_report.q_values[sel].max(), rel=1e-14)


def test_report_grid_validated(flat_field):
    with pytest.raises(DomainError):
        decay_report(flat_field, r_grid=[0.5, 2.0])


# -- recursion and certificate -------------------------------------------------------------------

def test_recursion_zero_field():
    r = np.geomspace(1e-5, 0.5, 30)
    out = recursion_check(_synthetic(r, np.full(30, -np.inf)), 0.5)
    assert out["C_fit"] == 0.0


def test_recursion_flags_power_law():
    r = np.geomspace(1e-5, 0.5, 60)
    alpha, eps = 3.0, 0.5
    out = recursion_check(_synthetic(r, alpha * np.log(r)), eps)
    # ratio q(r) / (r^eps q(2r)) = 2^-alpha r^-eps, largest at the smallest radius
    assert out["C_fit"] == pytest.approx(2**-alpha * r[0] ** -eps, rel=1e-12)
    assert not out["uniform"]


def test_recursion_horn_stable_under_refinement(pure_horn_field):
    coarse = recursion_check(decay_report(pure_horn_field, n=30), 0.5)
    fine = recursion_check(decay_report(pure_horn_field, n=60), 0.5)
    assert coarse["uniform"] and fine["uniform"]
    assert fine["C_fit"] == pytest.approx(coarse["C_fit"], rel=0.05)


def test_recursion_needs_three_octaves():
    with pytest.raises(DomainError):
        recursion_check(_synthetic(np.geomspace(0.1, 0.5, 10), np.zeros(10)), 0.5)


def test_certificate_on_preset_horn(horn_report):
    cert = decay_certificate(horn_report, horn_report.epsilon)
    assert cert.holds and cert.worst_margin <= 0
    assert cert.exponent == pytest.approx(horn_report.epsilon / 4)


def test_certificate_fails_for_power_law():
    r = np.geomspace(1e-5, 0.5, 40)
    assert not decay_certificate(_synthetic(r, 1.0 * np.log(r), eps=0.5), 0.5).holds


# -- vio table -------------------------------------------------------------------------------

def test_vio_flat_rows(flat_field):
    vt = vio_table(flat_field, np.geomspace(1e-6, 0.5, 20))
    assert vt.trends[:5] == ["->0"] * 5
    assert vt.trends[5] == "const"
    assert all(t == "diverges" for t in vt.trends[6:])
    assert str(vt.verdict) == "FiniteOrder(5)"


def test_vio_horn_rows_vanish(horn_field):
    s = horn_field.ball_radius
    vt = vio_table(horn_field, np.geomspace(1e-14 * s, s / 2, 40), m_max=30)
    assert all(t == "->0" for t in vt.trends)
    assert vt.verdict.kind == "InfiniteOrder"
    # toward the vertex every row falls monotonically over the smallest decades
    assert np.all(np.diff(vt.log10_ratio[:, :12], axis=1) > 0)
    assert vt.log10_ratio[30, 0] < vt.log10_ratio[30].max() - 100


def test_vio_zero_field():
    zero = harmonic.dirichlet_solve(curvature.flat_metric(), 1.0, {})
    vt = vio_table(zero, np.geomspace(1e-4, 0.5, 10))
    assert np.all(np.isneginf(vt.log10_ratio))
    assert vt.verdict.kind == "InfiniteOrder"


def test_vio_m_max_limit(flat_field):
    with pytest.raises(DomainError):
        vio_table(flat_field, [0.1, 0.2], m_max=31)


# -- outputs -----------------------------------------------------------------------------------

def test_report_files(tmp_path, flat_report):
    flat_report.to_csv(tmp_path / "d.csv")
    rows = list(csv.reader(open(tmp_path / "d.csv")))
    assert rows[0][:4] == ["r", "q", "M", "effective_order"]
    assert len(rows) == flat_report.r_grid.size + 1
    doc = json.loads(flat_report.to_json(tmp_path / "d.json"))
    assert doc["verdict"] == "FiniteOrder(1)"
    decay.write_svg(flat_report, tmp_path / "d.svg")
    assert (tmp_path / "d.svg").read_text().lstrip().startswith("<svg")


def test_default_ball_radius(positive_metric):
    p = positive_metric.params
    assert decay.default_ball_radius(positive_metric) == p.rho + p.zeta + 3 * p.kappa
    assert decay.default_ball_radius(curvature.flat_metric()) == 1.0

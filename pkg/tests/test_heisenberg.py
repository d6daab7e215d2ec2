import math

import numpy as np
import pytest

from cocycle_lab import HeisenbergModel, build_triangular, corollary_main_report, ecu_cocycle, family_theta
from cocycle_lab.cocycle import det
from cocycle_lab.theta import _derivative_terms, orbit_entries

MODEL = HeisenbergModel()
LAM_U = (3 + math.sqrt(5)) / 2


@pytest.fixture(scope="module")
def tri():
    return build_triangular(ecu_cocycle(MODEL), MODEL.base, samples=16)


def test_model_invariants():
    B = np.array(MODEL.B, dtype=float)
    assert np.allclose(B @ MODEL.v_u, MODEL.lam_u * MODEL.v_u, atol=1e-12)
    assert MODEL.lam_u * MODEL.lam_s == pytest.approx(1.0, abs=1e-12)
    assert np.all(MODEL.v_u > 0)
    assert MODEL.lam_u == pytest.approx(LAM_U)


def test_ecu_examples():
    c = ecu_cocycle(MODEL)
    assert np.allclose(c(np.array([[0.0, 0.0]]))[0], np.diag([LAM_U, 1.0]))
    q1, q2 = MODEL.v_u
    assert c(np.array([[0.5, 0.5]]))[0, 1, 0] == pytest.approx(LAM_U * (q1 + q2) / 2)
    xs = MODEL.base.sample(50, seed=1)
    assert np.allclose(det(c(xs)), LAM_U)
    assert c.orientation_preserving


def test_family_examples():
    xs = MODEL.base.sample(20, seed=2)
    assert np.array_equal(family_theta(MODEL, 0.0)(xs), ecu_cocycle(MODEL)(xs))
    assert np.allclose(det(family_theta(MODEL, 0.7)(xs)), LAM_U)
    assert np.allclose(family_theta(MODEL, math.pi)(xs), -ecu_cocycle(MODEL)(xs), atol=1e-12)


def test_triangular_averages(tri):
    oe = orbit_entries(tri, MODEL.base, n=4000, samples=8)
    w = slice(oe.warmup, oe.warmup + oe.n)
    assert np.log(oe.eta[w]).mean() == pytest.approx(math.log(LAM_U), abs=1e-3)
    assert abs(np.log(oe.lam[w]).mean()) <= 1e-3


def test_concave_at_zero(tri):
    oe = orbit_entries(tri, MODEL.base, n=4000, samples=8, warmup=2 * 107)
    assert _derivative_terms(oe)[1] < 0


def test_report_small_grid(tri):
    rep = corollary_main_report(MODEL, [-0.05, -0.025, 0.0, 0.025, 0.05], n=4000, samples=8, tri=tri,
                                certify_kwargs={"samples": 4})
    assert rep.lambda_plus0 == pytest.approx(math.log(LAM_U), abs=1e-3)
    assert abs(rep.lambda_minus0) <= 1e-3
    assert not rep.empty
    assert rep.lower == 0.0 and rep.upper > 0
    for row in rep.rows:
        if np.isfinite(row.lambda_plus):
            assert row.lambda_plus + row.lambda_minus == pytest.approx(math.log(LAM_U), abs=1e-6)
            assert row.lambda_stable == pytest.approx(math.log(MODEL.lam_s))
    assert any(w[2] > 1e-4 for w in rep.witnesses)
    text = rep.summary()
    assert "window: [" in text


def test_report_empty_window(tri):
    rep = corollary_main_report(MODEL, [0.0], n=1000, samples=4, tri=tri, certify_kwargs={"samples": 4})
    assert rep.empty and rep.diagnostic
    assert "window: empty" in rep.summary()

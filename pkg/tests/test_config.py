import json
import math

import numpy as np
import pytest

from cocycle_lab import ConfigError
from cocycle_lab.config import compile_expression, load_config, parse_config


def test_defaults_and_grid():
    cfg = parse_config({"cocycle": {"kind": "heisenberg"}, "theta_grid": {"min": -0.1, "max": 0.1, "step": "0.05"}})
    assert np.array_equal(cfg.thetas(), [-0.1, -0.05, 0.0, 0.05, 0.1])
    assert not np.any(np.signbit(cfg.thetas()[2:3]))
    assert cfg.n >= 1 and cfg.samples >= 1


def test_decimal_strings_accepted():
    cfg = parse_config({"cocycle": {"kind": "constant", "matrix": [["2", 0], [0, "0.5"]]}, "n": "100"})
    assert cfg.cocycle["matrix"] == [[2.0, 0.0], [0.0, 0.5]]
    assert cfg.n == 100


@pytest.mark.parametrize("doc, field", [
    ({"cocycle": {"kind": "heisenberg"}, "theta_grid": {"min": 0, "max": 1, "step": 0}}, "theta_grid.step"),
    ({"cocycle": {"kind": "heisenberg"}, "theta_grid": {"min": 0, "max": 1, "step": -1}}, "theta_grid.step"),
    ({"cocycle": {"kind": "heisenberg"}, "n": 0}, "n"),
    ({"cocycle": {"kind": "heisenberg"}, "n": 1.5}, "n"),
    ({"cocycle": {"kind": "heisenberg"}, "tolerances": {"residual": 0}}, "tolerances.residual"),
    ({"cocycle": {"kind": "heisenberg"}, "bogus": 1}, "bogus"),
    ({"cocycle": {"kind": "spline"}}, "cocycle.kind"),
    ({"cocycle": {"kind": "constant", "matrix": [[1, 2, 3]]}}, "cocycle.matrix"),
    ({"cocycle": {"kind": "triangular", "lam": "0.5", "sig": "__import__('os')", "eta": 2}}, "cocycle.sig"),
    ({}, "cocycle"),
])
def test_errors_name_field(doc, field):
    with pytest.raises(ConfigError) as err:
        parse_config(doc)
    assert err.value.field == field


def test_error_reports_line(tmp_path):
    text = '{\n  "cocycle": {"kind": "heisenberg"},\n  "theta_grid": {"min": 0, "max": 1, "step": 0}\n}\n'
    p = tmp_path / "c.json"
    p.write_text(text)
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert err.value.line == 3


def test_invalid_json_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "cocycle": ,\n}')
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert err.value.line == 2


def test_expression_evaluator():
    f = compile_expression("0.5 + 0.1*cos(2*pi*x)")
    assert np.allclose(f(np.array([0.0, 0.5])), [0.6, 0.4])
    g = compile_expression("x + 2*y", ("x", "y"))
    assert np.allclose(g(np.array([[1.0, 2.0]])), [5.0])
    for bad in ("open('f')", "x.__class__", "[1, 2]", "z", "lambda: 1"):
        with pytest.raises(ValueError):
            compile_expression(bad)


def test_build_triangular_config():
    doc = json.load(open("configs/triangular.json"))
    cocycle, tri, base = parse_config(doc).build()
    assert cocycle is None
    lam, sig, eta = tri.entries(base, 0.0)
    assert (lam, sig, eta) == pytest.approx((0.6, 0.0, 2.0))
    assert 0 < tri.tau < 1


def test_build_all_base_kinds():
    for b in ({"kind": "circle_rotation", "alpha": 0.3},
              {"kind": "torus_automorphism", "matrix": [[2, 1], [1, 1]]},
              {"kind": "periodic_orbit", "points": [0.1, 0.5]}):
        cfg = parse_config({"cocycle": {"kind": "constant", "matrix": [[2, 0], [0, 0.5]]}, "base": b})
        assert cfg.build()[2].kind == b["kind"]
    cfg = parse_config({"cocycle": {"kind": "constant", "matrix": [[2, 0], [0, 0.5]]}})
    assert math.isclose(cfg.build()[2].alpha, (math.sqrt(5) - 1) / 2)

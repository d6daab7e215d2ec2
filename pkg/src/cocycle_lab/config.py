"""Experiment configuration: a single JSON document.

Numeric fields accept numbers or decimal strings (``"0.5"``).  Entry
functions of a triangular cocycle are numbers or arithmetic expressions in
``x`` built from ``+ - * / **``, the constants ``pi`` and ``e`` and the
functions in ``FUNCTIONS``.  Defaults are listed in ``DEFAULTS``.

Example::

    {
      "cocycle": {"kind": "constant", "matrix": [[2, 0], [0, "0.5"]]},
      "base": {"kind": "circle_rotation", "alpha": "0.6180339887498949"},
      "theta_grid": {"min": -0.3, "max": 0.3, "step": 0.05},
      "n": 10000, "samples": 64, "seed": 0
    }
"""
from __future__ import annotations

import ast
import json
import math
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .base import BaseSystem, circle_rotation, periodic_orbit, torus_automorphism
from .cocycle import CocycleSpec, constant_cocycle
from .exceptions import ConfigError
from .heisenberg import HeisenbergModel, ecu_cocycle
from .triangular import TriangularCocycle, triangular_from_functions

__all__ = ["ExperimentConfig", "DEFAULTS", "FUNCTIONS", "load_config", "parse_config", "compile_expression"]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

DEFAULTS: dict[str, Any] = {
    "base": {"kind": "circle_rotation", "alpha": GOLDEN},
    "theta_grid": {"min": -0.3, "max": 0.3, "step": 0.05},
    "n": 10_000,
    "samples": 64,
    "seed": 0,
    "K": None,
    "warmup": 512,
    "tolerances": {"formula_direct": 1e-3, "section": 1e-10, "residual": 1e-8},
    "certify": {"samples": 16, "l_max": 64},
    "output_dir": "out",
}

FUNCTIONS: dict[str, Callable] = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh, "cosh": np.cosh, "sinh": np.sinh,
}
_CONSTANTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def compile_expression(text: str, variables: tuple[str, ...] = ("x",)) -> Callable:
    """Compile an arithmetic expression into ``f(x)`` evaluated on numpy arrays.

    Only literals, the listed variables, ``pi``, ``e``, arithmetic operators and
    whitelisted functions are accepted.  For torus points ``x`` refers to the
    first coordinate and ``y`` to the second.
    """
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def check(node):
        if isinstance(node, ast.Expression):
            return check(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return
        if isinstance(node, ast.Name) and (node.id in variables or node.id in _CONSTANTS):
            return
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
            return
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            check(node.operand)
            return
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in FUNCTIONS
                and not node.keywords and len(node.args) == 1):
            check(node.args[0])
            return
        raise ValueError(f"unsupported element {ast.dump(node)[:40]!r} in expression {text!r}")

    check(tree)

    def evaluate(node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else _CONSTANTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](evaluate(node.left, env), evaluate(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](evaluate(node.operand, env))
        return FUNCTIONS[node.func.id](evaluate(node.args[0], env))

    def f(points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 2:
            env = dict(zip(variables, (pts[:, 0], pts[:, 1])))
        else:
            env = {variables[0]: pts}
        return np.broadcast_to(np.asarray(evaluate(tree.body, env), dtype=float), pts.shape[:1]).copy()

    return f


@dataclass
class ExperimentConfig:
    cocycle: dict
    base: dict = field(default_factory=lambda: dict(DEFAULTS["base"]))
    theta_grid: dict = field(default_factory=lambda: dict(DEFAULTS["theta_grid"]))
    n: int = DEFAULTS["n"]
    samples: int = DEFAULTS["samples"]
    seed: int = DEFAULTS["seed"]
    K: int | None = None
    warmup: int = DEFAULTS["warmup"]
    tolerances: dict = field(default_factory=lambda: dict(DEFAULTS["tolerances"]))
    certify: dict = field(default_factory=lambda: dict(DEFAULTS["certify"]))
    output_dir: str = DEFAULTS["output_dir"]

    def thetas(self) -> np.ndarray:
        g = self.theta_grid
        lo, hi, step = g["min"], g["max"], g["step"]
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        # rounding keeps grid values reproducible and free of -0.0
        return np.round(lo + step * np.arange(count), 12) + 0.0

    def build_base(self) -> BaseSystem:
        kind = self.base["kind"]
        if kind == "circle_rotation":
            return circle_rotation(self.base["alpha"])
        if kind == "torus_automorphism":
            return torus_automorphism(self.base["matrix"])
        return periodic_orbit(self.base["points"])

    def build(self) -> tuple[CocycleSpec | None, TriangularCocycle | None, BaseSystem]:
        """``(cocycle, triangular, base)``; one of the first two may be ``None``."""
        kind = self.cocycle["kind"]
        if kind == "heisenberg":
            model = HeisenbergModel()
            return ecu_cocycle(model), None, model.base
        base = self.build_base()
        if kind == "constant":
            return constant_cocycle(np.array(self.cocycle["matrix"], dtype=float)), None, base
        variables = ("x", "y") if base.point_shape == (2,) else ("x",)
        entries = []
        for key in ("lam", "sig", "eta"):
            v = self.cocycle[key]
            entries.append(v if isinstance(v, float) else compile_expression(v, variables))
        tri = triangular_from_functions(*entries, base=base, tau=self.cocycle.get("tau"))
        return None, tri, base


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _number(value, name: str, text: str | None, integer: bool = False):
    if isinstance(value, bool) or value is None:
        raise ConfigError(f"expected a number, got {value!r}", name, _line_of(text, name.split(".")[-1]))
    if isinstance(value, str):
        try:
            value = float(value.strip())
        except ValueError:
            raise ConfigError(f"expected a number, got {value!r}", name,
                              _line_of(text, name.split(".")[-1])) from None
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"expected a finite number, got {value!r}", name, _line_of(text, name.split(".")[-1]))
    if integer:
        if float(value) != int(value):
            raise ConfigError(f"expected an integer, got {value!r}", name, _line_of(text, name.split(".")[-1]))
        return int(value)
    return float(value)


def _matrix(value, name: str, text: str | None, shape=(2, 2)) -> list:
    try:
        rows = [[_number(v, name, text) for v in row] for row in value]
    except TypeError:
        raise ConfigError("expected a nested list of numbers", name, _line_of(text, name.split(".")[-1])) from None
    if np.shape(rows) != shape:
        raise ConfigError(f"expected shape {shape}, got {np.shape(rows)}", name, _line_of(text, name.split(".")[-1]))
    return rows


def _entry(value, name: str, text: str | None):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value.strip())
        except ValueError:
            pass
        try:
            compile_expression(value, ("x", "y"))
        except ValueError as exc:
            raise ConfigError(str(exc), name, _line_of(text, name.split(".")[-1])) from None
        return value
    raise ConfigError(f"expected a number or an expression, got {value!r}", name, _line_of(text, name.split(".")[-1]))


KNOWN_KEYS = {"cocycle", "base", "theta_grid", "n", "samples", "seed", "K", "warmup", "tolerances",
              "certify", "output_dir"}


def parse_config(data: dict, text: str | None = None) -> ExperimentConfig:
    """Validate a decoded config document and fill in defaults."""
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", None, 1)
    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown field(s): {', '.join(unknown)}", unknown[0], _line_of(text, unknown[0]))
    if "cocycle" not in data:
        raise ConfigError("missing required field", "cocycle", None)
    coc = data["cocycle"]
    if not isinstance(coc, dict) or "kind" not in coc:
        raise ConfigError("cocycle needs a 'kind'", "cocycle", _line_of(text, "cocycle"))
    kind = coc["kind"]
    if kind == "constant":
        cocycle = {"kind": kind, "matrix": _matrix(coc.get("matrix"), "cocycle.matrix", text)}
    elif kind == "heisenberg":
        cocycle = {"kind": kind}
    elif kind == "triangular":
        cocycle = {"kind": kind}
        for key in ("lam", "sig", "eta"):
            if key not in coc:
                raise ConfigError("missing entry function", f"cocycle.{key}", _line_of(text, "cocycle"))
            cocycle[key] = _entry(coc[key], f"cocycle.{key}", text)
        if coc.get("tau") is not None:
            cocycle["tau"] = _number(coc["tau"], "cocycle.tau", text)
    else:
        raise ConfigError(f"unknown cocycle kind {kind!r} (constant, heisenberg, triangular)", "cocycle.kind",
                          _line_of(text, "kind"))

    b = data.get("base", DEFAULTS["base"])
    if not isinstance(b, dict) or "kind" not in b:
        raise ConfigError("base needs a 'kind'", "base", _line_of(text, "base"))
    if b["kind"] == "circle_rotation":
        base = {"kind": "circle_rotation", "alpha": _number(b.get("alpha", GOLDEN), "base.alpha", text)}
    elif b["kind"] == "torus_automorphism":
        base = {"kind": "torus_automorphism", "matrix": _matrix(b.get("matrix"), "base.matrix", text)}
    elif b["kind"] == "periodic_orbit":
        pts = b.get("points")
        if not isinstance(pts, list) or not pts:
            raise ConfigError("expected a non-empty list of points", "base.points", _line_of(text, "points"))
        base = {"kind": "periodic_orbit",
                "points": [_number(p, "base.points", text) if not isinstance(p, list)
                           else [_number(v, "base.points", text) for v in p] for p in pts]}
    else:
        raise ConfigError(f"unknown base kind {b['kind']!r}", "base.kind", _line_of(text, "base"))

    g = data.get("theta_grid", DEFAULTS["theta_grid"])
    if not isinstance(g, dict):
        raise ConfigError("expected an object with min, max, step", "theta_grid", _line_of(text, "theta_grid"))
    grid = {k: _number(g.get(k, DEFAULTS["theta_grid"][k]), f"theta_grid.{k}", text) for k in ("min", "max", "step")}
    if not grid["step"] > 0:
        raise ConfigError(f"step must be > 0, got {grid['step']}", "theta_grid.step", _line_of(text, "step"))
    if grid["max"] < grid["min"]:
        raise ConfigError("max must be >= min", "theta_grid.max", _line_of(text, "max"))
    if (grid["max"] - grid["min"]) / grid["step"] > 100_000:
        raise ConfigError("grid has more than 100000 points", "theta_grid.step", _line_of(text, "step"))

    ints = {}
    for key, lo in (("n", 1), ("samples", 1), ("seed", 0), ("warmup", 0)):
        v = _number(data.get(key, DEFAULTS[key]), key, text, integer=True)
        if v < lo:
            raise ConfigError(f"must be >= {lo}, got {v}", key, _line_of(text, key))
        ints[key] = v
    K = data.get("K")
    if K is not None:
        K = _number(K, "K", text, integer=True)
        if K < 1:
            raise ConfigError(f"must be >= 1, got {K}", "K", _line_of(text, "K"))

    tol = dict(DEFAULTS["tolerances"])
    for k, v in (data.get("tolerances") or {}).items():
        if k not in tol:
            raise ConfigError("unknown tolerance", f"tolerances.{k}", _line_of(text, k))
        tol[k] = _number(v, f"tolerances.{k}", text)
        if not tol[k] > 0:
            raise ConfigError("tolerances must be positive", f"tolerances.{k}", _line_of(text, k))
    cert = dict(DEFAULTS["certify"])
    for k, v in (data.get("certify") or {}).items():
        if k not in cert:
            raise ConfigError("unknown certify option", f"certify.{k}", _line_of(text, k))
        cert[k] = _number(v, f"certify.{k}", text, integer=True)
        if cert[k] < 1:
            raise ConfigError("must be >= 1", f"certify.{k}", _line_of(text, k))
    out = data.get("output_dir", DEFAULTS["output_dir"])
    if not isinstance(out, str) or not out:
        raise ConfigError("expected a non-empty path", "output_dir", _line_of(text, "output_dir"))
    return ExperimentConfig(cocycle, base, grid, ints["n"], ints["samples"], ints["seed"], K, ints["warmup"],
                            tol, cert, out)


def load_config(path: str | Path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", None, exc.lineno) from None
    return parse_config(data, text)

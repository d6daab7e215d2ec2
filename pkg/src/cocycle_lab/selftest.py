"""Closed-form oracle checks bundled as a quick self-test."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import circle_rotation
from .cocycle import constant_cocycle, rotate_family
from .domination import NOT_DOMINATED, certify
from .heisenberg import HeisenbergModel, ecu_cocycle
from .theta import (_derivative_terms, entries_theta, lyap_plus_theta, orbit_entries, udot0, uddot0)
from .triangular import build_triangular, triangular_from_functions

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    expected: float
    tol: float

    @property
    def error(self) -> float:
        return abs(self.value - self.expected)

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tol)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name}: value={self.value:.12g} expected={self.expected:.12g} "
                f"error={self.error:.3e} tol={self.tol:.1e}")


def _checks():
    base = circle_rotation(GOLDEN)
    flat = triangular_from_functions(0.5, 0.0, 2.0, base=base)
    shear = triangular_from_functions(0.5, 1.0, 2.0, base=base)
    oe_flat = orbit_entries(flat, base, n=2000, samples=4, warmup=80)
    oe_shear = orbit_entries(shear, base, n=2000, samples=4, warmup=80)
    d1_flat, d2_flat = _derivative_terms(oe_flat)
    d1_shear, d2_shear = _derivative_terms(oe_shear)
    for t in (0.1, 0.3, 0.6):
        yield ("top exponent, flat family, theta=%g" % t,
               lyap_plus_theta(flat, base, t, oe=oe_flat), math.acosh(1.25 * math.cos(t)), 1e-6)
    yield "first derivative, flat family", d1_flat, 0.0, 1e-12
    yield "second derivative, flat family", d2_flat, -5.0 / 3.0, 1e-6
    yield "first derivative, sheared family", d1_shear, -2.0 / 3.0, 1e-6
    yield "second derivative, sheared family", d2_shear, -65.0 / 27.0, 1e-6
    yield "udot0 geometric series", udot0(shear, base, 0.25, K=40).value, -1.0 / 3.0, 1e-10
    yield "uddot0 geometric series", uddot0(shear, base, 0.25, K=40).value, -16.0 / 27.0, 1e-10
    e = entries_theta(shear, base, 0.25, math.pi / 6)
    yield "rotated entry c at pi/6", float(e.c), 1.0 + math.sqrt(3.0) / 2.0, 1e-12
    diag = constant_cocycle(np.diag([2.0, 0.5]))
    cert = certify(rotate_family(diag, math.pi / 2), base, samples=4)
    yield "elliptic witness at pi/2 (1 = not dominated)", float(cert.verdict == NOT_DOMINATED), 1.0, 0.5
    model = HeisenbergModel()
    tri = build_triangular(ecu_cocycle(model), model.base, samples=16)
    oe = orbit_entries(tri, model.base, n=4000, samples=8)
    yield "heisenberg top exponent at 0", lyap_plus_theta(tri, model.base, 0.0, oe=oe), math.log(model.lam_u), 1e-3


def run_selftest(tolerance: float | None = None) -> tuple[str, bool]:
    """Run all checks; ``tolerance`` replaces every per-check tolerance when given."""
    checks = []
    for name, value, expected, tol in _checks():
        checks.append(Check(name, float(value), float(expected), tol if tolerance is None else tolerance))
    lines = [c.line() for c in checks]
    ok = all(c.passed for c in checks)
    lines.append(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed")
    return "\n".join(lines) + "\n", ok

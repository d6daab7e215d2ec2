"""Center-unstable derivative cocycle of a partially hyperbolic nilmanifold automorphism.

The automorphism covers the cat map ``B = [[2, 1], [1, 1]]`` on the torus.
Restricted to the center-unstable bundle, in the orthonormal frame made of
the unit unstable eigenvector of ``B`` and the center direction, its
derivative is

    [[lam_u, 0], [lam_u * (x . v_u), 1]]

with ``x`` the representative of the base point in ``[0, 1)^2``.  The stable
exponent ``log lam_s`` is constant and does not depend on the rotation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .base import BaseSystem, torus_automorphism
from .cocycle import CocycleSpec, rotate_family
from .domination import DOMINATED, certify
from .theta import orbit_entries, _formula, dlambda0, ddlambda0, WARMUP
from .triangular import TriangularCocycle, build_triangular

__all__ = ["HeisenbergModel", "HeisenbergRow", "HeisenbergReport", "ecu_cocycle", "family_theta",
           "corollary_main_report"]


@dataclass(frozen=True, eq=False)
class HeisenbergModel:
    B: np.ndarray = field(default_factory=lambda: np.array([[2, 1], [1, 1]], dtype=np.int64))

    @property
    def lam_u(self) -> float:
        return (3.0 + math.sqrt(5.0)) / 2.0

    @property
    def lam_s(self) -> float:
        return (3.0 - math.sqrt(5.0)) / 2.0

    @property
    def v_u(self) -> np.ndarray:
        # B v = lam v gives v2 = (lam - 2) v1
        v = np.array([1.0, self.lam_u - 2.0])
        return v / np.linalg.norm(v)

    @property
    def base(self) -> BaseSystem:
        return torus_automorphism(self.B)


def ecu_cocycle(model: HeisenbergModel | None = None) -> CocycleSpec:
    model = model or HeisenbergModel()
    lam, v = model.lam_u, model.v_u

    def gen(points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.zeros((len(pts), 2, 2))
        out[:, 0, 0] = lam
        out[:, 1, 0] = lam * (pts @ v)
        out[:, 1, 1] = 1.0
        return out

    return CocycleSpec(gen, True, "heisenberg_ecu")


def family_theta(model: HeisenbergModel | None, theta: float) -> CocycleSpec:
    return rotate_family(ecu_cocycle(model), theta)


@dataclass(frozen=True)
class HeisenbergRow:
    theta: float
    verdict: str
    lambda_plus: float
    lambda_minus: float
    lambda_stable: float
    note: str = ""


@dataclass
class HeisenbergReport:
    rows: list
    lower: float | None
    upper: float | None
    lambda_plus0: float
    lambda_minus0: float
    log_lam_u: float
    dlambda0: float
    ddlambda0: float
    witnesses: list
    diagnostic: str = ""

    @property
    def empty(self) -> bool:
        return not self.witnesses

    def summary(self) -> str:
        lines = [
            f"log lam_u            = {self.log_lam_u:.12f}",
            f"lambda_plus(0)       = {self.lambda_plus0:.12f}",
            f"lambda_minus(0)      = {self.lambda_minus0:.12f}",
            f"lambda_stable        = {self.rows[0].lambda_stable if self.rows else math.nan:.12f}",
            f"d lambda_plus(0)     = {self.dlambda0:.12f}",
            f"d2 lambda_plus(0)    = {self.ddlambda0:.12f}",
        ]
        if self.empty:
            lines.append(f"window: empty ({self.diagnostic})")
        else:
            lines.append(f"window: [{self.lower:.6f}, {self.upper:.6f}] with {len(self.witnesses)} grid points")
            t, lp, lm = max(self.witnesses, key=lambda w: w[2])
            lines.append(f"largest lambda_minus in window: {lm:.12f} at theta={t:.6f} (lambda_plus={lp:.12f})")
        return "\n".join(lines) + "\n"


def corollary_main_report(model: HeisenbergModel | None, theta_grid, n: int = 10_000, samples: int = 64,
                          seed: int = 0, warmup: int = WARMUP, min_gap: float = 1e-4,
                          certify_kwargs: dict | None = None, tri: TriangularCocycle | None = None
                          ) -> HeisenbergReport:
    """Exponents of the rotated family on a grid and the window around 0 where
    the center exponent is lifted above ``min_gap`` and the unstable one
    dropped below its value at 0 by ``min_gap``.

    Non-dominated grid points are kept in ``rows`` with NaN exponents.  The
    window is the run of consecutive qualifying grid points next to 0, on the
    side(s) selected by the sign of the first derivative at 0.
    """
    model = model or HeisenbergModel()
    base = model.base
    cocycle = ecu_cocycle(model)
    grid = np.unique(np.asarray(theta_grid, dtype=float)) + 0.0
    if tri is None:
        tri = build_triangular(cocycle, base, seed=seed)
    oe = orbit_entries(tri, base, n, samples, seed, warmup)
    log_lu = math.log(model.lam_u)
    lam_s = math.log(model.lam_s)
    res = _formula(oe, np.concatenate([[0.0], grid]))
    lp0 = float(res.value[0])
    lm0 = log_lu - lp0
    kw = {"seed": seed}
    kw.update(certify_kwargs or {})
    rows = []
    good = {}
    for i, t in enumerate(grid):
        verdict = certify(rotate_family(cocycle, float(t)), base, **kw).verdict
        lp = float(res.value[i + 1])
        if verdict != DOMINATED:
            rows.append(HeisenbergRow(float(t), verdict, math.nan, math.nan, lam_s, "not certified"))
            continue
        if not np.isfinite(lp):
            rows.append(HeisenbergRow(float(t), verdict, math.nan, math.nan, lam_s,
                                      "formula denominator not positive"))
            continue
        rows.append(HeisenbergRow(float(t), verdict, lp, log_lu - lp, lam_s))
        good[float(t)] = lp
    d1 = dlambda0(tri, base, n=n, samples=samples, seed=seed)
    d2 = ddlambda0(tri, base, n=n, samples=samples, seed=seed)
    if abs(d1) <= 1e-6:
        signs = (1.0, -1.0)
    else:
        signs = (1.0,) if d1 < 0 else (-1.0,)
    witnesses = []
    for sign in signs:
        for t in sorted((float(t) for t in grid if sign * t > 0), key=abs):
            lp = good.get(t)
            if lp is None:
                break
            lm = log_lu - lp
            if lm > min_gap and lp < lp0 - min_gap:
                witnesses.append((t, lp, lm))
            else:
                break
    witnesses.sort()
    if not witnesses:
        return HeisenbergReport(rows, None, None, lp0, lm0, log_lu, d1, d2, [],
                                "no grid point next to 0 qualifies; refine the grid or widen it")
    return HeisenbergReport(rows, min(0.0, witnesses[0][0]), max(0.0, witnesses[-1][0]), lp0, lm0,
                            log_lu, d1, d2, witnesses)

"""Reduction of a dominated cocycle to lower-triangular form by rotations.

At each point the frame ``B = [u_perp | u]`` is built from a unit vector
``u`` spanning the strong direction, and ``D = [v_perp | v]`` from
``v = A u / |A u|``.  Then ``H = D^-1 A B`` is lower triangular with
``H[1, 1] = |A u| > 0``.  Along an orbit ``u(Tx) = +-v(x)``, so products of
``H`` and of ``A`` differ only by rotations on both sides and have equal
norms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .base import BaseSystem
from .cocycle import DET_FLOOR, CocycleSpec, det, norm2
from .domination import SECTION_STEPS, SECTION_TOL, _sample_points, strong_directions
from .exceptions import Inconclusive, NonInvertible

__all__ = [
    "frame",
    "triangularize_point",
    "TriangularCocycle",
    "triangular_from_functions",
    "build_triangular",
    "check_norm_equality",
    "entries_csv",
]

UPPER_ENTRY_TOL = 1e-12
TAU_HEADROOM = 0.01
CHUNK = 4096


def _perp(u):
    return np.stack([u[..., 1], -u[..., 0]], axis=-1)


def frame(u) -> np.ndarray:
    """The rotation ``[u_perp | u]`` with ``u_perp = (u2, -u1)``."""
    u = np.asarray(u, dtype=float)
    return np.stack([_perp(u), u], axis=-1)


def _canonical(u):
    # representative with u2 > 0, or u1 > 0 when u2 == 0
    flip = (u[..., 1] < 0) | ((u[..., 1] == 0) & (u[..., 0] < 0))
    return np.where(flip[..., None], -u, u)


def triangularize_point(A, u) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(H, v)`` with ``H = D_u^-1 A B_u`` lower triangular."""
    A = np.asarray(A, dtype=float)
    u = np.asarray(u, dtype=float)
    if abs(det(A)) < DET_FLOOR:
        raise NonInvertible("matrix is singular to the determinant floor")
    if abs(np.linalg.norm(u) - 1.0) > 1e-12:
        raise ValueError("u must be a unit vector")
    Au = A @ u
    v = Au / np.linalg.norm(Au)
    H = frame(v).T @ A @ frame(u)
    if abs(H[0, 1]) > UPPER_ENTRY_TOL * max(1.0, float(norm2(A))):
        raise AssertionError(f"upper-right entry {H[0, 1]:.3e} is not negligible")
    H[0, 1] = 0.0
    return H, v


@dataclass
class TriangularCocycle:
    """Lower-triangular cocycle ``H = [[lam, 0], [sig, eta]]``.

    Entries are produced along stored orbits by :meth:`orbit_entries`.  Either
    the three entry functions are given directly, or ``source`` names the
    cocycle ``A`` this one was reduced from, in which case the strong section
    is solved at the first orbit point and carried forward by ``A``.
    """

    lam: Callable | None = None
    sig: Callable | None = None
    eta: Callable | None = None
    tau: float | None = None
    source: CocycleSpec | None = None
    section_steps: int = SECTION_STEPS
    section_tol: float = SECTION_TOL

    def orbit_entries(self, base: BaseSystem, points: np.ndarray):
        """``(lam, sig, eta)``, each shaped ``(L, m)``, along chronological ``points``
        shaped ``(L, m) + point_shape``."""
        points = np.asarray(points, dtype=float)
        if self.source is None:
            flat = points.reshape((-1,) + base.point_shape)
            shape = points.shape[: points.ndim - len(base.point_shape)]
            return tuple(np.broadcast_to(np.asarray(f(flat), dtype=float), flat.shape[:1]).reshape(shape)
                         for f in (self.lam, self.sig, self.eta))
        u, residual = strong_directions(self.source, base, points[0], self.section_steps, self.section_tol)
        if np.any(residual > self.section_tol):
            raise Inconclusive(f"strong section did not converge (residual {residual.max():.2e})")
        u = _canonical(u)
        u1, u2 = u[:, 0].copy(), u[:, 1].copy()
        L, m = points.shape[0], points.shape[1]
        out = np.empty((3, L, m))
        for start in range(0, L, CHUNK):
            block = points[start:start + CHUNK]
            mats = self.source(block.reshape((-1,) + base.point_shape)).reshape(len(block), m, 2, 2)
            for j in range(len(block)):
                m00, m01, m10, m11 = mats[j, :, 0, 0], mats[j, :, 0, 1], mats[j, :, 1, 0], mats[j, :, 1, 1]
                w1, w2 = m00 * u1 + m01 * u2, m10 * u1 + m11 * u2
                eta = np.hypot(w1, w2)
                v1, v2 = w1 / eta, w2 / eta
                z1, z2 = m00 * u2 - m01 * u1, m10 * u2 - m11 * u1
                out[0, start + j] = v2 * z1 - v1 * z2
                out[1, start + j] = v1 * z1 + v2 * z2
                out[2, start + j] = eta
                # canonical representative of v for the next point
                flip = (v2 < 0) | ((v2 == 0) & (v1 < 0))
                sgn = np.where(flip, -1.0, 1.0)
                u1, u2 = sgn * v1, sgn * v2
        return out[0], out[1], out[2]

    def entries(self, base: BaseSystem, x):
        """Pointwise ``(lam, sig, eta)`` at a point or a batch."""
        batch, single = base.as_batch(x)
        lam, sig, eta = (e[0] for e in self.orbit_entries(base, batch[None]))
        return (float(lam[0]), float(sig[0]), float(eta[0])) if single else (lam, sig, eta)

    def matrix(self, base: BaseSystem, x) -> np.ndarray:
        lam, sig, eta = self.entries(base, x)
        lam, sig, eta = np.asarray(lam), np.asarray(sig), np.asarray(eta)
        out = np.zeros(lam.shape + (2, 2))
        out[..., 0, 0], out[..., 1, 0], out[..., 1, 1] = lam, sig, eta
        return out

    def as_cocycle(self, base: BaseSystem) -> CocycleSpec:
        """``H`` as a pointwise cocycle (solves a section per point when derived)."""
        return CocycleSpec(lambda pts: self.matrix(base, pts), True, "H")

    def estimate_tau(self, base: BaseSystem, samples: int = 256, seed: int = 0) -> float | None:
        xs = _sample_points(base, samples, seed)
        lam, _, eta = self.entries(base, xs)
        worst = float(np.max(np.abs(lam) / eta))
        return worst + TAU_HEADROOM if worst + TAU_HEADROOM < 1.0 else None


def _check_entries(lam, eta, orientation_preserving=True):
    if np.any(eta <= 0):
        raise ValueError("eta must be positive")
    if orientation_preserving and np.any(lam <= 0):
        raise ValueError("lam <= 0 for an orientation-preserving cocycle: the section is wrong")


def triangular_from_functions(lam, sig, eta, base: BaseSystem | None = None, tau: float | None = None,
                              samples: int = 256, seed: int = 0) -> TriangularCocycle:
    """Triangular cocycle from entry functions (batch in, array out).

    Numbers are accepted in place of functions and become constants.  When
    ``tau`` is not given it is estimated on ``samples`` points of ``base``.
    """

    def wrap(f):
        if callable(f):
            return f
        value = float(f)
        return lambda pts: np.full(len(pts), value)

    tri = TriangularCocycle(wrap(lam), wrap(sig), wrap(eta))
    if tau is None and base is not None:
        xs = _sample_points(base, samples, seed)
        l, _, e = tri.entries(base, xs)
        _check_entries(l, e, orientation_preserving=False)
        tau = tri.estimate_tau(base, samples, seed)
    tri.tau = tau
    return tri


def build_triangular(cocycle: CocycleSpec, base: BaseSystem, samples: int = 64, seed: int = 0,
                     section_steps: int = SECTION_STEPS, section_tol: float = SECTION_TOL) -> TriangularCocycle:
    """Reduce a dominated cocycle to lower-triangular form via its strong section."""
    tri = TriangularCocycle(source=cocycle, section_steps=section_steps, section_tol=section_tol)
    xs = _sample_points(base, samples, seed)
    lam, _, eta = tri.entries(base, xs)
    _check_entries(lam, eta, cocycle.orientation_preserving)
    worst = float(np.max(np.abs(lam) / eta))
    tri.tau = worst + TAU_HEADROOM if worst + TAU_HEADROOM < 1.0 else None
    return tri


def check_norm_equality(cocycle: CocycleSpec, tri: TriangularCocycle, base: BaseSystem, x, n_max: int) -> float:
    """Largest relative gap between ``|A^n(x)|`` and ``|H^n(x)|`` for ``1 <= n <= n_max``."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    batch, _ = base.as_batch(x)
    pts = base.orbit(batch, 0, n_max)
    lam, sig, eta = tri.orbit_entries(base, pts)
    m = len(batch)
    pa = np.broadcast_to(np.eye(2), (m, 2, 2)).copy()
    ph = pa.copy()
    log_a = np.zeros(m)
    log_h = np.zeros(m)
    worst = 0.0
    for j in range(n_max):
        h = np.zeros((m, 2, 2))
        h[:, 0, 0], h[:, 1, 0], h[:, 1, 1] = lam[j], sig[j], eta[j]
        pa = cocycle(pts[j]) @ pa
        ph = h @ ph
        sa, sh = norm2(pa), norm2(ph)
        rel = np.abs(np.expm1((np.log(sh) + log_h) - (np.log(sa) + log_a)))
        worst = max(worst, float(rel.max()))
        pa, ph = pa / sa[:, None, None], ph / sh[:, None, None]
        log_a += np.log(sa)
        log_h += np.log(sh)
    return worst


def entries_csv(tri: TriangularCocycle, base: BaseSystem, xs) -> bytes:
    """CSV table of ``(x, lam, sig, eta)`` at the given points; torus points give ``x1, x2``."""
    from .outputs import csv_bytes

    batch, _ = base.as_batch(xs)
    lam, sig, eta = tri.entries(base, batch)
    coords = batch.reshape(len(batch), -1)
    names = ["x"] if coords.shape[1] == 1 else [f"x{i + 1}" for i in range(coords.shape[1])]
    rows = [tuple(coords[i]) + (lam[i], sig[i], eta[i]) for i in range(len(batch))]
    return csv_bytes(names + ["lam", "sig", "eta"], rows)

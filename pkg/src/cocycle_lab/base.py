"""Invertible base dynamics with invariant-measure sampling.

Three kinds of base are supported:

* ``circle_rotation``: ``x -> x + alpha (mod 1)`` on the circle R/Z,
  Lebesgue measure.
* ``torus_automorphism``: ``x -> M x (mod 1)`` on R^2/Z^2 for an integer
  matrix with ``|det M| = 1``, Lebesgue measure.
* ``periodic_orbit``: cyclic shift through a finite list of points, uniform
  measure on the orbit.

Points are numpy arrays.  All stepping functions are vectorized over a
leading batch axis: circle points have shape ``(m,)``, torus points
``(m, 2)`` and periodic-orbit points ``(m,) + point_shape``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Literal

import numpy as np

from .exceptions import NonFiniteObservable

__all__ = [
    "BaseSystem",
    "OrbitBuffer",
    "circle_rotation",
    "torus_automorphism",
    "periodic_orbit",
    "birkhoff_average",
    "make_rng",
    "torus_distance",
]

Direction = Literal["forward", "backward"]


def make_rng(seed: int) -> np.random.Generator:
    """Philox4x64 counter-based generator; bit-reproducible across platforms."""
    return np.random.Generator(np.random.Philox(int(seed)))


def _wrap(x: np.ndarray) -> np.ndarray:
    y = np.mod(x, 1.0)
    # np.mod can round a tiny negative value up to exactly 1.0
    y[y >= 1.0] = 0.0
    return y


def torus_distance(x, y, point_ndim: int = 1) -> np.ndarray:
    """Distance on R^k/Z^k: max over coordinates of the wrapped difference.

    Use ``point_ndim=0`` for circle points.
    """
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % 1.0
    d = np.minimum(d, 1.0 - d)
    return d.max(axis=-1) if point_ndim else d


@dataclass(frozen=True)
class BaseSystem:
    """An invertible map ``T`` on a compact space plus a sampler for its measure."""

    kind: str
    alpha: float = 0.0
    matrix: np.ndarray | None = None
    points: np.ndarray | None = None
    _inverse: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def point_shape(self) -> tuple[int, ...]:
        if self.kind == "circle_rotation":
            return ()
        if self.kind == "torus_automorphism":
            return (2,)
        return tuple(self.points.shape[1:])

    @property
    def state_space(self) -> str:
        return {"circle_rotation": "R/Z", "torus_automorphism": "R^2/Z^2"}.get(
            self.kind, f"finite set of {0 if self.points is None else len(self.points)} points"
        )

    def as_batch(self, x) -> tuple[np.ndarray, bool]:
        """Return ``(batch, was_single)`` with a leading batch axis added if needed."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == len(self.point_shape)
        return (x[None] if single else x), single

    # -- dynamics ---------------------------------------------------------
    def forward(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "circle_rotation":
            return _wrap(x + self.alpha)
        if self.kind == "torus_automorphism":
            return _wrap(x @ self.matrix.T)
        idx = self._index(x)
        return self.points[(idx + 1) % len(self.points)]

    def backward(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "circle_rotation":
            return _wrap(x - self.alpha)
        if self.kind == "torus_automorphism":
            return _wrap(x @ self._inverse.T)
        idx = self._index(x)
        return self.points[(idx - 1) % len(self.points)]

    def step(self, x, direction: Direction = "forward"):
        """Apply ``T`` (forward) or ``T^-1`` (backward) to a point or batch."""
        batch, single = self.as_batch(x)
        if direction == "forward":
            out = self.forward(batch)
        elif direction == "backward":
            out = self.backward(batch)
        else:
            raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
        return out[0] if single else out

    def _index(self, x: np.ndarray) -> np.ndarray:
        pts = self.points.reshape(len(self.points), -1)
        flat = np.asarray(x, dtype=float).reshape(-1, pts.shape[1])
        d = np.abs(flat[:, None, :] - pts[None, :, :]).max(axis=2)
        return d.argmin(axis=1)

    def orbit(self, x, start: int, stop: int) -> np.ndarray:
        """Points ``T^j x`` for ``start <= j < stop`` in chronological order.

        ``x`` is a batch; the result has shape ``(stop - start, m) + point_shape``.
        Negative indices are generated with ``T^-1`` from ``x`` and stored, so
        consecutive entries are related by one application of ``T`` up to
        rounding even for chaotic maps.
        """
        if stop <= start:
            raise ValueError("stop must exceed start")
        x = np.asarray(x, dtype=float)
        j = np.arange(start, stop, dtype=float).reshape((-1,) + (1,) * x.ndim)
        if self.kind == "circle_rotation":
            return _wrap(x[None] + j * self.alpha)
        if self.kind == "periodic_orbit":
            idx = self._index(x)
            steps = np.arange(start, stop)[:, None]
            return self.points[(idx[None, :] + steps) % len(self.points)]
        out = np.empty((stop - start,) + x.shape)
        if start <= 0 < stop:
            out[-start] = x
        y = x
        for j in range(-1, start - 1, -1):
            y = self.backward(y)
            if j < stop:
                out[j - start] = y
        y = x
        for j in range(1, stop):
            y = self.forward(y)
            if j >= start:
                out[j - start] = y
        return out

    def inverse(self) -> "BaseSystem":
        """The base system for ``T^-1``."""
        if self.kind == "circle_rotation":
            return circle_rotation(-self.alpha)
        if self.kind == "torus_automorphism":
            return torus_automorphism(self._inverse)
        return periodic_orbit(self.points[::-1])

    def sample(self, count: int, seed: int = 0) -> np.ndarray:
        """``count`` points drawn from the invariant measure (deterministic in seed)."""
        if count < 1:
            raise ValueError("count must be >= 1")
        if self.kind == "periodic_orbit":
            return self.points[np.arange(count) % len(self.points)]
        rng = make_rng(seed)
        return rng.random((count,) + self.point_shape)

    def fixed_points(self, period: int = 1) -> np.ndarray:
        """All points with ``T^period x = x``."""
        if period < 1:
            raise ValueError("period must be >= 1")
        if self.kind == "periodic_orbit":
            return self.points.copy() if period % len(self.points) == 0 else self.points[:0]
        if self.kind == "circle_rotation":
            frac = (period * self.alpha) % 1.0
            if min(frac, 1.0 - frac) > 1e-14:
                return np.empty((0,))
            raise ValueError("rotation is periodic: every point is fixed")
        mp = np.linalg.matrix_power(self.matrix.astype(np.int64), period)
        lin = mp - np.eye(2, dtype=np.int64)
        det = int(round(np.linalg.det(lin)))
        if det == 0:
            raise ValueError("T^period - I is singular; fixed set is not finite")
        inv = np.linalg.inv(lin.astype(float))
        bound = int(np.abs(lin).sum(axis=1).max())
        found = []
        for k in product(range(-bound, bound + 1), repeat=2):
            p = _wrap(inv @ np.array(k, dtype=float))
            p = np.where(np.abs(p - 1.0) < 1e-12, 0.0, np.round(p, 12))
            if not any(np.allclose(p, q, atol=1e-10) for q in found):
                found.append(p)
            if len(found) == abs(det):
                break
        return np.array(sorted(found, key=tuple))


@dataclass(frozen=True)
class OrbitBuffer:
    """A stored orbit segment ``x, Tx, ..., T^{n-1} x`` (or a backward one)."""

    points: np.ndarray
    origin: int = 0

    def check(self, base: BaseSystem, atol: float = 1e-12) -> float:
        """Largest one-step mismatch ``dist(T p_j, p_{j+1})`` along the buffer."""
        if len(self.points) < 2:
            return 0.0
        ps = base.point_shape
        img = base.forward(self.points[:-1].reshape((-1,) + ps))
        nxt = self.points[1:].reshape(img.shape)
        if base.kind == "periodic_orbit":
            err = float(np.abs(img - nxt).max())
        else:
            err = float(torus_distance(img, nxt, len(ps)).max())
        if err > atol:
            raise AssertionError(f"orbit buffer broken: one-step mismatch {err:.3e}")
        return err


def circle_rotation(alpha: float) -> BaseSystem:
    return BaseSystem("circle_rotation", alpha=float(alpha) % 1.0)


def torus_automorphism(matrix) -> BaseSystem:
    m = np.asarray(matrix)
    if m.shape != (2, 2) or not np.all(m == np.round(m)):
        raise ValueError("torus automorphism needs a 2x2 integer matrix")
    m = m.astype(np.int64)
    det = int(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    if abs(det) != 1:
        raise ValueError(f"torus automorphism needs |det| = 1, got {det}")
    inv = det * np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]], dtype=np.int64)
    return BaseSystem(
        "torus_automorphism", matrix=m.astype(float), _inverse=inv.astype(float)
    )


def periodic_orbit(points) -> BaseSystem:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 0 or len(pts) == 0:
        raise ValueError("periodic orbit needs at least one point")
    return BaseSystem("periodic_orbit", points=pts)


def birkhoff_average(base: BaseSystem, x, f: Callable, n: int) -> float:
    """``(1/n) * sum_{j<n} f(T^j x)`` with exactly rounded summation.

    ``f`` receives a batch of points and returns one value per point.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    batch, single = base.as_batch(x)
    if not single:
        raise ValueError("birkhoff_average takes a single base point")
    pts = base.orbit(batch, 0, n)[:, 0]
    values = np.asarray(f(pts), dtype=float).reshape(n)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NonFiniteObservable(
            f"observable is not finite at orbit index {bad[0]}", index=int(bad[0])
        )
    return math.fsum(values) / n

"""2x2 matrices, cocycle products, the projective (Moebius) action and
Birkhoff estimators of Lyapunov exponents.

Matrices are plain ``(2, 2)`` numpy arrays, or ``(m, 2, 2)`` stacks when a
batch of base points is evaluated at once.  A slope is a float; the point at
infinity is ``math.inf``.  The slope ``z`` stands for the line spanned by
``(z, 1)``, and ``inf`` for the line spanned by ``(1, 0)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .base import BaseSystem
from .exceptions import NonInvertible, ProductOverflow

__all__ = [
    "DET_FLOOR",
    "RENORM_EVERY",
    "CocycleSpec",
    "Rotation",
    "rotation",
    "constant_cocycle",
    "rotate_family",
    "inverse_cocycle",
    "norm2",
    "singular_values",
    "det",
    "mobius_act",
    "chordal",
    "slope_of",
    "vector_of",
    "compose_n",
    "compose_n_scaled",
    "log_singular_values",
    "lyap_plus_direct",
    "lyap_minus_direct",
    "lyap_sum_via_det",
]

DET_FLOOR = 1e-12
RENORM_EVERY = 32
MAX_PRODUCT_LENGTH = 10**7


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Rotation:
    theta: float

    @property
    def matrix(self) -> np.ndarray:
        return rotation(self.theta)


def det(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def singular_values(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form singular values ``(s1, s2)``, ``s1 >= s2``, of 2x2 matrices."""
    m = np.asarray(m, dtype=float)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    p = np.hypot(a + d, c - b)
    q = np.hypot(a - d, b + c)
    s1 = 0.5 * (p + q)
    # s1 * s2 = |det| is better conditioned than (p - q) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        s2 = np.where(s1 > 0, np.abs(a * d - b * c) / s1, 0.0)
    return s1, s2


def norm2(m: np.ndarray) -> np.ndarray:
    """Operator 2-norm."""
    return singular_values(m)[0]


def _inv2(m: np.ndarray) -> np.ndarray:
    dt = det(m)
    out = np.empty_like(m, dtype=float)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    out[..., 1, 1] = m[..., 0, 0]
    return out / dt[..., None, None]


@dataclass(frozen=True)
class CocycleSpec:
    """A matrix-valued function on the base.

    ``generator`` takes a batch of base points and returns an ``(m, 2, 2)``
    array.  ``constant`` is set for cocycles that ignore the base point; it
    is informational only.
    """

    generator: Callable[[np.ndarray], np.ndarray]
    orientation_preserving: bool = True
    name: str = ""
    constant: np.ndarray | None = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.generator(np.asarray(points, dtype=float)), dtype=float)

    def evaluate(self, base: BaseSystem, x) -> np.ndarray:
        """``A(x)`` for a single point or a batch, with the determinant checks."""
        batch, single = base.as_batch(x)
        mats = self(batch)
        dts = det(mats)
        bad = np.flatnonzero(np.abs(dts) < DET_FLOOR)
        if bad.size:
            raise NonInvertible(f"|det A(x)| below {DET_FLOOR:g} at batch index {bad[0]}", index=int(bad[0]))
        if self.orientation_preserving and np.any(dts <= 0):
            raise ValueError("cocycle flagged orientation-preserving has det <= 0")
        return mats[0] if single else mats


def constant_cocycle(matrix, name: str = "") -> CocycleSpec:
    m = np.array(matrix, dtype=float)
    if m.shape != (2, 2) or not np.all(np.isfinite(m)):
        raise ValueError("constant cocycle needs a finite 2x2 matrix")

    def gen(points):
        return np.broadcast_to(m, (len(points), 2, 2)).copy()

    return CocycleSpec(gen, orientation_preserving=bool(det(m) > 0), name=name or "constant", constant=m)


def rotate_family(cocycle: CocycleSpec, theta: float) -> CocycleSpec:
    """The cocycle ``x -> A(x) R_theta``."""
    r = rotation(theta)

    def gen(points):
        return cocycle(points) @ r

    const = None if cocycle.constant is None else cocycle.constant @ r
    return CocycleSpec(gen, cocycle.orientation_preserving, f"{cocycle.name}*R({theta:g})", const)


def inverse_cocycle(cocycle: CocycleSpec, base: BaseSystem) -> tuple[CocycleSpec, BaseSystem]:
    """The cocycle ``x -> A(T^-1 x)^-1`` over ``T^-1``.

    Its upper exponent is minus the lower exponent of ``A``.
    """

    def gen(points):
        return _inv2(cocycle(base.backward(points)))

    const = None if cocycle.constant is None else _inv2(cocycle.constant)
    return CocycleSpec(gen, cocycle.orientation_preserving, f"inv({cocycle.name})", const), base.inverse()


# -- projective action -------------------------------------------------------

def mobius_act(m, z: float) -> float:
    """``(a z + b) / (c z + d)`` on the extended real line.

    ``inf`` maps to ``a / c`` (``inf`` when ``c == 0``) and a zero denominator
    gives ``inf``.
    """
    m = np.asarray(m, dtype=float)
    a, b, c, d = float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1])
    if math.isinf(z):
        return math.inf if c == 0 else a / c
    if abs(z) > 1.0:
        # reciprocal chart: c*z + d may overflow for huge z
        w = 1.0 / z
        num, den = a + b * w, c + d * w
    else:
        num, den = a * z + b, c * z + d
    if den == 0:
        return math.inf
    return num / den


def slope_of(v) -> np.ndarray | float:
    """Slope ``v1 / v2`` of a vector or a stack of vectors (``inf`` for the line of ``(1, 0)``)."""
    v = np.asarray(v, dtype=float)
    # below one ulp of the first coordinate the line is (1, 0) to working precision
    flat = np.abs(v[..., 1]) <= np.finfo(float).eps * np.abs(v[..., 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(flat, np.inf, v[..., 0] / np.where(flat, 1.0, v[..., 1]))
    return float(z) if z.ndim == 0 else z


def vector_of(z) -> np.ndarray:
    """Unit vector spanning the line of slope ``z``, with ``v2 >= 0``."""
    z = np.asarray(z, dtype=float)
    inf = np.isinf(z)
    zz = np.where(inf, 0.0, z)
    v = np.stack([np.where(inf, 1.0, zz), np.where(inf, 0.0, 1.0)], axis=-1)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def chordal(z, w) -> np.ndarray | float:
    """Spherical (chordal) distance between slopes on the Riemann sphere."""
    u, v = vector_of(z), vector_of(w)
    cross = np.abs(u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0])
    out = 2.0 * cross
    return float(out) if np.ndim(out) == 0 else out


# -- products ----------------------------------------------------------------

def _check_length(n: int, max_length: int) -> None:
    if abs(n) > max_length:
        raise ValueError(f"|n| = {abs(n)} exceeds the configured maximum {max_length}")


def _step_matrices(cocycle: CocycleSpec, base: BaseSystem, pts: np.ndarray, index: int, inverse: bool):
    mats = cocycle(pts)
    dts = det(mats)
    bad = np.abs(dts) < DET_FLOOR
    if np.any(bad):
        raise NonInvertible(f"|det| below {DET_FLOOR:g} at orbit index {index}", index=index)
    return _inv2(mats) if inverse else mats


def _scaled_product(cocycle, base, batch, n, renorm_every):
    m = len(batch)
    prod = np.broadcast_to(np.eye(2), (m, 2, 2)).copy()
    logscale = np.zeros(m)
    logdet = np.zeros(m)
    y = batch
    for k in range(abs(n)):
        if n > 0:
            step = _step_matrices(cocycle, base, y, k, inverse=False)
            prod = step @ prod
            y = base.forward(y)
        else:
            y = base.backward(y)
            step = _step_matrices(cocycle, base, y, -k - 1, inverse=True)
            # earlier points of the backward orbit act last
            prod = step @ prod
        logdet += np.log(np.abs(det(step)))
        if (k + 1) % renorm_every == 0:
            prod, logscale = _renormalize(prod, logscale, k)
    if not np.all(np.isfinite(prod)):
        raise ProductOverflow(f"non-finite product after {abs(n)} steps", index=abs(n))
    return prod, logscale, logdet


def compose_n_scaled(cocycle: CocycleSpec, base: BaseSystem, x, n: int, renorm_every: int = RENORM_EVERY,
                     max_length: int = MAX_PRODUCT_LENGTH):
    """``A^n(x)`` as ``(M, log_scale)`` with ``A^n(x) = exp(log_scale) * M``.

    ``M`` is renormalized by its largest entry every ``renorm_every`` steps.
    Works on a single point or a batch.
    """
    _check_length(n, max_length)
    batch, single = base.as_batch(x)
    prod, logscale, _ = _scaled_product(cocycle, base, batch, n, renorm_every)
    return (prod[0], float(logscale[0])) if single else (prod, logscale)


def log_singular_values(cocycle: CocycleSpec, base: BaseSystem, x, n: int,
                        renorm_every: int = RENORM_EVERY) -> tuple[np.ndarray, np.ndarray]:
    """``(log s1, log s2)`` of ``A^n(x)`` for a batch.

    ``log s2`` comes from ``log|det| - log s1`` with the determinant
    accumulated step by step; the renormalized product is close to rank one
    and its own determinant is pure cancellation noise.
    """
    _check_length(n, MAX_PRODUCT_LENGTH)
    batch, _ = base.as_batch(x)
    prod, logscale, logdet = _scaled_product(cocycle, base, batch, n, renorm_every)
    log_s1 = np.log(norm2(prod)) + logscale
    return log_s1, logdet - log_s1


def _renormalize(prod, logscale, index):
    scale = np.abs(prod).max(axis=(-2, -1))
    if not np.all(np.isfinite(scale)) or np.any(scale == 0):
        raise ProductOverflow(f"product overflowed or vanished near orbit index {index}", index=index)
    return prod / scale[:, None, None], logscale + np.log(scale)


def compose_n(cocycle: CocycleSpec, base: BaseSystem, x, n: int, max_length: int = MAX_PRODUCT_LENGTH):
    """``A^n(x)``; for ``n < 0`` the inverse product ``A(T^n x)^-1 ... A(T^-1 x)^-1``."""
    prod, logscale = compose_n_scaled(cocycle, base, x, n, max_length=max_length)
    scale = np.exp(logscale)
    out = prod * (scale if np.ndim(scale) == 0 else scale[:, None, None])
    if not np.all(np.isfinite(out)):
        raise ProductOverflow(f"A^{n}(x) is not representable in double precision", index=abs(n))
    return out


def lyap_plus_direct(cocycle: CocycleSpec, base: BaseSystem, n: int = 10_000, samples: int = 64,
                     seed: int = 0, renorm_every: int = RENORM_EVERY) -> float:
    """Sample mean of ``(1/n) log ||A^n(x)||`` over points drawn from the measure."""
    if n < 1 or samples < 1:
        raise ValueError("n and samples must be >= 1")
    xs = base.sample(samples, seed)
    prod, logscale = compose_n_scaled(cocycle, base, xs, n, renorm_every=renorm_every)
    rates = (np.log(norm2(prod)) + logscale) / n
    return math.fsum(rates) / samples


def lyap_minus_direct(cocycle: CocycleSpec, base: BaseSystem, n: int = 10_000, samples: int = 64,
                      seed: int = 0) -> float:
    """Lower exponent as minus the upper exponent of the inverse cocycle over ``T^-1``."""
    inv, inv_base = inverse_cocycle(cocycle, base)
    return -lyap_plus_direct(inv, inv_base, n, samples, seed)


def lyap_sum_via_det(cocycle: CocycleSpec, base: BaseSystem, n: int = 10_000, samples: int = 64,
                     seed: int = 0) -> float:
    """Birkhoff average of ``log |det A|``, an estimate of the exponent sum."""
    if n < 1 or samples < 1:
        raise ValueError("n and samples must be >= 1")
    xs = base.sample(samples, seed)
    pts = base.orbit(xs, 0, n)
    flat = pts.reshape((-1,) + base.point_shape)
    dts = np.abs(det(cocycle(flat)))
    bad = np.flatnonzero(dts < DET_FLOOR)
    if bad.size:
        raise NonInvertible(f"|det| below {DET_FLOOR:g} at orbit index {bad[0] // samples}",
                            index=int(bad[0] // samples))
    return math.fsum(np.log(dts)) / dts.size

"""Exponents of the rotated family ``H_theta = H R_theta`` of a triangular cocycle.

``H = [[lam, 0], [sig, eta]]`` leaves ``span(e2)`` invariant with stretch
``eta``.  For small ``theta`` the strong direction of ``H_theta`` is
``span((u_theta, 1))`` where ``u_theta`` is carried forward by the Moebius
update ``u(Tx) = (a u(x) + b) / (c u(x) + d)``, and the top exponent is

    lambda_plus(theta) = avg log(lam eta) - avg log(a - c u_theta(Tx)).

Derivatives at ``theta = 0`` come from the series ``udot0`` and ``uddot0``,
which are evaluated with their one-step recurrences.

Most routines sample ``samples`` base points, store their forward orbits
once (:func:`orbit_entries`) and reuse the triangular entries for every
``theta``, so all values on a grid share the same orbits.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .base import BaseSystem
from .cocycle import CocycleSpec, rotate_family
from .domination import DOMINATED, _sample_points, certify
from .exceptions import Inconclusive, NonPositiveDenominator
from .triangular import TriangularCocycle

__all__ = [
    "ThetaEntries",
    "OrbitEntries",
    "SeriesValue",
    "DerivativeData",
    "SweepRow",
    "SweepResult",
    "IntervalReport",
    "theta_entries",
    "entries_theta",
    "orbit_entries",
    "choose_K",
    "u_theta",
    "t_theta",
    "lyap_plus_theta",
    "lyap_plus_theta_direct",
    "udot0",
    "uddot0",
    "dlambda0",
    "ddlambda0",
    "derivative_data",
    "hyperbolicity_interval",
    "sweep",
    "smoothness_proxy",
]

log = logging.getLogger(__name__)

K_CAP = 200
TAIL_TARGET = 1e-8
WARMUP = 512
U_TOL = 1e-8


@dataclass(frozen=True)
class ThetaEntries:
    """Entries of ``H(x) R_theta``; scalars or arrays of matching shape."""

    a: float | np.ndarray
    b: float | np.ndarray
    c: float | np.ndarray
    d: float | np.ndarray

    def as_matrix(self) -> np.ndarray:
        a, b, c, d = np.broadcast_arrays(self.a, self.b, self.c, self.d)
        return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)


def theta_entries(lam, sig, eta, theta) -> ThetaEntries:
    ct, st = np.cos(theta), np.sin(theta)
    return ThetaEntries(lam * ct, -lam * st, sig * ct + eta * st, eta * ct - sig * st)


def entries_theta(tri: TriangularCocycle, base: BaseSystem, x, theta: float) -> ThetaEntries:
    """Entries of ``(H R_theta)(x)`` at a point or a batch."""
    lam, sig, eta = tri.entries(base, x)
    return theta_entries(lam, sig, eta, theta)


@dataclass(frozen=True)
class OrbitEntries:
    """Triangular entries along stored forward orbits, each shaped ``(L, m)``.

    Averages use indices ``warmup <= j < warmup + n``; one extra point at the
    end supplies ``u(T x_j)`` for the last index.
    """

    lam: np.ndarray
    sig: np.ndarray
    eta: np.ndarray
    warmup: int

    @property
    def n(self) -> int:
        return self.lam.shape[0] - self.warmup - 1

    @property
    def samples(self) -> int:
        return self.lam.shape[1]

    @property
    def log_det_mean(self) -> float:
        w = slice(self.warmup, self.warmup + self.n)
        return float(np.mean(np.log(np.abs(self.lam[w] * self.eta[w]))))


def orbit_entries(tri: TriangularCocycle, base: BaseSystem, n: int = 10_000, samples: int = 64,
                  seed: int = 0, warmup: int = WARMUP) -> OrbitEntries:
    if n < 1 or samples < 1 or warmup < 0:
        raise ValueError("n and samples must be >= 1 and warmup >= 0")
    xs = _sample_points(base, samples, seed)
    pts = base.orbit(xs, 0, warmup + n + 1)
    lam, sig, eta = tri.orbit_entries(base, pts)
    return OrbitEntries(np.asarray(lam, float), np.asarray(sig, float), np.asarray(eta, float), warmup)


def choose_K(tau: float | None, target: float = TAIL_TARGET, cap: int = K_CAP) -> int:
    """Smallest ``K`` with ``tau^K / (1 - tau) < target``, capped.

    This is one term more than the stored tail bound ``tau^(K+1) / (1 - tau)``
    strictly needs.
    """
    if tau is None or not 0.0 <= tau < 1.0:
        return cap
    if tau == 0.0:
        return 1
    k = max(math.ceil(math.log(target * (1.0 - tau)) / math.log(tau)), 1)
    while k < cap and not tau ** k / (1.0 - tau) < target:
        k += 1
    return int(min(k, cap))


def _tail_bound(tau: float | None, K: int) -> float:
    if tau is None or not 0.0 <= tau < 1.0:
        return math.nan
    return tau ** (K + 1) / (1.0 - tau)


# -- u_theta and the implicit formula --------------------------------------

@dataclass(frozen=True)
class _FormulaOut:
    value: np.ndarray       # (k,)
    residual: np.ndarray    # (k,)
    min_denominator: np.ndarray  # (k,)
    valid: np.ndarray       # (k,) bool


def _formula(oe: OrbitEntries, thetas: np.ndarray) -> _FormulaOut:
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    ct, st = np.cos(thetas)[:, None], np.sin(thetas)[:, None]
    k, m = len(thetas), oe.samples
    W, n = oe.warmup, oe.n
    # two pushes from u = 0, started at j = 0 and j = 1; homogeneous (p, q)
    p = np.zeros((2, k, m))
    q = np.ones((2, k, m))
    acc = np.zeros((k, m))
    min_den = np.full((k, m), np.inf)
    for j in range(W + n):
        lam, sig, eta = oe.lam[j], oe.sig[j], oe.eta[j]
        a, b = lam * ct, -lam * st
        c, d = sig * ct + eta * st, eta * ct - sig * st
        p, q = a * p + b * q, c * p + d * q
        s = np.hypot(p, q)
        p, q = p / s, q / s
        if j == 0:
            p[1], q[1] = 0.0, 1.0
        if j >= W:
            with np.errstate(divide="ignore", invalid="ignore"):
                den = a - c * (p[0] / q[0])
            min_den = np.minimum(min_den, np.where(np.isfinite(den), den, -np.inf))
            with np.errstate(divide="ignore", invalid="ignore"):
                acc += np.log(np.where(den > 0, den, np.nan))
    with np.errstate(divide="ignore", invalid="ignore"):
        residual = np.abs(p[0] / q[0] - p[1] / q[1]).max(axis=1)
    residual = np.where(np.isnan(residual), np.inf, residual)
    min_den = min_den.min(axis=1)
    value = oe.log_det_mean - acc.mean(axis=1) / n
    valid = (min_den > 0) & np.isfinite(value)
    return _FormulaOut(np.where(valid, value, np.nan), residual, min_den, valid)


def _direct(oe: OrbitEntries, thetas: np.ndarray) -> np.ndarray:
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    ct, st = np.cos(thetas)[:, None], np.sin(thetas)[:, None]
    k, m = len(thetas), oe.samples
    W, n = oe.warmup, oe.n
    # Frobenius-renormalized every step; scale kept in logscale
    P = np.broadcast_to(np.eye(2), (k, m, 2, 2)).copy()
    logscale = np.zeros((k, m))
    for j in range(W, W + n):
        lam, sig, eta = oe.lam[j], oe.sig[j], oe.eta[j]
        a, b = lam * ct, -lam * st
        c, d = sig * ct + eta * st, eta * ct - sig * st
        r0 = a[..., None] * P[..., 0, :] + b[..., None] * P[..., 1, :]
        r1 = c[..., None] * P[..., 0, :] + d[..., None] * P[..., 1, :]
        P[..., 0, :], P[..., 1, :] = r0, r1
        s = np.sqrt((P ** 2).sum(axis=(-2, -1)))
        P /= s[..., None, None]
        logscale += np.log(s)
    a, b, c, d = P[..., 0, 0], P[..., 0, 1], P[..., 1, 0], P[..., 1, 1]
    s1 = 0.5 * (np.hypot(a + d, c - b) + np.hypot(a - d, b + c))
    return ((np.log(s1) + logscale) / n).mean(axis=1)


@dataclass(frozen=True)
class UTheta:
    value: float | np.ndarray
    residual: float


def u_theta(tri: TriangularCocycle, base: BaseSystem, x, theta: float, M: int = 512,
            tol: float = U_TOL) -> UTheta:
    """Slope ``u_theta(x)`` of the strong direction ``span((u, 1))`` of ``H_theta``.

    The update is iterated from ``u = 0`` at ``T^-M x``; a second push started
    one step later gives the residual.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    batch, single = base.as_batch(x)
    pts = base.orbit(batch, -M, 0)
    lam, sig, eta = tri.orbit_entries(base, pts)
    ct, st = math.cos(theta), math.sin(theta)
    p = np.zeros((2, len(batch)))
    q = np.ones((2, len(batch)))
    for j in range(M):
        a, b = lam[j] * ct, -lam[j] * st
        c, d = sig[j] * ct + eta[j] * st, eta[j] * ct - sig[j] * st
        p, q = a * p + b * q, c * p + d * q
        s = np.hypot(p, q)
        p, q = p / s, q / s
        if j == 0:
            p[1], q[1] = 0.0, 1.0
    if np.any(np.abs(q[0]) < 1e-300):
        raise Inconclusive("strong direction of the rotated cocycle is horizontal")
    u = p[0] / q[0]
    residual = float(np.abs(u - p[1] / q[1]).max()) if M > 1 else math.inf
    if not residual <= tol:
        raise Inconclusive(f"u_theta did not converge in {M} steps (residual {residual:.2e})")
    return UTheta(float(u[0]) if single else u, residual)


def t_theta(tri: TriangularCocycle, base: BaseSystem, x, theta: float, u_at_Tx):
    """Stretch ``eta lam / (a - c u(Tx))`` of ``H_theta(x)`` along its strong direction."""
    lam, sig, eta = tri.entries(base, x)
    e = theta_entries(np.asarray(lam), np.asarray(sig), np.asarray(eta), theta)
    den = e.a - e.c * np.asarray(u_at_Tx, dtype=float)
    if np.any(~(den > 0)):
        raise NonPositiveDenominator(f"a - c u(Tx) = {float(np.min(den)):.3e} <= 0 at theta={theta}")
    out = np.asarray(eta) * np.asarray(lam) / den
    return float(out) if np.ndim(out) == 0 else out


def lyap_plus_theta(tri: TriangularCocycle, base: BaseSystem, theta, n: int = 10_000, samples: int = 64,
                    seed: int = 0, warmup: int = WARMUP, oe: OrbitEntries | None = None):
    """Top exponent of ``H R_theta`` from the implicit formula.

    ``theta`` may be a scalar or a sequence; sequences share one set of orbits.
    Raises :class:`NonPositiveDenominator` if ``a - c u(Tx)`` is not positive
    along the sampled orbits, and :class:`Inconclusive` if ``u_theta`` has not
    converged.
    """
    if oe is None:
        oe = orbit_entries(tri, base, n, samples, seed, warmup)
    scalar = np.ndim(theta) == 0
    out = _formula(oe, np.atleast_1d(theta))
    for th, ok, md, res in zip(np.atleast_1d(theta), out.valid, out.min_denominator, out.residual):
        if not ok:
            raise NonPositiveDenominator(f"a - c u(Tx) reaches {md:.3e} at theta={th}")
        if not res <= U_TOL:
            raise Inconclusive(f"u_theta residual {res:.2e} at theta={th}")
    return float(out.value[0]) if scalar else out.value


def lyap_plus_theta_direct(tri: TriangularCocycle, base: BaseSystem, theta, n: int = 10_000,
                           samples: int = 64, seed: int = 0, warmup: int = WARMUP,
                           oe: OrbitEntries | None = None):
    """Top exponent of ``H R_theta`` from renormalized products on the same orbits."""
    if oe is None:
        oe = orbit_entries(tri, base, n, samples, seed, warmup)
    out = _direct(oe, np.atleast_1d(theta))
    return float(out[0]) if np.ndim(theta) == 0 else out


# -- derivative series ------------------------------------------------------

@dataclass(frozen=True)
class SeriesValue:
    value: float | np.ndarray
    bound: float
    K: int


def udot0(tri: TriangularCocycle, base: BaseSystem, x, K: int | None = None) -> SeriesValue:
    """``-sum_{k>=1} lam_k / eta_k`` along the backward orbit, truncated at ``K`` terms."""
    K = choose_K(tri.tau) if K is None else int(K)
    if K < 1:
        raise ValueError("K must be >= 1")
    batch, single = base.as_batch(x)
    lam, _, eta = tri.orbit_entries(base, base.orbit(batch, -K, 0))
    ud = np.zeros(len(batch))
    for j in range(K):
        ud = lam[j] / eta[j] * (ud - 1.0)
    return SeriesValue(float(ud[0]) if single else ud, _tail_bound(tri.tau, K), K)


def uddot0(tri: TriangularCocycle, base: BaseSystem, x, K: int | None = None,
           udot_provider: Callable | None = None) -> SeriesValue:
    """Second derivative of ``u_theta`` at ``theta = 0``, truncated at ``K`` terms.

    ``udot_provider`` maps a batch of points to ``udot0`` values; by default
    these are produced by running the first-order recurrence over an extra
    ``K`` steps further back.
    """
    K = choose_K(tri.tau) if K is None else int(K)
    if K < 1:
        raise ValueError("K must be >= 1")
    batch, single = base.as_batch(x)
    depth = K if udot_provider is not None else 2 * K
    pts = base.orbit(batch, -depth, 0)
    lam, sig, eta = tri.orbit_entries(base, pts)
    ud = np.zeros(len(batch))
    udd = np.zeros(len(batch))
    sup = 0.0
    for j in range(depth):
        if udot_provider is not None:
            ud = np.asarray(udot_provider(pts[j]), dtype=float)
        alpha = 2.0 * (ud - 1.0) ** 2 / eta[j]
        if j >= depth - K:
            sup = max(sup, float(np.abs(alpha * sig[j]).max()))
        r = lam[j] / eta[j]
        udd = r * (udd - alpha * sig[j])
        ud = r * (ud - 1.0)
    return SeriesValue(float(udd[0]) if single else udd, _tail_bound(tri.tau, K) * sup, K)


def _derivative_terms(oe: OrbitEntries):
    """Running ``udot0``/``uddot0`` along the stored orbits and the two averages."""
    W, n = oe.warmup, oe.n
    m = oe.samples
    ud = np.zeros(m)
    udd = np.zeros(m)
    first = np.zeros(m)
    second = np.zeros(m)
    for j in range(W + n):
        lam, sig, eta = oe.lam[j], oe.sig[j], oe.eta[j]
        r = lam / eta
        alpha = 2.0 * (ud - 1.0) ** 2 / eta
        udd = r * (udd - alpha * sig)
        ud = r * (ud - 1.0)
        if j >= W:
            g = sig * ud / lam
            first += g
            second += 2.0 * eta * ud / lam + 1.0 + sig * udd / lam + g * g
    return first.mean() / n, second.mean() / n


def _derivative_orbits(tri, base, n, samples, K, seed):
    K = choose_K(tri.tau) if K is None else int(K)
    return orbit_entries(tri, base, n, samples, seed, warmup=2 * K), K


def dlambda0(tri: TriangularCocycle, base: BaseSystem, n: int = 10_000, samples: int = 64,
             K: int | None = None, seed: int = 0) -> float:
    """First derivative of the top exponent at ``theta = 0``: ``avg (sig/lam) udot0(Tx)``."""
    oe, _ = _derivative_orbits(tri, base, n, samples, K, seed)
    return float(_derivative_terms(oe)[0])


def ddlambda0(tri: TriangularCocycle, base: BaseSystem, n: int = 10_000, samples: int = 64,
              K: int | None = None, seed: int = 0) -> float:
    """Second derivative of the top exponent at ``theta = 0``.

    A non-negative value contradicts strict concavity; it is returned but a
    ``RuntimeWarning`` is emitted.
    """
    oe, _ = _derivative_orbits(tri, base, n, samples, K, seed)
    value = float(_derivative_terms(oe)[1])
    if not value < 0:
        warnings.warn(f"second derivative at 0 is not negative ({value:.3e})", RuntimeWarning, stacklevel=2)
    return value


@dataclass
class DerivativeData:
    """Derivative series of a triangular cocycle and the derived exponent derivatives.

    ``udot0``, ``uddot0`` and ``alpha`` are pointwise callables.  ``bound`` is
    the truncation bound of the first series; ``bound_second`` scales the same
    geometric tail by ``sup |alpha sig|`` on the sample.
    """

    udot0: Callable = field(repr=False)
    uddot0: Callable = field(repr=False)
    alpha: Callable = field(repr=False)
    K: int
    tau: float | None
    bound: float
    bound_second: float
    dlambda0: float
    ddlambda0: float

    @property
    def anomaly(self) -> bool:
        return not self.ddlambda0 < 0

    def to_dict(self) -> dict:
        return {
            "dlambda0": self.dlambda0,
            "ddlambda0": self.ddlambda0,
            "K": self.K,
            "tau": self.tau,
            "truncation_bound_udot0": self.bound,
            "truncation_bound_uddot0": self.bound_second,
            "anomaly": self.anomaly,
        }


def derivative_data(tri: TriangularCocycle, base: BaseSystem, n: int = 10_000, samples: int = 64,
                    K: int | None = None, seed: int = 0) -> DerivativeData:
    oe, K = _derivative_orbits(tri, base, n, samples, K, seed)
    d1, d2 = _derivative_terms(oe)

    def f_udot(x):
        return udot0(tri, base, x, K).value

    def f_uddot(x):
        return uddot0(tri, base, x, K).value

    def f_alpha(x):
        eta = np.asarray(tri.entries(base, x)[2])
        out = 2.0 * (np.asarray(f_udot(x)) - 1.0) ** 2 / eta
        return float(out) if out.ndim == 0 else out

    xs = _sample_points(base, min(samples, 64), seed)
    lam, sig, eta = tri.entries(base, xs)
    sup = float(np.max(np.abs(np.asarray(f_alpha(xs)) * sig)))
    bound = _tail_bound(tri.tau, K)
    return DerivativeData(f_udot, f_uddot, f_alpha, K, tri.tau, bound, bound * sup, float(d1), float(d2))


# -- interval and sweep -----------------------------------------------------

@dataclass
class IntervalReport:
    """Grid points near 0 where the top exponent drops and the bottom one rises."""

    lower: float | None
    upper: float | None
    sides: str
    witnesses: list = field(default_factory=list)
    lambda_plus0: float = math.nan
    lambda_minus0: float = math.nan
    dlambda0: float = math.nan
    diagnostic: str = ""

    @property
    def empty(self) -> bool:
        return not self.witnesses


def hyperbolicity_interval(tri: TriangularCocycle, base: BaseSystem, theta_grid: Sequence[float],
                           n: int = 10_000, samples: int = 64, seed: int = 0, warmup: int = WARMUP,
                           deriv_tol: float = 1e-6, min_gap: float = 0.0,
                           oe: OrbitEntries | None = None) -> IntervalReport:
    """Scan outward from 0 on the side(s) picked by the sign of the first derivative.

    On each side grid points are accepted while ``lambda_plus`` stays below its
    value at 0 and ``lambda_minus`` above its value at 0, both by more than
    ``min_gap``; the scan stops at the first failure.
    """
    grid = np.unique(np.asarray(theta_grid, dtype=float)) + 0.0
    if oe is None:
        oe = orbit_entries(tri, base, n, samples, seed, warmup)
    total = oe.log_det_mean
    res = _formula(oe, np.concatenate([[0.0], grid]))
    lp0 = float(res.value[0])
    lm0 = total - lp0
    d1 = dlambda0(tri, base, n=min(n, 10_000), samples=samples, seed=seed)
    if abs(d1) <= deriv_tol:
        sides = "both"
    else:
        sides = "positive" if d1 < 0 else "negative"
    vals = dict(zip(grid.tolist(), res.value[1:].tolist()))
    ok_conv = dict(zip(grid.tolist(), (res.residual[1:] <= U_TOL).tolist()))
    witnesses = []
    for sign in (1.0, -1.0):
        if sides == "positive" and sign < 0 or sides == "negative" and sign > 0:
            continue
        side = sorted((t for t in grid if sign * t > 0), key=abs)
        for t in side:
            lp = vals[t]
            if not (ok_conv[t] and np.isfinite(lp)):
                break
            lm = total - lp
            if lp < lp0 - min_gap and lm > lm0 + min_gap:
                witnesses.append((float(t), float(lp), float(lm)))
            else:
                break
    witnesses.sort()
    if not witnesses:
        return IntervalReport(None, None, sides, [], lp0, lm0, d1,
                              "no grid point near 0 satisfies both inequalities; refine the grid")
    lo = min(0.0, witnesses[0][0])
    hi = max(0.0, witnesses[-1][0])
    return IntervalReport(lo, hi, sides, witnesses, lp0, lm0, d1, "")


CSV_COLUMNS = ("theta", "lambda_plus_formula", "lambda_plus_direct", "lambda_minus", "dominated",
               "residual", "ddlambda_estimate")


@dataclass
class SweepRow:
    theta: float
    lambda_plus_formula: float
    lambda_plus_direct: float
    lambda_minus: float
    dominated: str
    residual: float
    ddlambda_estimate: float = math.nan
    diagnostic: str = ""

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


@dataclass
class SweepResult:
    rows: list
    concavity_violations: list = field(default_factory=list)
    log_det: float = math.nan

    @property
    def concave(self) -> bool:
        return not self.concavity_violations

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def plot_rows(self) -> list:
        return [(r.theta, r.lambda_plus_formula) for r in self.rows if np.isfinite(r.lambda_plus_formula)]

    def to_dicts(self) -> list:
        return [asdict(r) for r in self.rows]


def _verdicts(cocycle: CocycleSpec, base: BaseSystem, thetas, threads: int, kwargs: dict) -> list:
    def one(t):
        return certify(rotate_family(cocycle, float(t)), base, **kwargs).verdict

    if threads == 1 or len(thetas) < 2:
        return [one(t) for t in thetas]
    with ThreadPoolExecutor(max_workers=None if threads == 0 else threads) as pool:
        return list(pool.map(one, thetas))


def sweep(tri: TriangularCocycle, base: BaseSystem, theta_grid: Sequence[float], n: int = 10_000,
          samples: int = 64, seed: int = 0, cocycle: CocycleSpec | None = None, warmup: int = WARMUP,
          tol: float = 1e-3, residual_tol: float = U_TOL, certify_kwargs: dict | None = None,
          threads: int = 1, oe: OrbitEntries | None = None) -> SweepResult:
    """Evaluate both estimators of the top exponent and a domination verdict on a grid.

    ``cocycle`` is the cocycle certified for domination (rotated on the right);
    it defaults to the source of a derived ``tri`` or to ``tri`` itself.  Rows
    that are not dominated, have a non-positive denominator, an unconverged
    section or a formula/direct mismatch above ``tol`` carry no formula value
    and a diagnostic.
    """
    grid = np.unique(np.asarray(theta_grid, dtype=float)) + 0.0
    if grid.size == 0:
        raise ValueError("empty theta grid")
    if oe is None:
        oe = orbit_entries(tri, base, n, samples, seed, warmup)
    if cocycle is None:
        cocycle = tri.source if tri.source is not None else tri.as_cocycle(base)
    kwargs = {"seed": seed}
    kwargs.update(certify_kwargs or {})
    verdicts = _verdicts(cocycle, base, grid, threads, kwargs)
    res = _formula(oe, grid)
    direct = _direct(oe, grid)
    total = oe.log_det_mean
    rows = []
    for i, t in enumerate(grid):
        formula = float(res.value[i])
        diag = ""
        if verdicts[i] != DOMINATED:
            diag = f"verdict {verdicts[i]}"
        elif not res.valid[i]:
            diag = f"non-positive denominator ({res.min_denominator[i]:.3e})"
        elif not res.residual[i] <= residual_tol:
            diag = f"section residual {res.residual[i]:.2e}"
        elif abs(formula - direct[i]) > tol:
            diag = f"formula/direct mismatch {abs(formula - direct[i]):.2e}"
        if diag:
            log.info("theta=%r: %s", float(t), diag)
            formula = math.nan
        lp = formula if np.isfinite(formula) else float(direct[i])
        rows.append(SweepRow(float(t), formula, float(direct[i]), total - lp, verdicts[i],
                             float(res.residual[i]), math.nan, diag))
    violations = []
    steps = np.diff(grid)
    for i in range(1, len(rows) - 1):
        f0, f1, f2 = rows[i - 1].lambda_plus_formula, rows[i].lambda_plus_formula, rows[i + 1].lambda_plus_formula
        if not (np.isfinite(f0) and np.isfinite(f1) and np.isfinite(f2)):
            continue
        h = steps[i - 1]
        if not math.isclose(h, steps[i], rel_tol=1e-9):
            continue
        second = (f0 - 2.0 * f1 + f2) / (h * h)
        rows[i].ddlambda_estimate = float(second)
        if not second < 0:
            violations.append((rows[i].theta, second))
    return SweepResult(rows, violations, total)


def smoothness_proxy(tri: TriangularCocycle, base: BaseSystem, lo: float, hi: float, degree: int = 6,
                     checks: int = 25, n: int = 10_000, samples: int = 64, seed: int = 0,
                     warmup: int = WARMUP) -> float:
    """Max error of the degree-``degree`` Chebyshev interpolant of the top exponent on ``[lo, hi]``.

    Interpolation nodes and check points share one set of orbits, so sampling
    noise is common to both and cancels.
    """
    oe = orbit_entries(tri, base, n, samples, seed, warmup)
    cheb = np.polynomial.chebyshev.Chebyshev
    nodes = cheb.basis(degree + 1, domain=[lo, hi]).roots()
    poly = cheb.fit(nodes, _formula(oe, nodes).value, degree, domain=[lo, hi])
    probe = np.linspace(lo, hi, checks)
    vals = _formula(oe, probe).value
    if not np.all(np.isfinite(vals)):
        raise NonPositiveDenominator("window leaves the region where the formula applies")
    return float(np.max(np.abs(poly(probe) - vals)))

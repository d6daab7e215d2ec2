"""Estimator-style wrapper around the rotated-family exponent computation.

``fit`` reduces the cocycle to triangular form and stores orbit data plus the
derivatives at 0.  Inputs ``X`` to ``predict``/``transform`` are rotation
angles, one per row.  There is no training data, so ``fit`` ignores ``X``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .base import BaseSystem, circle_rotation
from .cocycle import CocycleSpec, constant_cocycle
from .heisenberg import HeisenbergModel, ecu_cocycle
from .theta import WARMUP, _direct, _formula, _derivative_terms, choose_K, orbit_entries
from .triangular import TriangularCocycle, build_triangular

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _resolve(cocycle, base):
    """Return ``(tri_or_None, cocycle_or_None, base)`` for the supported inputs."""
    if isinstance(cocycle, str):
        if cocycle != "heisenberg":
            raise ValueError(f"unknown builtin cocycle {cocycle!r}")
        model = HeisenbergModel()
        return None, ecu_cocycle(model), base if base is not None else model.base
    base = base if base is not None else circle_rotation(GOLDEN)
    if isinstance(cocycle, TriangularCocycle):
        return cocycle, cocycle.source, base
    if isinstance(cocycle, CocycleSpec):
        return None, cocycle, base
    return None, constant_cocycle(np.asarray(cocycle, dtype=float)), base


class RotationFamilyLyapunov(TransformerMixin, BaseEstimator):
    """Top and bottom Lyapunov exponents of ``theta -> A R_theta``.

    Parameters
    ----------
    cocycle : str, array-like, CocycleSpec or TriangularCocycle
        ``"heisenberg"``, a constant 2x2 matrix, a cocycle, or an already
        triangular cocycle.
    base : BaseSystem, optional
        Base dynamics; defaults to the golden-mean circle rotation (or the cat
        map for ``"heisenberg"``).
    n, samples, seed, warmup : int
        Orbit length, number of sampled orbits, sampling seed and warmup length.
    K : int, optional
        Truncation of the derivative series; chosen from the measured
        contraction rate when omitted.

    Attributes
    ----------
    tri_ : TriangularCocycle
    dlambda0_, ddlambda0_ : float
        First and second derivative of the top exponent at ``theta = 0``.
    lambda_sum_ : float
        Sum of both exponents (independent of ``theta``).
    """

    def __init__(self, cocycle="heisenberg", base: BaseSystem | None = None, n: int = 10_000,
                 samples: int = 64, seed: int = 0, K: int | None = None, warmup: int = WARMUP):
        self.cocycle = cocycle
        self.base = base
        self.n = n
        self.samples = samples
        self.seed = seed
        self.K = K
        self.warmup = warmup

    def fit(self, X=None, y=None):
        tri, cocycle, base = _resolve(self.cocycle, self.base)
        if tri is None:
            tri = build_triangular(cocycle, base, seed=self.seed)
        K = choose_K(tri.tau) if self.K is None else int(self.K)
        self.tri_ = tri
        self.base_ = base
        self.K_ = K
        self.orbits_ = orbit_entries(tri, base, self.n, self.samples, self.seed, max(self.warmup, 2 * K))
        self.dlambda0_, self.ddlambda0_ = (float(v) for v in _derivative_terms(self.orbits_))
        self.lambda_sum_ = self.orbits_.log_det_mean
        return self

    def _thetas(self, X) -> np.ndarray:
        check_is_fitted(self, "orbits_")
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError("expected one rotation angle per row")
            X = X[:, 0]
        return X

    def predict(self, X) -> np.ndarray:
        """Top exponent at each angle from the implicit formula (NaN where it does not apply)."""
        thetas = self._thetas(X)
        return _formula(self.orbits_, thetas).value

    def predict_direct(self, X) -> np.ndarray:
        """Top exponent at each angle from renormalized matrix products."""
        thetas = self._thetas(X)
        return _direct(self.orbits_, thetas)

    def transform(self, X) -> np.ndarray:
        """Columns ``[lambda_plus, lambda_minus]`` for each angle."""
        lp = self.predict(X)
        return np.column_stack([lp, self.lambda_sum_ - lp])

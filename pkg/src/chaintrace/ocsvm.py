"""nu-one-class SVM: RBF kernel, SMO-style dual solver, scoring, model IO.

Dual problem: minimize 1/2 a'Ka subject to sum(a) = 1 and
0 <= a_i <= 1/(nu*l). Decision value f(x) = sum_i a_i K(x_i, x) - rho;
f < 0 flags an anomaly.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    BadHyperparameters,
    DidNotConverge,
    DimensionMismatch,
    EmptyTrainingSet,
)
from .features import FEATURE_NAMES, SOURCE_SETS, standardize

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 10**6

_MODEL_MAGIC = "chaintrace-ocsvm"
_MODEL_VERSION = 1


def feature_schema_hash(feature_indices: tuple[int, ...]) -> str:
    names = ",".join(FEATURE_NAMES[i] for i in feature_indices)
    return hashlib.sha256(names.encode()).hexdigest()[:16]


def rbf_kernel(x: np.ndarray, y: np.ndarray, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2) for a single pair."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatch(f"{x.shape} vs {y.shape}")
    diff = x - y
    return math.exp(-gamma * float(diff @ diff))


def default_gamma(X_std: np.ndarray) -> float:
    """1 / (d * var) over the standardized training matrix."""
    var = float(X_std.var())
    if var <= 0:
        var = 1.0
    return 1.0 / (X_std.shape[1] * var)


@dataclass
class OneClassSvmModel:
    nu: float
    gamma: float
    rho: float
    alpha: np.ndarray  # dual coefficients of the support vectors (> 0)
    support_vectors: np.ndarray  # standardized rows
    feature_means: np.ndarray
    feature_stds: np.ndarray
    feature_indices: tuple[int, ...]
    l: int  # training-set size

    def check_feasible(self, full_alpha: np.ndarray | None = None) -> None:
        C = 1.0 / (self.nu * self.l)
        a = full_alpha if full_alpha is not None else self.alpha
        if abs(float(a.sum()) - 1.0) > 1e-9:
            raise BadHyperparameters(f"sum(alpha) = {a.sum()} != 1")
        if (a < -1e-12).any() or (a > C + 1e-12).any():
            raise BadHyperparameters("alpha outside [0, 1/(nu*l)]")

    # --- scoring ---

    def _standardize(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] == len(FEATURE_NAMES) and len(self.feature_indices) != X.shape[1]:
            X = X[:, list(self.feature_indices)]
        if X.shape[1] != self.support_vectors.shape[1]:
            raise DimensionMismatch(
                f"expected {self.support_vectors.shape[1]} features, got {X.shape[1]}"
            )
        return (X - self.feature_means) / self.feature_stds

    def decision(self, X: np.ndarray, standardized: bool = False) -> np.ndarray:
        """f(x) per row; anomalous iff f(x) < 0."""
        Z = np.atleast_2d(np.asarray(X, dtype=np.float64)) if standardized \
            else self._standardize(X)
        if Z.shape[1] != self.support_vectors.shape[1]:
            raise DimensionMismatch(
                f"expected {self.support_vectors.shape[1]} features, got {Z.shape[1]}"
            )
        return _kernels.decision_values(
            self.support_vectors, self.alpha, Z, self.gamma, self.rho
        )

    def predict(self, X: np.ndarray, standardized: bool = False) -> np.ndarray:
        return self.decision(X, standardized=standardized) < 0

    # --- persistence ---

    def save(self, path: str) -> None:
        payload = {
            "magic": _MODEL_MAGIC,
            "version": _MODEL_VERSION,
            "nu": self.nu,
            "gamma": self.gamma,
            "rho": self.rho,
            "l": self.l,
            "alpha": [float(a) for a in self.alpha],
            "support_vectors": [[float(v) for v in row] for row in self.support_vectors],
            "feature_means": [float(v) for v in self.feature_means],
            "feature_stds": [float(v) for v in self.feature_stds],
            "feature_indices": list(self.feature_indices),
            "feature_schema_hash": feature_schema_hash(self.feature_indices),
        }
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str) -> "OneClassSvmModel":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("magic") != _MODEL_MAGIC:
            raise ValueError(f"{path}: not a model file")
        indices = tuple(payload["feature_indices"])
        if payload.get("feature_schema_hash") != feature_schema_hash(indices):
            raise ValueError(f"{path}: feature schema hash mismatch")
        model = cls(
            nu=payload["nu"],
            gamma=payload["gamma"],
            rho=payload["rho"],
            alpha=np.array(payload["alpha"], dtype=np.float64),
            support_vectors=np.array(payload["support_vectors"], dtype=np.float64),
            feature_means=np.array(payload["feature_means"], dtype=np.float64),
            feature_stds=np.array(payload["feature_stds"], dtype=np.float64),
            feature_indices=indices,
            l=payload["l"],
        )
        model.check_feasible()
        return model


def train_ocsvm(
    X_std: np.ndarray,
    nu: float,
    gamma: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[np.ndarray, float, int]:
    """Solve the dual on pre-standardized rows.

    Returns (full alpha over all training points, rho, iterations).
    Deterministic given the input row order.
    """
    X_std = np.asarray(X_std, dtype=np.float64)
    l = X_std.shape[0]
    if l < 2:
        raise EmptyTrainingSet(f"need at least 2 vectors, got {l}")
    if not (0.0 < nu < 1.0):
        raise BadHyperparameters(f"nu must be in (0, 1), got {nu}")
    if gamma <= 0.0:
        raise BadHyperparameters(f"gamma must be > 0, got {gamma}")

    C = 1.0 / (nu * l)
    K = _kernels.rbf_matrix(X_std, X_std, gamma)

    # feasible start: fill the first floor(nu*l) boxes, remainder next
    alpha = np.zeros(l, dtype=np.float64)
    n_full = int(nu * l)
    alpha[:n_full] = C
    if n_full < l:
        alpha[n_full] = 1.0 - n_full * C

    iters, gap = _kernels.smo_solve(K, alpha, C, tol, max_iter)
    if gap > tol:
        raise DidNotConverge(f"gap {gap:.3e} > {tol:.1e} after {iters} updates")

    g = K @ alpha
    margin = (alpha > 1e-10) & (alpha < C - 1e-10)
    if margin.any():
        rho = float(g[margin].mean())
    else:
        lo = g[alpha <= 1e-10]
        hi = g[alpha >= C - 1e-10]
        rho = float((lo.min() + hi.max()) / 2.0) if lo.size and hi.size \
            else float(g.mean())
    return alpha, rho, iters


def fit(
    X: np.ndarray,
    nu: float = 0.05,
    gamma: float | None = None,
    source_set: str = "combined",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> OneClassSvmModel:
    """Standardize, pick gamma if unset, train, and package the model."""
    indices = SOURCE_SETS[source_set]
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch("expected a 2-d matrix")
    if X.shape[1] == len(FEATURE_NAMES):
        X = X[:, list(indices)]
    elif X.shape[1] != len(indices):
        raise DimensionMismatch(
            f"expected {len(FEATURE_NAMES)} or {len(indices)} columns"
        )
    Z, (means, stds) = standardize(X)
    if gamma is None:
        gamma = default_gamma(Z)
    alpha, rho, _iters = train_ocsvm(Z, nu, gamma, tol=tol, max_iter=max_iter)
    sv_mask = alpha > 0.0
    model = OneClassSvmModel(
        nu=nu,
        gamma=gamma,
        rho=rho,
        alpha=alpha[sv_mask].copy(),
        support_vectors=Z[sv_mask].copy(),
        feature_means=means,
        feature_stds=stds,
        feature_indices=indices,
        l=X.shape[0],
    )
    model.check_feasible(full_alpha=alpha)
    return model

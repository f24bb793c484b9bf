"""Hot numeric kernels for the one-class SVM.

Each kernel ships in two flavours: a numba ``@njit`` build and a pure
numpy build. Set ``CHAINTRACE_NO_NUMBA=1`` to force the numpy path
(also used automatically when numba is unavailable). Both paths follow
the identical pair-selection order, so results are bit-reproducible
across backends.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_wanted() -> bool:
    flag = os.environ.get("CHAINTRACE_NO_NUMBA", "").strip().lower()
    return flag not in ("1", "true", "yes")


def rbf_matrix_numpy(X: np.ndarray, Y: np.ndarray, gamma: float) -> np.ndarray:
    """K[i, j] = exp(-gamma * ||X_i - Y_j||^2), broadcast form."""
    sq = (
        (X * X).sum(axis=1)[:, None]
        + (Y * Y).sum(axis=1)[None, :]
        - 2.0 * (X @ Y.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def _rbf_matrix_loops(X, Y, gamma):  # njit target
    n, m = X.shape[0], Y.shape[0]
    d = X.shape[1]
    K = np.empty((n, m), dtype=np.float64)
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                diff = X[i, k] - Y[j, k]
                acc += diff * diff
            K[i, j] = np.exp(-gamma * acc)
    return K


def _smo_core(K, alpha, C, tol, max_iter):  # njit target
    """Pairwise coordinate descent on min 1/2 a'Ka, sum a = 1, 0<=a<=C.

    Working pair = maximal KKT violation: i with the smallest gradient
    among a_i < C (room to grow), j with the largest gradient among
    a_j > 0 (room to shrink); first index wins ties. Returns
    (iterations, final KKT gap).
    """
    l = K.shape[0]
    g = K @ alpha  # gradient of the dual objective
    it = 0
    gap = np.inf
    while it < max_iter:
        gi = np.inf
        gj = -np.inf
        i = -1
        j = -1
        for t in range(l):
            if alpha[t] < C - 1e-15 and g[t] < gi:
                gi = g[t]
                i = t
            if alpha[t] > 1e-15 and g[t] > gj:
                gj = g[t]
                j = t
        gap = gj - gi
        if gap <= tol or i < 0 or j < 0 or i == j:
            break
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta < 1e-12:
            eta = 1e-12
        delta = (gj - gi) / eta
        room = C - alpha[i]
        if delta > room:
            delta = room
        if delta > alpha[j]:
            delta = alpha[j]
        alpha[i] += delta
        alpha[j] -= delta
        for t in range(l):
            g[t] += delta * (K[t, i] - K[t, j])
        it += 1
    return it, gap


def _smo_core_numpy(K, alpha, C, tol, max_iter):
    """Vectorized twin of :func:`_smo_core`; identical selection order."""
    g = K @ alpha
    it = 0
    gap = np.inf
    while it < max_iter:
        up = alpha < C - 1e-15
        low = alpha > 1e-15
        if not up.any() or not low.any():
            break
        gi_masked = np.where(up, g, np.inf)
        gj_masked = np.where(low, g, -np.inf)
        i = int(np.argmin(gi_masked))
        j = int(np.argmax(gj_masked))
        gap = g[j] - g[i]
        if gap <= tol or i == j:
            break
        eta = max(K[i, i] + K[j, j] - 2.0 * K[i, j], 1e-12)
        delta = min((g[j] - g[i]) / eta, C - alpha[i], alpha[j])
        alpha[i] += delta
        alpha[j] -= delta
        g += delta * (K[:, i] - K[:, j])
        it += 1
    return it, gap


def decision_numpy(SV: np.ndarray, alpha: np.ndarray, X: np.ndarray,
                   gamma: float, rho: float) -> np.ndarray:
    return rbf_matrix_numpy(X, SV, gamma) @ alpha - rho


_USING_NUMBA = False

if _numba_wanted():
    try:
        from numba import njit

        _rbf_matrix_jit = njit(cache=True)(_rbf_matrix_loops)
        _smo_core_jit = njit(cache=True)(_smo_core)
        _USING_NUMBA = True
    except ImportError:  # pragma: no cover
        pass


def using_numba() -> bool:
    return _USING_NUMBA


def rbf_matrix(X: np.ndarray, Y: np.ndarray, gamma: float) -> np.ndarray:
    if _USING_NUMBA:
        return _rbf_matrix_jit(
            np.ascontiguousarray(X, dtype=np.float64),
            np.ascontiguousarray(Y, dtype=np.float64),
            float(gamma),
        )
    return rbf_matrix_numpy(
        np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64),
        float(gamma),
    )


def smo_solve(K: np.ndarray, alpha: np.ndarray, C: float, tol: float,
              max_iter: int) -> tuple[int, float]:
    """Run the solver in-place on ``alpha``; returns (iterations, gap)."""
    K = np.ascontiguousarray(K, dtype=np.float64)
    if _USING_NUMBA:
        return _smo_core_jit(K, alpha, float(C), float(tol), int(max_iter))
    return _smo_core_numpy(K, alpha, float(C), float(tol), int(max_iter))


def decision_values(SV: np.ndarray, alpha: np.ndarray, X: np.ndarray,
                    gamma: float, rho: float) -> np.ndarray:
    if _USING_NUMBA:
        return _rbf_matrix_jit(
            np.ascontiguousarray(X, dtype=np.float64),
            np.ascontiguousarray(SV, dtype=np.float64),
            float(gamma),
        ) @ alpha - rho
    return decision_numpy(SV, alpha, np.asarray(X, dtype=np.float64),
                          gamma, rho)

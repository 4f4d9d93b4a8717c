"""Binary soft-margin SVM with an RBF kernel, solved by sequential minimal
optimization using maximal-violating-pair working set selection."""
from __future__ import annotations

import warnings

import numpy as np


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sq = (np.sum(A ** 2, axis=1)[:, None] + np.sum(B ** 2, axis=1)[None, :] - 2.0 * A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: int = 100_000):
    """Solve ``min ½αᵀQα − Σα`` s.t. ``0 ≤ α ≤ C``, ``yᵀα = 0`` with ``Q = yyᵀ∘K``.

    Stops when the maximal KKT violation ``m(α) − M(α)`` drops below ``tol``.
    Returns ``(alpha, rho, iterations)``; the decision function is
    ``Σ αᵢ yᵢ k(xᵢ, x) − rho``.
    """
    n = y.shape[0]
    y = y.astype(float)
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    while True:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * G
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        if not up.any() or not low.any() or score[i] - score[j] < tol:
            break
        if it >= max_iter:
            warnings.warn(f"SMO stopped after {max_iter} iterations without reaching tol={tol}")
            break
        it += 1
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(Q[i, i] + Q[j, j] + 2.0 * Q[i, j], 1e-12)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = max(Q[i, i] + Q[j, j] - 2.0 * Q[i, j], 1e-12)
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        G += Q[:, i] * (alpha[i] - ai) + Q[:, j] * (alpha[j] - aj)
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(np.mean(yG[free]))
    else:
        ub, lb = np.inf, -np.inf
        for t in range(n):
            at_upper, at_lower = alpha[t] >= C, alpha[t] <= 0
            if (at_upper and y[t] < 0) or (at_lower and y[t] > 0):
                ub = min(ub, yG[t])
            elif (at_upper and y[t] > 0) or (at_lower and y[t] < 0):
                lb = max(lb, yG[t])
        rho = float((ub + lb) / 2.0)
    return alpha, rho, it


def fit_binary(X, y_pm, gamma, C, tol, max_iter):
    """Train one binary machine and keep only its support vectors."""
    K = rbf_kernel(X, X, gamma)
    alpha, rho, _ = smo(K, y_pm, C, tol, max_iter)
    sv = alpha > 0
    return {
        "support_vectors": X[sv],
        "dual_coef": alpha[sv] * y_pm[sv],
        "intercept": -rho,
        "alpha": alpha,
        "y": y_pm.astype(float),
    }


def decision(machine, X, gamma) -> np.ndarray:
    sv = machine["support_vectors"]
    if sv.shape[0] == 0:
        return np.full(np.atleast_2d(X).shape[0], machine["intercept"])
    return rbf_kernel(X, sv, gamma) @ machine["dual_coef"] + machine["intercept"]

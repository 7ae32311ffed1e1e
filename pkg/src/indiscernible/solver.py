"""Damped Gauss-Newton (Levenberg) iteration for small nonlinear systems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class LMResult:
    x: np.ndarray
    residual: np.ndarray
    iterations: int
    stopped: str  # "tol", "stalled", "max_iter", "abort"

    @property
    def residual_inf(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0


def levenberg(
    fun: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], np.ndarray],
    x0,
    *,
    tol: float = 1e-12,
    max_iter: int = 500,
    lam0: float = 1e-3,
    lam_max: float = 1e12,
    abort: Callable[[np.ndarray, np.ndarray], bool] | None = None,
) -> LMResult:
    """Minimize ``|fun(x)|^2`` with Levenberg-damped Gauss-Newton steps.

    The damping starts at ``lam0``, is divided by 10 after an accepted step
    and multiplied by 10 after a rejected one.  Steps are minimum-norm, so
    underdetermined systems (fewer equations than unknowns) move as little as
    possible toward their solution manifold.  Iteration stops once
    ``max|fun(x)| < tol``, when the damping exceeds ``lam_max`` (no descent
    direction left), after ``max_iter`` steps, or when ``abort(x, r)`` is true.
    """
    x = np.array(x0, dtype=float)
    r = fun(x)
    cost = float(r @ r)
    lam = lam0
    it = 0
    while it < max_iter:
        if np.max(np.abs(r), initial=0.0) < tol:
            return LMResult(x, r, it, "tol")
        if abort is not None and abort(x, r):
            return LMResult(x, r, it, "abort")
        J = jac(x)
        m, n = J.shape
        it += 1
        while True:
            if m <= n:
                step = -J.T @ np.linalg.solve(J @ J.T + lam * np.eye(m), r)
            else:
                step = -np.linalg.solve(J.T @ J + lam * np.eye(n), J.T @ r)
            x_new = x + step
            r_new = fun(x_new)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                x, r, cost = x_new, r_new, cost_new
                lam = max(lam / 10, 1e-15)
                break
            lam *= 10
            if lam > lam_max:
                return LMResult(x, r, it, "stalled")
    stopped = "tol" if np.max(np.abs(r), initial=0.0) < tol else "max_iter"
    return LMResult(x, r, it, stopped)

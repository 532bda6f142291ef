"""Minimising a convex quadratic form over the probability simplex."""
from __future__ import annotations

import numpy as np


def project_to_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x : x >= 0, sum(x) = 1} (sort-based)."""
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(y) + 1)
    r = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(y - css[r] / (r + 1), 0.0)


def _face_minimiser(A: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Minimiser of x'Ax over {x : sum(x) = 1} restricted to ``support``."""
    k = len(support)
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = 2.0 * A[np.ix_(support, support)]
    kkt[:k, k] = kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    return np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]


def _polish(A: np.ndarray, x: np.ndarray, extra: int | None = None,
            support_tol: float = 1e-9) -> np.ndarray | None:
    """Primal active-set descent started from the support of ``x``
    (optionally enlarged by coordinate ``extra``).

    Moves toward the minimiser of the current face and drops the first
    coordinate that reaches zero, until the face minimiser is feasible.
    """
    x = np.where(x > support_tol * x.max(), x, 0.0)
    x /= x.sum()
    mask = x > 0
    if extra is not None:
        mask[extra] = True
    for _ in range(len(x)):
        support = np.nonzero(mask)[0]
        sol = _face_minimiser(A, support)
        if not np.all(np.isfinite(sol)):
            return None
        if np.all(sol >= -1e-14):
            out = np.zeros_like(x)
            out[support] = np.maximum(sol, 0.0)
            return out / out.sum()
        cur = x[support]
        d = sol - cur
        blocking = sol < 0
        ratios = cur[blocking] / -d[blocking]
        k = int(np.argmin(ratios))
        alpha = min(float(ratios[k]), 1.0)
        x[support] = np.maximum(cur + alpha * d, 0.0)
        mask[support[np.nonzero(blocking)[0][k]]] = False
        x[~mask] = 0.0
        x /= x.sum()
    return None


def solve_simplex_qp(A: np.ndarray, rtol: float = 1e-10, atol: float = 1e-12, max_iter: int = 100_000,
                     x0: np.ndarray | None = None, polish_every: int = 25) -> np.ndarray:
    """Return x on the simplex minimising ``x @ A @ x``.

    Accelerated projected gradient with adaptive restart, warm-started at
    uniform weights. Every ``polish_every`` iterations the current support
    is tried as the active set by solving its KKT system directly. Iteration
    stops once the Frank-Wolfe gap, an upper bound on the suboptimality of
    the current point (or the objective itself, which bounds it for PSD
    input), drops below ``rtol * |f(x)| + atol * min(1, 1/s)`` in units of
    ``s = max|A|``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    m = A.shape[0]
    A = 0.5 * (A + A.T)
    scale = float(np.abs(A).max())
    if m == 1 or scale == 0.0:
        return np.full(m, 1.0 / m)
    A = A / scale
    floor = atol * min(1.0, 1.0 / scale)
    step = 1.0 / (2.0 * max(float(np.linalg.eigvalsh(A)[-1]), 1e-12))

    def gap(z: np.ndarray) -> float:
        g = 2.0 * A @ z
        return float(g @ z - g.min())

    def done(z: np.ndarray, fz: float) -> bool:
        # f >= 0 on PSD input, so a tiny objective is itself a certificate
        return min(gap(z), fz) <= rtol * abs(fz) + floor

    x = np.full(m, 1.0 / m) if x0 is None else project_to_simplex(np.asarray(x0, dtype=float))
    y, theta = x.copy(), 1.0
    f_x = x @ A @ x
    for it in range(max_iter):
        if done(x, f_x):
            break
        if it % polish_every == polish_every - 1:
            for extra in (None, int(np.argmin(A @ x))):
                z = _polish(A, x, extra)
                if z is None:
                    continue
                f_z = z @ A @ z
                if f_z <= f_x + 1e-14 * abs(f_x) + 1e-3 * floor:
                    x, f_x, y, theta = z, f_z, z.copy(), 1.0
                    if done(x, f_x):
                        break
            if done(x, f_x):
                break
        x_new = project_to_simplex(y - step * (2.0 * A @ y))
        f_new = x_new @ A @ x_new
        if f_new > f_x:
            # restart momentum from the current iterate
            y, theta = x.copy(), 1.0
            continue
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        y = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
        x, f_x, theta = x_new, f_new, theta_new
    return x

"""Matrix-free conjugate gradients for the SPD solves used across the package."""

import numpy as np


class SolverError(RuntimeError):
    """Iterative solve failed; carries the residual that was reached."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


def conjugate_gradient(
    apply_op,
    b: np.ndarray,
    rtol: float = 1e-10,
    x0: np.ndarray | None = None,
    max_iter: int | None = None,
) -> tuple[np.ndarray, int]:
    """Solve A x = b for SPD A given only v -> A v.

    Terminates when ||b - A x|| <= rtol * ||b||; raises SolverError otherwise.
    Returns (x, iterations).
    """
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = np.array(x0, dtype=float)
        r = b - apply_op(x)
    p = r.copy()
    rs = float(r @ r)
    if max_iter is None:
        max_iter = max(1000, 20 * b.size)
    target = rtol * bnorm
    for it in range(1, max_iter + 1):
        ap = apply_op(p)
        alpha = rs / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        if np.sqrt(rs_new) <= target:
            return x, it
        p = r + (rs_new / rs) * p
        rs = rs_new
    achieved = np.sqrt(rs) / bnorm
    raise SolverError(
        f"CG did not reach rtol={rtol:g} in {max_iter} iterations "
        f"(relative residual {achieved:.3e})",
        residual=achieved,
    )

"""One-sided (Hestenes) Jacobi SVD for complex square matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NoConvergence(ArithmeticError):
    def __init__(self, sweeps: int, residual: float):
        self.sweeps = sweeps
        self.residual = residual
        super().__init__(f"Jacobi SVD did not converge in {sweeps} sweeps (off-diagonal {residual:.3e})")


@dataclass(frozen=True)
class SvdResult:
    singular_values: np.ndarray  # descending
    left: np.ndarray  # columns u_n
    right: np.ndarray  # columns v_n

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right.conj().T


def svd(M, tol: float = 1e-15, max_sweeps: int = 100) -> SvdResult:
    """Factor ``M = U diag(s) V^H`` by orthogonalising the columns of ``M V``.

    Each u_n is rotated so that its largest-magnitude entry is real and
    non-negative; v_n gets the same phase.
    """
    A = np.array(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("square matrix required")
    if not np.all(np.isfinite(A)):
        raise ValueError("non-finite entries")
    n = A.shape[1]
    V = np.eye(n, dtype=complex)

    for sweep in range(max_sweeps):
        worst = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                ai, aj = A[:, i], A[:, j]
                alpha = np.vdot(ai, ai).real
                beta = np.vdot(aj, aj).real
                gamma = np.vdot(ai, aj)
                g = abs(gamma)
                scale = np.sqrt(alpha * beta)
                if g == 0 or g <= tol * scale:
                    continue
                worst = max(worst, g / scale)
                phase = gamma / g
                zeta = (beta - alpha) / (2 * g)
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1 + zeta * zeta))
                c = 1 / np.sqrt(1 + t * t)
                s = c * t
                J = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                A[:, [i, j]] = A[:, [i, j]] @ J
                V[:, [i, j]] = V[:, [i, j]] @ J
        if worst == 0.0:
            break
    else:
        raise NoConvergence(max_sweeps, worst)

    sigma = np.linalg.norm(A, axis=0)
    order = sorted(range(n), key=lambda k: (-sigma[k], k))
    sigma = sigma[order]
    A = A[:, order]
    V = V[:, order]
    U = np.zeros_like(A)
    tiny = max(sigma[0] if n else 0.0, 1.0) * n * np.finfo(float).eps
    for k in range(n):
        if sigma[k] > tiny:
            U[:, k] = A[:, k] / sigma[k]
        else:
            sigma[k] = 0.0
            U[:, k] = _complement(U[:, :k])
    for k in range(n):
        idx = int(np.argmax(np.abs(U[:, k])))
        ph = U[idx, k] / abs(U[idx, k])
        U[:, k] *= ph.conjugate()
        V[:, k] *= ph.conjugate()
    return SvdResult(sigma, U, V)


def _complement(Q: np.ndarray) -> np.ndarray:
    """A unit vector orthogonal to the columns of Q (which are orthonormal)."""
    n = Q.shape[0]
    for e in np.eye(n, dtype=complex):
        x = e - Q @ (Q.conj().T @ e) if Q.shape[1] else e
        norm = np.linalg.norm(x)
        if norm > 1e-8:
            return x / norm
    raise ArithmeticError("no orthogonal complement")

"""Dense matrix helpers shared by every other module.

All functions are pure and accept anything ``np.asarray`` understands. Inputs
with NaN or Inf entries are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PINV_RTOL = 1e-12
SYM_ATOL = 1e-10


class NumericsError(ValueError):
    """Raised on malformed matrix input (shape, symmetry, definiteness, finiteness)."""


def as_matrix(m, *, name: str = "matrix") -> np.ndarray:
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise NumericsError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericsError(f"{name} has non-finite entries")
    return a


def _require_square(a: np.ndarray, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise NumericsError(f"{name} must be square, got shape {a.shape}")


def _require_symmetric(a: np.ndarray, name: str) -> None:
    _require_square(a, name)
    scale = 1.0 + np.max(np.abs(a), initial=0.0)
    if np.max(np.abs(a - a.T), initial=0.0) > SYM_ATOL * scale:
        raise NumericsError(f"{name} is not symmetric")


def symmetrize(m) -> np.ndarray:
    a = as_matrix(m)
    _require_square(a, "matrix")
    return 0.5 * (a + a.T)


def pseudo_inverse(m, tol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose inverse; singular values below ``tol * sigma_max`` count as zero."""
    a = as_matrix(m)
    if a.size == 0:
        return np.zeros((a.shape[1], a.shape[0]))
    return np.linalg.pinv(a, rcond=tol)


def sym_eigs(m) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (as columns)."""
    a = as_matrix(m)
    _require_symmetric(a, "matrix")
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    return w, v


def psd_project(m) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped to zero)."""
    w, v = sym_eigs(m)
    if w.size and w[0] >= 0.0:
        a = as_matrix(m)
        return 0.5 * (a + a.T)
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.T
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class SpdFactor:
    source: np.ndarray
    factor: np.ndarray

    def reconstruction_error(self) -> float:
        return float(np.max(np.abs(self.factor @ self.factor.T - self.source), initial=0.0))


def spd_factor(m) -> SpdFactor:
    """Square-root factor ``F`` with ``F @ F.T == m`` for symmetric PSD ``m``.

    Uses Cholesky when possible and falls back to an eigendecomposition, which
    also handles the rank-deficient case (zero columns for null directions).
    """
    a = as_matrix(m)
    w, v = sym_eigs(a)
    scale = 1.0 + np.max(np.abs(a), initial=0.0)
    if w.size and w[0] < -SYM_ATOL * scale:
        raise NumericsError(f"matrix is indefinite (min eigenvalue {w[0]:.3e})")
    a = 0.5 * (a + a.T)
    if w.size and w[0] > SYM_ATOL * scale:
        try:
            return SpdFactor(a, np.linalg.cholesky(a))
        except np.linalg.LinAlgError:
            pass
    # descending order puts the null directions in the trailing columns
    f = v[:, ::-1] * np.sqrt(np.clip(w[::-1], 0.0, None))
    return SpdFactor(a, f)

"""Information matrices and the exact splits used by the consensus+innovations filter.

With the pseudo-state ``y = G x``, the filter needs matrices satisfying

    Htil[n] @ G + Hchk[n] == G_n        (local mean map written through y)
    Atil @ G + Achk == G @ A            (pseudo-state dynamics)

They are built from the pseudoinverse of ``G`` so that the ``til`` part acts on
``range(G)`` and the ``chk`` part picks up whatever ``G`` cannot see. Both
``chk`` terms vanish when ``G`` is invertible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import FieldModel, ModelError, SensorSuite
from .numerics import PINV_RTOL, pseudo_inverse, sym_eigs


def local_information(suite: SensorSuite, n: int) -> np.ndarray:
    """``H_n^T R_n^{-1} H_n``."""
    suite.check_agent(n)
    H, R = suite.H[n], suite.R[n]
    G = H.T @ np.linalg.solve(R, H)
    return 0.5 * (G + G.T)


def pseudo_observation(suite: SensorSuite, n: int, z) -> np.ndarray:
    """``H_n^T R_n^{-1} z``; accepts a single vector or a batch ``(..., M_n)``."""
    suite.check_agent(n)
    z = np.asarray(z, dtype=float)
    H, R = suite.H[n], suite.R[n]
    if z.shape[-1:] != (H.shape[0],):
        raise ModelError(f"observation has trailing dim {z.shape[-1:]}, expected {H.shape[0]}")
    # R symmetric, so solve(R, H).T == H^T R^{-1}
    return z @ np.linalg.solve(R, H)


@dataclass(frozen=True, eq=False)
class PseudoModel:
    G_local: tuple
    G: np.ndarray
    Gplus: np.ndarray
    H_til: tuple
    H_chk: tuple
    A_til: np.ndarray
    A_chk: np.ndarray

    @property
    def N(self) -> int:
        return len(self.G_local)

    @property
    def M(self) -> int:
        return self.G.shape[0]

    def g_invertible(self, tol: float = PINV_RTOL) -> bool:
        w, _ = sym_eigs(self.G)
        return bool(w[-1] > 0 and w[0] > tol * w[-1])


def build_pseudo_model(model: FieldModel, suite: SensorSuite, tol: float = PINV_RTOL) -> PseudoModel:
    if model.M != suite.M:
        raise ModelError(f"field dimension {model.M} != sensor dimension {suite.M}")
    M, N = model.M, suite.N
    Gn = tuple(local_information(suite, n) for n in range(N))
    G = sum(Gn) / N
    G = 0.5 * (G + G.T)
    Gp = pseudo_inverse(G, tol)
    null = np.eye(M) - Gp @ G
    GA = G @ model.A
    return PseudoModel(
        G_local=Gn,
        G=G,
        Gplus=Gp,
        H_til=tuple(g @ Gp for g in Gn),
        H_chk=tuple(g @ null for g in Gn),
        A_til=GA @ Gp,
        A_chk=GA @ null,
    )


def observability_rank(model: FieldModel, suite: SensorSuite) -> int:
    """Rank of the stacked observability matrix of ``(A, [H_1; ...; H_N])``."""
    H = np.vstack(suite.H)
    blocks, cur = [], H
    for _ in range(model.M):
        blocks.append(cur)
        cur = cur @ model.A
    return int(np.linalg.matrix_rank(np.vstack(blocks)))

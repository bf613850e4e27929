"""Offline gain design for the distributed filters.

The consensus+innovations filter is linear in its errors, so the joint error
covariance of all agents can be propagated exactly. Stacking, for every agent
``n``, the pseudo-state error ``e_y[n] = y - yhat[n]`` and the field error
``e_x[n] = x - xhat[n]`` gives a ``2NM`` vector

    eps = [e_y[0], ..., e_y[N-1], e_x[0], ..., e_x[N-1]]

whose covariance ``P`` obeys a Riccati-like recursion driven by the gains.
Each gain is the per-agent linear minimum-variance (Gauss-Markov) choice
``W = Cov(e, d) Cov(d)^+`` for the residual ``d`` the agent actually sees.

The pseudo-observation and pseudo-innovation variants carry memory terms that
make their errors depend on the field itself, so their gains come from a
second-moment recursion over the raw augmented state instead (see
:class:`MomentRecursion`).
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import FieldModel, SensorSuite
from .network import SensorNetwork, check_connected
from .numerics import pseudo_inverse, sym_eigs
from .pseudo import PseudoModel

log = logging.getLogger(__name__)

ESTIMATORS = ("cikf", "dikf", "pikf")
CEILING_FACTOR = 1e6
MONOTONE_RTOL = 1e-9


class GainError(RuntimeError):
    pass


@dataclass
class GainConfig:
    mode: str = "optimal"
    alpha: float = 0.1
    beta: float | None = None  # None -> 1 / lambda_max(L)
    kappa: float = 0.1
    T: int = 100
    ceiling_factor: float = CEILING_FACTOR

    def __post_init__(self):
        if self.mode not in ("optimal", "static"):
            raise ValueError(f"gain mode must be 'optimal' or 'static', got {self.mode!r}")
        if self.T < 0:
            raise ValueError("gain horizon must be nonnegative")

    def resolved_beta(self, network: SensorNetwork) -> float:
        if self.beta is not None:
            return float(self.beta)
        lam = network.lambda_max
        return 1.0 / lam if lam > 0 else 0.0


def beta_warnings(beta: float, network: SensorNetwork) -> list[str]:
    lam = network.lambda_max
    if lam <= 0:
        return []
    if not (0.0 < beta < 2.0 / lam):
        return [f"consensus weight beta={beta:g} outside stability range (0, {2.0 / lam:g})"]
    return []


def consensus_contraction(network: SensorNetwork, beta: float) -> float:
    """Spectral radius of ``I - beta L`` on the disagreement subspace (orthogonal to 1)."""
    lam = network.spectrum[1:]
    if lam.size == 0:
        return 0.0
    return float(np.max(np.abs(1.0 - beta * lam)))


def model_hash(model: FieldModel, suite: SensorSuite, network: SensorNetwork) -> str:
    h = hashlib.sha256()
    for arr in (model.A, model.V, model.x0_mean, model.x0_cov, *suite.H, *suite.R):
        a = np.ascontiguousarray(arr, dtype="<f8")
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    h.update(repr((network.N, sorted(network.edges))).encode())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# joint error covariance of the consensus+innovations filter


@dataclass
class JointCovariance:
    i: int
    P: np.ndarray
    N: int
    M: int

    def y_slice(self, n: int) -> slice:
        return slice(n * self.M, (n + 1) * self.M)

    def x_slice(self, n: int) -> slice:
        off = self.N * self.M
        return slice(off + n * self.M, off + (n + 1) * self.M)

    def y_block(self, n: int) -> np.ndarray:
        s = self.y_slice(n)
        return self.P[s, s]

    def x_block(self, n: int) -> np.ndarray:
        s = self.x_slice(n)
        return self.P[s, s]

    def x_traces(self) -> np.ndarray:
        return np.array([np.trace(self.x_block(n)) for n in range(self.N)])

    def y_traces(self) -> np.ndarray:
        return np.array([np.trace(self.y_block(n)) for n in range(self.N)])


@dataclass
class CikfGains:
    """Gains of one round. ``consensus[n, l]`` multiplies ``yhat[l] - yhat[n]``
    for neighbors ``l``; its diagonal and non-neighbor blocks are zero."""

    consensus: np.ndarray  # (N, N, M, M)
    innovation: np.ndarray  # (N, M, M)
    state: np.ndarray  # (N, M, M)

    @classmethod
    def zeros(cls, N: int, M: int) -> "CikfGains":
        return cls(np.zeros((N, N, M, M)), np.zeros((N, M, M)), np.zeros((N, M, M)))


def _stack_selector(N: int, M: int, pseudo: PseudoModel) -> np.ndarray:
    # eps at time 0 equals [1 (x) G; 1 (x) I] (x0 - x0_mean)
    return np.vstack([np.tile(pseudo.G, (N, 1)), np.tile(np.eye(M), (N, 1))])


def _sym(P):
    return 0.5 * (P + P.T)


def _project(P: np.ndarray) -> tuple[np.ndarray, float]:
    """Symmetrize and clip negative eigenvalues; returns the clipped magnitude."""
    P = _sym(P)
    w, v = np.linalg.eigh(P)
    if w[0] >= 0.0:
        return P, 0.0
    clipped = float(-w[0])
    w = np.clip(w, 0.0, None)
    return _sym((v * w) @ v.T), clipped


def init_joint_covariance(model: FieldModel, pseudo: PseudoModel, N: int | None = None) -> JointCovariance:
    N = pseudo.N if N is None else N
    M = model.M
    if pseudo.M != M:
        raise GainError(f"pseudo model dimension {pseudo.M} != field dimension {M}")
    J = _stack_selector(N, M, pseudo)
    return JointCovariance(0, _sym(J @ model.x0_cov @ J.T), N, M)


def _y_stage_maps(gains: CikfGains, pseudo: PseudoModel, N: int, M: int):
    D = 2 * N * M
    Phi = np.eye(D)
    Gam = np.zeros((D, N * M))
    for n in range(N):
        yn = slice(n * M, (n + 1) * M)
        xn = slice(N * M + n * M, N * M + (n + 1) * M)
        Bi = gains.innovation[n]
        diag = np.eye(M) - Bi @ pseudo.H_til[n]
        for l in range(N):
            if l == n:
                continue
            Bl = gains.consensus[n, l]
            if not Bl.any():
                continue
            diag = diag - Bl
            Phi[yn, l * M:(l + 1) * M] = Bl
        Phi[yn, yn] = diag
        Phi[yn, xn] = -Bi @ pseudo.H_chk[n]
        Gam[yn, yn] = -Bi
    return Phi, Gam


def _noise_blockdiag(pseudo: PseudoModel) -> np.ndarray:
    N, M = pseudo.N, pseudo.M
    Q = np.zeros((N * M, N * M))
    for n, g in enumerate(pseudo.G_local):
        Q[n * M:(n + 1) * M, n * M:(n + 1) * M] = g
    return Q


def _x_stage_map(state_gains: np.ndarray, pseudo: PseudoModel, N: int, M: int) -> np.ndarray:
    Phi = np.eye(2 * N * M)
    for n in range(N):
        yn = slice(n * M, (n + 1) * M)
        xn = slice(N * M + n * M, N * M + (n + 1) * M)
        K = state_gains[n]
        Phi[xn, xn] = np.eye(M) - K @ pseudo.G
        Phi[xn, yn] = K
    return Phi


def y_stage(P: JointCovariance, gains: CikfGains, pseudo: PseudoModel) -> JointCovariance:
    Phi, Gam = _y_stage_maps(gains, pseudo, P.N, P.M)
    out = Phi @ P.P @ Phi.T + Gam @ _noise_blockdiag(pseudo) @ Gam.T
    return JointCovariance(P.i, _sym(out), P.N, P.M)


def x_stage(P: JointCovariance, state_gains: np.ndarray, pseudo: PseudoModel) -> JointCovariance:
    Phi = _x_stage_map(state_gains, pseudo, P.N, P.M)
    return JointCovariance(P.i, _sym(Phi @ P.P @ Phi.T), P.N, P.M)


def filter_step_covariance(P: JointCovariance, gains: CikfGains, pseudo: PseudoModel,
                           network: SensorNetwork | None = None) -> JointCovariance:
    """Propagate ``P`` through the y-filter and x-filter updates of one round.

    ``network`` only serves as a shape check; the neighbor structure lives in
    the (zero-padded) consensus gain array.
    """
    if network is not None and network.N != P.N:
        raise GainError(f"network has {network.N} nodes, covariance has {P.N} agents")
    if gains.consensus.shape != (P.N, P.N, P.M, P.M):
        raise GainError(f"consensus gains have shape {gains.consensus.shape}")
    out = x_stage(y_stage(P, gains, pseudo), gains.state, pseudo)
    proj, _ = _project(out.P)
    return JointCovariance(P.i, proj, P.N, P.M)


def _predict_maps(model: FieldModel, pseudo: PseudoModel, N: int, M: int):
    D = 2 * N * M
    Phi = np.zeros((D, D))
    for n in range(N):
        yn = slice(n * M, (n + 1) * M)
        xn = slice(N * M + n * M, N * M + (n + 1) * M)
        Phi[yn, yn] = pseudo.A_til
        Phi[yn, xn] = pseudo.A_chk
        Phi[xn, xn] = model.A
    J = _stack_selector(N, M, pseudo)
    return Phi, J @ model.V @ J.T


def predict_step_covariance(P: JointCovariance, model: FieldModel, pseudo: PseudoModel,
                            project: bool = True) -> JointCovariance:
    """One prediction step; the field noise is shared by every agent's error."""
    Phi, Q = _predict_maps(model, pseudo, P.N, P.M)
    out = _sym(Phi @ P.P @ Phi.T + Q)
    if project:
        out, _ = _project(out)
    return JointCovariance(P.i + 1, out, P.N, P.M)


def _gm_solve(cross: np.ndarray, resid_cov: np.ndarray) -> np.ndarray:
    if resid_cov.size == 0:
        return np.zeros((cross.shape[0], 0))
    return cross @ pseudo_inverse(_sym(resid_cov))


def residual_operator(P: JointCovariance, n: int, pseudo: PseudoModel, network: SensorNetwork):
    """Rows mapping ``eps`` to agent ``n``'s stacked residual error, plus the
    rows that pick out its pseudo-observation noise. Residual blocks are the
    neighbors in ascending order followed by the innovation."""
    N, M = P.N, P.M
    nbrs = network.neighbors(n)
    k = len(nbrs)
    C = np.zeros(((k + 1) * M, 2 * N * M))
    yn, xn = P.y_slice(n), P.x_slice(n)
    for j, l in enumerate(nbrs):
        rows = slice(j * M, (j + 1) * M)
        C[rows, yn] += np.eye(M)
        C[rows, P.y_slice(l)] -= np.eye(M)
    rows = slice(k * M, (k + 1) * M)
    C[rows, yn] += pseudo.H_til[n]
    C[rows, xn] += pseudo.H_chk[n]
    D = np.zeros(((k + 1) * M, M))
    D[rows] = np.eye(M)
    return C, D, nbrs


def gauss_markov_B(P: JointCovariance, n: int, pseudo: PseudoModel,
                   network: SensorNetwork) -> tuple[dict[int, np.ndarray], np.ndarray]:
    """Minimum-variance consensus and innovation gains for agent ``n``.

    Returns ``({l: B_nl}, B_nn)``.
    """
    W = gauss_markov_W(P, n, pseudo, network)
    M = P.M
    nbrs = network.neighbors(n)
    blocks = {l: W[:, j * M:(j + 1) * M] for j, l in enumerate(nbrs)}
    return blocks, W[:, len(nbrs) * M:]


def gauss_markov_W(P: JointCovariance, n: int, pseudo: PseudoModel, network: SensorNetwork) -> np.ndarray:
    C, D, _ = residual_operator(P, n, pseudo, network)
    yn = P.y_slice(n)
    cross = P.P[yn, :] @ C.T
    S = C @ P.P @ C.T + D @ pseudo.G_local[n] @ D.T
    return _gm_solve(cross, S)


def y_posterior_trace(P: JointCovariance, n: int, W: np.ndarray, pseudo: PseudoModel,
                      network: SensorNetwork) -> float:
    """Trace of agent ``n``'s filtered pseudo-state error covariance under stacked gain ``W``."""
    C, D, _ = residual_operator(P, n, pseudo, network)
    E = np.zeros((P.M, 2 * P.N * P.M))
    E[:, P.y_slice(n)] = np.eye(P.M)
    F = E - W @ C
    cov = F @ P.P @ F.T + W @ D @ pseudo.G_local[n] @ D.T @ W.T
    return float(np.trace(cov))


def _k_operators(P: JointCovariance, n: int, pseudo: PseudoModel):
    M = P.M
    C = np.zeros((M, 2 * P.N * P.M))
    C[:, P.x_slice(n)] = pseudo.G
    C[:, P.y_slice(n)] = -np.eye(M)
    E = np.zeros((M, 2 * P.N * P.M))
    E[:, P.x_slice(n)] = np.eye(M)
    return E, C


def gauss_markov_K(P: JointCovariance, n: int, pseudo: PseudoModel) -> np.ndarray:
    """Minimum-variance state gain for agent ``n``; ``P`` must already hold the
    filtered pseudo-state errors (output of :func:`y_stage`)."""
    E, C = _k_operators(P, n, pseudo)
    return _gm_solve(E @ P.P @ C.T, C @ P.P @ C.T)


def x_posterior_trace(P: JointCovariance, n: int, K: np.ndarray, pseudo: PseudoModel) -> float:
    E, C = _k_operators(P, n, pseudo)
    F = E - K @ C
    return float(np.trace(F @ P.P @ F.T))


# ---------------------------------------------------------------------------
# second-moment recursion for the memory-based variants


class MomentRecursion:
    """Exact second moment ``S = E[xi xi^T]`` of a linear system driven by
    independent zero-mean noise, with gain stages chosen per agent.

    The raw state is ``xi = [x, c[0..N-1], m[0..N-1], xhat[0..N-1]]``: the field,
    each agent's consensus tracker, the memory of its last tracked input, and
    its predicted field estimate. Second moments (not covariances) are used so
    the recorded traces equal mean-squared errors even when the mean is nonzero.
    """

    def __init__(self, kind: str, model: FieldModel, pseudo: PseudoModel,
                 network: SensorNetwork, beta: float):
        if kind not in ("dikf", "pikf"):
            raise GainError(f"moment recursion supports dikf/pikf, not {kind!r}")
        self.kind = kind
        self.model, self.pseudo, self.network = model, pseudo, network
        N, M = pseudo.N, pseudo.M
        self.N, self.M = N, M
        self.D = M + 3 * N * M
        mean = np.concatenate([model.x0_mean, np.zeros(2 * N * M), np.tile(model.x0_mean, N)])
        cov = np.zeros((self.D, self.D))
        cov[:M, :M] = model.x0_cov
        self.S = cov + np.outer(mean, mean)
        self._build_maps(beta)

    def c(self, n):
        return slice(self.M + n * self.M, self.M + (n + 1) * self.M)

    def m(self, n):
        o = self.M + self.N * self.M
        return slice(o + n * self.M, o + (n + 1) * self.M)

    def xh(self, n):
        o = self.M + 2 * self.N * self.M
        return slice(o + n * self.M, o + (n + 1) * self.M)

    def _build_maps(self, beta: float):
        N, M, D = self.N, self.M, self.D
        x = slice(0, M)
        I = np.eye(M)
        mix = np.kron(np.eye(N) - beta * self.network.laplacian, I)
        Phi = np.eye(D)
        Gam = np.zeros((D, N * M))
        Phi[M:M + N * M, M:M + N * M] = mix
        for n in range(N):
            Gn = self.pseudo.G_local[n]
            c, m, xh = self.c(n), self.m(n), self.xh(n)
            # tracked input u = Gn x + eta (dikf) or Gn (x - xhat) + eta (pikf)
            Phi[m, m] = 0.0
            Phi[c, m] = -I
            Phi[c, x] = Gn
            Phi[m, x] = Gn
            if self.kind == "pikf":
                Phi[c, xh] = -Gn
                Phi[m, xh] = -Gn
            Gam[c, n * M:(n + 1) * M] = I
            Gam[m, n * M:(n + 1) * M] = I
        self.Phi_track = Phi
        self.Gam_track = Gam
        self.Q_track = _noise_blockdiag(self.pseudo)
        Pp = np.eye(D)
        Pp[x, x] = self.model.A
        for n in range(N):
            Pp[self.xh(n), self.xh(n)] = self.model.A
        self.Phi_pred = Pp
        self.Q_pred = np.zeros((D, D))
        self.Q_pred[x, x] = self.model.V

    def track(self):
        Phi, Gam = self.Phi_track, self.Gam_track
        self.S = _sym(Phi @ self.S @ Phi.T + Gam @ self.Q_track @ Gam.T)

    def _k_ops(self, n):
        M = self.M
        E = np.zeros((M, self.D))
        E[:, :M] = np.eye(M)
        E[:, self.xh(n)] = -np.eye(M)
        C = np.zeros((M, self.D))
        C[:, self.c(n)] = np.eye(M)
        if self.kind == "dikf":
            C[:, self.xh(n)] = -self.pseudo.G
        return E, C

    def optimal_K(self, n) -> np.ndarray:
        E, C = self._k_ops(n)
        return _gm_solve(E @ self.S @ C.T, C @ self.S @ C.T)

    def update(self, K: np.ndarray):
        """Apply ``xhat[n] += K[n] s[n]`` for all agents."""
        Phi = np.eye(self.D)
        for n in range(self.N):
            _, C = self._k_ops(n)
            Phi[self.xh(n), :] += K[n] @ C
        self.S = _sym(Phi @ self.S @ Phi.T)

    def mse(self) -> np.ndarray:
        out = np.empty(self.N)
        for n in range(self.N):
            E, _ = self._k_ops(n)
            out[n] = np.trace(E @ self.S @ E.T)
        return out

    def predict(self):
        self.S = _sym(self.Phi_pred @ self.S @ self.Phi_pred.T + self.Q_pred)


# ---------------------------------------------------------------------------
# schedules


@dataclass
class GainSchedule:
    estimator: str
    mode: str
    N: int
    M: int
    T: int
    state: np.ndarray  # (T+1, N, M, M)
    predicted_mse: np.ndarray  # (T+1, N) filtered field MSE per agent
    consensus: np.ndarray | None = None  # cikf: (T+1, N, N, M, M)
    innovation: np.ndarray | None = None  # cikf: (T+1, N, M, M)
    beta: float | None = None  # dikf/pikf consensus weight
    model_hash: str = ""
    max_clip: float = 0.0
    notes: list[str] = field(default_factory=list)

    def gains_at(self, i: int) -> CikfGains:
        """Gains for round ``i``; past the horizon the last set is reused."""
        j = self._index(i)
        return CikfGains(self.consensus[j], self.innovation[j], self.state[j])

    def state_gain_at(self, i: int) -> np.ndarray:
        return self.state[self._index(i)]

    def _index(self, i: int) -> int:
        if i < 0:
            raise GainError(f"negative round index {i}")
        if i > self.T:
            msg = f"schedule horizon {self.T} exhausted; reusing final gains"
            if msg not in self.notes:
                self.notes.append(msg)
                log.warning(msg)
            return self.T
        return i

    @property
    def predicted_network_mse(self) -> np.ndarray:
        return self.predicted_mse.mean(axis=1)

    def header(self) -> dict:
        return {"estimator": self.estimator, "mode": self.mode, "N": self.N, "M": self.M,
                "T": self.T, "beta": self.beta, "model_hash": self.model_hash,
                "max_clip": self.max_clip, "notes": self.notes}

    def save(self, path) -> None:
        arrays = {"state": self.state, "predicted_mse": self.predicted_mse}
        if self.consensus is not None:
            arrays["consensus"] = self.consensus
            arrays["innovation"] = self.innovation
        with open(path, "wb") as fh:
            np.savez(fh, header=np.array(json.dumps(self.header())), **arrays)

    @classmethod
    def load(cls, path) -> "GainSchedule":
        with np.load(Path(path), allow_pickle=False) as data:
            hdr = json.loads(str(data["header"]))
            return cls(
                estimator=hdr["estimator"], mode=hdr["mode"], N=hdr["N"], M=hdr["M"], T=hdr["T"],
                state=data["state"], predicted_mse=data["predicted_mse"],
                consensus=data["consensus"] if "consensus" in data else None,
                innovation=data["innovation"] if "innovation" in data else None,
                beta=hdr["beta"], model_hash=hdr["model_hash"], max_clip=hdr["max_clip"],
                notes=list(hdr["notes"]),
            )


def _check_monotone(before: np.ndarray, after: np.ndarray, what: str, i: int) -> None:
    tol = MONOTONE_RTOL * (1.0 + np.abs(before))
    bad = np.flatnonzero(after > before + tol)
    if bad.size:
        n = int(bad[0])
        raise GainError(f"{what} update increased agent {n}'s error trace at i={i} "
                        f"({before[n]:.6g} -> {after[n]:.6g})")


def precompute_schedule(model: FieldModel, suite: SensorSuite, network: SensorNetwork,
                        pseudo: PseudoModel, config: GainConfig, estimator: str = "cikf") -> GainSchedule:
    """Run the covariance recursion over ``0..T`` and record gains and predicted MSE."""
    if estimator not in ESTIMATORS:
        raise GainError(f"unknown estimator {estimator!r}")
    if not check_connected(network)[0]:
        raise GainError("network disconnected")
    if network.N != suite.N or pseudo.N != suite.N:
        raise GainError("network size does not match the sensor suite")
    for w in beta_warnings(config.resolved_beta(network), network) if (
            config.mode == "static" or estimator != "cikf") else []:
        warnings.warn(w, stacklevel=2)
    if estimator == "cikf":
        return _cikf_schedule(model, suite, network, pseudo, config)
    return _moment_schedule(estimator, model, suite, network, pseudo, config)


def _ceiling(model: FieldModel, config: GainConfig) -> float:
    return config.ceiling_factor * float(np.trace(model.x0_cov + model.V))


def _cikf_schedule(model, suite, network, pseudo, config) -> GainSchedule:
    N, M, T = suite.N, model.M, config.T
    cons = np.zeros((T + 1, N, N, M, M))
    innov = np.zeros((T + 1, N, M, M))
    state = np.zeros((T + 1, N, M, M))
    pred = np.zeros((T + 1, N))
    ceiling = _ceiling(model, config)
    beta = config.resolved_beta(network)
    max_clip = 0.0
    P = init_joint_covariance(model, pseudo, N)
    I = np.eye(M)
    for i in range(T + 1):
        g = CikfGains.zeros(N, M)
        if config.mode == "optimal":
            for n in range(N):
                blocks, Bnn = gauss_markov_B(P, n, pseudo, network)
                for l, B in blocks.items():
                    g.consensus[n, l] = B
                g.innovation[n] = Bnn
        else:
            for n in range(N):
                for l in network.neighbors(n):
                    g.consensus[n, l] = beta * I
                g.innovation[n] = config.alpha * I
        Py = y_stage(P, g, pseudo)
        if config.mode == "optimal":
            _check_monotone(P.y_traces(), Py.y_traces(), "pseudo-state", i)
            for n in range(N):
                g.state[n] = gauss_markov_K(Py, n, pseudo)
        else:
            g.state[:] = config.kappa * I
        Pf = x_stage(Py, g.state, pseudo)
        if config.mode == "optimal":
            _check_monotone(Py.x_traces(), Pf.x_traces(), "field", i)
        Pf.P, clip = _project(Pf.P)
        max_clip = max(max_clip, clip)
        cons[i], innov[i], state[i] = g.consensus, g.innovation, g.state
        pred[i] = Pf.x_traces()
        tr = float(np.trace(Pf.P))
        if not math.isfinite(tr) or tr > ceiling:
            raise GainError(f"unbounded covariance at i={i}: trace {tr:.3e} exceeds ceiling {ceiling:.3e}")
        P = predict_step_covariance(Pf, model, pseudo, project=False)
    if max_clip > 0:
        log.debug("cikf covariance recursion clipped eigenvalues up to %.3e", max_clip)
    return GainSchedule("cikf", config.mode, N, M, T, state, pred, cons, innov, beta=None,
                        model_hash=model_hash(model, suite, network), max_clip=max_clip)


def _moment_schedule(kind, model, suite, network, pseudo, config) -> GainSchedule:
    N, M, T = suite.N, model.M, config.T
    beta = config.resolved_beta(network)
    rec = MomentRecursion(kind, model, pseudo, network, beta)
    state = np.zeros((T + 1, N, M, M))
    pred = np.zeros((T + 1, N))
    ceiling = _ceiling(model, config)
    for i in range(T + 1):
        rec.track()
        before = rec.mse()
        if config.mode == "optimal":
            K = np.stack([rec.optimal_K(n) for n in range(N)])
        else:
            K = np.broadcast_to(config.kappa * np.eye(M), (N, M, M)).copy()
        rec.update(K)
        pred[i] = rec.mse()
        if config.mode == "optimal":
            _check_monotone(before, pred[i], "field", i)
        state[i] = K
        if not np.all(np.isfinite(pred[i])) or pred[i].sum() > ceiling:
            raise GainError(f"unbounded covariance at i={i}: trace {pred[i].sum():.3e} "
                            f"exceeds ceiling {ceiling:.3e}")
        rec.predict()
    return GainSchedule(kind, config.mode, N, M, T, state, pred, beta=beta,
                        model_hash=model_hash(model, suite, network))


def min_eigenvalue(P: JointCovariance) -> float:
    return float(sym_eigs(P.P)[0][0])

"""Linear-Gaussian field dynamics, local sensors, and seeded ground-truth generation.

The field evolves as ``x[i+1] = A x[i] + v[i]`` with ``v ~ N(0, V)`` and
``x[0] ~ N(x0_mean, x0_cov)``. Agent ``n`` measures ``z[n][i] = H[n] x[i] + r``
with ``r ~ N(0, R[n])``, independent across agents and time.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .numerics import NumericsError, as_matrix, spd_factor, sym_eigs


class ModelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RngStream:
    """Counter-style random stream keyed by ``(seed, trial, purpose)``.

    Two streams with the same key produce the same draws no matter when or in
    which process they are created, so trials can run in any order.
    """

    seed: int
    trial: int = 0
    purpose: str = "default"
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tag = zlib.crc32(self.purpose.encode("utf-8"))
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1),
                                    spawn_key=(int(self.trial), tag))
        object.__setattr__(self, "generator", np.random.Generator(np.random.PCG64(ss)))

    def standard_normal(self, size) -> np.ndarray:
        return self.generator.standard_normal(size)

    def child(self, purpose: str) -> "RngStream":
        return RngStream(self.seed, self.trial, purpose)


@dataclass(frozen=True, eq=False)
class FieldModel:
    A: np.ndarray
    V: np.ndarray
    x0_mean: np.ndarray
    x0_cov: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, name="A")
        M = A.shape[0]
        if A.shape != (M, M):
            raise ModelError(f"A must be square, got {A.shape}")
        V = as_matrix(self.V, name="V")
        S0 = as_matrix(self.x0_cov, name="x0_cov")
        x0 = np.array(self.x0_mean, dtype=float).reshape(-1)
        if V.shape != (M, M) or S0.shape != (M, M) or x0.shape != (M,):
            raise ModelError("FieldModel dimensions are inconsistent")
        for name, m in (("V", V), ("x0_cov", S0)):
            try:
                w, _ = sym_eigs(m)
            except NumericsError as exc:
                raise ModelError(f"{name}: {exc}") from None
            if w[0] < -1e-10 * (1.0 + np.abs(m).max()):
                raise ModelError(f"{name} is not positive semidefinite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "V", 0.5 * (V + V.T))
        object.__setattr__(self, "x0_cov", 0.5 * (S0 + S0.T))
        object.__setattr__(self, "x0_mean", x0)
        object.__setattr__(self, "_v_factor", spd_factor(self.V).factor)
        object.__setattr__(self, "_x0_factor", spd_factor(self.x0_cov).factor)

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def noise_factor(self) -> np.ndarray:
        return self._v_factor

    @property
    def init_factor(self) -> np.ndarray:
        return self._x0_factor


@dataclass(frozen=True, eq=False)
class SensorSuite:
    H: tuple
    R: tuple

    def __post_init__(self):
        if len(self.H) != len(self.R) or len(self.H) == 0:
            raise ModelError("need one (H, R) pair per agent and at least one agent")
        Hs, Rs, factors = [], [], []
        M = None
        for n, (h, r) in enumerate(zip(self.H, self.R)):
            h = as_matrix(h, name=f"H[{n}]")
            r = as_matrix(r, name=f"R[{n}]")
            M = h.shape[1] if M is None else M
            if h.shape[1] != M:
                raise ModelError(f"H[{n}] has {h.shape[1]} columns, expected {M}")
            if h.shape[0] > M:
                raise ModelError(f"H[{n}] observes {h.shape[0]} > M={M} channels")
            if r.shape != (h.shape[0], h.shape[0]):
                raise ModelError(f"R[{n}] has shape {r.shape}, expected {(h.shape[0],) * 2}")
            try:
                w, _ = sym_eigs(r)
            except NumericsError as exc:
                raise ModelError(f"R[{n}]: {exc}") from None
            if w.size and w[0] <= 1e-12 * max(1.0, w[-1]):
                raise ModelError(f"R[{n}] is not positive definite")
            r = 0.5 * (r + r.T)
            Hs.append(h)
            Rs.append(r)
            factors.append(np.linalg.cholesky(r) if r.size else r)
        object.__setattr__(self, "H", tuple(Hs))
        object.__setattr__(self, "R", tuple(Rs))
        object.__setattr__(self, "_r_factors", tuple(factors))

    @property
    def N(self) -> int:
        return len(self.H)

    @property
    def M(self) -> int:
        return self.H[0].shape[1]

    @property
    def obs_dims(self) -> list[int]:
        return [h.shape[0] for h in self.H]

    def noise_factor(self, n: int) -> np.ndarray:
        return self._r_factors[n]

    def check_agent(self, n: int) -> None:
        if not (0 <= n < self.N):
            raise ModelError(f"invalid agent index {n} (N={self.N})")


@dataclass
class Trajectory:
    """States ``x[0..T]`` and per-agent observations ``z[n][0..T]``."""

    states: np.ndarray
    observations: list[np.ndarray]

    @property
    def T(self) -> int:
        return self.states.shape[0] - 1


def step_field(model: FieldModel, x, rng) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.M,):
        raise ModelError(f"state has shape {x.shape}, expected ({model.M},)")
    w = rng.standard_normal(model.M)
    return model.A @ x + model.noise_factor @ w


def observe(suite: SensorSuite, n: int, x, rng) -> np.ndarray:
    suite.check_agent(n)
    x = np.asarray(x, dtype=float)
    if x.shape != (suite.M,):
        raise ModelError(f"state has shape {x.shape}, expected ({suite.M},)")
    H = suite.H[n]
    w = rng.standard_normal(H.shape[0])
    return H @ x + suite.noise_factor(n) @ w


def _check_pair(model: FieldModel, suite: SensorSuite) -> None:
    if model.M != suite.M:
        raise ModelError(f"field dimension {model.M} != sensor dimension {suite.M}")


def simulate_truth(model: FieldModel, suite: SensorSuite, T: int, rng: RngStream) -> Trajectory:
    """One trajectory of length ``T + 1``, drawn step by step.

    Uses three child streams of ``rng`` (``init``, ``field``, ``obs``);
    :func:`simulate_batch` draws the same numbers in bulk.
    """
    _check_pair(model, suite)
    if T < 0:
        raise ModelError("horizon must be nonnegative")
    init, fld, obs = rng.child("init"), rng.child("field"), rng.child("obs")
    x = model.x0_mean + model.init_factor @ init.standard_normal(model.M)
    states = [x]
    zs = [[] for _ in range(suite.N)]
    for i in range(T + 1):
        for n in range(suite.N):
            zs[n].append(observe(suite, n, x, obs))
        if i < T:
            x = step_field(model, x, fld)
            states.append(x)
    return Trajectory(np.array(states), [np.array(z).reshape(T + 1, -1) for z in zs])


def simulate_batch(model: FieldModel, suite: SensorSuite, T: int, seed: int,
                   trials: range | list[int]) -> tuple[np.ndarray, list[np.ndarray]]:
    """Vectorized :func:`simulate_truth` over several trial indices.

    Returns ``states`` with shape ``(B, T+1, M)`` and, per agent, observations
    with shape ``(B, T+1, M_n)``. Row ``b`` consumes exactly the draws of
    ``simulate_truth`` for ``RngStream(seed, trials[b])`` and agrees with it up
    to matmul round-off.
    """
    _check_pair(model, suite)
    M, dims = model.M, suite.obs_dims
    total = sum(dims)
    trials = list(trials)
    B = len(trials)
    x0w = np.empty((B, M))
    vw = np.empty((B, T, M))
    rw = np.empty((B, T + 1, total))
    for b, t in enumerate(trials):
        base = RngStream(seed, t)
        x0w[b] = base.child("init").standard_normal(M)
        vw[b] = base.child("field").standard_normal((T, M))
        rw[b] = base.child("obs").standard_normal((T + 1, total))
    states = np.empty((B, T + 1, M))
    x = model.x0_mean + x0w @ model.init_factor.T
    states[:, 0] = x
    noise = vw @ model.noise_factor.T
    for i in range(T):
        x = x @ model.A.T + noise[:, i]
        states[:, i + 1] = x
    obs = []
    off = 0
    for n, d in enumerate(dims):
        r = rw[:, :, off:off + d] @ suite.noise_factor(n).T
        obs.append(states @ suite.H[n].T + r)
        off += d
    return states, obs

"""Synchronous-round estimators: centralized KF and three distributed filters.

Every array carries an arbitrary leading batch shape, so one call advances
many Monte-Carlo trials at once. Per-agent state has trailing shape ``(M,)``.

A round reads only the mailbox (what neighbors broadcast in the previous
round) plus the agent's own state, so agent update order never matters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gains import GainSchedule
from .model import FieldModel, SensorSuite
from .network import SensorNetwork
from .pseudo import PseudoModel, pseudo_observation


class EstimatorError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Problem:
    model: FieldModel
    suite: SensorSuite
    network: SensorNetwork
    pseudo: PseudoModel

    @property
    def N(self) -> int:
        return self.suite.N

    @property
    def M(self) -> int:
        return self.model.M


@dataclass(frozen=True, eq=False)
class AgentState:
    """One agent's estimates.

    For the consensus+innovations filter ``y_pred``/``y_filt`` are pseudo-state
    estimates. For the tracker-based variants ``y_filt`` is the consensus
    tracker and ``memory`` the last tracked input (pseudo-observation or
    pseudo-innovation); ``y_pred`` is unused.
    """

    n: int
    x_pred: np.ndarray
    x_filt: np.ndarray
    y_pred: np.ndarray
    y_filt: np.ndarray
    memory: np.ndarray
    round: int = 0  # number of rounds this agent has completed


@dataclass(frozen=True, eq=False)
class RoundMailbox:
    round: int
    payload: tuple  # payload[n]: agent n's broadcast vector(s), shape (..., M)


@dataclass(frozen=True, eq=False)
class CentralState:
    x_pred: np.ndarray
    P_pred: np.ndarray
    x_filt: np.ndarray | None = None
    P_filt: np.ndarray | None = None


# ---------------------------------------------------------------------------
# centralized baseline


def ckf_init(model: FieldModel, batch: tuple = ()) -> CentralState:
    return CentralState(np.broadcast_to(model.x0_mean, (*batch, model.M)).copy(), model.x0_cov.copy())


def ckf_step(state: CentralState, model: FieldModel, suite: SensorSuite, observations) -> CentralState:
    """Measurement update with every agent's data, then time update."""
    H = np.vstack(suite.H)
    R = np.zeros((H.shape[0], H.shape[0]))
    off = 0
    for r in suite.R:
        k = r.shape[0]
        R[off:off + k, off:off + k] = r
        off += k
    z = np.concatenate([np.asarray(o, dtype=float) for o in observations], axis=-1)
    if z.shape[-1] != H.shape[0]:
        raise EstimatorError(f"stacked observation has {z.shape[-1]} rows, expected {H.shape[0]}")
    P = state.P_pred
    S = H @ P @ H.T + R
    K = np.linalg.solve(S, H @ P).T
    x_f = state.x_pred + (z - state.x_pred @ H.T) @ K.T
    IKH = np.eye(model.M) - K @ H
    P_f = IKH @ P @ IKH.T + K @ R @ K.T  # Joseph form
    P_f = 0.5 * (P_f + P_f.T)
    P_p = model.A @ P_f @ model.A.T + model.V
    return CentralState(x_f @ model.A.T, 0.5 * (P_p + P_p.T), x_f, P_f)


# ---------------------------------------------------------------------------
# distributed filters


def init_agents(kind: str, problem: Problem, batch: tuple = ()) -> tuple[list[AgentState], RoundMailbox]:
    """Initial agent states and the round-0 mailbox."""
    M = problem.M
    x0 = np.broadcast_to(problem.model.x0_mean, (*batch, M)).copy()
    zero = np.zeros((*batch, M))
    states = []
    if kind == "cikf":
        y0 = x0 @ problem.pseudo.G.T
        for n in range(problem.N):
            states.append(AgentState(n, x0.copy(), x0.copy(), y0.copy(), y0.copy(), zero.copy()))
        payload = tuple(s.y_pred for s in states)
    elif kind in ("dikf", "pikf"):
        # zero tracker and memory make the first round start the tracker at its input
        for n in range(problem.N):
            states.append(AgentState(n, x0.copy(), x0.copy(), zero.copy(), zero.copy(), zero.copy()))
        payload = tuple(s.y_filt for s in states)
    else:
        raise EstimatorError(f"unknown distributed estimator {kind!r}")
    return states, RoundMailbox(0, payload)


def _check_round(states, mailbox: RoundMailbox, i: int, N: int):
    if len(states) != N or len(mailbox.payload) != N:
        raise EstimatorError("state/mailbox size does not match the network")
    for st in states:
        if st.round != i:
            raise EstimatorError(f"mailbox is for round {i}, agent {st.n} is at round {st.round}")


def _cikf_agent(st: AgentState, mailbox, gains, problem: Problem, z) -> AgentState:
    n, ps = st.n, problem.pseudo
    ztil = pseudo_observation(problem.suite, n, z)
    y, x = st.y_pred, st.x_pred
    y_f = y.copy()
    for l in problem.network.neighbors(n):
        y_f += (mailbox.payload[l] - y) @ gains.consensus[n, l].T
    innov = ztil - (y @ ps.H_til[n].T + x @ ps.H_chk[n].T)
    y_f += innov @ gains.innovation[n].T
    x_f = x + (y_f - x @ ps.G.T) @ gains.state[n].T
    y_p = y_f @ ps.A_til.T + x_f @ ps.A_chk.T
    x_p = x_f @ problem.model.A.T
    return AgentState(n, x_p, x_f, y_p, y_f, st.memory, st.round + 1)


def cikf_round(states: list[AgentState], mailbox: RoundMailbox, schedule: GainSchedule,
               problem: Problem, observations, order=None) -> tuple[list[AgentState], RoundMailbox]:
    """One round of the consensus+innovations filter for all agents.

    ``observations[n]`` is agent ``n``'s raw measurement at this round. Each
    agent broadcasts exactly one ``M``-vector: its next pseudo-state prediction.
    """
    i = mailbox.round
    _check_round(states, mailbox, i, problem.N)
    if schedule.estimator != "cikf":
        raise EstimatorError(f"schedule is for {schedule.estimator}, not cikf")
    gains = schedule.gains_at(i)
    out = [None] * problem.N
    for n in (range(problem.N) if order is None else order):
        out[n] = _cikf_agent(states[n], mailbox, gains, problem, observations[n])
    return out, RoundMailbox(i + 1, tuple(s.y_pred for s in out))


def _tracker_agent(kind, st: AgentState, mailbox, beta, K, problem: Problem, z) -> AgentState:
    n, ps = st.n, problem.pseudo
    ztil = pseudo_observation(problem.suite, n, z)
    if kind == "dikf":
        u = ztil
    else:
        u = ztil - st.x_pred @ ps.G_local[n].T
    c = st.y_filt
    mix = np.zeros_like(c)
    for l in problem.network.neighbors(n):
        mix += c - mailbox.payload[l]
    c_new = c - beta * mix + (u - st.memory)
    if kind == "dikf":
        s = c_new - st.x_pred @ ps.G.T
    else:
        s = c_new
    x_f = st.x_pred + s @ K.T
    return AgentState(n, x_f @ problem.model.A.T, x_f, c_new, c_new, u, st.round + 1)


def _tracker_round(kind, states, mailbox, schedule, problem, observations, order):
    i = mailbox.round
    _check_round(states, mailbox, i, problem.N)
    if schedule.estimator != kind:
        raise EstimatorError(f"schedule is for {schedule.estimator}, not {kind}")
    K = schedule.state_gain_at(i)
    out = [None] * problem.N
    for n in (range(problem.N) if order is None else order):
        out[n] = _tracker_agent(kind, states[n], mailbox, schedule.beta, K[n], problem, observations[n])
    return out, RoundMailbox(i + 1, tuple(s.y_filt for s in out))


def dikf_round(states, mailbox, schedule: GainSchedule, problem: Problem, observations, order=None):
    """Dynamic average consensus on pseudo-observations, then a state update
    driven by ``tracker - G xhat``."""
    return _tracker_round("dikf", states, mailbox, schedule, problem, observations, order)


def pikf_round(states, mailbox, schedule: GainSchedule, problem: Problem, observations, order=None):
    """Dynamic average consensus on pseudo-innovations ``ztil - G_n xhat``,
    then a state update driven by the tracker."""
    return _tracker_round("pikf", states, mailbox, schedule, problem, observations, order)


ROUNDS = {"cikf": cikf_round, "dikf": dikf_round, "pikf": pikf_round}


def run_distributed(kind: str, problem: Problem, schedule: GainSchedule, observations: list[np.ndarray],
                    order=None) -> np.ndarray:
    """Filtered estimates for all rounds.

    ``observations[n]`` has shape ``(..., T+1, M_n)``; the result has shape
    ``(..., T+1, N, M)``.
    """
    batch = observations[0].shape[:-2]
    T1 = observations[0].shape[-2]
    states, mailbox = init_agents(kind, problem, batch)
    step = ROUNDS[kind]
    out = np.empty((*batch, T1, problem.N, problem.M))
    for i in range(T1):
        states, mailbox = step(states, mailbox, schedule, problem,
                               [o[..., i, :] for o in observations], order=order)
        for n, s in enumerate(states):
            out[..., i, n, :] = s.x_filt
    return out


def run_central(problem: Problem, observations: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Filtered CKF estimates ``(..., T+1, M)`` and filtered covariances ``(T+1, M, M)``."""
    batch = observations[0].shape[:-2]
    T1 = observations[0].shape[-2]
    st = ckf_init(problem.model, batch)
    xs = np.empty((*batch, T1, problem.M))
    Ps = np.empty((T1, problem.M, problem.M))
    for i in range(T1):
        st = ckf_step(st, problem.model, problem.suite, [o[..., i, :] for o in observations])
        xs[..., i, :] = st.x_filt
        Ps[i] = st.P_filt
    return xs, Ps

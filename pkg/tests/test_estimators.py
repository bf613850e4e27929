from pathlib import Path

import numpy as np
import pytest

from conftest import make_problem
from distkf.estimators import (EstimatorError, RoundMailbox, ckf_init, ckf_step, cikf_round,
                               dikf_round, init_agents, pikf_round, run_central, run_distributed)
from distkf.gains import CikfGains, GainConfig, GainSchedule, precompute_schedule
from distkf.model import FieldModel, SensorSuite, simulate_batch
from distkf.pseudo import pseudo_observation
from oracles import scalar_kf

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def sched(pr, kind="cikf", **kw):
    return precompute_schedule(pr.model, pr.suite, pr.network, pr.pseudo, GainConfig(**kw), kind)


def zero_schedule(pr, kind, T=5, beta=0.0):
    N, M = pr.N, pr.M
    return GainSchedule(kind, "static", N, M, T, np.zeros((T + 1, N, M, M)), np.zeros((T + 1, N)),
                        np.zeros((T + 1, N, N, M, M)) if kind == "cikf" else None,
                        np.zeros((T + 1, N, M, M)) if kind == "cikf" else None,
                        beta=None if kind == "cikf" else beta)


# ---- centralized ----------------------------------------------------------

def test_ckf_scalar_riccati_fixed_point():
    model = FieldModel([[1.0]], [[1.0]], [0.0], [[1.0]])
    suite = SensorSuite((np.eye(1),), (np.eye(1),))
    st = ckf_init(model)
    for _ in range(100):
        st = ckf_step(st, model, suite, [np.zeros(1)])
    assert abs(st.P_pred[0, 0] - (1 + np.sqrt(5)) / 2) < 1e-6


def test_ckf_exact_when_noiseless(path3):
    pr = make_problem(path3.model.A, np.zeros((2, 2)), np.zeros((2, 2)), path3.suite.H,
                      path3.suite.R, x0=[0.7, -0.2])
    X, Z = simulate_batch(pr.model, pr.suite, 30, 1, range(4))
    xf, _ = run_central(pr, Z)
    assert np.allclose(xf, X, atol=1e-12)


def test_ckf_measurement_update_contracts_and_matches_information_form(path3):
    st = ckf_init(path3.model)
    z = [np.array([0.3]), np.array([-1.0]), np.array([0.5])]
    for _ in range(4):
        prior_x, prior_P = st.x_pred, st.P_pred
        st = ckf_step(st, path3.model, path3.suite, z)
        assert np.linalg.eigvalsh(prior_P - st.P_filt)[0] >= -1e-12
    info = np.linalg.inv(prior_P) + sum(path3.pseudo.G_local)
    assert np.allclose(st.P_filt, np.linalg.inv(info), atol=1e-12)
    ztil = sum(pseudo_observation(path3.suite, n, z[n]) for n in range(3))
    expect = st.P_filt @ (np.linalg.solve(prior_P, prior_x) + ztil)
    assert np.allclose(st.x_filt, expect, atol=1e-10)


# ---- consensus+innovations ------------------------------------------------

def test_cikf_zero_gains_only_predict(path3):
    s = zero_schedule(path3, "cikf")
    states, mb = init_agents("cikf", path3)
    states = [st.__class__(st.n, st.x_pred + st.n, st.x_filt, st.y_pred - st.n, st.y_filt, st.memory, 0)
              for st in states]
    mb = RoundMailbox(0, tuple(st.y_pred for st in states))
    out, mb2 = cikf_round(states, mb, s, path3, [np.array([9.0])] * 3)
    ps = path3.pseudo
    for a, b in zip(states, out):
        assert np.array_equal(b.y_filt, a.y_pred) and np.array_equal(b.x_filt, a.x_pred)
        assert np.allclose(b.y_pred, ps.A_til @ a.y_pred + ps.A_chk @ a.x_pred)
        assert np.allclose(b.x_pred, path3.model.A @ a.x_pred)
    assert mb2.round == 1


def test_cikf_single_agent_exact_model():
    pr = make_problem([[0.9, 0.1], [0.0, 0.8]], np.zeros((2, 2)), np.zeros((2, 2)),
                      [np.eye(2)], [0.1 * np.eye(2)], x0=[1.0, -2.0])
    s = sched(pr, T=20)
    X = np.empty((21, 2))
    x = pr.model.x0_mean
    for i in range(21):
        X[i] = x
        x = pr.model.A @ x
    Z = [X.copy()]  # noiseless stub: z = H x
    xf = run_distributed("cikf", pr, s, Z)
    assert np.allclose(xf[:, 0], X, atol=1e-12)


def test_round_causality_and_broadcast(path3):
    s = sched(path3, T=10)
    _, Z = simulate_batch(path3.model, path3.suite, 10, 4, range(3))
    states, mb = init_agents("cikf", path3, (3,))
    obs = [z[:, 0] for z in Z]
    out, nxt = cikf_round(states, mb, s, path3, obs)
    assert len(nxt.payload) == 3 and all(p.shape == (3, 2) for p in nxt.payload)
    with pytest.raises(EstimatorError):
        cikf_round(out, mb, s, path3, obs)  # stale mailbox
    with pytest.raises(EstimatorError):
        dikf_round(out, nxt, s, path3, obs)  # wrong schedule kind


@pytest.mark.parametrize("kind", ["cikf", "dikf", "pikf"])
def test_agent_order_does_not_matter(path3, kind):
    s = sched(path3, kind, T=25)
    _, Z = simulate_batch(path3.model, path3.suite, 25, 12, range(5))
    a = run_distributed(kind, path3, s, Z)
    b = run_distributed(kind, path3, s, Z, order=[2, 0, 1])
    assert a.tobytes() == b.tobytes()


# ---- tracker variants -----------------------------------------------------

def test_dikf_complete_graph_one_step_average():
    M, N = 2, 4
    pr = make_problem(np.eye(M), np.zeros((M, M)), np.eye(M),
                      [np.eye(M)[[n % M]] for n in range(N)], [[[0.5 + n]] for n in range(N)],
                      graph="complete")
    s = zero_schedule(pr, "dikf", beta=1.0 / N)
    z = [np.array([1.0 + n]) for n in range(N)]  # static observations
    states, mb = init_agents("dikf", pr)
    for _ in range(2):
        states, mb = dikf_round(states, mb, s, pr, z)
    avg = sum(pseudo_observation(pr.suite, n, z[n]) for n in range(N)) / N
    for st in states:
        assert np.allclose(st.y_filt, avg)


@pytest.mark.parametrize("kind", ["dikf", "pikf"])
def test_tracker_frozen_with_zero_gains(path3, kind):
    s = zero_schedule(path3, kind, T=8, beta=0.0)
    _, Z = simulate_batch(path3.model, path3.suite, 8, 2, range(2))
    xf = run_distributed(kind, path3, s, Z)
    expect = np.stack([np.linalg.matrix_power(path3.model.A, i) @ path3.model.x0_mean for i in range(9)])
    assert np.allclose(xf, expect[None, :, None, :])


def test_pikf_tracks_average_pseudo_innovation():
    # K = 0 and A = I freeze the estimate, so every pseudo-innovation is static
    M, N = 2, 5
    pr = make_problem(np.eye(M), np.zeros((M, M)), np.eye(M),
                      [np.eye(M)[[n % M]] for n in range(N)], [[[1.0 + 0.2 * n]] for n in range(N)],
                      graph="cycle", x0=[0.5, -1.0])
    s = zero_schedule(pr, "pikf", T=200, beta=0.3)
    z = [np.array([2.0 - n]) for n in range(N)]
    target = sum(pseudo_observation(pr.suite, n, z[n]) - pr.pseudo.G_local[n] @ pr.model.x0_mean
                 for n in range(N)) / N
    states, mb = init_agents("pikf", pr)
    for _ in range(200):
        states, mb = pikf_round(states, mb, s, pr, z)
    for st in states:
        assert np.allclose(st.y_filt, target, atol=1e-10)


def test_pikf_perfect_prior_no_change(zero_rng):
    pr = make_problem(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), [np.eye(2)] * 2,
                      [np.eye(2)] * 2, x0=[1.0, 2.0])
    s = sched(pr, "pikf", T=3)
    Z = [np.tile([1.0, 2.0], (4, 1))] * 2
    xf = run_distributed("pikf", pr, s, Z)
    assert np.allclose(xf, [1.0, 2.0])


def test_pikf_single_agent_equals_kalman():
    a, v, h, r, p0 = 0.9, 0.5, 2.0, 0.3, 1.5
    pr = make_problem([[a]], [[v]], [[p0]], [[[h]]], [[[r]]], x0=[0.4])
    s = sched(pr, "pikf", T=30)
    _, Z = simulate_batch(pr.model, pr.suite, 30, 8, range(1))
    xf = run_distributed("pikf", pr, s, Z)[0, :, 0, 0]
    xk, pk = scalar_kf(a, v, h, r, p0, 0.4, Z[0][0, :, 0])
    assert np.allclose(xf, xk, atol=1e-10)
    # second moments include the squared mean 0.4^2 only through the error,
    # which is zero-mean here, so predicted MSE equals the KF variance
    assert np.allclose(s.predicted_mse[:, 0], pk, atol=1e-10)


@pytest.mark.parametrize("kind", ["dikf", "pikf"])
def test_tracker_predicted_matches_empirical(path3, kind):
    s = sched(path3, kind, T=20)
    X, Z = simulate_batch(path3.model, path3.suite, 20, 31, range(6000))
    xf = run_distributed(kind, path3, s, Z)
    emp = ((X[:, :, None, :] - xf) ** 2).sum(-1).mean(0)
    assert np.allclose(emp[[5, 20]], s.predicted_mse[[5, 20]], rtol=0.06)


@pytest.mark.xfail(strict=True, reason="with the reconstructed tracker recursions the "
                   "pseudo-innovation variant is the better one on the default scenario")
def test_default_scenario_pikf_worse_than_dikf():
    from distkf.harness import load_config, run
    cfg = load_config(CONFIGS / "default.toml")
    cfg = cfg.__class__.from_dict({**cfg.to_dict(), "trials": 500, "T": 100,
                                   "estimators": ["dikf", "pikf"], "record_times": [100]})
    rep = run(cfg, threads=4)
    assert rep.results["pikf"].mse_avg[-1] > rep.results["dikf"].mse_avg[-1]

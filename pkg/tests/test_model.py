import numpy as np
import pytest

from distkf.model import (FieldModel, ModelError, RngStream, SensorSuite, observe,
                          simulate_batch, simulate_truth, step_field)


def scalar_model(a, v, s0=1.0, x0=0.0):
    return FieldModel([[a]], [[v]], [x0], [[s0]])


def test_step_field_examples(zero_rng):
    m = FieldModel(np.eye(2), np.zeros((2, 2)), np.zeros(2), np.eye(2))
    assert np.array_equal(step_field(m, [1.0, 2.0], RngStream(1)), [1.0, 2.0])
    m0 = FieldModel(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros(2), np.eye(2))
    assert np.array_equal(step_field(m0, [5.0, -3.0], RngStream(1)), [0.0, 0.0])
    with pytest.raises(ModelError):
        step_field(m, [1.0], RngStream(1))


def test_stationary_variance_matches_lyapunov():
    # sigma^2 = a^2 sigma^2 + q  =>  sigma^2 = 1 / (1 - 0.25) = 4/3
    m = scalar_model(0.5, 1.0)
    rng = RngStream(11, 0, "lyap")
    x = np.zeros(1)
    xs = np.empty(100_000)
    for k in range(xs.size):
        x = step_field(m, x, rng)
        xs[k] = x[0]
    assert abs(xs[100:].var() / (4 / 3) - 1) < 0.03


def test_observe_examples(zero_rng):
    suite = SensorSuite((np.eye(2),), (1e-6 * np.eye(2),))
    assert np.array_equal(observe(suite, 0, [3.0, 7.0], zero_rng), [3.0, 7.0])
    suite = SensorSuite((np.array([[1.0, 0.0]]),), (np.eye(1),))
    assert np.array_equal(observe(suite, 0, [3.0, 7.0], zero_rng), [3.0])
    with pytest.raises(ModelError):
        observe(suite, 1, [3.0, 7.0], zero_rng)


def test_observe_monte_carlo_mean():
    suite = SensorSuite((np.array([[1.0, 2.0]]),), (np.array([[4.0]]),))
    rng = RngStream(5, 0, "obs")
    x = np.array([1.0, -0.5])
    z = np.array([observe(suite, 0, x, rng)[0] for _ in range(100_000)])
    assert abs(z.mean() - 0.0) < 4 * 2.0 / np.sqrt(z.size)


def test_sensor_suite_validation():
    with pytest.raises(ModelError):
        SensorSuite((np.eye(2),), (np.zeros((2, 2)),))
    with pytest.raises(ModelError):
        SensorSuite((np.ones((3, 2)),), (np.eye(3),))
    with pytest.raises(ModelError):
        FieldModel(np.eye(2), -np.eye(2), np.zeros(2), np.eye(2))


def test_simulate_truth_boundary():
    m = scalar_model(0.9, 1.0)
    suite = SensorSuite((np.eye(1), np.eye(1)), (np.eye(1), np.eye(1)))
    tr = simulate_truth(m, suite, 0, RngStream(1))
    assert tr.states.shape == (1, 1)
    assert [o.shape for o in tr.observations] == [(1, 1), (1, 1)]


def test_simulate_truth_constant_when_noiseless():
    m = FieldModel(np.eye(2), np.zeros((2, 2)), [1.5, -2.0], np.zeros((2, 2)))
    suite = SensorSuite((np.eye(2),), (np.eye(2),))
    tr = simulate_truth(m, suite, 20, RngStream(3))
    assert np.array_equal(tr.states, np.tile([1.5, -2.0], (21, 1)))


def test_simulate_truth_deterministic():
    m = scalar_model(0.9, 0.5)
    suite = SensorSuite((np.eye(1),), (np.eye(1),))
    a = simulate_truth(m, suite, 30, RngStream(9, 4))
    b = simulate_truth(m, suite, 30, RngStream(9, 4))
    c = simulate_truth(m, suite, 30, RngStream(9, 5))
    assert a.states.tobytes() == b.states.tobytes()
    assert a.observations[0].tobytes() == b.observations[0].tobytes()
    assert a.states.tobytes() != c.states.tobytes()


def test_batch_matches_sequential():
    m = FieldModel(0.9 * np.eye(2), 0.3 * np.eye(2), [1.0, 0.0], np.eye(2))
    suite = SensorSuite((np.array([[1.0, 0.0]]), np.eye(2)), (np.eye(1), 0.5 * np.eye(2)))
    X, Z = simulate_batch(m, suite, 15, 21, [3, 8])
    for b, t in enumerate([3, 8]):
        tr = simulate_truth(m, suite, 15, RngStream(21, t))
        assert np.allclose(X[b], tr.states, rtol=0, atol=1e-12)
        for n in range(2):
            assert np.allclose(Z[n][b], tr.observations[n], rtol=0, atol=1e-12)


def test_noise_independence_and_covariance():
    V = np.array([[2.0, 0.6], [0.6, 1.0]])
    m = FieldModel(np.zeros((2, 2)), V, np.zeros(2), np.zeros((2, 2)))
    suite = SensorSuite((np.eye(2),), (np.array([[1.0, -0.3], [-0.3, 0.5]]),))
    n = 100_000
    X, Z = simulate_batch(m, suite, 1, 17, range(n))
    v = X[:, 1]  # x1 = 0 * x0 + v0
    r = Z[0][:, 0] - X[:, 0]  # x0 is exactly zero here
    cov = np.cov(v.T)
    assert np.linalg.norm(cov - V) / np.linalg.norm(V) < 0.05
    cross = (v - v.mean(0)).T @ (r - r.mean(0)) / n
    # |corr| of independent samples is O(1/sqrt(n)); 5 sigma bound
    corr = cross / np.sqrt(np.outer(np.diag(V), np.diag(suite.R[0])))
    assert np.all(np.abs(corr) < 5 / np.sqrt(n))

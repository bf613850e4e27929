"""Independent reference computations used by the tests."""

import numpy as np


def cikf_moment_mse(problem, schedule):
    """Filtered per-agent field MSE of the consensus+innovations filter under a
    given schedule, computed from second moments of the raw state
    ``[x, yhat_0..yhat_{N-1}, xhat_0..xhat_{N-1}]`` (no error coordinates)."""
    model, ps, net = problem.model, problem.pseudo, problem.network
    N, M = problem.N, problem.M
    D = M + 2 * N * M
    x = slice(0, M)

    def y(n):
        return slice(M + n * M, M + (n + 1) * M)

    def xh(n):
        return slice(M + N * M + n * M, M + N * M + (n + 1) * M)

    mean = np.concatenate([model.x0_mean, np.tile(ps.G @ model.x0_mean, N), np.tile(model.x0_mean, N)])
    cov = np.zeros((D, D))
    cov[x, x] = model.x0_cov
    S = cov + np.outer(mean, mean)
    out = np.zeros((schedule.T + 1, N))
    for i in range(schedule.T + 1):
        g = schedule.gains_at(i)
        # y update with fresh pseudo-observation noise
        F = np.eye(D)
        Gam = np.zeros((D, N * M))
        for n in range(N):
            Bi = g.innovation[n]
            F[y(n), y(n)] -= Bi @ ps.H_til[n]
            F[y(n), xh(n)] -= Bi @ ps.H_chk[n]
            F[y(n), x] += Bi @ ps.G_local[n]
            for l in net.neighbors(n):
                F[y(n), y(l)] += g.consensus[n, l]
                F[y(n), y(n)] -= g.consensus[n, l]
            Gam[y(n), n * M:(n + 1) * M] = Bi
        Q = np.zeros((N * M, N * M))
        for n in range(N):
            Q[n * M:(n + 1) * M, n * M:(n + 1) * M] = ps.G_local[n]
        S = F @ S @ F.T + Gam @ Q @ Gam.T
        F = np.eye(D)
        for n in range(N):
            K = g.state[n]
            F[xh(n), y(n)] += K
            F[xh(n), xh(n)] -= K @ ps.G
        S = F @ S @ F.T
        for n in range(N):
            E = np.zeros((M, D))
            E[:, x] = np.eye(M)
            E[:, xh(n)] = -np.eye(M)
            out[i, n] = np.trace(E @ S @ E.T)
        F = np.zeros((D, D))
        F[x, x] = model.A
        for n in range(N):
            F[y(n), y(n)] = ps.A_til
            F[y(n), xh(n)] = ps.A_chk
            F[xh(n), xh(n)] = model.A
        Qv = np.zeros((D, D))
        Qv[x, x] = model.V
        S = F @ S @ F.T + Qv
    return out


def scalar_kf(a, v, h, r, p0, x0, zs):
    """Textbook scalar Kalman filter: filtered means and variances."""
    xp, pp = x0, p0
    xs, ps = [], []
    for z in zs:
        k = pp * h / (h * h * pp + r)
        xf = xp + k * (z - h * xp)
        pf = (1 - k * h) * pp
        xs.append(xf)
        ps.append(pf)
        xp, pp = a * xf, a * a * pf + v
    return np.array(xs), np.array(ps)

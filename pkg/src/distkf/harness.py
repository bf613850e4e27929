"""Scenario configuration, Monte-Carlo runs, metrics and report files.

Scenarios are TOML documents. Matrices may be given explicitly (nested
arrays), as a scalar (meaning ``scalar * I``), or through a generator string:

    A = "random_stable(0.95)"   # random orthogonal matrix scaled to spectral radius 0.95
    H = "random_sparse(1)"      # every agent observes 1 field component

``resolve_config`` turns a scenario into its fully explicit form; that form is
written to ``config.echo`` and reproduces the run exactly.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import logging
import math
import re
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .estimators import Problem, run_central, run_distributed
from .gains import (ESTIMATORS, GainConfig, GainError, GainSchedule, beta_warnings,
                    model_hash, precompute_schedule)
from .model import FieldModel, ModelError, RngStream, SensorSuite, simulate_batch
from .network import GraphError, check_connected, from_edges, generate
from .pseudo import build_pseudo_model, observability_rank

log = logging.getLogger(__name__)

ALL_ESTIMATORS = ("ckf",) + ESTIMATORS
RECONSTRUCTED = ("dikf", "pikf")
CHUNK = 250  # trials per work unit; fixed so results do not depend on thread count


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors) if not isinstance(errors, str) else [errors]
        super().__init__("; ".join(self.errors))


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    seed: int = 0
    N: int = 1
    M: int = 1
    T: int = 100
    trials: int = 100
    estimators: list = dc_field(default_factory=lambda: list(ALL_ESTIMATORS))
    record_times: list | None = None
    record_every: int = 10
    graph: dict = dc_field(default_factory=lambda: {"kind": "path"})
    field: dict = dc_field(default_factory=dict)
    sensors: dict = dc_field(default_factory=dict)
    gains: dict = dc_field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError([f"unknown config keys: {sorted(unknown)}"])
        return cls(**copy.deepcopy(d))

    def to_dict(self) -> dict:
        out = {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}
        if out["record_times"] is None:
            del out["record_times"]
        return out

    def resolved_record_times(self) -> list[int]:
        if self.record_times is not None:
            times = sorted({int(t) for t in self.record_times})
        else:
            times = list(range(0, self.T + 1, max(1, int(self.record_every))))
            if times[-1] != self.T:
                times.append(self.T)
        bad = [t for t in times if not 0 <= t <= self.T]
        if bad:
            raise ConfigError([f"record times out of range 0..{self.T}: {bad}"])
        return times

    def gain_config(self, est: str) -> GainConfig:
        g = dict(self.gains.get(est, {}))
        g.setdefault("T", self.T)
        return GainConfig(**g)


def load_config(path) -> ScenarioConfig:
    with open(path, "rb") as fh:
        return ScenarioConfig.from_dict(tomli.load(fh))


def dump_config(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


_GEN = re.compile(r"^\s*(\w+)\s*\(\s*([^)]*)\s*\)\s*$")


def _parse_generator(spec: str):
    m = _GEN.match(spec)
    if not m:
        raise ConfigError([f"cannot parse generator spec {spec!r}"])
    args = [float(a) for a in m.group(2).split(",") if a.strip()]
    return m.group(1), args


def _matrix(value, M: int, what: str) -> np.ndarray:
    if isinstance(value, (int, float)):
        return float(value) * np.eye(M)
    a = np.array(value, dtype=float)
    if a.shape != (M, M):
        raise ConfigError([f"{what} must be {M}x{M}, got shape {a.shape}"])
    return a


def _random_stable(M: int, rho: float, gen) -> np.ndarray:
    Q, R = np.linalg.qr(gen.standard_normal((M, M)))
    Q = Q * np.sign(np.diag(R))
    return rho * Q


def _random_sparse(N: int, M: int, k: int, noise: float, gen):
    if not 1 <= k <= M:
        raise ConfigError([f"random_sparse(k) needs 1 <= k <= M, got k={k}"])
    perm = gen.permutation(M)
    H, R = [], []
    for n in range(N):
        cols = [int(perm[(n * k + j) % M]) for j in range(k)]
        H.append(np.eye(M)[cols])
        R.append(noise * np.eye(k))
    return H, R


def resolve_config(cfg: ScenarioConfig) -> ScenarioConfig:
    """Replace every generator and shorthand by explicit values."""
    errors = []
    N, M = int(cfg.N), int(cfg.M)
    if N < 1 or M < 1:
        raise ConfigError([f"N and M must be positive (N={N}, M={M})"])
    for est in cfg.estimators:
        if est not in ALL_ESTIMATORS:
            errors.append(f"unknown estimator {est!r}")
    for est in cfg.gains:
        if est not in ESTIMATORS:
            errors.append(f"gain config for unknown estimator {est!r}")
    if cfg.T < 0 or cfg.trials < 1:
        errors.append("need T >= 0 and trials >= 1")
    if errors:
        raise ConfigError(errors)
    out = ScenarioConfig.from_dict(cfg.to_dict())
    out.record_times = cfg.resolved_record_times()

    g = dict(cfg.graph)
    kind = g.pop("kind", "path")
    if kind != "edges":
        try:
            net = generate(kind, N, RngStream(cfg.seed, 0, "scenario:graph"), **g)
        except (GraphError, TypeError) as exc:
            raise ConfigError([f"graph: {exc}"]) from None
        out.graph = {"kind": "edges", "edges": [list(e) for e in sorted(net.edges)]}

    f = dict(cfg.field)
    A = f.get("A", 1.0)
    if isinstance(A, str):
        name, args = _parse_generator(A)
        if name != "random_stable" or len(args) != 1:
            raise ConfigError([f"unsupported field generator {A!r}"])
        A = _random_stable(M, args[0], RngStream(cfg.seed, 0, "scenario:A").generator)
    x0 = f.get("x0_mean", 0.0)
    x0 = np.full(M, float(x0)) if isinstance(x0, (int, float)) else np.array(x0, dtype=float)
    out.field = {
        "A": _matrix(A, M, "A").tolist(),
        "V": _matrix(f.get("V", 0.0), M, "V").tolist(),
        "x0_mean": x0.tolist(),
        "x0_cov": _matrix(f.get("x0_cov", 1.0), M, "x0_cov").tolist(),
    }

    s = dict(cfg.sensors)
    H, R = s.get("H", "random_sparse(1)"), s.get("R", 1.0)
    if isinstance(H, str):
        name, args = _parse_generator(H)
        if name != "random_sparse" or len(args) != 1:
            raise ConfigError([f"unsupported sensor generator {H!r}"])
        if not isinstance(R, (int, float)):
            raise ConfigError(["random_sparse sensors take a scalar noise variance R"])
        H, R = _random_sparse(N, M, int(args[0]), float(R),
                              RngStream(cfg.seed, 0, "scenario:sensors").generator)
    else:
        if len(H) != N:
            raise ConfigError([f"sensors.H lists {len(H)} agents, expected N={N}"])
        H = [np.atleast_2d(np.array(h, dtype=float)) for h in H]
        if isinstance(R, (int, float)):
            R = [float(R) * np.eye(h.shape[0]) for h in H]
        else:
            if len(R) != N:
                raise ConfigError([f"sensors.R lists {len(R)} agents, expected N={N}"])
            R = [np.atleast_2d(np.array(r, dtype=float)) for r in R]
    out.sensors = {"H": [h.tolist() for h in H], "R": [r.tolist() for r in R]}

    gains = {}
    for est in [e for e in cfg.estimators if e in ESTIMATORS]:
        gc = cfg.gain_config(est)
        gains[est] = {"mode": gc.mode, "alpha": gc.alpha, "kappa": gc.kappa, "T": gc.T,
                      "ceiling_factor": gc.ceiling_factor}
        if gc.beta is not None:
            gains[est]["beta"] = gc.beta
    out.gains = gains
    return out


# ---------------------------------------------------------------------------
# validation


@dataclass
class Scenario:
    config: ScenarioConfig  # resolved
    problem: Problem
    warnings: list[str]

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(dump_config(self.config).encode()).hexdigest()


def validate(cfg: ScenarioConfig) -> Scenario:
    """Resolve and instantiate a scenario.

    Raises :class:`ConfigError` listing every fatal problem (disconnected
    graph, non-positive-definite noise, inconsistent shapes). Non-fatal
    assumption violations come back as ``Scenario.warnings``.
    """
    rc = resolve_config(cfg)
    errors, warns = [], []
    net = model = suite = None
    try:
        net = from_edges(rc.N, rc.graph["edges"])
        ok, lam2 = check_connected(net)
        if not ok:
            errors.append(f"graph not connected (λ₂={lam2:.3g})")
    except GraphError as exc:
        errors.append(f"graph: {exc}")
    try:
        f = rc.field
        model = FieldModel(np.array(f["A"]), np.array(f["V"]), np.array(f["x0_mean"]), np.array(f["x0_cov"]))
    except (ModelError, ValueError) as exc:
        errors.append(f"field: {exc}")
    try:
        suite = SensorSuite(tuple(np.array(h) for h in rc.sensors["H"]),
                            tuple(np.array(r) for r in rc.sensors["R"]))
    except (ModelError, ValueError) as exc:
        errors.append(f"sensors: {exc}")
    if model is not None and suite is not None and model.M != suite.M:
        errors.append(f"field dimension {model.M} != sensor dimension {suite.M}")
    if errors:
        raise ConfigError(errors)

    pseudo = build_pseudo_model(model, suite)
    if not pseudo.g_invertible():
        warns.append("field not instantaneously globally observable (G singular)")
    rank = observability_rank(model, suite)
    if rank < model.M:
        warns.append(f"(A, H) observability rank {rank} < M={model.M}")
    rho = float(np.max(np.abs(np.linalg.eigvals(model.A))))
    if rho > 1.0:
        warns.append(f"field matrix is unstable (spectral radius {rho:.4g})")
    for est, g in rc.gains.items():
        if est != "cikf" or g["mode"] == "static":
            beta = rc.gain_config(est).resolved_beta(net)
            warns.extend(f"{est}: {w}" for w in beta_warnings(beta, net))
    return Scenario(rc, Problem(model, suite, net, pseudo), warns)


# ---------------------------------------------------------------------------
# running


def mse_db(mse: float) -> float | None:
    """``10 log10(mse)``; ``None`` for nonpositive input."""
    if mse is None or not mse > 0 or not math.isfinite(mse):
        return None
    return 10.0 * math.log10(mse)


@dataclass
class EstimatorResult:
    name: str
    mse_agent: np.ndarray  # (R, N)
    stderr_agent: np.ndarray  # (R, N)
    bias: np.ndarray  # (R, N, M)
    bias_stderr: np.ndarray  # (R, N, M)
    trial_mse: np.ndarray  # (trials, R) network-average squared error per trial
    predicted_mse: np.ndarray | None = None  # (R, N)

    @property
    def mse_avg(self) -> np.ndarray:
        return self.mse_agent.mean(axis=1)

    @property
    def stderr_avg(self) -> np.ndarray:
        n = self.trial_mse.shape[0]
        if n < 2:
            return np.zeros(self.trial_mse.shape[1])
        return self.trial_mse.std(axis=0, ddof=1) / math.sqrt(n)


@dataclass
class RunReport:
    config: ScenarioConfig
    config_hash: str
    record_times: list
    results: dict  # name -> EstimatorResult
    warnings: list
    timings: dict
    paired: bool
    schedule_notes: dict = dc_field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.config.N

    def ordering(self, time_index: int = -1, ckf_slack: float = 0.01, z: float = 2.0) -> dict:
        """Paired comparison of consecutive estimators in ``ckf, cikf, dikf, pikf`` order.

        The centralized filter may exceed another estimator by at most
        ``ckf_slack`` (relative). Each distributed gap must be positive by more
        than ``z`` paired standard errors.
        """
        names = [e for e in ALL_ESTIMATORS if e in self.results]
        checks = []
        for a, b in zip(names, names[1:]):
            ra, rb = self.results[a], self.results[b]
            diff = rb.trial_mse[:, time_index] - ra.trial_mse[:, time_index]
            gap = float(diff.mean())
            se = float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else 0.0
            ma, mb = float(ra.mse_avg[time_index]), float(rb.mse_avg[time_index])
            if a == "ckf":
                ok = ma <= (1.0 + ckf_slack) * mb
            else:
                ok = gap > z * se
            checks.append({"lower": a, "higher": b, "mse_lower": ma, "mse_higher": mb,
                           "gap": gap, "gap_stderr": se, "pass": bool(ok)})
        return {"time": self.record_times[time_index], "checks": checks,
                "pass": all(c["pass"] for c in checks)}


def _work_chunks(trials: int):
    return [range(s, min(trials, s + CHUNK)) for s in range(0, trials, CHUNK)]


def _obs_digest(obs) -> str:
    h = hashlib.sha256()
    for o in obs:
        h.update(np.ascontiguousarray(o).tobytes())
    return h.hexdigest()


def _run_chunk(scn: Scenario, schedules: dict, trials: range, times: np.ndarray):
    cfg, pr = scn.config, scn.problem
    X, Z = simulate_batch(pr.model, pr.suite, cfg.T, cfg.seed, trials)
    out, digests = {}, {}
    for est in cfg.estimators:
        digests[est] = _obs_digest(Z)
        if est == "ckf":
            xf, _ = run_central(pr, Z)
            xf = np.broadcast_to(xf[:, :, None, :], (*xf.shape[:2], pr.N, pr.M))
        else:
            xf = run_distributed(est, pr, schedules[est], Z)
        err = X[:, times, None, :] - xf[:, times]  # (B, R, N, M)
        sq = (err ** 2).sum(axis=-1)  # (B, R, N)
        out[est] = (sq, err.sum(axis=0), (err ** 2).sum(axis=0))
    return out, digests


def build_schedules(scn: Scenario, override: GainSchedule | None = None) -> dict:
    cfg, pr = scn.config, scn.problem
    schedules = {}
    for est in cfg.estimators:
        if est == "ckf":
            continue
        if override is not None and override.estimator == est:
            check_schedule(override, scn)
            schedules[est] = override
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            schedules[est] = precompute_schedule(pr.model, pr.suite, pr.network, pr.pseudo,
                                                 cfg.gain_config(est), est)
    return schedules


def check_schedule(schedule: GainSchedule, scn: Scenario) -> None:
    pr = scn.problem
    h = model_hash(pr.model, pr.suite, pr.network)
    if (schedule.N, schedule.M) != (pr.N, pr.M) or schedule.model_hash != h:
        raise ConfigError([f"schedule ({schedule.N}x{schedule.M}, hash {schedule.model_hash[:12]}) "
                           f"does not match scenario (hash {h[:12]})"])


def run(cfg: ScenarioConfig, threads: int = 1, schedule: GainSchedule | None = None) -> RunReport:
    """Monte-Carlo run of every requested estimator on shared trajectories."""
    t0 = time.perf_counter()
    scn = validate(cfg)
    cfg = scn.config
    times = np.array(cfg.record_times, dtype=int)
    schedules = build_schedules(scn, schedule)
    t1 = time.perf_counter()
    chunks = _work_chunks(cfg.trials)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda c: _run_chunk(scn, schedules, c, times), chunks))
    else:
        parts = [_run_chunk(scn, schedules, c, times) for c in chunks]
    t2 = time.perf_counter()

    paired = all(len(set(d.values())) <= 1 for _, d in parts)
    if not paired:
        raise RuntimeError("estimators saw different observations within a trial chunk")
    n = cfg.trials
    results = {}
    for est in cfg.estimators:
        sq = np.concatenate([p[0][est][0] for p in parts], axis=0)
        s1 = sum(p[0][est][1] for p in parts)
        s2 = sum(p[0][est][2] for p in parts)
        mse_agent = sq.mean(axis=0)
        se_agent = sq.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mse_agent)
        bias = s1 / n
        var = (s2 - n * bias ** 2) / (n - 1) if n > 1 else np.zeros_like(bias)
        bias_se = np.sqrt(np.clip(var, 0.0, None) / n)
        pred = None
        if est in schedules:
            idx = np.minimum(times, schedules[est].T)
            pred = schedules[est].predicted_mse[idx]
        elif est == "ckf":
            pred = np.repeat(_ckf_predicted(scn.problem, cfg.T)[times, None], cfg.N, axis=1)
        results[est] = EstimatorResult(est, mse_agent, se_agent, bias, bias_se, sq.mean(axis=2), pred)
    notes = {k: list(s.notes) for k, s in schedules.items() if s.notes}
    return RunReport(cfg, scn.config_hash, cfg.record_times, results, scn.warnings,
                     {"gains_s": t1 - t0, "monte_carlo_s": t2 - t1}, paired, notes)


def _ckf_predicted(problem: Problem, T: int) -> np.ndarray:
    """Trace of the CKF filtered covariance at each time (same for every trial)."""
    dummy = [np.zeros((T + 1, d)) for d in problem.suite.obs_dims]
    _, Ps = run_central(problem, dummy)
    return np.trace(Ps, axis1=1, axis2=2)


# ---------------------------------------------------------------------------
# output


CSV_HEADER = ["time", "estimator", "agent", "mse", "mse_db", "stderr"]


def _db_text(x) -> str:
    d = mse_db(float(x))
    return "" if d is None else f"{d:.4f}"


def csv_rows(report: RunReport):
    for r, t in enumerate(report.record_times):
        for est in report.config.estimators:
            res = report.results[est]
            for n in range(report.N):
                m = float(res.mse_agent[r, n])
                yield [t, est, n, repr(m), _db_text(m), repr(float(res.stderr_agent[r, n]))]
            m = float(res.mse_avg[r])
            yield [t, est, "avg", repr(m), _db_text(m), repr(float(res.stderr_avg[r]))]


def mse_csv_text(report: RunReport, scenario: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((["scenario"] if scenario is not None else []) + CSV_HEADER)
    for row in csv_rows(report):
        w.writerow(([scenario] if scenario is not None else []) + row)
    return buf.getvalue()


def summary(report: RunReport) -> dict:
    final = {}
    deltas = {}
    for est, res in report.results.items():
        m = float(res.mse_avg[-1])
        final[est] = {"mse": m, "mse_db": mse_db(m), "stderr": float(res.stderr_avg[-1]),
                      "max_abs_bias_z": _max_bias_z(res)}
        if res.predicted_mse is not None:
            p = res.predicted_mse.mean(axis=1)
            rel = np.where(p > 0, res.mse_avg / np.where(p > 0, p, 1.0) - 1.0, np.nan)
            deltas[est] = {str(t): (None if not math.isfinite(v) else float(v))
                           for t, v in zip(report.record_times, rel)}
    return {
        "name": report.config.name,
        "config_hash": report.config_hash,
        "trials": report.config.trials,
        "final_time": report.record_times[-1],
        "final": final,
        "ordering": report.ordering() if len(report.results) > 1 else None,
        "predicted_vs_empirical_rel": deltas,
        "flags": {"reconstructed": [e for e in report.results if e in RECONSTRUCTED],
                  "paired_trials": report.paired},
        "warnings": report.warnings,
        "schedule_notes": report.schedule_notes,
        "timings": report.timings,
    }


def _max_bias_z(res: EstimatorResult) -> float:
    b, s = res.bias[-1], res.bias_stderr[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(s > 0, np.abs(b) / s, np.where(np.abs(b) > 0, np.inf, 0.0))
    return float(np.max(z))


def emit(report: RunReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "mse.csv").write_text(mse_csv_text(report))
    (out / "summary.json").write_text(json.dumps(summary(report), indent=2, default=_json_default) + "\n")
    (out / "config.echo").write_text(dump_config(report.config))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def compare(configs: list, out_dir, threads: int = 1) -> list[RunReport]:
    """Run several scenarios; writes one subdirectory each plus a merged ``mse.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports, merged = [], None
    for i, cfg in enumerate(configs):
        rep = run(cfg, threads=threads)
        label = rep.config.name or f"scenario{i}"
        emit(rep, out / f"{i:02d}_{label}")
        text = mse_csv_text(rep, scenario=label)
        merged = text if merged is None else merged + text.split("\n", 1)[1]
        reports.append(rep)
    (out / "mse.csv").write_text(merged or ",".join(["scenario"] + CSV_HEADER) + "\n")
    return reports


__all__ = [
    "ScenarioConfig", "Scenario", "RunReport", "EstimatorResult", "ConfigError", "GainError",
    "load_config", "dump_config", "resolve_config", "validate", "run", "mse_db", "emit",
    "compare", "build_schedules", "check_schedule",
]

"""Benchmark harness: budget-matched method comparison with CSV records.

For every step budget P in the schedule the harness evaluates the CG-based
estimators at P steps and every inducing-point baseline at the matched
budget M = ceil(sqrt(N P)) (or a fixed M), against the exact GP oracle.
Baselines are repeated with freshly drawn inducing subsets; aggregate rows
carry the mean per step plus the progressive minimum and maximum across
repetitions and budgets.

Randomness is derived from the master seed by a counter scheme,
SeedSequence([master, stream, step, repetition]); the inducing-selection
stream is shared by all methods so that budget-matched methods draw the
same subsets at equal (step, repetition). Records are therefore
deterministic given the master seed and independent of the worker count
(set the KERNELCG_THREADS environment variable to parallelize repetitions).
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import exact, kmcg, lowrank, solvers
from .datasets import Dataset
from .kernels import Kernel, gram

METHODS = ("exact", "cg-textbook", "cg-reorth", "kmcg", "sor", "dtc", "fitc", "vfe", "pbr")
SQRT_NP = "sqrt-np"
FIXED_M = "fixed-m"

CSV_HEADER = "method,step,budget,run,eps_f,eps_var,eps_ev,smse,seconds,effective_p,reason"

# Test points whose exact mean is below this fraction of the largest one are
# excluded from relative errors (the denominator would be meaningless).
RELERR_GUARD = 1e-12

_STREAM_INDUCING = 7


# ---------------------------------------------------------------------------
# Metrics.


def _guarded_relative(exact_values: np.ndarray, approx_values: np.ndarray):
    exact_values = np.asarray(exact_values, dtype=float).reshape(-1)
    approx_values = np.asarray(approx_values, dtype=float).reshape(-1)
    if exact_values.shape != approx_values.shape:
        raise ValueError("exact and approximate vectors differ in length")
    keep = np.abs(exact_values) >= RELERR_GUARD * np.max(np.abs(exact_values))
    excluded = int(np.sum(~keep))
    if not np.any(keep):
        return float("nan"), excluded
    ratio = np.abs((exact_values[keep] - approx_values[keep]) / exact_values[keep])
    return float(np.mean(ratio)), excluded


def metric_relerr(exact_values, approx_values) -> float:
    """Average relative error (1/n) sum |exact - approx| / |exact|.

    Entries with |exact| below RELERR_GUARD times the largest magnitude are
    excluded; use :func:`metric_relerr_detail` to see how many.
    """
    return _guarded_relative(exact_values, approx_values)[0]


def metric_relerr_detail(exact_values, approx_values) -> tuple[float, int]:
    """Relative error together with the number of excluded test points."""
    return _guarded_relative(exact_values, approx_values)


def metric_var_err(exact_var, approx_var) -> float:
    """Average relative error of pointwise predictive variances."""
    return _guarded_relative(exact_var, approx_var)[0]


def metric_ev_err(exact_ev: float, approx_ev: float) -> float:
    """Relative error of the scalar evidence."""
    return abs((float(exact_ev) - float(approx_ev)) / float(exact_ev))


def metric_smse(y_star, pred) -> float:
    """Standardized mean squared error sum_j (y_j - pred_j)^2 / Var[y].

    The sum is not divided by the number of test points and the variance is
    the population variance of the supplied targets, matching the printed
    benchmark convention.
    """
    y_star = np.asarray(y_star, dtype=float).reshape(-1)
    pred = np.asarray(pred, dtype=float).reshape(-1)
    var = float(np.var(y_star))
    return float(np.sum((y_star - pred) ** 2) / var)


# ---------------------------------------------------------------------------
# Configuration and records.


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: Kernel
    sigma2: float
    methods: tuple = METHODS
    steps: tuple = tuple(range(1, 11))
    budget_rule: str = SQRT_NP
    fixed_m: Optional[int] = None
    kmcg_m: Optional[int] = None  # None means M = N
    cg_eps: Optional[float] = None  # None means 0.01 ||b||
    repetitions: int = 10
    master_seed: int = 0
    inducing_cap: int = 500
    output_path: Optional[str] = None

    def __post_init__(self):
        if not (self.sigma2 > 0.0):
            raise ValueError("sigma2 must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not self.steps:
            raise ValueError("the step schedule must be nonempty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; available: {METHODS}")
        if self.budget_rule not in (SQRT_NP, FIXED_M):
            raise ValueError(f"unknown budget rule {self.budget_rule!r}")
        if self.budget_rule == FIXED_M and not self.fixed_m:
            raise ValueError("budget rule fixed-m requires fixed_m")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "steps", tuple(int(p) for p in self.steps))


@dataclass(frozen=True)
class ExperimentRecord:
    method: str
    step: int
    budget: int
    run: str
    eps_f: float
    eps_var: float
    eps_ev: float
    smse: float
    seconds: float
    effective_p: int
    reason: str


def budget_for(config: ExperimentConfig, n: int, step: int) -> int:
    """Inducing budget matched to `step` CG iterations."""
    if config.budget_rule == FIXED_M:
        m = config.fixed_m
    else:
        m = math.ceil(math.sqrt(n * step))
    return max(1, min(m, config.inducing_cap, n))


def _inducing_seed(config: ExperimentConfig, step: int, rep: int) -> np.random.Generator:
    seq = np.random.SeedSequence([int(config.master_seed), _STREAM_INDUCING, int(step), int(rep)])
    return np.random.default_rng(seq)


# ---------------------------------------------------------------------------
# The runner.


@dataclass(frozen=True)
class _Oracle:
    mean: np.ndarray
    var: np.ndarray
    evidence: float
    smse: float
    seconds: float


def _fit_oracle(config: ExperimentConfig, data: Dataset) -> _Oracle:
    start = time.perf_counter()
    model = exact.fit(config.kernel, data.X, data.y, config.sigma2)
    mean = exact.predict_mean(model, data.X_star)
    var = exact.predict_var(model, data.X_star)
    evidence = exact.log_evidence(model)
    seconds = time.perf_counter() - start
    return _Oracle(mean=mean, var=var, evidence=evidence,
                   smse=metric_smse(data.y_star, mean), seconds=seconds)


def _record(method, step, budget, run, oracle, mean, var, evidence, y_star, seconds,
            effective_p, reason) -> ExperimentRecord:
    return ExperimentRecord(
        method=method, step=step, budget=budget, run=run,
        eps_f=metric_relerr(oracle.mean, mean),
        eps_var=float("nan") if var is None else metric_var_err(oracle.var, var),
        eps_ev=float("nan") if evidence is None else metric_ev_err(oracle.evidence, evidence),
        smse=metric_smse(y_star, mean),
        seconds=seconds, effective_p=effective_p, reason=reason,
    )


def _failure(method, step, budget, run, error) -> ExperimentRecord:
    nan = float("nan")
    return ExperimentRecord(method=method, step=step, budget=budget, run=run,
                            eps_f=nan, eps_var=nan, eps_ev=nan, smse=nan,
                            seconds=0.0, effective_p=0,
                            reason=f"error: {type(error).__name__}: {error}")


def _run_kmcg(config, data, oracle) -> list[ExperimentRecord]:
    n = data.n_train
    m = n if config.kmcg_m is None else min(config.kmcg_m, n)
    records = []
    if m == n:
        # One CG trace serves every step budget.
        try:
            start = time.perf_counter()
            models = kmcg.kmcg_models_for_steps(
                config.kernel, data.X, data.y, config.sigma2,
                steps=config.steps, M=m, eps=config.cg_eps, seed=0,
            )
            shared_seconds = time.perf_counter() - start
        except Exception as error:
            return [_failure("kmcg", step, m, "0", error) for step in config.steps]
        for step in config.steps:
            model = models[step]
            try:
                start = time.perf_counter()
                mean = kmcg.kmcg_mean(model, data.X_star)
                var = np.diag(kmcg.kmcg_var(model, data.X_star))
                evidence = kmcg.kmcg_evidence(model)
                seconds = shared_seconds / len(config.steps) + (time.perf_counter() - start)
                records.append(_record("kmcg", step, m, "0", oracle, mean, var, evidence,
                                       data.y_star, seconds, model.steps, model.reason))
            except Exception as error:
                records.append(_failure("kmcg", step, m, "0", error))
        return records
    for step in config.steps:
        rng = _inducing_seed(config, step, 0)
        try:
            start = time.perf_counter()
            model = kmcg.kmcg_fit(config.kernel, data.X, data.y, config.sigma2,
                                  M=m, eps=config.cg_eps, max_steps=step, seed=rng)
            mean = kmcg.kmcg_mean(model, data.X_star)
            var = np.diag(kmcg.kmcg_var(model, data.X_star))
            evidence = kmcg.kmcg_evidence(model)
            seconds = time.perf_counter() - start
            records.append(_record("kmcg", step, m, "0", oracle, mean, var, evidence,
                                   data.y_star, seconds, model.steps, model.reason))
        except Exception as error:  # recorded, never aborts other methods
            records.append(_failure("kmcg", step, m, "0", error))
    return records


def _run_cg(config, data, oracle, method) -> list[ExperimentRecord]:
    n = data.n_train
    try:
        K = gram(config.kernel, data.X) + config.sigma2 * np.eye(n)
        op = solvers.dense_operator(K)
        eps = solvers.default_cg_tolerance(data.y) if config.cg_eps is None else config.cg_eps
        run = solvers.cg_textbook if method == "cg-textbook" else solvers.cg_reorth
        start = time.perf_counter()
        trace = run(op, data.y, eps=eps, max_steps=max(config.steps))
        trace_seconds = time.perf_counter() - start
    except Exception as error:
        return [_failure(method, step, n, "0", error) for step in config.steps]
    K_star = gram(config.kernel, data.X_star, data.X)
    records = []
    for step in config.steps:
        p = min(step, trace.steps)
        try:
            start = time.perf_counter()
            x_hat = solvers.fom_solution(trace.S[:, :p], trace.Z[:, :p], data.y)
            mean = K_star @ x_hat
            seconds = trace_seconds / len(config.steps) + (time.perf_counter() - start)
            records.append(_record(method, step, n, "0", oracle, mean, None, None,
                                   data.y_star, seconds, p, trace.reason))
        except Exception as error:
            records.append(_failure(method, step, n, "0", error))
    return records


def _baseline_once(config, data, oracle, method, step, rep, pbr_expansion):
    n = data.n_train
    m = budget_for(config, n, step)
    run = str(rep)
    try:
        start = time.perf_counter()
        if method == "pbr":
            expansion = lowrank.truncate_expansion(pbr_expansion, min(m, pbr_expansion.eigenvalues.size))
            mean = lowrank.pbr_predict(expansion, data.X, data.y, config.sigma2, data.X_star)
            seconds = time.perf_counter() - start
            return _record(method, step, m, run, oracle, mean, None, None,
                           data.y_star, seconds, 0, "ok")
        idx = lowrank.choose_inducing(n, m, _inducing_seed(config, step, rep))
        X_U = data.X[idx]
        if method == "sor":
            model = lowrank.lowrank_fit(lowrank.sor_expansion(config.kernel, X_U),
                                        data.X, data.y, config.sigma2)
            mean = lowrank.lowrank_mean(model, data.X_star)
            var = np.diag(lowrank.lowrank_var(model, data.X_star))
            evidence = lowrank.lowrank_evidence(model)
        elif method == "dtc":
            mean, cov, evidence = lowrank.dtc_predict(config.kernel, data.X, data.y,
                                                      config.sigma2, X_U, data.X_star)
            var = np.diag(cov)
        elif method == "fitc":
            mean, cov, evidence = lowrank.fitc_predict(config.kernel, data.X, data.y,
                                                       config.sigma2, X_U, data.X_star)
            var = np.diag(cov)
        elif method == "vfe":
            mean, cov, evidence = lowrank.vfe_predict(config.kernel, data.X, data.y,
                                                      config.sigma2, X_U, data.X_star)
            var = np.diag(cov)
        else:
            raise ValueError(f"unknown baseline {method}")
        seconds = time.perf_counter() - start
        return _record(method, step, m, run, oracle, mean, var, evidence,
                       data.y_star, seconds, 0, "ok")
    except Exception as error:
        return _failure(method, step, m, run, error)


def _aggregate(records: list[ExperimentRecord], steps) -> list[ExperimentRecord]:
    """Mean per step plus progressive min/max across repetitions and budgets."""
    out = []
    by_step = {step: [r for r in records if r.step == step] for step in steps}
    metrics = ("eps_f", "eps_var", "eps_ev", "smse")
    running_min = {m: float("inf") for m in metrics}
    running_max = {m: -float("inf") for m in metrics}
    for step in sorted(steps):
        rows = by_step[step]
        if not rows:
            continue
        template = rows[0]
        values = {m: np.asarray([getattr(r, m) for r in rows]) for m in metrics}
        mean_row = {m: float(np.nanmean(v)) if np.any(np.isfinite(v)) else float("nan")
                    for m, v in values.items()}
        for m, v in values.items():
            finite = v[np.isfinite(v)]
            if finite.size:
                running_min[m] = min(running_min[m], float(np.min(finite)))
                running_max[m] = max(running_max[m], float(np.max(finite)))
        for run, source in (("mean", mean_row), ("min", running_min), ("max", running_max)):
            vals = {m: (source[m] if np.isfinite(source[m]) else float("nan")) for m in metrics}
            out.append(ExperimentRecord(
                method=template.method, step=step, budget=template.budget, run=run,
                eps_f=vals["eps_f"], eps_var=vals["eps_var"], eps_ev=vals["eps_ev"],
                smse=vals["smse"], seconds=float(np.sum([r.seconds for r in rows])),
                effective_p=template.effective_p, reason="aggregate",
            ))
    return out


def run_experiment(config: ExperimentConfig, data: Dataset) -> list[ExperimentRecord]:
    """Run every configured method over the step schedule; see module docs.

    Per-method failures are recorded in the reason column and never abort
    the other methods. Returns individual records followed by aggregate
    rows per baseline method.
    """
    oracle = _fit_oracle(config, data)
    records: list[ExperimentRecord] = []
    n = data.n_train

    if "exact" in config.methods:
        records.append(ExperimentRecord(
            method="exact", step=0, budget=n, run="0",
            eps_f=0.0, eps_var=0.0, eps_ev=0.0, smse=oracle.smse,
            seconds=oracle.seconds, effective_p=0, reason="ok",
        ))
    if "kmcg" in config.methods:
        records.extend(_run_kmcg(config, data, oracle))
    for method in ("cg-reorth", "cg-textbook"):
        if method in config.methods:
            records.extend(_run_cg(config, data, oracle, method))

    baselines = [m for m in ("sor", "dtc", "fitc", "vfe", "pbr") if m in config.methods]
    pbr_expansion = None
    if "pbr" in baselines:
        try:
            max_rank = max(budget_for(config, n, step) for step in config.steps)
            means = data.X.mean(axis=0)
            sds = np.maximum(data.X.std(axis=0), 1e-8)
            pbr_expansion = lowrank.se_eigen_expansion(config.kernel, means, sds, max_rank)
        except Exception as error:
            for step in config.steps:
                records.append(_failure("pbr", step, budget_for(config, n, step), "0", error))
            baselines = [m for m in baselines if m != "pbr"]

    workers = int(os.environ.get("KERNELCG_THREADS", "1"))
    for method in baselines:
        reps = 1 if method == "pbr" else config.repetitions  # pbr is deterministic
        tasks = [(step, rep) for step in config.steps for rep in range(reps)]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(
                    lambda t: _baseline_once(config, data, oracle, method, t[0], t[1], pbr_expansion),
                    tasks,
                ))
        else:
            rows = [_baseline_once(config, data, oracle, method, step, rep, pbr_expansion)
                    for step, rep in tasks]
        rows.sort(key=lambda r: (r.step, int(r.run)))
        records.extend(rows)
        if reps > 1:
            records.extend(_aggregate(rows, config.steps))
    return records


# ---------------------------------------------------------------------------
# CSV emission.


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def emit_csv(records, path) -> None:
    """Write records with the fixed column order of CSV_HEADER."""
    with open(path, "w", newline="") as handle:
        handle.write(CSV_HEADER + "\n")
        writer = csv.writer(handle)
        for r in records:
            writer.writerow([
                r.method, r.step, r.budget, r.run,
                _fmt(r.eps_f), _fmt(r.eps_var), _fmt(r.eps_ev), _fmt(r.smse),
                _fmt(r.seconds), r.effective_p, r.reason,
            ])


def read_records_csv(path) -> list[ExperimentRecord]:
    """Read back a records CSV written by :func:`emit_csv`."""
    out = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if ",".join(header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            if not row:
                continue
            out.append(ExperimentRecord(
                method=row[0], step=int(row[1]), budget=int(row[2]), run=row[3],
                eps_f=float(row[4]), eps_var=float(row[5]), eps_ev=float(row[6]),
                smse=float(row[7]), seconds=float(row[8]), effective_p=int(row[9]),
                reason=row[10],
            ))
    return out

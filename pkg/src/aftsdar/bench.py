"""Accuracy metrics, brute-force theory diagnostics and the replication runner."""
import math
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import _kernels
from .asdar import Criterion, TuningConfig, asdar_path
from .errors import AftSdarError, DiagnosticsInfeasibleError, UndefinedMetricError
from .sdar import SdarConfig, sdar_fit
from .simgen import gen_instance
from .survival_data import prepare_design

MAX_SUBSETS = 10**6
SUPPORT_TOL = 1e-12


def relative_error(beta_hat, beta_star):
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    beta_star = np.asarray(beta_star, dtype=np.float64)
    denom = np.linalg.norm(beta_star)
    if denom == 0:
        raise UndefinedMetricError("relative error is undefined for beta_star = 0")
    return float(np.linalg.norm(beta_hat - beta_star) / denom)


def exact_support_recovery(beta_hat, true_support):
    found = np.flatnonzero(np.abs(np.asarray(beta_hat)) > SUPPORT_TOL)
    return set(found.tolist()) == {int(j) for j in true_support}


@dataclass
class FitMetrics:
    relative_error: float
    exact_support_recovery: bool
    iterations: int
    wall_time_seconds: float


@dataclass
class TheoryDiagnostics:
    sigma_min_2T: float
    U_bound: float
    L_bound: float
    xi: float
    r_ratio: float
    step_size_ok: bool
    identifiable: bool
    worst_subset: list

    @property
    def certified(self):
        return self.step_size_ok and self.identifiable


def theory_diagnostics(design, T, tau, K, beta_star=None, max_subsets=MAX_SUBSETS):
    """Constants of the finite-step error bound, with the sparse eigenvalue brute-forced.

    ``sigma_min_2T`` is the smallest eigenvalue over every ``2T``-column Gram
    submatrix of ``Xbar``; ``U = ||Xbar||_2^2 / n``; ``L = sigma_min_2T / (n sqrt(2T))``.
    """
    n, p = design.n, design.p
    k = 2 * int(T)
    if k > p:
        raise DiagnosticsInfeasibleError(f"2T={k} exceeds the number of columns p={p}")
    n_subsets = math.comb(p, k)
    if n_subsets > max_subsets:
        raise DiagnosticsInfeasibleError(
            f"C({p}, {k}) = {n_subsets} subsets exceeds the brute-force limit {max_subsets}; "
            "use a smaller p or T")
    gram = design.Xbar.T @ design.Xbar
    sigma_min, worst = _kernels.min_subset_eig(gram, k)
    U = float(np.linalg.eigvalsh(gram)[-1]) / n
    L = sigma_min / (n * math.sqrt(k))
    root_t = math.sqrt(T)
    xi = 1.0 - 2.0 * tau * L * (1.0 - tau * root_t * U) / (root_t * (1.0 + K))
    r_ratio = float("nan")
    if beta_star is not None:
        nz = np.abs(np.asarray(beta_star)[np.flatnonzero(beta_star)])
        if nz.size:
            r_ratio = float(nz.max() / nz.min())
    return TheoryDiagnostics(
        sigma_min_2T=sigma_min,
        U_bound=U,
        L_bound=L,
        xi=xi,
        r_ratio=r_ratio,
        step_size_ok=bool(tau < 1.0 / (root_t * U)),
        identifiable=bool(sigma_min > 1e-10 * n),
        worst_subset=worst.tolist(),
    )


@dataclass(frozen=True)
class SdarMethod:
    T: int = None     # None: use the scenario's K
    tau: float = 1.0
    max_iter: int = 50

    name = "SDAR"

    def describe(self):
        return {"name": self.name, **asdict(self)}


@dataclass(frozen=True)
class AsdarMethod:
    criterion: Criterion = Criterion.HBIC
    tau: float = 1.0
    step: int = 1
    alpha: float = 1.0
    epsilon: float = None   # None with ResidualStop: sqrt(n) * sigma
    folds: int = 5
    max_iter: int = 50

    name = "ASDAR"

    def describe(self):
        d = {"name": self.name, **asdict(self)}
        d["criterion"] = Criterion(self.criterion).value
        return d


@dataclass
class ExperimentReport:
    scenario: dict
    method: dict
    replications: int
    seed: int
    rows: list
    aggregates: dict
    failures: int = 0

    def to_dict(self, timing=False):
        """Plain-data view. Wall times are left out unless ``timing`` is set."""
        rows = []
        for r in self.rows:
            r = dict(r)
            if not timing:
                r.pop("wall_time_seconds", None)
            rows.append(r)
        agg = {k: v for k, v in self.aggregates.items() if timing or k != "wall_time_seconds"}
        return {
            "scenario": self.scenario,
            "method": self.method,
            "replications": self.replications,
            "seed": self.seed,
            "failures": self.failures,
            "aggregates": agg,
            "rows": rows,
        }


AGGREGATED = ("relative_error", "exact_support_recovery", "iterations", "wall_time_seconds")


def replication_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0] >> 1)


def _fit_once(design, scenario, method):
    if isinstance(method, SdarMethod):
        T = scenario.K if method.T is None else method.T
        t0 = time.perf_counter()
        fit = sdar_fit(design, SdarConfig(T=T, tau=method.tau, max_iter=method.max_iter))
        elapsed = time.perf_counter() - t0
        return fit, elapsed, {"T": T, "path_iterations": fit.iterations}
    eps = method.epsilon
    if Criterion(method.criterion) is Criterion.RESIDUAL_STOP and eps is None:
        eps = math.sqrt(design.n) * scenario.sigma
    config = TuningConfig(step=method.step, alpha=method.alpha, tau=method.tau,
                          criterion=method.criterion, epsilon=eps, folds=method.folds,
                          seed=scenario.seed, max_iter=method.max_iter)
    t0 = time.perf_counter()
    path = asdar_path(design, config)
    elapsed = time.perf_counter() - t0
    extra = {"T": path.T_hat, "path_iterations": sum(e.fit.iterations for e in path.entries)}
    return path.best.fit, elapsed, extra


def run_replication(scenario, method, index, seed):
    spec = replace(scenario, seed=replication_seed(seed, index))
    row = {"replication": index, "seed": spec.seed}
    try:
        inst = gen_instance(spec)
        design = prepare_design(inst.dataset)
        fit, elapsed, extra = _fit_once(design, spec, method)
        diffs = np.diff(fit.loss_trace)
        row.update(
            relative_error=relative_error(fit.beta_hat, inst.beta_star),
            exact_support_recovery=exact_support_recovery(fit.beta_hat, inst.true_support),
            iterations=fit.iterations,
            wall_time_seconds=elapsed,
            termination=fit.termination.value,
            kkt_gap=fit.kkt_gap,
            loss_non_increasing=bool(np.all(diffs <= 1e-12 * max(1.0, fit.loss_trace[0]))),
            realized_censor_rate=inst.realized_censor_rate,
            error=None,
            **extra,
        )
    except (AftSdarError, np.linalg.LinAlgError) as exc:
        row.update(relative_error=float("nan"), exact_support_recovery=False,
                   iterations=0, wall_time_seconds=float("nan"), termination=None,
                   kkt_gap=float("nan"), loss_non_increasing=False,
                   realized_censor_rate=float("nan"), error=f"{type(exc).__name__}: {exc}",
                   T=None, path_iterations=0)
    return row


def aggregate(rows):
    ok = [r for r in rows if r["error"] is None]
    out = {}
    for key in AGGREGATED:
        vals = np.array([float(r[key]) for r in ok])
        if vals.size == 0:
            out[key] = {"mean": float("nan"), "sd": float("nan")}
            continue
        out[key] = {
            "mean": float(vals.mean()),
            "sd": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
        }
    return out


def run_experiment(scenario, replications, method, seed, n_jobs=1):
    """Generate, fit and score ``replications`` seeded instances.

    Failed replications are kept as rows with an ``error`` message and left
    out of the aggregates.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if n_jobs == 1:
        rows = [run_replication(scenario, method, i, seed) for i in range(replications)]
    else:
        from joblib import Parallel, delayed

        rows = Parallel(n_jobs=n_jobs)(
            delayed(run_replication)(scenario, method, i, seed) for i in range(replications))
    rows.sort(key=lambda r: r["replication"])
    return ExperimentReport(
        scenario=scenario.to_dict(),
        method=method.describe(),
        replications=replications,
        seed=int(seed),
        rows=rows,
        aggregates=aggregate(rows),
        failures=sum(r["error"] is not None for r in rows),
    )

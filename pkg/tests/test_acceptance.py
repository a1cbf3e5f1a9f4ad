"""Acceptance checks, one per criterion.

Run under pytest (each check prints a PASS/FAIL line) or directly with
``python tests/test_acceptance.py``. Tolerances are pinned as module
constants below.
"""
import io
import json
import sys
import time
from contextlib import redirect_stdout
from pathlib import Path

import numpy as np
import pytest

from aftsdar.asdar import TuningConfig, asdar_path
from aftsdar.bench import AsdarMethod, SdarMethod, replication_seed, run_experiment, theory_diagnostics
from aftsdar.cli import run as cli_run
from aftsdar.sdar import SdarConfig, Termination, kkt_residual, sdar_fit
from aftsdar.simgen import ScenarioSpec, gen_instance
from aftsdar.survival_data import kaplan_meier_weights, prepare_design, sort_by_observed_time, SurvivalDataset

KM_TOL = 1e-12
RECOVERY_TOL = 1e-8
REERR_LIMIT = 0.05
RECOVERY_RATE_MIN = 0.90
ITER_LIMIT = 10
KKT_TOL = 1e-10
LOSS_SLACK = 1e-12          # relative roundoff allowed between successive losses
CENSOR_TOL = 0.02

RUNTIME = {1: 5, 2: 10, 3: 60, 4: 120, 5: 120}

C2 = ScenarioSpec(n=100, p=300, K=5, rho=0.3, sigma=0.0, censor_rate=0.0,
                  design_kind="NeighborCorrelated", coef_kind="RatioScaled", R=10.0)
C3 = ScenarioSpec(n=200, p=1000, K=10, rho=0.3, sigma=1.0, censor_rate=0.3,
                  design_kind="NeighborCorrelated", coef_kind="LogScaled")
C4 = ScenarioSpec(n=200, p=500, K=6, rho=0.3, sigma=1.0, censor_rate=0.3,
                  design_kind="AR1", coef_kind="RatioScaled", R=10.0)
C5_KS = (2, 10, 25, 50)
C5 = ScenarioSpec(n=500, p=1000, K=2, rho=0.3, sigma=1.0, censor_rate=0.3,
                  design_kind="AR1", coef_kind="RatioScaled", R=3.0)
C8 = ScenarioSpec(n=500, p=10000, K=20, rho=0.3, sigma=1.0,
                  design_kind="NeighborCorrelated", coef_kind="LogScaled")
SEED = 20240611


def _line(k, ok, detail):
    return f"CRITERION {k}: {'PASS' if ok else 'FAIL'} | {detail}"


def _km_oracle(y, delta):
    """Product-limit jumps with tied times grouped; events precede censorings."""
    order = np.lexsort((1 - delta, y))
    ys, ds = y[order], delta[order]
    n = len(ys)
    w = np.zeros(n)
    surv = 1.0
    i = 0
    while i < n:
        j = i
        while j < n and ys[j] == ys[i]:
            j += 1
        at_risk = n - i
        events = int(ds[i:j].sum())
        new = surv * (1.0 - events / at_risk)
        if events:
            # a tie group's mass splits as the per-row risk-set steps do
            s = surv
            for k in range(i, j):
                if ds[k]:
                    nxt = s * (n - k - 1) / (n - k)
                    w[k] = s - nxt
                    s = nxt
            assert abs(s - new) < 1e-12
        surv = new
        i = j
    return order, w


def check_1():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for s in range(1000):
        n = int(rng.integers(2, 21))
        y = rng.integers(0, 6, n).astype(float) if s % 2 else rng.standard_normal(n)
        delta = rng.integers(0, 2, n)
        if s % 10 == 0:
            delta[:] = 1
        ds = SurvivalDataset(y=y, delta=delta, X=np.ones((n, 1)))
        sample = sort_by_observed_time(ds)
        got = kaplan_meier_weights(sample).w
        order, want = _km_oracle(y, delta)
        np.testing.assert_array_equal(sample.y_sorted, y[order])
        worst = max(worst, float(np.max(np.abs(got - want))))
    elapsed = time.perf_counter() - t0
    ok = worst <= KM_TOL and elapsed < RUNTIME[1]
    return ok, f"max |w - oracle| = {worst:.2e} (tol {KM_TOL:g}), {elapsed:.1f}s (< {RUNTIME[1]}s)"


def check_2():
    t0 = time.perf_counter()
    bad = []
    for s in range(20):
        inst = gen_instance(ScenarioSpec(**{**C2.to_dict(), "seed": s}))
        fit = sdar_fit(prepare_design(inst.dataset), SdarConfig(T=5))
        err = float(np.max(np.abs(fit.beta_hat - inst.beta_star)))
        if not (err <= RECOVERY_TOL and list(fit.active_set) == list(inst.true_support)
                and fit.termination is Termination.ACTIVE_SET_REPEAT and fit.iterations <= 10):
            bad.append((s, err, fit.termination.value, fit.iterations))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < RUNTIME[2]
    return ok, f"{20 - len(bad)}/20 seeds exact (tol {RECOVERY_TOL:g}), {elapsed:.1f}s; failures {bad}"


def check_3():
    t0 = time.perf_counter()
    rep = run_experiment(C3, 20, SdarMethod(tau=1.0), seed=SEED)
    elapsed = time.perf_counter() - t0
    mean = rep.aggregates["relative_error"]["mean"]
    ok = rep.failures == 0 and mean <= REERR_LIMIT and elapsed < RUNTIME[3]
    return ok, (f"mean ReErr {mean:.4f} (<= {REERR_LIMIT}), failures {rep.failures}, "
                f"{elapsed:.1f}s (< {RUNTIME[3]}s)")


def check_4():
    t0 = time.perf_counter()
    rep = run_experiment(C4, 20, AsdarMethod(criterion="HBIC", tau=1.0), seed=SEED)
    elapsed = time.perf_counter() - t0
    rate = rep.aggregates["exact_support_recovery"]["mean"]
    sizes = [r["T"] for r in rep.rows]
    ok = rep.failures == 0 and rate >= RECOVERY_RATE_MIN and elapsed < RUNTIME[4]
    return ok, (f"HBIC recovery rate {rate:.2f} (>= {RECOVERY_RATE_MIN}), selected T "
                f"median {np.median(sizes):.0f} (true K=6), {elapsed:.1f}s (< {RUNTIME[4]}s)")


def check_5():
    t0 = time.perf_counter()
    means = {}
    for K in C5_KS:
        spec = ScenarioSpec(**{**C5.to_dict(), "K": K})
        rep = run_experiment(spec, 10, SdarMethod(tau=1.0), seed=SEED)
        means[K] = rep.aggregates["iterations"]["mean"] if rep.failures == 0 else float("inf")
    elapsed = time.perf_counter() - t0
    ok = all(m <= ITER_LIMIT for m in means.values()) and elapsed < RUNTIME[5]
    shown = ", ".join(f"K={k}: {m:.1f}" for k, m in means.items())
    return ok, f"mean iterations {shown} (<= {ITER_LIMIT}), {elapsed:.1f}s (< {RUNTIME[5]}s)"


def _fits_for(spec, reps, tuned):
    for i in range(reps):
        inst = gen_instance(ScenarioSpec(**{**spec.to_dict(), "seed": replication_seed(SEED, i)}))
        design = prepare_design(inst.dataset)
        if tuned:
            path = asdar_path(design, TuningConfig(tau=1.0))
            yield design, path.best.fit
        else:
            yield design, sdar_fit(design, SdarConfig(T=spec.K, tau=1.0))


def check_6():
    fits = []
    for s in range(20):
        inst = gen_instance(ScenarioSpec(**{**C2.to_dict(), "seed": s}))
        design = prepare_design(inst.dataset)
        fits.append((design, sdar_fit(design, SdarConfig(T=5))))
    fits += list(_fits_for(C3, 20, False))
    fits += list(_fits_for(C4, 20, True))
    for K in C5_KS:
        fits += list(_fits_for(ScenarioSpec(**{**C5.to_dict(), "K": K}), 10, False))
    worst, moved, checked = 0.0, 0, 0
    for design, fit in fits:
        if fit.termination is not Termination.ACTIVE_SET_REPEAT:
            continue
        checked += 1
        worst = max(worst, kkt_residual(design, fit.eta_hat, fit.tau, fit.T))
        again = sdar_fit(design, SdarConfig(T=fit.T, tau=fit.tau), eta0=fit.eta_hat)
        if (list(again.active_set) != list(fit.active_set)
                or not np.array_equal(again.beta_hat, fit.beta_hat)):
            moved += 1
    ok = checked > 0 and worst <= KKT_TOL and moved == 0
    return ok, (f"{checked}/{len(fits)} convergent fits, max kkt {worst:.2e} (<= {KKT_TOL:g}), "
                f"{moved} changed on rerun")


def check_7():
    found, tried, bad = 0, 0, 0
    while found < 20 and tried < 200:
        rng = np.random.default_rng([SEED, tried])
        tried += 1
        p = int(rng.integers(8, 31))
        T = int(rng.integers(1, 4))
        spec = ScenarioSpec(n=int(rng.integers(40, 120)), p=p, K=T, rho=float(rng.uniform(0, 0.6)),
                            sigma=1.0, censor_rate=0.3, coef_kind="RatioScaled", R=5.0,
                            seed=int(rng.integers(2**31)))
        design = prepare_design(gen_instance(spec).dataset)
        U = theory_diagnostics(design, T, 1.0, T).U_bound
        tau = 0.9 / (np.sqrt(T) * U)
        diag = theory_diagnostics(design, T, tau, T)
        if not diag.certified:
            continue
        found += 1
        trace = np.asarray(sdar_fit(design, SdarConfig(T=T, tau=tau)).loss_trace)
        if np.any(np.diff(trace) > LOSS_SLACK * max(1.0, trace[0])):
            bad += 1
    ok = found == 20 and bad == 0
    return ok, f"{found} certified instances ({tried} drawn), {bad} with a loss increase"


def check_8():
    t0 = time.perf_counter()
    parts, ok = [], True
    for target in (0.1, 0.3, 0.5, 0.7):
        rates = np.array([gen_instance(ScenarioSpec(**{**C8.to_dict(), "censor_rate": target,
                                                        "seed": replication_seed(SEED, i)}))
                          .realized_censor_rate for i in range(100)])
        worst = float(np.max(np.abs(rates - target)))
        ok &= abs(rates.mean() - target) <= CENSOR_TOL and worst <= CENSOR_TOL
        parts.append(f"{target}: mean {rates.mean():.4f}, worst instance off by {worst:.4f}")
    return ok, "; ".join(parts) + f" (tol {CENSOR_TOL}), {time.perf_counter() - t0:.0f}s"


def check_9(tmp):
    data = Path(__file__).parent / "data" / "golden_noiseless.csv"
    cases = {
        "fit": ["fit", data, "--T", 3, "--diagnostics"],
        "tune-hbic": ["tune", data, "--Q", 6],
        "tune-cv": ["tune", data, "--criterion", "cv", "--folds", 3, "--Q", 5, "--seed", 4],
        "simulate": ["simulate", "--n", 60, "--p", 40, "--K", 3, "--seed", 5],
        "bench-sdar": ["bench", "--n", 80, "--p", 60, "--K", 3, "--replications", 3, "--seed", 6],
        "bench-asdar": ["bench", "--n", 80, "--p", 60, "--K", 3, "--replications", 2,
                        "--method", "asdar", "--seed", 6],
    }
    differ = []
    for name, argv in cases.items():
        blobs = []
        for k in range(2):
            out = Path(tmp) / f"{name}-{k}"
            buf = io.StringIO()
            with redirect_stdout(buf):
                code = cli_run([str(a) for a in argv] + ["-o", str(out)])
            assert code == 0, name
            path = out if out.exists() else out.with_name(out.name + ".json")
            blobs.append(path.read_text().replace(f"{name}-{k}", name))
        json.loads(blobs[0])
        if blobs[0] != blobs[1]:
            differ.append(name)
    return not differ, f"{len(cases) - len(differ)}/{len(cases)} invocations byte-identical {differ or ''}"


CHECKS = {1: check_1, 2: check_2, 3: check_3, 4: check_4, 5: check_5, 6: check_6,
          7: check_7, 8: check_8}


@pytest.fixture
def report(capsys):
    def emit(k, result):
        ok, detail = result
        with capsys.disabled():
            print("\n" + _line(k, ok, detail))
        assert ok, detail
    return emit


@pytest.mark.parametrize("k", sorted(CHECKS))
def test_criterion(k, report):
    report(k, CHECKS[k]())


def test_criterion_9(report, tmp_path):
    report(9, check_9(tmp_path))


if __name__ == "__main__":
    import tempfile

    failed = 0
    for k in sorted(CHECKS) + [9]:
        if k == 9:
            with tempfile.TemporaryDirectory() as tmp:
                ok, detail = check_9(tmp)
        else:
            ok, detail = CHECKS[k]()
        failed += not ok
        print(_line(k, ok, detail), flush=True)
    sys.exit(1 if failed else 0)

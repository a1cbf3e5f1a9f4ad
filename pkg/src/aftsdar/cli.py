"""Command-line front end: ``aftsdar {fit,tune,simulate,bench}``.

Exit codes: 0 success, 1 usage, 2 input data, 3 numerical degeneracy,
4 infeasible diagnostics. Knob precedence is built-in default < JSON config
file (``--config``) < command-line flag; the resolved values are echoed in
the report's ``config`` block.
"""
import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asdar import Criterion, TuningConfig, asdar_path
from .bench import AsdarMethod, SdarMethod, run_experiment, theory_diagnostics
from .dataset_io import parse_dataset_csv, write_dataset_csv
from .errors import AftSdarError, UsageError
from .sdar import SdarConfig, sdar_fit
from .simgen import ScenarioSpec, gen_instance
from .survival_data import prepare_design

CRITERIA = {
    "hbic": Criterion.HBIC,
    "cv": Criterion.CROSS_VALIDATION,
    "residual": Criterion.RESIDUAL_STOP,
    "change": Criterion.CHANGE_STOP,
}
DESIGNS = {"neighbor": "NeighborCorrelated", "ar1": "AR1"}
COEFS = {"log": "LogScaled", "ratio": "RatioScaled"}

BENCH_CSV_COLUMNS = [
    "replication", "seed", "n", "p", "K", "rho", "sigma", "censor_rate", "design_kind",
    "coef_kind", "R", "method", "T", "tau", "relative_error", "recovered", "iterations",
    "seconds", "termination", "kkt_gap", "realized_censor_rate", "error",
]

# desk-scale defaults; ``--full`` swaps in the full-scale values
PRESETS = {
    "table1": dict(n=200, p=1000, K=10, rho=0.3, sigma=1.0, censor_rate=0.3,
                   design="neighbor", coef="log", method="sdar"),
    "fig1": dict(n=200, p=500, K=6, R=10.0, rho=0.3, sigma=1.0, censor_rate=0.3,
                 design="ar1", coef="ratio", method="asdar", criterion="hbic"),
    "fig2": dict(n=500, p=1000, K=50, R=3.0, rho=0.3, sigma=1.0, censor_rate=0.3,
                 design="ar1", coef="ratio", method="sdar"),
}
FULL_SCALE = {"table1": dict(n=500, p=10000, K=20)}

DEFAULTS = {
    "fit": dict(T=None, tau=1.0, max_iter=50, eta=False, cycle_guard=True, diagnostics=False,
                seed=0),
    "tune": dict(criterion="hbic", step=1, Q=None, alpha=1.0, folds=5, epsilon=None, tau=1.0,
                 max_iter=50, eta=False, seed=0),
    "simulate": dict(n=200, p=500, K=6, rho=0.3, sigma=1.0, censor_rate=0.3,
                     design="neighbor", coef="log", R=10.0, random_sign=False, seed=0),
    "bench": dict(preset=None, n=200, p=1000, K=10, rho=0.3, sigma=1.0, censor_rate=0.3,
                  design="neighbor", coef="log", R=10.0, random_sign=False, method="sdar",
                  T=None, tau=1.0, max_iter=50, criterion="hbic", step=1, alpha=1.0,
                  epsilon=None, folds=5, replications=None, full=False, jobs=1, timing=False,
                  seed=0),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _flag(parser, *names, **kw):
    # None marks "not given on the command line"
    if kw.get("action") == "store_true":
        kw.update(action="store_const", const=True)
    elif kw.get("action") == "store_false":
        kw.update(action="store_const", const=False)
    parser.add_argument(*names, default=None, **kw)


def _scenario_flags(p):
    _flag(p, "--n", type=int, help="sample size")
    _flag(p, "--p", type=int, help="number of covariates")
    _flag(p, "--K", type=int, help="true support size")
    _flag(p, "--rho", type=float, help="covariate correlation")
    _flag(p, "--sigma", type=float, help="noise standard deviation")
    _flag(p, "--censor-rate", dest="censor_rate", type=float, help="target censoring rate")
    _flag(p, "--design", choices=sorted(DESIGNS), help="design generator")
    _flag(p, "--coef", choices=sorted(COEFS), help="coefficient magnitudes")
    _flag(p, "--R", type=float, help="max/min magnitude ratio for --coef ratio")
    _flag(p, "--random-sign", dest="random_sign", action="store_true",
          help="give nonzero coefficients random signs")


def build_parser():
    parser = _Parser(prog="aftsdar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON file of knob values")
        p.add_argument("-o", "--output", type=Path,
                       help="report path (JSON; bench/simulate treat it as a file prefix)")
        _flag(p, "--seed", type=int, help="random seed")

    fit = sub.add_parser("fit", help="fit at a fixed support size T")
    fit.add_argument("input", type=Path, help="dataset CSV")
    common(fit)
    _flag(fit, "--T", type=int, help="support size (required)")
    _flag(fit, "--tau", type=float, help="step size in (0, 1]")
    _flag(fit, "--max-iter", dest="max_iter", type=int)
    _flag(fit, "--eta", action="store_true", help="report normalized-scale coefficients")
    _flag(fit, "--no-cycle-guard", dest="cycle_guard", action="store_false")
    _flag(fit, "--diagnostics", action="store_true",
          help="add brute-force step-size diagnostics (small p only)")

    tune = sub.add_parser("tune", help="sweep T and select it")
    tune.add_argument("input", type=Path, help="dataset CSV")
    common(tune)
    _flag(tune, "--criterion", choices=sorted(CRITERIA))
    _flag(tune, "--step", type=int)
    _flag(tune, "--Q", type=int, help="largest T (default ceil(alpha*n/log n))")
    _flag(tune, "--alpha", type=float)
    _flag(tune, "--folds", type=int)
    _flag(tune, "--epsilon", type=float, help="tolerance for residual/change stopping")
    _flag(tune, "--tau", type=float)
    _flag(tune, "--max-iter", dest="max_iter", type=int)
    _flag(tune, "--eta", action="store_true")

    sim = sub.add_parser("simulate", help="write a simulated dataset CSV and sidecar JSON")
    common(sim)
    _scenario_flags(sim)

    bench = sub.add_parser("bench", help="replicated simulation benchmark")
    common(bench)
    _flag(bench, "--preset", choices=sorted(PRESETS))
    _scenario_flags(bench)
    _flag(bench, "--method", choices=("sdar", "asdar"))
    _flag(bench, "--T", type=int, help="SDAR support size (default K)")
    _flag(bench, "--tau", type=float)
    _flag(bench, "--max-iter", dest="max_iter", type=int)
    _flag(bench, "--criterion", choices=sorted(CRITERIA))
    _flag(bench, "--step", type=int)
    _flag(bench, "--alpha", type=float)
    _flag(bench, "--epsilon", type=float)
    _flag(bench, "--folds", type=int)
    _flag(bench, "--replications", type=int, help="default 20, or 100 with --full")
    _flag(bench, "--full", action="store_true", help="full-scale replications and sizes")
    _flag(bench, "--jobs", type=int)
    _flag(bench, "--timing", action="store_true",
          help="include wall times in the JSON (under metadata; not deterministic)")
    return parser


def resolve_config(args):
    cfg = dict(DEFAULTS[args.subcommand])
    if getattr(args, "config", None) is not None:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {args.config} is not valid JSON: {exc}") from None
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise UsageError(f"unknown keys in config file: {unknown}")
        cfg.update(loaded)
    flags = {k: v for k, v in vars(args).items() if k in cfg and v is not None}
    if args.subcommand == "bench":
        preset = flags.get("preset", cfg.get("preset"))
        if preset is not None:
            if preset not in PRESETS:
                raise UsageError(f"unknown preset {preset!r}")
            cfg.update(PRESETS[preset])
            if flags.get("full", cfg["full"]):
                cfg.update(FULL_SCALE.get(preset, {}))
    cfg.update(flags)
    return cfg


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    if hasattr(obj, "value"):  # enums
        return obj.value
    return obj


def dumps_report(report):
    return json.dumps(_clean(report), indent=2, allow_nan=False) + "\n"


def _emit(report, path):
    text = dumps_report(report)
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _fit_result(fit, design, names, eta_scale):
    coefs = []
    for j in fit.active_set:
        col = int(design.retained[j])
        entry = {"name": names[col], "index": col}
        if eta_scale:
            entry["eta"] = float(fit.eta_hat[j])
        else:
            entry["beta"] = float(fit.beta_hat[col])
        coefs.append(entry)
    return {
        "coefficients": coefs,
        "active_set": [int(design.retained[j]) for j in fit.active_set],
        "iterations": fit.iterations,
        "termination": fit.termination.value,
        "kkt_gap": fit.kkt_gap,
        "loss_trace": list(fit.loss_trace),
        "T": fit.T,
        "tau": fit.tau,
    }


def _design_warnings(design, names):
    if not design.dropped_columns:
        return []
    dropped = [names[j] for j in design.dropped_columns]
    return [f"dropped {len(dropped)} column(s) with zero weighted norm: {dropped}"]


def cmd_fit(args, cfg):
    if cfg["T"] is None:
        raise UsageError("fit needs --T (support size)")
    dataset = parse_dataset_csv(args.input)
    design = prepare_design(dataset)
    config = SdarConfig(T=cfg["T"], tau=cfg["tau"], max_iter=cfg["max_iter"],
                        cycle_guard=cfg["cycle_guard"])
    fit = sdar_fit(design, config)
    names = dataset.names()
    diagnostics = {}
    if cfg["diagnostics"]:
        diag = theory_diagnostics(design, config.T, config.tau, K=config.T)
        diagnostics = {
            "sigma_min_2T": diag.sigma_min_2T, "U_bound": diag.U_bound,
            "L_bound": diag.L_bound, "xi": diag.xi, "step_size_ok": diag.step_size_ok,
            "identifiable": diag.identifiable,
        }
    warnings = _design_warnings(design, names)
    if not fit.converged:
        warnings.append(f"solver stopped with {fit.termination.value}")
    return {
        "config": {"subcommand": "fit", "input": str(args.input), **cfg},
        "results": {"n": dataset.n, "p": dataset.p, "fit": _fit_result(fit, design, names, cfg["eta"])},
        "diagnostics": diagnostics,
        "warnings": warnings,
    }


def cmd_tune(args, cfg):
    dataset = parse_dataset_csv(args.input)
    design = prepare_design(dataset)
    config = TuningConfig(step=cfg["step"], Q=cfg["Q"], alpha=cfg["alpha"], tau=cfg["tau"],
                          criterion=CRITERIA[cfg["criterion"]], folds=cfg["folds"],
                          epsilon=cfg["epsilon"], seed=cfg["seed"], max_iter=cfg["max_iter"])
    path = asdar_path(design, config, dataset=dataset)
    names = dataset.names()
    warnings = _design_warnings(design, names)
    if not path.complete:
        warnings.append(f"path aborted early: {path.error}")
    if any(e.zero_residual for e in path.entries):
        warnings.append("zero residual on the path; HBIC used the RSS floor")
    entries = [{
        "T": e.T, "score": e.score, "rss": e.rss, "iterations": e.fit.iterations,
        "termination": e.fit.termination.value, "kkt_gap": e.fit.kkt_gap,
        "support_size": int(np.count_nonzero(e.fit.eta_hat)),
    } for e in path.entries]
    results = {
        "n": dataset.n, "p": dataset.p, "criterion": path.criterion_used.value, "Q": path.Q,
        "T_hat": path.T_hat, "complete": path.complete, "stopped_early": path.stopped_early,
        "path": entries, "fit": _fit_result(path.best.fit, design, names, cfg["eta"]),
    }
    if path.cv is not None:
        results["cv"] = {"grid": path.cv.grid, "mean_loss": path.cv.mean_loss,
                         "fold_loss": path.cv.fold_loss}
    return {"config": {"subcommand": "tune", "input": str(args.input), **cfg},
            "results": results, "diagnostics": {}, "warnings": warnings}


def _scenario(cfg):
    return ScenarioSpec(n=cfg["n"], p=cfg["p"], K=cfg["K"], rho=cfg["rho"], sigma=cfg["sigma"],
                        censor_rate=cfg["censor_rate"], design_kind=DESIGNS[cfg["design"]],
                        coef_kind=COEFS[cfg["coef"]], R=cfg["R"],
                        random_sign=cfg["random_sign"], seed=cfg["seed"])


def _prefix(args, default):
    out = args.output if args.output is not None else Path(default)
    return out.with_suffix("") if out.suffix in (".json", ".csv") else out


def cmd_simulate(args, cfg):
    spec = _scenario(cfg)
    inst = gen_instance(spec)
    prefix = _prefix(args, "simulated")
    csv_path = prefix.with_name(prefix.name + ".csv")
    json_path = prefix.with_name(prefix.name + ".json")
    write_dataset_csv(inst.dataset, csv_path)
    report = {
        "config": {"subcommand": "simulate", **cfg},
        "results": {
            "dataset_csv": csv_path.name, "spec": spec.to_dict(), "seed": spec.seed,
            "beta_star": inst.beta_star, "true_support": inst.true_support,
            "eta_c": inst.eta_c, "log_eta_c": inst.log_eta_c,
            "realized_censor_rate": inst.realized_censor_rate,
        },
        "diagnostics": {},
        "warnings": [],
    }
    json_path.write_text(dumps_report(report))
    return None


def _bench_rows_csv(report, method_name, path):
    sc = report.scenario
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in report.rows:
            w.writerow({
                "replication": r["replication"], "seed": r["seed"], "n": sc["n"], "p": sc["p"],
                "K": sc["K"], "rho": sc["rho"], "sigma": sc["sigma"],
                "censor_rate": sc["censor_rate"], "design_kind": sc["design_kind"],
                "coef_kind": sc["coef_kind"], "R": sc["R"], "method": method_name,
                "T": r["T"], "tau": report.method["tau"], "relative_error": r["relative_error"],
                "recovered": int(r["exact_support_recovery"]), "iterations": r["iterations"],
                "seconds": r["wall_time_seconds"], "termination": r["termination"],
                "kkt_gap": r["kkt_gap"], "realized_censor_rate": r["realized_censor_rate"],
                "error": r["error"] or "",
            })


def cmd_bench(args, cfg):
    if cfg["replications"] is None:
        cfg["replications"] = 100 if cfg["full"] else 20
    spec = _scenario(cfg)
    if cfg["method"] == "sdar":
        method = SdarMethod(T=cfg["T"], tau=cfg["tau"], max_iter=cfg["max_iter"])
    else:
        method = AsdarMethod(criterion=CRITERIA[cfg["criterion"]], tau=cfg["tau"],
                             step=cfg["step"], alpha=cfg["alpha"], epsilon=cfg["epsilon"],
                             folds=cfg["folds"], max_iter=cfg["max_iter"])
    report = run_experiment(spec, cfg["replications"], method, seed=cfg["seed"],
                            n_jobs=cfg["jobs"])
    prefix = _prefix(args, "bench")
    csv_path = prefix.with_name(prefix.name + ".csv")
    json_path = prefix.with_name(prefix.name + ".json")
    _bench_rows_csv(report, method.name, csv_path)
    out = {
        "config": {"subcommand": "bench", **cfg},
        "results": report.to_dict(timing=False),
        "diagnostics": {},
        "warnings": [f"{report.failures} replication(s) failed"] if report.failures else [],
    }
    if cfg["timing"]:
        timing = report.to_dict(timing=True)
        out["metadata"] = {
            "timing": {
                "wall_time_seconds": timing["aggregates"]["wall_time_seconds"],
                "per_replication": [r["wall_time_seconds"] for r in timing["rows"]],
            },
        }
    json_path.write_text(dumps_report(out))
    return None


COMMANDS = {"fit": cmd_fit, "tune": cmd_tune, "simulate": cmd_simulate, "bench": cmd_bench}


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:   # usage errors, --help, --version
        return exc.code if isinstance(exc.code, int) else 1
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = resolve_config(args)
        report = COMMANDS[args.subcommand](args, cfg)
        if report is not None:
            _emit(report, args.output)
    except AftSdarError as exc:
        print(f"aftsdar {args.subcommand}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (TypeError, ValueError) as exc:
        # malformed knob values arriving through --config
        print(f"aftsdar {args.subcommand}: invalid configuration: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

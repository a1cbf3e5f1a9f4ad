"""Adaptive support-size selection.

The support size ``T`` is grown on the grid ``step, 2*step, ...`` up to
``Q = ceil(alpha * n / log n)``; every fit starts from the previous fit's
primal and dual vectors. Fits are scored by HBIC or cross-validation, or the
sweep halts early on a residual / successive-change tolerance.
"""
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import AftSdarError, FoldDegeneracyError, InputDataError
from .sdar import SdarConfig, sdar_fit
from .simgen import make_rng
from .survival_data import (
    kaplan_meier_weights,
    prepare_design,
    sort_by_observed_time,
)

RSS_FLOOR = 1e-300
# an RSS below this fraction of ||Ybar||^2 is roundoff and scored as a zero residual
RSS_REL_TOL = 1e-20
# mean CV losses within this fraction of the largest are ties
CV_TIE_TOL = 1e-12


class Criterion(str, Enum):
    HBIC = "HBIC"
    CROSS_VALIDATION = "CrossValidation"
    RESIDUAL_STOP = "ResidualStop"
    CHANGE_STOP = "ChangeStop"


@dataclass(frozen=True)
class TuningConfig:
    step: int = 1
    Q: int = None
    alpha: float = 1.0
    tau: float = 1.0
    criterion: Criterion = Criterion.HBIC
    folds: int = 5
    epsilon: float = None
    seed: int = 0
    max_iter: int = 50

    def __post_init__(self):
        object.__setattr__(self, "criterion", Criterion(self.criterion))
        if self.step < 1:
            raise InputDataError(f"step must be >= 1, got {self.step}")
        if self.Q is not None and self.Q < self.step:
            raise InputDataError(f"Q={self.Q} is smaller than step={self.step}")
        if self.alpha <= 0:
            raise InputDataError(f"alpha must be positive, got {self.alpha}")
        if self.criterion is Criterion.CROSS_VALIDATION and self.folds < 2:
            raise InputDataError(f"cross-validation needs folds >= 2, got {self.folds}")
        if self.criterion in (Criterion.RESIDUAL_STOP, Criterion.CHANGE_STOP):
            if self.epsilon is None or not self.epsilon > 0:
                raise InputDataError(f"{self.criterion.value} needs a positive epsilon")

    def resolve_Q(self, n):
        if self.Q is not None:
            return int(self.Q)
        return max(self.step, int(math.ceil(self.alpha * n / math.log(n))))


@dataclass
class PathEntry:
    T: int
    fit: object
    score: float
    rss: float
    zero_residual: bool = False


@dataclass
class TuningPath:
    entries: list
    selected: int
    criterion_used: Criterion
    Q: int
    complete: bool = True
    error: str = None
    stopped_early: bool = False
    cv: object = field(default=None, repr=False)

    @property
    def best(self):
        return self.entries[self.selected]

    @property
    def T_hat(self):
        return self.best.T


def _rss_floor(design):
    return max(RSS_FLOOR, RSS_REL_TOL * float(design.Ybar @ design.Ybar))


def _hbic(rss, n, p, size, floor=RSS_FLOOR):
    floored = rss <= floor
    rss = max(rss, floor)
    return n * math.log(rss / n) + size * math.log(math.log(n)) * math.log(p), floored


def hbic_score(fit, design):
    """``n log(RSS/n) + |A| log(log n) log p`` with ``|A|`` the number of nonzeros."""
    resid = design.Ybar - design.Xbar @ fit.eta_hat
    score, _ = _hbic(float(resid @ resid), design.n, design.p, int(np.count_nonzero(fit.eta_hat)),
                     _rss_floor(design))
    return score


def asdar_path(design, config, dataset=None):
    """Sweep ``T`` and select one fit. ``dataset`` is needed only for cross-validation."""
    crit = config.criterion
    if crit is Criterion.CROSS_VALIDATION and dataset is None:
        raise InputDataError("cross-validation scoring needs the original dataset")
    n, p = design.n, design.p
    Q = config.resolve_Q(n)
    cap = min(Q, n - 1, p)
    grid = list(range(config.step, cap + 1, config.step))
    if not grid:
        raise InputDataError(
            f"empty grid: step={config.step} exceeds min(Q, n-1, p)={cap}")

    floor = _rss_floor(design)
    eta = np.zeros(p)
    d = design.Xbar.T @ design.Ybar / n
    entries = []
    selected = None
    complete, error, stopped = True, None, False
    for T in grid:
        try:
            fit = sdar_fit(design, SdarConfig(T=T, tau=config.tau, max_iter=config.max_iter),
                           eta0=eta, d0=d)
        except AftSdarError as exc:
            complete, error = False, f"T={T}: {exc}"
            break
        eta, d = fit.eta_hat, fit.d_hat
        resid = design.Ybar - design.Xbar @ fit.eta_hat
        rss = float(resid @ resid)
        score, floored = _hbic(rss, n, p, int(np.count_nonzero(fit.eta_hat)), floor)
        if crit is Criterion.RESIDUAL_STOP:
            score = math.sqrt(rss)
        elif crit is Criterion.CHANGE_STOP:
            score = (float(np.linalg.norm(fit.eta_hat - entries[-1].fit.eta_hat))
                     if entries else math.inf)
        entries.append(PathEntry(T=T, fit=fit, score=score, rss=rss, zero_residual=floored))

        if crit is Criterion.RESIDUAL_STOP and score < config.epsilon:
            selected, stopped = len(entries) - 1, True
            break
        if crit is Criterion.CHANGE_STOP and score < config.epsilon:
            # the earlier of the two nearly identical fits is reported
            selected, stopped = len(entries) - 2, True
            break

    if not entries:
        raise InputDataError(f"no fit on the path succeeded ({error})")

    cv = None
    if crit is Criterion.CROSS_VALIDATION:
        cv = cross_validate(dataset, [e.T for e in entries], config.folds, config.tau,
                            config.seed, max_iter=config.max_iter)
        for e, loss in zip(entries, cv.mean_loss):
            e.score = float(loss)
    if selected is None:
        if crit is Criterion.HBIC:
            selected = int(np.argmin([e.score for e in entries]))
        elif crit is Criterion.CROSS_VALIDATION:
            selected = _lowest_near_min(cv.mean_loss)
        else:
            selected = len(entries) - 1
    return TuningPath(entries=entries, selected=selected, criterion_used=crit, Q=Q,
                      complete=complete, error=error, stopped_early=stopped, cv=cv)


@dataclass
class CrossValidationResult:
    T_hat: int
    grid: list
    mean_loss: np.ndarray
    fold_loss: np.ndarray
    fold_of: np.ndarray


def _lowest_near_min(losses):
    losses = np.asarray(losses)
    tol = CV_TIE_TOL * float(np.max(np.abs(losses)))
    return int(np.flatnonzero(losses <= losses.min() + tol)[0])


def assign_folds(delta, folds, seed):
    """Fold label per row, dealt round-robin within the event and censored strata."""
    rng = make_rng(seed)
    delta = np.asarray(delta)
    fold_of = np.empty(delta.shape[0], dtype=np.int64)
    offset = 0
    for stratum in (1, 0):
        rows = rng.permutation(np.flatnonzero(delta == stratum))
        fold_of[rows] = (np.arange(rows.size) + offset) % folds
        offset += rows.size
    return fold_of


def _weighted_validation_loss(dataset, beta):
    sample = sort_by_observed_time(dataset)
    w = kaplan_meier_weights(sample).w
    resid = sample.y_sorted - sample.X_sorted @ beta
    return float(w @ resid ** 2) / (2.0 * sample.n)


def cross_validate(dataset, grid, folds, tau, seed, max_iter=50):
    """K-fold CV over support sizes with fold-local sorting, weights and scaling."""
    grid = sorted({int(t) for t in grid})
    if folds < 2:
        raise InputDataError(f"folds must be >= 2, got {folds}")
    if not grid or grid[0] < 1:
        raise InputDataError("grid must hold positive support sizes")
    fold_of = assign_folds(dataset.delta, folds, seed)
    losses = np.empty((folds, len(grid)))
    for f in range(folds):
        train_rows = np.flatnonzero(fold_of != f)
        val_rows = np.flatnonzero(fold_of == f)
        if train_rows.size < grid[-1] + 1:
            raise InputDataError(
                f"fold {f}: training part has {train_rows.size} rows, "
                f"need at least {grid[-1] + 1}")
        train, val = dataset.subset(train_rows), dataset.subset(val_rows)
        if not train.delta.any():
            raise FoldDegeneracyError(f, "training part has no events")
        if not val.delta.any():
            raise FoldDegeneracyError(f, "validation part has no events")
        design = prepare_design(train)
        eta = np.zeros(design.p)
        d = design.Xbar.T @ design.Ybar / design.n
        for j, T in enumerate(grid):
            fit = sdar_fit(design, SdarConfig(T=T, tau=tau, max_iter=max_iter), eta0=eta, d0=d)
            eta, d = fit.eta_hat, fit.d_hat
            losses[f, j] = _weighted_validation_loss(val, fit.beta_hat)
    mean = losses.mean(axis=0)
    return CrossValidationResult(T_hat=grid[_lowest_near_min(mean)], grid=grid, mean_loss=mean,
                                 fold_loss=losses, fold_of=fold_of)

"""Censored observations, Kaplan-Meier weights and the normalized design.

The weighted least-squares loss

    (1/2n) * sum_i w_i (y_i - x_i' beta)^2

is rewritten as an ordinary least-squares loss on ``Ybar = sqrt(w) * y`` and
``Xbar = sqrt(w) * X * D`` where ``D`` rescales every column to length
``sqrt(n)``. Solvers work on ``eta = D^-1 beta``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegenerateDesignError, InputDataError

DROP_TOL = 1e-12


def _frozen(a, dtype=np.float64, order="C"):
    a = np.array(a, dtype=dtype, order=order, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SurvivalDataset:
    """Observed log-times ``y``, event indicators ``delta`` (1 = event) and covariates ``X``."""

    y: np.ndarray
    delta: np.ndarray
    X: np.ndarray
    feature_names: list = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        X = np.asarray(self.X, dtype=np.float64)
        d_raw = np.asarray(self.delta)
        if y.ndim != 1:
            raise InputDataError("y must be one-dimensional")
        if X.ndim != 2:
            raise InputDataError("X must be a 2-d matrix")
        n = y.shape[0]
        if n < 2:
            raise InputDataError(f"need at least 2 observations, got {n}")
        if d_raw.shape != (n,) or X.shape[0] != n:
            raise InputDataError(
                f"length mismatch: y={n}, delta={d_raw.shape}, X rows={X.shape[0]}")
        if not np.all(np.isin(d_raw, (0, 1))):
            bad = int(np.flatnonzero(~np.isin(d_raw, (0, 1)))[0])
            raise InputDataError(f"delta[{bad}]={d_raw[bad]!r} is not 0 or 1")
        if not np.all(np.isfinite(y)):
            raise InputDataError(f"non-finite y at index {int(np.flatnonzero(~np.isfinite(y))[0])}")
        if not np.all(np.isfinite(X)):
            i, j = np.argwhere(~np.isfinite(X))[0]
            raise InputDataError(f"non-finite covariate at row {i}, column {j}")
        names = self.feature_names
        if names is not None:
            names = [str(s) for s in names]
            if len(names) != X.shape[1]:
                raise InputDataError(
                    f"{len(names)} feature names for {X.shape[1]} columns")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "delta", _frozen(d_raw, dtype=np.int64))
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def names(self):
        if self.feature_names is not None:
            return list(self.feature_names)
        return [f"x{j}" for j in range(self.p)]

    def subset(self, rows):
        rows = np.asarray(rows)
        return SurvivalDataset(self.y[rows], self.delta[rows], self.X[rows], self.feature_names)


@dataclass(frozen=True)
class SortedSample:
    order: np.ndarray
    y_sorted: np.ndarray
    delta_sorted: np.ndarray
    X_sorted: np.ndarray

    @property
    def n(self):
        return self.y_sorted.shape[0]


@dataclass(frozen=True)
class KMWeights:
    w: np.ndarray


@dataclass(frozen=True)
class StandardizedDesign:
    """Weighted, column-normalized design.

    ``Xbar`` and ``d_scale`` cover the retained columns only; ``retained``
    maps their positions back to columns of the original ``X``.
    """

    Xbar: np.ndarray
    Ybar: np.ndarray
    d_scale: np.ndarray
    dropped_columns: list
    retained: np.ndarray
    p_total: int
    weights: np.ndarray = field(repr=False, default=None)

    @property
    def n(self):
        return self.Xbar.shape[0]

    @property
    def p(self):
        return self.Xbar.shape[1]


def sort_by_observed_time(dataset):
    """Order observations by ``y``; at equal ``y`` events come before censorings."""
    if not np.all(np.isfinite(dataset.y)):
        raise InputDataError("non-finite observed time")
    # lexsort: last key is primary; stable on full ties
    order = np.lexsort((1 - dataset.delta, dataset.y))
    return SortedSample(
        order=_frozen(order, dtype=np.int64),
        y_sorted=_frozen(dataset.y[order]),
        delta_sorted=_frozen(dataset.delta[order], dtype=np.int64),
        X_sorted=_frozen(dataset.X[order]),
    )


def kaplan_meier_weights(sample):
    """Jumps of the product-limit estimator at each sorted observation.

    Position ``i`` (1-based) gets ``delta_i / (n-i+1)`` times the product of
    ``((n-j)/(n-j+1))**delta_j`` over ``j < i``. Tied times are treated as
    distinct positions.
    """
    return KMWeights(w=_frozen(_kernels.km_jumps(sample.delta_sorted)))


def build_standardized_design(sample, weights):
    w = np.asarray(weights.w)
    n = sample.n
    if w.shape != (n,):
        raise InputDataError(f"weights have length {w.shape[0]}, sample has {n}")
    sw = np.sqrt(w)
    Xt = sample.X_sorted * sw[:, None]
    Ybar = sample.y_sorted * sw
    norms = np.linalg.norm(Xt, axis=0)
    sqrt_n = np.sqrt(n)
    keep = norms >= DROP_TOL * sqrt_n
    retained = np.flatnonzero(keep)
    if retained.size == 0:
        raise DegenerateDesignError(
            "every weighted column norm is ~0; nothing left to fit "
            "(check that the sample has uncensored observations)")
    d_scale = sqrt_n / norms[retained]
    Xbar = np.asfortranarray(Xt[:, retained] * d_scale)
    Xbar.setflags(write=False)
    return StandardizedDesign(
        Xbar=Xbar,
        Ybar=_frozen(Ybar),
        d_scale=_frozen(d_scale),
        dropped_columns=[int(j) for j in np.flatnonzero(~keep)],
        retained=_frozen(retained, dtype=np.int64),
        p_total=int(sample.X_sorted.shape[1]),
        weights=_frozen(w),
    )


def prepare_design(dataset):
    """sort -> KM weights -> standardized design, in one call."""
    sample = sort_by_observed_time(dataset)
    return build_standardized_design(sample, kaplan_meier_weights(sample))


def coefficients_to_original_scale(eta, design):
    """``beta = D eta`` scattered back to all original columns (dropped ones get 0)."""
    eta = np.asarray(eta, dtype=np.float64)
    if eta.shape != (design.p,):
        raise InputDataError(
            f"eta has shape {eta.shape}, design has {design.p} retained columns")
    beta = np.zeros(design.p_total)
    beta[design.retained] = design.d_scale * eta
    return beta


def coefficients_to_normalized_scale(beta, design):
    """Inverse of :func:`coefficients_to_original_scale` on the retained columns."""
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (design.p_total,):
        raise InputDataError(f"beta has shape {beta.shape}, expected ({design.p_total},)")
    return beta[design.retained] / design.d_scale

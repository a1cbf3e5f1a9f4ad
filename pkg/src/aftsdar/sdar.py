"""Support detection and root finding for the l0-penalized normalized loss.

Each iteration keeps the ``T`` coordinates with the largest ``|eta + tau*d|``
(the primal plus a scaled dual, where ``d`` is the negative gradient
``Xbar'(Ybar - Xbar eta)/n``), solves least squares exactly on them and
recomputes the dual off the support. The induced hard threshold is the
``T``-th largest ``|eta + tau*d|``, so the penalty level never has to be
chosen directly.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import InputDataError, OverdeterminedSupportError
from .survival_data import coefficients_to_original_scale


class Termination(str, Enum):
    ACTIVE_SET_REPEAT = "ActiveSetRepeat"
    MAX_ITER = "MaxIter"
    CYCLE_DETECTED = "CycleDetected"


@dataclass(frozen=True)
class SdarConfig:
    T: int
    tau: float = 1.0
    max_iter: int = 50
    ls_rank_tol: float = 1e-10
    cycle_guard: bool = True

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise InputDataError(f"T must be a positive integer, got {self.T!r}")
        if not (0.0 < self.tau <= 1.0):
            raise InputDataError(f"tau must lie in (0, 1], got {self.tau!r}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InputDataError(f"max_iter must be a positive integer, got {self.max_iter!r}")
        if not self.ls_rank_tol > 0:
            raise InputDataError("ls_rank_tol must be positive")

    def check_design(self, design):
        limit = min(design.n - 1, design.p)
        if self.T > limit:
            raise InputDataError(
                f"T={self.T} exceeds min(n-1, p)={limit} for this design")


@dataclass(frozen=True)
class HardThresholdRule:
    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise InputDataError(f"lambda must be non-negative, got {self.lam}")

    @property
    def threshold(self):
        return float(np.sqrt(2.0 * self.lam))


@dataclass
class SdarFit:
    eta_hat: np.ndarray
    beta_hat: np.ndarray
    d_hat: np.ndarray
    active_set: np.ndarray
    iterations: int
    termination: Termination
    loss_trace: list
    kkt_gap: float
    T: int
    tau: float
    eta_path: list = field(default=None, repr=False)
    active_path: list = field(default=None, repr=False)

    @property
    def converged(self):
        return self.termination is Termination.ACTIVE_SET_REPEAT


def hard_threshold(v, rule):
    """Zero every entry with ``|v_i| < sqrt(2*lambda)``; entries at the threshold are kept."""
    v = np.asarray(v, dtype=np.float64)
    return np.where(np.abs(v) >= rule.threshold, v, 0.0)


def select_active_set(eta, d, tau, T):
    eta = np.asarray(eta, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    p = eta.shape[0]
    if d.shape != eta.shape:
        raise InputDataError(f"eta and d differ in shape: {eta.shape} vs {d.shape}")
    if T > p:
        raise InputDataError(f"T={T} exceeds the number of coordinates p={p}")
    active = _kernels.top_t(np.abs(eta + tau * d), T)
    inactive = np.setdiff1d(np.arange(p), active, assume_unique=True)
    return active, inactive


def solve_active_least_squares(design, active, ls_rank_tol=1e-10):
    """Least-squares coefficients of ``Ybar`` on the columns ``active``.

    Uses a Cholesky factorization of the Gram matrix; if a pivot falls below
    ``ls_rank_tol`` relative to the largest diagonal entry the minimum-norm
    solution is returned instead.
    """
    active = np.asarray(active, dtype=np.int64)
    if active.size > design.n:
        raise OverdeterminedSupportError(
            f"support of size {active.size} exceeds the sample size {design.n}")
    if active.size == 0:
        return np.zeros(0)
    XA = design.Xbar[:, active]
    gram = XA.T @ XA
    rhs = XA.T @ design.Ybar
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
        pivots = np.diag(factor[0]) ** 2
        if pivots.min() >= ls_rank_tol * np.diag(gram).max():
            return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    # singular values of XA scale like sqrt of Gram eigenvalues
    return np.linalg.lstsq(XA, design.Ybar, rcond=np.sqrt(ls_rank_tol))[0]


def update_dual(design, eta, active):
    eta = np.asarray(eta, dtype=np.float64)
    resid = design.Ybar - design.Xbar @ eta
    d = design.Xbar.T @ resid / design.n
    d[np.asarray(active, dtype=np.int64)] = 0.0
    return d


def normalized_loss(design, eta):
    r = design.Ybar - design.Xbar @ np.asarray(eta, dtype=np.float64)
    return float(r @ r) / (2.0 * design.n)


def sdar_fit(design, config, eta0=None, d0=None, record_path=False):
    """Run the iteration from ``eta0`` (default 0) until the active set repeats.

    ``d0`` overrides the initial dual; when omitted it is computed from
    ``eta0``. Passing both is how a warm start from a previous fit is done.
    """
    config.check_design(design)
    n, p = design.n, design.p
    T, tau = int(config.T), float(config.tau)
    Xbar, Ybar = design.Xbar, design.Ybar

    if eta0 is None:
        eta = np.zeros(p)
    else:
        eta = np.array(eta0, dtype=np.float64)
        if eta.shape != (p,):
            raise InputDataError(f"eta0 has shape {eta.shape}, expected ({p},)")
    resid = Ybar - Xbar @ eta
    if d0 is None:
        d = Xbar.T @ resid / n
    else:
        d = np.array(d0, dtype=np.float64)
        if d.shape != (p,):
            raise InputDataError(f"d0 has shape {d.shape}, expected ({p},)")

    losses = [float(resid @ resid) / (2.0 * n)]
    active, _ = select_active_set(eta, d, tau, T)
    seen = {active.tobytes()}
    eta_path = [eta.copy()] if record_path else None
    active_path = [active.copy()] if record_path else None

    termination = Termination.MAX_ITER
    iterations = 0
    for k in range(config.max_iter):
        coef = solve_active_least_squares(design, active, config.ls_rank_tol)
        eta = np.zeros(p)
        eta[active] = coef
        resid = Ybar - Xbar[:, active] @ coef
        d = Xbar.T @ resid / n
        d[active] = 0.0
        losses.append(float(resid @ resid) / (2.0 * n))
        iterations = k + 1
        if record_path:
            eta_path.append(eta.copy())

        new_active, _ = select_active_set(eta, d, tau, T)
        if np.array_equal(new_active, active):
            termination = Termination.ACTIVE_SET_REPEAT
            break
        key = new_active.tobytes()
        if config.cycle_guard and key in seen:
            termination = Termination.CYCLE_DETECTED
            break
        seen.add(key)
        active = new_active
        if record_path:
            active_path.append(active.copy())

    return SdarFit(
        eta_hat=eta,
        beta_hat=coefficients_to_original_scale(eta, design),
        d_hat=d,
        active_set=active,
        iterations=iterations,
        termination=termination,
        loss_trace=losses,
        kkt_gap=kkt_residual(design, eta, tau, T),
        T=T,
        tau=tau,
        eta_path=eta_path,
        active_path=active_path,
    )


def kkt_residual(design, eta, tau, T):
    """Distance of ``eta`` from being a fixed point of the iteration.

    The active set is ``supp(eta)`` padded to ``T`` indices with the largest
    ``tau*|d_i|`` outside it. Returns the larger of the stationarity
    violation ``max |d_A|`` and how far an excluded ``|eta_i + tau*d_i|``
    exceeds the smallest kept one. Zero exactly at fixed points.
    """
    eta = np.asarray(eta, dtype=np.float64)
    p = design.p
    support = np.flatnonzero(eta)
    if support.size > T:
        raise InputDataError(f"eta has {support.size} nonzeros, more than T={T}")
    d = design.Xbar.T @ (design.Ybar - design.Xbar @ eta) / design.n

    in_active = np.zeros(p, dtype=bool)
    in_active[support] = True
    fill = T - support.size
    if fill > 0:
        outside = np.where(in_active, -np.inf, np.abs(tau * d))
        in_active[_kernels.top_t(outside, fill)] = True
    stationarity = float(np.max(np.abs(d[in_active])))
    if in_active.all():
        return stationarity

    # the iteration zeroes the dual on the active set before ranking
    score = np.abs(eta + tau * np.where(in_active, 0.0, d))
    gap = float(score[~in_active].max() - score[in_active].min())
    return max(stationarity, gap, 0.0)

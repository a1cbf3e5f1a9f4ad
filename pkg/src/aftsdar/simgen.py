"""Synthetic censored AFT data.

All randomness comes from numpy's counter-based Philox generator. A
scenario seed is expanded with ``SeedSequence`` into independent named
streams (design, coefficients, noise, censoring, calibration), so each
piece can be regenerated on its own.
"""
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import CalibrationError, InputDataError
from .survival_data import SurvivalDataset

CALIBRATION_DRAWS = 50_000
CALIBRATION_TOL = 0.01
CALIBRATION_STEPS = 60

_STREAMS = ("design", "coef", "noise", "censor", "calibration")


class DesignKind(str, Enum):
    NEIGHBOR = "NeighborCorrelated"
    AR1 = "AR1"


class CoefKind(str, Enum):
    LOG_SCALED = "LogScaled"
    RATIO_SCALED = "RatioScaled"


@dataclass(frozen=True)
class ScenarioSpec:
    n: int
    p: int
    K: int
    rho: float = 0.3
    sigma: float = 1.0
    censor_rate: float = 0.3
    design_kind: DesignKind = DesignKind.NEIGHBOR
    coef_kind: CoefKind = CoefKind.LOG_SCALED
    R: float = 10.0
    random_sign: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "design_kind", DesignKind(self.design_kind))
        object.__setattr__(self, "coef_kind", CoefKind(self.coef_kind))
        if self.n < 2 or self.p < 2:
            raise InputDataError(f"need n >= 2 and p >= 2, got n={self.n}, p={self.p}")
        if not 1 <= self.K <= self.p:
            raise InputDataError(f"K must lie in [1, p], got K={self.K}, p={self.p}")
        if not 0 <= self.rho < 1:
            raise InputDataError(f"rho must lie in [0, 1), got {self.rho}")
        if self.sigma < 0:
            raise InputDataError(f"sigma must be non-negative, got {self.sigma}")
        if not 0 <= self.censor_rate < 1:
            raise InputDataError(f"censor_rate must lie in [0, 1), got {self.censor_rate}")
        if self.coef_kind is CoefKind.RATIO_SCALED and self.R <= 1:
            raise InputDataError(f"R must exceed 1, got {self.R}")
        if self.coef_kind is CoefKind.LOG_SCALED and self.sigma == 0:
            raise InputDataError("LogScaled coefficients need sigma > 0 (m1 = sigma*sqrt(2 log p / n))")

    def magnitude_range(self):
        if self.coef_kind is CoefKind.LOG_SCALED:
            m1 = self.sigma * np.sqrt(2.0 * np.log(self.p) / self.n)
            return m1, 100.0 * m1
        return 1.0, float(self.R)

    def to_dict(self):
        d = asdict(self)
        d["design_kind"] = self.design_kind.value
        d["coef_kind"] = self.coef_kind.value
        return d


@dataclass(frozen=True)
class SimulatedInstance:
    dataset: SurvivalDataset
    beta_star: np.ndarray
    true_support: np.ndarray
    realized_censor_rate: float
    eta_c: float
    log_eta_c: float


def make_rng(seed):
    """Philox generator from an int, a SeedSequence, or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def streams(seed):
    children = np.random.SeedSequence(int(seed)).spawn(len(_STREAMS))
    return dict(zip(_STREAMS, children))


def gen_design_neighbor(n, p, rho, seed):
    if p < 2:
        raise InputDataError("neighbor design needs p >= 2")
    Z = make_rng(seed).standard_normal((n, p))
    X = Z.copy()
    X[:, 1:-1] += rho * (Z[:, 2:] + Z[:, :-2])
    return X


def gen_design_ar1(n, p, rho, seed):
    if not abs(rho) < 1:
        raise InputDataError(f"|rho| must be < 1, got {rho}")
    Z = make_rng(seed).standard_normal((n, p))
    X = np.empty_like(Z)
    X[:, 0] = Z[:, 0]
    scale = np.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + scale * Z[:, j]
    return X


def gen_design(spec, seed=None):
    seed = streams(spec.seed)["design"] if seed is None else seed
    if spec.design_kind is DesignKind.NEIGHBOR:
        return gen_design_neighbor(spec.n, spec.p, spec.rho, seed)
    return gen_design_ar1(spec.n, spec.p, spec.rho, seed)


def gen_coefficients(spec, seed=None):
    """K-sparse coefficients with magnitudes Uniform(m1, m2) on a random support."""
    rng = make_rng(streams(spec.seed)["coef"] if seed is None else seed)
    support = np.sort(rng.choice(spec.p, size=spec.K, replace=False))
    m1, m2 = spec.magnitude_range()
    values = rng.uniform(m1, m2, size=spec.K)
    if spec.random_sign:
        values *= rng.choice((-1.0, 1.0), size=spec.K)
    beta = np.zeros(spec.p)
    beta[support] = values
    return beta, support


def _calibrate(X, beta_star, sigma, target_rate, seed, draws):
    if not 0 <= target_rate < 1:
        raise CalibrationError(f"target censoring rate must lie in [0, 1), got {target_rate}")
    if target_rate == 0:
        raise CalibrationError(
            "a zero censoring rate is unreachable with Uniform(0, eta) censoring; "
            "disable censoring instead")
    rng = make_rng(seed)
    lp = X @ beta_star
    log_t = lp[rng.integers(0, lp.shape[0], size=draws)] + sigma * rng.standard_normal(draws)
    log_u = np.log1p(-rng.random(draws))  # log of a Uniform(0, 1] draw

    lo = float(log_t.min()) - 1.0                  # censoring fraction 1 here
    hi = float(log_t.max() - log_u.min()) + 1.0    # and 0 here
    rate_lo, rate_hi = 1.0, 0.0
    for _ in range(CALIBRATION_STEPS):
        mid = 0.5 * (lo + hi)
        rate = _kernels.censored_fraction(log_t, log_u, mid)
        if not rate_hi <= rate <= rate_lo:
            raise CalibrationError("censoring fraction is not monotone in the bound")
        if abs(rate - target_rate) <= CALIBRATION_TOL:
            return mid, rate
        if rate > target_rate:
            lo, rate_lo = mid, rate
        else:
            hi, rate_hi = mid, rate
    raise CalibrationError(
        f"no censoring bound reaches rate {target_rate} +/- {CALIBRATION_TOL} "
        f"after {CALIBRATION_STEPS} bisection steps")


def calibrate_censoring(X, beta_star, sigma, target_rate, seed, draws=CALIBRATION_DRAWS):
    """Upper bound ``eta_c`` of Uniform(0, eta_c) censoring giving ``target_rate``.

    Censoring probability P(T > C) is estimated on ``draws`` surrogate
    failure times (linear predictors resampled from the rows of ``X`` plus
    fresh normal noise) and matched by bisection on ``log(eta_c)``.
    """
    log_eta, _ = _calibrate(np.asarray(X, dtype=np.float64), np.asarray(beta_star, dtype=np.float64),
                            sigma, target_rate, seed, draws)
    return float(np.exp(log_eta))


def gen_instance(spec):
    s = streams(spec.seed)
    X = gen_design(spec, s["design"])
    beta, support = gen_coefficients(spec, s["coef"])
    log_t = X @ beta + spec.sigma * make_rng(s["noise"]).standard_normal(spec.n)

    if spec.censor_rate == 0:
        log_eta = np.inf
        y = log_t
        delta = np.ones(spec.n, dtype=np.int64)
    else:
        log_eta, _ = _calibrate(X, beta, spec.sigma, spec.censor_rate, s["calibration"],
                                CALIBRATION_DRAWS)
        # C = eta_c * U kept on the log scale: ln C can be very negative
        log_c = log_eta + np.log1p(-make_rng(s["censor"]).random(spec.n))
        delta = (log_t <= log_c).astype(np.int64)
        y = np.minimum(log_t, log_c)

    return SimulatedInstance(
        dataset=SurvivalDataset(y=y, delta=delta, X=X),
        beta_star=beta,
        true_support=support,
        realized_censor_rate=float(1.0 - delta.mean()),
        eta_c=float(np.exp(log_eta)) if np.isfinite(log_eta) else float("inf"),
        log_eta_c=float(log_eta),
    )

"""Extreme-value margins: parametric families, the Kumaraswamy-blended
EVD, and maximum-likelihood fitting with model selection.

Families map onto scipy.stats as follows:

    weibull  (shape, scale)        -> weibull_min(c=shape, scale=scale)
    gumbel   (loc, scale)          -> gumbel_r(loc, scale)
    frechet  (shape, scale)        -> invweibull(c=shape, scale=scale)
    gev      (loc, scale, shape xi) -> genextreme(c=-xi, loc, scale)

The blended CDF is F1(x)^T(x) * F2(x)^(1 - T(x)) where T is a
Kumaraswamy CDF on the rescaled interval [l, u].
"""

import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np
from scipy import stats
from scipy.optimize import brentq, minimize

from ..errors import DataError, NumericError
from .lagdep import EmpiricalCdf


logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
POINT_MASS_SHAPE = 50.0
MIN_SELECT_SAMPLES = 5
NELDER_MEAD_OPTIONS = {"xatol": np.inf, "fatol": 1e-9, "maxiter": 2000}

ArrayLike = Union[float, Sequence[float], np.ndarray]


class InvalidParams(NumericError):
    """Family parameters outside their domain."""


class DegenerateSample(DataError):
    """All samples are identical; no scale can be estimated."""


class NonFinite(NumericError):
    """The likelihood is not finite anywhere the optimizer looked."""


class InsufficientSamples(DataError):
    """Too few samples for the requested fit."""


class NonMonotoneWarning(UserWarning):
    """A fitted blended CDF decreases somewhere on its check grid."""


class EvdTag(Enum):
    """Parametric extreme-value family."""

    WEIBULL = "weibull"
    GUMBEL = "gumbel"
    FRECHET = "frechet"
    GEV = "gev"


PARAM_NAMES = {
    EvdTag.WEIBULL: ("shape", "scale"),
    EvdTag.GUMBEL: ("loc", "scale"),
    EvdTag.FRECHET: ("shape", "scale"),
    EvdTag.GEV: ("loc", "scale", "shape"),
}


@dataclass(frozen=True)
class EvdFamily:
    """One parametric family with its parameters (order as in PARAM_NAMES)."""

    tag: EvdTag
    params: Tuple[float, ...]

    def __post_init__(self) -> None:
        """Validate parameter count and domain."""
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        names = PARAM_NAMES[self.tag]
        if len(self.params) != len(names):
            raise InvalidParams(
                f"{self.tag.value} takes {len(names)} parameters {names}, got {len(self.params)}"
            )
        if not all(math.isfinite(p) for p in self.params):
            raise InvalidParams(f"{self.tag.value} parameters must be finite: {self.params}")
        for name, value in zip(names, self.params):
            if name in ("shape", "scale") and self.tag is not EvdTag.GEV and value <= 0:
                raise InvalidParams(f"{self.tag.value} {name} must be positive, got {value}")
        if self.tag is EvdTag.GEV and self.params[1] <= 0:
            raise InvalidParams(f"gev scale must be positive, got {self.params[1]}")

    @property
    def n_params(self) -> int:
        return len(self.params)

    def distribution(self):
        """Frozen scipy.stats distribution."""
        if self.tag is EvdTag.WEIBULL:
            return stats.weibull_min(c=self.params[0], scale=self.params[1])
        if self.tag is EvdTag.GUMBEL:
            return stats.gumbel_r(loc=self.params[0], scale=self.params[1])
        if self.tag is EvdTag.FRECHET:
            return stats.invweibull(c=self.params[0], scale=self.params[1])
        loc, scale, xi = self.params
        return stats.genextreme(c=-xi, loc=loc, scale=scale)

    def describe(self) -> str:
        names = PARAM_NAMES[self.tag]
        body = ", ".join(f"{n}={v:.6f}" for n, v in zip(names, self.params))
        return f"{self.tag.value}({body})"


@dataclass(frozen=True)
class KumaraswamyDistortion:
    """Blend weight T on the interval [lower, upper] with shapes alpha, beta."""

    lower: float
    upper: float
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not self.lower < self.upper:
            raise InvalidParams(f"Interval needs lower < upper, got [{self.lower}, {self.upper}]")
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidParams(f"Shapes must be positive, got ({self.alpha}, {self.beta})")
        if not all(math.isfinite(v) for v in (self.lower, self.upper, self.alpha, self.beta)):
            raise InvalidParams("Distortion parameters must be finite")


@dataclass(frozen=True)
class BlendedEvd:
    """Geometric blend of two families under a Kumaraswamy weight."""

    f1: EvdFamily
    f2: EvdFamily
    distortion: KumaraswamyDistortion

    @property
    def n_params(self) -> int:
        # l and u are fixed from the sample, not estimated
        return self.f1.n_params + self.f2.n_params + 2

    def describe(self) -> str:
        d = self.distortion
        return (
            f"blended[{self.f1.describe()} | {self.f2.describe()} | "
            f"T(l={d.lower:.6f}, u={d.upper:.6f}, alpha={d.alpha:.6f}, beta={d.beta:.6f})]"
        )


Margin = Union[EvdFamily, BlendedEvd]


@dataclass(frozen=True)
class FittedMargin:
    """A fitted margin with its log-likelihood.

    Attributes:
        model: Parametric family or blend
        log_likelihood: Value at the optimum (finite)
        n_samples: Number of samples fitted (>= 1)
        warnings: Messages raised while fitting, e.g. non-monotone blends
    """

    model: Margin
    log_likelihood: float
    n_samples: int
    warnings: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not math.isfinite(self.log_likelihood):
            raise NonFinite(f"Log-likelihood must be finite, got {self.log_likelihood}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be at least 1, got {self.n_samples}")

    @property
    def family(self) -> str:
        return "blended" if isinstance(self.model, BlendedEvd) else self.model.tag.value

    @property
    def n_params(self) -> int:
        return self.model.n_params

    @property
    def aic(self) -> float:
        return 2.0 * self.n_params - 2.0 * self.log_likelihood

    def cdf(self, x: ArrayLike):
        return margin_cdf(self.model, x)

    def pdf(self, x: ArrayLike):
        return margin_pdf(self.model, x)

    def ppf(self, q: float) -> float:
        """Quantile function (root of the CDF for blends)."""
        if isinstance(self.model, EvdFamily):
            return float(self.model.distribution().ppf(q))
        return _blended_ppf(self.model, q)

    def describe(self) -> str:
        return self.model.describe()


# ============================================================================
# Distribution functions
# ============================================================================


def evd_cdf(family: EvdFamily, x: ArrayLike):
    """Family CDF; 0 below and 1 above the support."""
    return _shaped(x, family.distribution().cdf(np.asarray(x, dtype=float)))


def evd_pdf(family: EvdFamily, x: ArrayLike):
    """Family density."""
    return _shaped(x, family.distribution().pdf(np.asarray(x, dtype=float)))


def kumaraswamy_t(d: KumaraswamyDistortion, x: ArrayLike):
    """T = 1 - (1 - z^alpha)^beta with z = clamp((x - l) / (u - l), 0, 1)."""
    z = np.clip((np.asarray(x, dtype=float) - d.lower) / (d.upper - d.lower), 0.0, 1.0)
    return _shaped(x, 1.0 - (1.0 - z ** d.alpha) ** d.beta)


def kumaraswamy_t_prime(d: KumaraswamyDistortion, x: ArrayLike):
    """dT/dx; zero outside the open interval (l, u)."""
    width = d.upper - d.lower
    z = (np.asarray(x, dtype=float) - d.lower) / width
    inside = (z > 0.0) & (z < 1.0)
    zc = np.where(inside, z, 0.5)
    value = d.alpha * d.beta * zc ** (d.alpha - 1.0) * (1.0 - zc ** d.alpha) ** (d.beta - 1.0)
    return _shaped(x, np.where(inside, value / width, 0.0))


def blended_cdf(b: BlendedEvd, x: ArrayLike):
    """F1^T * F2^(1 - T); exactly F1 where T = 1 and F2 where T = 0."""
    xs = np.asarray(x, dtype=float)
    t = np.asarray(kumaraswamy_t(b.distortion, xs))
    f1 = b.f1.distribution().cdf(xs)
    f2 = b.f2.distribution().cdf(xs)
    with np.errstate(divide="ignore", invalid="ignore"):
        mixed = np.exp(t * np.log(f1) + (1.0 - t) * np.log(f2))
    mixed = np.where((f1 > 0) & (f2 > 0), mixed, 0.0)
    return _shaped(x, np.where(t >= 1.0, f1, np.where(t <= 0.0, f2, mixed)))


def blended_pdf(b: BlendedEvd, x: ArrayLike):
    """Analytic derivative F * [T' ln(F1/F2) + T f1/F1 + (1 - T) f2/F2]."""
    xs = np.asarray(x, dtype=float)
    d1, d2 = b.f1.distribution(), b.f2.distribution()
    t = np.asarray(kumaraswamy_t(b.distortion, xs))
    t_prime = np.asarray(kumaraswamy_t_prime(b.distortion, xs))
    big_f = np.asarray(blended_cdf(b, xs))
    f1_pdf, f2_pdf = d1.pdf(xs), d2.pdf(xs)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_f1, log_f2 = d1.logcdf(xs), d2.logcdf(xs)
        hazard1 = np.exp(d1.logpdf(xs) - log_f1)
        hazard2 = np.exp(d2.logpdf(xs) - log_f2)
        bracket = t_prime * (log_f1 - log_f2) + t * hazard1 + (1.0 - t) * hazard2
        value = big_f * bracket
    value = np.where(big_f > 0, value, 0.0)

    pure1 = (t >= 1.0) & (t_prime == 0.0)
    pure2 = (t <= 0.0) & (t_prime == 0.0)
    value = np.where(pure1, f1_pdf, np.where(pure2, f2_pdf, value))
    return _shaped(x, np.nan_to_num(value, nan=0.0, posinf=0.0, neginf=0.0))


def margin_cdf(model: Margin, x: ArrayLike):
    if isinstance(model, BlendedEvd):
        return blended_cdf(model, x)
    return evd_cdf(model, x)


def margin_pdf(model: Margin, x: ArrayLike):
    if isinstance(model, BlendedEvd):
        return blended_pdf(model, x)
    return evd_pdf(model, x)


def is_monotone(model: BlendedEvd, lower: float, upper: float, points: int = 1000) -> bool:
    """True when the blended CDF never decreases on an even check grid."""
    grid = np.linspace(lower, upper, points)
    return bool(np.all(np.diff(np.asarray(blended_cdf(model, grid))) >= -1e-12))


# ============================================================================
# Fitting
# ============================================================================


def mle_fit(
    samples: Sequence[float],
    family: str,
    components: Tuple[str, str] = ("weibull", "weibull"),
) -> FittedMargin:
    """Maximum-likelihood fit by Nelder-Mead on the mean negative log-likelihood.

    Positive parameters are optimized in log space. The simplex starts at
    method-of-moments estimates (the component MLEs with alpha = beta = 1
    for blends), so the result is never worse than the starting point.

    Args:
        samples: Positive observations (at least 2)
        family: weibull, gumbel, frechet, gev or blended
        components: Component families of a blend

    Raises:
        InsufficientSamples: Fewer than 2 samples
        DataError: A sample is not positive and finite
        DegenerateSample: All samples identical
        NonFinite: The likelihood is not finite at the start or the optimum
    """
    x = _check_samples(samples, minimum=2)
    if family == "blended":
        return _fit_blended(x, components)

    tag = EvdTag(family)
    theta0 = _to_theta(tag, _moment_start(tag, x))
    theta, value = _minimize(
        lambda th: _objective(lambda: EvdFamily(tag, _from_theta(tag, th)), x), theta0
    )
    return FittedMargin(
        model=EvdFamily(tag, _from_theta(tag, theta)),
        log_likelihood=-value * x.size,
        n_samples=int(x.size),
    )


def select_model(
    samples: Sequence[float],
    candidates: Sequence[str],
    components: Tuple[str, str] = ("weibull", "weibull"),
) -> FittedMargin:
    """Fit every candidate and keep the highest log-likelihood.

    Ties go to the candidate with fewer parameters, then to list order.

    Raises:
        ValueError: If `candidates` is empty
        InsufficientSamples: Fewer than 5 samples
        DegenerateSample: All samples identical
        NumericError: If no candidate could be fitted
    """
    if not candidates:
        raise ValueError("At least one candidate family is required")
    _check_samples(samples, minimum=MIN_SELECT_SAMPLES)

    fitted: List[Tuple[int, FittedMargin]] = []
    failures: List[str] = []
    for order, family in enumerate(candidates):
        try:
            margin = mle_fit(samples, family, components)
        except (NumericError, InvalidParams) as e:
            failures.append(f"{family}: {e}")
            logger.warning(f"Margin candidate {family} failed: {e}")
            continue
        logger.debug(
            f"Candidate {margin.describe()}: loglik {margin.log_likelihood:.6f}, "
            f"AIC {margin.aic:.6f}"
        )
        fitted.append((order, margin))

    if not fitted:
        raise NumericError("No margin candidate could be fitted", failures)

    _, best = min(fitted, key=lambda item: (-item[1].log_likelihood, item[1].n_params, item[0]))
    return best


def point_mass_margin(samples: Sequence[float]) -> FittedMargin:
    """Near-degenerate Weibull (shape 50) centred on the sample mean.

    Used when a sample is too small or constant for maximum likelihood.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise InsufficientSamples("Point-mass margin needs at least one sample")
    center = float(np.mean(x))
    scale = center if center > 0 else 1.0
    family = EvdFamily(EvdTag.WEIBULL, (POINT_MASS_SHAPE, scale))
    loglik = float(np.sum(family.distribution().logpdf(np.maximum(x, 1e-12))))
    return FittedMargin(
        model=family,
        log_likelihood=loglik,
        n_samples=int(x.size),
        warnings=("point-mass fallback",),
    )


def ks_distance(margin: FittedMargin, empirical: EmpiricalCdf) -> float:
    """Kolmogorov distance between a fitted margin and an ECDF."""
    model = np.asarray(margin.cdf(empirical.support), dtype=float)
    upper = np.abs(model - empirical.probabilities)
    below = np.concatenate([[0.0], empirical.probabilities[:-1]])
    lower = np.abs(model - below)
    return float(max(upper.max(), lower.max()))


def _fit_blended(x: np.ndarray, components: Tuple[str, str]) -> FittedMargin:
    tag1, tag2 = EvdTag(components[0]), EvdTag(components[1])
    lower, upper = (float(v) for v in np.percentile(x, [10, 90]))
    if not lower < upper:
        lower, upper = float(x.min()), float(x.max())

    start1 = mle_fit(x, tag1.value).model
    start2 = mle_fit(x, tag2.value).model
    n1 = len(start1.params)
    theta0 = np.concatenate(
        [_to_theta(tag1, start1.params), _to_theta(tag2, start2.params), [0.0, 0.0]]
    )

    def build(theta: np.ndarray) -> BlendedEvd:
        n2 = len(PARAM_NAMES[tag2])
        return BlendedEvd(
            f1=EvdFamily(tag1, _from_theta(tag1, theta[:n1])),
            f2=EvdFamily(tag2, _from_theta(tag2, theta[n1:n1 + n2])),
            distortion=KumaraswamyDistortion(
                lower, upper, _safe_exp(theta[-2]), _safe_exp(theta[-1])
            ),
        )

    theta, value = _minimize(lambda th: _objective(lambda: build(th), x), theta0)
    model = build(theta)

    notes: Tuple[str, ...] = ()
    span = float(x.max() - x.min())
    if not is_monotone(model, max(float(x.min()) - span, 0.0), float(x.max()) + span):
        message = f"Blended margin {model.describe()} is not monotone on its check grid"
        warnings.warn(message, NonMonotoneWarning)
        logger.warning(message)
        notes = (message,)

    return FittedMargin(
        model=model,
        log_likelihood=-value * x.size,
        n_samples=int(x.size),
        warnings=notes,
    )


def _check_samples(samples: Sequence[float], minimum: int) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < minimum:
        raise InsufficientSamples(f"Need at least {minimum} samples, got {x.size}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise DataError("Margin samples must be positive and finite")
    if np.all(x == x[0]):
        raise DegenerateSample(f"All {x.size} samples equal {x[0]}")
    return x


def _moment_start(tag: EvdTag, x: np.ndarray) -> Tuple[float, ...]:
    """Method-of-moments starting parameters."""
    if tag in (EvdTag.WEIBULL, EvdTag.FRECHET):
        logs = np.log(x)
        sd = float(np.std(logs))
        shape = math.pi / (math.sqrt(6.0) * sd) if sd > 0 else 1.0
        sign = 1.0 if tag is EvdTag.WEIBULL else -1.0
        scale = math.exp(float(np.mean(logs)) + sign * EULER_GAMMA / shape)
        return shape, scale
    sd = float(np.std(x))
    scale = sd * math.sqrt(6.0) / math.pi
    loc = float(np.mean(x)) - EULER_GAMMA * scale
    if tag is EvdTag.GUMBEL:
        return loc, scale
    return loc, scale, 0.0


def _to_theta(tag: EvdTag, params: Sequence[float]) -> np.ndarray:
    if tag in (EvdTag.WEIBULL, EvdTag.FRECHET):
        return np.log(np.asarray(params, dtype=float))
    if tag is EvdTag.GUMBEL:
        return np.array([params[0], math.log(params[1])])
    return np.array([params[0], math.log(params[1]), params[2]])


def _from_theta(tag: EvdTag, theta: Sequence[float]) -> Tuple[float, ...]:
    if tag in (EvdTag.WEIBULL, EvdTag.FRECHET):
        return _safe_exp(theta[0]), _safe_exp(theta[1])
    if tag is EvdTag.GUMBEL:
        return float(theta[0]), _safe_exp(theta[1])
    return float(theta[0]), _safe_exp(theta[1]), float(theta[2])


def _safe_exp(value: float) -> float:
    return math.exp(min(float(value), 700.0))


def _objective(build: Callable[[], Margin], x: np.ndarray) -> float:
    """Mean negative log-likelihood; +inf wherever it is undefined."""
    try:
        model = build()
    except InvalidParams:
        return np.inf
    with np.errstate(all="ignore"):
        if isinstance(model, BlendedEvd):
            density = np.asarray(blended_pdf(model, x))
            if np.any(density <= 0):
                return np.inf
            logpdf = np.log(density)
        else:
            logpdf = model.distribution().logpdf(x)
    value = -float(np.mean(logpdf))
    return value if math.isfinite(value) else np.inf


def _minimize(
    objective: Callable[[np.ndarray], float],
    theta0: np.ndarray,
) -> Tuple[np.ndarray, float]:
    """Nelder-Mead from a fixed simplex; raise NonFinite if nothing finite was found."""
    if not math.isfinite(objective(theta0)):
        raise NonFinite("Likelihood is not finite at the starting point")
    theta0 = np.asarray(theta0, dtype=float)
    step = 0.1 * np.maximum(np.abs(theta0), 1.0)
    simplex = np.vstack([theta0, theta0 + np.diag(step)])
    result = minimize(
        objective,
        theta0,
        method="Nelder-Mead",
        options={**NELDER_MEAD_OPTIONS, "initial_simplex": simplex},
    )
    if not math.isfinite(result.fun):
        raise NonFinite("Likelihood is not finite at the optimum")
    return np.asarray(result.x), float(result.fun)


def _blended_ppf(model: BlendedEvd, q: float) -> float:
    """Root of F(x) = q bracketed by the component quantiles."""
    a = float(model.f1.distribution().ppf(q))
    b = float(model.f2.distribution().ppf(q))
    lo, hi = min(a, b), max(a, b)
    if lo == hi:
        return lo
    f_lo = float(blended_cdf(model, lo)) - q
    if f_lo >= 0:
        return lo
    return float(brentq(lambda v: float(blended_cdf(model, v)) - q, lo, hi, xtol=1e-12))


def _shaped(x: ArrayLike, values: np.ndarray):
    """Return a float for scalar input, an array otherwise."""
    if np.ndim(x) == 0:
        return float(values)
    return np.asarray(values, dtype=float)

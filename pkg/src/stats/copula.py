"""Gumbel-Hougaard copula and the joint model of spatial and temporal lags.

    C(u, v) = exp(-[(-ln u)^theta + (-ln v)^theta]^(1/theta)),  theta >= 1
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.stats import kendalltau

from ..errors import DataError, NumericError
from .evd import FittedMargin
from .lagdep import LagDependence


logger = logging.getLogger(__name__)

THETA_MAX = 50.0
MIN_PAIRS = 8
CLAMP = 1e-12

ArrayLike = Union[float, Sequence[float], np.ndarray]


class InvalidTheta(NumericError):
    """Dependence parameter below 1 or not finite."""


class InsufficientPairs(DataError):
    """Too few (or fully tied) pairs to estimate Kendall's tau."""


@dataclass(frozen=True)
class GhParam:
    """Dependence parameter; 1 is independence."""

    theta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.theta) and self.theta >= 1.0):
            raise InvalidTheta(f"Gumbel-Hougaard theta must be >= 1, got {self.theta}")

    @property
    def kendall_tau(self) -> float:
        return 1.0 - 1.0 / self.theta


@dataclass(frozen=True)
class JointModel:
    """Copula over the spatial (h) and temporal (tau) lag margins."""

    copula: GhParam
    margin_h: FittedMargin
    margin_tau: FittedMargin


def gh_cdf(p: GhParam, u: ArrayLike, v: ArrayLike):
    """Copula CDF with exact boundaries C(u,0)=C(0,v)=0, C(u,1)=u, C(1,v)=v."""
    u_arr, v_arr = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    uc = np.clip(u_arr, CLAMP, 1.0 - CLAMP)
    vc = np.clip(v_arr, CLAMP, 1.0 - CLAMP)
    a = (-np.log(uc)) ** p.theta + (-np.log(vc)) ** p.theta
    value = np.exp(-(a ** (1.0 / p.theta)))

    value = np.where(v_arr >= 1.0, u_arr, value)
    value = np.where(u_arr >= 1.0, v_arr, value)
    value = np.where((u_arr <= 0.0) | (v_arr <= 0.0), 0.0, value)
    return _shaped(u, v, value)


def gh_density(p: GhParam, u: ArrayLike, v: ArrayLike):
    """Mixed derivative of the copula CDF.

    c = C / (u v) * (x y)^(theta - 1) * A^(1/theta - 2) * (A^(1/theta) + theta - 1)
    with x = -ln u, y = -ln v, A = x^theta + y^theta.
    """
    u_arr, v_arr = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    if p.theta == 1.0:
        return _shaped(u, v, np.ones_like(u_arr))
    theta = p.theta
    uc = np.clip(u_arr, CLAMP, 1.0 - CLAMP)
    vc = np.clip(v_arr, CLAMP, 1.0 - CLAMP)
    x, y = -np.log(uc), -np.log(vc)
    a = x ** theta + y ** theta
    root = a ** (1.0 / theta)
    log_c = (
        -root
        - np.log(uc) - np.log(vc)
        + (theta - 1.0) * (np.log(x) + np.log(y))
        + (1.0 / theta - 2.0) * np.log(a)
        + np.log(root + theta - 1.0)
    )
    return _shaped(u, v, np.exp(log_c))


def kendall_tau(pairs: np.ndarray) -> float:
    """Kendall's tau (tau-b, tie corrected) of an (n, 2) array."""
    data = np.asarray(pairs, dtype=float)
    tau, _ = kendalltau(data[:, 0], data[:, 1])
    return float(tau)


def fit_theta(pairs: Sequence[Tuple[float, float]]) -> GhParam:
    """Invert Kendall's tau: theta = 1 / (1 - tau), clamped to [1, 50].

    Raises:
        InsufficientPairs: Fewer than 8 pairs, or tau undefined because of ties
    """
    data = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if len(data) < MIN_PAIRS:
        raise InsufficientPairs(f"Need at least {MIN_PAIRS} pairs, got {len(data)}")
    tau = kendall_tau(data)
    if not math.isfinite(tau):
        raise InsufficientPairs("Kendall's tau is undefined (a coordinate is fully tied)")

    if tau < 0:
        logger.warning(
            f"Negative Kendall tau {tau:.6f}; Gumbel-Hougaard cannot represent it, using theta = 1"
        )
        return GhParam(1.0)
    theta = 1.0 / (1.0 - tau) if tau < 1.0 else math.inf
    if theta > THETA_MAX:
        logger.warning(f"Kendall tau {tau:.6f} implies theta > {THETA_MAX:g}; clamped")
        return GhParam(THETA_MAX)
    return GhParam(theta)


def gh_sample(p: GhParam, n: int, seed: int) -> np.ndarray:
    """Draw n pairs by the Marshall-Olkin construction.

    The frailty V is positive stable with index 1/theta, drawn with the
    Chambers-Mallows-Stuck (Kanter) representation; U_i = exp(-(E_i / V)^(1/theta)).
    """
    rng = np.random.default_rng(seed)
    alpha = 1.0 / p.theta
    angle = rng.uniform(0.0, math.pi, size=n)
    w = rng.exponential(size=n)
    e = rng.exponential(size=(n, 2))

    if p.theta == 1.0:
        frailty = np.ones(n)
    else:
        frailty = (
            np.sin(alpha * angle) / np.sin(angle) ** (1.0 / alpha)
            * (np.sin((1.0 - alpha) * angle) / w) ** ((1.0 - alpha) / alpha)
        )
    pairs = np.exp(-((e / frailty[:, None]) ** alpha))
    return np.clip(pairs, np.finfo(float).tiny, np.nextafter(1.0, 0.0))


def joint_cdf(m: JointModel, h: ArrayLike, tau: ArrayLike):
    """H(h, tau) = C(F(h), G(tau))."""
    return gh_cdf(m.copula, m.margin_h.cdf(h), m.margin_tau.cdf(tau))


def joint_pdf(m: JointModel, h: ArrayLike, tau: ArrayLike):
    """c(F(h), G(tau)) * f(h) * g(tau)."""
    density = gh_density(m.copula, m.margin_h.cdf(h), m.margin_tau.cdf(tau))
    return density * m.margin_h.pdf(h) * m.margin_tau.pdf(tau)


def paired_lag_values(dep_h: LagDependence, dep_tau: LagDependence) -> np.ndarray:
    """Align spatial and temporal max lags by ratio-bin rank.

    The shorter dependence keeps every bin; evenly spaced bins are taken
    from the longer one, so both sides stay in ascending ratio order.

    Returns:
        (m, 2) array of (SLD value, TLD value), m = min of the bin counts
    """
    m = min(len(dep_h), len(dep_tau))
    h_idx = _even_indices(len(dep_h), m)
    t_idx = _even_indices(len(dep_tau), m)
    return np.column_stack([dep_h.max_lags[h_idx], dep_tau.max_lags[t_idx]])


def _even_indices(length: int, count: int) -> np.ndarray:
    if count == 0:
        return np.array([], dtype=int)
    return np.round(np.linspace(0, length - 1, count)).astype(int)


def _shaped(u: ArrayLike, v: ArrayLike, values: np.ndarray):
    if np.ndim(u) == 0 and np.ndim(v) == 0:
        return float(values)
    return values

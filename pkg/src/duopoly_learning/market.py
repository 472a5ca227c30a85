"""Vertical-differentiation duopoly with closed-form price equilibrium.

Consumers of type ``theta ~ U[0, 1]`` buy from the high-quality firm, the
low-quality firm, or neither. Every quantity here is an explicit rational
function of the two qualities, so the functions are pure and cheap; the
``*_utility`` helpers also broadcast over numpy arrays for grid work.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

EPS = 1e-12


class DegenerateQualitiesError(ValueError):
    """Raised when the demand formulas would divide by (near) zero."""


@dataclass(frozen=True)
class QualityPair:
    """Ordered model qualities, ``0 <= q_l <= q_h <= 1``."""

    q_l: float
    q_h: float

    def __post_init__(self):
        if not (0.0 <= self.q_l <= 1.0 and 0.0 <= self.q_h <= 1.0):
            raise ValueError(f"qualities must lie in [0, 1], got ({self.q_l}, {self.q_h})")
        if self.q_l > self.q_h:
            raise ValueError(
                f"q_l={self.q_l} exceeds q_h={self.q_h}; relabel the firms before pricing"
            )

    @property
    def rho(self) -> float:
        return self.q_l / self.q_h if self.q_h > 0 else 0.0

    def scaled(self, c: float) -> "QualityPair":
        return QualityPair(c * self.q_l, c * self.q_h)


@dataclass(frozen=True)
class PriceQuote:
    p_l: float
    p_h: float

    def __post_init__(self):
        if self.p_l < 0 or self.p_h < 0:
            raise ValueError(f"prices must be non-negative, got ({self.p_l}, {self.p_h})")


@dataclass(frozen=True)
class MarketOutcome:
    """Prices, demands and firm revenues at one quality pair."""

    prices: PriceQuote
    demand_l: float
    demand_h: float
    utility_l: float
    utility_h: float


class UtilityGradients(NamedTuple):
    dUh_dqh: float
    dUl_dqh: float
    dUl_dql: float
    dUh_dql: float


def consumer_utility(theta: float, q: float, p: float) -> float:
    """Surplus ``theta * q - p`` of buying a model; not buying is worth 0."""
    return theta * q - p


def demands(q: QualityPair, prices: PriceQuote, eps: float = EPS) -> tuple[float, float]:
    """Market shares implied by the two indifference thresholds.

    The raw shares can leave ``[0, 1]`` at non-equilibrium prices; they are
    clamped so both lie in ``[0, 1]`` and sum to at most one.

    Raises:
        DegenerateQualitiesError: if ``q_l`` or ``q_h - q_l`` is below ``eps``.
            Use :func:`equilibrium_outcome`, which handles those cases.
    """
    if q.q_l <= eps or q.q_h - q.q_l <= eps:
        raise DegenerateQualitiesError(
            f"demand thresholds undefined at q=({q.q_l}, {q.q_h})"
        )
    theta_h = (prices.p_h - prices.p_l) / (q.q_h - q.q_l)
    theta_l = prices.p_l / q.q_l
    d_h = min(max(1.0 - theta_h, 0.0), 1.0)
    d_l = min(max(theta_h - theta_l, 0.0), 1.0)
    d_l = min(d_l, 1.0 - d_h)
    return d_l, d_h


def equilibrium_prices(q: QualityPair, eps: float = EPS) -> PriceQuote:
    if q.q_h - q.q_l <= eps:
        # identical models: undercutting drives both prices to zero
        return PriceQuote(0.0, 0.0)
    gap = q.q_h - q.q_l
    denom = 4.0 * q.q_h - q.q_l
    return PriceQuote(q.q_l * gap / denom, 2.0 * q.q_h * gap / denom)


def low_utility(q_l, q_h):
    """Equilibrium revenue of the low-quality firm (broadcasts over arrays)."""
    q_l = np.asarray(q_l, dtype=float)
    q_h = np.asarray(q_h, dtype=float)
    denom = 4.0 * q_h - q_l
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > 0, q_l * q_h * (q_h - q_l) / denom**2, 0.0)
    return out[()] if out.ndim == 0 else out


def high_utility(q_l, q_h):
    """Equilibrium revenue of the high-quality firm (broadcasts over arrays)."""
    q_l = np.asarray(q_l, dtype=float)
    q_h = np.asarray(q_h, dtype=float)
    denom = 4.0 * q_h - q_l
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > 0, 4.0 * q_h**2 * (q_h - q_l) / denom**2, 0.0)
    return out[()] if out.ndim == 0 else out


def equilibrium_outcome(q: QualityPair, eps: float = EPS) -> MarketOutcome:
    """Equilibrium prices, demands and revenues.

    Demands come from the closed forms ``q_h / (4 q_h - q_l)`` and
    ``2 q_h / (4 q_h - q_l)``, which stay finite at ``q_l = 0``. When the
    qualities coincide the revenues are zero and the demand split is
    reported as ``(0, 1)`` by convention.
    """
    prices = equilibrium_prices(q, eps)
    if q.q_h - q.q_l <= eps:
        return MarketOutcome(prices, 0.0, 1.0, 0.0, 0.0)
    denom = 4.0 * q.q_h - q.q_l
    return MarketOutcome(
        prices=prices,
        demand_l=q.q_h / denom,
        demand_h=2.0 * q.q_h / denom,
        utility_l=float(low_utility(q.q_l, q.q_h)),
        utility_h=float(high_utility(q.q_l, q.q_h)),
    )


def utility_gradients(q: QualityPair) -> UtilityGradients:
    """Closed-form partial derivatives of both equilibrium revenues."""
    ql, qh = q.q_l, q.q_h
    cube = (4.0 * qh - ql) ** 3
    return UtilityGradients(
        dUh_dqh=4.0 * qh * (4.0 * qh**2 - 3.0 * qh * ql + 2.0 * ql**2) / cube,
        dUl_dqh=ql**2 * (2.0 * qh + ql) / cube,
        dUl_dql=qh**2 * (4.0 * qh - 7.0 * ql) / cube,
        dUh_dql=-4.0 * qh**2 * (2.0 * qh + ql) / cube,
    )

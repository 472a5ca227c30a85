"""Nash bargaining over model qualities.

The bargaining problem is one-dimensional once ``q_h`` is pinned to the
attainable maximum (raising ``q_h`` never hurts either firm). Revenues are
homogeneous of degree one in the qualities, so every instance is solved
after rescaling to ``q_h = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .market import QualityPair, high_utility, low_utility

GOLDEN_TOL = 1e-10
GRID_STEP = 1e-5
# upper end of the region where U_l is increasing in q_l (q_h = 1)
LOW_PEAK = 4.0 / 7.0
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class InfeasibleDisagreementError(ValueError):
    pass


@dataclass(frozen=True)
class DisagreementPoint:
    """Initial qualities and the revenues each firm keeps if talks fail.

    The utilities are always recomputed from ``q0``.
    """

    q0: QualityPair
    u_l0: float = field(init=False)
    u_h0: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "u_l0", float(low_utility(self.q0.q_l, self.q0.q_h)))
        object.__setattr__(self, "u_h0", float(high_utility(self.q0.q_l, self.q0.q_h)))

    @property
    def rho0(self) -> float:
        return self.q0.rho


@dataclass(frozen=True)
class NashSolution:
    q_l_star: float
    q_h_star: float
    rho_star: float
    objective_value: float
    disagreement: DisagreementPoint


@dataclass(frozen=True)
class StationaryCubic:
    coefficients: tuple[float, float, float, float]
    roots: list[float]

    def __call__(self, x):
        return np.polyval(self.coefficients, x)


def _objective(q_l, q_h, u_l0, u_h0):
    return (low_utility(q_l, q_h) - u_l0) * (high_utility(q_l, q_h) - u_h0)


def nash_objective(q: QualityPair, d: DisagreementPoint) -> float:
    """Product of revenue gains over the disagreement point (negative if one gain is)."""
    return float(_objective(q.q_l, q.q_h, d.u_l0, d.u_h0))


def stationary_cubic(u_h0: float, rho_0: float) -> StationaryCubic:
    """Numerator of ``dN/dq_l`` at ``q_h = 1`` and its real roots.

    Assumes the disagreement revenues come from an equilibrium, so that
    ``u_l0 = rho_0 * u_h0 / 4``.
    """
    u, r = u_h0, rho_0
    coeffs = (
        7.0 * u + u * r + 4.0,
        -60.0 * u - 6.0 * u * r + 32.0,
        144.0 * u - 52.0,
        -64.0 * u + 32.0 * u * r + 16.0,
    )
    raw = np.roots(coeffs)
    scale = max(1.0, float(np.max(np.abs(raw))))
    real = np.sort(raw[np.abs(raw.imag) <= 1e-9 * scale].real)
    deriv = np.polyder(coeffs)
    polished = []
    for x in real:
        for _ in range(3):
            slope = np.polyval(deriv, x)
            if slope == 0:
                break
            x = x - np.polyval(coeffs, x) / slope
        polished.append(float(x))
    return StationaryCubic(coeffs, sorted(polished))


def golden_section_max(f, lo: float, hi: float, tol: float = GOLDEN_TOL, max_iter: int = 200):
    """Maximize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = f(x2)
    x = 0.5 * (a + b)
    return x, f(x)


def _quadratic_roots(a: float, b: float, c: float) -> tuple[float, float]:
    """Real roots of ``a x^2 + b x + c`` in ascending order (cancellation-safe)."""
    disc = max(b * b - 4.0 * a * c, 0.0)
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    r1 = q / a if a != 0 else -c / b
    r2 = c / q if q != 0 else r1
    return tuple(sorted((r1, r2)))


def feasible_interval(u_l0: float, u_h0: float) -> tuple[float, float]:
    """Interval of ``q_l`` with ``U_l >= u_l0`` and ``U_h >= u_h0`` at ``q_h = 1``.

    ``U_h(x, 1) = 4(1-x)/(4-x)^2`` decreases on ``[0, 1]`` and ``U_l`` is a
    hump, so each constraint cuts out an interval bounded by quadratic roots.
    """
    if u_h0 > 0:
        # 4(1-x) = u (4-x)^2
        hi = _quadratic_roots(u_h0, 4.0 - 8.0 * u_h0, 16.0 * u_h0 - 4.0)[1]
    else:
        hi = 1.0
    if u_l0 > 0:
        # x(1-x) = u (4-x)^2
        lo, hi_l = _quadratic_roots(1.0 + u_l0, -(1.0 + 8.0 * u_l0), 16.0 * u_l0)
    else:
        lo, hi_l = 0.0, 1.0
    return max(lo, 0.0), min(hi, hi_l, 1.0)


def solve_nash(d: DisagreementPoint, q_h_max: float, tol: float = GOLDEN_TOL) -> NashSolution:
    """Nash bargaining solution with the high firm at its maximal quality.

    Golden-section search on the normalized objective, cross-checked against
    the admissible roots of :func:`stationary_cubic`; the best feasible
    candidate wins.

    Raises:
        InfeasibleDisagreementError: if no ``q_l`` satisfies both constraints.
    """
    if not 0.0 < q_h_max <= 1.0:
        raise ValueError(f"q_h_max must lie in (0, 1], got {q_h_max}")
    if d.q0.q_h > q_h_max + 1e-12:
        raise ValueError(f"disagreement q_h0={d.q0.q_h} exceeds q_h_max={q_h_max}")

    u_l0, u_h0 = d.u_l0 / q_h_max, d.u_h0 / q_h_max
    lo, hi = feasible_interval(u_l0, u_h0)
    # the disagreement point itself is always feasible; absorb root rounding
    x0 = d.q0.q_l / q_h_max
    if lo > x0 and lo - x0 < 1e-9:
        lo = x0
    if hi < x0 and x0 - hi < 1e-9:
        hi = x0
    if lo > hi:
        raise InfeasibleDisagreementError(
            f"no feasible q_l for u_l0={d.u_l0:.6g}, u_h0={d.u_h0:.6g} at q_h_max={q_h_max}"
        )

    def objective(x):
        return float(_objective(x, 1.0, u_l0, u_h0))

    candidates = [lo, hi]
    if hi > lo:
        candidates.append(golden_section_max(objective, lo, hi, tol)[0])
    cubic = stationary_cubic(u_h0, d.rho0)
    roots = [r for r in cubic.roots if 0.0 < r <= LOW_PEAK and lo <= r <= hi]
    x_best = max(candidates + roots, key=objective)
    # near the top N is flat to rounding; an exact stationary point beats a bracket midpoint
    best = objective(x_best)
    tied = [r for r in roots if objective(r) >= best - 1e-15 * max(1.0, abs(best))]
    if tied:
        x_best = max(tied, key=objective)

    q_l_star = x_best * q_h_max
    return NashSolution(
        q_l_star=q_l_star,
        q_h_star=q_h_max,
        rho_star=x_best,
        objective_value=float(_objective(q_l_star, q_h_max, d.u_l0, d.u_h0)),
        disagreement=d,
    )


def nash_grid_oracle(d: DisagreementPoint, q_h_max: float, step: float = GRID_STEP) -> NashSolution:
    """Brute-force argmax of the Nash objective on ``{0, step, ..., q_h_max}``.

    Feasibility is checked with a 1e-15 slack so that the disagreement
    point survives rounding. If no grid point is feasible (only possible
    on very coarse grids) the unconstrained grid argmax is returned.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    grid = np.arange(0.0, q_h_max, step)
    grid = np.append(grid, q_h_max)
    u_l = low_utility(grid, q_h_max)
    u_h = high_utility(grid, q_h_max)
    values = (u_l - d.u_l0) * (u_h - d.u_h0)
    feasible = (u_l >= d.u_l0 - 1e-15) & (u_h >= d.u_h0 - 1e-15)
    if feasible.any():
        values = np.where(feasible, values, -np.inf)
    i = int(np.argmax(values))
    q_l = float(grid[i])
    return NashSolution(
        q_l_star=q_l,
        q_h_star=q_h_max,
        rho_star=q_l / q_h_max,
        objective_value=float(_objective(q_l, q_h_max, d.u_l0, d.u_h0)),
        disagreement=d,
    )

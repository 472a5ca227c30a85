"""Independent reference computations used by the tests.

Nothing here imports the package: these are the hand-derivable formulas
(exact rationals where possible) and brute-force searches the library is
checked against.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def exact_outcome(q_l, q_h):
    """(p_l, p_h, U_l, U_h, D_l, D_h) in exact rational arithmetic."""
    q_l, q_h = Fraction(q_l), Fraction(q_h)
    den = 4 * q_h - q_l
    p_l = q_l * (q_h - q_l) / den
    p_h = 2 * q_h * (q_h - q_l) / den
    # demands from the indifference thresholds at those prices
    theta_h = (p_h - p_l) / (q_h - q_l)
    theta_l = p_l / q_l
    d_h = 1 - theta_h
    d_l = theta_h - theta_l
    return p_l, p_h, p_l * d_l, p_h * d_h, d_l, d_h


def best_response_price(q_l, q_h, p_other, firm, grid=20001):
    """Revenue-maximizing price on a grid, holding the rival's price fixed."""
    prices = np.linspace(0.0, q_h, grid)
    if firm == "high":
        theta_h = (prices - p_other) / (q_h - q_l)
        theta_l = p_other / q_l
        d = np.clip(1 - theta_h, 0, 1)
    else:
        theta_h = (p_other - prices) / (q_h - q_l)
        theta_l = prices / q_l
        d = np.clip(theta_h - theta_l, 0, 1)
    return float(prices[np.argmax(prices * d)])


def u_low(q_l, q_h):
    return q_l * q_h * (q_h - q_l) / (4 * q_h - q_l) ** 2


def u_high(q_l, q_h):
    return 4 * q_h**2 * (q_h - q_l) / (4 * q_h - q_l) ** 2


def central_diff(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


def nash_bruteforce(q_l0, q_h0, q_h_max, n=2_000_001):
    """Feasible argmax of the Nash product on a uniform grid of q_l."""
    ul0, uh0 = u_low(q_l0, q_h0), u_high(q_l0, q_h0)
    x = np.linspace(0.0, q_h_max, n)
    ul, uh = u_low(x, q_h_max), u_high(x, q_h_max)
    ok = (ul >= ul0 - 1e-15) & (uh >= uh0 - 1e-15)
    vals = np.where(ok, (ul - ul0) * (uh - uh0), -np.inf)
    i = int(np.argmax(vals))
    return float(x[i]), float(vals[i])


def B_reference(a, b):
    """Largest post-round ratio keeping U_h, found by bisection on U_h itself.

    With q_prev = (a, 1) and q_h_new = b, solve U_h(r b, b) = U_h(a, 1) for r.
    """
    target = u_high(a, 1.0)
    lo, hi = a, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if u_high(mid * b, b) >= target:
            lo = mid
        else:
            hi = mid
    return lo

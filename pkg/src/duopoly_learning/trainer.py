"""Collaboration schemes between the two firms as deterministic round loops.

All schemes run full-batch gradient descent on the shared objective. They
differ only in who is allowed to step and by how much:

* ``complete``: both firms take ``1/L`` steps (FedAvg).
* ``one_sided_low``: only the low firm shares, so only ``x_h`` moves.
* ``one_sided_high``: only the high firm shares, so only ``x_l`` moves.
* ``defection_free``: the high firm's step is paced so quality grows by at
  most a factor ``tilde_b`` per round, and the low firm climbs only up to
  the revenue-preserving cap ``hat_q_l``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bargaining import DisagreementPoint, NashSolution, solve_nash
from .losses import LossModel, ModelParams
from .market import QualityPair, equilibrium_outcome
from .trace import RoundRecord, Trace, TraceSummary, normalize_scheme

MAX_BISECTIONS = 30


class DefectionError(AssertionError):
    """A scheme that is supposed to be defection-free lost a firm revenue."""

    def __init__(self, message: str, trace: Trace):
        super().__init__(message)
        self.trace = trace


class QualityRangeError(AssertionError):
    pass


class InstanceError(ValueError):
    pass


@dataclass
class TrainingState:
    round: int
    x_l: ModelParams
    x_h: ModelParams
    q_l: float
    q_h: float

    @classmethod
    def from_params(cls, model: LossModel, x_l, x_h, round: int = 0) -> "TrainingState":
        x_l = np.array(x_l, dtype=float)
        x_h = np.array(x_h, dtype=float)
        return cls(round, x_l, x_h, model.quality(x_l), model.quality(x_h))

    @property
    def rho(self) -> float:
        return self.q_l / self.q_h if self.q_h > 0 else 0.0

    @property
    def q(self) -> QualityPair:
        """Qualities in market-role order (lower one first)."""
        return QualityPair(min(self.q_l, self.q_h), max(self.q_l, self.q_h))


@dataclass
class SchemeConfig:
    scheme: str
    rounds: int
    nash: NashSolution
    tilde_b: float
    tolerance: float = 1e-9
    max_inner: int = 100

    def __post_init__(self):
        self.scheme = normalize_scheme(self.scheme)
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.tilde_b <= 1.0:
            raise ValueError("tilde_b must exceed 1")


def bound_B(a: float, b: float) -> float:
    """Largest post-round quality ratio that keeps the high firm's revenue.

    ``a`` is the previous ratio ``q_l/q_h`` and ``b`` the high firm's growth
    factor ``q_h,t / q_h,t-1``. ``bound_B(a, 1) == a``.
    """
    if not 0.0 <= a < 1.0:
        raise ValueError(f"a must lie in [0, 1), got {a}")
    if b < 1.0:
        raise ValueError(f"b must be >= 1, got {b}")
    k = (4.0 - a) ** 2
    disc = b * b - 12.0 * (1.0 - a) / k * b
    if disc < 0:
        raise ValueError(f"negative discriminant in bound_B({a}, {b})")
    return 4.0 - k / (2.0 * (1.0 - a)) * (b - math.sqrt(disc))


@dataclass(frozen=True)
class ThresholdRoots:
    root_high: float
    root_low: float


def threshold_roots(q_prev: QualityPair, q_h_new: float) -> ThresholdRoots:
    """Right-most roots of the two no-revenue-loss quadratics in ``q_l,t``.

    ``root_high`` is the largest ``q_l,t`` keeping ``U_h`` at its previous
    value; ``root_low`` the largest keeping ``U_l``.
    """
    ql, qh = q_prev.q_l, q_prev.q_h
    if not ql < qh:
        raise ValueError("threshold_roots needs q_l < q_h")
    if q_h_new < qh:
        raise ValueError(f"q_h_new={q_h_new} is below the previous q_h={qh}")
    r = ql / qh
    k = (4.0 - r) ** 2
    disc_h = q_h_new**4 / qh**2 - 12.0 * (1.0 - r) / k * q_h_new**3 / qh
    disc_l = k * q_h_new**2 - 48.0 * r * (1.0 - r) * qh * q_h_new
    if disc_h < 0 or disc_l < 0:
        raise ValueError("negative discriminant in threshold_roots")
    root_high = 4.0 * q_h_new - k / (2.0 * (1.0 - r)) * (q_h_new**2 / qh - math.sqrt(disc_h))
    s = r * (1.0 - r) * qh
    root_low = q_h_new * (8.0 * s + k * q_h_new + (4.0 - r) * math.sqrt(disc_l)) / (2.0 * (s + k * q_h_new))
    return ThresholdRoots(root_high, root_low)


def hat_q_l(q_prev: QualityPair, q_h_new: float) -> float:
    """Cap on the low firm's quality after the high firm moves to ``q_h_new``."""
    return bound_B(q_prev.rho, q_h_new / q_prev.q_h) * q_h_new


def alpha_low(hat_q: float, q_l_now: float, grad_norm_sq: float, cap: float = 1.0) -> float:
    """Step that cannot lift the low firm's quality past ``hat_q``.

    By convexity a step ``a`` raises quality by at most ``a * |g|^2``.
    """
    if grad_norm_sq <= 0.0 or hat_q <= q_l_now:
        return 0.0
    return min((hat_q - q_l_now) / grad_norm_sq, cap)


def alpha_high(q_h_now: float, grad_norm_sq: float, L: float, tilde_b: float) -> float:
    """Step keeping the high firm's growth factor at most ``tilde_b``."""
    if grad_norm_sq <= 0.0:
        return 1.0 / L
    return min((tilde_b - 1.0) * q_h_now / grad_norm_sq, 1.0 / L)


def _b_rho(rho: float, b_grid: np.ndarray, b_search_max: float) -> float:
    def gap(b):
        return bound_B_vec(rho, b) - rho - (4.0 - 5.0 * rho) * np.log10(b)

    values = gap(b_grid)
    ok = np.nonzero(values >= 0.0)[0]
    last = ok[-1] if len(ok) else 0
    if last == len(b_grid) - 1:
        return b_search_max
    lo, hi = float(b_grid[last]), float(b_grid[last + 1])
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if gap(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def bound_B_vec(a: float, b):
    """:func:`bound_B` over an array of growth factors (no domain checks)."""
    k = (4.0 - a) ** 2
    b = np.asarray(b, dtype=float)
    return 4.0 - k / (2.0 * (1.0 - a)) * (b - np.sqrt(b * b - 12.0 * (1.0 - a) / k * b))


@lru_cache(maxsize=16)
def compute_tilde_b(rho_grid_step: float = 0.005, b_search_max: float = 10.0,
                    b_scan_step: float = 1e-3) -> tuple[float, float]:
    """Uniform per-round growth cap for ``q_h``.

    For each ratio on the grid, ``b_rho`` is the largest ``b >= 1`` with
    ``(4 - 5 rho) log10 b <= B(rho, b) - rho`` (capped at ``b_search_max``),
    found by a coarse scan and bisection. Returns ``(min b_rho, argmin rho)``.
    """
    if not 0.0 < rho_grid_step < 1.0 or b_search_max <= 1.0:
        raise ValueError("need 0 < rho_grid_step < 1 and b_search_max > 1")
    b_grid = np.arange(1.0, b_search_max + b_scan_step / 2, b_scan_step)
    b_grid[-1] = min(b_grid[-1], b_search_max)
    rhos = np.arange(0.0, 1.0, rho_grid_step)
    b_values = [_b_rho(float(r), b_grid, b_search_max) for r in rhos]
    i = int(np.argmin(b_values))
    return float(b_values[i]), float(rhos[i])


def initial_state(model: LossModel, warm_steps: int = 5) -> TrainingState:
    """Both firms saturated on their own data; the high firm gets a head start.

    Raises:
        InstanceError: unless the low firm ends up strictly behind.
    """
    x_l = model.owner_optimum("low")
    x_h = model.owner_optimum("high")
    step = 1.0 / model.smoothness
    for _ in range(warm_steps):
        x_h = x_h - step * model.grad(x_h)
    state = TrainingState.from_params(model, x_l, x_h)
    if not state.q_l < state.q_h:
        raise InstanceError(
            f"low firm is not behind after warm-up: q_l0={state.q_l:.6g}, q_h0={state.q_h:.6g}"
        )
    return state


def nash_target(model: LossModel, state: TrainingState) -> NashSolution:
    """Nash bargaining point for a run, disagreement at the initial qualities."""
    return solve_nash(DisagreementPoint(state.q), model.max_quality)


def identity_outcome(q_l: float, q_h: float) -> tuple[float, float, float, float]:
    """Prices and revenues ``(p_l, p_h, u_l, u_h)`` per firm identity.

    If the originally-low firm has overtaken, market roles are swapped for
    pricing and the results mapped back to the firms.
    """
    if q_l <= q_h:
        out = equilibrium_outcome(QualityPair(q_l, q_h))
        return out.prices.p_l, out.prices.p_h, out.utility_l, out.utility_h
    out = equilibrium_outcome(QualityPair(q_h, q_l))
    return out.prices.p_h, out.prices.p_l, out.utility_h, out.utility_l


@dataclass
class _Runner:
    cfg: SchemeConfig
    model: LossModel
    state: TrainingState
    records: list[RoundRecord] = field(default_factory=list)
    sum_alpha_h: float = 0.0

    def check_range(self):
        for name, q in (("q_l", self.state.q_l), ("q_h", self.state.q_h)):
            if not 0.0 <= q <= 1.0:
                raise QualityRangeError(f"{name}={q} left [0, 1] at round {self.state.round}")

    def record(self, alpha_l: float, alpha_h: float):
        s, d = self.state, self.cfg.nash.disagreement
        p_l, p_h, u_l, u_h = identity_outcome(s.q_l, s.q_h)
        if self.records:
            prev, tol = self.records[-1], self.cfg.tolerance
            defected_l, defected_h = u_l < prev.u_l - tol, u_h < prev.u_h - tol
        else:
            defected_l = defected_h = False
        self.records.append(RoundRecord(
            round=s.round, q_l=s.q_l, q_h=s.q_h, rho=s.rho, p_l=p_l, p_h=p_h,
            u_l=u_l, u_h=u_h, nash_value=(u_l - d.u_l0) * (u_h - d.u_h0),
            alpha_l=alpha_l, alpha_h=alpha_h, defected_l=defected_l, defected_h=defected_h,
        ))

    def gd_step(self, x, step):
        return x - step * self.model.grad(x)

    def capped_climb(self, x, q, target) -> tuple[np.ndarray, float, float]:
        """Descend from ``x`` without letting quality exceed ``target``."""
        model = self.model
        cap = min(1.0, 1.0 / model.smoothness)
        total = 0.0
        for _ in range(self.cfg.max_inner):
            if q >= target:
                break
            g = model.grad(x)
            gn = float(g @ g)
            a = alpha_low(target, q, gn, cap)
            if a <= 0.0:
                break
            x_new = x - a * g
            q_new = model.quality(x_new)
            halvings = 0
            # the convexity bound already prevents overshoot; this absorbs rounding
            while q_new > target and halvings < MAX_BISECTIONS:
                a *= 0.5
                x_new = x - a * g
                q_new = model.quality(x_new)
                halvings += 1
            if q_new > target or q_new <= q:
                break
            x, q, total = x_new, q_new, total + a
        return x, q, total

    def step(self):
        s, model, scheme = self.state, self.model, self.cfg.scheme
        L = model.smoothness
        alpha_l = alpha_h = 0.0
        x_l, x_h = s.x_l, s.x_h
        q_l, q_h = s.q_l, s.q_h

        if scheme == "complete":
            alpha_l = alpha_h = 1.0 / L
            x_l, x_h = self.gd_step(x_l, alpha_l), self.gd_step(x_h, alpha_h)
            q_l, q_h = model.quality(x_l), model.quality(x_h)
        elif scheme == "one_sided_low":
            alpha_h = 1.0 / L
            x_h = self.gd_step(x_h, alpha_h)
            q_h = model.quality(x_h)
        elif scheme == "one_sided_high":
            alpha_l = 1.0 / L
            x_l = self.gd_step(x_l, alpha_l)
            q_l = model.quality(x_l)
        else:
            g = model.grad(x_h)
            alpha_h = alpha_high(q_h, float(g @ g), L, self.cfg.tilde_b)
            x_h = x_h - alpha_h * g
            q_h = model.quality(x_h)
            nash = self.cfg.nash
            if q_h >= s.q_h and q_l < s.q_h and q_l < nash.q_l_star and q_l / q_h <= nash.rho_star:
                cap = hat_q_l(QualityPair(q_l, s.q_h), q_h)
                # track the Nash ratio instead of overshooting it
                target = min(cap, nash.rho_star * q_h)
                x_l, q_l, alpha_l = self.capped_climb(x_l, q_l, target)

        self.sum_alpha_h += alpha_h
        self.state = TrainingState(s.round + 1, x_l, x_h, q_l, q_h)
        self.check_range()
        self.record(alpha_l, alpha_h)


def run_scheme(cfg: SchemeConfig, model: LossModel, initial: TrainingState) -> Trace:
    """Run ``cfg.rounds`` rounds and return the per-round trace.

    Raises:
        DefectionError: if a revenue drops in a ``defection_free`` or
            ``one_sided_low`` run; the partial trace is attached.
        QualityRangeError: if a quality leaves ``[0, 1]``.
    """
    if initial.q_l > initial.q_h:
        raise InstanceError("initial state must have q_l <= q_h")
    start = time.perf_counter()
    runner = _Runner(cfg, model, initial)
    runner.check_range()
    runner.record(0.0, 0.0)
    nash = cfg.nash
    summary = TraceSummary(
        scheme=cfg.scheme, q_l_star=nash.q_l_star, q_h_star=nash.q_h_star,
        rho_star=nash.rho_star, nash_star=nash.objective_value,
        q_l0=initial.q_l, q_h0=initial.q_h, tilde_b=cfg.tilde_b, tolerance=cfg.tolerance,
    )
    trace = Trace(runner.records, summary)
    guarded = cfg.scheme in ("defection_free", "one_sided_low")
    for _ in range(cfg.rounds):
        runner.step()
        last = runner.records[-1]
        if guarded and (last.defected_l or last.defected_h):
            _finish(trace, runner, start)
            raise DefectionError(
                f"{cfg.scheme}: revenue decreased at round {last.round} "
                f"(u_l={last.u_l:.17g}, u_h={last.u_h:.17g})", trace)
    return _finish(trace, runner, start)


def _finish(trace: Trace, runner: _Runner, start: float) -> Trace:
    s = trace.summary
    s.nash_gap = s.nash_star - trace.records[-1].nash_value
    s.defections_l = sum(r.defected_l for r in trace.records)
    s.defections_h = sum(r.defected_h for r in trace.records)
    s.wall_time = time.perf_counter() - start
    trace.extras.update(
        x_l_final=runner.state.x_l, x_h_final=runner.state.x_h, sum_alpha_h=runner.sum_alpha_h,
    )
    return trace

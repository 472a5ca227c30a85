"""Replay a trace against the guarantees the schemes are supposed to satisfy.

Every check returns a :class:`CheckResult`; nothing raises. ``required``
checks decide :attr:`AuditReport.passed`; the rest are diagnostics (for
example, revenue decreases are expected in ``one_sided_high`` runs and
are reported, not failed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .losses import LossModel
from .market import QualityPair
from .trace import Trace
from .trainer import hat_q_l, identity_outcome, initial_state

DEFAULT_TOL = 1e-9
RATIO_TOL = 1e-6
CONSISTENCY_TOL = 1e-12
COLLAPSE_UTILITY = 1e-3


@dataclass
class CheckResult:
    name: str
    passed: bool
    required: bool
    detail: str = ""
    failing_round: int | None = None


@dataclass
class AuditReport:
    scheme: str
    checks: list[CheckResult] = field(default_factory=list)
    final_u_l: float = float("nan")
    final_u_h: float = float("nan")

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.required)

    def failures(self, required_only: bool = True) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed and (c.required or not required_only)]

    def get(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def format(self) -> str:
        lines = [f"audit of {self.scheme} trace: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            status = "ok" if c.passed else ("FAIL" if c.required else "note")
            where = f" (round {c.failing_round})" if c.failing_round is not None else ""
            lines.append(f"  [{status:>4}] {c.name}{where}: {c.detail}")
        lines.append(f"  final utilities: u_l={self.final_u_l:.6g}, u_h={self.final_u_h:.6g}")
        return "\n".join(lines)


def _first(mask) -> int | None:
    idx = np.flatnonzero(mask)
    return int(idx[0]) if len(idx) else None


def terminal_ratio_bound(rho_star: float, q_h_star: float, q_h_T: float) -> float:
    """Terminal ratio bound ``(4 - 5 rho*) log10(q_h* / (q_h* - eps))``.

    Returns ``inf`` when the high firm has reached ``q_h*`` (``eps <= 0``).
    """
    eps = q_h_star - q_h_T
    if eps <= 0:
        return math.inf
    return (4.0 - 5.0 * rho_star) * math.log10(q_h_star / (q_h_star - eps))


def audit_trace(trace: Trace, model: LossModel | None = None, tol: float = DEFAULT_TOL,
                ratio_tol: float = RATIO_TOL) -> AuditReport:
    """Check a trace; ``model`` enables the checks that need parameters."""
    s = trace.summary
    recs = trace.records
    report = AuditReport(scheme=s.scheme)
    add = report.checks.append
    if not recs:
        add(CheckResult("well_formed", False, True, "trace has no records"))
        return report

    rnd = np.array(trace.column("round"))
    q_l = np.array(trace.column("q_l"))
    q_h = np.array(trace.column("q_h"))
    rho = np.array(trace.column("rho"))
    u_l = np.array(trace.column("u_l"))
    u_h = np.array(trace.column("u_h"))
    nash = np.array(trace.column("nash_value"))
    report.final_u_l, report.final_u_h = float(u_l[-1]), float(u_h[-1])
    df = s.scheme == "defection_free"

    # structure
    bad = _first(rnd != np.arange(len(recs)))
    expected = None
    if trace.config is not None and s.error is None:
        expected = trace.config.rounds + 1
    ok_len = expected is None or len(recs) == expected
    add(CheckResult("well_formed", bad is None and ok_len, True,
                    f"{len(recs)} records, rounds numbered 0..{len(recs) - 1}"
                    + ("" if ok_len else f"; expected {expected}"), bad))

    bad = _first((q_l < 0) | (q_l > 1) | (q_h < 0) | (q_h > 1))
    add(CheckResult("quality_range", bad is None, True, "all qualities in [0, 1]", bad))

    # recorded market values agree with a recomputation from the qualities
    worst, worst_round = 0.0, None
    for r in recs:
        p_l, p_h, ul, uh = identity_outcome(r.q_l, r.q_h)
        ref = (p_l, p_h, ul, uh, r.q_l / r.q_h if r.q_h > 0 else 0.0)
        got = (r.p_l, r.p_h, r.u_l, r.u_h, r.rho)
        err = max(abs(a - b) for a, b in zip(ref, got))
        if err > worst:
            worst, worst_round = err, r.round
    ok = worst <= CONSISTENCY_TOL
    add(CheckResult("recorded_values_consistent", ok, True,
                    f"max deviation {worst:.3g}", None if ok else worst_round))

    # price ordering, in market-role order
    low_is_l = q_l <= q_h
    p_low = np.where(low_is_l, trace.column("p_l"), trace.column("p_h"))
    p_high = np.where(low_is_l, trace.column("p_h"), trace.column("p_l"))
    bad = _first(p_low > p_high + tol)
    add(CheckResult("price_ordering", bad is None, True, "lower-quality price never exceeds the other", bad))

    # revenue decreases, from the recorded utilities
    d_l, d_h = np.diff(u_l), np.diff(u_h)
    drops_l = np.flatnonzero(d_l < -tol) + 1
    drops_h = np.flatnonzero(d_h < -tol) + 1
    first = min([int(x[0]) for x in (drops_l, drops_h) if len(x)], default=None)
    guarded = s.scheme in ("defection_free", "one_sided_low")
    min_dl = float(d_l.min()) if len(d_l) else 0.0
    min_dh = float(d_h.min()) if len(d_h) else 0.0
    add(CheckResult(
        "no_defection", first is None, guarded,
        f"{len(drops_l)} low-firm and {len(drops_h)} high-firm revenue decreases; "
        f"min dU_l={min_dl:.3g}, min dU_h={min_dh:.3g}", first))

    if df:
        _audit_defection_free(trace, q_l, q_h, rho, nash, tol, ratio_tol, add)
        if model is not None:
            _audit_descent(trace, model, add)

    if s.scheme == "complete":
        gap = abs(q_l[-1] - q_h[-1])
        ok = gap <= 1e-6 and max(u_l[-1], u_h[-1]) <= COLLAPSE_UTILITY
        add(CheckResult("complete_collapse", ok, False,
                        f"|q_l - q_h|={gap:.3g}, final utilities ({u_l[-1]:.3g}, {u_h[-1]:.3g})"))
    return report


def _audit_defection_free(trace, q_l, q_h, rho, nash, tol, ratio_tol, add):
    s = trace.summary

    growth = q_h[1:] / q_h[:-1]
    bad = _first(growth > s.tilde_b + tol)
    add(CheckResult("pacing", bad is None, True,
                    f"max growth factor {growth.max() if len(growth) else 1.0:.9g} "
                    f"vs tilde_b={s.tilde_b:.9g}", None if bad is None else bad + 1))

    bad = None
    for t in range(1, len(q_l)):
        if not (q_l[t - 1] < q_h[t - 1] <= q_h[t]):
            continue
        cap = hat_q_l(QualityPair(q_l[t - 1], q_h[t - 1]), q_h[t])
        if q_l[t] > cap + tol:
            bad = t
            break
    add(CheckResult("low_cap", bad is None, True, "q_l never exceeds hat_q_l", bad))

    # ratio moves toward rho* and stays once it arrives
    rs = s.rho_star
    bad = None
    reached = False
    for t in range(1, len(rho)):
        if reached:
            if abs(rho[t] - rs) > ratio_tol:
                bad = t
                break
        elif rho[0] < rs and rho[t - 1] < rs - ratio_tol and rho[t] < rho[t - 1] - tol:
            bad = t
            break
        reached = reached or abs(rho[t] - rs) <= ratio_tol
    add(CheckResult("ratio_monotone", bad is None, True,
                    f"rho_0={rho[0]:.6g}, rho_T={rho[-1]:.9g}, rho*={rs:.9g}", bad))

    bad = _first(np.diff(nash) < -tol)
    add(CheckResult("nash_nondecreasing", bad is None, True,
                    f"N_T={nash[-1]:.6g}, N*={s.nash_star:.6g}", None if bad is None else bad + 1))

    bound = terminal_ratio_bound(rs, s.q_h_star, q_h[-1])
    dev = abs(rs - rho[-1])
    applicable = s.q_l0 <= s.q_l_star
    add(CheckResult("terminal_ratio_bound", dev <= bound + tol, applicable,
                    f"|rho* - rho_T|={dev:.3g} <= {bound:.3g}"
                    + ("" if applicable else " (q_l0 > q_l*: not guaranteed)")))

    # fitted rate constant: N* - N_t <= C (q_h* - q_h,t + |rho* - rho_t|)
    denom = (s.q_h_star - q_h) + np.abs(rs - rho)
    gap = s.nash_star - nash
    mask = denom > 1e-12
    c_fit = float(np.max(gap[mask] / denom[mask])) if mask.any() else 0.0
    add(CheckResult("fitted_constant", c_fit <= 1.0, False, f"C={c_fit:.4g}"))


def _audit_descent(trace, model, add):
    s = trace.summary
    cfg = trace.config
    warm = cfg.warm_steps if cfg is not None else 5
    x_h0 = initial_state(model, warm).x_h
    sum_alpha = float(np.sum(trace.column("alpha_h")))
    if sum_alpha <= 0:
        add(CheckResult("descent_bound", False, True, "no high-firm steps were taken"))
        return
    bound = 2.0 * float(np.sum((x_h0 - model.optimum) ** 2)) / sum_alpha
    gap = s.q_h_star - trace.records[-1].q_h
    add(CheckResult("descent_bound", gap <= bound + 1e-12, True,
                    f"q_h* - q_h,T={gap:.3g} <= {bound:.3g}"))

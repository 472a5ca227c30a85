"""Build instances from a :class:`RunConfig`, run them, and sweep many."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .bargaining import NashSolution
from .losses import LogisticPair, LossModel, make_complementary_quadratics, make_synthetic_logistic, quadratic_gap
from .trace import RunConfig, Trace, TraceSummary
from .trainer import (
    DefectionError,
    InstanceError,
    SchemeConfig,
    TrainingState,
    compute_tilde_b,
    initial_state,
    nash_target,
    run_scheme,
)

log = logging.getLogger(__name__)

CROSS_LOSS = 0.95
OFFSET_MARGIN = 0.02


def standard_quadratic(
    dim: int,
    target_q_h_max: float,
    seed: int,
    *,
    curvature_ratio: float = 3.0,
    condition: float = 30.0,
    slow_alignment: float = 0.9,
    cross_loss: float = CROSS_LOSS,
    margin: float = OFFSET_MARGIN,
):
    """The asymmetric quadratic instance used by the CLI and the test suites.

    The high owner's data is sharply curved and the low owner's is flat, and
    almost all of the offset budget goes to the low owner (the high owner
    keeps ``margin / 2``). This makes the low firm clearly behind at the
    start while staying inside ``[0, 1]``.
    """
    gap = quadratic_gap(cross_loss, curvature_ratio)
    asymmetry = 2.0 * (1.0 - target_q_h_max) - gap - margin
    return make_complementary_quadratics(
        dim, target_q_h_max, asymmetry, seed, cross_loss=cross_loss,
        curvature_ratio=curvature_ratio, condition=condition, slow_alignment=slow_alignment,
    )


def build_model(config: RunConfig) -> LossModel:
    if config.loss == "logistic":
        return _ordered_logistic(config)
    return standard_quadratic(
        config.dim, config.target_q_h_max, config.seed, curvature_ratio=config.curvature_ratio,
        condition=config.condition, slow_alignment=config.slow_alignment,
    )


def _ordered_logistic(config: RunConfig) -> LogisticPair:
    """Synthetic logistic instance with the roles assigned by starting quality.

    The two datasets are exchangeable in distribution, so which one ends up
    behind after warm-up is a coin flip. Market roles follow quality, so the
    dataset that starts worse is handed to the low firm. The attainable
    quality is whatever the pooled data allows (``target_q_h_max`` is unused).
    """
    model = make_synthetic_logistic(config.n_per_firm, config.dim, config.skew, config.seed)
    try:
        initial_state(model, config.warm_steps)
    except InstanceError:
        swapped = {"low": model.data["high"], "high": model.data["low"]}
        model = LogisticPair(swapped, ridge=model.ridge)
    return model


@dataclass
class Prepared:
    model: LossModel
    initial: TrainingState
    nash: NashSolution
    scheme: SchemeConfig


def prepare(config: RunConfig) -> Prepared:
    """Model, starting state, Nash target and scheme settings for a config."""
    config.validate()
    model = build_model(config)
    initial = initial_state(model, config.warm_steps)
    nash = nash_target(model, initial)
    tilde_b = config.tilde_b if config.tilde_b is not None else compute_tilde_b()[0]
    scheme = SchemeConfig(config.scheme, config.rounds, nash, tilde_b,
                          tolerance=config.tolerance, max_inner=config.max_inner)
    return Prepared(model, initial, nash, scheme)


def run_config(config: RunConfig) -> Trace:
    """Run one config. Errors propagate; a ``DefectionError`` carries its trace."""
    prep = prepare(config)
    try:
        trace = run_scheme(prep.scheme, prep.model, prep.initial)
    except DefectionError as err:
        err.trace.config = config
        err.trace.summary.error = str(err)
        raise
    trace.config = config
    return trace


def _failed_trace(config: RunConfig, err: Exception) -> Trace:
    nan = float("nan")
    summary = TraceSummary(
        scheme=config.scheme, q_l_star=nan, q_h_star=nan, rho_star=nan, nash_star=nan,
        q_l0=nan, q_h0=nan, tilde_b=nan, tolerance=config.tolerance,
        error=f"{type(err).__name__}: {err}",
    )
    return Trace([], summary, config)


def _run_safely(config: RunConfig) -> Trace:
    try:
        return run_config(config)
    except DefectionError as err:
        return err.trace
    except Exception as err:  # a sweep records failures and keeps going
        log.warning("config %s failed: %s", config, err)
        return _failed_trace(config, err)


def sweep(configs: list[RunConfig], workers: int = 1) -> list[Trace]:
    """Run configs independently; output order matches input order.

    Runs are deterministic, so ``workers > 1`` (a process pool) gives the
    same payloads as a serial sweep. Failed runs come back with
    ``summary.error`` set.
    """
    configs = [replace(c) for c in configs]
    if workers <= 1 or len(configs) <= 1:
        return [_run_safely(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        traces = list(pool.map(_run_safely, configs))
    return traces

"""Simulator for collaborative training between two competing model sellers."""

from .audit import AuditReport, CheckResult, audit_trace
from .bargaining import (
    DisagreementPoint,
    InfeasibleDisagreementError,
    NashSolution,
    nash_grid_oracle,
    nash_objective,
    solve_nash,
    stationary_cubic,
)
from .harness import build_model, run_config, standard_quadratic, sweep
from .losses import (
    LogisticPair,
    LossModel,
    QuadraticPair,
    avg_loss_and_grad,
    make_complementary_quadratics,
    make_synthetic_logistic,
)
from .market import (
    MarketOutcome,
    PriceQuote,
    QualityPair,
    consumer_utility,
    demands,
    equilibrium_outcome,
    equilibrium_prices,
    utility_gradients,
)
from .trace import RoundRecord, RunConfig, Trace, read_trace, write_trace
from .trainer import (
    DefectionError,
    SchemeConfig,
    TrainingState,
    alpha_high,
    alpha_low,
    bound_B,
    compute_tilde_b,
    hat_q_l,
    initial_state,
    run_scheme,
    threshold_roots,
)

__version__ = "0.1.0"

"""Command-line interface: ``run``, ``audit``, ``nash`` and ``tilde-b``.

Exit codes: 0 success, 1 bad configuration or unreadable input, 2 a
run-time invariant or audit check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .audit import audit_trace
from .bargaining import DisagreementPoint, InfeasibleDisagreementError, solve_nash
from .harness import build_model, prepare
from .losses import InvalidTargetError
from .market import QualityPair
from .trace import ConfigError, FORMATS, LOSS_KINDS, SCHEMES, RunConfig, read_trace, write_trace
from .trainer import DefectionError, InstanceError, QualityRangeError, compute_tilde_b, run_scheme

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2

log = logging.getLogger("duopoly_learning")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="duopoly-learning", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one collaboration scheme and write its trace")
    run.add_argument("--scheme", choices=[s.replace("_", "-") for s in SCHEMES] + list(SCHEMES))
    run.add_argument("--loss", choices=LOSS_KINDS)
    run.add_argument("--dim", type=int)
    run.add_argument("--rounds", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--qhmax", type=float, dest="target_q_h_max",
                     help="attainable quality of the pooled model (quadratic losses)")
    run.add_argument("--out", help="trace output path")
    run.add_argument("--format", choices=FORMATS)
    run.add_argument("--config", help="JSON file with RunConfig fields; flags override it")

    audit = sub.add_parser("audit", help="check a saved trace")
    audit.add_argument("path")
    audit.add_argument("--no-model", action="store_true",
                       help="skip checks that rebuild the loss model from the config echo")

    nash = sub.add_parser("nash", help="solve the bargaining problem for a disagreement point")
    nash.add_argument("--ql0", type=float, required=True)
    nash.add_argument("--qh0", type=float, required=True)
    nash.add_argument("--qhmax", type=float, required=True)

    sub.add_parser("tilde-b", help="print the per-round growth cap for the high firm")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {args.config}: {err}") from err
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    for key in ("scheme", "loss", "dim", "rounds", "seed", "target_q_h_max", "out", "format"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    try:
        config = RunConfig.from_dict(data)
    except TypeError as err:
        raise ConfigError(str(err)) from err
    if not config.out:
        raise ConfigError("--out is required (or 'out' in the config file)")
    return config.validate()


def cmd_run(args) -> int:
    try:
        config = load_config(args)
        prep = prepare(config)
    except (ConfigError, InvalidTargetError, InstanceError, InfeasibleDisagreementError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        trace = run_scheme(prep.scheme, prep.model, prep.initial)
    except DefectionError as err:
        err.trace.config = config
        err.trace.summary.error = str(err)
        write_trace(err.trace, config.out, config.format)
        print(f"invariant violated: {err} (partial trace in {config.out})", file=sys.stderr)
        return EXIT_INVARIANT
    except QualityRangeError as err:
        print(f"invariant violated: {err}", file=sys.stderr)
        return EXIT_INVARIANT
    trace.config = config
    write_trace(trace, config.out, config.format)
    s = trace.summary
    last = trace.records[-1]
    print(f"{s.scheme}: {len(trace.records) - 1} rounds -> {config.out}")
    print(f"  q_l={last.q_l:.6f} q_h={last.q_h:.6f} rho={last.rho:.6f} (rho*={s.rho_star:.6f})")
    print(f"  nash gap={s.nash_gap:.3g}, revenue decreases: low {s.defections_l}, high {s.defections_h}")
    return EXIT_OK


def cmd_audit(args) -> int:
    try:
        trace = read_trace(args.path)
    except (OSError, ValueError, KeyError, TypeError) as err:
        print(f"error: cannot read trace {args.path}: {err}", file=sys.stderr)
        return EXIT_CONFIG
    model = None
    if not args.no_model and trace.config is not None:
        model = build_model(trace.config)
    report = audit_trace(trace, model)
    print(report.format())
    if not report.passed:
        bad = report.failures()[0]
        print(f"audit failed: {bad.name} at round {bad.failing_round}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_nash(args) -> int:
    try:
        d = DisagreementPoint(QualityPair(args.ql0, args.qh0))
        sol = solve_nash(d, args.qhmax)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    out = {k: v for k, v in asdict(sol).items() if k != "disagreement"}
    out["u_l0"], out["u_h0"] = d.u_l0, d.u_h0
    print(json.dumps(out, indent=1))
    return EXIT_OK


def cmd_tilde_b(args) -> int:
    tilde_b, rho = compute_tilde_b()
    print(f"tilde_b = {tilde_b:.6f} (attained at rho = {rho:.3f})")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "audit": cmd_audit, "nash": cmd_nash, "tilde-b": cmd_tilde_b}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are configuration errors here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return COMMANDS[args.command](args)


def main() -> None:
    sys.exit(run_cli())

"""Run configuration, per-round records and their CSV/JSON serialization.

CSV layout: one ``# {...}`` comment line holding the config and summary as
JSON, a header row, then one row per round (round 0 is the initial state).
Floats are written with 17 significant digits so a round trip is exact.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

SCHEMES = ("complete", "one_sided_high", "one_sided_low", "defection_free")
LOSS_KINDS = ("quadratic", "logistic")
FORMATS = ("csv", "json")

CSV_COLUMNS = (
    "round", "q_l", "q_h", "rho", "p_l", "p_h", "u_l", "u_h",
    "nash_value", "alpha_l", "alpha_h", "defected_l", "defected_h",
)


class ConfigError(ValueError):
    pass


def normalize_scheme(name: str) -> str:
    scheme = name.strip().lower().replace("-", "_")
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {name!r}; expected one of {', '.join(SCHEMES)}")
    return scheme


@dataclass
class RunConfig:
    scheme: str = "defection_free"
    loss: str = "quadratic"
    dim: int = 4
    rounds: int = 500
    seed: int = 0
    target_q_h_max: float = 0.65
    out: str | None = None
    format: str = "csv"
    tolerance: float = 1e-9
    max_inner: int = 100
    warm_steps: int = 5
    n_per_firm: int = 200
    skew: float = 0.8
    tilde_b: float | None = None
    # quadratic instance shape (see harness.standard_quadratic)
    curvature_ratio: float = 3.0
    condition: float = 30.0
    slow_alignment: float = 0.9

    def validate(self) -> "RunConfig":
        self.scheme = normalize_scheme(self.scheme)
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"unknown loss {self.loss!r}; expected one of {LOSS_KINDS}")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}; expected csv or json")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if not 0.0 < self.target_q_h_max < 1.0:
            raise ConfigError("target_q_h_max must lie in (0, 1)")
        if self.tolerance < 0 or self.max_inner < 1 or self.warm_steps < 0:
            raise ConfigError("tolerance must be >= 0, max_inner >= 1, warm_steps >= 0")
        if self.curvature_ratio <= 0 or self.condition < 1 or not 0 <= self.slow_alignment <= 1:
            raise ConfigError("need curvature_ratio > 0, condition >= 1, slow_alignment in [0, 1]")
        if self.tilde_b is not None and self.tilde_b <= 1.0:
            raise ConfigError("tilde_b must exceed 1")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class RoundRecord:
    round: int
    q_l: float
    q_h: float
    rho: float
    p_l: float
    p_h: float
    u_l: float
    u_h: float
    nash_value: float
    alpha_l: float
    alpha_h: float
    defected_l: bool
    defected_h: bool


@dataclass
class TraceSummary:
    """Run-level facts needed to audit a trace without re-running it.

    ``alpha_l`` in the records is the total low-firm step taken in a round
    (the inner loop may take several).
    """

    scheme: str
    q_l_star: float
    q_h_star: float
    rho_star: float
    nash_star: float
    q_l0: float
    q_h0: float
    tilde_b: float
    tolerance: float
    nash_gap: float = float("nan")
    defections_l: int = 0
    defections_h: int = 0
    wall_time: float = 0.0
    error: str | None = None


@dataclass
class Trace:
    records: list[RoundRecord]
    summary: TraceSummary
    config: RunConfig | None = None
    # in-memory only; holds model parameters for audits that need them
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]

    def payload(self, include_wall_time: bool = False) -> dict:
        summary = asdict(self.summary)
        if not include_wall_time:
            summary.pop("wall_time")
        return {
            "config": asdict(self.config) if self.config is not None else None,
            "summary": summary,
            "records": [asdict(r) for r in self.records],
        }


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return format(value, ".17g")


def _header(trace: Trace) -> dict:
    return {
        "config": asdict(trace.config) if trace.config is not None else None,
        "summary": asdict(trace.summary),
    }


def dumps_csv(trace: Trace) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(_header(trace)) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in trace.records:
        writer.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def dumps_json(trace: Trace) -> str:
    return json.dumps(trace.payload(include_wall_time=True), indent=1)


def _from_header(header: dict) -> tuple[TraceSummary, RunConfig | None]:
    config = RunConfig.from_dict(header["config"]) if header.get("config") else None
    return TraceSummary(**header["summary"]), config


def _record(row: dict) -> RoundRecord:
    values = {}
    for f in fields(RoundRecord):
        raw = row[f.name]
        if f.name == "round":
            values[f.name] = int(raw)
        elif f.name.startswith("defected"):
            values[f.name] = bool(int(raw)) if isinstance(raw, str) else bool(raw)
        else:
            values[f.name] = float(raw)
    return RoundRecord(**values)


def loads_csv(text: str) -> Trace:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ValueError("trace CSV is missing its metadata line")
    summary, config = _from_header(json.loads(lines[0][2:]))
    reader = csv.DictReader(lines[1:])
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV columns: {reader.fieldnames}")
    return Trace([_record(row) for row in reader], summary, config)


def loads_json(text: str) -> Trace:
    data = json.loads(text)
    summary, config = _from_header(data)
    return Trace([_record(r) for r in data["records"]], summary, config)


def write_trace(trace: Trace, path: str | Path, fmt: str | None = None) -> Path:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    text = dumps_json(trace) if fmt == "json" else dumps_csv(trace)
    path.write_text(text)
    return path


def read_trace(path: str | Path) -> Trace:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return loads_json(text)
    return loads_csv(text)

"""Experiment runs over fault scenarios, with text and CSV reports.

Scenario file grammar (UTF-8, one directive per line)::

    # comment lines and blank lines are ignored
    label: <free text>
    fault: target=<id> onset_s=<real> magnitude=<real>

``label`` may appear at most once. Each ``fault`` line needs all three
keys, in any order; ``target`` is one of Msf1, Msf2, De1, De2, De3, Df1,
Df2 and ``magnitude`` is an additive bias in the units of the target.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Sequence

from .bondgraph import ThreeTankParams, three_tank
from .detection import (AlarmState, compute_residuals, default_thresholds, detect_alarms,
                        nominal_levels)
from .dx import DxDiagnosis, build_fault_templates, dx_diagnose
from .fdi import FdiDiagnosis, build_signature_matrix, fdi_diagnose
from .ig import IgDiagnosis, ig_diagnose
from .plant import ACTUATORS, FAULT_IDS, FaultScenario, FaultSpec, simulate, steady_state

METHODS = ("fdi", "dx", "ig")

TABLE1: tuple[tuple[str, ...], ...] = (
    ("Msf1",), ("Msf2",), ("De1",), ("De2",), ("De3",), ("Df1",), ("Df2",),
    ("Msf1", "Df2"), ("De1", "Df2"), ("De3", "Df2"), ("De1", "De3"), ("Df1", "Df2"),
    ("Msf1", "De1", "Df2"), ("De1", "De3", "Df2"), ("De1", "Df1", "Df2"),
    ("Msf1", "Msf2", "Df1"), ("Msf1", "Msf2", "Df1", "Df2"),
    ("Msf1", "Msf2", "Df1", "Df2", "De2"), ("Msf1", "Msf2", "De1", "De2", "Df1", "Df2"),
)


class ScenarioParseError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    C1: float = 1.0
    C2: float = 1.0
    C3: float = 1.0
    R1: float = 1.0
    R2: float = 1.0
    R0: float = 1.0
    msf1: float = 1.0
    msf2: float = 1.0
    threshold_fraction: float = 0.05
    persistence: float = 0.5
    dt: float = 0.01
    horizon: float = 100.0
    onset: float = 50.0
    magnitude_fraction: float = 0.2
    decided_at: float = 99.0
    tol: float = 1e-3
    max_size: int = 7
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{f.name} must be a finite number, got {v!r}")
        if not 0 < self.decided_at <= self.horizon:
            raise ConfigError("decided_at must lie in (0, horizon]")
        if not 0 <= self.onset < self.decided_at:
            raise ConfigError("onset must lie in [0, decided_at)")
        for name in ("threshold_fraction", "persistence", "dt", "magnitude_fraction", "tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def params(self) -> ThreeTankParams:
        return ThreeTankParams(self.C1, self.C2, self.C3, self.R1, self.R2, self.R0)

    def with_overrides(self, **overrides) -> "Config":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def load_config(path: str | None = None, **overrides) -> Config:
    """Defaults, then a JSON object from ``path``, then keyword overrides."""
    data: dict = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        known = {f.name for f in fields(Config)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        return Config(**data).with_overrides(**overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


_FAULT_KEYS = ("target", "onset_s", "magnitude")


def parse_scenario(text: str) -> FaultScenario:
    label = None
    faults: list[FaultSpec] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, rest = line.partition(":")
        key = key.strip()
        if not sep:
            raise ScenarioParseError(lineno, f"expected 'label:' or 'fault:', got {line!r}")
        if key == "label":
            if label is not None:
                raise ScenarioParseError(lineno, "duplicate label")
            label = rest.strip()
        elif key == "fault":
            kv = {}
            for tok in rest.split():
                name, eq, value = tok.partition("=")
                if not eq or not value:
                    raise ScenarioParseError(lineno, f"malformed field {tok!r}")
                if name not in _FAULT_KEYS:
                    raise ScenarioParseError(lineno, f"unknown field {name!r}")
                if name in kv:
                    raise ScenarioParseError(lineno, f"duplicate field {name!r}")
                kv[name] = value
            missing = [k for k in _FAULT_KEYS if k not in kv]
            if missing:
                raise ScenarioParseError(lineno, f"missing field(s) {', '.join(missing)}")
            try:
                onset, magnitude = float(kv["onset_s"]), float(kv["magnitude"])
            except ValueError:
                raise ScenarioParseError(lineno, "onset_s and magnitude must be real numbers") from None
            if kv["target"] in {f.target for f in faults}:
                raise ScenarioParseError(lineno, f"second fault on {kv['target']}")
            try:
                faults.append(FaultSpec(kv["target"], onset, magnitude))
            except ValueError as exc:
                raise ScenarioParseError(lineno, str(exc)) from None
        else:
            raise ScenarioParseError(lineno, f"unknown directive {key!r}")
    return FaultScenario(tuple(faults), label if label is not None else format_set(f.target for f in faults))


def format_scenario(scenario: FaultScenario) -> str:
    lines = [f"label: {scenario.label}"]
    lines += [f"fault: target={f.target} onset_s={f.onset!r} magnitude={f.magnitude!r}" for f in scenario.faults]
    return "\n".join(lines) + "\n"


def _order(ids: Iterable[str]) -> list[str]:
    rank = {f: i for i, f in enumerate(FAULT_IDS)}
    return sorted(ids, key=lambda f: (rank.get(f, len(rank)), f))


def format_set(ids: Iterable[str], ordered: bool = True) -> str:
    ids = list(ids)
    return "{" + ", ".join(_order(ids) if ordered else ids) + "}"


def _label_targets(label: str) -> frozenset[str] | None:
    m = re.fullmatch(r"\s*\{([^{}]*)\}\s*", label)
    if not m:
        return None
    return frozenset(t.strip() for t in m.group(1).split(",") if t.strip())


def builtin_labels() -> list[str]:
    return [format_set(row, ordered=False) for row in TABLE1]


@dataclass
class ReportRow:
    label: str
    injected: frozenset[str]
    fdi: FdiDiagnosis | None = None
    dx: DxDiagnosis | None = None
    ig: IgDiagnosis | None = None
    alarms: AlarmState | None = None

    def sets(self, method: str) -> tuple[frozenset[str], ...] | None:
        if method == "fdi":
            return None if self.fdi is None else self.fdi.candidates
        if method == "dx":
            return None if self.dx is None else self.dx.diagnoses
        if method == "ig":
            return None if self.ig is None else (self.ig.sources,)
        raise ValueError(f"unknown method {method!r}")

    def exact(self, method: str) -> bool | None:
        """Exact recovery: the single reported set equals the injected one."""
        out = self.sets(method)
        if out is None:
            return None
        return out == (self.injected,)


@dataclass
class ExperimentReport:
    rows: list[ReportRow] = field(default_factory=list)
    methods: tuple[str, ...] = METHODS

    def counts(self, method: str) -> dict[str, tuple[int, int]]:
        """Exact matches and totals for single-fault and multiple-fault rows."""
        out = {}
        for name, pick in (("single", lambda n: n == 1), ("multiple", lambda n: n >= 2)):
            rows = [r for r in self.rows if pick(len(r.injected)) and r.exact(method) is not None]
            out[name] = (sum(bool(r.exact(method)) for r in rows), len(rows))
        return out

    def rate(self, method: str, kind: str) -> float | None:
        hit, n = self.counts(method)[kind]
        return None if n == 0 else hit / n


class Workbench:
    """Model, nominal run, thresholds and diagnoser data for one config."""

    def __init__(self, config: Config | None = None):
        self.config = config = config or Config()
        self.model, self.ss, self.graph = three_tank(config.params, config.msf1, config.msf2)
        self.x0 = steady_state(self.ss, self.ss.nominal_inputs)
        self.nominal = self._simulate(FaultScenario())
        self.levels = nominal_levels(self.nominal, config.decided_at)
        self.thresholds = default_thresholds(self.levels, config.threshold_fraction)
        self.signature = build_signature_matrix(self.graph)
        self._templates = None

    def _simulate(self, scenario: FaultScenario):
        c = self.config
        return simulate(self.ss, scenario, horizon=c.horizon, dt=c.dt, x0=self.x0,
                        noise_std=c.noise_std, seed=c.seed)

    def nominal_value(self, target: str) -> float:
        if target in ACTUATORS:
            return float(self.ss.nominal_inputs[self.ss.inputs.index(target)])
        return self.levels[target]

    def builtin_scenario(self, label_or_targets: str | Iterable[str]) -> FaultScenario:
        """Scenario for a set of targets, shared onset and magnitude fraction."""
        if isinstance(label_or_targets, str):
            targets = _label_targets(label_or_targets)
            if targets is None:
                raise ValueError(f"not a fault-set label: {label_or_targets!r}")
            label = label_or_targets.strip()
        else:
            targets = list(label_or_targets)
            label = format_set(targets, ordered=False)
        c = self.config
        faults = tuple(FaultSpec(t, c.onset, c.magnitude_fraction * (self.nominal_value(t) or 1.0))
                       for t in _order(targets))
        return FaultScenario(faults, label)

    def simulate(self, scenario: FaultScenario):
        return self._simulate(scenario)

    def alarms(self, scenario: FaultScenario) -> AlarmState:
        trace = self._simulate(scenario)
        res = compute_residuals(trace, self.nominal, self.config.params)
        return detect_alarms(res, self.thresholds, self.config.persistence, self.config.decided_at)

    @property
    def templates(self):
        if self._templates is None:
            def unit(fault):
                a = self.alarms(FaultScenario((FaultSpec(fault, self.config.onset, 1.0),)))
                return a.global_values
            self._templates = build_fault_templates(unit)
        return self._templates

    def run_scenario(self, scenario: FaultScenario, method: str = "all") -> ReportRow:
        if method != "all" and method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        wanted = METHODS if method == "all" else (method,)
        alarms = self.alarms(scenario)
        row = ReportRow(scenario.label, scenario.targets, alarms=alarms)
        if "fdi" in wanted:
            row.fdi = fdi_diagnose(alarms, self.signature)
        if "dx" in wanted:
            row.dx = dx_diagnose(alarms, self.templates, self.config.max_size, self.config.tol)
        if "ig" in wanted:
            row.ig = ig_diagnose(self.graph, alarms, self.config.tol)
        return row

    def run_table1(self, method: str = "all") -> ExperimentReport:
        rows = [self.run_scenario(self.builtin_scenario(t), method) for t in TABLE1]
        return ExperimentReport(rows, METHODS if method == "all" else (method,))


def run_scenario(scenario: FaultScenario | str, method: str = "all", config: Config | None = None) -> ReportRow:
    """Run one scenario given as a parsed scenario, a file's text, or a label like ``{De1}``."""
    bench = Workbench(config)
    if isinstance(scenario, str):
        targets = _label_targets(scenario)
        scenario = bench.builtin_scenario(scenario) if targets is not None else parse_scenario(scenario)
    return bench.run_scenario(scenario, method)


def run_table1(config: Config | None = None, method: str = "all") -> ExperimentReport:
    return Workbench(config).run_table1(method)


_HEADERS = {"fdi": "FDI", "dx": "DX", "ig": "IG"}


def _cell(sets: Sequence[frozenset[str]] | None) -> str:
    if sets is None:
        return "-"
    if not sets:
        return "none"
    return " ".join(format_set(s) for s in sets)


def _pct(hit: int, n: int) -> str:
    return "n/a" if n == 0 else f"{100.0 * hit / n:.1f}%"


def summary_lines(report: ExperimentReport) -> list[tuple[str, str, int, int]]:
    out = []
    for m in report.methods:
        counts = report.counts(m)
        for kind in ("single", "multiple"):
            hit, n = counts[kind]
            out.append((_HEADERS[m], kind, hit, n))
    return out


def render_report(report: ExperimentReport, fmt: str = "text") -> str:
    """Text table (Injected | FDI | DX | IG) or CSV with a summary block."""
    if fmt not in ("text", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    methods = report.methods
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["injected"] + [m for m in methods] + [f"{m}_exact" for m in methods])
        for r in report.rows:
            w.writerow([r.label] + [_cell(r.sets(m)) for m in methods]
                       + [int(bool(r.exact(m))) for m in methods])
        w.writerow([])
        w.writerow(["method", "kind", "exact", "total", "rate_percent"])
        for name, kind, hit, n in summary_lines(report):
            w.writerow([name, kind, hit, n, "" if n == 0 else f"{100.0 * hit / n:.1f}"])
        return buf.getvalue()

    header = ["Injected"] + [_HEADERS[m] for m in methods]
    body = [[r.label] + [_cell(r.sets(m)) + ("" if r.exact(m) else " *") for m in methods]
            for r in report.rows]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    fmt_row = lambda row: " | ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
    lines = [fmt_row(header), "-+-".join("-" * w for w in widths)]
    lines += [fmt_row(row) for row in body]
    if report.rows:
        lines.append("")
        lines.append("(* = not an exact recovery of the injected set)")
        for name, kind, hit, n in summary_lines(report):
            lines.append(f"{name} {kind}-fault exact recovery: {hit}/{n} = {_pct(hit, n)}")
    return "\n".join(lines) + "\n"


def config_dict(config: Config) -> dict:
    return asdict(config)

"""Global and local residuals, and crisp alarm decisions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .bondgraph import ThreeTankParams
from .plant import SENSORS, SimulationTrace

CONSTRAINTS = ("r_De1", "r_De2", "r_De3", "r_Df1", "r_Df2")

# fault candidates occurring in each local constraint
CONSTRAINT_MEMBERS: dict[str, frozenset[str]] = {
    "r_De1": frozenset({"Msf1", "De1", "Df1"}),
    "r_De2": frozenset({"De2", "Df1", "Df2"}),
    "r_De3": frozenset({"Msf2", "De3", "Df2"}),
    "r_Df1": frozenset({"De1", "De2", "Df1"}),
    "r_Df2": frozenset({"De2", "De3", "Df2"}),
}

NORMAL, HIGH, LOW = "normal", "high", "low"
VIOLATED = "violated"


@dataclass
class ResidualTrace:
    times: np.ndarray
    global_residuals: dict[str, np.ndarray]
    local_residuals: dict[str, np.ndarray]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class AlarmState:
    """Alarm vector at one decision instant.

    Residual values at ``decided_at`` and the thresholds used are kept
    alongside the symbolic alarms; quantitative diagnosers need them.
    """

    global_alarm: Mapping[str, str]
    local_alarm: Mapping[str, str]
    decided_at: float
    global_values: Mapping[str, float]
    local_values: Mapping[str, float]
    thresholds: Mapping[str, float]

    @property
    def alarmed(self) -> dict[str, int]:
        """Alarmed variables with their sign (+1 high, -1 low)."""
        return {v: (1 if a == HIGH else -1) for v, a in self.global_alarm.items() if a != NORMAL}

    @property
    def violated(self) -> frozenset[str]:
        return frozenset(c for c, a in self.local_alarm.items() if a == VIOLATED)

    @property
    def any_alarm(self) -> bool:
        return bool(self.alarmed) or bool(self.violated)


def backward_difference(y: np.ndarray, dt: float) -> np.ndarray:
    d = np.zeros_like(y)
    d[1:] = (y[1:] - y[:-1]) / dt
    return d


def compute_residuals(trace: SimulationTrace, nominal: SimulationTrace,
                      params: ThreeTankParams | None = None) -> ResidualTrace:
    """Global residuals against the nominal run, local residuals per constraint."""
    params = params or ThreeTankParams()
    if trace.times.shape != nominal.times.shape or not np.allclose(trace.times, nominal.times, rtol=0, atol=1e-12):
        raise ValueError("trace and nominal run are on different time grids")
    if trace.output_names != nominal.output_names:
        raise ValueError("trace and nominal run have different sensors")

    glob = {v: trace.measured(v) - nominal.measured(v) for v in SENSORS}

    dt = trace.dt
    p = params
    De1, De2, De3 = trace.measured("De1"), trace.measured("De2"), trace.measured("De3")
    Df1, Df2 = trace.measured("Df1"), trace.measured("Df2")
    u1, u2 = trace.commanded("Msf1"), trace.commanded("Msf2")
    local = {
        "r_De1": p.C1 * backward_difference(De1, dt) - (u1 - Df1),
        "r_De2": p.C2 * backward_difference(De2, dt) - (Df1 + Df2 - De2 / p.R0),
        "r_De3": p.C3 * backward_difference(De3, dt) - (u2 - Df2),
        "r_Df1": Df1 - (De1 - De2) / p.R1,
        "r_Df2": Df2 - (De3 - De2) / p.R2,
    }
    return ResidualTrace(trace.times.copy(), glob, local)


def nominal_levels(nominal: SimulationTrace, at: float | None = None) -> dict[str, float]:
    k = len(nominal.times) - 1 if at is None else nominal.index_at(at)
    return {v: float(nominal.measured(v)[k]) for v in SENSORS}


def default_thresholds(levels: Mapping[str, float], fraction: float = 0.05) -> dict[str, float]:
    """Thresholds as a fraction of each signal's nominal steady value.

    Local constraints are flow balances; they share one flow scale, the
    smaller nominal valve flow. A zero nominal value falls back to scale 1.
    """
    if fraction <= 0:
        raise ValueError("threshold fraction must be positive")

    def scale(x: float) -> float:
        return abs(x) if abs(x) > 0 else 1.0

    thr = {v: fraction * scale(levels[v]) for v in SENSORS}
    flow = min(scale(levels["Df1"]), scale(levels["Df2"]))
    thr.update({c: fraction * flow for c in CONSTRAINTS})
    return thr


def detect_alarms(residuals: ResidualTrace, thresholds: Mapping[str, float] | float,
                  persistence: float = 0.5, decided_at: float = 99.0) -> AlarmState:
    """Crisp alarms: a signal alarms only if beyond threshold over the whole
    window ``[decided_at - persistence, decided_at]``."""
    names = list(residuals.global_residuals) + list(residuals.local_residuals)
    if isinstance(thresholds, (int, float)):
        thresholds = {n: float(thresholds) for n in names}
    thresholds = dict(thresholds)
    for n in names:
        if n not in thresholds:
            raise ValueError(f"no threshold for {n!r}")
        if not thresholds[n] > 0:
            raise ValueError(f"threshold for {n!r} must be positive, got {thresholds[n]}")

    times = residuals.times
    dt = residuals.dt
    if persistence < dt * (1 - 1e-9):
        raise ValueError(f"persistence must be >= dt ({dt})")
    k_end = int(round((decided_at - times[0]) / dt))
    if k_end < 0 or k_end >= len(times) or abs(times[k_end] - decided_at) > 0.5 * dt:
        raise ValueError(f"decision time {decided_at} outside the trace")
    k_start = k_end - int(round(persistence / dt))
    if k_start < 0:
        raise ValueError("persistence window starts before the trace")

    glob = {}
    for v, r in residuals.global_residuals.items():
        w = r[k_start:k_end + 1]
        thr = thresholds[v]
        glob[v] = HIGH if np.all(w > thr) else LOW if np.all(w < -thr) else NORMAL
    local = {}
    for c, r in residuals.local_residuals.items():
        w = r[k_start:k_end + 1]
        local[c] = VIOLATED if np.all(np.abs(w) > thresholds[c]) else NORMAL

    return AlarmState(
        global_alarm=glob,
        local_alarm=local,
        decided_at=float(times[k_end]),
        global_values={v: float(r[k_end]) for v, r in residuals.global_residuals.items()},
        local_values={c: float(r[k_end]) for c, r in residuals.local_residuals.items()},
        thresholds=thresholds,
    )

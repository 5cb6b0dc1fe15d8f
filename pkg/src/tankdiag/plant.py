"""Fixed-step simulation of the three-tank plant with fault injection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .bondgraph import StateSpace

ACTUATORS = ("Msf1", "Msf2")
SENSORS = ("De1", "De2", "De3", "Df1", "Df2")
FAULT_IDS = ACTUATORS + SENSORS

# onset comparisons on the float time grid
_GRID_EPS = 1e-9


class SimulationError(ValueError):
    pass


class NumericError(ArithmeticError):
    def __init__(self, step: int, time: float):
        self.step = step
        self.time = time
        super().__init__(f"non-finite state at step {step} (t={time:g} s)")


@dataclass(frozen=True)
class FaultSpec:
    """Additive step bias on an actuator flow or a sensor reading."""

    target: str
    onset: float
    magnitude: float

    def __post_init__(self):
        if self.target not in FAULT_IDS:
            raise ValueError(f"unknown fault target {self.target!r}; expected one of {', '.join(FAULT_IDS)}")
        if not (math.isfinite(self.onset) and self.onset >= 0):
            raise ValueError(f"fault onset must be >= 0, got {self.onset}")
        if not math.isfinite(self.magnitude) or self.magnitude == 0:
            raise ValueError(f"fault magnitude must be finite and nonzero, got {self.magnitude}")

    @property
    def kind(self) -> str:
        return "actuator-bias" if self.target in ACTUATORS else "sensor-bias"


@dataclass(frozen=True)
class FaultScenario:
    faults: tuple[FaultSpec, ...] = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "faults", tuple(self.faults))
        targets = [f.target for f in self.faults]
        if len(set(targets)) != len(targets):
            raise ValueError("at most one fault per target")

    @property
    def targets(self) -> frozenset[str]:
        return frozenset(f.target for f in self.faults)


@dataclass
class SimulationTrace:
    times: np.ndarray
    true_state: np.ndarray      # (N, n_states)
    measurements: np.ndarray    # (N, n_outputs)
    inputs: np.ndarray          # commanded, (N, n_inputs)
    true_inputs: np.ndarray     # commanded + actuator biases
    state_names: tuple[str, ...]
    output_names: tuple[str, ...]
    input_names: tuple[str, ...]
    scenario: FaultScenario = field(default_factory=FaultScenario)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def measured(self, name: str) -> np.ndarray:
        return self.measurements[:, self.output_names.index(name)]

    def commanded(self, name: str) -> np.ndarray:
        return self.inputs[:, self.input_names.index(name)]

    def index_at(self, t: float) -> int:
        k = int(round((t - self.times[0]) / self.dt))
        if k < 0 or k >= len(self.times) or abs(self.times[k] - t) > 0.5 * self.dt:
            raise SimulationError(f"time {t} outside the trace grid")
        return k


def rk4_step(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_propagator(A: np.ndarray, B: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """One RK4 step of ``x' = A x + B u`` (u held over the step) as matrices.

    RK4 is linear in ``(x, u)`` for a linear right-hand side, so applying the
    stages to basis vectors gives ``x_next = Phi x + Gamma u`` exactly.
    """
    n, m = B.shape
    Phi = np.column_stack([rk4_step(lambda x: A @ x, e, dt) for e in np.eye(n)]) if n else np.zeros((0, 0))
    zero = np.zeros(n)
    Gamma = np.column_stack([rk4_step(lambda x, u=u: A @ x + B @ u, zero, dt) for u in np.eye(m)]) if m else np.zeros((n, 0))
    return Phi, Gamma


def steady_state(model: StateSpace, inputs: Iterable[float]) -> np.ndarray:
    """Equilibrium ``-A^-1 B u``."""
    u = np.asarray(list(inputs), dtype=float)
    if u.shape != (len(model.inputs),):
        raise ValueError(f"expected {len(model.inputs)} inputs")
    if not np.isfinite(np.linalg.cond(model.A)) or np.linalg.cond(model.A) > 1e12:
        raise ArithmeticError("system matrix is singular; no unique equilibrium")
    return -np.linalg.solve(model.A, model.B @ u)


def simulate(model: StateSpace, scenario: FaultScenario | None = None, horizon: float = 100.0,
             dt: float = 0.01, x0: Iterable[float] | None = None, inputs: Iterable[float] | None = None,
             noise_std: float = 0.0, seed: int | None = None) -> SimulationTrace:
    """Integrate the plant with classic fixed-step RK4.

    Actuator biases add to the true inflow from their onset (zero-order
    hold over each step); sensor biases add to the reading only. Noise is
    off unless ``noise_std > 0``.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise SimulationError(f"dt must be > 0, got {dt}")
    if not (horizon >= dt and math.isfinite(horizon)):
        raise SimulationError(f"horizon must be >= dt, got {horizon}")
    if noise_std < 0:
        raise SimulationError("noise_std must be >= 0")
    scenario = scenario or FaultScenario()
    n_steps = int(math.floor(horizon / dt + _GRID_EPS))
    times = np.arange(n_steps + 1) * dt

    u_cmd = np.asarray(list(inputs) if inputs is not None else model.nominal_inputs, dtype=float)
    if u_cmd.shape != (len(model.inputs),):
        raise SimulationError(f"expected {len(model.inputs)} inputs")
    x = np.zeros(model.n_states) if x0 is None else np.asarray(list(x0), dtype=float)
    if x.shape != (model.n_states,):
        raise SimulationError(f"expected initial state of length {model.n_states}")

    commanded = np.tile(u_cmd, (n_steps + 1, 1))
    true_u = commanded.copy()
    sensor_bias = np.zeros((n_steps + 1, len(model.outputs)))
    for f in scenario.faults:
        active = times >= f.onset - _GRID_EPS
        if f.kind == "actuator-bias":
            if f.target not in model.inputs:
                raise SimulationError(f"model has no input {f.target!r}")
            true_u[active, model.inputs.index(f.target)] += f.magnitude
        else:
            if f.target not in model.outputs:
                raise SimulationError(f"model has no sensor {f.target!r}")
            sensor_bias[active, model.outputs.index(f.target)] += f.magnitude

    Phi, Gamma = rk4_propagator(model.A, model.B, dt)
    states = np.empty((n_steps + 1, model.n_states))
    states[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            x = Phi @ x + Gamma @ true_u[k]
            states[k + 1] = x
    bad = ~np.isfinite(states).all(axis=1)
    if bad.any():
        k = int(np.argmax(bad))
        raise NumericError(k, float(times[k]))

    y = states @ model.C.T + true_u @ model.D.T + sensor_bias
    if noise_std > 0:
        y = y + np.random.default_rng(seed).normal(0.0, noise_std, size=y.shape)
    return SimulationTrace(times, states, y, commanded, true_u, model.states, model.outputs,
                           model.inputs, scenario)

"""Bond-graph model of the three-tank plant.

The model is restricted to what the hydraulic benchmark needs: flow
sources (Sf), capacitive stores (C), linear resistors (R) and 0/1
junctions. Causality is assigned with the sequential causality
assignment procedure; the causal marks then drive two derivations:

* linear state equations ``dx/dt = A x + B u``, ``y = C x + D u`` with the
  store efforts (tank pressures) as states, and
* the influence graph over inputs and sensed variables, obtained by
  expanding each sensed variable's defining relation until other sensed
  variables or inputs are reached (unmeasured internal variables are
  eliminated along the way).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

ELEMENT_KINDS = ("FlowSource", "EffortStore", "Resistor")
JUNCTION_KINDS = ("Zero", "One")
UNSUPPORTED_KINDS = ("Se", "I", "TF", "GY", "MTF", "MGY", "MSe", "De", "Df")

_TEXT_KINDS = {
    "Sf": "FlowSource",
    "Msf": "FlowSource",
    "C": "EffortStore",
    "R": "Resistor",
}
_TEXT_JUNCTIONS = {"0": "Zero", "1": "One"}


class BondGraphError(ValueError):
    """Structural problem with a bond-graph model."""


class UnsupportedElementError(BondGraphError):
    pass


class BondGraphParseError(BondGraphError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CausalityError(BondGraphError):
    """Causality cannot be assigned consistently.

    ``node`` names the junction (or element) where the conflict showed up.
    """

    def __init__(self, node: str, message: str):
        self.node = node
        super().__init__(f"causality conflict at {node!r}: {message}")


class AlgebraicLoopError(BondGraphError):
    pass


@dataclass(frozen=True)
class Element:
    id: str
    kind: str
    parameter: float

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise UnsupportedElementError(f"unsupported element kind {self.kind!r} for {self.id!r}")
        if not math.isfinite(self.parameter):
            raise BondGraphError(f"parameter of {self.id!r} must be finite")
        if self.kind in ("EffortStore", "Resistor") and self.parameter <= 0:
            raise BondGraphError(f"parameter of {self.kind} {self.id!r} must be positive, got {self.parameter}")


@dataclass(frozen=True)
class Junction:
    id: str
    kind: str

    def __post_init__(self):
        if self.kind not in JUNCTION_KINDS:
            raise BondGraphError(f"unknown junction kind {self.kind!r}")


@dataclass(frozen=True)
class Bond:
    """Power bond ``tail -> head``.

    ``effort_by`` holds the causal mark: the id of the end that imposes the
    effort on this bond (the opposite end imposes the flow). ``None`` until
    causality is assigned.
    """

    id: str
    tail: str
    head: str
    effort_by: str | None = None

    @property
    def effort_var(self) -> str:
        return f"e_{self.id}"

    @property
    def flow_var(self) -> str:
        return f"f_{self.id}"

    def other(self, node: str) -> str:
        return self.head if node == self.tail else self.tail


@dataclass(frozen=True)
class Sensor:
    id: str
    kind: str  # "effort" | "flow"
    node: str


@dataclass(frozen=True)
class BondGraphModel:
    elements: Mapping[str, Element]
    junctions: Mapping[str, Junction]
    bonds: tuple[Bond, ...]
    sensors: tuple[Sensor, ...] = ()

    def __post_init__(self):
        _validate(self)

    def node_ids(self) -> list[str]:
        return list(self.elements) + list(self.junctions)

    def bonds_at(self, node: str) -> list[Bond]:
        return [b for b in self.bonds if node in (b.tail, b.head)]

    def bond(self, bond_id: str) -> Bond:
        for b in self.bonds:
            if b.id == bond_id:
                return b
        raise KeyError(bond_id)

    @property
    def is_causal(self) -> bool:
        return all(b.effort_by is not None for b in self.bonds)

    def count_elements(self) -> dict[str, int]:
        counts = {k: 0 for k in ELEMENT_KINDS}
        for el in self.elements.values():
            counts[el.kind] += 1
        return counts

    def count_sensors(self) -> dict[str, int]:
        counts = {"effort": 0, "flow": 0}
        for s in self.sensors:
            counts[s.kind] += 1
        return counts

    def causality(self) -> dict[str, str | None]:
        return {b.id: b.effort_by for b in self.bonds}

    def store_causality(self) -> dict[str, str]:
        """'integral' or 'derivative' for every EffortStore."""
        out = {}
        for el in self.elements.values():
            if el.kind == "EffortStore":
                (b,) = self.bonds_at(el.id)
                out[el.id] = "integral" if b.effort_by == el.id else "derivative"
        return out


def _validate(model: BondGraphModel) -> None:
    ids = list(model.elements) + list(model.junctions)
    if len(set(ids)) != len(ids):
        raise BondGraphError("element and junction ids must be unique")
    for key, el in model.elements.items():
        if key != el.id:
            raise BondGraphError(f"element key {key!r} does not match id {el.id!r}")
    bond_ids = [b.id for b in model.bonds]
    if len(set(bond_ids)) != len(bond_ids):
        raise BondGraphError("bond ids must be unique")
    known = set(ids)
    for b in model.bonds:
        if b.tail not in known or b.head not in known:
            raise BondGraphError(f"bond {b.id!r} references unknown node")
        if b.tail == b.head:
            raise BondGraphError(f"bond {b.id!r} is a self-loop")
        if b.effort_by is not None and b.effort_by not in (b.tail, b.head):
            raise BondGraphError(f"bond {b.id!r} causal mark names a node it does not touch")
    for el in model.elements.values():
        n = len(model.bonds_at(el.id))
        if n != 1:
            raise BondGraphError(f"element {el.id!r} must carry exactly one bond, has {n}")

    sensor_ids = [s.id for s in model.sensors]
    if len(set(sensor_ids)) != len(sensor_ids):
        raise BondGraphError("sensor ids must be unique")
    for s in model.sensors:
        if s.id in known:
            raise BondGraphError(f"sensor id {s.id!r} clashes with a node id")
        j = model.junctions.get(s.node)
        if j is None:
            raise BondGraphError(f"sensor {s.id!r} must sit on a junction")
        if s.kind == "effort" and j.kind != "Zero":
            raise BondGraphError(f"effort sensor {s.id!r} must sit on a 0-junction")
        if s.kind == "flow" and j.kind != "One":
            raise BondGraphError(f"flow sensor {s.id!r} must sit on a 1-junction")
        if s.kind not in ("effort", "flow"):
            raise BondGraphError(f"sensor kind must be effort or flow, got {s.kind!r}")

    if ids:
        adj: dict[str, set[str]] = {n: set() for n in ids}
        for b in model.bonds:
            adj[b.tail].add(b.head)
            adj[b.head].add(b.tail)
        seen = {ids[0]}
        todo = [ids[0]]
        while todo:
            for m in adj[todo.pop()]:
                if m not in seen:
                    seen.add(m)
                    todo.append(m)
        if len(seen) != len(ids):
            raise BondGraphError("bond graph is not connected")


# ---------------------------------------------------------------------------
# three-tank plant


@dataclass(frozen=True)
class ThreeTankParams:
    """Tank capacitances and valve resistances (linear laws)."""

    C1: float = 1.0
    C2: float = 1.0
    C3: float = 1.0
    R1: float = 1.0
    R2: float = 1.0
    R0: float = 1.0

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"plant parameter {name} must be a positive real, got {value!r}")

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("C1", "C2", "C3", "R1", "R2", "R0")}


def build_three_tank_model(params: ThreeTankParams | Mapping[str, float] | None = None,
                           msf1: float = 1.0, msf2: float = 1.0) -> BondGraphModel:
    """Bond graph of the three-tank benchmark.

    Msf1 feeds tank 1, Msf2 feeds tank 3; valve 1 joins tanks 1-2, valve 2
    joins tanks 3-2 and the outlet R0 drains tank 2 to ambient.
    """
    if params is None:
        params = ThreeTankParams()
    elif not isinstance(params, ThreeTankParams):
        params = ThreeTankParams(**params)
    p = params
    elements = {
        "Msf1": Element("Msf1", "FlowSource", float(msf1)),
        "Msf2": Element("Msf2", "FlowSource", float(msf2)),
        "C1": Element("C1", "EffortStore", p.C1),
        "C2": Element("C2", "EffortStore", p.C2),
        "C3": Element("C3", "EffortStore", p.C3),
        "R1": Element("R1", "Resistor", p.R1),
        "R2": Element("R2", "Resistor", p.R2),
        "R0": Element("R0", "Resistor", p.R0),
    }
    junctions = {
        "J01": Junction("J01", "Zero"),
        "J02": Junction("J02", "Zero"),
        "J03": Junction("J03", "Zero"),
        "J11": Junction("J11", "One"),
        "J12": Junction("J12", "One"),
    }
    links = [
        ("Msf1", "J01"), ("J01", "C1"), ("J01", "J11"), ("J11", "R1"), ("J11", "J02"),
        ("J02", "C2"), ("J02", "R0"),
        ("Msf2", "J03"), ("J03", "C3"), ("J03", "J12"), ("J12", "R2"), ("J12", "J02"),
    ]
    bonds = tuple(Bond(f"b{i}", t, h) for i, (t, h) in enumerate(links, start=1))
    sensors = (
        Sensor("De1", "effort", "J01"),
        Sensor("De2", "effort", "J02"),
        Sensor("De3", "effort", "J03"),
        Sensor("Df1", "flow", "J11"),
        Sensor("Df2", "flow", "J12"),
    )
    return BondGraphModel(elements, junctions, bonds, sensors)


# ---------------------------------------------------------------------------
# textual format


def parse_bond_graph(text: str) -> BondGraphModel:
    """Parse the line-oriented bond-graph description.

    ::

        # comment
        Sf   Msf1 1.0        # element: kind id parameter
        C    C1   1.0
        0    J01             # junction: 0|1 id
        bond Msf1 J01        # power bond tail -> head
        sensor De1 effort J01
    """
    elements: dict[str, Element] = {}
    junctions: dict[str, Junction] = {}
    bonds: list[Bond] = []
    sensors: list[Sensor] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0]
        if head == "bond":
            if len(tok) != 3:
                raise BondGraphParseError("expected 'bond <from> <to>'", lineno)
            bonds.append(Bond(f"b{len(bonds) + 1}", tok[1], tok[2]))
        elif head == "sensor":
            if len(tok) != 4:
                raise BondGraphParseError("expected 'sensor <id> effort|flow <junction>'", lineno)
            sensors.append(Sensor(tok[1], tok[2], tok[3]))
        elif head in _TEXT_JUNCTIONS:
            if len(tok) != 2:
                raise BondGraphParseError("expected '0|1 <id>'", lineno)
            junctions[tok[1]] = Junction(tok[1], _TEXT_JUNCTIONS[head])
        elif head in _TEXT_KINDS:
            if len(tok) != 3:
                raise BondGraphParseError(f"expected '{head} <id> <parameter>'", lineno)
            if tok[1] in elements:
                raise BondGraphParseError(f"duplicate element {tok[1]!r}", lineno)
            try:
                elements[tok[1]] = Element(tok[1], _TEXT_KINDS[head], float(tok[2]))
            except ValueError as exc:
                raise BondGraphParseError(str(exc), lineno) from None
        elif head in UNSUPPORTED_KINDS:
            raise UnsupportedElementError(f"line {lineno}: unsupported element kind {head!r}")
        else:
            raise BondGraphParseError(f"unknown keyword {head!r}", lineno)
    return BondGraphModel(elements, junctions, tuple(bonds), tuple(sensors))


def format_bond_graph(model: BondGraphModel) -> str:
    inverse = {"FlowSource": "Sf", "EffortStore": "C", "Resistor": "R"}
    lines = []
    for el in model.elements.values():
        lines.append(f"{inverse[el.kind]} {el.id} {el.parameter!r}")
    for j in model.junctions.values():
        lines.append(f"{'0' if j.kind == 'Zero' else '1'} {j.id}")
    for b in model.bonds:
        lines.append(f"bond {b.tail} {b.head}")
    for s in model.sensors:
        lines.append(f"sensor {s.id} {s.kind} {s.node}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# causality


def assign_causality(model: BondGraphModel) -> BondGraphModel:
    """Sequential causality assignment (sources, stores, resistors, rest).

    Stores are given integral causality; a store forced into derivative
    causality is reported as a conflict since state equations are only
    derived for integral stores. Existing marks are ignored, so assigning
    twice yields identical marks.
    """
    marks: dict[str, str] = {}
    bond_of = {b.id: b for b in model.bonds}
    at_node = {n: model.bonds_at(n) for n in model.node_ids()}

    def impose(b: Bond, effort_by: str, where: str) -> None:
        current = marks.get(b.id)
        if current is None:
            marks[b.id] = effort_by
            queue.extend(n for n in (b.tail, b.head) if n in model.junctions)
        elif current != effort_by:
            raise CausalityError(where, f"bond {b.tail}->{b.head} needs contradictory marks")

    def propagate() -> None:
        while queue:
            jid = queue.popleft()
            _propagate_junction(model.junctions[jid], at_node[jid], marks, impose)

    queue: deque[str] = deque()
    elements = list(model.elements.values())
    for el in elements:
        if el.kind == "FlowSource":
            (b,) = at_node[el.id]
            if marks.get(b.id) == el.id:
                raise CausalityError(b.other(el.id), f"flow source {el.id!r} forced to impose effort")
            impose(b, b.other(el.id), el.id)
            propagate()
    for el in elements:
        if el.kind == "EffortStore":
            (b,) = at_node[el.id]
            if b.id not in marks:
                impose(b, el.id, el.id)
                propagate()
    for el in elements:
        if el.kind == "Resistor":
            (b,) = at_node[el.id]
            if b.id not in marks:
                impose(b, el.id, el.id)
                propagate()
    for b in model.bonds:
        if b.id not in marks:
            impose(b, b.tail, b.tail)
            propagate()

    for el in elements:
        (b,) = at_node[el.id]
        if el.kind == "FlowSource" and marks[b.id] == el.id:
            raise CausalityError(b.other(el.id), f"flow source {el.id!r} forced to impose effort")
        if el.kind == "EffortStore" and marks[b.id] != el.id:
            raise CausalityError(b.other(el.id), f"store {el.id!r} forced into derivative causality")
    for j in model.junctions.values():
        _check_junction(j, at_node[j.id], marks)

    new_bonds = tuple(replace(b, effort_by=marks[b.id]) for b in bond_of.values())
    return replace(model, bonds=new_bonds)


def _strong_bonds(j: Junction, bonds: list[Bond], marks: Mapping[str, str]) -> list[Bond]:
    """Bonds through which a neighbour decides the junction's common variable."""
    if j.kind == "Zero":
        return [b for b in bonds if b.id in marks and marks[b.id] != j.id]
    return [b for b in bonds if b.id in marks and marks[b.id] == j.id]


def _propagate_junction(j: Junction, bonds: list[Bond], marks: dict[str, str], impose) -> None:
    strong = _strong_bonds(j, bonds, marks)
    free = [b for b in bonds if b.id not in marks]
    if len(strong) > 1:
        what = "effort" if j.kind == "Zero" else "flow"
        raise CausalityError(j.id, f"{len(strong)} bonds decide the common {what}")
    # weak marks: on a 0-junction the junction imposes effort, on a 1-junction the neighbour does
    if strong:
        for b in free:
            impose(b, j.id if j.kind == "Zero" else b.other(j.id), j.id)
    elif len(free) == 1:
        b = free[0]
        impose(b, b.other(j.id) if j.kind == "Zero" else j.id, j.id)
    elif not free and bonds:
        what = "effort" if j.kind == "Zero" else "flow"
        raise CausalityError(j.id, f"no bond decides the common {what}")


def _check_junction(j: Junction, bonds: list[Bond], marks: Mapping[str, str]) -> None:
    strong = _strong_bonds(j, bonds, marks)
    if len(strong) != 1:
        what = "effort" if j.kind == "Zero" else "flow"
        raise CausalityError(j.id, f"expected exactly one bond deciding the {what}, found {len(strong)}")


# ---------------------------------------------------------------------------
# equation derivation


class _CausalExpander:
    """Expand bond variables into linear forms over chosen leaf symbols.

    Every bond variable is computed by exactly one end of its bond (given
    by the causal mark). Expansion recurses through those assignments and
    stops at leaves; ``leaf`` maps a variable ``("e"|"f", bond_id)`` to a
    symbol name or ``None``.
    """

    def __init__(self, model: BondGraphModel, leaf):
        if not model.is_causal:
            raise BondGraphError("causality must be assigned first")
        self.model = model
        self.leaf = leaf
        self.bond = {b.id: b for b in model.bonds}
        self._at = {n: model.bonds_at(n) for n in model.node_ids()}
        self._cache: dict[tuple[str, str], dict[str, float]] = {}
        self._active: set[tuple[str, str]] = set()

    def expand(self, var: tuple[str, str], root: bool = False) -> dict[str, float]:
        if not root:
            sym = self.leaf(var)
            if sym is not None:
                return {sym: 1.0}
            if var in self._cache:
                return self._cache[var]
        if var in self._active:
            raise AlgebraicLoopError(f"algebraic loop through {var[0]}_{var[1]}")
        self._active.add(var)
        try:
            form = self._define(var)
        finally:
            self._active.discard(var)
        if not root:
            self._cache[var] = form
        return form

    def _define(self, var: tuple[str, str]) -> dict[str, float]:
        kind, bid = var
        b = self.bond[bid]
        node = b.effort_by if kind == "e" else b.other(b.effort_by)
        if node in self.model.elements:
            el = self.model.elements[node]
            if el.kind == "FlowSource":
                return {el.id: 1.0}
            if el.kind == "EffortStore":
                return {el.id: 1.0}
            # resistor: e = R f or f = e / R
            if kind == "e":
                return _scale(self.expand(("f", bid)), el.parameter)
            return _scale(self.expand(("e", bid)), 1.0 / el.parameter)

        j = self.model.junctions[node]
        bonds = self._at[node]
        marks = {x.id: x.effort_by for x in bonds}
        (strong,) = _strong_bonds(j, bonds, marks)
        common = "e" if j.kind == "Zero" else "f"
        if kind == common:
            return self.expand((common, strong.id))
        # the remaining variable of the strong bond closes the junction's sum
        s_strong = _sign(strong, node)
        acc: dict[str, float] = {}
        for x in bonds:
            if x.id != strong.id:
                _accumulate(acc, self.expand((kind, x.id)), -s_strong * _sign(x, node))
        return acc


def _sign(b: Bond, node: str) -> float:
    return 1.0 if b.head == node else -1.0


def _scale(form: Mapping[str, float], k: float) -> dict[str, float]:
    return {s: k * c for s, c in form.items()}


def _accumulate(acc: dict[str, float], form: Mapping[str, float], k: float) -> None:
    for s, c in form.items():
        acc[s] = acc.get(s, 0.0) + k * c


def _prune(form: Mapping[str, float], eps: float = 1e-15) -> dict[str, float]:
    return {s: c for s, c in form.items() if abs(c) > eps}


@dataclass(frozen=True)
class StateSpace:
    """``dx/dt = A x + B u``, ``y = C x + D u``.

    States are store efforts (tank pressures), inputs the flow-source
    commands, outputs the sensors.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    states: tuple[str, ...]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    nominal_inputs: tuple[float, ...] = field(default=())

    @property
    def n_states(self) -> int:
        return len(self.states)

    def output(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.C @ x + self.D @ u


def derive_state_equations(model: BondGraphModel) -> StateSpace:
    if not model.is_causal:
        raise BondGraphError("causality must be assigned before deriving state equations")
    stores = [el for el in model.elements.values() if el.kind == "EffortStore"]
    sources = [el for el in model.elements.values() if el.kind == "FlowSource"]
    states = tuple(el.id for el in stores)
    inputs = tuple(el.id for el in sources)

    def leaf(var):
        kind, bid = var
        b = exp.bond[bid]
        owner = b.effort_by if kind == "e" else b.other(b.effort_by)
        el = model.elements.get(owner)
        if el is not None and el.kind in ("EffortStore", "FlowSource"):
            return el.id
        return None

    exp = _CausalExpander(model, leaf)
    n, m = len(states), len(inputs)
    A = np.zeros((n, n))
    B = np.zeros((n, m))
    for i, el in enumerate(stores):
        (b,) = model.bonds_at(el.id)
        if b.effort_by != el.id:
            raise BondGraphError(f"store {el.id!r} is not in integral causality")
        inflow = _scale(exp.expand(("f", b.id)), _sign(b, el.id) / el.parameter)
        _fill_row(A[i], B[i], inflow, states, inputs)

    outputs = tuple(s.id for s in model.sensors)
    C = np.zeros((len(outputs), n))
    D = np.zeros((len(outputs), m))
    for k, s in enumerate(model.sensors):
        b = model.bonds_at(s.node)[0]
        form = exp.expand(("e" if s.kind == "effort" else "f", b.id))
        _fill_row(C[k], D[k], form, states, inputs)
    nominal = tuple(el.parameter for el in sources)
    return StateSpace(A, B, C, D, states, inputs, outputs, nominal)


def _fill_row(arow, brow, form, states, inputs):
    for sym, c in form.items():
        if sym in states:
            arow[states.index(sym)] += c
        elif sym in inputs:
            brow[inputs.index(sym)] += c
        else:
            raise BondGraphError(f"unexpected symbol {sym!r} in derived equation")


# ---------------------------------------------------------------------------
# influence graph


@dataclass(frozen=True)
class Node:
    """Influence-graph node.

    ``kind`` is ``input`` (exogenous), ``dynamic`` (integrating variable,
    ``d v/dt = self_gain*v + sum gain*parent``) or ``algebraic``
    (``v = sum gain*parent``). ``capacity`` scales a dynamic node's balance
    into flow units.
    """

    id: str
    kind: str
    measured: bool
    self_gain: float = 0.0
    capacity: float = 1.0


@dataclass(frozen=True)
class InfluenceGraph:
    nodes: Mapping[str, Node]
    arcs: Mapping[tuple[str, str], float]

    def __post_init__(self):
        for (u, v), g in self.arcs.items():
            if u not in self.nodes or v not in self.nodes:
                raise ValueError(f"arc {u}->{v} references unknown node")
            if not math.isfinite(g) or g == 0:
                raise ValueError(f"arc {u}->{v} gain must be finite and nonzero")
            if self.nodes[v].kind == "input":
                raise ValueError(f"input {v} cannot have incoming arcs")

    @property
    def inputs(self) -> list[str]:
        return [n for n, info in self.nodes.items() if info.kind == "input"]

    @property
    def measured(self) -> list[str]:
        return [n for n, info in self.nodes.items() if info.measured]

    def parents(self, v: str) -> list[str]:
        return [u for (u, w) in self.arcs if w == v]

    def children(self, u: str) -> list[str]:
        return [w for (x, w) in self.arcs if x == u]

    def in_degree(self, v: str) -> int:
        return len(self.parents(v))

    def gain(self, u: str, v: str) -> float:
        return self.arcs[(u, v)]

    def ancestors(self, v: str) -> set[str]:
        seen: set[str] = set()
        todo = [v]
        while todo:
            for u in self.parents(todo.pop()):
                if u not in seen:
                    seen.add(u)
                    todo.append(u)
        return seen

    def descendants(self, u: str) -> set[str]:
        seen: set[str] = set()
        todo = [u]
        while todo:
            for w in self.children(todo.pop()):
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return seen

    def steady_response(self, input_deviation: Mapping[str, float]) -> dict[str, float]:
        """Steady deviation of every non-input node for constant input deviations.

        Solves the graph's own balance relations; cycles are handled by
        the linear solve rather than by walking them.
        """
        free = [n for n, info in self.nodes.items() if info.kind != "input"]
        idx = {n: i for i, n in enumerate(free)}
        M = np.zeros((len(free), len(free)))
        rhs = np.zeros(len(free))
        for v in free:
            i = idx[v]
            info = self.nodes[v]
            if info.kind == "dynamic":
                M[i, i] += info.self_gain
            else:
                M[i, i] -= 1.0
            for u in self.parents(v):
                g = self.arcs[(u, v)]
                if u in idx:
                    M[i, idx[u]] += g
                else:
                    rhs[i] -= g * input_deviation.get(u, 0.0)
        try:
            sol = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            raise ValueError("influence graph has no unique steady state") from None
        return {v: float(sol[idx[v]]) for v in free}

    def local_residual(self, v: str, values: Mapping[str, float], rate: float = 0.0) -> float:
        """Violation of node ``v``'s own relation given neighbour values.

        Dynamic nodes are expressed in flow units:
        ``capacity*(dv/dt - self_gain*v - sum gain*parent)``.
        """
        info = self.nodes[v]
        drive = sum(self.arcs[(u, v)] * values[u] for u in self.parents(v))
        if info.kind == "dynamic":
            return info.capacity * (rate - info.self_gain * values[v] - drive)
        if info.kind == "algebraic":
            return values[v] - drive
        raise ValueError(f"input node {v!r} has no local relation")


def derive_influence_graph(model: BondGraphModel) -> InfluenceGraph:
    """Influence graph over flow-source inputs and sensed variables."""
    if not model.is_causal:
        raise BondGraphError("causality must be assigned before deriving the influence graph")
    effort_sensor = {s.node: s.id for s in model.sensors if s.kind == "effort"}
    flow_sensor = {s.node: s.id for s in model.sensors if s.kind == "flow"}

    def leaf(var):
        kind, bid = var
        b = exp.bond[bid]
        owner = b.effort_by if kind == "e" else b.other(b.effort_by)
        el = model.elements.get(owner)
        if el is not None and el.kind == "FlowSource":
            return el.id
        # a variable equal to a junction's common variable is that junction's sensor
        for end in (b.tail, b.head):
            j = model.junctions.get(end)
            if j is None:
                continue
            if kind == "e" and j.kind == "Zero" and end in effort_sensor:
                return effort_sensor[end]
            if kind == "f" and j.kind == "One" and end in flow_sensor:
                return flow_sensor[end]
        if el is not None and el.kind == "EffortStore":
            return el.id
        return None

    exp = _CausalExpander(model, leaf)
    nodes: dict[str, Node] = {}
    arcs: dict[tuple[str, str], float] = {}
    for el in model.elements.values():
        if el.kind == "FlowSource":
            nodes[el.id] = Node(el.id, "input", measured=False)

    for s in model.sensors:
        bonds = model.bonds_at(s.node)
        store = None
        if s.kind == "effort":
            for b in bonds:
                other = model.elements.get(b.other(s.node))
                if other is not None and other.kind == "EffortStore":
                    store, store_bond = other, b
        if store is not None:
            form = _scale(exp.expand(("f", store_bond.id)), _sign(store_bond, store.id) / store.parameter)
            kind, capacity = "dynamic", store.parameter
        else:
            j = model.junctions[s.node]
            (strong,) = _strong_bonds(j, bonds, {b.id: b.effort_by for b in bonds})
            form = exp.expand(("e" if s.kind == "effort" else "f", strong.id), root=True)
            kind, capacity = "algebraic", 1.0
        form = _prune(form)
        self_gain = form.pop(s.id, 0.0)
        nodes[s.id] = Node(s.id, kind, measured=True, self_gain=self_gain, capacity=capacity)
        for u, g in form.items():
            arcs[(u, s.id)] = g
    for (u, _v) in list(arcs):
        if u not in nodes:
            # store without a sensor: keep it as an unmeasured internal node
            nodes[u] = Node(u, "dynamic", measured=False)
    return InfluenceGraph(nodes, arcs)


def three_tank(params: ThreeTankParams | None = None, msf1: float = 1.0, msf2: float = 1.0):
    """Causal model, state space and influence graph of the default plant."""
    model = assign_causality(build_three_tank_model(params, msf1, msf2))
    return model, derive_state_equations(model), derive_influence_graph(model)


def hurwitz(A: np.ndarray) -> bool:
    return bool(np.all(np.linalg.eigvals(A).real < 0))


def iter_sensors(model: BondGraphModel, kind: str | None = None) -> Iterable[Sensor]:
    return (s for s in model.sensors if kind is None or s.kind == kind)

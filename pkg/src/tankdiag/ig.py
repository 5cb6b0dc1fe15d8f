"""Fault localization on the influence graph.

Backward search walks the graph upstream from every alarmed variable and
stops at measured variables that are normal. Each surviving candidate is
turned into a fault hypothesis (a sensor bias for measured variables, an
actuator bias for inputs) and tested forward with the steady gains of the
graph. The final diagnosis is the smallest set of accepted hypotheses that
jointly reproduces the observed deviations with coherent signs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np

from .bondgraph import InfluenceGraph
from .detection import AlarmState

_EPS = 1e-12


@dataclass(frozen=True)
class Hypothesis:
    source: str
    explained: frozenset[str]
    locally_confirmed: bool
    accepted: bool = True
    magnitude: float = 0.0
    reason: str = ""


@dataclass(frozen=True)
class IgDiagnosis:
    sources: frozenset[str]
    covers: Mapping[str, frozenset[str]] = field(default_factory=dict)
    magnitudes: Mapping[str, float] = field(default_factory=dict)
    hypotheses: tuple[Hypothesis, ...] = ()
    fallback: bool = False


@dataclass(frozen=True)
class Explanation:
    consistent: bool
    covers: Mapping[str, frozenset[str]]
    magnitudes: Mapping[str, float]
    reason: str = ""


def unit_signature(graph: InfluenceGraph, source: str) -> tuple[dict[str, float], dict[str, float]]:
    """Steady effect of a unit fault at ``source``.

    Returns (deviation of every measured variable, value of every local
    relation ``r_<var>``). An input fault moves the process; a fault on a
    measured variable is a sensor bias and moves only its own reading.
    Local relations use commanded inputs, so an input fault shows up there
    only through the measurements.
    """
    if source not in graph.nodes:
        raise ValueError(f"unknown source {source!r}")
    measured = graph.measured
    info = graph.nodes[source]
    if info.kind == "input":
        resp = graph.steady_response({source: 1.0})
        glob = {v: resp[v] for v in measured}
    elif info.measured:
        glob = {v: (1.0 if v == source else 0.0) for v in measured}
    else:
        raise ValueError(f"{source!r} is neither an input nor a measured variable")
    values = {n: 0.0 for n in graph.nodes}
    values.update(glob)
    local = {f"r_{v}": graph.local_residual(v, values) for v in measured}
    return glob, local


def backward_search(graph: InfluenceGraph, alarms: AlarmState) -> list[str]:
    """Candidate primary deviations for the alarmed variables.

    Upstream walks are cut at measured variables observed normal. An alarmed
    variable is kept unless an alarmed variable lies strictly upstream of it
    (upstream and not downstream, so members of one feedback loop are
    treated alike). Inputs reached by the walk are kept as well.
    """
    alarmed = set(alarms.alarmed)
    if not alarmed:
        return []

    def blocked(u: str) -> bool:
        info = graph.nodes[u]
        return info.measured and u not in alarmed

    def upstream(v: str) -> set[str]:
        seen: set[str] = set()
        todo = [v]
        while todo:
            for u in graph.parents(todo.pop()):
                if u not in seen and not blocked(u):
                    seen.add(u)
                    todo.append(u)
        return seen

    reach = {v: upstream(v) for v in alarmed}
    candidates: set[str] = set()
    for v in alarmed:
        strictly_up = [u for u in reach[v] & alarmed if u != v and v not in reach[u]]
        if not strictly_up:
            candidates.add(v)
        candidates.update(u for u in reach[v] if not graph.nodes[u].measured)
    return sorted(candidates)


def _predicted_violations(local: Mapping[str, float], thresholds: Mapping[str, float]) -> frozenset[str]:
    return frozenset(c for c, r in local.items() if abs(r) > thresholds[c])


def forward_test(graph: InfluenceGraph, source: str, alarms: AlarmState,
                 cover_fraction: float = 0.5) -> Hypothesis:
    """Test one primary deviation against the observed state.

    A sensor hypothesis takes the observed deviation of its variable. An
    input hypothesis takes the smallest magnitude consistent with its
    alarmed descendants, so deviations added by other faults cannot
    inflate it. The hypothesis is rejected when it predicts a significant
    deviation on a variable observed normal.
    """
    glob, local = unit_signature(graph, source)
    alarmed = alarms.alarmed
    obs = alarms.global_values
    thr = alarms.thresholds

    if graph.nodes[source].measured:
        if source not in alarmed:
            return Hypothesis(source, frozenset(), False, False, 0.0, "source variable is normal")
        magnitude = obs[source]
    else:
        effects = {v: obs[v] / g for v, g in glob.items() if v in alarmed and abs(g) > _EPS}
        if not effects:
            return Hypothesis(source, frozenset(), False, False, 0.0, "no alarmed variable downstream")
        strongest = max(effects, key=lambda v: (abs(glob[v]), v))
        sign = np.sign(effects[strongest])
        magnitude = sign * min(abs(r) for r in effects.values() if np.sign(r) == sign)

    pred = {v: magnitude * g for v, g in glob.items()}
    explained = frozenset(
        v for v, s in alarmed.items()
        if np.sign(pred[v]) == s and abs(pred[v]) > cover_fraction * thr[v]
    )
    pred_local = {c: magnitude * r for c, r in local.items()}
    confirmed = bool(_predicted_violations(pred_local, thr)) and \
        _predicted_violations(pred_local, thr) <= alarms.violated

    for v in graph.measured:
        if v not in alarmed and abs(pred[v] - obs[v]) > thr[v]:
            return Hypothesis(source, explained, confirmed, False, float(magnitude),
                              f"predicts a deviation on normal {v}")
    if not explained:
        return Hypothesis(source, explained, confirmed, False, float(magnitude), "explains no alarm")
    return Hypothesis(source, explained, confirmed, True, float(magnitude))


def explains(graph: InfluenceGraph, alarms: AlarmState, sources: Iterable[str],
             tol: float = 1e-3, cover_fraction: float = 0.5) -> Explanation:
    """Joint test of a set of primary deviations.

    Magnitudes are fitted together by least squares on the steady
    deviations of the measured variables. The set is consistent when the
    fit is exact to ``tol`` (relative), every sensor hypothesis has the sign
    of its own alarm, every source covers at least one alarm with a
    same-signed contribution, the covers span all alarms, and the predicted
    local violations equal the observed ones.
    """
    sources = sorted(sources)
    alarmed = alarms.alarmed
    thr = alarms.thresholds
    measured = graph.measured
    obs = np.array([alarms.global_values[v] for v in measured])
    if not sources:
        ok = not alarmed and not alarms.violated
        return Explanation(ok, {}, {}, "" if ok else "alarms left unexplained")

    sigs = {s: unit_signature(graph, s) for s in sources}
    M = np.column_stack([[sigs[s][0][v] for v in measured] for s in sources])
    if np.linalg.matrix_rank(M) < len(sources):
        return Explanation(False, {}, {}, "indistinguishable sources")
    coef, *_ = np.linalg.lstsq(M, obs, rcond=None)
    norm = float(np.linalg.norm(obs))
    rel = 0.0 if norm == 0 else float(np.linalg.norm(obs - M @ coef)) / norm
    mags = dict(zip(sources, map(float, coef)))
    if rel >= tol:
        return Explanation(False, {}, mags, f"deviations not reproduced (relative residual {rel:.3g})")

    covers = {}
    for s in sources:
        if graph.nodes[s].measured and np.sign(mags[s]) != alarmed.get(s, 0):
            return Explanation(False, {}, mags, f"{s} bias disagrees with its alarm")
        covers[s] = frozenset(
            v for v, sign in alarmed.items()
            if np.sign(mags[s] * sigs[s][0][v]) == sign and abs(mags[s] * sigs[s][0][v]) > cover_fraction * thr[v]
        )
        if not covers[s]:
            return Explanation(False, covers, mags, f"{s} explains no alarm")
    if frozenset().union(*covers.values()) != frozenset(alarmed):
        return Explanation(False, covers, mags, "alarms left uncovered")

    pred_local = {c: sum(mags[s] * sigs[s][1][c] for s in sources) for c in sigs[sources[0]][1]}
    if _predicted_violations(pred_local, thr) != alarms.violated:
        return Explanation(False, covers, mags, "local violations not reproduced")
    return Explanation(True, covers, mags)


def ig_diagnose(graph: InfluenceGraph, alarms: AlarmState, tol: float = 1e-3,
                cover_fraction: float = 0.5) -> IgDiagnosis:
    """Backward/forward localization with minimal multi-source explanation.

    Among consistent source sets of the smallest size, the one with the
    fewest sensor-bias sources wins; remaining ties go to the
    lexicographically smallest sorted id list.
    """
    alarmed = alarms.alarmed
    if not alarmed:
        return IgDiagnosis(frozenset())
    hyps = tuple(forward_test(graph, c, alarms, cover_fraction) for c in backward_search(graph, alarms))
    accepted = sorted(h.source for h in hyps if h.accepted)
    for k in range(1, len(accepted) + 1):
        found = []
        for combo in combinations(accepted, k):
            ex = explains(graph, alarms, combo, tol, cover_fraction)
            if ex.consistent:
                found.append((sum(graph.nodes[s].measured for s in combo), combo, ex))
        if found:
            # prefer deviations explained by propagation over independent sensor biases
            _, combo, ex = min(found, key=lambda t: t[:2])
            return IgDiagnosis(frozenset(combo), dict(ex.covers), dict(ex.magnitudes), hyps)
    # nothing explains the alarms jointly: each alarmed variable stands for itself
    covers = {v: frozenset({v}) for v in alarmed}
    return IgDiagnosis(frozenset(alarmed), covers, {v: alarms.global_values[v] for v in alarmed}, hyps,
                       fallback=True)

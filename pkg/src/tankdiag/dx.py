"""Consistency-based diagnosis refined by linear fault models."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .detection import CONSTRAINT_MEMBERS, CONSTRAINTS, AlarmState
from .plant import FAULT_IDS, SENSORS

FaultSet = frozenset


def _key(s: Iterable[str]) -> tuple[int, list[str]]:
    s = sorted(s)
    return len(s), s


def compute_conflicts(alarms: AlarmState | Iterable[str]) -> list[frozenset[str]]:
    """One conflict per violated local constraint: the faults it mentions."""
    violated = alarms.violated if isinstance(alarms, AlarmState) else frozenset(alarms)
    unknown = violated - set(CONSTRAINTS)
    if unknown:
        raise ValueError(f"unknown constraints {sorted(unknown)}")
    return [CONSTRAINT_MEMBERS[c] for c in CONSTRAINTS if c in violated]


def _minimal_family(conflicts: Iterable[Iterable[str]]) -> list[frozenset[str]]:
    family: list[frozenset[str]] = []
    for c in sorted({frozenset(c) for c in conflicts}, key=_key):
        if not c:
            raise ValueError("conflict sets must be nonempty")
        if not any(f <= c for f in family):
            family.append(c)
    return family


def minimal_hitting_sets(conflicts: Sequence[Iterable[str]], max_size: int = 7) -> list[frozenset[str]]:
    """All minimal hitting sets of size <= max_size (Reiter's HS-tree).

    The tree is grown breadth-first. A node is labelled with the first
    conflict its path does not hit; nodes whose path contains an already
    found hitting set are closed, and identical paths are expanded once.
    Conflicts that are supersets of others are dropped up front, which
    keeps the tree free of the pruning pitfalls of the original algorithm.
    """
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    family = _minimal_family(conflicts)
    if not family:
        return [frozenset()]
    found: list[frozenset[str]] = []
    level = [frozenset()]
    seen: set[frozenset[str]] = {frozenset()}
    for depth in range(max_size + 1):
        nxt = []
        for path in level:
            if any(h <= path for h in found):
                continue
            label = next((c for c in family if not c & path), None)
            if label is None:
                found.append(path)
                continue
            if depth == max_size:
                continue
            for comp in sorted(label):
                child = path | {comp}
                if child not in seen:
                    seen.add(child)
                    nxt.append(child)
        level = nxt
        if not level:
            break
    return sorted(found, key=_key)


def hitting_supersets(minimal: Sequence[frozenset[str]], universe: Iterable[str] = FAULT_IDS,
                      max_size: int = 7) -> list[frozenset[str]]:
    """Every hitting set up to max_size, i.e. supersets of the minimal ones."""
    universe = sorted(set(universe))
    out = []
    for k in range(0, min(max_size, len(universe)) + 1):
        for combo in combinations(universe, k):
            s = frozenset(combo)
            if any(m <= s for m in minimal):
                out.append(s)
    return sorted(out, key=_key)


@dataclass(frozen=True)
class FaultTemplate:
    fault: str
    deviation: np.ndarray  # steady global-residual change per unit bias, SENSORS order


@dataclass(frozen=True)
class DxDiagnosis:
    diagnoses: tuple[frozenset[str], ...]
    magnitudes: tuple[Mapping[str, float], ...] = ()
    notes: tuple[str, ...] = field(default=())
    minimal: tuple[frozenset[str], ...] = ()


def build_fault_templates(unit_response: Callable[[str], Mapping[str, float]],
                          faults: Iterable[str] = FAULT_IDS) -> dict[str, FaultTemplate]:
    """Templates from one unit-magnitude run per fault.

    ``unit_response(fault)`` returns the global residuals at the decision
    time for a unit bias on ``fault``.
    """
    templates = {}
    for f in faults:
        dev = unit_response(f)
        templates[f] = FaultTemplate(f, np.array([dev[v] for v in SENSORS], dtype=float))
    return templates


def template_rank(templates: Mapping[str, FaultTemplate]) -> int:
    M = np.column_stack([t.deviation for t in templates.values()])
    return int(np.linalg.matrix_rank(M))


def fit_fault_set(candidate: Iterable[str], observed: np.ndarray,
                  templates: Mapping[str, FaultTemplate]) -> tuple[float, dict[str, float]] | None:
    """Least-squares magnitudes; returns (relative residual, magnitudes) or
    None when the template columns are degenerate."""
    candidate = sorted(candidate)
    norm = float(np.linalg.norm(observed))
    if not candidate:
        return (0.0 if norm == 0 else 1.0), {}
    M = np.column_stack([templates[f].deviation for f in candidate])
    if np.linalg.matrix_rank(M) < len(candidate):
        return None
    coef, *_ = np.linalg.lstsq(M, observed, rcond=None)
    resid = float(np.linalg.norm(observed - M @ coef))
    rel = 0.0 if norm == 0 else resid / norm
    return rel, dict(zip(candidate, map(float, coef)))


def refine_with_fault_models(candidates: Iterable[Iterable[str]], observed: Mapping[str, float] | np.ndarray,
                             templates: Mapping[str, FaultTemplate], tol: float = 1e-3) -> DxDiagnosis:
    """Keep candidates whose fault models reproduce the observed deviations.

    Candidates are visited by cardinality; every candidate of the smallest
    cardinality with a relative fit residual below ``tol`` is returned.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(observed, Mapping):
        obs = np.array([observed[v] for v in SENSORS], dtype=float)
    else:
        obs = np.asarray(observed, dtype=float)
    accepted: list[frozenset[str]] = []
    mags: list[dict[str, float]] = []
    notes: list[str] = []
    best = None
    for cand in sorted({frozenset(c) for c in candidates}, key=_key):
        if best is not None and len(cand) > best:
            break
        fit = fit_fault_set(cand, obs, templates)
        if fit is None:
            notes.append(f"{{{', '.join(sorted(cand))}}}: degenerate fault models, rejected")
            continue
        rel, m = fit
        if rel < tol:
            accepted.append(cand)
            mags.append(m)
            best = len(cand)
    if not accepted:
        notes.append("no candidate reproduces the observed deviations")
    return DxDiagnosis(tuple(accepted), tuple(mags), tuple(notes))


def dx_diagnose(alarms: AlarmState, templates: Mapping[str, FaultTemplate],
                max_size: int = 7, tol: float = 1e-3) -> DxDiagnosis:
    """Conflicts -> minimal hitting sets -> fault-model revision.

    When no minimal diagnosis fits, the search continues over their
    supersets in cardinality order.
    """
    conflicts = compute_conflicts(alarms)
    minimal = minimal_hitting_sets(conflicts, max_size)
    candidates = hitting_supersets(minimal, FAULT_IDS, max_size)
    result = refine_with_fault_models(candidates, alarms.global_values, templates, tol)
    return DxDiagnosis(result.diagnoses, result.magnitudes, result.notes, tuple(minimal))

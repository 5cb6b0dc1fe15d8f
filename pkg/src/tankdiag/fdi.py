"""Structured-residual signature matching (singletons, then pairs)."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import numpy as np

from .bondgraph import InfluenceGraph
from .detection import AlarmState
from .plant import FAULT_IDS

EXACT, AMBIGUOUS, NO_MATCH = "exact", "ambiguous", "no-match"


@dataclass(frozen=True)
class SignatureMatrix:
    faults: tuple[str, ...]
    constraints: tuple[str, ...]
    entries: np.ndarray  # bool, faults x constraints

    def row(self, fault: str) -> frozenset[str]:
        i = self.faults.index(fault)
        return frozenset(c for c, hit in zip(self.constraints, self.entries[i]) if hit)

    def column(self, constraint: str) -> frozenset[str]:
        j = self.constraints.index(constraint)
        return frozenset(f for f, hit in zip(self.faults, self.entries[:, j]) if hit)

    def rows(self) -> dict[str, frozenset[str]]:
        return {f: self.row(f) for f in self.faults}

    def format(self) -> str:
        width = max(len(f) for f in self.faults)
        lines = [" " * width + "  " + "  ".join(self.constraints)]
        for f, r in zip(self.faults, self.entries):
            cells = "  ".join(("1" if hit else "0").center(len(c)) for c, hit in zip(self.constraints, r))
            lines.append(f"{f:<{width}}  {cells}")
        return "\n".join(lines)


@dataclass(frozen=True)
class FdiDiagnosis:
    candidates: tuple[frozenset[str], ...]
    verdict: str


def build_signature_matrix(graph: InfluenceGraph, faults: Iterable[str] = FAULT_IDS) -> SignatureMatrix:
    """Theoretical signatures from structural occurrence.

    Each measured variable carries one local relation (itself against its
    causal parents); a fault on a variable or input is expected to show in
    every relation that mentions it.
    """
    faults = tuple(faults)
    measured = [v for v in graph.measured]
    constraints = tuple(f"r_{v}" for v in measured)
    entries = np.zeros((len(faults), len(constraints)), dtype=bool)
    for j, v in enumerate(measured):
        members = {v, *graph.parents(v)}
        for i, f in enumerate(faults):
            entries[i, j] = f in members
    return SignatureMatrix(faults, constraints, entries)


def _observed(alarms: AlarmState | Iterable[str]) -> frozenset[str]:
    if isinstance(alarms, AlarmState):
        return alarms.violated
    return frozenset(alarms)


def fdi_diagnose(alarms: AlarmState | Iterable[str], matrix: SignatureMatrix) -> FdiDiagnosis:
    observed = _observed(alarms)
    unknown = observed - set(matrix.constraints)
    if unknown:
        raise ValueError(f"unknown constraints {sorted(unknown)}")
    if not observed:
        return FdiDiagnosis((frozenset(),), EXACT)
    rows = matrix.rows()
    singles = [f for f in matrix.faults if rows[f] == observed]
    if len(singles) == 1:
        return FdiDiagnosis((frozenset(singles),), EXACT)
    if singles:
        return FdiDiagnosis(tuple(sorted((frozenset({f}) for f in singles), key=sorted)), AMBIGUOUS)
    pairs = [frozenset(p) for p in combinations(matrix.faults, 2) if rows[p[0]] | rows[p[1]] == observed]
    if pairs:
        return FdiDiagnosis(tuple(sorted(pairs, key=sorted)), AMBIGUOUS)
    return FdiDiagnosis((), NO_MATCH)

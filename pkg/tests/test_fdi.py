from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tankdiag.bondgraph import three_tank
from tankdiag.detection import CONSTRAINTS
from tankdiag.fdi import (AMBIGUOUS, EXACT, NO_MATCH, SignatureMatrix, build_signature_matrix,
                          fdi_diagnose)
from tankdiag.plant import FAULT_IDS

# written down from the five constraint formulas
HAND_ROWS = {
    "Msf1": {"r_De1"},
    "Msf2": {"r_De3"},
    "De1": {"r_De1", "r_Df1"},
    "De2": {"r_De2", "r_Df1", "r_Df2"},
    "De3": {"r_De3", "r_Df2"},
    "Df1": {"r_De1", "r_De2", "r_Df1"},
    "Df2": {"r_De2", "r_De3", "r_Df2"},
}


@pytest.fixture(scope="module")
def matrix():
    return build_signature_matrix(three_tank()[2])


def brute_pairs(observed):
    return sorted((frozenset(p) for p in combinations(HAND_ROWS, 2)
                   if HAND_ROWS[p[0]] | HAND_ROWS[p[1]] == set(observed)), key=sorted)


def test_rows_match_constraint_formulas(matrix):
    assert matrix.constraints == CONSTRAINTS
    assert {f: set(r) for f, r in matrix.rows().items()} == HAND_ROWS


def test_rows_pairwise_distinct(matrix):
    rows = list(matrix.rows().values())
    assert len(set(rows)) == len(rows) == 7


def test_column(matrix):
    assert matrix.column("r_De2") == {"De2", "Df1", "Df2"}


def test_format_lists_every_fault(matrix):
    text = matrix.format()
    assert all(f in text for f in FAULT_IDS)
    assert len(text.splitlines()) == 8


@pytest.mark.parametrize("fault", FAULT_IDS)
def test_every_single_row_isolates(matrix, fault):
    d = fdi_diagnose(HAND_ROWS[fault], matrix)
    assert d.verdict == EXACT and d.candidates == (frozenset({fault}),)


def test_empty_observation(matrix):
    d = fdi_diagnose([], matrix)
    assert d.verdict == EXACT and d.candidates == (frozenset(),)


def test_pair_union(matrix):
    observed = HAND_ROWS["Msf1"] | HAND_ROWS["Df2"]
    d = fdi_diagnose(observed, matrix)
    assert d.verdict == AMBIGUOUS
    assert frozenset({"Msf1", "Df2"}) in d.candidates
    assert list(d.candidates) == brute_pairs(observed)


def test_no_match(matrix):
    assert brute_pairs({"r_Df1", "r_Df2"}) == []
    d = fdi_diagnose({"r_Df1", "r_Df2"}, matrix)
    assert d.verdict == NO_MATCH and d.candidates == ()


def test_unknown_constraint(matrix):
    with pytest.raises(ValueError):
        fdi_diagnose({"r_X"}, matrix)


@settings(max_examples=60, deadline=None)
@given(st.sets(st.sampled_from(CONSTRAINTS)), st.permutations(FAULT_IDS))
def test_result_independent_of_row_order(observed, order):
    base = build_signature_matrix(three_tank()[2])
    perm = [base.faults.index(f) for f in order]
    shuffled = SignatureMatrix(tuple(order), base.constraints, base.entries[perm])
    a, b = fdi_diagnose(observed, base), fdi_diagnose(observed, shuffled)
    assert a.verdict == b.verdict and set(a.candidates) == set(b.candidates)
    assert all(len(c) <= 2 for c in a.candidates)
    if a.verdict == AMBIGUOUS and all(len(c) == 2 for c in a.candidates):
        assert list(a.candidates) == brute_pairs(observed)


def test_entries_boolean(matrix):
    assert matrix.entries.dtype == np.bool_ and matrix.entries.shape == (7, 5)

from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from support import bench
from tankdiag.detection import CONSTRAINT_MEMBERS, CONSTRAINTS
from tankdiag.dx import (FaultTemplate, compute_conflicts, dx_diagnose, fit_fault_set,
                         hitting_supersets, minimal_hitting_sets, refine_with_fault_models,
                         template_rank)
from tankdiag.plant import FAULT_IDS, SENSORS


def brute_force_mhs(conflicts, universe, max_size=7):
    conflicts = [set(c) for c in conflicts]
    hitting = [frozenset(s) for k in range(len(universe) + 1) for s in combinations(sorted(universe), k)
               if all(set(s) & c for c in conflicts)]
    minimal = [h for h in hitting if not any(o < h for o in hitting)]
    return sorted((m for m in minimal if len(m) <= max_size), key=lambda s: (len(s), sorted(s)))


@pytest.fixture(scope="module")
def templates():
    return bench().templates


class TestConflicts:
    def test_membership(self):
        assert compute_conflicts({"r_De1"}) == [frozenset({"Msf1", "De1", "Df1"})]
        assert compute_conflicts([]) == []
        assert compute_conflicts({"r_De2", "r_De3", "r_Df2"}) == [
            CONSTRAINT_MEMBERS["r_De2"], CONSTRAINT_MEMBERS["r_De3"], CONSTRAINT_MEMBERS["r_Df2"]]

    def test_transpose_of_signature_matrix(self):
        m = bench().signature
        for c in CONSTRAINTS:
            (conflict,) = compute_conflicts({c})
            assert conflict == m.column(c)

    def test_unknown(self):
        with pytest.raises(ValueError):
            compute_conflicts({"r_nope"})


class TestHittingSets:
    def test_small(self):
        assert minimal_hitting_sets([{"a", "b"}, {"b", "c"}]) == [{"b"}, {"a", "c"}]

    def test_empty_family(self):
        assert minimal_hitting_sets([]) == [frozenset()]

    def test_single_Df2_fault(self):
        conflicts = compute_conflicts({"r_De2", "r_De3", "r_Df2"})
        got = minimal_hitting_sets(conflicts)
        assert got[0] == {"Df2"}
        assert got == brute_force_mhs(conflicts, FAULT_IDS)
        assert got == [{"Df2"}, {"De2", "De3"}, {"De2", "Msf2"}, {"De3", "Df1"}]

    def test_max_size(self):
        conflicts = [{"a"}, {"b"}, {"c"}]
        assert minimal_hitting_sets(conflicts, max_size=2) == []
        with pytest.raises(ValueError):
            minimal_hitting_sets(conflicts, max_size=0)

    @settings(max_examples=150, deadline=None)
    @given(st.lists(st.sets(st.sampled_from(FAULT_IDS), min_size=1, max_size=5), max_size=6),
           st.integers(1, 7))
    def test_matches_brute_force(self, conflicts, max_size):
        got = minimal_hitting_sets(conflicts, max_size)
        assert got == brute_force_mhs(conflicts, FAULT_IDS, max_size)
        for a in got:
            assert not any(b < a for b in got)

    def test_supersets(self):
        sets = hitting_supersets([frozenset({"a"})], ["a", "b", "c"])
        assert sets == [{"a"}, {"a", "b"}, {"a", "c"}, {"a", "b", "c"}]


class TestRefinement:
    def observed(self, templates, faults, scale=1.0):
        return sum(scale * templates[f].deviation for f in faults)

    def test_templates_shape_and_rank(self, templates):
        assert set(templates) == set(FAULT_IDS)
        assert all(t.deviation.shape == (5,) for t in templates.values())
        # 7 templates in a 5-dimensional space cannot be independent
        assert template_rank(templates) == 5

    def test_unit_templates_match_steady_gains(self, templates):
        # 49 s after onset the slowest mode (-0.268) has decayed to ~2e-6
        np.testing.assert_allclose(templates["Msf1"].deviation, [2, 1, 1, 1, 0], atol=1e-5)
        np.testing.assert_allclose(templates["Msf2"].deviation, [1, 1, 2, 0, 1], atol=1e-5)
        for i, s in enumerate(SENSORS):
            np.testing.assert_allclose(templates[s].deviation, np.eye(5)[i], atol=1e-12)

    def test_exact_single_template(self, templates):
        d = refine_with_fault_models([{"De2"}, {"Df1"}], templates["De2"].deviation, templates)
        assert d.diagnoses == ({"De2"},)

    def test_zero_observation(self, templates):
        d = refine_with_fault_models([set(), {"De2"}], np.zeros(5), templates)
        assert d.diagnoses == (frozenset(),)

    def test_three_fault_example(self, templates):
        obs = self.observed(templates, ["De1", "De3", "Df2"])
        rel, _ = fit_fault_set({"Df1", "Df2"}, obs, templates)
        assert rel > 1e-3
        rel, mags = fit_fault_set({"De1", "De3", "Df2"}, obs, templates)
        assert rel < 1e-9 and all(m == pytest.approx(1.0) for m in mags.values())
        d = refine_with_fault_models([{"Df1", "Df2"}, {"De1", "De3", "Df2"}], obs, templates)
        assert d.diagnoses == ({"De1", "De3", "Df2"},)

    def test_degenerate_candidate_noted(self):
        t = {"a": FaultTemplate("a", np.array([1.0, 0, 0, 0, 0])),
             "b": FaultTemplate("b", np.array([2.0, 0, 0, 0, 0]))}
        d = refine_with_fault_models([{"a", "b"}], np.array([1.0, 0, 0, 0, 0]), t)
        assert d.diagnoses == () and any("degenerate" in n for n in d.notes)

    def test_bad_tol(self, templates):
        with pytest.raises(ValueError):
            refine_with_fault_models([{"De1"}], np.ones(5), templates, tol=0)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_injected_set_always_fits(self, templates, k):
        b = bench()
        for faults in list(combinations(FAULT_IDS, k))[:8]:
            a = b.alarms(b.builtin_scenario(faults))
            obs = np.array([a.global_values[v] for v in SENSORS])
            fit = fit_fault_set(faults, obs, templates)
            if fit is not None:
                assert fit[0] < 1e-6


class TestDiagnose:
    @pytest.mark.parametrize("fault", FAULT_IDS)
    def test_single_faults(self, templates, fault):
        b = bench()
        d = dx_diagnose(b.alarms(b.builtin_scenario([fault])), templates)
        assert d.diagnoses == ({fault},)

    def test_every_diagnosis_hits_every_conflict(self, templates):
        b = bench()
        a = b.alarms(b.builtin_scenario(["Msf1", "Df2"]))
        d = dx_diagnose(a, templates)
        for diag in d.diagnoses:
            assert all(diag & c for c in compute_conflicts(a))
        assert len({len(x) for x in d.diagnoses}) == 1

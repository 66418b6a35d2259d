import numpy as np
import pytest

from ensembleq import _sampling, _walk_py
from ensembleq.ensemble import (
    EnsembleStats,
    compare_modes,
    exact_distributions,
    outcome_tree,
    post_select,
    run_trials,
    sample_outcomes,
)
from ensembleq.measurement import Mode, condition_on_outcome, pointer_distribution
from ensembleq.scenarios import BASIS_NAMES, SCENARIO_IDS, get_scenario, sg_prepare

MASK = 2 ** 64 - 1
GAMMA = 0x9E3779B97F4A7C15

try:
    from ensembleq._walk import walk_trees as compiled_walk
except ImportError:
    compiled_walk = None


def splitmix_oracle(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def uniform_oracle(seed: int, trial: int, depth: int) -> float:
    stream = splitmix_oracle(seed ^ ((trial * GAMMA) & MASK))
    return (splitmix_oracle((stream + (depth + 1) * GAMMA) & MASK) >> 11) * 2.0 ** -53


class TestStreams:
    @pytest.mark.parametrize("seed", [0, 1, 7, 2 ** 63 + 5, MASK])
    def test_matches_integer_oracle(self, seed):
        streams = _walk_py.stream_ids(seed, 0, 20)
        for depth in range(3):
            u = _walk_py.uniforms(streams, depth)
            expected = [uniform_oracle(seed, i, depth) for i in range(20)]
            np.testing.assert_array_equal(u, expected)

    def test_offset_start(self):
        np.testing.assert_array_equal(_walk_py.stream_ids(3, 10, 5), _walk_py.stream_ids(3, 0, 15)[10:])

    def test_uniform_range(self):
        u = _walk_py.uniforms(_walk_py.stream_ids(1, 0, 100_000), 0)
        assert u.min() >= 0 and u.max() < 1
        assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / len(u))


class TestOutcomeTree:
    def test_sg_basic(self):
        tree = outcome_tree(get_scenario("sg-basic"), Mode.UNITARY)
        assert tree.readouts == ("spin",)
        assert tree.joint() == pytest.approx({(0,): 0.5, (1,): 0.5})

    def test_intermediate_unitary_vs_collapse(self):
        s = get_scenario("sg-recombine", intermediate_readout=True)
        unitary = outcome_tree(s, Mode.UNITARY).marginals()
        collapse = outcome_tree(s, Mode.COLLAPSE).marginals()
        assert unitary["spin_x"]["plus"] == pytest.approx(1.0, abs=1e-12)
        assert collapse["spin_x"]["plus"] == pytest.approx(0.5, abs=1e-12)
        assert unitary["path"] == pytest.approx(collapse["path"])

    def test_wigner_friend_correlated_readouts(self):
        joint = outcome_tree(get_scenario("wigner-friend"), Mode.UNITARY).joint()
        # friend F_up (1) goes with spin up (0), F_down (2) with spin down (1)
        assert joint == pytest.approx({(1, 0): 0.5, (2, 1): 0.5})


class TestRunTrials:
    def test_sg_basic_born(self):
        _, stats = run_trials("sg-basic", "unitary", 100_000, 0)
        assert abs(stats.frequencies["spin"]["up"] - 0.5) < 3 * np.sqrt(0.25 / 1e5)

    def test_cat(self):
        _, stats = run_trials("cat", "unitary", 10_000, 1)
        assert abs(stats.frequencies["db"]["cl"] - 0.5) < 3 * stats.stderr["db"]["cl"]

    @pytest.mark.parametrize("mode", list(Mode))
    def test_same_seed_same_records(self, mode):
        a, _ = run_trials("wigner-friend", mode, 500, 42)
        b, _ = run_trials("wigner-friend", mode, 500, 42)
        assert a == b
        c, _ = run_trials("wigner-friend", mode, 500, 43)
        assert a != c

    def test_record_fields(self):
        records, _ = run_trials("sg-basic", "collapse", 3, 9)
        assert [r.trial for r in records] == [0, 1, 2]
        assert all(r.mode == "collapse" for r in records)
        assert records[1].stream == int(_walk_py.stream_ids(9, 1, 1)[0])
        assert set(records[0].outcomes) == {"spin"}

    @pytest.mark.parametrize("n", [0, -5, 2.5])
    def test_bad_n(self, n):
        with pytest.raises(ValueError):
            run_trials("sg-basic", "unitary", n, 0)

    def test_unknown_scenario_and_mode(self):
        with pytest.raises(KeyError):
            run_trials("nope", "unitary", 10, 0)
        with pytest.raises(ValueError):
            run_trials("sg-basic", "sideways", 10, 0)

    def test_counts_sum(self):
        _, stats = run_trials("wigner-friend", "collapse", 1234, 5)
        for readout, counts in stats.counts.items():
            assert sum(counts.values()) == 1234
            assert sum(stats.frequencies[readout].values()) == pytest.approx(1.0)


class TestConvergence:
    CASES = [(sid, False) for sid in SCENARIO_IDS] + [("sg-recombine", True)]

    @pytest.mark.parametrize("sid,intermediate", CASES)
    @pytest.mark.parametrize("mode", list(Mode))
    def test_four_sigma(self, sid, intermediate, mode):
        n = 100_000
        batch = sample_outcomes(sid, mode, n, 2718, intermediate_readout=intermediate)
        exact = batch.tree.marginals()
        freqs = batch.stats().frequencies
        for readout, dist in exact.items():
            for outcome, p in dist.items():
                bound = 4 * np.sqrt(p * (1 - p) / n)
                assert abs(freqs[readout][outcome] - p) <= bound, (readout, outcome)


class TestModeAgreement:
    @pytest.mark.parametrize("sid", SCENARIO_IDS)
    def test_exact_distributions_agree(self, sid):
        u = exact_distributions(sid, "unitary")
        c = exact_distributions(sid, "collapse")
        for readout in u:
            for outcome in u[readout]:
                assert u[readout][outcome] == pytest.approx(c[readout][outcome], abs=1e-10)


class TestParallel:
    @pytest.mark.parametrize("workers", [2, 3, 8])
    def test_bit_identical(self, workers):
        serial = sample_outcomes("wigner-friend", "collapse", 20_001, 77)
        parallel = sample_outcomes("wigner-friend", "collapse", 20_001, 77, workers=workers)
        np.testing.assert_array_equal(serial.outcomes, parallel.outcomes)
        assert serial.stats() == parallel.stats()

    @pytest.mark.skipif(compiled_walk is None, reason="compiled kernel not built")
    @pytest.mark.parametrize("sid", SCENARIO_IDS)
    def test_backends_bit_identical(self, sid):
        py = sample_outcomes(sid, "unitary", 10_000, 3, kernel=_walk_py.walk_trees)
        cy = sample_outcomes(sid, "unitary", 10_000, 3, kernel=compiled_walk)
        np.testing.assert_array_equal(py.outcomes, cy.outcomes)

    def test_backend_name(self):
        assert _sampling.BACKEND in ("cython", "numpy")


class TestPostSelect:
    def test_up_subensemble(self):
        records, stats = run_trials("sg-basic", "unitary", 10_000, 4)
        sub = post_select(records, {"spin": "up"}, parent=stats)
        assert sub.frequencies["spin"]["up"] == 1.0
        assert sub.n_trials == stats.counts["spin"]["up"]
        assert sub.parent_id == stats.id
        assert sub.lineage == ("spin=up",)

    def test_match_all_equals_parent(self):
        records, stats = run_trials("cat", "unitary", 2000, 4)
        sub = post_select(records, {}, parent=stats)
        assert sub.counts == stats.counts
        assert sub.frequencies == stats.frequencies

    def test_match_none_is_flagged_empty(self):
        records, stats = run_trials("sg-basic", "unitary", 100, 4)
        sub = post_select(records, {"spin": "sideways"}, parent=stats)
        assert sub.empty and sub.n_trials == 0
        assert sub.frequencies["spin"]["up"] is None
        assert sub.to_dict()["empty"] is True

    def test_unknown_label(self):
        records, stats = run_trials("sg-basic", "unitary", 10, 4)
        with pytest.raises(KeyError):
            post_select(records, {"colour": "red"}, parent=stats)

    def test_without_parent(self):
        records, _ = run_trials("sg-basic", "unitary", 100, 4)
        sub = post_select(records, {"spin": "down"})
        assert sub.frequencies["spin"]["down"] == 1.0

    def test_nested_lineage(self):
        records, stats = run_trials("wigner-friend", "unitary", 1000, 8)
        first = post_select(records, {"friend": "F_up"}, parent=stats)
        second = post_select(records, {"friend": "F_up", "spin": "up"}, parent=first)
        assert second.lineage == ("friend=F_up", "friend=F_up,spin=up")
        assert second.n_trials == first.n_trials

    def test_matches_conditioned_state(self):
        records, stats = run_trials("wigner-friend", "unitary", 100_000, 12)
        scenario = get_scenario("wigner-friend")
        state = scenario.steps[1].fn(scenario.steps[0].fn(scenario.initial_state()))
        for friend_value, name in ((1, "F_up"), (2, "F_down")):
            sub = post_select(records, {"friend": name}, parent=stats)
            expected = pointer_distribution(condition_on_outcome(state, "friend", friend_value), "spin")
            for spin_value, spin_name in enumerate(BASIS_NAMES["spin"]):
                p = expected[spin_value]
                bound = 4 * np.sqrt(max(p * (1 - p), 0.0) / sub.n_trials)
                assert abs(sub.frequencies["spin"][spin_name] - p) <= bound


class TestCompareModes:
    def test_sg_basic_no_divergence(self):
        report = compare_modes("sg-basic", 10_000, 1)
        assert not report.divergent
        assert report.max_difference < 1e-10

    def test_intermediate_readout_diverges(self):
        report = compare_modes("sg-recombine", 10_000, 1, intermediate_readout=True)
        assert report.divergent
        assert report.exact["unitary"]["spin_x"]["plus"] == pytest.approx(1.0, abs=1e-12)
        assert report.exact["collapse"]["spin_x"]["plus"] == pytest.approx(0.5, abs=1e-12)
        doc = report.to_dict()
        assert doc["divergence"] is True
        assert set(doc["modes"]) == {"unitary", "collapse"}

    def test_n_zero_rejected(self):
        with pytest.raises(ValueError):
            compare_modes("sg-basic", 0, 1)


def test_stats_id_and_dict():
    stats = EnsembleStats("cat", "unitary", 5, 2, {"db": {"cl": 1, "cd": 1}})
    assert stats.id == "cat/unitary/seed=5"
    d = stats.to_dict()
    assert d["frequencies"]["db"]["cl"] == 0.5
    assert d["stderr"]["db"]["cl"] == pytest.approx(np.sqrt(0.25 / 2))


def test_prepare_untouched_by_sampling():
    before = sg_prepare().amplitudes.copy()
    run_trials("sg-basic", "unitary", 100, 0)
    np.testing.assert_array_equal(sg_prepare().amplitudes, before)


def test_pure_python_fallback_forced():
    import os
    import subprocess
    import sys

    env = dict(os.environ, ENSEMBLEQ_PURE_PYTHON="1")
    code = "import ensembleq._sampling as s; print(s.BACKEND, s.walk_trees is s.walk_trees_py)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]

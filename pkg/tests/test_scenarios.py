import numpy as np
import pytest

from ensembleq.hilbert import (
    DensityOperator,
    Ket,
    SpaceLayout,
    basis_ket,
    density_from_ket,
    fidelity_with_ket,
    ket_fidelity,
    partial_trace,
    purity,
    random_ket,
    reduced_density,
    schmidt_entanglement,
    superpose,
)
from ensembleq.measurement import Mode, collapse_branches, pointer_distribution
from ensembleq.scenarios import (
    ENVIRONMENT,
    SCENARIO_IDS,
    SG_LAYOUT,
    SPIN_X_BASIS,
    Readout,
    cat_scenario,
    friend_reduced_state,
    get_scenario,
    run_scenario,
    sg_branch,
    sg_prepare,
    sg_recombine,
    sg_split,
    sg_state,
    sg_with_record,
    wigner_friend_measure,
)

SPIN = SpaceLayout([("spin", 2)])
PLUS = Ket(SPIN, SPIN_X_BASIS[:, 0])
UP, DOWN, PSI, PSI_UP, PSI_DOWN = 0, 1, 0, 1, 2


def friend_branch_state() -> Ket:
    """Friend branch state written out term by term."""
    return superpose([(1, sg_branch(UP, PSI_UP, light=0, friend=1)),
                      (1, sg_branch(DOWN, PSI_DOWN, light=1, friend=2))])


def spin_only_random(seed: int) -> Ket:
    """Random spin on the SG registers, path at psi, environment at index 0."""
    return sg_state(random_ket(SPIN, np.random.default_rng(seed)))


def permutation_matrix(fn) -> np.ndarray:
    """Matrix of a step applied column by column on every basis state it accepts."""
    n = SG_LAYOUT.total_dim
    cols = np.zeros((n, n), dtype=complex)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1
        cols[:, i] = fn(Ket(SG_LAYOUT, e)).amplitudes
    return cols


class TestPrepare:
    def test_spin_distribution(self):
        assert pointer_distribution(sg_prepare(), "spin") == pytest.approx({0: 0.5, 1: 0.5})

    def test_norm(self):
        assert np.linalg.norm(sg_prepare().amplitudes) == pytest.approx(1.0)

    def test_product_with_path(self):
        assert schmidt_entanglement(sg_prepare(), {"spin"}) == 1

    def test_layout(self):
        assert SG_LAYOUT.labels == ("spin", "path", "light", "friend", "record", "wigner")
        assert SG_LAYOUT.dims == (2, 3, 2, 3, 3, 2)


class TestSplitRecombine:
    def test_split_output(self):
        expected = superpose([(1, sg_branch(UP, PSI_UP)), (1, sg_branch(DOWN, PSI_DOWN))])
        np.testing.assert_allclose(sg_split(sg_prepare()).amplitudes, expected.amplitudes, atol=1e-15)

    def test_split_eigenstate(self):
        np.testing.assert_array_equal(sg_split(sg_branch(UP, PSI)).amplitudes, sg_branch(UP, PSI_UP).amplitudes)

    def test_split_entangles(self):
        assert schmidt_entanglement(sg_split(sg_prepare()), {"spin"}) == 2

    def test_split_keeps_spin_marginal(self):
        for seed in range(4):
            k = spin_only_random(seed)
            np.testing.assert_allclose(pointer_distribution(sg_split(k), "spin")[0],
                                       pointer_distribution(k, "spin")[0], atol=1e-12)

    def test_split_precondition(self):
        with pytest.raises(ValueError, match="psi"):
            sg_split(sg_branch(UP, PSI_UP))

    def test_recombination_fidelity(self):
        assert ket_fidelity(sg_recombine(sg_split(sg_prepare())), sg_prepare()) == pytest.approx(1.0, abs=1e-10)

    def test_recombine_after_split_is_identity_matrix(self):
        recombine = permutation_matrix(sg_recombine)
        np.testing.assert_allclose(recombine.T @ recombine, np.eye(SG_LAYOUT.total_dim), atol=1e-15)
        # split is the same shift in the other direction, so its matrix is recombine^T
        split = recombine.T
        for i in range(SG_LAYOUT.total_dim):
            if SG_LAYOUT.decode(i)[1] == PSI:
                e = np.zeros(SG_LAYOUT.total_dim)
                e[i] = 1
                np.testing.assert_array_equal(split @ e, sg_split(Ket(SG_LAYOUT, e)).amplitudes)
        np.testing.assert_allclose(recombine @ split, np.eye(SG_LAYOUT.total_dim), atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_steps_preserve_norm(self, seed):
        k = spin_only_random(seed)
        for step in (sg_split, sg_with_record, wigner_friend_measure, sg_recombine):
            k = step(k)
            assert np.linalg.norm(k.amplitudes) == pytest.approx(1.0, abs=1e-12)


class TestRecord:
    def test_record_entangles_each_branch(self):
        expected = superpose([(1, sg_branch(UP, PSI_UP, record=1)), (1, sg_branch(DOWN, PSI_DOWN, record=2))])
        np.testing.assert_allclose(sg_with_record(sg_split(sg_prepare())).amplitudes,
                                   expected.amplitudes, atol=1e-15)

    def test_branch_copy(self):
        out = sg_with_record(sg_branch(UP, PSI_UP))
        np.testing.assert_array_equal(out.amplitudes, sg_branch(UP, PSI_UP, record=1).amplitudes)

    def test_spin_purity_half(self):
        assert purity(reduced_density(sg_with_record(sg_split(sg_prepare())), ["spin"])) == pytest.approx(0.5)

    def test_recombined_spin_is_maximally_mixed(self):
        state = sg_recombine(sg_with_record(sg_split(sg_prepare())))
        spin = reduced_density(state, ["spin"])
        np.testing.assert_allclose(spin.matrix, np.eye(2) / 2, atol=1e-10)
        assert fidelity_with_ket(spin, PLUS) == pytest.approx(0.5, abs=1e-10)

    def test_precondition(self):
        with pytest.raises(ValueError):
            sg_with_record(sg_branch(UP, PSI_UP, record=1))


class TestWignerFriend:
    def test_friend_branch_state(self):
        np.testing.assert_allclose(wigner_friend_measure(sg_split(sg_prepare())).amplitudes,
                                   friend_branch_state().amplitudes, atol=1e-15)

    def test_asymmetry(self):
        state = wigner_friend_measure(sg_split(sg_prepare()))
        assert schmidt_entanglement(state, {"wigner"}) == 1
        assert schmidt_entanglement(state, {"friend"}) == 2
        assert pointer_distribution(state, "wigner")[0] == pytest.approx(1.0, abs=1e-12)

    def test_friend_reduced_state(self):
        rho = friend_reduced_state(friend_branch_state())
        sub = rho.layout
        expected = 0.5 * (density_from_ket(basis_ket(sub, {"spin": UP, "path": PSI_UP})).matrix
                          + density_from_ket(basis_ket(sub, {"spin": DOWN, "path": PSI_DOWN})).matrix)
        np.testing.assert_allclose(rho.matrix, expected, atol=1e-12, rtol=0)
        i, j = sub.encode((UP, PSI_UP)), sub.encode((DOWN, PSI_DOWN))
        assert abs(rho.matrix[i, j]) < 1e-12

    def test_reduced_matches_full_partial_trace(self):
        state = friend_branch_state()
        np.testing.assert_allclose(friend_reduced_state(state).matrix,
                                   partial_trace(density_from_ket(state), {"spin", "path"}).matrix, atol=1e-12)

    def test_pre_measurement_pure(self):
        assert purity(friend_reduced_state(sg_split(sg_prepare()))) == pytest.approx(1.0)

    def test_recombined_spin_mixed(self):
        state = sg_recombine(wigner_friend_measure(sg_split(sg_prepare())))
        np.testing.assert_allclose(reduced_density(state, ["spin"]).matrix, np.eye(2) / 2, atol=1e-10)

    def test_collapse_alternative_differs(self):
        state = sg_split(sg_prepare())
        model = get_scenario("wigner-friend").readouts[1].model(Mode.COLLAPSE)
        # Wigner's and the friend's description is the one vector above; the collapse
        # account replaces it by one of two branches, neither of which is that vector.
        padded = state.kron(basis_ket(SpaceLayout([(model.pointer_label, 3)]), {model.pointer_label: 0}))
        unitary = wigner_friend_measure(sg_split(sg_prepare()))
        for _, p, post in collapse_branches(padded, model):
            post_eq8 = reduced_density(post, SG_LAYOUT.labels)
            assert p == pytest.approx(0.5)
            assert fidelity_with_ket(post_eq8, unitary) < 1 - 1e-3
        mixed = DensityOperator(SG_LAYOUT, 0.5 * density_from_ket(sg_branch(UP, PSI_UP, light=0, friend=1)).matrix
                                + 0.5 * density_from_ket(sg_branch(DOWN, PSI_DOWN, light=1, friend=2)).matrix)
        assert fidelity_with_ket(mixed, unitary) == pytest.approx(0.5)

    def test_precondition(self):
        with pytest.raises(ValueError):
            wigner_friend_measure(sg_branch(UP, PSI_UP, friend=1))


class TestCat:
    def test_report(self):
        report = cat_scenario()
        assert report.distributions["db"] == pytest.approx({"unset": 0.0, "cl": 0.5, "cd": 0.5})
        assert report.purities["cat"] == pytest.approx(0.5)
        np.testing.assert_allclose(report.conditioned["cl"].matrix, [[1, 0], [0, 0]], atol=1e-12)
        np.testing.assert_allclose(report.conditioned["cd"].matrix, [[0, 0], [0, 1]], atol=1e-12)
        assert report.fidelities == pytest.approx({"cl_branch": 1.0, "cd_branch": 1.0})
        assert report.schmidt_ranks["cat"] == 2

    def test_summary_is_json_ready(self):
        import json
        json.dumps(cat_scenario().summary())


class TestRegistry:
    def test_ids_in_order(self):
        assert SCENARIO_IDS == ("sg-basic", "sg-recombine", "sg-record", "wigner-friend", "cat")

    def test_unknown(self):
        with pytest.raises(KeyError, match="sg-basic"):
            get_scenario("nope")

    def test_intermediate_only_for_recombine(self):
        with pytest.raises(ValueError):
            get_scenario("cat", intermediate_readout=True)
        s = get_scenario("sg-recombine", intermediate_readout=True)
        assert [r.name for r in s.readouts] == ["path", "spin_x"]
        assert s.stages() == [1, 2]

    @pytest.mark.parametrize("sid", SCENARIO_IDS)
    def test_initial_state_meters_at_zero(self, sid):
        s = get_scenario(sid)
        state = s.initial_state()
        assert state.layout == s.layout
        for r in s.readouts:
            assert isinstance(r, Readout)
            assert pointer_distribution(state, r.meter)[0] == pytest.approx(1.0, abs=1e-12)


class TestRunScenario:
    def test_recombine_unitary(self):
        report = run_scenario("sg-recombine", Mode.UNITARY)
        assert report.distributions["spin_x"] == pytest.approx({"plus": 1.0, "minus": 0.0})
        assert report.fidelities["spin_plus"] == pytest.approx(1.0)
        assert report.purities["spin"] == pytest.approx(1.0)

    def test_record_loses_coherence(self):
        report = run_scenario("sg-record")
        assert report.distributions["spin_x"] == pytest.approx({"plus": 0.5, "minus": 0.5})
        assert report.purities["spin"] == pytest.approx(0.5)

    def test_wigner_friend_ranks(self):
        report = run_scenario("wigner-friend")
        assert report.schmidt_ranks["wigner"] == 1
        assert report.schmidt_ranks["friend"] == 2

    def test_collapse_reproducible(self):
        runs = [run_scenario(get_scenario("sg-recombine", intermediate_readout=True), "collapse", seed=3)
                for _ in range(2)]
        assert runs[0].outcomes == runs[1].outcomes
        assert runs[0].distributions["spin_x"] == pytest.approx({"plus": 0.5, "minus": 0.5})

    def test_environment_labels(self):
        assert set(ENVIRONMENT) | {"spin", "path"} == set(SG_LAYOUT.labels)

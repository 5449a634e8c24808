import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emlab.channels import completely_depolarizing, depolarizing, unitary_channel, werner_holevo
from emlab.errors import ValidationError
from emlab.measures import (
    MeasureResult,
    apply_local_unitaries,
    attach_ancilla,
    e_f,
    e_m,
    eigen_ensemble,
    entanglement,
    s_min,
)
from emlab.optimizer import OptimizerConfig
from emlab.sampling import haar_state, haar_unitary, random_density
from emlab.tensor_core import BipartiteCut, DensityMatrix, FactoredSpace, PureState, Subspace
from emlab.twoqubit import binary_entropy, concurrence, ef_of_concurrence, takagi, wootters_ensemble

import oracles

QUBITS = FactoredSpace.of(("A", 2), ("B", 2))
CUT = BipartiteCut(("A",), ("B",))
FAST = OptimizerConfig(restarts=6, max_iters=300)
BELL = PureState.normalized(QUBITS, [1, 0, 0, 1])


def test_entanglement_examples():
    assert entanglement(BELL, CUT).value == pytest.approx(1.0, abs=1e-14)
    assert entanglement(PureState.basis(QUBITS, 1, 0), CUT).value == 0.0
    psi = PureState(QUBITS, [0.5, 0, 0, np.sqrt(0.75)])
    assert entanglement(psi, CUT).value == pytest.approx(0.811278, abs=1e-6)


def test_e_m_examples():
    psi = haar_state(QUBITS, np.random.default_rng(0))
    assert e_m(psi.projector(), CUT, FAST).value == pytest.approx(entanglement(psi, CUT).value, abs=1e-12)
    assert e_m(DensityMatrix.maximally_mixed(QUBITS), CUT, FAST).value <= 1e-6
    anti = Subspace(FactoredSpace.of(("A", 3), ("B", 3)), oracles.antisymmetric_basis(3))
    res = e_m(DensityMatrix.from_subspace(anti), CUT, FAST)
    assert res.value == pytest.approx(1.0, abs=1e-4)
    assert res.diagnostics["support_dim"] == 3


def test_e_f_examples():
    assert e_f(BELL.projector(), CUT, FAST, route="direct").value == pytest.approx(1.0, abs=1e-12)
    assert e_f(DensityMatrix.maximally_mixed(QUBITS), CUT, FAST, route="direct").value <= 1e-6


def test_s_min_examples():
    u = haar_unitary(3, np.random.default_rng(1))
    assert s_min(unitary_channel(u), FAST).value <= 1e-9
    assert s_min(completely_depolarizing(2), FAST).value == pytest.approx(1.0, abs=1e-12)
    grid = oracles.qubit_depolarizing_smin_grid(0.5)
    for route in ("direct", "via_duality"):
        res = s_min(depolarizing(2, 0.5), FAST, route)
        assert res.value == pytest.approx(grid, abs=1e-6)
        assert res.route == route


def test_werner_holevo_s_min_is_one_bit():
    assert s_min(werner_holevo(3), FAST).value == pytest.approx(1.0, abs=1e-4)


def test_unknown_route_rejected():
    with pytest.raises(ValidationError):
        s_min(depolarizing(2, 0.5), FAST, "closed_form")
    with pytest.raises(ValidationError):
        e_f(random_density(FactoredSpace.of(("A", 2), ("B", 3)), np.random.default_rng(0)), CUT,
            route="closed_form")


def test_measure_result_rejects_negative_value():
    with pytest.raises(ValidationError):
        MeasureResult("E", -0.1, None)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rank=st.integers(1, 4))
def test_concurrence_and_closed_form_against_oracle(seed, rank):
    rho = random_density(QUBITS, np.random.default_rng(seed), rank=rank)
    assert concurrence(rho) == pytest.approx(oracles.concurrence(rho.matrix), abs=1e-7)
    res = e_f(rho, CUT, route="closed_form")
    assert res.value == pytest.approx(oracles.ef_two_qubit(rho.matrix), abs=1e-7)
    assert abs(res.diagnostics["formula_minus_witness"]) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rank=st.integers(1, 4))
def test_wootters_ensemble_reconstructs_state(seed, rank):
    rho = random_density(QUBITS, np.random.default_rng(seed), rank=rank)
    ens = wootters_ensemble(rho)
    assert np.max(np.abs(ens.density() - rho.matrix)) <= 1e-9


def test_wootters_on_werner_states():
    for f in (0.2, 0.5, 0.9):
        rho = DensityMatrix(QUBITS, f * BELL.projector().matrix + (1 - f) * np.eye(4) / 4)
        c_expected = max(0.0, (3 * f - 1) / 2)
        assert concurrence(rho) == pytest.approx(c_expected, abs=1e-12)
        assert e_f(rho, CUT).value == pytest.approx(ef_of_concurrence(c_expected), abs=1e-9)


def test_takagi_factorization():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    a = a + a.T
    q, s = takagi(a)
    assert np.allclose(q @ np.diag(s) @ q.T, a, atol=1e-10)
    assert np.allclose(q.conj().T @ q, np.eye(4), atol=1e-10)


def test_binary_entropy_edges():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(1.0)
    assert ef_of_concurrence(1.0) == pytest.approx(1.0)
    assert ef_of_concurrence(0.0) == 0.0


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_hierarchy_e_m_below_e_f(seed):
    rho = random_density(QUBITS, np.random.default_rng(seed), rank=2)
    assert e_m(rho, CUT, FAST).value <= e_f(rho, CUT).value + 1e-9


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_e_m_invariant_under_local_unitaries(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(QUBITS, rng, rank=2)
    rotated = apply_local_unitaries(rho, {"A": haar_unitary(2, rng), "B": haar_unitary(2, rng)})
    assert e_m(rotated, CUT, FAST).value == pytest.approx(e_m(rho, CUT, FAST).value, abs=1e-6)


def test_ancilla_does_not_change_entanglement():
    rho = BELL.projector()
    bigger = attach_ancilla(rho, "A2", 2)
    cut = BipartiteCut(("A", "A2"), ("B",))
    assert e_m(bigger, cut, FAST).value == pytest.approx(1.0, abs=1e-9)
    assert e_f(bigger, cut, FAST).value == pytest.approx(1.0, abs=1e-9)


def test_eigen_ensemble_reconstructs():
    rho = random_density(QUBITS, np.random.default_rng(4), rank=3)
    ens = eigen_ensemble(rho)
    assert len(ens.members) == 3
    assert np.allclose(ens.density(), rho.matrix, atol=1e-12)


def test_direct_e_f_matches_closed_form_on_one_state():
    rho = random_density(QUBITS, np.random.default_rng(12))
    direct = e_f(rho, CUT, FAST, route="direct")
    assert direct.value == pytest.approx(e_f(rho, CUT).value, abs=1e-3)
    assert direct.diagnostics["certificate_error"] <= 1e-9

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emlab.channels import (
    ChannelFamilySpec,
    KrausChannel,
    StinespringIsometry,
    apply,
    channel_from_isometry,
    channel_from_subspace,
    completely_depolarizing,
    depolarizing,
    dilation_roundtrip_error,
    dual_subspace,
    identity_channel,
    make_family,
    random_isometry_channel,
    stinespring,
    tensor_channels,
    werner_holevo,
)
from emlab.errors import ValidationError
from emlab.sampling import haar_isometry, haar_state, random_density
from emlab.tensor_core import (
    BipartiteCut,
    FactoredSpace,
    PureState,
    entanglement_entropy,
    von_neumann_entropy,
)

import oracles

QUBIT = FactoredSpace.of(("A", 2))


def _rand_rho(d, seed):
    return random_density(FactoredSpace.of(("A", d)), np.random.default_rng(seed))


def test_identity_channel_leaves_input():
    rho = _rand_rho(3, 0)
    assert np.allclose(apply(identity_channel(3), rho).matrix, rho.matrix)


def test_completely_depolarizing_outputs_maximally_mixed():
    for seed in range(5):
        out = apply(completely_depolarizing(3), _rand_rho(3, seed))
        assert np.allclose(out.matrix, np.eye(3) / 3, atol=1e-14)


def test_depolarizing_on_zero_state_by_hand():
    # Kraus sum for p = 0.5: w0^2 = 1 - 3/8, Pauli weights 1/8 each
    rho0 = np.diag([1.0, 0.0])
    x = np.array([[0, 1], [1, 0]])
    y = np.array([[0, -1j], [1j, 0]])
    z = np.diag([1, -1])
    by_hand = 0.625 * rho0 + 0.125 * (x @ rho0 @ x + y @ rho0 @ y.conj().T + z @ rho0 @ z)
    out = depolarizing(2, 0.5)(rho0)
    assert np.allclose(by_hand, np.diag([0.75, 0.25]))
    assert np.allclose(out, by_hand, atol=1e-15)


def test_depolarizing_limits():
    rho = _rand_rho(2, 4)
    assert np.allclose(apply(depolarizing(2, 0.0), rho).matrix, rho.matrix)
    assert np.allclose(apply(depolarizing(2, 1.0), rho).matrix, np.eye(2) / 2)
    assert depolarizing(2, 0.0).n_kraus == 1


@pytest.mark.parametrize("d,p", [(3, 0.3), (4, 0.9)])
def test_depolarizing_weyl_formula(d, p):
    rho = _rand_rho(d, 5)
    out = apply(depolarizing(d, p), rho).matrix
    assert np.allclose(out, (1 - p) * rho.matrix + p * np.eye(d) / d, atol=1e-13)


def test_werner_holevo_formula():
    rho = _rand_rho(3, 6)
    out = apply(werner_holevo(3), rho).matrix
    assert np.allclose(out, (np.eye(3) - rho.matrix.T) / 2, atol=1e-14)


def test_non_trace_preserving_rejected():
    with pytest.raises(ValidationError) as e:
        KrausChannel(2, 2, (np.diag([1.0, 0.5]),))
    assert e.value.invariant == "completeness"
    assert "7.500e-01" in str(e.value)


def test_identity_dilation_has_trivial_environment():
    v = stinespring(identity_channel(2))
    assert v.env_dim == 1
    psi = haar_state(QUBIT, np.random.default_rng(0))
    assert np.allclose(v.isometry @ psi.vector, psi.vector)
    s = dual_subspace(v)
    assert s.k == 2


def test_dephasing_dilation_roundtrip():
    ch = KrausChannel(2, 2, (np.eye(2) / np.sqrt(2), np.diag([1, -1]) / np.sqrt(2)))
    v = stinespring(ch)
    assert v.env_dim == 2
    rng = np.random.default_rng(1)
    for _ in range(20):
        m = random_density(QUBIT, rng).matrix
        assert np.max(np.abs(ch(m) - v.apply(m))) <= 1e-10


def test_depolarizing_dilation_roundtrip():
    ch = depolarizing(2, 0.5)
    v = stinespring(ch)
    assert v.env_dim == 4
    assert dilation_roundtrip_error(ch, v) <= 1e-10


def test_isometry_with_env_second_gives_identity():
    space = FactoredSpace.of(("out", 2), ("env", 1))
    ch = channel_from_isometry(StinespringIsometry(space, np.eye(2), "env"))
    rho = _rand_rho(2, 2)
    assert np.allclose(apply(ch, rho).matrix, rho.matrix)


def test_random_isometry_channel_complete():
    rng = np.random.default_rng(3)
    space = FactoredSpace.of(("env", 2), ("out", 3))
    ch = channel_from_isometry(StinespringIsometry(space, haar_isometry(6, 3, rng), "env"))
    assert ch.completeness_residual() <= 1e-10


def test_werner_holevo_dual_subspace_is_antisymmetric():
    v = stinespring(werner_holevo(3))
    # env index (i, j) with i < j is sent to eps_{ijl} |l>
    pairs = [(0, 1), (0, 2), (1, 2)]
    w = np.zeros((3, 3))
    for k, (i, j) in enumerate(pairs):
        l = 3 - i - j
        w[l, k] = np.linalg.det(np.eye(3)[[i, j, l]])
    rotated = np.kron(w, np.eye(3)) @ v.isometry
    anti = oracles.antisymmetric_basis(3)
    assert np.allclose(rotated @ rotated.conj().T, anti @ anti.T, atol=1e-8)


def test_product_subspace_channel_has_constant_output():
    space = FactoredSpace.of(("env", 2), ("out", 2))
    s = dual_subspace(StinespringIsometry(space, np.array([[1], [0], [0], [0]]), "env"))
    ch = channel_from_subspace(s, "env")
    assert von_neumann_entropy(apply(ch, PureState.basis(FactoredSpace.of(("A", 1)), 0).projector())) == 0.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d_in=st.integers(1, 3), d_env=st.integers(1, 3),
       d_out=st.integers(1, 3))
def test_output_entropy_equals_dilated_entanglement(seed, d_in, d_env, d_out):
    if d_env * d_out < d_in:
        return
    ch = random_isometry_channel(d_in, d_env, d_out, seed)
    v = stinespring(ch)
    phi = haar_state(FactoredSpace.of(("in", d_in)), np.random.default_rng(seed + 1))
    s_out = oracles.entropy_bits(ch(np.outer(phi.vector, phi.vector.conj())))
    e = entanglement_entropy(PureState.normalized(v.space, v.isometry @ phi.vector),
                             BipartiteCut((v.env_label,), (v.out_label,)))
    assert abs(s_out - e) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_channel_preserves_trace_and_positivity(seed):
    ch = random_isometry_channel(3, 2, 2, seed)
    out = ch(_rand_rho(3, seed).matrix)
    assert np.isclose(np.trace(out).real, 1.0)
    assert np.linalg.eigvalsh(out).min() >= -1e-12


def test_tensor_channels_of_identities():
    ch = tensor_channels(identity_channel(2), identity_channel(3))
    rho = _rand_rho(6, 7)
    assert np.allclose(ch(rho.matrix), rho.matrix)


def test_make_family_and_unknown_family():
    ch = make_family(ChannelFamilySpec("random_isometry", {"in": 2, "env": 2, "out": 2}, 5))
    again = make_family(ChannelFamilySpec("random_isometry", {"in": 2, "env": 2, "out": 2}, 5))
    assert all(np.array_equal(a, b) for a, b in zip(ch.kraus_ops, again.kraus_ops))
    with pytest.raises(ValidationError):
        ChannelFamilySpec("amplitude_damping")
    with pytest.raises(ValidationError):
        make_family(ChannelFamilySpec("depolarizing", {"d": 2}))

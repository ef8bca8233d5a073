import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from preserva import linalg as la
from preserva.errors import (
    BadWeights,
    DimensionMismatch,
    NotCompletelyPositive,
    NotDensityMatrix,
    NotTracePreserving,
)
from preserva.quantum import (
    DensityMatrix,
    QuantumChannel,
    apply,
    apply_to_first,
    channel_from_json,
    channel_to_json,
    compose,
    constant_channel,
    convex_mix,
    haar_random_state,
    identity,
    random_channel,
    random_density,
    swap_channel,
    tensor_channels,
    unitary_channel,
)

import oracles

X = np.array([[0, 1], [1, 0]], dtype=complex)


def test_density_matrix_validation():
    DensityMatrix(np.eye(2) / 2)
    with pytest.raises(NotDensityMatrix):
        DensityMatrix(np.eye(2))
    with pytest.raises(NotDensityMatrix):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(DimensionMismatch):
        DensityMatrix(np.eye(4) / 4, dims=(3, 2))


def test_kraus_examples():
    ident = QuantumChannel.from_kraus([np.eye(2)])
    assert np.allclose(ident.choi, la.projector(la.max_entangled(2)))
    k0 = np.array([[1, 0], [0, 0]])
    k1 = np.array([[0, 1], [0, 0]])
    reset = QuantumChannel.from_kraus([k0, k1])
    for i in range(2):
        assert np.allclose(reset(la.projector(la.ket(i, 2))), np.diag([1, 0]))
    flip = QuantumChannel.from_kraus([np.sqrt(0.5) * np.eye(2), np.sqrt(0.5) * X])
    assert np.allclose(np.sort(la.eigvalsh(flip.choi)), [0, 0, 0.5, 0.5], atol=1e-12)


def test_invalid_kraus_sets():
    with pytest.raises(NotTracePreserving):
        QuantumChannel.from_kraus([np.eye(2) * 0.9])
    # partial transpose of the identity Choi: trace preserving, not CP
    swap_choi = la.partial_transpose(la.projector(la.max_entangled(2)), (2, 2), 1)
    with pytest.raises(NotCompletelyPositive):
        QuantumChannel.from_choi(swap_choi, (2,), (2,))


@pytest.mark.parametrize("seed", range(5))
def test_apply_matches_choi_contraction(seed):
    ch = random_channel(2, 3, 2, seed=seed)
    rho = random_density(2, seed=100 + seed).op
    assert np.allclose(ch(rho), oracles.choi_apply(ch.choi, rho, 2, 3), atol=1e-10)
    kraus_out = sum(k @ rho @ k.conj().T for k in ch.kraus)
    assert np.allclose(ch(rho), kraus_out, atol=1e-10)


def test_adjoint_duality():
    ch = random_channel(3, 2, 3, seed=3)
    rho = random_density(3, seed=4).op
    obs = random_density(2, seed=5).op
    assert abs(np.trace(obs @ ch(rho)) - np.trace(ch.adjoint(obs) @ rho)) < 1e-12


def test_identity_and_constant():
    rho = random_density(3, seed=1).op
    sigma = random_density(2, seed=2).op
    assert np.allclose(identity(3)(rho), rho)
    assert np.allclose(constant_channel(sigma, 3)(rho), sigma)
    out = apply(identity(3), rho)
    assert isinstance(out, DensityMatrix)


def test_tensor_and_compose():
    assert np.allclose(tensor_channels(identity(2), identity(2)).choi, identity(4).choi)
    gamma = np.diag([0.7, 0.3])
    phi = constant_channel(gamma, 2)
    n = random_channel(2, 2, 2, seed=7)
    assert np.allclose(compose(phi, n).choi, phi.choi)
    n1, n2 = random_channel(2, 2, 2, seed=8), random_channel(3, 2, 2, seed=9)
    r1, r2 = random_density(2, seed=10).op, random_density(3, seed=11).op
    joint = tensor_channels(n1, n2)(la.kron(r1, r2))
    assert np.allclose(joint, la.kron(n1(r1), n2(r2)), atol=1e-10)
    # leftmost channel acts last
    u = unitary_channel(X)
    assert np.allclose(compose(phi, u)(np.diag([1, 0])), gamma)
    assert np.allclose(compose(u, phi)(np.diag([1, 0])), X @ gamma @ X)


def test_apply_to_first():
    n = random_channel(2, 2, 2, seed=12)
    r1, r2 = random_density(2, seed=13).op, random_density(3, seed=14).op
    assert np.allclose(apply_to_first(n, la.kron(r1, r2), 3), la.kron(n(r1), r2), atol=1e-12)


def test_convex_mix():
    n = random_channel(2, 2, 2, seed=15)
    assert np.allclose(convex_mix([n], [1.0]).choi, n.choi)
    dep = convex_mix([identity(2), constant_channel(np.eye(2) / 2, 2)], [0.5, 0.5])
    assert np.allclose(dep.choi, 0.5 * la.projector(la.max_entangled(2)) + np.eye(4) / 8)
    m = random_channel(2, 2, 3, seed=16)
    assert np.allclose(convex_mix([n, m], [0.3, 0.7]).choi, 0.3 * n.choi + 0.7 * m.choi, atol=1e-12)
    with pytest.raises(BadWeights):
        convex_mix([n, m], [0.5, 0.6])
    with pytest.raises(BadWeights):
        convex_mix([n, m], [-0.1, 1.1])


def test_swap_and_determinism():
    r, s = random_density(2, seed=1).op, random_density(2, seed=2).op
    assert np.allclose(swap_channel(2)(la.kron(r, s)), la.kron(s, r))
    assert np.array_equal(haar_random_state(2, seed=7).op, haar_random_state(2, seed=7).op)


def test_random_channel_sweep():
    for seed in range(1000):
        random_channel(2, 2, 1 + seed % 4, seed=seed).validate()


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.integers(0, 2 ** 31))
def test_random_channels_are_cptp(d_in, d_out, rank, seed):
    assume(d_out * rank >= d_in)
    ch = random_channel(d_in, d_out, rank, seed=seed)
    assert la.lambda_min(ch.choi) >= -1e-10
    assert abs(np.trace(ch.choi).real - 1) < 1e-10
    again = QuantumChannel.from_kraus(ch.kraus)
    assert np.allclose(again.choi, ch.choi, atol=1e-10)


def test_channel_json_round_trip():
    ch = random_channel(2, 3, 2, seed=21)
    back = channel_from_json(channel_to_json(ch))
    assert np.allclose(back.choi, ch.choi, atol=1e-14)

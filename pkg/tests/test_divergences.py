import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from preserva import linalg as la
from preserva.divergences import (
    d_max,
    d_max_continuity_gap,
    d_max_ratio,
    fully_entangled_fraction,
    singlet_fraction,
    smooth_d_max_bounds,
    trace_distance,
)
from preserva.eplt import isotropic
from preserva.errors import BadEpsilon, NotBipartiteSquare, SigmaSingular
from preserva.quantum import haar_random_vector, haar_unitary, random_channel, random_density

import oracles

ZERO = np.diag([1.0, 0.0])
ONE = np.diag([0.0, 1.0])


def test_d_max_cases():
    rho = random_density(3, seed=1).op
    assert abs(d_max(rho, rho)) < 1e-9
    assert abs(d_max(ZERO, np.eye(2) / 2) - 1.0) < 1e-12
    assert d_max(ZERO, ONE) == math.inf


@pytest.mark.parametrize("seed", range(20))
def test_d_max_matches_bisection(seed):
    rho = random_density(2, seed=seed).op
    sigma = random_density(2, seed=1000 + seed).op
    lam = oracles.min_lambda_bisection(rho, sigma)
    assert abs(d_max_ratio(rho, sigma) - lam) <= 1e-7 * max(1.0, lam)


@given(st.integers(0, 2 ** 31), st.integers(2, 3))
def test_d_max_data_processing(seed, d):
    rho = random_density(d, seed=seed).op
    sigma = random_density(d, seed=seed + 1).op
    ch = random_channel(d, d, 2, seed=seed + 2)
    assert d_max(ch(rho), ch(sigma)) <= d_max(rho, sigma) + 1e-8


@given(st.integers(0, 2 ** 31))
def test_d_max_tensor_invariance(seed):
    rho = random_density(2, seed=seed).op
    sigma = random_density(2, seed=seed + 1).op
    tau = random_density(3, seed=seed + 2).op
    assert abs(d_max(la.kron(rho, tau), la.kron(sigma, tau)) - d_max(rho, sigma)) <= 1e-8


def test_trace_distance_cases():
    rho = random_density(2, seed=3).op
    assert trace_distance(rho, rho) < 1e-15
    assert abs(trace_distance(ZERO, ONE) - 1) < 1e-15
    assert abs(trace_distance(ZERO, np.eye(2) / 2) - 0.5) < 1e-15


def test_singlet_fraction_cases():
    assert abs(singlet_fraction(la.projector(la.max_entangled(2))) - 1) < 1e-12
    for d in (2, 3):
        assert abs(singlet_fraction(np.eye(d * d) / d ** 2) - 1 / d ** 2) < 1e-12
    assert abs(singlet_fraction(isotropic(0.5, 2)) - 0.625) < 1e-12
    with pytest.raises(NotBipartiteSquare):
        singlet_fraction(np.eye(6) / 6)


@pytest.mark.parametrize("p", [0.0, 0.3, 0.7])
@pytest.mark.parametrize("d", [2, 3])
def test_fef_of_isotropic_equals_singlet_fraction(p, d):
    rho = isotropic(p, d).op
    fef = fully_entangled_fraction(rho)
    sf = p + (1 - p) / d ** 2
    assert fef <= sf + 1e-7
    assert fef >= sf - 1e-9
    # Haar-sampled maximally entangled states never beat it
    psi = la.max_entangled(d)
    for k in range(200):
        u = haar_unitary(d, seed=k)
        v = la.kron(u, np.eye(d)) @ psi
        assert np.real(np.vdot(v, rho @ v)) <= fef + 1e-9


def test_fef_local_unitary_invariance():
    rho = random_density(4, seed=5).op
    u = la.kron(haar_unitary(2, seed=6), np.eye(2))
    assert abs(fully_entangled_fraction(rho) - fully_entangled_fraction(u @ rho @ u.conj().T)) <= 1e-7


def test_continuity_examples():
    rho = random_density(2, seed=7).op
    assert d_max_continuity_gap(rho, rho, np.eye(2) / 2) == (0.0, 0.0)
    lhs, bound = d_max_continuity_gap(ZERO, np.eye(2) / 2, np.eye(2) / 2)
    assert abs(lhs - 1) < 1e-12 and abs(bound - 2) < 1e-12
    with pytest.raises(SigmaSingular):
        d_max_continuity_gap(ZERO, ONE, ZERO)


def test_continuity_sweep():
    r = np.random.default_rng(0)
    for _ in range(500):
        d = int(r.integers(2, 4))
        rho, rho2, sigma = (random_density(d, seed=r).op for _ in range(3))
        lhs, bound = d_max_continuity_gap(rho, rho2, sigma)
        assert lhs <= bound + 1e-9


def test_smooth_bounds_examples():
    rho = random_density(2, seed=8).op
    sb = smooth_d_max_bounds(rho, np.eye(2) / 2, 0.0)
    assert sb.lower == sb.upper == pytest.approx(d_max(rho, np.eye(2) / 2))
    sb = smooth_d_max_bounds(ZERO, np.eye(2) / 2, 0.1)
    assert sb.upper == pytest.approx(1.0)
    assert sb.lower == pytest.approx(math.log2(1.6))
    with pytest.raises(BadEpsilon):
        smooth_d_max_bounds(ZERO, np.eye(2) / 2, 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_smooth_bounds_bracket_family_minimum(seed):
    """Minimum over mixtures toward random states inside the trace ball lies in the bracket."""
    rng = np.random.default_rng(seed)
    d, eps = 2, 0.05
    rho = la.projector(haar_random_vector(d, rng))
    sigma = random_density(d, seed=rng).op
    sb = smooth_d_max_bounds(rho, sigma, eps)
    best = d_max(rho, sigma)
    for _ in range(300):
        tau = random_density(d, seed=rng).op
        dist = trace_distance(rho, tau)
        t = min(1.0, eps / dist) if dist > 0 else 1.0
        best = min(best, d_max((1 - t) * rho + t * tau, sigma))
    assert sb.lower - 1e-12 <= best <= sb.upper + 1e-12

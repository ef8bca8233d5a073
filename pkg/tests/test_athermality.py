import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from preserva import athermality as ath
from preserva import linalg as la
from preserva.errors import BadEpsilon, BadParameter, CapExceeded, DimensionTooLarge, NotGibbsPreserving
from preserva.quantum import compose, constant_channel, convex_mix, identity, measure_prepare, random_channel

import oracles

HALF = ath.ThermalSpec.from_populations([0.5, 0.5])
QUARTER = ath.ThermalSpec.from_populations([0.75, 0.25])


def test_thermal_state_cases():
    spec = ath.thermal_state((0.0, 1.0, 2.5), 0.0)
    assert np.allclose(spec.gamma.op, np.eye(3) / 3)
    e, beta = 1.3, 0.7
    spec = ath.thermal_state((0.0, e), beta)
    z = 1 + math.exp(-beta * e)
    assert np.allclose(spec.gamma.op, np.diag([1 / z, math.exp(-beta * e) / z]), atol=1e-15)
    cold = ath.thermal_state((0.0, 1.0, 2.0), 60.0)
    assert np.max(np.abs(cold.gamma.op - np.diag([1.0, 0, 0]))) <= 1e-9
    with pytest.raises(BadParameter):
        ath.thermal_state((1.0, 0.0), 1.0)


def test_from_populations_round_trip():
    spec = ath.ThermalSpec.from_populations([0.6, 0.3, 0.1], beta=2.0)
    assert np.allclose(spec.populations, [0.6, 0.3, 0.1])


def test_gibbs_preserving_checks():
    assert ath.is_gibbs_preserving(ath.thermalizing_channel(QUARTER), QUARTER)
    assert ath.is_gibbs_preserving(identity(2), QUARTER)
    assert ath.is_gibbs_preserving(ath.gibbs_channel("energy_dephasing", QUARTER), QUARTER)
    hits = sum(ath.is_gibbs_preserving(random_channel(2, 2, 2, seed=s), QUARTER) for s in range(50))
    assert hits == 0


def test_gibbs_channel_family():
    assert np.allclose(ath.gibbs_channel("partial_thermalization", QUARTER, 1.0).choi, identity(2).choi)
    assert np.allclose(ath.gibbs_channel("partial_thermalization", QUARTER, 0.0).choi,
                       ath.thermalizing_channel(QUARTER).choi)
    half = ath.gibbs_channel("partial_thermalization", HALF, 0.5)
    assert np.allclose(half.choi, 0.5 * la.projector(la.max_entangled(2)) + 0.5 * np.eye(4) / 4)
    assert ath.is_gibbs_preserving(ath.gibbs_channel("hamiltonian_evolution", QUARTER, 0.3), QUARTER)
    with pytest.raises(BadParameter):
        ath.gibbs_channel("partial_thermalization", QUARTER, 1.5)
    with pytest.raises(BadParameter):
        ath.gibbs_channel("teleport", QUARTER)


@pytest.mark.parametrize("family", ["dilation", "measure_prepare", "thermal_mix", "dephase_rotate"])
def test_random_gibbs_preserving_families(family):
    spec = ath.ThermalSpec.from_populations([0.5, 0.3, 0.2])
    for seed in range(10):
        ch = ath.random_gibbs_preserving(spec, spec, seed, family)
        assert ath.is_gibbs_preserving(ch, spec)
    a = ath.random_gibbs_preserving(spec, spec, 3, family)
    b = ath.random_gibbs_preserving(spec, spec, 3, family)
    assert np.array_equal(a.choi, b.choi)


def test_p_dmax_closed_forms():
    assert ath.p_dmax(ath.thermalizing_channel(HALF), HALF) == pytest.approx(0.0, abs=1e-9)
    assert ath.p_dmax(identity(2), HALF) == pytest.approx(1.0, abs=1e-7)
    rep = ath.p_dmax_report(ath.gibbs_channel("partial_thermalization", HALF, 0.5), HALF)
    assert rep.value == pytest.approx(math.log2(1.5), abs=1e-7)
    assert rep.certified
    with pytest.raises(NotGibbsPreserving):
        ath.p_dmax(random_channel(2, 2, 2, seed=1), QUARTER)


def test_p_dmax_qubit_see_saw_beats_grid():
    for seed in range(10):
        ch = ath.random_gibbs_preserving(QUARTER, QUARTER, seed)
        rep = ath.p_dmax_report(ch, QUARTER)
        assert rep.certified
        assert rep.value >= rep.grid_value - 1e-9


def test_p_bar_closed_forms():
    assert ath.p_bar_dmax(ath.thermalizing_channel(HALF), HALF) == pytest.approx(0.0, abs=1e-9)
    assert ath.p_bar_dmax(identity(2), HALF) == pytest.approx(2.0, abs=1e-9)
    for lam in np.linspace(0, 1, 11):
        ch = ath.gibbs_channel("partial_thermalization", HALF, lam)
        assert ath.p_bar_dmax(ch, HALF) == pytest.approx(math.log2(1 + 3 * lam), abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_p_bar_matches_feasibility_bisection(seed):
    spec = ath.ThermalSpec.from_populations([0.5, 0.3, 0.2]) if seed % 2 else QUARTER
    ch = ath.random_gibbs_preserving(spec, spec, seed)
    lam = oracles.min_lambda_bisection(ch.choi, ath.thermal_choi(spec, spec.d))
    assert ath.p_bar_dmax(ch, spec) == pytest.approx(max(math.log2(lam), 0.0), abs=1e-7)


@given(st.integers(0, 2 ** 31))
def test_p_dmax_below_p_bar(seed):
    spec = QUARTER
    ch = ath.random_gibbs_preserving(spec, spec, seed)
    assert ath.p_dmax(ch, spec, restarts=4) <= ath.p_bar_dmax(ch, spec) + 1e-7


def test_smooth_p_bar_examples():
    ch = identity(2)
    sb = ath.smooth_p_bar_bounds(ch, HALF, 0.0)
    assert sb.lower == sb.upper == pytest.approx(2.0)
    sb = ath.smooth_p_bar_bounds(ch, HALF, 0.1)
    assert sb.upper == pytest.approx(2.0)
    assert sb.lower == pytest.approx(math.log2(3.2))
    with pytest.raises(BadEpsilon):
        ath.smooth_p_bar_bounds(ch, HALF, 1.0)


@pytest.mark.parametrize("seed", range(4))
def test_smooth_p_bar_brackets_perturbation_family(seed):
    rng = np.random.default_rng(seed)
    spec, delta = QUARTER, 0.05
    ch = ath.random_gibbs_preserving(spec, spec, rng)
    sb = ath.smooth_p_bar_bounds(ch, spec, delta)
    best = ath.p_bar_dmax(ch, spec)
    for _ in range(100):
        other = ath.random_gibbs_preserving(spec, spec, rng)
        dist = 0.5 * la.trace_norm(ch.choi - other.choi)
        t = min(1.0, delta / dist) if dist > 0 else 1.0
        best = min(best, ath.p_bar_dmax(convex_mix([ch, other], [1 - t, t]), spec))
    assert sb.lower - 1e-12 <= best <= sb.upper + 1e-12


@pytest.mark.parametrize("energies,m_max", [
    ((0.0, 1.0), 3),
    ((0.0, 1.0, math.sqrt(2)), 3),
    ((0.0, 1.0, 2.0), 2),
    ((0.0, 1.0, 3.0), 3),
    ((0.0, 0.5, 1.7, 2.2), 3),
    ((0.7,), 4),
])
def test_energy_subspace_condition_matches_enumeration(energies, m_max):
    assert ath.energy_subspace_condition(energies, m_max) == oracles.esc_enumeration(energies, m_max)


def test_energy_subspace_condition_cases():
    assert ath.energy_subspace_condition((0.0, 1.0, math.sqrt(2)), 3)
    assert not ath.energy_subspace_condition((0.0, 1.0, 2.0), 2)
    assert ath.energy_subspace_condition((0.0,), 6)
    with pytest.raises(CapExceeded):
        ath.energy_subspace_condition((0.0, 1.0), 7)


def test_bath_bounds():
    eps_grid = [0.01, 0.05, 0.2, 0.5]
    reps = [ath.bath_bounds(ath.thermalizing_channel(QUARTER), QUARTER, e, probes=10) for e in eps_grid]
    for e, rep in zip(eps_grid, reps):
        assert rep.upper_bound == pytest.approx(1 / e ** 2)
    assert all(a.upper_bound > b.upper_bound for a, b in zip(reps, reps[1:]))
    deph = ath.gibbs_channel("energy_dephasing", QUARTER)
    rep = ath.bath_bounds(deph, QUARTER, 0.01, probes=10)
    assert rep.coherence_annihilating and rep.gamma_full_rank
    assert rep.p_dmax == pytest.approx(math.log2(4.0), abs=1e-7)
    with pytest.raises(BadEpsilon):
        ath.bath_bounds(deph, QUARTER, 0.0)


def _trivial_code(spec, spec_a):
    d, da = spec.d, spec_a.d
    povm = [la.projector(la.ket(i, d)) for i in range(d)]
    enc = measure_prepare(povm, [la.kron(p, spec_a.gamma.op) for p in povm])
    dec = measure_prepare([la.kron(p, np.eye(da)) for p in povm], povm)
    return enc, dec


def test_comm_error_perfect_pipe():
    enc, dec = _trivial_code(HALF, HALF)
    rep = ath.comm_error(identity(2), enc, dec, HALF, HALF, 2)
    assert rep.avg_error == pytest.approx(0.0, abs=1e-12)
    assert rep.bound_holds


def test_comm_error_constant_channel_guesses():
    phi = ath.thermalizing_channel(QUARTER)
    rng = np.random.default_rng(0)
    for _ in range(20):
        enc, dec = ath.sample_codes(QUARTER, QUARTER, 2, rng)
        rep = ath.comm_error(phi, enc, dec, QUARTER, QUARTER, 2)
        # the pipe output ignores the message, so any decoder succeeds with probability 1/M
        assert rep.avg_error == pytest.approx(0.5, abs=1e-10)
        assert rep.bound_holds


def test_comm_audit_small():
    audit = ath.comm_audit(QUARTER, m=2, trials=20, seed=1)
    assert audit.violations == 0
    assert len(audit.rows) == 20


def test_convex_split_cases():
    thermal = ath.thermalizing_channel(HALF)
    rep = ath.convex_split_experiment(thermal, HALF, 2)
    assert rep.distance == pytest.approx(0.0, abs=1e-9)
    ch = ath.gibbs_channel("partial_thermalization", HALF, 1 / 3)
    rep = ath.convex_split_experiment(ch, HALF, 2)
    assert rep.p == pytest.approx(0.5)
    assert rep.delta_premise == pytest.approx(1.0)
    assert rep.premise_holds
    assert rep.distance <= 1.0 + 1e-6
    assert rep.choi_identity_error <= 1e-9
    with pytest.raises(DimensionTooLarge):
        ath.convex_split_experiment(ch, HALF, 4)


def test_permuted_mixture_equals_direct_at_three_copies():
    ch = ath.random_gibbs_preserving(HALF, HALF, 5)
    beta = ath.thermalizing_channel(HALF)
    direct = ath.convex_split_mixture(ch, beta, 3)
    perm = ath.permuted_mixture(ch, beta, 3)
    assert np.max(np.abs(direct.choi - perm.choi)) <= 1e-9


def test_classical_gamma():
    assert np.allclose(ath.classical_gamma(QUARTER, 2), QUARTER.gamma.op)
    assert np.allclose(ath.classical_gamma(QUARTER, 4), la.kron(QUARTER.gamma.op, QUARTER.gamma.op))
    assert np.allclose(ath.classical_gamma(QUARTER, 3), np.eye(3) / 3)


def test_composition_keeps_gibbs_preservation():
    a = ath.random_gibbs_preserving(QUARTER, QUARTER, 1)
    b = ath.random_gibbs_preserving(QUARTER, QUARTER, 2)
    assert ath.is_gibbs_preserving(compose(a, b), QUARTER)
    assert ath.is_gibbs_preserving(constant_channel(QUARTER.gamma.op, 2), QUARTER)

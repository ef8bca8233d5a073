import numpy as np
import pytest

from preserva import athermality as ath
from preserva import linalg as la
from preserva.errors import BadParameter, EmptyFamily
from preserva.monotones import (
    MonotoneFns,
    axiom_harness,
    dmax_athermality,
    eval_general_monotone,
    negativity_entanglement,
    sample_free_superchannel,
    superchannel_preserves_annihilation,
)
from preserva.quantum import haar_random_vector, identity

HALF = ath.ThermalSpec.from_populations([0.5, 0.5])


def _pure_family(d, n, seed):
    rng = np.random.default_rng(seed)
    fam = [la.projector(la.ket(i, d)) for i in range(d)]
    return fam + [la.projector(haar_random_vector(d, rng)) for _ in range(n)]


def test_general_monotone_examples():
    q = dmax_athermality(HALF)
    fam = _pure_family(2, 30, 0)
    phi = ath.thermalizing_channel(HALF)
    assert eval_general_monotone(phi, q, MonotoneFns(), fam).value == pytest.approx(0.0, abs=1e-12)
    const_g = MonotoneFns(g=lambda x: 1.0)
    assert eval_general_monotone(identity(2), q, const_g, fam).value == pytest.approx(1.0, abs=1e-12)
    assert eval_general_monotone(identity(2), q, MonotoneFns(), fam).value == pytest.approx(1.0)


def test_general_monotone_empty_family():
    with pytest.raises(EmptyFamily):
        eval_general_monotone(identity(2), dmax_athermality(HALF), MonotoneFns(), [np.eye(2) / 2])


def test_monotone_fns_validation():
    with pytest.raises(BadParameter):
        MonotoneFns(f=lambda x: x + 1)
    with pytest.raises(BadParameter):
        MonotoneFns(f=lambda x: -x)
    with pytest.raises(BadParameter):
        MonotoneFns(g=lambda x: -x)


def test_negativity_monotone_with_ancilla():
    q = negativity_entanglement()
    bell = la.projector(la.max_entangled(2))
    assert q(bell, (2, 2)) == pytest.approx(0.5)


def test_superchannel_determinism_and_gibbs():
    a = sample_free_superchannel("athermality", 2, seed=4)
    b = sample_free_superchannel("athermality", 2, seed=4)
    assert np.array_equal(a.pre.choi, b.pre.choi) and np.array_equal(a.post.choi, b.post.choi)
    for seed in range(20):
        sc = sample_free_superchannel("athermality", 2, seed=seed)
        g = sc.spec.gamma.op
        if sc.ancilla is None:
            assert ath.is_gibbs_preserving(sc.pre, g)
            assert ath.is_gibbs_preserving(sc.post, g)
        else:
            g_sa = la.kron(g, sc.spec_ancilla.gamma.op)
            assert ath.is_gibbs_preserving(sc.pre, g, g_sa)
            assert ath.is_gibbs_preserving(sc.post, g_sa, g)
        assert superchannel_preserves_annihilation(sc, probes=10, seed=seed)


def test_entanglement_superchannel_keeps_annihilating():
    for seed in range(5):
        sc = sample_free_superchannel("entanglement", 2, seed=seed)
        assert superchannel_preserves_annihilation(sc, probes=10, seed=seed)
        out = sc.apply(identity(4))
        assert out.d_in == 4 and out.d_out == 4


def test_athermality_harness_small():
    rep = axiom_harness("athermality", trials=20, seed=3)
    assert rep.total_violations == 0
    assert rep.free_point_max <= 1e-9
    assert rep.axioms["tensor_equality"].worst_margin >= -1e-7


def test_entanglement_harness_reports():
    rep = axiom_harness("entanglement", trials=2, seed=0)
    assert not rep.exact
    assert rep.failing_violations == 0
    assert rep.axioms["M1_free_point"].violations == 0


def test_unknown_theory():
    with pytest.raises(BadParameter):
        axiom_harness("coherence", trials=1)

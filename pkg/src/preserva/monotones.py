"""Generic preservability monotones, free super-channel sampling and axiom harnesses.

A free super-channel maps E to F_E = Λ₊ ∘ (E ⊗ Λ̃_A) ∘ Λ₋ with free Λ± and an
absolutely annihilating ancilla channel Λ̃_A.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import athermality as ath
from . import linalg as la
from .diamond import channel_distance
from .divergences import d_max
from .eplt import is_npt, negativity
from .errors import BadParameter, EmptyFamily
from .quantum import (
    QuantumChannel,
    as_operator,
    compose,
    constant_channel,
    convex_mix,
    haar_random_vector,
    haar_unitary,
    random_channel,
    tensor_channels,
    unitary_channel,
)

log = logging.getLogger(__name__)

THEORIES = ("athermality", "entanglement")
FREE_TOL = 1e-9


@dataclass(frozen=True)
class StateMonotoneSpec:
    """State monotone Q_R; ``evaluator(rho, dims)`` returns a nonnegative real."""

    name: str
    evaluator: Callable
    faithful: bool
    theory: str
    spec: ath.ThermalSpec | None = None

    def __call__(self, rho, dims) -> float:
        return float(self.evaluator(as_operator(rho), tuple(dims)))


def _thermal_power(spec: ath.ThermalSpec, dims) -> np.ndarray:
    # every factor of an athermality system carries the same local γ
    if any(d != spec.d for d in dims):
        raise BadParameter(f"factors {dims} do not match the thermal spec dimension {spec.d}")
    return la.kron(*([spec.gamma.op] * len(dims)))


def dmax_athermality(spec: ath.ThermalSpec) -> StateMonotoneSpec:
    """Q_R(ρ) = D_max(ρ‖γ^{⊗k}), clipped at zero."""

    def ev(rho, dims):
        return max(d_max(rho, _thermal_power(spec, dims)), 0.0)

    return StateMonotoneSpec("dmax_athermality", ev, True, "athermality", spec)


def negativity_entanglement() -> StateMonotoneSpec:
    """Q_R(ρ) = negativity across the first/second half of the factors."""

    def ev(rho, dims):
        half = len(dims) // 2
        da = int(np.prod(dims[:half])) if half else 1
        return max(negativity(rho, (da, rho.shape[0] // da)), 0.0)

    return StateMonotoneSpec("negativity", ev, False, "entanglement")


@dataclass(frozen=True)
class MonotoneFns:
    """f strictly increasing with f(0) = 0; g nondecreasing and positive away from zero.

    Both are checked on ``grid_points`` samples of [0, grid_max] at construction.
    """

    f: Callable = lambda x: x
    g: Callable = lambda x: x
    grid_max: float = 10.0
    grid_points: int = 1000

    def __post_init__(self):
        xs = np.linspace(0.0, self.grid_max, self.grid_points)
        fv = np.array([self.f(x) for x in xs], dtype=float)
        gv = np.array([self.g(x) for x in xs], dtype=float)
        if abs(fv[0]) > 1e-12:
            raise BadParameter("f(0) must be 0")
        if np.any(np.diff(fv) <= 0):
            raise BadParameter("f must be strictly increasing on the check grid")
        if np.any(np.diff(gv) < 0):
            raise BadParameter("g must be nondecreasing on the check grid")
        if np.any(gv[1:] <= 0):
            raise BadParameter("g must be positive away from zero")


@dataclass(frozen=True)
class MonotoneEstimate:
    value: float
    family_size: int
    evaluated: int


def eval_general_monotone(channel: QuantumChannel, q: StateMonotoneSpec, fns: MonotoneFns,
                          input_family: Sequence, ancilla_options: Sequence = (None,)) -> MonotoneEstimate:
    """max over inputs and ancilla channels of f(Q((E⊗Λ̃)(ρ))) / g(Q(ρ)).

    Inputs with Q(ρ) = 0 are skipped; the result is a lower bound on the supremum.

    :param input_family: states on the system, or on system ⊗ ancilla when an
        ancilla channel is given
    :param ancilla_options: ``None`` or annihilating channels acting on the ancilla
    """
    best = -math.inf
    used = 0
    for anc in ancilla_options:
        full = channel if anc is None else tensor_channels(channel, anc)
        dims_in = full.in_dims
        dims_out = full.out_dims
        for rho in input_family:
            r = as_operator(rho)
            if r.shape[0] != full.d_in:
                continue
            q_in = q(r, dims_in)
            if q_in <= 1e-12:
                continue
            used += 1
            val = fns.f(q(full(r), dims_out)) / fns.g(q_in)
            best = max(best, val)
    if used == 0:
        raise EmptyFamily("no input in the family carries resource")
    log.info("general monotone: %d resourceful inputs of %d", used, len(input_family))
    return MonotoneEstimate(float(best), len(input_family), used)


@dataclass
class SuperChannelSpec:
    """Λ₋ : S → S⊗A, ancilla Λ̃_A : A → A, Λ₊ : S⊗A → S (A may be absent)."""

    theory: str
    pre: QuantumChannel
    post: QuantumChannel
    ancilla: QuantumChannel | None
    spec: ath.ThermalSpec | None = None
    spec_ancilla: ath.ThermalSpec | None = None
    reorder: np.ndarray | None = field(default=None, repr=False)

    def apply(self, channel: QuantumChannel) -> QuantumChannel:
        middle = channel if self.ancilla is None else tensor_channels(channel, self.ancilla)
        return compose(self.post, middle, self.pre)


def _random_thermal(d: int, rng: np.random.Generator) -> ath.ThermalSpec:
    return ath.thermal_state(np.sort(rng.uniform(0.0, 2.0, d)), float(rng.uniform(0.2, 2.0)))


def _sample_athermality(d: int, rng: np.random.Generator, spec: ath.ThermalSpec | None) -> SuperChannelSpec:
    spec = spec or _random_thermal(d, rng)
    g = spec.gamma.op
    if rng.uniform() < 0.5:
        pre = ath.random_gibbs_preserving(g, g, rng)
        post = ath.random_gibbs_preserving(g, g, rng)
        return SuperChannelSpec("athermality", pre, post, None, spec)
    spec_a = _random_thermal(d, rng)
    g_sa = la.kron(g, spec_a.gamma.op)
    pre = ath.random_gibbs_preserving(g, g_sa, rng)
    pre = QuantumChannel(pre.choi, (d,), (d, d), validate=False)
    post = ath.random_gibbs_preserving(g_sa, g, rng)
    post = QuantumChannel(post.choi, (d, d), (d,), validate=False)
    return SuperChannelSpec("athermality", pre, post, ath.thermalizing_channel(spec_a), spec, spec_a)


def random_losr(d: int, rng: np.random.Generator, terms: int | None = None,
                d_out: int | None = None) -> QuantumChannel:
    """Shared-randomness mixture of product local channels on a d x d system."""
    d_out = d if d_out is None else d_out
    k = int(rng.integers(1, 3)) if terms is None else terms
    parts = []
    for _ in range(k):
        if d_out == d and rng.uniform() < 0.5:
            la_ch = unitary_channel(haar_unitary(d, rng))
            lb_ch = unitary_channel(haar_unitary(d, rng))
        else:
            rank_min = max(1, -(-d // d_out))
            la_ch = random_channel(d, d_out, int(rng.integers(rank_min, rank_min + 2)), seed=rng)
            lb_ch = random_channel(d, d_out, int(rng.integers(rank_min, rank_min + 2)), seed=rng)
        parts.append(tensor_channels(la_ch, lb_ch))
    w = rng.dirichlet(np.ones(k))
    mix = convex_mix(parts, w)
    return QuantumChannel(mix.choi, (d, d), (d_out, d_out), validate=False)


def _reorder_unitary(dims_from: Sequence[int], order: Sequence[int]) -> np.ndarray:
    n = int(np.prod(dims_from))
    return np.eye(n, dtype=complex).reshape(list(dims_from) + [n]).transpose(list(order) + [len(order)]).reshape(n, n)


def _sample_entanglement(d: int, rng: np.random.Generator) -> SuperChannelSpec:
    if rng.uniform() < 0.5:
        return SuperChannelSpec("entanglement", random_losr(d, rng), random_losr(d, rng), None)
    # local ancillas: A -> A A', B -> B B', then regroup (A A' B B') as (A B A' B')
    da = d
    pre_local = random_losr(d, rng, d_out=d * da)
    to_sys_anc = unitary_channel(_reorder_unitary((d, da, d, da), (0, 2, 1, 3)))
    pre = compose(to_sys_anc, QuantumChannel(pre_local.choi, (d, d), (d * da, d * da), validate=False))
    pre = QuantumChannel(pre.choi, (d, d), (d, d, da, da), validate=False)
    back = unitary_channel(_reorder_unitary((d, d, da, da), (0, 2, 1, 3)))
    post_local = random_losr(d * da, rng, d_out=d)
    post = compose(post_local, back)
    post = QuantumChannel(post.choi, (d, d, da, da), (d, d), validate=False)
    sa = la.projector(haar_random_vector(da, rng))
    sb = la.projector(haar_random_vector(da, rng))
    anc = constant_channel(la.kron(sa, sb), (da, da), (da, da))
    return SuperChannelSpec("entanglement", pre, post, anc)


def sample_free_superchannel(theory: str, dims: int, seed=None,
                             spec: ath.ThermalSpec | None = None) -> SuperChannelSpec:
    """Seeded free super-channel for a d-level (athermality) or d x d (entanglement) system."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if theory == "athermality":
        return _sample_athermality(int(dims), rng, spec)
    if theory == "entanglement":
        return _sample_entanglement(int(dims), rng)
    raise BadParameter(f"unknown theory {theory!r}; expected one of {THEORIES}")


def entanglement_candidates(d: int = 2) -> list:
    """Fixed entanglement-annihilating channels used by the distance evaluator."""
    dims = (d, d)
    dd = d * d
    deph = QuantumChannel.from_kraus([la.projector(la.ket(i, d)) for i in range(d)])
    states = [np.eye(dd) / dd, la.projector(la.ket(0, dd)),
              la.kron(la.projector(np.ones(d) / np.sqrt(d)), np.eye(d) / d)]
    cands = [constant_channel(s, dims, dims) for s in states]
    cands.append(tensor_channels(deph, deph))
    return cands


def entanglement_distance_upper(channel: QuantumChannel, candidates=None) -> float:
    """min over candidate annihilating channels of ‖E − Λ‖⋄; an upper bound on the infimum."""
    d = channel.in_dims[0]
    cands = candidates or entanglement_candidates(d)
    return min(channel_distance(channel, c, restarts=0).value for c in cands)


@dataclass
class AxiomTally:
    checked: int = 0
    violations: int = 0
    worst_margin: float = math.inf

    def record(self, margin: float, tol: float) -> None:
        self.checked += 1
        self.worst_margin = min(self.worst_margin, margin)
        if margin < -tol:
            self.violations += 1

    def as_dict(self) -> dict:
        return {"checked": self.checked, "violations": self.violations,
                "worst_margin": None if math.isinf(self.worst_margin) else self.worst_margin}


@dataclass
class HarnessReport:
    theory: str
    evaluator: str
    exact: bool
    trials: int
    seed: int
    axioms: dict
    free_point_max: float

    @property
    def total_violations(self) -> int:
        return sum(t.violations for t in self.axioms.values())

    @property
    def failing_violations(self) -> int:
        # violations of an upper-bound evaluator are reported but do not fail
        return self.total_violations if self.exact else 0


def _harness_athermality(trials: int, seed: int, tol: float, dims_choices=(2, 3)) -> HarnessReport:
    rng = np.random.default_rng(seed)
    names = ["M1_nonnegative", "M1_free_point", "M2_monotone", "M3_quasiconvex", "M3_robustness_convex",
             "M4_faithful", "tensor_inequality", "tensor_equality"]
    tallies = {n: AxiomTally() for n in names}
    free_max = 0.0
    for _ in range(trials):
        d = int(dims_choices[rng.integers(len(dims_choices))])
        spec = _random_thermal(d, rng)
        e1 = ath.random_gibbs_preserving(spec, spec, rng)
        e2 = ath.random_gibbs_preserving(spec, spec, rng)
        sc = sample_free_superchannel("athermality", d, rng, spec)
        p1 = ath.p_bar_dmax(e1, spec)
        p2 = ath.p_bar_dmax(e2, spec)
        tallies["M1_nonnegative"].record(p1, tol)
        free = ath.p_bar_dmax(ath.thermalizing_channel(spec), spec)
        free_max = max(free_max, abs(free))
        tallies["M1_free_point"].record(-abs(free), FREE_TOL)
        fe = sc.apply(e1)
        tallies["M2_monotone"].record(p1 - ath.p_bar_dmax(fe, spec, check=False), tol)
        w = float(rng.uniform())
        pm = ath.p_bar_dmax(convex_mix([e1, e2], [w, 1 - w]), spec)
        tallies["M3_quasiconvex"].record(max(p1, p2) - pm, tol)
        tallies["M3_robustness_convex"].record(w * (2 ** p1 - 1) + (1 - w) * (2 ** p2 - 1) - (2 ** pm - 1), tol)
        far = np.max(np.abs(e1.choi - ath.thermal_choi(spec, d))) > 1e-6
        if far:
            tallies["M4_faithful"].record(p1 - FREE_TOL, 0.0)
        spec2 = _random_thermal(int(rng.integers(2, 4)), rng)
        e_other = ath.random_gibbs_preserving(spec2, spec2, rng)
        g_joint = la.kron(spec.gamma.op, spec2.gamma.op)
        pt = ath.p_bar_dmax(tensor_channels(e1, e_other), g_joint, check=False)
        tallies["tensor_inequality"].record(pt - p1, tol)
        pe = ath.p_bar_dmax(tensor_channels(e1, ath.thermalizing_channel(spec2)), g_joint, check=False)
        tallies["tensor_equality"].record(-abs(pe - p1), tol)
    return HarnessReport("athermality", "p_bar_dmax", True, trials, seed, tallies, free_max)


def _harness_entanglement(trials: int, seed: int, tol: float) -> HarnessReport:
    rng = np.random.default_rng(seed)
    d = 2
    names = ["M1_nonnegative", "M1_free_point", "M2_monotone"]
    tallies = {n: AxiomTally() for n in names}
    cands = entanglement_candidates(d)
    free_max = 0.0
    for _ in range(trials):
        e = random_losr(d, rng)
        sc = sample_free_superchannel("entanglement", d, rng)
        pe = entanglement_distance_upper(e, cands)
        tallies["M1_nonnegative"].record(pe, tol)
        pf = entanglement_distance_upper(cands[int(rng.integers(len(cands)))], cands)
        free_max = max(free_max, pf)
        tallies["M1_free_point"].record(-pf, 1e-6)
        tallies["M2_monotone"].record(pe - entanglement_distance_upper(sc.apply(e), cands), 1e-6)
    return HarnessReport("entanglement", "candidate_diamond_distance", False, trials, seed, tallies, free_max)


def axiom_harness(theory: str = "athermality", trials: int = 200, seed: int = 0,
                  tol: float = 1e-7) -> HarnessReport:
    """Sample channels and free super-channels and tally monotone-axiom checks.

    Athermality uses the exact log-robustness; entanglement uses the candidate-distance
    upper bound, whose violations are reported without failing.
    """
    if theory == "athermality":
        return _harness_athermality(trials, seed, tol)
    if theory == "entanglement":
        return _harness_entanglement(trials, seed, tol)
    raise BadParameter(f"unknown theory {theory!r}; expected one of {THEORIES}")


def superchannel_preserves_annihilation(sc: SuperChannelSpec, probes: int = 20, seed: int = 0) -> bool:
    """Probe check that F applied to a free channel still outputs free states.

    Athermality uses Φ_γ and requires outputs equal to γ; entanglement applies F to each
    fixed annihilating candidate and requires PPT outputs (separable for 2 x 2).
    """
    rng = np.random.default_rng(seed)
    if sc.theory == "entanglement":
        d = sc.pre.in_dims[0]
        for cand in entanglement_candidates(d):
            f = sc.apply(cand)
            for _ in range(probes):
                if is_npt(f(la.projector(haar_random_vector(f.d_in, rng))), (d, d)):
                    return False
        return True
    if sc.theory != "athermality":
        raise BadParameter(f"unknown theory {sc.theory!r}")
    spec = sc.spec
    f = sc.apply(ath.thermalizing_channel(spec))
    for _ in range(probes):
        out = f(la.projector(haar_random_vector(f.d_in, rng)))
        if np.max(np.abs(out - spec.gamma.op)) > FREE_TOL:
            return False
    return True


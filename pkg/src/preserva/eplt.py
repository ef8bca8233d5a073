"""Entanglement-preserving local thermalization.

Twirling algebra, isotropic states, population ladders, the two EPLT families and the
numerical audits of their distance and preservability bounds.

Ladder convention: the tilde basis reverses energy order, ``|ñ> = |d−1−n>``, so that a
thermal state has ascending tilde populations ``q̃_0 ≤ … ≤ q̃_{d−1}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .diamond import channel_distance, diamond_lower_bound
from .divergences import singlet_fraction
from .errors import (
    BadIndex,
    BadParameter,
    DimensionUnsupported,
    NotAscending,
    NotBipartiteSquare,
    OutOfRange,
    SearchFailed,
    TargetInfeasible,
    WitnessNeverFires,
)
from .quantum import (
    DensityMatrix,
    QuantumChannel,
    as_operator,
    compose,
    constant_channel,
    convex_mix,
    haar_random_vector,
    measure_prepare,
    tensor_channels,
)

LADDER_SLACK = 1e-12
NPT_TOL = 1e-10


def _local_dim(n: int) -> int:
    d = int(round(math.sqrt(n)))
    if d * d != n:
        raise NotBipartiteSquare(f"dimension {n} is not d x d")
    return d


def twirl(x) -> np.ndarray:
    """Exact (U⊗U*)-twirl: projection onto span{|Ψ+><Ψ+|, I}."""
    x = as_operator(x)
    d = _local_dim(x.shape[0])
    dd = d * d
    psi = la.max_entangled(d)
    f = psi.conj() @ x @ psi
    t = np.trace(x)
    a = (dd * f - t) / (dd - 1)
    b = t - a
    return a * la.projector(psi) + b * np.eye(dd) / dd


def twirl_channel(d: int) -> QuantumChannel:
    """The twirl as a measure-and-prepare channel on a d x d system."""
    dd = d * d
    p = la.projector(la.max_entangled(d))
    rest = np.eye(dd) - p
    return measure_prepare([p, rest], [p, rest / (dd - 1)], in_dims=(d, d), out_dims=(d, d))


def isotropic(p: float, d: int) -> DensityMatrix:
    lo = -1.0 / (d * d - 1)
    if not lo - 1e-15 <= p <= 1.0 + 1e-15:
        raise BadParameter(f"p={p} outside [{lo}, 1]")
    dd = d * d
    op = p * la.projector(la.max_entangled(d)) + (1 - p) * np.eye(dd) / dd
    return DensityMatrix(op, (d, d))


def negativity(rho, split=None) -> float:
    """(‖ρ^{T_B}‖₁ − 1)/2."""
    a = as_operator(rho)
    dims = split or (_local_dim(a.shape[0]),) * 2
    return 0.5 * (la.trace_norm(la.partial_transpose(a, dims, 1)) - np.trace(a).real)


def is_npt(rho, split=None) -> bool:
    a = as_operator(rho)
    dims = split or (_local_dim(a.shape[0]),) * 2
    return la.lambda_min(la.partial_transpose(a, dims, 1)) < -NPT_TOL


def tilde_index(n: int, d: int) -> int:
    return d - 1 - n


def ladder_channel(i: int, delta: float, d: int) -> QuantumChannel:
    """Elementary population shift from |ĩ> to |ĩ+1> with weight δ; dephases otherwise."""
    if not 0 <= i <= d - 2:
        raise BadIndex(f"ladder index {i} outside [0, {d - 2}]")
    if not -LADDER_SLACK <= delta <= 1 + LADDER_SLACK:
        raise BadParameter(f"delta={delta} outside [0, 1]")
    delta = min(max(delta, 0.0), 1.0)
    ti, tn = tilde_index(i, d), tilde_index(i + 1, d)
    kraus = [
        math.sqrt(1 - delta) * np.outer(la.ket(ti, d), la.ket(ti, d)),
        math.sqrt(delta) * np.outer(la.ket(tn, d), la.ket(ti, d)),
    ]
    kraus += [la.projector(la.ket(tilde_index(j, d), d)) for j in range(d) if j != i]
    return QuantumChannel.from_kraus(kraus)


@dataclass(frozen=True)
class LadderParams:
    """δ_0..δ_{d−2} and Γ_{−1}..Γ_{d−2} with Γ_i = Γ_{i−1}δ_i + 1."""

    d: int
    deltas: tuple
    gammas: tuple

    def channel(self) -> QuantumChannel:
        """Ẽ_{δ_{d−2}} ∘ … ∘ Ẽ_{δ_0}."""
        if self.d == 1:
            return QuantumChannel.from_kraus([np.eye(1)])
        steps = [ladder_channel(i, dl, self.d) for i, dl in enumerate(self.deltas)]
        return compose(*reversed(steps))


def tilde_populations(eta) -> np.ndarray:
    pops = np.real(np.diag(as_operator(eta)))
    return pops[::-1].copy()


def solve_deltas(eta_target) -> LadderParams:
    """Ladder coefficients mapping I/d to a diagonal target.

    :param eta_target: diagonal state (energy basis) whose tilde populations ascend
    """
    q = tilde_populations(eta_target)
    d = q.size
    if np.any(np.diff(q) < -LADDER_SLACK):
        raise NotAscending("tilde populations must ascend (energy populations nonincreasing)")
    gammas = [1.0]
    deltas = []
    for n in range(d - 1):
        dl = float(1.0 - d * q[n] / gammas[-1])
        if dl < -LADDER_SLACK or dl > 1 + LADDER_SLACK:
            raise TargetInfeasible(f"delta_{n}={dl:.3e} outside [0, 1]")
        dl = min(max(dl, 0.0), 1.0)
        deltas.append(dl)
        gammas.append(gammas[-1] * dl + 1.0)
    return LadderParams(d, tuple(deltas), tuple(gammas))


def eta_eps(gamma, eps: float) -> DensityMatrix:
    """γ + (ε/(1−ε))(γ − I/d); positive exactly when ε ≤ d·p_min(γ)."""
    g = as_operator(gamma)
    d = g.shape[0]
    flat = np.eye(d) / d
    if eps >= 1.0:
        if eps == 1.0 and np.allclose(g, flat, atol=1e-14):
            return DensityMatrix(flat)
        raise OutOfRange(f"eps={eps} must be below 1 unless gamma is maximally mixed")
    if eps < 0:
        raise OutOfRange(f"eps={eps} is negative")
    eta = g + (eps / (1.0 - eps)) * (g - flat)
    lmin = la.lambda_min(eta)
    if lmin < -1e-12:
        raise OutOfRange(f"eta has eigenvalue {lmin:.3e}; eps exceeds d*p_min")
    if lmin < 0:
        w, v = np.linalg.eigh(eta)
        eta = (v * np.clip(w, 0, None)) @ v.conj().T
    return DensityMatrix(eta)


def normalized_temperature(gamma) -> float:
    """k_B T / ‖H‖_∞ with the ground energy set to zero (k_B = 1)."""
    p = np.sort(np.real(np.diag(as_operator(gamma))))
    if p[0] <= 0:
        return 0.0
    span = math.log(p[-1] / p[0])
    return math.inf if span == 0 else 1.0 / span


@dataclass(frozen=True)
class EpltParams:
    gamma_A: np.ndarray
    gamma_B: np.ndarray
    eps: float
    p_min: float
    eps_star: float
    eta_A: DensityMatrix
    eta_B: DensityMatrix
    ladder_A: LadderParams
    ladder_B: LadderParams
    tau_A: float
    tau_B: float


def eplt_params(gamma_a, gamma_b, eps: float | None = None) -> EpltParams:
    """Parameters at ``eps`` (default ε_* = d·p_min)."""
    ga, gb = as_operator(gamma_a), as_operator(gamma_b)
    if ga.shape != gb.shape:
        raise BadParameter("both sides need the same local dimension")
    d = ga.shape[0]
    pm = min(la.lambda_min(ga), la.lambda_min(gb))
    eps_star = d * pm
    eps = eps_star if eps is None else float(eps)
    if eps < 0 or eps > eps_star + 1e-12:
        raise OutOfRange(f"eps={eps} outside [0, eps_star={eps_star}]")
    eps = min(eps, eps_star)
    eta_a, eta_b = eta_eps(ga, eps), eta_eps(gb, eps)
    return EpltParams(ga, gb, eps, pm, eps_star, eta_a, eta_b, solve_deltas(eta_a), solve_deltas(eta_b),
                      normalized_temperature(ga), normalized_temperature(gb))


def local_ladder_twirl(params: EpltParams) -> QuantumChannel:
    """(Ẽ_A ⊗ Ẽ_B) ∘ T."""
    d = params.gamma_A.shape[0]
    return compose(tensor_channels(params.ladder_A.channel(), params.ladder_B.channel()), twirl_channel(d))


def build_eplt(gamma_a, gamma_b, eps: float, family: str = "W") -> QuantumChannel:
    """W: (1−ε)(Ẽ_A⊗Ẽ_B)∘T + εT.  E: (1−ε)Φ_{η_A⊗η_B} + εT."""
    params = eplt_params(gamma_a, gamma_b, eps)
    return _build(params, family)


def _build(params: EpltParams, family: str) -> QuantumChannel:
    d = params.gamma_A.shape[0]
    t = twirl_channel(d)
    if family == "W":
        first = local_ladder_twirl(params)
    elif family == "E":
        first = constant_channel(la.kron(params.eta_A.op, params.eta_B.op), (d, d), (d, d))
    else:
        raise BadParameter(f"unknown family {family!r}")
    return convex_mix([first, t], [1.0 - params.eps, params.eps])


def probe_states(d: int, samples: int, seed: int = 0) -> list:
    """Ψ+, I/d², product basis states, then seeded Haar-random pure states."""
    dd = d * d
    probes = [la.projector(la.max_entangled(d)), np.eye(dd) / dd]
    probes += [la.projector(la.ket(k, dd)) for k in range(dd)]
    rng = np.random.default_rng(seed)
    probes += [la.projector(haar_random_vector(dd, rng)) for _ in range(samples)]
    return probes


def verify_local_thermalization(channel: QuantumChannel, gamma_a, gamma_b, samples: int = 20,
                                tol: float = 1e-9, seed: int = 0) -> bool:
    """Both output marginals equal their targets on probes and at the Choi level."""
    ga, gb = as_operator(gamma_a), as_operator(gamma_b)
    d = ga.shape[0]
    dims = (d, d)
    for rho in probe_states(d, samples, seed):
        out = channel(rho)
        if np.max(np.abs(la.partial_trace(out, dims, [0]) - ga)) > tol:
            return False
        if np.max(np.abs(la.partial_trace(out, dims, [1]) - gb)) > tol:
            return False
    # tr_{B_out} J = γ_A ⊗ I/d², and symmetrically for A
    dd = d * d
    jdims = (d, d, dd)
    flat = np.eye(dd) / dd
    ja = la.partial_trace(channel.choi, jdims, [0, 2])
    jb = la.partial_trace(channel.choi, jdims, [1, 2])
    return (np.max(np.abs(ja - la.kron(ga, flat))) <= tol
            and np.max(np.abs(jb - la.kron(gb, flat))) <= tol)


def is_entanglement_breaking_2x2(channel: QuantumChannel) -> bool:
    """PPT test of the Choi operator; exact for qubit→qubit and qubit↔qutrit channels."""
    if channel.d_in * channel.d_out > 6:
        raise DimensionUnsupported("PPT is only conclusive for 2x2 and 2x3 Choi splits")
    return not is_npt(channel.choi, (channel.d_out, channel.d_in))


@dataclass(frozen=True)
class ActivationWindow:
    d: int
    lower: float
    upper: float
    nonempty: bool
    midpoint: float
    midpoint_fef: float


def activation_window(d: int) -> ActivationWindow:
    """Window 1/(d+1) < p̃ < (d−1)^{d−1}(3d−1)/((d+1)d^d) and the midpoint FEF."""
    if d < 2:
        raise BadParameter("d must be at least 2")
    lower = 1.0 / (d + 1)
    upper = (d - 1) ** (d - 1) * (3 * d - 1) / ((d + 1) * d ** d)
    mid = 0.5 * (lower + upper)
    # T̃ = p̃T + (1−p̃)Φ_{I/d²} sends Ψ+ to an isotropic state, whose FEF is its singlet fraction
    psi = la.projector(la.max_entangled(d))
    out = mid * twirl(psi) + (1 - mid) * np.eye(d * d) / (d * d)
    fef = singlet_fraction(out)
    return ActivationWindow(d, lower, upper, lower < upper, mid, fef)


@dataclass(frozen=True)
class Theorem6Audit:
    d: int
    p_min: float
    bound: float
    vacuous: bool
    candidates: list
    violations: int
    twirl_bound: float
    twirl_candidates: list
    twirl_violations: int


def _separable_candidates(params: EpltParams, seed: int, random_products: int) -> list:
    d = params.gamma_A.shape[0]
    dims = (d, d)
    out = [
        ("thermal_product", la.kron(params.gamma_A, params.gamma_B)),
        ("eta_product", la.kron(params.eta_A.op, params.eta_B.op)),
        ("maximally_mixed", np.eye(d * d) / (d * d)),
        ("ground_product", la.projector(la.ket(0, d * d))),
    ]
    rng = np.random.default_rng(seed)
    for k in range(random_products):
        a = la.projector(haar_random_vector(d, rng))
        b = la.projector(haar_random_vector(d, rng))
        out.append((f"random_product_{k}", la.kron(a, b)))
    return [(name, constant_channel(s, dims, dims)) for name, s in out]


def annihilating_candidates(params: EpltParams, seed: int = 0, random_products: int = 3) -> list:
    """Candidate entanglement-annihilating channels: constants to product states,
    the local ladder after the twirl, and mixtures of the two kinds."""
    cands = _separable_candidates(params, seed, random_products)
    lt = ("ladder_twirl", local_ladder_twirl(params))
    cands.append(lt)
    for w in (0.25, 0.5, 0.75):
        cands.append((f"mix_{w}", convex_mix([lt[1], cands[0][1]], [w, 1 - w])))
    return cands


def theorem6_audit(gamma_a, gamma_b, seed: int = 0, random_products: int = 3) -> Theorem6Audit:
    """Diamond distances from E^{ε*} to candidate annihilating channels versus (3d−1)p_min − 2."""
    params = eplt_params(gamma_a, gamma_b)
    d = params.gamma_A.shape[0]
    bound = (3 * d - 1) * params.p_min - 2.0
    e_star = _build(params, "E")
    t = twirl_channel(d)
    cands = annihilating_candidates(params, seed, random_products)
    rows, twirl_rows = [], []
    viol = tviol = 0
    twirl_bound = 1.0 - 1.0 / d
    psi = la.max_entangled(d)
    for name, lam in cands:
        res = channel_distance(e_star, lam)
        ok = res.value >= bound - 1e-6
        viol += not ok
        rows.append({"candidate": name, "distance": res.value, "gap": res.primal_dual_gap, "holds": ok})
        # induced trace norm without ancilla, bounded below by probing
        tnorm = diamond_lower_bound(t.choi - lam.choi, d * d, d * d, restarts=2, seed=seed,
                                    ancilla=1, starts=[psi])
        tok = tnorm >= twirl_bound - 1e-6
        tviol += not tok
        twirl_rows.append({"candidate": name, "induced_distance_lower": tnorm, "holds": tok})
    return Theorem6Audit(d, params.p_min, bound, bound <= 0, rows, viol, twirl_bound, twirl_rows, tviol)


@dataclass(frozen=True)
class SmallPreservabilityReport:
    delta: float
    eps: float
    eps_star: float
    upper_bound: float
    distance_twirl_to_candidate: float
    witness_npt: bool
    singlet_fraction: float
    candidate_ppt_on_probes: bool | None
    channel: QuantumChannel = field(repr=False, compare=False)


def small_preservability_search(gamma_a, gamma_b, delta: float, max_halvings: int = 40,
                                probes: int = 20, seed: int = 0) -> SmallPreservabilityReport:
    """Find ε with ε·‖T − (Ẽ_A⊗Ẽ_B)∘T‖⋄ < δ whose W-family channel keeps Ψ+ free-entangled.

    Raises :class:`SearchFailed` when no ε on the halving grid below ε_* works.
    """
    if delta <= 0:
        raise BadParameter("delta must be positive")
    base = eplt_params(gamma_a, gamma_b)
    d = base.gamma_A.shape[0]
    t = twirl_channel(d)
    psi = la.projector(la.max_entangled(d))
    eps = base.eps_star
    for _ in range(max_halvings + 1):
        if eps <= 0:
            break
        params = eplt_params(gamma_a, gamma_b, eps)
        cand = local_ladder_twirl(params)
        w = _build(params, "W")
        out = w(psi)
        sf = singlet_fraction(out)
        npt = is_npt(out)
        free = npt if d == 2 else sf > 1.0 / d
        if free:
            dist = 2.0 if delta >= 2 else channel_distance(t, cand).value
            bound = eps * dist
            if bound < delta:
                ppt = None
                if d == 2:
                    ppt = all(not is_npt(cand(r)) for r in probe_states(d, probes, seed))
                return SmallPreservabilityReport(delta, eps, base.eps_star, bound, dist, npt, sf, ppt, w)
        eps *= 0.5
    raise SearchFailed("no eps on the grid gives both a small distance and a free-entangled output")


@dataclass(frozen=True)
class InterpolationResult:
    p_hat: float
    p_lower: float
    p_upper: float
    distance: float

    def preservability_upper_bound(self, p: float) -> float:
        """(p − p̂_lower)·‖L0 − Φ⊗Φ‖⋄, the distance of L(p) to the non-firing L(p̂_lower)."""
        return max(p - self.p_lower, 0.0) * self.distance


def interpolation_boundary(l0: QuantumChannel, gamma_a, gamma_b, witness_inputs=None,
                           resolution: float = 1e-4, with_distance: bool = True) -> InterpolationResult:
    """Bisection on p for L(p) = pL0 + (1−p)Φ_{γ_A}⊗Φ_{γ_B} against an NPT witness."""
    ga, gb = as_operator(gamma_a), as_operator(gamma_b)
    d = ga.shape[0]
    dims = (d, d)
    free = constant_channel(la.kron(ga, gb), dims, dims)
    inputs = witness_inputs if witness_inputs is not None else [la.projector(la.max_entangled(d))]
    inputs = [as_operator(r) for r in inputs]

    def fires(p: float) -> bool:
        lp = convex_mix([l0, free], [p, 1 - p])
        return any(is_npt(lp(r)) for r in inputs)

    if not fires(1.0):
        raise WitnessNeverFires("L0 maps every witness input to a PPT state")
    lo, hi = 0.0, 1.0
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if fires(mid):
            hi = mid
        else:
            lo = mid
    dist = channel_distance(l0, free).value if with_distance else math.nan
    return InterpolationResult(0.5 * (lo + hi), lo, hi, dist)


def bundle_to_json(gamma_a, gamma_b, eps: float, family: str) -> dict:
    params = eplt_params(gamma_a, gamma_b, eps)
    return {
        "gamma_A": la.matrix_to_json(params.gamma_A),
        "gamma_B": la.matrix_to_json(params.gamma_B),
        "eps": params.eps,
        "deltas_A": list(params.ladder_A.deltas),
        "deltas_B": list(params.ladder_B.deltas),
        "family": family,
    }


def bundle_from_json(obj: dict) -> tuple[QuantumChannel, EpltParams, str]:
    """Rebuild the channel; stored deltas must match the re-solved ladders exactly."""
    ga = la.matrix_from_json(obj["gamma_A"])
    gb = la.matrix_from_json(obj["gamma_B"])
    family = obj["family"]
    params = eplt_params(ga, gb, float(obj["eps"]))
    for key, lad in (("deltas_A", params.ladder_A), ("deltas_B", params.ladder_B)):
        if list(lad.deltas) != [float(x) for x in obj[key]]:
            raise BadParameter(f"{key} in the bundle disagree with the solved ladder")
    return _build(params, family), params, family

"""Athermality: thermal states, Gibbs-preserving channels and their preservability.

Gibbs states are diagonal in the energy basis with populations nonincreasing in energy.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .diamond import channel_distance, require_solvable
from .divergences import SmoothBounds, d_max, d_max_ratio
from .errors import (
    BadEpsilon,
    BadParameter,
    CapExceeded,
    DimensionMismatch,
    NotGibbsPreserving,
)
from .quantum import (
    DensityMatrix,
    QuantumChannel,
    as_operator,
    compose,
    constant_channel,
    convex_mix,
    haar_random_vector,
    identity,
    measure_prepare,
    random_channel,
    tensor_channels,
    unitary_channel,
)

GP_TOL = 1e-8


@dataclass(frozen=True)
class ThermalSpec:
    """Hamiltonian spectrum and inverse temperature; ``gamma`` is derived."""

    energies: tuple
    beta: float
    gamma: DensityMatrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float).reshape(-1)
        if e.size == 0 or not np.all(np.isfinite(e)):
            raise BadParameter("energies must be a nonempty finite sequence")
        if np.any(np.diff(e) < 0):
            raise BadParameter("energies must be ascending")
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise BadParameter(f"beta={self.beta} must be a finite nonnegative number")
        w = np.exp(-self.beta * (e - e[0]))
        object.__setattr__(self, "energies", tuple(float(x) for x in e))
        object.__setattr__(self, "gamma", DensityMatrix(np.diag(w / w.sum())))

    @property
    def d(self) -> int:
        return len(self.energies)

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.gamma.op)).copy()

    @property
    def p_min(self) -> float:
        return float(np.min(self.populations))

    @classmethod
    def from_populations(cls, populations, beta: float = 1.0) -> "ThermalSpec":
        """Spec reproducing given full-rank, nonincreasing populations."""
        p = np.asarray(populations, dtype=float)
        if np.any(p <= 0) or abs(p.sum() - 1) > 1e-10:
            raise BadParameter("populations must be positive and sum to one")
        if np.any(np.diff(p) > 1e-15):
            raise BadParameter("populations must be nonincreasing in energy")
        if beta <= 0:
            raise BadParameter("beta must be positive")
        e = -np.log(p / p[0]) / beta + 0.0
        return cls(tuple(e), beta)


def thermal_state(energies, beta: float) -> ThermalSpec:
    return ThermalSpec(tuple(energies), float(beta))


def gamma_matrix(g) -> np.ndarray:
    if isinstance(g, ThermalSpec):
        return g.gamma.op
    return as_operator(g)


def is_gibbs_preserving(channel: QuantumChannel, spec_in, spec_out=None, tol: float = GP_TOL) -> bool:
    """True iff ‖N(γ_in) − γ_out‖₁ ≤ tol."""
    g_in = gamma_matrix(spec_in)
    g_out = gamma_matrix(spec_in if spec_out is None else spec_out)
    if g_in.shape[0] != channel.d_in or g_out.shape[0] != channel.d_out:
        raise DimensionMismatch("thermal states do not match the channel dimensions")
    return la.trace_norm(channel(g_in) - g_out) <= tol


def _require_gp(channel, spec_in, spec_out=None):
    if not is_gibbs_preserving(channel, spec_in, spec_out):
        raise NotGibbsPreserving("channel does not preserve the thermal state")


def thermalizing_channel(spec, d_in=None) -> QuantumChannel:
    """Φ_γ: replace any input by the thermal state."""
    g = gamma_matrix(spec)
    return constant_channel(g, g.shape[0] if d_in is None else d_in)


def gibbs_channel(kind: str, spec: ThermalSpec, param: float | None = None) -> QuantumChannel:
    """Standard Gibbs-preserving families.

    :param kind: ``partial_thermalization`` (param λ: λ·id + (1−λ)Φ_γ),
        ``energy_dephasing``, or ``hamiltonian_evolution`` (param t: conjugation by e^{−iHt})
    """
    d = spec.d
    if kind == "partial_thermalization":
        lam = 1.0 if param is None else float(param)
        if not 0.0 <= lam <= 1.0:
            raise BadParameter(f"lambda={lam} outside [0, 1]")
        return convex_mix([identity(d), thermalizing_channel(spec)], [lam, 1.0 - lam])
    if kind == "energy_dephasing":
        return QuantumChannel.from_kraus([la.projector(la.ket(i, d)) for i in range(d)])
    if kind == "hamiltonian_evolution":
        t = 0.0 if param is None else float(param)
        return unitary_channel(np.diag(np.exp(-1j * np.asarray(spec.energies) * t)))
    raise BadParameter(f"unknown Gibbs channel kind {kind!r}")


def gibbs_preserving_from(channel: QuantumChannel, gamma_in, gamma_out) -> QuantumChannel:
    """Smallest mixture (1−q)R + qΦ_τ of R with a replacement channel that fixes γ.

    1−q = 2^{−D_max(R(γ_in)‖γ_out)}, and τ absorbs the remainder of γ_out.
    """
    g_in, g_out = gamma_matrix(gamma_in), gamma_matrix(gamma_out)
    r = channel(g_in)
    ratio = d_max_ratio(r, g_out)
    if math.isinf(ratio):
        raise NotGibbsPreserving("R(γ) is not supported on γ_out")
    keep = min(1.0, 1.0 / ratio)
    q = 1.0 - keep
    if q <= 1e-14:
        return channel
    tau = (g_out - keep * r) / q
    tau = la.hermitian_part(tau)
    tau = tau / np.trace(tau).real
    return convex_mix([channel, constant_channel(tau, channel.in_dims, channel.out_dims)], [keep, q])


def random_gibbs_preserving(gamma_in, gamma_out=None, seed=None, family: str | None = None) -> QuantumChannel:
    """Seeded Gibbs-preserving channel drawn from several structured families."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    g_in = gamma_matrix(gamma_in)
    g_out = g_in if gamma_out is None else gamma_matrix(gamma_out)
    d_in, d_out = g_in.shape[0], g_out.shape[0]
    same = d_in == d_out and np.allclose(g_in, g_out)
    families = ["dilation", "measure_prepare"] + (["thermal_mix", "dephase_rotate"] if same else [])
    fam = family or families[rng.integers(len(families))]
    if fam == "dilation":
        rank = int(rng.integers(max(1, -(-d_in // d_out)), d_in * d_out + 1))
        base = random_channel(d_in, d_out, rank, seed=rng)
        return gibbs_preserving_from(base, g_in, g_out)
    if fam == "measure_prepare":
        k = int(rng.integers(1, d_in + 2))
        g = rng.standard_normal((k, d_in, d_in)) + 1j * rng.standard_normal((k, d_in, d_in))
        effects = np.einsum("kab,kcb->kac", g, g.conj())
        tot_inv_sqrt = la.inv_sqrt_on_support(effects.sum(axis=0))
        povm = [tot_inv_sqrt @ e @ tot_inv_sqrt for e in effects]
        states = [la.projector(haar_random_vector(d_out, rng)) for _ in range(k)]
        return gibbs_preserving_from(measure_prepare(povm, states), g_in, g_out)
    if fam == "thermal_mix":
        lam = float(rng.uniform())
        base = convex_mix([identity(d_in), constant_channel(g_in, d_in)], [lam, 1 - lam])
        energies_phase = np.diag(np.exp(1j * rng.uniform(0, 2 * np.pi, d_in)))
        return compose(unitary_channel(energies_phase), base)
    if fam == "dephase_rotate":
        deph = QuantumChannel.from_kraus([la.projector(la.ket(i, d_in)) for i in range(d_in)])
        w = float(rng.uniform())
        return convex_mix([deph, identity(d_in)], [w, 1 - w])
    raise BadParameter(f"unknown family {fam!r}")


def _gamma_inv_sqrt(g_out: np.ndarray) -> np.ndarray:
    return la.inv_sqrt_on_support(g_out)


def _see_saw(channel: QuantumChannel, gis: np.ndarray, psi: np.ndarray, iters: int = 300,
             tol: float = 1e-14) -> tuple[float, np.ndarray]:
    val = -np.inf
    for _ in range(iters):
        out = gis @ channel(la.projector(psi)) @ gis
        w, v = np.linalg.eigh(la.hermitian_part(out))
        new_val = float(w[-1])
        phi = v[:, -1]
        x = gis @ la.projector(phi) @ gis
        w2, v2 = np.linalg.eigh(la.hermitian_part(channel.adjoint(x)))
        psi = v2[:, -1]
        if new_val - val <= tol * max(1.0, abs(new_val)):
            val = max(val, new_val)
            break
        val = new_val
    return val, psi


def _bloch_grid_max(channel: QuantumChannel, gis: np.ndarray, step: float = 1e-2) -> float:
    # N(ψ) is affine in the Bloch vector r; λ_max of a 2x2 Hermitian is closed-form
    paulis = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
    a0 = gis @ channel(np.eye(2) / 2) @ gis
    ak = [gis @ channel(p / 2) @ gis for p in paulis]
    theta = np.arange(0.0, np.pi + step, step)
    phi = np.arange(0.0, 2 * np.pi, step)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    r = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]).reshape(3, -1)
    m = a0[None] + np.einsum("kn,kab->nab", r, np.stack(ak))
    a, dd = m[:, 0, 0].real, m[:, 1, 1].real
    b = m[:, 0, 1]
    lam = 0.5 * (a + dd) + np.sqrt(0.25 * (a - dd) ** 2 + np.abs(b) ** 2)
    return float(np.max(lam))


@dataclass(frozen=True)
class PDmaxReport:
    value: float
    grid_value: float | None
    certified: bool | None
    restarts: int


def p_dmax_report(channel: QuantumChannel, spec, spec_out=None, restarts: int = 32, seed: int = 0,
                  check: bool = True) -> PDmaxReport:
    """sup over pure inputs of D_max(N(ψ)‖γ_out) by multi-start see-saw.

    On qubits the maximum over a Bloch-sphere grid (1e-2 rad) is reported as a certificate.
    """
    spec_out = spec if spec_out is None else spec_out
    if check:
        _require_gp(channel, spec, spec_out)
    g_out = gamma_matrix(spec_out)
    gis = _gamma_inv_sqrt(g_out)
    d = channel.d_in
    rng = np.random.default_rng(seed)
    starts = [la.ket(i, d) for i in range(d)]
    starts += [haar_random_vector(d, rng) for _ in range(restarts)]
    best = -np.inf
    for psi in starts:
        val, _ = _see_saw(channel, gis, psi)
        best = max(best, val)
    grid = certified = None
    if d == 2:
        grid = _bloch_grid_max(channel, gis)
        certified = grid <= best + 1e-9
        best = max(best, grid)
    value = max(math.log2(best), 0.0) if best > 0 else -math.inf
    return PDmaxReport(value, None if grid is None else math.log2(grid), certified, restarts)


def p_dmax(channel: QuantumChannel, spec, spec_out=None, restarts: int = 32, seed: int = 0) -> float:
    return p_dmax_report(channel, spec, spec_out, restarts, seed).value


def thermal_choi(spec_out, d_in: int) -> np.ndarray:
    """Choi operator of Φ_γ: γ ⊗ I/d_in."""
    return la.kron(gamma_matrix(spec_out), np.eye(d_in) / d_in)


def p_bar_dmax(channel: QuantumChannel, spec, spec_out=None, check: bool = True) -> float:
    """log2 λ_max((γ⊗I/d)^{-1/2} J(N) (γ⊗I/d)^{-1/2}); the log-robustness against Φ_γ."""
    spec_out = spec if spec_out is None else spec_out
    if check:
        _require_gp(channel, spec, spec_out)
    val = d_max(channel.choi, thermal_choi(spec_out, channel.d_in))
    return max(val, 0.0)


def smooth_p_bar_bounds(channel: QuantumChannel, spec, delta: float, spec_out=None) -> SmoothBounds:
    """Bracket of the smoothed log-robustness from Choi-level continuity."""
    if not 0.0 <= delta < 1.0:
        raise BadEpsilon(f"delta={delta} outside [0, 1)")
    spec_out = spec if spec_out is None else spec_out
    upper = p_bar_dmax(channel, spec, spec_out)
    pm = la.lambda_min(gamma_matrix(spec_out)) / channel.d_in
    lower = math.log2(max(1.0, 2.0 ** upper - 2.0 * delta / pm))
    return SmoothBounds(lower=min(lower, upper), upper=upper, epsilon=delta)


def energy_subspace_condition(energies, m_max: int, tol: float = 1e-9) -> bool:
    """No two distinct occupation vectors with the same total count share an energy."""
    if m_max > 6:
        raise CapExceeded(f"m_max={m_max} exceeds the enumeration cap 6")
    e = np.asarray(energies, dtype=float)
    d = e.size
    for m in range(1, m_max + 1):
        totals = []
        for combo in itertools.combinations_with_replacement(range(d), m):
            totals.append(float(np.sum(e[list(combo)])))
        totals.sort()
        if any(b - a <= tol for a, b in zip(totals, totals[1:])):
            return False
    return True


def is_coherence_annihilating(channel: QuantumChannel, probes: int = 100, seed: int = 0,
                              tol: float = 1e-9) -> bool:
    """Probe check that every output is diagonal in the energy basis."""
    rng = np.random.default_rng(seed)
    for _ in range(probes):
        out = channel(la.projector(haar_random_vector(channel.d_in, rng)))
        if np.sum(np.abs(out - np.diag(np.diag(out)))) > tol:
            return False
    return True


@dataclass(frozen=True)
class BathBoundReport:
    epsilon: float
    p_dmax: float
    upper_bound: float
    lower_bound_rhs: float
    esc_holds: bool
    coherence_annihilating: bool
    gamma_full_rank: bool
    probes: int
    esc_m_max: int


def bath_bounds(channel: QuantumChannel, spec: ThermalSpec, eps: float, probes: int = 100,
                esc_m_max: int = 6, seed: int = 0) -> BathBoundReport:
    """Bounding quantities for the bath size needed to thermalize every output."""
    if not 0.0 < eps < 1.0:
        raise BadEpsilon(f"epsilon={eps} outside (0, 1)")
    pd = p_dmax(channel, spec, seed=seed)
    pm = spec.p_min
    return BathBoundReport(
        epsilon=eps,
        p_dmax=pd,
        upper_bound=2.0 ** pd / eps ** 2,
        lower_bound_rhs=2.0 ** pd - 2.0 * math.sqrt(eps) / pm - 1.0,
        esc_holds=energy_subspace_condition(spec.energies, esc_m_max),
        coherence_annihilating=is_coherence_annihilating(channel, probes, seed),
        gamma_full_rank=pm > 0,
        probes=probes,
        esc_m_max=esc_m_max,
    )


@dataclass(frozen=True)
class CommReport:
    M: int
    avg_error: float
    capacity_bound: float
    delta: float
    p_bar_dmax: float
    bound_holds: bool


def classical_gamma(spec: ThermalSpec, m: int) -> np.ndarray:
    """Thermal state of an M-letter register: γ^{⊗k} when M = d^k, else maximally mixed."""
    d = spec.d
    k = round(math.log(m, d)) if d > 1 else 0
    if d > 1 and d ** k == m:
        return np.diag(np.real(np.diag(la.kron(*([spec.gamma.op] * k)))))
    return np.eye(m) / m


def comm_error(channel: QuantumChannel, encoder: QuantumChannel, decoder: QuantumChannel,
               spec: ThermalSpec, spec_a: ThermalSpec, m: int, delta: float = 0.01,
               gamma_c=None) -> CommReport:
    """Average decoding error of E_d ∘ (N ⊗ Φ_{γ_A}) ∘ E_e over M uniformly chosen letters."""
    g_c = classical_gamma(spec, m) if gamma_c is None else gamma_matrix(gamma_c)
    g_s, g_a = spec.gamma.op, spec_a.gamma.op
    d_s, d_a = g_s.shape[0], g_a.shape[0]
    if encoder.d_in != m or encoder.d_out != d_s * d_a or decoder.d_in != d_s * d_a or decoder.d_out != m:
        raise DimensionMismatch("encoder/decoder dimensions do not match the message and system spaces")
    g_sa = la.kron(g_s, g_a)
    _require_gp(channel, spec)
    _require_gp(encoder, g_c, g_sa)
    _require_gp(decoder, g_sa, g_c)
    middle = tensor_channels(channel, thermalizing_channel(spec_a))
    pipe = compose(decoder, middle, encoder)
    succ = sum(np.real(pipe(la.projector(la.ket(i, m)))[i, i]) for i in range(m)) / m
    err = float(min(1.0, max(0.0, 1.0 - succ)))
    pb = p_bar_dmax(channel, spec)
    slack = 1.0 - err - delta
    bound = pb + math.log2(1.0 / slack) if slack > 0 else math.inf
    return CommReport(m, err, bound, delta, pb, math.log2(m) <= bound + 1e-9)


def _copy_encoder(g_c: np.ndarray, spec: ThermalSpec, spec_a: ThermalSpec) -> QuantumChannel:
    # |m><m| -> |m><m|_S ⊗ γ_A when the register is a copy of S
    d = spec.d
    povm = [la.projector(la.ket(i, d)) for i in range(d)]
    states = [la.kron(p, spec_a.gamma.op) for p in povm]
    return measure_prepare(povm, states)


def _trace_out_decoder(spec: ThermalSpec, spec_a: ThermalSpec) -> QuantumChannel:
    d, da = spec.d, spec_a.d
    povm = [la.kron(la.projector(la.ket(i, d)), np.eye(da)) for i in range(d)]
    states = [la.projector(la.ket(i, d)) for i in range(d)]
    return measure_prepare(povm, states)


def sample_codes(spec: ThermalSpec, spec_a: ThermalSpec, m: int, seed) -> tuple[QuantumChannel, QuantumChannel]:
    """Seeded Gibbs-preserving encoder/decoder pair for an M-letter register."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    g_c = classical_gamma(spec, m)
    g_sa = la.kron(spec.gamma.op, spec_a.gamma.op)
    structured = m == spec.d
    enc = random_gibbs_preserving(g_c, g_sa, rng, family=["dilation", "measure_prepare"][rng.integers(2)])
    dec = random_gibbs_preserving(g_sa, g_c, rng, family=["dilation", "measure_prepare"][rng.integers(2)])
    if structured:
        w_e, w_d = rng.uniform(size=2) ** 0.25
        enc = convex_mix([_copy_encoder(g_c, spec, spec_a), enc], [w_e, 1 - w_e])
        dec = convex_mix([_trace_out_decoder(spec, spec_a), dec], [w_d, 1 - w_d])
    return enc, dec


@dataclass(frozen=True)
class CommAudit:
    M: int
    trials: int
    delta: float
    violations: int
    min_margin: float
    rows: list


def comm_audit(spec: ThermalSpec, m: int = 2, trials: int = 200, delta: float = 0.01, seed: int = 0,
               spec_a: ThermalSpec | None = None) -> CommAudit:
    """Check log2 M ≤ P̄(N) + log2(1/(1−ε−δ)) over seeded channels and codes."""
    spec_a = spec if spec_a is None else spec_a
    rng = np.random.default_rng(seed)
    rows = []
    violations = 0
    margin = math.inf
    for trial in range(trials):
        if trial % 4 == 0:
            channel = identity(spec.d)
        else:
            channel = random_gibbs_preserving(spec, spec, rng)
        enc, dec = sample_codes(spec, spec_a, m, rng)
        rep = comm_error(channel, enc, dec, spec, spec_a, m, delta)
        gap = rep.capacity_bound - math.log2(m)
        margin = min(margin, gap)
        violations += not rep.bound_holds
        rows.append({"trial": trial, "avg_error": rep.avg_error, "p_bar_dmax": rep.p_bar_dmax,
                     "capacity_bound": rep.capacity_bound, "holds": rep.bound_holds})
    return CommAudit(m, trials, delta, violations, margin, rows)


@dataclass(frozen=True)
class DestructionReport:
    n: int
    p: float
    delta_premise: float
    distance: float
    premise_holds: bool
    choi_identity_error: float
    bound_holds: bool
    primal_dual_gap: float


def _swap_first_with(n: int, i: int, d: int) -> np.ndarray:
    order = list(range(n))
    order[0], order[i] = order[i], order[0]
    big = d ** n
    # permute the output tensor legs of the identity to get the swap unitary
    return np.eye(big, dtype=complex).reshape([d] * n + [big]).transpose(order + [n]).reshape(big, big)


def convex_split_mixture(channel: QuantumChannel, beta: QuantumChannel, n: int) -> QuantumChannel:
    """(1/n) Σ_i β^{⊗(i−1)} ⊗ E ⊗ β^{⊗(n−i)}."""
    terms = []
    for i in range(n):
        parts = [beta] * n
        parts[i] = channel
        terms.append(tensor_channels(*parts))
    return convex_mix(terms, [1.0 / n] * n)


def permuted_mixture(channel: QuantumChannel, beta: QuantumChannel, n: int) -> QuantumChannel:
    """(1/n) Σ_i U_i ∘ (E ⊗ β^{⊗(n−1)}) ∘ U_i with U_i exchanging factors 1 and i."""
    d = channel.d_in
    core = tensor_channels(channel, *([beta] * (n - 1)))
    terms = []
    for i in range(n):
        u = unitary_channel(_swap_first_with(n, i, d), core.in_dims)
        terms.append(compose(u, core, u))
    return convex_mix(terms, [1.0 / n] * n)


def convex_split_experiment(channel: QuantumChannel, spec: ThermalSpec, n: int) -> DestructionReport:
    """Convex-split destruction of a Gibbs-preserving channel against β = Φ_γ."""
    if n < 1:
        raise BadParameter("n must be positive")
    require_solvable(channel.d_in ** n, channel.d_out ** n)
    beta = thermalizing_channel(spec)
    pb = p_bar_dmax(channel, spec)
    p = 2.0 ** (-pb)
    delta = math.sqrt(1.0 / (p * n))
    premise = math.log2(n) >= math.log2(1.0 / p) + 2.0 * math.log2(1.0 / delta) - 1e-12
    direct = convex_split_mixture(channel, beta, n)
    perm = permuted_mixture(channel, beta, n)
    err = float(np.max(np.abs(direct.choi - perm.choi)))
    target = tensor_channels(*([beta] * n))
    res = channel_distance(direct, target)
    holds = (not premise) or res.value <= delta + 1e-6
    return DestructionReport(n, p, delta, res.value, premise, err, holds, float(res.primal_dual_gap))

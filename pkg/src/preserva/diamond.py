"""Diamond norm of channel differences.

For a trace-annihilating Hermitian-preserving map Δ with unnormalized Choi operator
``J = d_in · J(Δ)``::

    ‖Δ‖⋄ = 2 · min { ‖tr_out Z‖_∞ : Z ⪰ J, Z ⪰ 0 }

which is solved with the in-repo interior-point method in :mod:`preserva.sdp`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .errors import BadParameter, DimensionMismatch, DimensionTooLarge, NotHermitian
from .quantum import QuantumChannel
from .sdp import DenseBlock, HermitianBasis, HermitianBlock, PsdProgram, solve_psd_program

DIMENSION_CAP = 256
# dense Schur complement of the interior-point method: 8·(d²+1)² bytes for d = d_in·d_out
SCHUR_MEMORY_BUDGET = 2 ** 31


@dataclass(frozen=True)
class DiamondResult:
    value: float
    primal_dual_gap: float
    lower_bound_variational: float
    iterations: int = 0


def require_solvable(d_in: int, d_out: int) -> None:
    """Raise DimensionTooLarge unless the SDP fits under the cap and the memory budget."""
    n = d_in * d_out
    if n > DIMENSION_CAP:
        raise DimensionTooLarge(f"d_in*d_out = {n} exceeds the cap {DIMENSION_CAP}")
    need = 8 * (n * n + 1) ** 2
    if need > SCHUR_MEMORY_BUDGET:
        raise DimensionTooLarge(
            f"d_in*d_out = {n} needs a {need / 2 ** 30:.1f} GiB Schur matrix; budget is "
            f"{SCHUR_MEMORY_BUDGET / 2 ** 30:.1f} GiB")


def _check_delta(delta, d_in: int, d_out: int) -> np.ndarray:
    delta = np.asarray(delta, dtype=complex)
    n = d_in * d_out
    if delta.shape != (n, n):
        raise DimensionMismatch(f"Choi difference of shape {delta.shape} for {d_out}x{d_in}")
    if n > DIMENSION_CAP:
        raise DimensionTooLarge(f"d_in*d_out = {n} exceeds the cap {DIMENSION_CAP}")
    if not la.is_hermitian(delta, 1e-9):
        raise NotHermitian("Choi difference is not Hermitian")
    marg = la.partial_trace(delta, (d_out, d_in), [1])
    if np.max(np.abs(marg)) > 1e-8:
        raise BadParameter("map is not trace-annihilating; expected a difference of channels")
    return la.hermitian_part(delta)


def _partial_trace_out_coeffs(basis: HermitianBasis, d_in: int, d_out: int) -> np.ndarray:
    # tr_out(E_pq) = δ(o_p, o_q) E_{i_p i_q} with p = o·d_in + i
    m = basis.dim
    coeffs = np.zeros((m, d_in, d_in), dtype=complex)
    op, ip = np.divmod(basis.p, d_in)
    oq, iq = np.divmod(basis.q, d_in)
    same = np.nonzero(op == oq)[0]
    np.add.at(coeffs, (same, ip[same], iq[same]), basis.alpha[same])
    np.add.at(coeffs, (same, iq[same], ip[same]), basis.beta[same])
    return coeffs


def diamond_program(delta, d_in: int, d_out: int, tolerance: float = 1e-9) -> PsdProgram:
    """LMI form with y = (t, Z): maximize −t s.t. tI − tr_out Z ⪰ 0, Z − J ⪰ 0, Z ⪰ 0."""
    ju = d_in * np.asarray(delta, dtype=complex)
    n = d_in * d_out
    basis = HermitianBasis(n)
    m = 1 + basis.dim
    coeffs = np.zeros((m, d_in, d_in), dtype=complex)
    coeffs[0] = -np.eye(d_in)
    coeffs[1:] = _partial_trace_out_coeffs(basis, d_in, d_out)
    blocks = [
        DenseBlock(np.zeros((d_in, d_in)), coeffs),
        HermitianBlock(-ju, offset=1, sign=-1.0, basis=basis),
        HermitianBlock(np.zeros((n, n)), offset=1, sign=-1.0, basis=basis),
    ]
    z0 = max(la.lambda_max(ju), 0.0) + 1.0
    y0 = np.zeros(m)
    y0[0] = d_out * z0 + 1.0
    y0[1:1 + n] = z0
    b = np.zeros(m)
    b[0] = -1.0
    x0 = [np.eye(d_in) / d_in, np.eye(n) / (2 * d_in), np.eye(n) / (2 * d_in)]
    return PsdProgram(b, blocks, y0, x0=x0, tolerance=tolerance)


def _probe_output(ju4: np.ndarray, m: np.ndarray) -> np.ndarray:
    d_out = ju4.shape[0]
    anc = m.shape[1]
    x = np.einsum("oipj,ia,jb->oapb", ju4, m, m.conj())
    return x.reshape(d_out * anc, d_out * anc)


def diamond_lower_bound(delta, d_in: int, d_out: int, restarts: int = 8, seed: int = 0,
                        iters: int = 200, ancilla: int | None = None, starts=None) -> float:
    """Largest ‖(Δ⊗id)(ψ)‖₁ found by alternating ascent over pure probes.

    Probes live on input ⊗ ancilla. With the default ancilla dimension d_in the maximally
    entangled probe is always the first start; with ``ancilla=1`` the result bounds the
    induced trace norm without stabilization. ``starts`` adds caller-chosen probe vectors.
    """
    delta = _check_delta(delta, d_in, d_out)
    if np.max(np.abs(delta)) == 0:
        return 0.0
    anc = d_in if ancilla is None else int(ancilla)
    ju4 = (d_in * delta).reshape(d_out, d_in, d_out, d_in)
    rng = np.random.default_rng(seed)
    probes = [np.asarray(v, dtype=complex).reshape(d_in, anc) for v in (starts or [])]
    if anc == d_in:
        probes.insert(0, np.eye(d_in, dtype=complex) / np.sqrt(d_in))
    for _ in range(restarts):
        g = rng.standard_normal((d_in, anc)) + 1j * rng.standard_normal((d_in, anc))
        probes.append(g / np.linalg.norm(g))
    best = 0.0
    for m in probes:
        m = m / np.linalg.norm(m)
        val = -1.0
        for _ in range(iters):
            x = _probe_output(ju4, m)
            w, v = np.linalg.eigh(la.hermitian_part(x))
            new_val = float(np.sum(np.abs(w)))
            if new_val <= val + 1e-13:
                val = max(val, new_val)
                break
            val = new_val
            sgn = (v * np.sign(w)) @ v.conj().T
            w4 = sgn.reshape(d_out, anc, d_out, anc)
            # quadratic form of the probe coefficients against the sign witness
            q = np.einsum("xbya,yixj->jbia", w4, ju4).reshape(d_in * anc, d_in * anc)
            _, qv = np.linalg.eigh(la.hermitian_part(q))
            m = qv[:, -1].reshape(d_in, anc)
        best = max(best, val)
    return best


def diamond_norm(delta, d_in: int, d_out: int, tolerance: float = 1e-9, restarts: int = 4,
                 seed: int = 0) -> DiamondResult:
    """Diamond norm of the map whose trace-one Choi operator is ``delta``.

    ``delta`` is typically ``J(N1) − J(N2)``. The reported value is the dual-feasible
    (upper) end of the bracket.
    """
    delta = _check_delta(delta, d_in, d_out)
    lower = diamond_lower_bound(delta, d_in, d_out, restarts=restarts, seed=seed)
    if np.max(np.abs(delta)) <= 1e-15:
        return DiamondResult(0.0, 0.0, 0.0, 0)
    require_solvable(d_in, d_out)
    res = solve_psd_program(diamond_program(delta, d_in, d_out, tolerance))
    value = -2.0 * res.dual_value
    return DiamondResult(value, float(2.0 * res.gap), lower, res.iterations)


def channel_distance(n1: QuantumChannel, n2: QuantumChannel, **kwargs) -> DiamondResult:
    """‖N1 − N2‖⋄ for channels of equal shape."""
    if (n1.d_in, n1.d_out) != (n2.d_in, n2.d_out):
        raise DimensionMismatch("channels have different shapes")
    return diamond_norm(n1.choi - n2.choi, n1.d_in, n1.d_out, **kwargs)

"""Distinguishability functionals: max-relative entropy, trace distance and entangled fractions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .errors import BadEpsilon, DimensionMismatch, NotBipartiteSquare, SigmaSingular
from .quantum import as_operator, haar_unitary

SUPPORT_TOL = 1e-9


@dataclass(frozen=True)
class SmoothBounds:
    lower: float
    upper: float
    epsilon: float


def _pair(rho, sigma):
    a, b = as_operator(rho), as_operator(sigma)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return a, b


def d_max_ratio(rho, sigma) -> float:
    """min{λ : ρ ⪯ λσ}, or ``math.inf`` when supp ρ is not inside supp σ."""
    a, b = _pair(rho, sigma)
    w, v = np.linalg.eigh(la.hermitian_part(b))
    cut = la.TOL.kernel_rel * max(float(w[-1]), 0.0)
    ker = v[:, w <= cut]
    if ker.shape[1] and np.trace(ker.conj().T @ a @ ker).real > SUPPORT_TOL:
        return math.inf
    vs = v[:, w > cut] / np.sqrt(w[w > cut])
    return la.lambda_max(vs.conj().T @ a @ vs)


def d_max(rho, sigma) -> float:
    """Max-relative entropy in bits; ``math.inf`` on a support violation."""
    r = d_max_ratio(rho, sigma)
    if math.isinf(r):
        return math.inf
    return math.log2(r) if r > 0 else -math.inf


def trace_distance(rho, sigma) -> float:
    a, b = _pair(rho, sigma)
    return 0.5 * la.trace_norm(a - b)


def _local_dim(a: np.ndarray) -> int:
    n = a.shape[0]
    d = int(round(math.sqrt(n)))
    if d * d != n:
        raise NotBipartiteSquare(f"dimension {n} is not a square d x d")
    return d


def singlet_fraction(rho) -> float:
    """<Ψ+|ρ|Ψ+> for a d x d bipartite state."""
    a = as_operator(rho)
    d = _local_dim(a)
    psi = la.max_entangled(d)
    return float(np.real(psi.conj() @ a @ psi))


def _fef_ascent(r4: np.ndarray, u: np.ndarray, iters: int, tol: float) -> tuple[float, np.ndarray]:
    # F(U) = vec(U)^† ρ vec(U) / d is a Hermitian form on vec(U); polar steps increase it
    d = u.shape[0]
    rm = r4.reshape(d * d, d * d)
    val = -1.0
    for _ in range(iters):
        g = (rm @ u.reshape(-1)).reshape(d, d)
        new_u = la.polar_unitary(g)
        x = new_u.reshape(-1)
        new_val = float(np.real(x.conj() @ rm @ x)) / d
        u = new_u
        if new_val - val <= tol:
            val = max(val, new_val)
            break
        val = new_val
    return val, u


def fully_entangled_fraction(rho, restarts: int = 16, seed: int = 0, iters: int = 500) -> float:
    """Max over U of <Ψ+|(U⊗I)^† ρ (U⊗I)|Ψ+> by multi-start polar ascent.

    The identity start is always included, so the result is at least the singlet fraction.
    """
    a = as_operator(rho)
    d = _local_dim(a)
    r4 = a.reshape(d, d, d, d)
    rng = np.random.default_rng(seed)
    best = -1.0
    starts = [np.eye(d, dtype=complex)] + [haar_unitary(d, rng) for _ in range(max(restarts, 0))]
    for u0 in starts:
        val, _ = _fef_ascent(r4, u0, iters, 1e-14)
        best = max(best, val)
    return max(best, singlet_fraction(a))


def p_min(sigma) -> float:
    return la.lambda_min(as_operator(sigma))


def d_max_continuity_gap(rho, rho_prime, sigma) -> tuple[float, float]:
    """Both sides of |2^{D(ρ'‖σ)} − 2^{D(ρ‖σ)}| ≤ ‖ρ − ρ'‖₁ / p_min(σ)."""
    a, b = _pair(rho, rho_prime)
    s = as_operator(sigma)
    pm = p_min(s)
    if pm <= 1e-12:
        raise SigmaSingular(f"sigma has minimum eigenvalue {pm:.3e}")
    lhs = abs(d_max_ratio(b, s) - d_max_ratio(a, s))
    bound = la.trace_norm(a - b) / pm
    return lhs, bound


def smooth_d_max_bounds(rho, sigma, eps: float) -> SmoothBounds:
    """Bracket of the ε-smoothed max-relative entropy from the continuity bound.

    The lower end is ``log2(2^D − 2ε/p_min(σ))`` when that argument is positive and
    ``-inf`` otherwise.
    """
    if not 0.0 <= eps < 1.0:
        raise BadEpsilon(f"eps={eps} outside [0, 1)")
    s = as_operator(sigma)
    pm = p_min(s)
    if pm <= 1e-12:
        raise SigmaSingular(f"sigma has minimum eigenvalue {pm:.3e}")
    ratio = d_max_ratio(rho, s)
    upper = math.log2(ratio)
    arg = ratio - 2.0 * eps / pm
    lower = upper if eps == 0 else (math.log2(arg) if arg > 0 else -math.inf)
    return SmoothBounds(lower=lower, upper=upper, epsilon=eps)

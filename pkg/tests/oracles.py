"""Independent reference computations used only by the tests.

Each oracle takes a different route from the library code it checks: brute-force index
loops, feasibility bisection, exhaustive enumeration or closed forms.
"""
import itertools
import math

import numpy as np


def partial_trace_loops(a, da, db, keep):
    """Four-index contraction written out with explicit loops."""
    a = np.asarray(a)
    if keep == 0:
        out = np.zeros((da, da), dtype=complex)
        for i, j, k in itertools.product(range(da), range(da), range(db)):
            out[i, j] += a[i * db + k, j * db + k]
        return out
    out = np.zeros((db, db), dtype=complex)
    for i, j, k in itertools.product(range(db), range(db), range(da)):
        out[i, j] += a[k * db + i, k * db + j]
    return out


def psd_feasible(m, tol=0.0):
    return np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] >= -tol


def min_lambda_bisection(rho, sigma, hi=1e6, iters=200):
    """min{λ : λσ − ρ ⪰ 0} by bisection on PSD feasibility."""
    lo = 0.0
    while not psd_feasible(hi * sigma - rho):
        hi *= 2
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if psd_feasible(mid * sigma - rho):
            hi = mid
        else:
            lo = mid
    return hi


def choi_apply(choi, rho, d_in, d_out):
    """N(ρ) = d_in · tr_in[J (I ⊗ ρ^T)] with J ordered output ⊗ input."""
    big = choi @ np.kron(np.eye(d_out), np.asarray(rho).T)
    return d_in * partial_trace_loops(big, d_out, d_in, keep=0)


def numerical_range_distance(w_unitary):
    """Distance from 0 to the numerical range of a unitary: the hull of eigenvalues on the circle.

    If the eigen-angles fit in an arc of span θ < π, the nearest point is the chord midpoint at
    distance cos(θ/2); otherwise 0 lies in the hull.
    """
    ang = np.sort(np.mod(np.angle(np.linalg.eigvals(w_unitary)), 2 * np.pi))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
    span = 2 * np.pi - np.max(gaps)
    return math.cos(span / 2) if span < np.pi else 0.0


def unitary_diamond_distance(u, v):
    """‖U·U† − V·V†‖⋄ = 2√(1 − ν²), ν the distance from 0 to the numerical range of U†V."""
    nu = numerical_range_distance(u.conj().T @ v)
    return 2.0 * math.sqrt(max(0.0, 1.0 - nu ** 2))


def esc_enumeration(energies, m_max, tol=1e-9):
    """Energy subspace condition by comparing every pair of occupation vectors."""
    d = len(energies)
    for m in range(1, m_max + 1):
        vecs = [c for c in itertools.product(range(m + 1), repeat=d) if sum(c) == m]
        totals = [sum(n * e for n, e in zip(c, energies)) for c in vecs]
        for a, b in itertools.combinations(range(len(vecs)), 2):
            if abs(totals[a] - totals[b]) <= tol:
                return False
    return True


def haar_twirl_mc(x, d, samples, seed):
    """Monte-Carlo estimate of E_U (U⊗U*) X (U⊗U*)†."""
    from scipy.stats import unitary_group
    us = unitary_group.rvs(d, size=samples, random_state=seed)
    acc = np.zeros_like(x, dtype=complex)
    for u in us:
        w = np.kron(u, u.conj())
        acc += w @ x @ w.conj().T
    return acc / samples


def depolarizing_identity_diamond(p, d):
    """‖id − D_p‖⋄ for D_p = p·id + (1−p)Φ_{I/d}: probe value on Ψ+, exact by covariance."""
    return 2.0 * (1 - p) * (1 - 1.0 / d ** 2)


def trace_norm(a):
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (a + a.conj().T)))))

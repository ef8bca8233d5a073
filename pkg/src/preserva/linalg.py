"""Dense complex linear algebra kernel.

All routines take and return plain ``numpy`` arrays and never mutate their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
from scipy import linalg as sla

from .errors import BadParameter, DimensionMismatch, NotHermitian, NotPSD, NotSquare


@dataclass(frozen=True)
class Tolerances:
    """Tolerance ladder shared by validators, assertions and solvers."""

    structural: float = 1e-10
    derived: float = 1e-9
    optimization: float = 1e-7
    kernel_rel: float = 1e-12

    def as_dict(self) -> dict:
        return {
            "structural": self.structural,
            "derived": self.derived,
            "optimization": self.optimization,
            "kernel_rel": self.kernel_rel,
        }


TOL = Tolerances()


@dataclass(frozen=True)
class EigDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(a) -> np.ndarray:
    """Coerce to a finite 2-d complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise BadParameter("matrix has non-finite entries")
    return m


def _require_square(a: np.ndarray) -> None:
    if a.shape[0] != a.shape[1]:
        raise NotSquare(f"matrix of shape {a.shape} is not square")


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(a).T


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(a).T)


def is_hermitian(a, tol: float = TOL.structural) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return np.linalg.norm(a - a.conj().T) <= tol * max(1.0, np.linalg.norm(a))


def _fix_phases(v: np.ndarray) -> np.ndarray:
    # make the first non-negligible component of each column real positive
    mags = np.abs(v)
    cut = 1e-12 * np.max(mags, axis=0, keepdims=True)
    first = np.argmax(mags > cut, axis=0)
    lead = v[first, np.arange(v.shape[1])]
    return v * (np.abs(lead) / lead)


def herm_eig(a) -> EigDecomposition:
    """Eigendecomposition of a Hermitian matrix.

    Eigenvalues ascend; each eigenvector has its first nonzero component real positive.
    """
    a = as_matrix(a)
    _require_square(a)
    if not is_hermitian(a):
        raise NotHermitian("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(hermitian_part(a))
    return EigDecomposition(w, _fix_phases(v))


def eigvalsh(a) -> np.ndarray:
    """Ascending eigenvalues of the Hermitian part, without symmetry checks."""
    return np.linalg.eigvalsh(hermitian_part(np.asarray(a, dtype=complex)))


def lambda_max(a) -> float:
    return float(eigvalsh(a)[-1])


def lambda_min(a) -> float:
    return float(eigvalsh(a)[0])


def kron(*ops) -> np.ndarray:
    if not ops:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, [np.asarray(o, dtype=complex) for o in ops])


def partial_trace(a, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every subsystem whose index is not in ``keep``.

    Kept subsystems stay in their original order.
    """
    a = np.asarray(a, dtype=complex)
    dims = [int(d) for d in dims]
    n = int(np.prod(dims))
    if a.ndim != 2 or a.shape != (n, n):
        raise DimensionMismatch(f"dims {dims} do not match matrix shape {a.shape}")
    if isinstance(keep, (int, np.integer)):
        keep = [int(keep)]
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionMismatch(f"keep indices {keep} out of range for {len(dims)} subsystems")
    k = len(dims)
    t = a.reshape(dims + dims)
    traced = [i for i in range(k) if i not in keep]
    # einsum subscripts: row indices 0..k-1, column indices k..2k-1, traced columns reuse row labels
    rows = list(range(k))
    cols = [i if i in traced else k + i for i in range(k)]
    out = list(keep) + [k + i for i in keep]
    res = np.einsum(t, rows + cols, out)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return res.reshape(dk, dk)


def partial_transpose(a, dims: Sequence[int], sys) -> np.ndarray:
    """Transpose the listed subsystems."""
    a = np.asarray(a, dtype=complex)
    dims = [int(d) for d in dims]
    n = int(np.prod(dims))
    if a.shape != (n, n):
        raise DimensionMismatch(f"dims {dims} do not match matrix shape {a.shape}")
    if isinstance(sys, (int, np.integer)):
        sys = [int(sys)]
    k = len(dims)
    perm = list(range(2 * k))
    for s in sys:
        perm[s], perm[k + s] = k + s, s
    return a.reshape(dims + dims).transpose(perm).reshape(n, n)


def permute_subsystems(a, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of an operator; new factor j is old factor ``order[j]``."""
    a = np.asarray(a, dtype=complex)
    dims = [int(d) for d in dims]
    k = len(dims)
    n = int(np.prod(dims))
    order = list(order)
    perm = order + [k + o for o in order]
    return a.reshape(dims + dims).transpose(perm).reshape(n, n)


def trace_norm(a) -> float:
    """Sum of singular values; for Hermitian input the sum of |eigenvalues|."""
    a = as_matrix(a)
    _require_square(a)
    if is_hermitian(a, 1e-13):
        return float(np.sum(np.abs(eigvalsh(a))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def inv_sqrt_on_support(a, tol: float | None = None) -> np.ndarray:
    """Pseudo-inverse square root of a PSD matrix.

    :param a: PSD matrix
    :param tol: eigenvalues at or below ``tol`` are treated as kernel; defaults to
        ``1e-12 * lambda_max``
    :returns: B with ``B A B`` the projector onto the support of A
    """
    a = as_matrix(a)
    _require_square(a)
    w, v = np.linalg.eigh(hermitian_part(a))
    top = max(float(w[-1]), 0.0)
    cut = TOL.kernel_rel * top if tol is None else tol
    floor = max(cut, TOL.structural * max(1.0, top))
    if w[0] < -floor:
        raise NotPSD(f"minimum eigenvalue {w[0]:.3e} below -{floor:.1e}")
    inv = np.zeros_like(w)
    mask = w > cut
    inv[mask] = 1.0 / np.sqrt(w[mask])
    return (v * inv) @ v.conj().T


def sqrtm_psd(a) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(np.asarray(a, dtype=complex)))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def support_projector(a, tol: float | None = None) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(np.asarray(a, dtype=complex)))
    cut = TOL.kernel_rel * max(float(w[-1]), 0.0) if tol is None else tol
    vs = v[:, w > cut]
    return vs @ vs.conj().T


def polar_unitary(a) -> np.ndarray:
    """Unitary factor of the polar decomposition."""
    u, _ = sla.polar(np.asarray(a, dtype=complex))
    return u


def ket(index: int, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[index] = 1.0
    return v


def projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def max_entangled(d: int) -> np.ndarray:
    """|Psi+> = sum_i |ii> / sqrt(d)."""
    return np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)


def matrix_to_json(a) -> dict:
    a = as_matrix(a)
    flat = a.reshape(-1)
    return {
        "rows": int(a.shape[0]),
        "cols": int(a.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        rows, cols, entries = int(obj["rows"]), int(obj["cols"]), obj["entries"]
    except (KeyError, TypeError) as exc:
        raise DimensionMismatch(f"malformed matrix literal: {exc}") from exc
    if rows <= 0 or cols <= 0 or len(entries) != rows * cols:
        raise DimensionMismatch(f"matrix literal has {len(entries)} entries for {rows}x{cols}")
    arr = np.array([complex(float(e[0]), float(e[1])) for e in entries], dtype=complex)
    return as_matrix(arr.reshape(rows, cols))

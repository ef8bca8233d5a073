"""Primal-dual interior-point solver for small complex semidefinite programs.

Programs are written in linear-matrix-inequality form::

    maximize    b·y
    subject to  S_k = C_k − A_k(y) ⪰ 0        (Hermitian blocks k = 1..K)

with dual (in the solver's terms, primal)::

    minimize    Σ_k <C_k, X_k>
    subject to  Σ_k A_k*(X_k) = b,  X_k ⪰ 0.

The iteration is an infeasible-start path-following method with the HKM search
direction and Mehrotra's predictor-corrector. The LMI iterate ``S`` is always
recomputed as ``C − A(y)``, so a strictly feasible starting ``y`` stays feasible and
every reported ``b·y`` is a certified bound.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg as sla

from .errors import BadParameter, DimensionMismatch, Infeasible, SolverDivergence

log = logging.getLogger(__name__)


class HermitianBasis:
    """Orthonormal real basis of n x n Hermitian matrices.

    Coordinates are ordered: diagonal entries, then ``√2·Re Z_pq`` for p < q, then
    ``√2·Im Z_pq`` for p < q. Element ``a`` is ``alpha_a E_{p q} + beta_a E_{q p}``.
    """

    def __init__(self, n: int):
        self.n = n
        iu, ju = np.triu_indices(n, 1)
        diag = np.arange(n)
        self.p = np.concatenate([diag, iu, iu])
        self.q = np.concatenate([diag, ju, ju])
        r = 1.0 / np.sqrt(2.0)
        npairs = iu.size
        self.alpha = np.concatenate([np.ones(n), np.full(npairs, r), np.full(npairs, 1j * r)]).astype(complex)
        self.beta = np.concatenate([np.zeros(n), np.full(npairs, r), np.full(npairs, -1j * r)]).astype(complex)
        self.dim = n * n
        self._iu, self._ju = iu, ju

    def coords(self, z: np.ndarray) -> np.ndarray:
        """Coordinates Re tr(B_a Z) of a Hermitian matrix."""
        s2 = np.sqrt(2.0)
        off = z[self._iu, self._ju]
        return np.concatenate([np.real(np.diag(z)), s2 * off.real, s2 * off.imag])

    def matrix(self, c: np.ndarray) -> np.ndarray:
        n = self.n
        npairs = self._iu.size
        z = np.zeros((n, n), dtype=complex)
        z[np.arange(n), np.arange(n)] = c[:n]
        off = (c[n:n + npairs] + 1j * c[n + npairs:]) / np.sqrt(2.0)
        z[self._iu, self._ju] = off
        z[self._ju, self._iu] = off.conj()
        return z

    def element(self, a: int) -> np.ndarray:
        e = np.zeros((self.n, self.n), dtype=complex)
        e[self.p[a], self.q[a]] += self.alpha[a]
        e[self.q[a], self.p[a]] += self.beta[a]
        return e


class DenseBlock:
    """LMI block ``C − Σ_i y_i A_i`` with explicitly stored coefficients ``A_i``."""

    def __init__(self, constant, coeffs):
        self.constant = np.asarray(constant, dtype=complex)
        coeffs = np.asarray(coeffs, dtype=complex)
        self.size = self.constant.shape[0]
        self.nvars = coeffs.shape[0]
        # rows that never touch this block are skipped in every product
        self.active = np.nonzero(np.any(coeffs.reshape(self.nvars, -1) != 0, axis=1))[0]
        self.coeffs = coeffs[self.active]

    def op(self, y: np.ndarray) -> np.ndarray:
        return np.tensordot(y[self.active], self.coeffs, axes=1)

    def adj(self, x: np.ndarray, out: np.ndarray) -> None:
        out[self.active] += np.real(np.einsum("kab,ba->k", self.coeffs, x))

    def schur(self, x: np.ndarray, s_inv: np.ndarray, out: np.ndarray) -> None:
        ax = self.coeffs @ x
        as_ = self.coeffs @ s_inv
        h = np.real(np.einsum("iab,jba->ij", ax, as_))
        out[np.ix_(self.active, self.active)] += h


class HermitianBlock:
    """LMI block ``C − sign·Z`` where Z is a full Hermitian matrix variable.

    Z occupies ``y[offset : offset + n²]`` in :class:`HermitianBasis` coordinates.
    """

    def __init__(self, constant, offset: int, sign: float = -1.0, basis: HermitianBasis | None = None,
                 chunk: int = 512):
        self.constant = np.asarray(constant, dtype=complex)
        self.size = self.constant.shape[0]
        self.basis = basis or HermitianBasis(self.size)
        self.offset = offset
        self.sign = float(sign)
        self.chunk = chunk

    @property
    def sl(self) -> slice:
        return slice(self.offset, self.offset + self.basis.dim)

    def op(self, y: np.ndarray) -> np.ndarray:
        return self.sign * self.basis.matrix(y[self.sl])

    def adj(self, x: np.ndarray, out: np.ndarray) -> None:
        out[self.sl] += self.sign * self.basis.coords(x)

    def schur(self, x: np.ndarray, s_inv: np.ndarray, out: np.ndarray) -> None:
        # H[a,b] = Re tr(B_a X B_b S^{-1}) expanded over the two matrix units of each B
        b = self.basis
        st = s_inv.T
        p, q, al, be = b.p, b.q, b.alpha, b.beta
        m = b.dim
        o = self.offset
        for start in range(0, m, self.chunk):
            r = slice(start, min(start + self.chunk, m))
            pa, qa, aa, ba = p[r], q[r], al[r], be[r]
            acc = (aa[:, None] * al[None, :]) * x[np.ix_(qa, p)] * st[np.ix_(pa, q)]
            acc += (aa[:, None] * be[None, :]) * x[np.ix_(qa, q)] * st[np.ix_(pa, p)]
            acc += (ba[:, None] * al[None, :]) * x[np.ix_(pa, p)] * st[np.ix_(qa, q)]
            acc += (ba[:, None] * be[None, :]) * x[np.ix_(pa, q)] * st[np.ix_(qa, p)]
            out[o + r.start:o + r.stop, o:o + m] += acc.real


@dataclass
class PsdProgram:
    """maximize b·y subject to C_k − A_k(y) ⪰ 0.

    :param objective: the vector b
    :param blocks: LMI blocks exposing ``constant``, ``op``, ``adj`` and ``schur``
    :param y0: strictly feasible starting point
    :param x0: optional positive definite starting point for the multiplier blocks
    """

    objective: np.ndarray
    blocks: Sequence
    y0: np.ndarray
    x0: Sequence[np.ndarray] | None = None
    tolerance: float = 1e-9
    max_iter: int = 80

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.y0 = np.asarray(self.y0, dtype=float)
        if self.tolerance <= 0:
            raise BadParameter("tolerance must be positive")
        if self.y0.shape != self.objective.shape:
            raise DimensionMismatch("y0 and objective have different lengths")
        for blk in self.blocks:
            if blk.constant.shape != (blk.size, blk.size):
                raise DimensionMismatch("block constant has the wrong shape")


@dataclass
class SdpResult:
    value: float
    primal_value: float
    dual_value: float
    y: np.ndarray
    x: list
    s: list
    gap: float
    primal_infeasibility: float
    iterations: int
    history: list = field(default_factory=list, repr=False)


def _lmi(prog: PsdProgram, y: np.ndarray) -> list:
    return [blk.constant - blk.op(y) for blk in prog.blocks]


def _adjoint(prog: PsdProgram, xs: Sequence[np.ndarray]) -> np.ndarray:
    out = np.zeros_like(prog.objective)
    for blk, x in zip(prog.blocks, xs):
        blk.adj(x, out)
    return out


def _herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest α with X + α dX ⪰ 0 (X positive definite)."""
    lo = np.linalg.cholesky(x)
    li = sla.solve_triangular(lo, np.eye(x.shape[0]), lower=True)
    w = np.linalg.eigvalsh(_herm(li @ dx @ li.conj().T))
    return np.inf if w[0] >= 0 else -1.0 / w[0]


def _inv_pd(a: np.ndarray) -> np.ndarray:
    c = sla.cho_factor(_herm(a), lower=True)
    return _herm(sla.cho_solve(c, np.eye(a.shape[0], dtype=complex)))


def _is_pd(a: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(_herm(a))
        return True
    except np.linalg.LinAlgError:
        return False


def solve_psd_program(prog: PsdProgram) -> SdpResult:
    """Solve an LMI-form program; raises :class:`SolverDivergence` on stalls."""
    b = prog.objective
    m = b.size
    y = prog.y0.copy()
    ss = _lmi(prog, y)
    if not all(_is_pd(s) for s in ss):
        raise Infeasible("starting point is not strictly feasible")
    if prog.x0 is not None:
        xs = [_herm(np.asarray(x, dtype=complex)) for x in prog.x0]
    else:
        xs = [np.eye(blk.size, dtype=complex) for blk in prog.blocks]
    ntot = sum(blk.size for blk in prog.blocks)
    bnorm = 1.0 + np.linalg.norm(b)
    history = []
    # once the gap closes, primal residual can stall at rounding level; keep the
    # last such iterate so a later breakdown still returns a certified dual value
    pinf_relaxed = max(100 * prog.tolerance, 1e-7)
    best = None
    it = 0
    for it in range(1, prog.max_iter + 1):
        try:
            s_inv = [_inv_pd(s) for s in ss]
        except np.linalg.LinAlgError:
            break
        mu = sum(np.real(np.vdot(x, s)) for x, s in zip(xs, ss)) / ntot
        rp = b - _adjoint(prog, xs)
        pobj = sum(np.real(np.vdot(blk.constant, x)) for blk, x in zip(prog.blocks, xs))
        dobj = float(b @ y)
        gap = abs(pobj - dobj)
        pinf = np.linalg.norm(rp) / bnorm
        history.append((pobj, dobj, pinf, mu))
        log.debug("iter %d pobj %.12g dobj %.12g pinf %.2e mu %.2e", it, pobj, dobj, pinf, mu)
        scale = 1 + abs(pobj) + abs(dobj)
        gap_ok = gap <= prog.tolerance * scale
        if gap_ok and pinf <= prog.tolerance:
            return SdpResult(dobj, pobj, dobj, y, xs, ss, gap, pinf, it, history)
        if gap <= pinf_relaxed * scale and pinf <= pinf_relaxed and (
                best is None or gap <= best.gap):
            best = SdpResult(dobj, pobj, dobj, y, xs, ss, gap, pinf, it, history)
            if gap_ok and mu <= 1e-13 * (1 + abs(dobj)):
                return best

        mat = np.zeros((m, m))
        for blk, x, si in zip(prog.blocks, xs, s_inv):
            blk.schur(x, si, mat)
        mat = 0.5 * (mat + mat.T)
        try:
            fac = sla.cho_factor(mat, lower=True)
        except np.linalg.LinAlgError:
            mat[np.diag_indices(m)] += 1e-13 * max(1.0, np.max(np.diag(mat)))
            try:
                fac = sla.cho_factor(mat, lower=True)
            except np.linalg.LinAlgError:
                break

        def direction(rcs):
            dy = sla.cho_solve(fac, rp - _adjoint(prog, rcs))
            dss = [-blk.op(dy) for blk in prog.blocks]
            dxs = [rc - _herm(x @ ds @ si) for rc, x, ds, si in zip(rcs, xs, dss, s_inv)]
            return dy, dxs, dss

        def steps(dxs, dss, frac):
            ap = min([_max_step(x, dx) for x, dx in zip(xs, dxs)] + [np.inf])
            ad = min([_max_step(s, ds) for s, ds in zip(ss, dss)] + [np.inf])
            return min(1.0, frac * ap), min(1.0, frac * ad)

        try:
            dy_a, dx_a, ds_a = direction([-x for x in xs])
            ap, ad = steps(dx_a, ds_a, 1.0)
            mu_aff = sum(np.real(np.vdot(x + ap * dx, s + ad * ds))
                         for x, dx, s, ds in zip(xs, dx_a, ss, ds_a)) / ntot
            sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3
            rcs = [sigma * mu * si - x - _herm(dx @ ds @ si)
                   for x, si, dx, ds in zip(xs, s_inv, dx_a, ds_a)]
            dy, dxs, dss = direction(rcs)
            frac = 0.98 if it > 3 else 0.9
            ap, ad = steps(dxs, dss, frac)
        except np.linalg.LinAlgError:
            break
        xs = [_herm(x + ap * dx) for x, dx in zip(xs, dxs)]
        y = y + ad * dy
        ss = _lmi(prog, y)
        if not all(_is_pd(s) for s in ss):
            # rounding pushed S to the boundary; back off the dual step
            y = y - 0.5 * ad * dy
            ss = _lmi(prog, y)
    if best is not None:
        return best
    pobj = sum(np.real(np.vdot(blk.constant, x)) for blk, x in zip(prog.blocks, xs))
    dobj = float(b @ y)
    raise SolverDivergence(
        f"no convergence after {it} iterations (pobj {pobj:.10g}, dobj {dobj:.10g})",
        bracket=(min(pobj, dobj), max(pobj, dobj)),
    )

"""Quantum states and CPTP channels.

Choi convention: ``J(N) = (N ⊗ id)(|Ψ+><Ψ+|)`` with trace one, ordered as
output ⊗ reference. A Kraus operator ``K`` contributes ``vec(K) vec(K)^† / d_in``
where ``vec`` is the row-major flatten.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from . import linalg as la
from .errors import (
    BadParameter,
    BadWeights,
    DimensionMismatch,
    NotCompletelyPositive,
    NotDensityMatrix,
    NotTracePreserving,
)

CHANNEL_TOL = 1e-9


def _dims_tuple(dims, n: int) -> tuple:
    if dims is None:
        return (n,)
    if isinstance(dims, (int, np.integer)):
        dims = (int(dims),)
    dims = tuple(int(d) for d in dims)
    if any(d <= 0 for d in dims):
        raise DimensionMismatch(f"dimensions must be positive, got {dims}")
    if int(np.prod(dims)) != n:
        raise DimensionMismatch(f"dims {dims} do not multiply to {n}")
    return dims


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DensityMatrix:
    """Unit-trace PSD operator with a declared tensor factorization."""

    op: np.ndarray
    dims: tuple = ()
    tol: float = field(default=la.TOL.structural, repr=False, compare=False)

    def __post_init__(self):
        op = la.as_matrix(self.op)
        if op.shape[0] != op.shape[1]:
            raise NotDensityMatrix(f"shape {op.shape} is not square")
        dims = _dims_tuple(self.dims or None, op.shape[0])
        if not la.is_hermitian(op, self.tol):
            raise NotDensityMatrix("operator is not Hermitian")
        op = la.hermitian_part(op)
        tr = np.trace(op).real
        if abs(tr - 1.0) > self.tol:
            raise NotDensityMatrix(f"trace {tr:.12g} differs from 1")
        lmin = la.lambda_min(op)
        if lmin < -self.tol:
            raise NotDensityMatrix(f"minimum eigenvalue {lmin:.3e} is negative")
        object.__setattr__(self, "op", _frozen(op))
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.op.shape[0]


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    dims: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if abs(np.linalg.norm(v) - 1.0) > la.TOL.structural:
            raise NotDensityMatrix("amplitudes are not unit norm")
        object.__setattr__(self, "amplitudes", _frozen(v))
        object.__setattr__(self, "dims", _dims_tuple(self.dims or None, v.size))

    def density(self) -> DensityMatrix:
        return DensityMatrix(la.projector(self.amplitudes), self.dims)


def as_operator(x) -> np.ndarray:
    """Matrix view of a DensityMatrix, PureState or array."""
    if isinstance(x, DensityMatrix):
        return x.op
    if isinstance(x, PureState):
        return la.projector(x.amplitudes)
    return np.asarray(x, dtype=complex)


def _vec_outer_sum(kraus: Sequence[np.ndarray]) -> np.ndarray:
    vecs = np.stack([k.reshape(-1) for k in kraus], axis=1)
    return vecs @ vecs.conj().T


class QuantumChannel:
    """CPTP map held by its Choi operator, with Kraus operators derived on demand.

    Instances are treated as immutable; the stored arrays are read-only.
    """

    def __init__(self, choi, in_dims, out_dims, kraus=None, validate: bool = True,
                 tol: float = CHANNEL_TOL):
        choi = np.asarray(choi, dtype=complex)
        self.in_dims = _dims_tuple(in_dims, int(np.prod(in_dims)))
        self.out_dims = _dims_tuple(out_dims, int(np.prod(out_dims)))
        self.d_in = int(np.prod(self.in_dims))
        self.d_out = int(np.prod(self.out_dims))
        n = self.d_in * self.d_out
        if choi.shape != (n, n):
            raise DimensionMismatch(f"Choi shape {choi.shape} does not match {self.d_out}x{self.d_in}")
        self.choi = _frozen(la.hermitian_part(choi))
        self._kraus = None if kraus is None else tuple(_frozen(k) for k in kraus)
        if validate:
            self.validate(tol)

    @classmethod
    def from_kraus(cls, kraus, in_dims=None, out_dims=None, validate: bool = True):
        ks = [la.as_matrix(k) for k in kraus]
        if not ks:
            raise BadParameter("empty Kraus set")
        shape = ks[0].shape
        if any(k.shape != shape for k in ks):
            raise DimensionMismatch("Kraus operators have inconsistent shapes")
        d_out, d_in = shape
        choi = _vec_outer_sum(ks) / d_in
        return cls(choi, in_dims if in_dims is not None else (d_in,),
                   out_dims if out_dims is not None else (d_out,), kraus=ks, validate=validate)

    @classmethod
    def from_choi(cls, choi, in_dims, out_dims, validate: bool = True):
        return cls(choi, in_dims, out_dims, validate=validate)

    def validate(self, tol: float = CHANNEL_TOL) -> None:
        w = la.eigvalsh(self.choi)
        if w[0] < -tol:
            raise NotCompletelyPositive(f"Choi eigenvalue {w[0]:.3e} is negative")
        marg = la.partial_trace(self.choi, (self.d_out, self.d_in), [1])
        err = np.max(np.abs(marg - np.eye(self.d_in) / self.d_in)) * self.d_in
        if err > tol:
            raise NotTracePreserving(f"sum K^dag K deviates from identity by {err:.3e}")

    @property
    def kraus(self) -> tuple:
        if self._kraus is None:
            w, v = np.linalg.eigh(self.d_in * self.choi)
            keep = w > la.TOL.kernel_rel * max(w[-1], 1.0)
            ks = [np.sqrt(w[j]) * v[:, j].reshape(self.d_out, self.d_in)
                  for j in np.nonzero(keep)[0][::-1]]
            self._kraus = tuple(_frozen(k) for k in ks)
        return self._kraus

    def choi4(self) -> np.ndarray:
        """Choi reshaped to indices (o, i, o', i')."""
        return self.choi.reshape(self.d_out, self.d_in, self.d_out, self.d_in)

    def __call__(self, rho) -> np.ndarray:
        rho = as_operator(rho)
        if rho.shape != (self.d_in, self.d_in):
            raise DimensionMismatch(f"input of shape {rho.shape} for d_in={self.d_in}")
        return self.d_in * np.einsum("oipj,ij->op", self.choi4(), rho)

    def adjoint(self, x) -> np.ndarray:
        """Heisenberg-picture map N^dag(X) = sum_k K^dag X K."""
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.d_out, self.d_out):
            raise DimensionMismatch(f"operator of shape {x.shape} for d_out={self.d_out}")
        return self.d_in * np.einsum("oipj,po->ji", self.choi4(), x)

    def __repr__(self) -> str:
        return f"QuantumChannel(in_dims={self.in_dims}, out_dims={self.out_dims})"


def channel_from_kraus(kraus, in_dims=None, out_dims=None) -> QuantumChannel:
    return QuantumChannel.from_kraus(kraus, in_dims, out_dims)


def apply(channel: QuantumChannel, rho: DensityMatrix | np.ndarray) -> DensityMatrix:
    """Apply a channel to a state and validate the output."""
    out = channel(rho)
    return DensityMatrix(out, channel.out_dims, tol=max(la.TOL.structural, CHANNEL_TOL))


def apply_to_first(channel: QuantumChannel, x: np.ndarray, d_rest: int) -> np.ndarray:
    """(N ⊗ id)(X) for X on (input ⊗ rest)."""
    x4 = np.asarray(x, dtype=complex).reshape(channel.d_in, d_rest, channel.d_in, d_rest)
    out = channel.d_in * np.einsum("oipj,iajb->oapb", channel.choi4(), x4)
    n = channel.d_out * d_rest
    return out.reshape(n, n)


def tensor_channels(*channels: QuantumChannel) -> QuantumChannel:
    """Parallel composition N1 ⊗ N2 ⊗ ..."""
    if len(channels) == 1:
        return channels[0]
    n1, rest = channels[0], channels[1:]
    n2 = rest[0] if len(rest) == 1 else tensor_channels(*rest)
    j = la.kron(n1.choi, n2.choi)
    j = la.permute_subsystems(j, (n1.d_out, n1.d_in, n2.d_out, n2.d_in), (0, 2, 1, 3))
    return QuantumChannel(j, n1.in_dims + n2.in_dims, n1.out_dims + n2.out_dims, validate=False)


def compose_channels(n2: QuantumChannel, n1: QuantumChannel) -> QuantumChannel:
    """Sequential composition n2 ∘ n1 (n1 acts first)."""
    if n1.d_out != n2.d_in:
        raise DimensionMismatch(f"cannot compose: d_out={n1.d_out} vs d_in={n2.d_in}")
    j = apply_to_first(n2, n1.choi, n1.d_in)
    return QuantumChannel(j, n1.in_dims, n2.out_dims, validate=False)


def compose(*channels: QuantumChannel) -> QuantumChannel:
    """compose(A, B, C) = A ∘ B ∘ C."""
    out = channels[-1]
    for ch in reversed(channels[:-1]):
        out = compose_channels(ch, out)
    return out


def convex_mix(channels: Sequence[QuantumChannel], weights) -> QuantumChannel:
    w = np.asarray(weights, dtype=float)
    if len(channels) == 0 or w.shape != (len(channels),):
        raise BadWeights("need one weight per channel")
    if np.any(w < 0) or abs(w.sum() - 1.0) > la.TOL.structural:
        raise BadWeights(f"weights {w} are not a probability vector")
    first = channels[0]
    if any(c.choi.shape != first.choi.shape or c.d_in != first.d_in for c in channels):
        raise DimensionMismatch("channels in a mixture must share dimensions")
    j = sum(wi * c.choi for wi, c in zip(w, channels))
    return QuantumChannel(j, first.in_dims, first.out_dims, validate=False)


def identity(d) -> QuantumChannel:
    dims = _dims_tuple(d, int(np.prod(d)))
    n = int(np.prod(dims))
    return QuantumChannel.from_kraus([np.eye(n)], dims, dims, validate=False)


def unitary_channel(u, dims=None) -> QuantumChannel:
    u = la.as_matrix(u)
    return QuantumChannel.from_kraus([u], dims, dims)


def constant_channel(sigma, d_in, out_dims=None) -> QuantumChannel:
    """Replacement channel rho -> tr(rho) sigma."""
    s = as_operator(sigma)
    if out_dims is None:
        out_dims = sigma.dims if isinstance(sigma, DensityMatrix) else (s.shape[0],)
    in_dims = _dims_tuple(d_in, int(np.prod(d_in)))
    n_in = int(np.prod(in_dims))
    j = la.kron(s, np.eye(n_in) / n_in)
    return QuantumChannel(j, in_dims, out_dims)


def swap_unitary(d: int) -> np.ndarray:
    p = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            p[b * d + a, a * d + b] = 1.0
    return p


def swap_channel(d: int) -> QuantumChannel:
    """Exchange of two d-dimensional factors."""
    return QuantumChannel.from_kraus([swap_unitary(d)], (d, d), (d, d))


def partial_trace_channel(dims, keep) -> QuantumChannel:
    dims = tuple(int(x) for x in dims)
    keep = sorted(set([keep] if isinstance(keep, int) else keep))
    d_in = int(np.prod(dims))
    # Choi via action on matrix units: J = (1/d) sum_{ij} tr_rest(E_ij) ⊗ E_ij
    out_dims = tuple(dims[k] for k in keep) or (1,)
    d_out = int(np.prod(out_dims))
    j = np.zeros((d_out * d_in, d_out * d_in), dtype=complex)
    j4 = j.reshape(d_out, d_in, d_out, d_in)
    for i in range(d_in):
        e = np.zeros((d_in, d_in), dtype=complex)
        for k in range(d_in):
            e[:] = 0
            e[i, k] = 1.0
            j4[:, i, :, k] = la.partial_trace(e, dims, keep) / d_in if keep else np.trace(e) / d_in
    return QuantumChannel(j, dims, out_dims)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def haar_unitary(d: int, seed=None) -> np.ndarray:
    return unitary_group.rvs(d, random_state=_rng(seed)) if d > 1 else np.ones((1, 1), dtype=complex)


def haar_random_vector(d: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def haar_random_state(dims, seed=None) -> DensityMatrix:
    """Haar-random pure state as a density matrix."""
    dims = _dims_tuple(dims, int(np.prod(dims)))
    v = haar_random_vector(int(np.prod(dims)), seed)
    return DensityMatrix(la.projector(v), dims)


def random_density(dims, rank=None, seed=None) -> DensityMatrix:
    """Random mixed state from a Ginibre matrix (Hilbert-Schmidt measure at full rank)."""
    dims = _dims_tuple(dims, int(np.prod(dims)))
    d = int(np.prod(dims))
    rank = d if rank is None else int(rank)
    rng = _rng(seed)
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real, dims)


def random_channel(d_in: int, d_out: int, kraus_rank: int, seed=None) -> QuantumChannel:
    """Random channel from a Gaussian isometry dilation.

    :param kraus_rank: number of Kraus operators; needs ``d_out * kraus_rank >= d_in``
    """
    if kraus_rank <= 0 or d_in <= 0 or d_out <= 0:
        raise BadParameter("dimensions and Kraus rank must be positive")
    if d_out * kraus_rank < d_in:
        raise DimensionMismatch("d_out * kraus_rank must be at least d_in for an isometry")
    rng = _rng(seed)
    g = rng.standard_normal((d_out * kraus_rank, d_in)) + 1j * rng.standard_normal((d_out * kraus_rank, d_in))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    kraus = [q[k * d_out:(k + 1) * d_out] for k in range(kraus_rank)]
    return QuantumChannel.from_kraus(kraus)


def measure_prepare(povm, states, in_dims=None, out_dims=None) -> QuantumChannel:
    """rho -> sum_k tr(M_k rho) sigma_k."""
    povm = [np.asarray(m, dtype=complex) for m in povm]
    states = [as_operator(s) for s in states]
    d_in = povm[0].shape[0]
    j = sum(la.kron(s, m.T) for m, s in zip(povm, states)) / d_in
    return QuantumChannel(j, in_dims or (d_in,), out_dims or (states[0].shape[0],))


def channel_to_json(channel: QuantumChannel) -> dict:
    return {
        "d_in": channel.d_in,
        "d_out": channel.d_out,
        "in_dims": list(channel.in_dims),
        "out_dims": list(channel.out_dims),
        "kraus": [la.matrix_to_json(k) for k in channel.kraus],
    }


def channel_from_json(obj: dict) -> QuantumChannel:
    try:
        d_in, d_out = int(obj["d_in"]), int(obj["d_out"])
        kraus = [la.matrix_from_json(k) for k in obj["kraus"]]
    except (KeyError, TypeError) as exc:
        raise DimensionMismatch(f"malformed channel literal: {exc}") from exc
    if any(k.shape != (d_out, d_in) for k in kraus):
        raise DimensionMismatch("Kraus shapes disagree with d_in/d_out")
    return QuantumChannel.from_kraus(kraus, obj.get("in_dims") or (d_in,), obj.get("out_dims") or (d_out,))

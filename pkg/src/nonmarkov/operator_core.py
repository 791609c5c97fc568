"""Dense operator algebra shared by the dynamics and measure modules.

Vectorization convention
------------------------
Operators are vectorized by stacking columns, ``vec(rho) = rho.reshape(-1, order="F")``.
Under this convention the map ``rho -> A @ rho @ B`` has the superoperator
matrix ``kron(B.T, A)``. Every superoperator in the package uses it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

HERMITIAN_ATOL = 1e-12
TP_ATOL = 1e-10


class NonHermitianError(ValueError):
    """Raised when a matrix expected to be Hermitian is not, beyond float drift."""


def vec(op):
    """Column-stacking vectorization of a square operator."""
    return np.asarray(op).reshape(-1, order="F")


def unvec(v, dim=None):
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise ValueError(f"vector of length {v.size} is not a vectorized {dim}x{dim} operator")
    return v.reshape((dim, dim), order="F")


def hermitize(a, atol=HERMITIAN_ATOL):
    """Return ``(a + a^dagger) / 2``, refusing inputs that are far from Hermitian.

    The tolerance is relative to the largest entry of ``a`` (absolute for
    entries below one) so that large but well-formed matrices are not rejected
    for rounding noise.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    asym = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if asym > atol * scale:
        raise NonHermitianError(f"matrix is not Hermitian: max|A - A^dagger| = {asym:.3e}")
    return 0.5 * (a + a.conj().T)


def trace_norm(a, atol=HERMITIAN_ATOL):
    """Trace norm of a Hermitian matrix, the sum of absolute eigenvalues."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(hermitize(a, atol)))))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated quantum state: Hermitian, unit trace, positive semidefinite."""

    entries: np.ndarray

    def __post_init__(self):
        rho = np.array(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise NonHermitianError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > 1e-12:
            raise ValueError(f"density matrix trace is {np.trace(rho).real:.15g}, expected 1")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -1e-10:
            raise ValueError("density matrix has a negative eigenvalue")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @property
    def dim(self):
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True, eq=False)
class Superoperator:
    """A linear map on d x d operators stored as a d^2 x d^2 matrix.

    ``flags`` records numerical caveats picked up while building the map
    (for example a pseudoinverse in its history); downstream measures
    inherit them.
    """

    matrix: np.ndarray
    flags: tuple = field(default=())

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"superoperator matrix must be square, got shape {m.shape}")
        d = int(round(np.sqrt(m.shape[0])))
        if d * d != m.shape[0]:
            raise ValueError(f"superoperator size {m.shape[0]} is not a perfect square")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "flags", tuple(self.flags))

    @property
    def dim(self):
        return int(round(np.sqrt(self.matrix.shape[0])))

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim * dim))

    @classmethod
    def from_kraus(cls, kraus_ops):
        """Superoperator of ``rho -> sum_i K_i rho K_i^dagger``."""
        kraus_ops = [np.asarray(k, dtype=complex) for k in kraus_ops]
        return cls(sum(np.kron(k.conj(), k) for k in kraus_ops))

    @classmethod
    def from_function(cls, fn, dim):
        """Tabulate an arbitrary linear map by applying it to the matrix units."""
        out = np.empty((dim * dim, dim * dim), dtype=complex)
        for col in range(dim * dim):
            unit = np.zeros(dim * dim, dtype=complex)
            unit[col] = 1.0
            out[:, col] = vec(fn(unvec(unit, dim)))
        return cls(out)

    def apply(self, rho):
        rho = np.asarray(rho)
        return unvec(self.matrix @ vec(rho), rho.shape[0])

    def is_trace_preserving(self, atol=TP_ATOL):
        d = self.dim
        one = vec(np.eye(d))
        return bool(np.max(np.abs(one.conj() @ self.matrix - one.conj())) <= atol)


def apply_superop(sop, rho):
    return sop.apply(rho)


@dataclass(frozen=True, eq=False)
class MaxEntangledState:
    """The state sum_n |n>|n> / sqrt(d) on C^d (x) C^d."""

    dim: int
    vector: np.ndarray
    projector: np.ndarray


def max_entangled(d):
    if int(d) != d or d < 2:
        raise ValueError(f"maximally entangled state needs d >= 2, got {d}")
    d = int(d)
    psi = np.zeros(d * d, dtype=complex)
    psi[np.arange(d) * (d + 1)] = 1.0 / np.sqrt(d)
    proj = np.outer(psi, psi.conj())
    psi.setflags(write=False)
    proj.setflags(write=False)
    return MaxEntangledState(d, psi, proj)


def choi_of(sop):
    """Choi matrix ``(E (x) 1)(|Phi><Phi|)`` with the map acting on the first factor.

    Entry ``[(a, i), (b, j)]`` equals ``E(|i><j|)[a, b] / d``, which under
    column stacking is ``S[a + b d, i + j d] / d``; the function is a pure
    reshuffle of the superoperator matrix. Works for any linear map,
    including generators.
    """
    m = sop.matrix if isinstance(sop, Superoperator) else np.asarray(sop)
    d = int(round(np.sqrt(m.shape[0])))
    # C-order reshape of the row index a + b d gives axes (b, a).
    s4 = m.reshape(d, d, d, d)
    return s4.transpose(1, 3, 0, 2).reshape(d * d, d * d) / d


def partial_transpose(rho, dims, subsystem=0):
    """Transpose the indices of one tensor factor of a bipartite operator."""
    rho = np.asarray(rho)
    da, db = dims
    if rho.shape != (da * db, da * db):
        raise ValueError(f"dims {dims} do not match operator shape {rho.shape}")
    r4 = rho.reshape(da, db, da, db)
    if subsystem == 0:
        r4 = r4.transpose(2, 1, 0, 3)
    elif subsystem == 1:
        r4 = r4.transpose(0, 3, 2, 1)
    else:
        raise ValueError(f"subsystem must be 0 or 1, got {subsystem}")
    return r4.reshape(da * db, da * db)


def partial_trace(rho, dims, keep=0):
    rho = np.asarray(rho)
    da, db = dims
    r4 = rho.reshape(da, db, da, db)
    if keep == 0:
        return np.einsum("ajbj->ab", r4)
    return np.einsum("iaib->ab", r4)


def compose(a, b):
    """The map ``a`` applied after ``b``."""
    if a.dim != b.dim:
        raise ValueError(f"cannot compose maps of dimension {a.dim} and {b.dim}")
    return Superoperator(a.matrix @ b.matrix, flags=a.flags + b.flags)


class Inverse(NamedTuple):
    map: Superoperator
    pseudo: bool
    cond: float


def invert(a, cond_threshold=1e8):
    """Exact inverse when well conditioned, Moore-Penrose pseudoinverse otherwise.

    The pseudoinverse path is never silent: the returned map carries a
    ``"pseudoinverse"`` flag and ``pseudo`` is set.
    """
    m = a.matrix
    cond = float(np.linalg.cond(m))
    if np.isfinite(cond) and cond < cond_threshold:
        return Inverse(Superoperator(np.linalg.inv(m), flags=a.flags), False, cond)
    inv = np.linalg.pinv(m, rcond=1.0 / cond_threshold)
    return Inverse(Superoperator(inv, flags=a.flags + ("pseudoinverse",)), True, cond)


def min_choi_eigenvalue(sop):
    return float(np.linalg.eigvalsh(hermitize(choi_of(sop), 1e-9))[0])

"""Time-dependent Lindblad generators, propagator families and intermediate maps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np
from scipy.linalg import expm

from .operator_core import Superoperator, invert, vec, unvec

Scalar = Union[float, Callable[[float], float]]
Matrix = Union[np.ndarray, Callable[[float], np.ndarray]]

NORM_LIMIT = 1e6
COND_THRESHOLD = 1e8
RESIDUAL_LIMIT = 1e-6


class PropagationError(RuntimeError):
    pass


def _at(value, t):
    return value(t) if callable(value) else value


@dataclass(frozen=True)
class LindbladGenerator:
    """Generator ``-i[H, .] + sum_k gamma_k (V_k . V_k^dag - {V_k^dag V_k, .}/2)``.

    ``hamiltonian``, each rate and each jump operator may be a constant or a
    function of time. Rates are allowed to go negative.
    """

    dim: int
    hamiltonian: Matrix = None
    channels: Sequence[tuple] = field(default_factory=tuple)

    @property
    def time_independent(self):
        if callable(self.hamiltonian):
            return False
        return not any(callable(rate) or callable(op) for rate, op in self.channels)

    def hamiltonian_at(self, t):
        if self.hamiltonian is None:
            return np.zeros((self.dim, self.dim), dtype=complex)
        h = np.asarray(_at(self.hamiltonian, t), dtype=complex)
        if np.max(np.abs(h - h.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(h))):
            raise ValueError(f"Hamiltonian is not Hermitian at t={t}")
        return h

    def __call__(self, t):
        return generator_matrix(self, t)


def generator_matrix(gen, t=0.0):
    """Superoperator matrix of the generator at time ``t`` (column stacking)."""
    d = gen.dim
    eye = np.eye(d)
    h = gen.hamiltonian_at(t)
    out = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for rate, op in gen.channels:
        g = float(_at(rate, t))
        if g == 0.0:
            continue
        v = np.asarray(_at(op, t), dtype=complex)
        vdv = v.conj().T @ v
        out = out + g * (np.kron(v.conj(), v) - 0.5 * np.kron(eye, vdv) - 0.5 * np.kron(vdv.T, eye))
    return Superoperator(out)


def dephasing_generator(rate: Scalar):
    """Qubit pure dephasing ``d rho/dt = gamma(t) (sz rho sz - rho)``.

    With ``V = sz`` the anticommutator term is exactly ``-rho``, so a single
    channel at rate ``gamma`` reproduces the equation.
    """
    sz = np.diag([1.0, -1.0]).astype(complex)
    return LindbladGenerator(2, None, ((rate, sz),))


@dataclass(frozen=True, eq=False)
class PropagatorFamily:
    """Propagators ``E(t_k, 0)`` on a uniform grid starting at ``t_0 = 0``."""

    times: np.ndarray
    propagators: np.ndarray
    cond: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        props = np.asarray(self.propagators, dtype=complex)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a propagator family needs at least two grid points")
        if props.shape[0] != times.size or props.shape[1] != props.shape[2]:
            raise ValueError(f"propagator array shape {props.shape} does not match {times.size} grid points")
        steps = np.diff(times)
        if times[0] != 0.0 or np.any(steps <= 0):
            raise ValueError("time grid must start at 0 and increase strictly")
        if np.max(np.abs(steps - steps.mean())) > 1e-9 * max(1.0, times[-1]):
            raise ValueError("time grid is not uniform")
        cond = np.asarray(self.cond, dtype=float) if self.cond is not None else None
        if cond is None:
            cond = np.array([np.linalg.cond(p) for p in props])
        for arr in (times, props, cond):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "propagators", props)
        object.__setattr__(self, "cond", cond)

    @property
    def dt(self):
        return float((self.times[-1] - self.times[0]) / (self.times.size - 1))

    @property
    def dim(self):
        return int(round(math.sqrt(self.propagators.shape[1])))

    def __len__(self):
        return self.times.size

    def __getitem__(self, k):
        return Superoperator(self.propagators[k])


def _step_maps(gen, horizon, steps):
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    dt = horizon / steps
    times = np.linspace(0.0, horizon, steps + 1)
    if gen.time_independent:
        step = expm(generator_matrix(gen).matrix * dt)
        return times, (step for _ in range(steps))
    return times, (expm(generator_matrix(gen, t + 0.5 * dt).matrix * dt) for t in times[:-1])


def propagate(gen, horizon, steps):
    """Midpoint exponential stepping ``E_{k+1} = exp(L(t_k + dt/2) dt) E_k``."""
    times, maps = _step_maps(gen, horizon, steps)
    d2 = gen.dim ** 2
    props = np.empty((steps + 1, d2, d2), dtype=complex)
    props[0] = np.eye(d2)
    for k, step in enumerate(maps):
        props[k + 1] = step @ props[k]
        norm = np.linalg.norm(props[k + 1], 2)
        if not np.isfinite(norm) or norm > NORM_LIMIT:
            raise PropagationError(f"propagator norm {norm:.3e} exceeds {NORM_LIMIT:g} at t={times[k + 1]:.6g}")
    cond = np.linalg.cond(props)
    return PropagatorFamily(times, props, cond)


def evolve_state(gen, rho0, horizon, steps):
    """Trajectory ``rho(t_k)`` for ``k = 0..steps`` with the stepping of :func:`propagate`."""
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    times, maps = _step_maps(gen, horizon, steps)
    out = np.empty((steps + 1, d, d), dtype=complex)
    v = vec(rho0)
    out[0] = rho0
    for k, step in enumerate(maps):
        v = step @ v
        if not np.all(np.isfinite(v)) or np.linalg.norm(v) > NORM_LIMIT:
            raise PropagationError(f"state norm exploded at t={times[k + 1]:.6g}")
        out[k + 1] = unvec(v, d)
    return times, out


def intermediate_map(family, k, cond_threshold=COND_THRESHOLD):
    """Window map ``E(t_{k+1}, t_k) = E(t_{k+1}, 0) E(t_k, 0)^{-1}``.

    When ``E(t_k, 0)`` is too ill conditioned for exact inversion the
    pseudoinverse is used and the result is flagged. If the pseudoinverse
    does not reproduce ``E(t_{k+1}, 0)`` the window is also flagged
    ``"ill-defined"``: the data do not determine the intermediate map.
    """
    if not 0 <= k < len(family) - 1:
        raise IndexError(f"window index {k} outside 0..{len(family) - 2}")
    later = family.propagators[k + 1]
    earlier = family.propagators[k]
    inv = invert(Superoperator(earlier), cond_threshold)
    window = later @ inv.map.matrix
    flags = inv.map.flags
    if inv.pseudo:
        residual = np.max(np.abs(window @ earlier - later))
        if residual > RESIDUAL_LIMIT:
            flags = flags + ("ill-defined",)
    return Superoperator(window, flags=flags)


# -- propagator table files ------------------------------------------------

TABLE_MAGIC = "nonmarkov-propagators"


class TableFormatError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def write_propagator_table(family, path):
    """Write a family in the plain-text tomography table format.

    Layout, one record per line, comma separated::

        nonmarkov-propagators,1,<d>
        <t_index>,<time>                          grid records
        <t_index>,<row>,<col>,<re>,<im>           superoperator entries

    Entries not listed are zero. ``#`` starts a comment line.
    """
    d = family.dim
    lines = [f"{TABLE_MAGIC},1,{d}", "# t_index,time"]
    lines += [f"{k},{t!r}" for k, t in enumerate(family.times.tolist())]
    lines.append("# t_index,row,col,re,im")
    for k, prop in enumerate(family.propagators):
        rows, cols = np.nonzero(prop)
        for r, c in zip(rows.tolist(), cols.tolist()):
            z = prop[r, c]
            lines.append(f"{k},{r},{c},{float(z.real)!r},{float(z.imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_propagator_table(path):
    text = Path(path).read_text().splitlines()
    records = [(n, ln.strip()) for n, ln in enumerate(text, start=1) if ln.strip() and not ln.lstrip().startswith("#")]
    if not records:
        raise TableFormatError("empty propagator table")
    n0, header = records[0]
    parts = [p.strip() for p in header.split(",")]
    if len(parts) != 3 or parts[0] != TABLE_MAGIC or parts[1] != "1":
        raise TableFormatError(f"expected header '{TABLE_MAGIC},1,<dim>', got {header!r}", n0)
    try:
        d = int(parts[2])
    except ValueError:
        raise TableFormatError(f"bad dimension {parts[2]!r}", n0) from None
    if d < 1:
        raise TableFormatError(f"bad dimension {d}", n0)
    d2 = d * d
    times = {}
    entries = []
    for n, line in records[1:]:
        fields = [p.strip() for p in line.split(",")]
        try:
            if len(fields) == 2:
                k, t = int(fields[0]), float(fields[1])
                if k in times:
                    raise TableFormatError(f"duplicate grid record for t_index {k}", n)
                times[k] = t
            elif len(fields) == 5:
                k, r, c = int(fields[0]), int(fields[1]), int(fields[2])
                entries.append((n, k, r, c, complex(float(fields[3]), float(fields[4]))))
            else:
                raise TableFormatError(f"expected 2 or 5 fields, got {len(fields)}", n)
        except ValueError as exc:
            if isinstance(exc, TableFormatError):
                raise
            raise TableFormatError(f"cannot parse record {line!r}: {exc}", n) from None
    if sorted(times) != list(range(len(times))) or len(times) < 2:
        raise TableFormatError("grid records must cover t_index 0..K contiguously with K >= 1")
    grid = np.array([times[k] for k in range(len(times))])
    steps = np.diff(grid)
    if grid[0] != 0.0 or np.any(steps <= 0):
        raise TableFormatError("time grid must start at 0 and increase strictly")
    if np.max(np.abs(steps - steps.mean())) > 1e-9 * max(1.0, grid[-1]):
        raise TableFormatError("time grid is not uniform")
    props = np.zeros((grid.size, d2, d2), dtype=complex)
    seen = set()
    for n, k, r, c, z in entries:
        if not (0 <= k < grid.size and 0 <= r < d2 and 0 <= c < d2):
            raise TableFormatError(f"entry index ({k},{r},{c}) out of range", n)
        if (k, r, c) in seen:
            raise TableFormatError(f"duplicate entry ({k},{r},{c})", n)
        seen.add((k, r, c))
        props[k, r, c] = z
    return PropagatorFamily(grid, props, None)

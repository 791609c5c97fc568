"""Damped oscillator + discretized bosonic bath + shielded ancilla, in the Gaussian formalism.

Modes are ordered (system, bath_1 .. bath_M, ancilla). Under the
excitation-conserving Hamiltonian ``H = sum_jk Omega_jk a_j^dag a_k`` the
annihilation operators evolve as ``a(t) = U a(0)`` with ``U = exp(-i Omega t)``,
so the second moments ``N_jk = <a_j^dag a_k>`` and ``Mm_jk = <a_j a_k>``
propagate as ``U* N U^T`` and ``U Mm U^T``. Units: hbar = k_B = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .monitor import EntanglementSeries

PHYSICALITY_TOL = 1e-8
SYMPLECTIC_2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


class UnphysicalCovarianceError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralDensity:
    """``J(w) = alpha * w**exponent * exp(-w / cutoff)``."""

    alpha: float
    cutoff: float
    exponent: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"coupling strength must be nonnegative, got {self.alpha}")
        if self.cutoff <= 0:
            raise ValueError(f"cutoff frequency must be positive, got {self.cutoff}")

    @classmethod
    def ohmic(cls, alpha, cutoff):
        return cls(alpha, cutoff, 1.0)

    @classmethod
    def super_ohmic(cls, alpha, cutoff):
        return cls(alpha, cutoff, 3.0)

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        return self.alpha * w ** self.exponent * np.exp(-w / self.cutoff)


@dataclass(frozen=True)
class BathSpec:
    """Discretized bath: ``modes`` oscillators on ``[omega_min, omega_max]`` at ``temperature``.

    If a ``horizon`` is given it must be shorter than the recurrence time
    ``2 pi / dw`` of the discretized bath.
    """

    modes: int
    omega_min: float
    omega_max: float
    temperature: float = 0.0
    horizon: float | None = None

    def __post_init__(self):
        if int(self.modes) != self.modes or self.modes < 1:
            raise ValueError(f"need at least one bath mode, got {self.modes}")
        if not 0 < self.omega_min < self.omega_max:
            raise ValueError(f"need 0 < omega_min < omega_max, got [{self.omega_min}, {self.omega_max}]")
        if self.temperature < 0:
            raise ValueError(f"temperature must be nonnegative, got {self.temperature}")
        if self.horizon is not None and self.horizon >= self.recurrence_time:
            raise ValueError(
                f"horizon {self.horizon:g} is not shorter than the bath recurrence time "
                f"{self.recurrence_time:g}; use at least {self.modes_for(self.horizon)} modes"
            )

    @property
    def spacing(self):
        return (self.omega_max - self.omega_min) / self.modes

    @property
    def recurrence_time(self):
        return 2.0 * math.pi / self.spacing

    def default_horizon(self, fraction=0.8, cap=50.0):
        return min(fraction * self.recurrence_time, cap)

    def modes_for(self, horizon, fraction=0.8):
        """Smallest mode count whose recurrence time exceeds ``horizon / fraction``."""
        return math.floor(horizon * (self.omega_max - self.omega_min) / (2.0 * math.pi * fraction)) + 1


def discretize(density, spec):
    """Midpoint frequency grid and couplings ``g_j = sqrt(J(w_j) dw)``."""
    dw = spec.spacing
    freqs = spec.omega_min + (np.arange(1, spec.modes + 1) - 0.5) * dw
    weights = density(freqs)
    if np.any(weights < 0):
        raise ValueError("spectral density is negative on the frequency window")
    return freqs, np.sqrt(weights * dw)


def thermal_occupation(freqs, temperature):
    freqs = np.asarray(freqs, dtype=float)
    if temperature < 0:
        raise ValueError(f"temperature must be nonnegative, got {temperature}")
    if temperature == 0:
        return np.zeros_like(freqs)
    return 1.0 / np.expm1(freqs / temperature)


@dataclass(frozen=True, eq=False)
class ModeNetwork:
    bath_frequencies: np.ndarray
    couplings: np.ndarray
    system_frequency: float = 1.0
    ancilla_frequency: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.bath_frequencies, dtype=float)
        g = np.asarray(self.couplings, dtype=float)
        if w.shape != g.shape or w.ndim != 1:
            raise ValueError("bath frequencies and couplings must be 1-d arrays of equal length")
        object.__setattr__(self, "bath_frequencies", w)
        object.__setattr__(self, "couplings", g)

    @classmethod
    def from_bath(cls, density, spec, system_frequency=1.0, ancilla_frequency=1.0):
        freqs, couplings = discretize(density, spec)
        return cls(freqs, couplings, system_frequency, ancilla_frequency)

    @property
    def size(self):
        return self.bath_frequencies.size + 2

    @property
    def system(self):
        return 0

    @property
    def ancilla(self):
        return self.size - 1

    @cached_property
    def frequency_matrix(self):
        n = self.size
        omega = np.zeros((n, n))
        omega[0, 0] = self.system_frequency
        idx = np.arange(1, n - 1)
        omega[idx, idx] = self.bath_frequencies
        omega[0, idx] = omega[idx, 0] = self.couplings
        omega[-1, -1] = self.ancilla_frequency
        return omega

    @cached_property
    def eigen(self):
        vals, vecs = np.linalg.eigh(self.frequency_matrix)
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(vecs))):
            raise np.linalg.LinAlgError("eigendecomposition of the frequency matrix failed")
        return vals, vecs

    def propagator(self, t):
        vals, vecs = self.eigen
        return (vecs * np.exp(-1j * vals * t)) @ vecs.T

    def propagator_rows(self, times, rows):
        """Rows ``U(t)[rows, :]`` for every time in ``times``, shape (T, len(rows), n)."""
        vals, vecs = self.eigen
        phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), vals))
        return np.einsum("rk,tk,jk->trj", vecs[list(rows)], phases, vecs, optimize=True)


@dataclass(frozen=True, eq=False)
class ComplexCovariance:
    """Zero-mean Gaussian second moments ``N = <a^dag a>`` and ``Mm = <a a>``."""

    N: np.ndarray
    Mm: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.N, dtype=complex)
        m = np.asarray(self.Mm, dtype=complex)
        if n.shape != m.shape or n.ndim != 2 or n.shape[0] != n.shape[1]:
            raise ValueError("N and Mm must be square matrices of equal size")
        object.__setattr__(self, "N", n)
        object.__setattr__(self, "Mm", m)

    @property
    def modes(self):
        return self.N.shape[0]

    def validate(self, atol=1e-10):
        if np.max(np.abs(self.N - self.N.conj().T)) > atol:
            raise UnphysicalCovarianceError("N is not Hermitian")
        if np.linalg.eigvalsh(0.5 * (self.N + self.N.conj().T))[0] < -atol:
            raise UnphysicalCovarianceError("N is not positive semidefinite")
        if np.max(np.abs(self.Mm - self.Mm.T)) > atol:
            raise UnphysicalCovarianceError("Mm is not symmetric")
        return self


def initial_covariance(squeezing, spec, freqs=None):
    """Two-mode squeezed vacuum on (system, ancilla) and a thermal bath."""
    if squeezing < 0:
        raise ValueError(f"squeezing must be nonnegative, got {squeezing}")
    if freqs is None:
        freqs = spec.omega_min + (np.arange(1, spec.modes + 1) - 0.5) * spec.spacing
    freqs = np.asarray(freqs, dtype=float)
    n = freqs.size + 2
    N = np.zeros((n, n), dtype=complex)
    Mm = np.zeros((n, n), dtype=complex)
    occ = math.sinh(squeezing) ** 2
    corr = math.sinh(squeezing) * math.cosh(squeezing)
    N[0, 0] = N[-1, -1] = occ
    Mm[0, -1] = Mm[-1, 0] = corr
    idx = np.arange(1, n - 1)
    N[idx, idx] = thermal_occupation(freqs, spec.temperature)
    return ComplexCovariance(N, Mm)


def evolve(net, cov0, t):
    u = net.propagator(t)
    return ComplexCovariance(u.conj() @ cov0.N @ u.T, u @ cov0.Mm @ u.T)


def _moments_to_quadratures(N, Mm):
    """Symmetrized quadrature covariance from ladder moments of k modes.

    Ordering (x_1, p_1, ..., x_k, p_k) with x = (a + a^dag)/sqrt 2 and
    p = (a - a^dag)/(i sqrt 2); vacuum variance 1/2.
    """
    k = N.shape[0]
    eye = np.eye(k)
    # <b_a b_b> for b = (a_1, a_1^dag, a_2, a_2^dag, ...)
    G = np.empty((2 * k, 2 * k), dtype=complex)
    G[0::2, 0::2] = Mm
    G[0::2, 1::2] = N.T + eye
    G[1::2, 0::2] = N
    G[1::2, 1::2] = Mm.conj()
    T1 = np.array([[1.0, 1.0], [-1j, 1j]]) / math.sqrt(2.0)
    T = np.kron(eye, T1)
    S = T @ G @ T.T
    S = 0.5 * (S + S.T)
    if np.max(np.abs(S.imag)) > 1e-10 * max(1.0, np.max(np.abs(S.real))):
        raise UnphysicalCovarianceError("quadrature covariance has an imaginary part")
    return S.real


def check_physical(sigma, tol=PHYSICALITY_TOL):
    k = sigma.shape[0] // 2
    omega = np.kron(np.eye(k), SYMPLECTIC_2)
    low = np.linalg.eigvalsh(sigma + 0.5j * omega)[0]
    if low < -tol:
        raise UnphysicalCovarianceError(f"uncertainty relation violated: min eigenvalue {low:.3e}")
    return sigma


def reduce_and_quadrature(cov, modes=None):
    """4x4 real quadrature covariance of two retained modes (default system and ancilla)."""
    if modes is None:
        modes = (0, cov.modes - 1)
    idx = np.asarray(modes)
    sigma = _moments_to_quadratures(cov.N[np.ix_(idx, idx)], cov.Mm[np.ix_(idx, idx)])
    return check_physical(sigma)


def log_negativity(sigma):
    """Logarithmic negativity (base 2) of a two-mode Gaussian state from its covariance matrix."""
    sigma = np.asarray(sigma, dtype=float)
    a, b, c = sigma[:2, :2], sigma[2:, 2:], sigma[:2, 2:]
    delta = np.linalg.det(a) + np.linalg.det(b) - 2.0 * np.linalg.det(c)
    disc = delta * delta - 4.0 * np.linalg.det(sigma)
    if disc < 0:
        if disc < -PHYSICALITY_TOL * max(1.0, delta * delta):
            raise UnphysicalCovarianceError(f"negative discriminant {disc:.3e} in symplectic spectrum")
        disc = 0.0
    nu_sq = 0.5 * (delta - math.sqrt(disc))
    if nu_sq <= 0:
        raise UnphysicalCovarianceError("non-positive partially transposed symplectic eigenvalue")
    return max(0.0, -math.log2(2.0 * math.sqrt(nu_sq)))


def _log_negativity_batch(sigmas):
    a, b, c = sigmas[:, :2, :2], sigmas[:, 2:, 2:], sigmas[:, :2, 2:]
    delta = np.linalg.det(a) + np.linalg.det(b) - 2.0 * np.linalg.det(c)
    disc = delta * delta - 4.0 * np.linalg.det(sigmas)
    if np.any(disc < -PHYSICALITY_TOL * np.maximum(1.0, delta * delta)):
        raise UnphysicalCovarianceError("negative discriminant in symplectic spectrum")
    nu = np.sqrt(0.5 * (delta - np.sqrt(np.clip(disc, 0.0, None))))
    return np.maximum(0.0, -np.log2(2.0 * nu))


def reduced_moments(net, cov0, times, modes=None):
    """Second moments of the retained modes at each time, without forming the full ``U``.

    Returns ``(N, Mm)`` with shapes (T, k, k).
    """
    if modes is None:
        modes = (net.system, net.ancilla)
    rows = net.propagator_rows(times, modes)
    N = np.einsum("tai,ij,tbj->tab", rows.conj(), cov0.N, rows, optimize=True)
    Mm = np.einsum("tai,ij,tbj->tab", rows, cov0.Mm, rows, optimize=True)
    return N, Mm


def entanglement_series(net, cov0, times):
    """System-ancilla logarithmic negativity at each requested time."""
    times = np.asarray(times, dtype=float)
    N, Mm = reduced_moments(net, cov0, times)
    sigmas = np.stack([check_physical(_moments_to_quadratures(n, m)) for n, m in zip(N, Mm)])
    return EntanglementSeries(times, _log_negativity_batch(sigmas))

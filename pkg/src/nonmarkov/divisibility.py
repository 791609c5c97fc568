"""Divisibility-based non-Markovianity: f_NCP, g(t), the integral I and D_NM."""

from __future__ import annotations

import logging
from pathlib import Path
from dataclasses import dataclass, field

import numpy as np

from .lindblad import intermediate_map
from .operator_core import NonHermitianError, Superoperator, choi_of, max_entangled, trace_norm

logger = logging.getLogger(__name__)

CLAMP_TOL = 1e-9
EPSILONS = (1e-3, 5e-4, 2.5e-4)
RICHARDSON_RTOL = 1e-4
RICHARDSON_ATOL = 1e-9


class NotTracePreservingError(ValueError):
    pass


class NegativeRateOfChangeError(ArithmeticError):
    """A g sample came out below -CLAMP_TOL: a numerical fault, not physics."""


def f_ncp(sop, tp_atol=1e-8):
    """Trace norm of the Choi matrix; exactly 1 for CP trace-preserving maps."""
    if not isinstance(sop, Superoperator):
        sop = Superoperator(sop)
    if not sop.is_trace_preserving(tp_atol):
        raise NotTracePreservingError("f_NCP is only defined for trace-preserving maps")
    # Hermiticity of the Choi matrix degrades with the conditioning of the map.
    scale = max(1.0, float(np.max(np.abs(sop.matrix))))
    return trace_norm(choi_of(sop), atol=1e-12 * scale)


@dataclass(frozen=True, eq=False)
class GSamples:
    """Right-derivative samples ``g(t_k)`` of f_NCP on a uniform grid.

    ``flagged`` marks windows whose intermediate map is unreliable; their
    ``values`` are NaN and they are left out of the integral.
    """

    times: np.ndarray
    values: np.ndarray
    flagged: np.ndarray
    flags: tuple = ()
    clamped: int = 0

    def __post_init__(self):
        for name in ("times", "values", "flagged"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))


def _clamp(raw):
    if raw < -CLAMP_TOL:
        raise NegativeRateOfChangeError(f"g sample {raw:.3e} is below -{CLAMP_TOL:g}")
    return (0.0, 1) if raw < 0.0 else (raw, 0)


def g_from_family(family, cond_threshold=1e8):
    """``g(t_k) = (f_NCP(E(t_{k+1}, t_k)) - 1) / dt`` for every window of the grid."""
    dt = family.dt
    n = len(family) - 1
    values = np.full(n, np.nan)
    flagged = np.zeros(n, dtype=bool)
    flags = []
    clamped = 0
    for k in range(n):
        window = intermediate_map(family, k, cond_threshold)
        if window.flags:
            flagged[k] = True
            flags.append((k, float(family.times[k]), window.flags))
            continue
        try:
            f = f_ncp(window)
        except NotTracePreservingError:
            flagged[k] = True
            flags.append((k, float(family.times[k]), ("not-trace-preserving",)))
            continue
        except NonHermitianError:
            flagged[k] = True
            flags.append((k, float(family.times[k]), ("not-hermiticity-preserving",)))
            continue
        values[k], c = _clamp((f - 1.0) / dt)
        clamped += c
    if flags:
        logger.warning("%d of %d windows flagged and excluded", len(flags), n)
    return GSamples(family.times[:-1].copy(), values, flagged, tuple(flags), clamped)


def _quotient(w, phi, eps):
    return (trace_norm(phi + eps * w, atol=1e-10) - 1.0) / eps


@dataclass(frozen=True)
class GeneratorSample:
    value: float
    converged: bool
    epsilons: tuple
    estimates: tuple


def _neville_at_zero(eps, q):
    """Value at eps = 0 of the polynomial through the points (eps_i, q_i)."""
    p = list(q)
    n = len(p)
    for level in range(1, n):
        for i in range(n - level):
            p[i] = (eps[i] * p[i + 1] - eps[i + level] * p[i]) / (eps[i] - eps[i + level])
    return p[0]


def g_from_generator(gen, t, epsilons=EPSILONS, rtol=RICHARDSON_RTOL, atol=RICHARDSON_ATOL, min_eps=1e-8):
    """g(t) from the generator via ``(||[1 + eps (L (x) 1)] Phi||_1 - 1) / eps``.

    The quotient is Richardson-extrapolated to ``eps -> 0+`` from windows of
    ``len(epsilons)`` consecutive points. Starting from ``epsilons`` the step
    keeps halving until two successive extrapolations agree within
    ``rtol * |g| + atol``; the quotient has kinks where a near-zero
    eigenvalue of the perturbed Choi matrix changes sign, and a window
    straddling one gives a meaningless extrapolation. If ``min_eps`` is
    reached first the sample is returned with ``converged = False``.
    """
    eps = [float(e) for e in epsilons]
    if len(eps) < 2 or any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] < min_eps:
        raise ValueError(f"epsilon sequence must be strictly decreasing with entries >= {min_eps:g}")
    order = len(eps)
    lmat = gen(t) if callable(gen) else gen
    w = choi_of(lmat)
    phi = max_entangled(int(round(np.sqrt(w.shape[0])))).projector
    quotients = [_quotient(w, phi, e) for e in eps]
    estimates = [_neville_at_zero(eps, quotients)]
    converged = False
    while eps[-1] / 2 >= min_eps:
        eps.append(eps[-1] / 2)
        quotients.append(_quotient(w, phi, eps[-1]))
        estimates.append(_neville_at_zero(eps[-order:], quotients[-order:]))
        if abs(estimates[-1] - estimates[-2]) <= rtol * abs(estimates[-1]) + atol:
            converged = True
            break
    return GeneratorSample(max(float(estimates[-1]), 0.0), converged, tuple(eps), tuple(estimates))


def g_perturbative(gen, t):
    """First-order value ``2 sum max(0, -lambda_i(Q W Q))`` with ``W = (L (x) 1) Phi``."""
    lmat = gen(t) if callable(gen) else gen
    w = choi_of(lmat)
    d = int(round(np.sqrt(w.shape[0])))
    q = np.eye(d * d) - max_entangled(d).projector
    lam = np.linalg.eigvalsh(0.5 * (q @ w @ q + (q @ w @ q).conj().T))
    return float(2.0 * np.sum(np.clip(-lam, 0.0, None)))


def g_series_from_generator(gen, times, epsilons=EPSILONS):
    """Generator-path samples on a time grid, as a :class:`GSamples`."""
    times = np.asarray(times, dtype=float)
    samples = [g_from_generator(gen, t, epsilons) for t in times]
    flagged = np.array([not s.converged for s in samples])
    values = np.array([np.nan if f else s.value for s, f in zip(samples, flagged)])
    flags = tuple((k, float(times[k]), ("richardson-divergent",)) for k in np.flatnonzero(flagged))
    return GSamples(times, values, flagged, flags)


@dataclass(frozen=True, eq=False)
class NonMarkovReport:
    times: np.ndarray
    g: np.ndarray
    cumulative: np.ndarray
    I: float
    D_NM: float
    horizon: float
    truncated: bool = False
    flags: tuple = field(default=())
    clamped: int = 0

    @property
    def flagged_windows(self):
        return len(self.flags)

    def write(self, directory, fmt="{:.12g}"):
        """Write ``g_report.csv`` (t, g, I_cumulative) and ``report_summary.txt``."""
        directory = Path(directory)
        rows = ["t,g,I_cumulative"]
        for t, g, c in zip(self.times, self.g, self.cumulative):
            rows.append(",".join(fmt.format(x) for x in (t, g, c)))
        (directory / "g_report.csv").write_text("\n".join(rows) + "\n")
        summary = [
            "I,D_NM,flagged_windows,horizon",
            ",".join([fmt.format(self.I), fmt.format(self.D_NM), str(self.flagged_windows), fmt.format(self.horizon)]),
            f"truncated_lower_bound={str(self.truncated).lower()}",
            f"clamped_samples={self.clamped}",
        ]
        summary += [f"flagged t_index={k} t={fmt.format(t)} reasons={'|'.join(r)}" for k, t, r in self.flags]
        (directory / "report_summary.txt").write_text("\n".join(summary) + "\n")


def _tail_not_decreasing(values, tol=CLAMP_TOL):
    n = values.size
    width = max(n // 10, 1)
    if n < 2 * width or n < 4:
        return False
    tail = values[-width:].mean()
    before = values[-2 * width:-width].mean()
    return bool(tail > tol and tail >= 0.99 * before)


def rhp_integral(samples, horizon=None):
    """Trapezoidal integral of g over the sampled horizon, with D_NM = I / (I + 1).

    Segments touching a flagged sample are skipped. When g has not started
    to decay by the end of the horizon, ``truncated`` marks I as a lower
    bound of the infinite-horizon value.
    """
    if isinstance(samples, GSamples):
        times, values, flagged = samples.times, samples.values, samples.flagged
        flags, clamped = samples.flags, samples.clamped
    else:
        times, values = (np.asarray(a, dtype=float) for a in samples)
        flagged, flags, clamped = ~np.isfinite(values), (), 0
    if times.size == 0:
        raise ValueError("cannot integrate an empty set of g samples")
    ok = ~flagged
    if np.any(values[ok] < -CLAMP_TOL):
        raise NegativeRateOfChangeError("g samples must be nonnegative")
    tiny = ok & (values < 0.0)
    clamped += int(np.count_nonzero(tiny))
    values = np.where(tiny, 0.0, values)
    g = np.where(ok, values, 0.0)
    seg = 0.5 * (g[1:] + g[:-1]) * np.diff(times)
    seg = np.where(ok[1:] & ok[:-1], seg, 0.0)
    cumulative = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cumulative[-1])
    if horizon is None:
        horizon = float(times[-1])
    return NonMarkovReport(
        times=times,
        g=values,
        cumulative=cumulative,
        I=total,
        D_NM=total / (total + 1.0),
        horizon=float(horizon),
        truncated=_tail_not_decreasing(g[ok]),
        flags=tuple(flags),
        clamped=clamped,
    )


def measure_family(family, cond_threshold=1e8):
    """Full pipeline from a propagator family to a :class:`NonMarkovReport`."""
    return rhp_integral(g_from_family(family, cond_threshold), horizon=float(family.times[-1]))


def dephasing_oracle(rate, horizon, steps):
    """Closed form ``I = -2 * integral of gamma over {gamma < 0}`` on a uniform grid."""
    t = np.linspace(0.0, horizon, steps + 1)
    gamma = np.array([rate(x) for x in t], dtype=float) if callable(rate) else np.full(t.size, float(rate))
    return float(-2.0 * np.trapezoid(np.minimum(gamma, 0.0), t))

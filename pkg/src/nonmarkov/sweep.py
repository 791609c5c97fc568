"""Coupling/temperature sweeps of I^(E) for the damped-oscillator model."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .gaussian import (
    BathSpec,
    ModeNetwork,
    SpectralDensity,
    entanglement_series,
    evolve,
    initial_covariance,
)
from .monitor import DETECTION_THRESHOLD, i_entanglement

logger = logging.getLogger(__name__)

KIND_EXPONENTS = {"ohmic": 1.0, "super-ohmic": 3.0}
WINDOW_FACTORS = {1.0: 10.0, 3.0: 15.0}


@dataclass(frozen=True)
class BathModel:
    """Everything about a sweep cell except (alpha, T).

    ``omega_min``/``omega_max``/``horizon`` left as None resolve to
    ``[1e-3 wc, 10 wc]`` (Ohmic) or ``[1e-3 wc, 15 wc]`` (super-Ohmic) and
    ``min(0.8 * recurrence time, 50)``.
    """

    exponent: float = 1.0
    cutoff: float = 1.0
    modes: int = 300
    omega_min: float | None = None
    omega_max: float | None = None
    squeezing: float = 1.0
    horizon: float | None = None
    steps: int = 1000
    system_frequency: float = 1.0
    ancilla_frequency: float = 1.0

    def resolved(self):
        lo = self.omega_min if self.omega_min is not None else 1e-3 * self.cutoff
        hi = self.omega_max
        if hi is None:
            hi = WINDOW_FACTORS.get(float(self.exponent), 10.0) * self.cutoff
        spec = BathSpec(self.modes, lo, hi)
        horizon = self.horizon if self.horizon is not None else spec.default_horizon()
        BathSpec(self.modes, lo, hi, horizon=horizon)
        if self.steps < 2:
            raise ValueError(f"steps must be >= 2, got {self.steps}")
        return replace(self, omega_min=lo, omega_max=hi, horizon=horizon)

    def bath_spec(self, temperature):
        m = self.resolved()
        return BathSpec(m.modes, m.omega_min, m.omega_max, temperature, m.horizon)

    def times(self):
        m = self.resolved()
        return np.linspace(0.0, m.horizon, m.steps + 1)


@dataclass(frozen=True)
class CellResult:
    alpha: float
    temperature: float
    i_e: float
    series: object = None
    diagnostics: dict | None = None
    error: str | None = None

    @property
    def ok(self):
        return self.error is None


def conservation_diagnostics(net, cov0, times, series_moments=None, checkpoints=5):
    """Unitarity, excitation-number and ancilla-marginal errors on a few checkpoints."""
    picks = np.unique(np.linspace(0, len(times) - 1, checkpoints).round().astype(int))
    eye = np.eye(net.size)
    n0 = np.trace(cov0.N).real
    unit_err = exc_err = anc_err = 0.0
    for k in picks:
        u = net.propagator(times[k])
        unit_err = max(unit_err, float(np.max(np.abs(u.conj().T @ u - eye))))
        cov = evolve(net, cov0, times[k])
        exc_err = max(exc_err, abs(np.trace(cov.N).real - n0))
        anc_err = max(anc_err, abs(cov.N[-1, -1] - cov0.N[-1, -1]))
    return {
        "unitarity": unit_err,
        "excitation": exc_err,
        "excitation_bound": 1e-8 * n0 + 1e-10,
        "ancilla_marginal": anc_err,
    }


def run_cell(model, alpha, temperature, keep_series=False, diagnostics=False):
    """One gaussian simulation at coupling ``alpha`` and bath temperature ``temperature``."""
    try:
        m = model.resolved()
        spec = m.bath_spec(temperature)
        density = SpectralDensity(alpha, m.cutoff, m.exponent)
        net = ModeNetwork.from_bath(density, spec, m.system_frequency, m.ancilla_frequency)
        cov0 = initial_covariance(m.squeezing, spec, net.bath_frequencies)
        times = m.times()
        series = entanglement_series(net, cov0, times)
        diag = conservation_diagnostics(net, cov0, times) if diagnostics else None
        return CellResult(alpha, temperature, i_entanglement(series), series if keep_series else None, diag)
    except Exception as exc:  # a failed cell must not stop the sweep
        logger.error("cell alpha=%g T=%g failed: %s", alpha, temperature, exc)
        return CellResult(alpha, temperature, math.nan, error=f"{type(exc).__name__}: {exc}")


def _run_cell_args(args):
    return run_cell(*args)


def sweep_i_entanglement(alphas, temperatures, model=None, jobs=1, keep_series=False, diagnostics=False):
    """I^(E) for every (alpha, T) pair, ordered by T then alpha."""
    model = (model or BathModel()).resolved()
    tasks = [(model, float(a), float(t), keep_series, diagnostics)
             for t in sorted(temperatures) for a in sorted(alphas)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_cell_args, tasks))
    return [_run_cell_args(t) for t in tasks]


def onset_alpha(results, temperature, threshold=DETECTION_THRESHOLD):
    """Smallest alpha at ``temperature`` whose I^(E) exceeds ``threshold`` (inf if none)."""
    hits = [r.alpha for r in results if r.temperature == temperature and r.ok and r.i_e > threshold]
    return min(hits) if hits else math.inf


def model_dict(model):
    return asdict(model)

"""Model-free witness I^(E) computed from a sampled entanglement trajectory."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

DETECTION_THRESHOLD = 1e-4


@dataclass(frozen=True, eq=False)
class EntanglementSeries:
    """Entanglement values (bits) on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("entanglement values must be finite and nonnegative")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.times.size

    def write_csv(self, path, fmt="{:.12g}"):
        rows = ["t,E_N"] + [f"{fmt.format(t)},{fmt.format(e)}" for t, e in zip(self.times, self.values)]
        Path(path).write_text("\n".join(rows) + "\n")


def i_entanglement(series):
    """Total variation minus net decrease, ``2 * sum(max(0, E_{k+1} - E_k))``.

    Zero exactly when the series never rises. A zero result means no
    non-Markovianity was detected; it does not certify Markovian dynamics.
    """
    values = series.values if isinstance(series, EntanglementSeries) else np.asarray(series, dtype=float)
    if values.size < 2:
        raise ValueError("I^(E) needs at least two samples")
    return float(2.0 * np.sum(np.clip(np.diff(values), 0.0, None)))


def detected(value, threshold=DETECTION_THRESHOLD):
    return value > threshold

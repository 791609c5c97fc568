import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nonmarkov import sweep as sweep_mod
from nonmarkov.gaussian import ModeNetwork, BathSpec, entanglement_series, initial_covariance
from nonmarkov.monitor import EntanglementSeries, detected, i_entanglement
from nonmarkov.sweep import BathModel, onset_alpha, run_cell, sweep_i_entanglement

SMALL = BathModel(cutoff=10.0, modes=120, steps=400)


def series(values, dt=1.0):
    values = np.asarray(values, dtype=float)
    return EntanglementSeries(dt * np.arange(values.size), values)


def test_rise_sum_examples():
    assert i_entanglement(series([1.0, 0.5, 0.8, 0.3])) == pytest.approx(0.6, abs=1e-15)
    assert i_entanglement(series([3.0, 2.0, 1.5, 0.1])) == 0.0
    assert i_entanglement(series([0.7] * 5)) == 0.0


def test_equals_total_variation_minus_net_decrease():
    rng = np.random.default_rng(0)
    v = rng.uniform(0, 2, size=50)
    total_variation = np.sum(np.abs(np.diff(v)))
    assert i_entanglement(series(v)) == pytest.approx(total_variation - (v[0] - v[-1]), abs=1e-12)


def test_needs_two_samples():
    with pytest.raises(ValueError):
        i_entanglement(series([1.0]))
    with pytest.raises(ValueError):
        i_entanglement(np.array([]))


def test_series_validation(tmp_path):
    with pytest.raises(ValueError):
        EntanglementSeries(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        EntanglementSeries(np.array([0.0, 1.0]), np.array([1.0, -0.1]))
    with pytest.raises(ValueError):
        EntanglementSeries(np.array([0.0, 1.0]), np.array([1.0, np.nan]))
    s = series([1.0, 0.25])
    s.write_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text() == "t,E_N\n0,1\n1,0.25\n"


@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=2, max_size=30),
       st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=30))
def test_additive_over_shared_endpoint(first, rest):
    whole = first + rest
    second = [first[-1]] + rest
    assert i_entanglement(np.array(whole)) == pytest.approx(
        i_entanglement(np.array(first)) + i_entanglement(np.array(second)), abs=1e-9)


@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=2, max_size=30))
def test_nonnegative_and_zero_iff_non_increasing(values):
    value = i_entanglement(np.array(values))
    assert value >= 0
    assert (value == 0) == bool(np.all(np.diff(values) <= 0))


def test_doubling_sampling_density_is_stable():
    f = lambda t: np.exp(-t / 8) * (1.2 + 0.4 * np.sin(1.3 * t))  # noqa: E731
    coarse = i_entanglement(f(np.linspace(0, 30, 301)))
    fine = i_entanglement(f(np.linspace(0, 30, 601)))
    assert abs(fine - coarse) / fine < 0.01

    net = ModeNetwork(np.array([1.0]), np.array([0.2]), 1.0, 1.0)
    cov0 = initial_covariance(1.0, BathSpec(1, 0.5, 1.5), net.bath_frequencies)
    a = i_entanglement(entanglement_series(net, cov0, np.linspace(0, 40, 801)))
    b = i_entanglement(entanglement_series(net, cov0, np.linspace(0, 40, 1601)))
    assert abs(a - b) / b < 0.01


def test_detection_threshold():
    assert not detected(1e-4)
    assert detected(1.1e-4)


def test_bath_model_defaults_respect_recurrence():
    m = BathModel(cutoff=10.0).resolved()
    assert (m.omega_min, m.omega_max) == pytest.approx((0.01, 100.0))
    spec = m.bath_spec(0.0)
    assert m.horizon == pytest.approx(min(0.8 * spec.recurrence_time, 50.0))
    assert BathModel(exponent=3.0, cutoff=5.0).resolved().omega_max == pytest.approx(75.0)
    with pytest.raises(ValueError, match="modes"):
        BathModel(cutoff=10.0, modes=50, horizon=40.0).resolved()


def test_sweep_rows_ordered_by_temperature_then_alpha():
    res = sweep_i_entanglement([0.3, 0.0, 0.01], [2.0, 0.0], SMALL)
    assert [(r.temperature, r.alpha) for r in res] == [
        (0.0, 0.0), (0.0, 0.01), (0.0, 0.3), (2.0, 0.0), (2.0, 0.01), (2.0, 0.3)]
    assert all(r.ok for r in res)


def test_zero_coupling_column_vanishes():
    res = sweep_i_entanglement([0.0], [0.0, 2.0, 5.0], SMALL)
    # decoupled evolution: only float rounding in the constant series remains
    assert all(r.i_e <= 1e-9 for r in res)


def test_sweep_is_deterministic_and_parallel_safe():
    serial = sweep_i_entanglement([0.05, 0.3], [0.0, 2.0], SMALL)
    parallel = sweep_i_entanglement([0.05, 0.3], [0.0, 2.0], SMALL, jobs=2)
    assert [r.i_e for r in serial] == [r.i_e for r in parallel]


def test_failed_cells_are_recorded_and_sweep_continues(monkeypatch):
    real = sweep_mod.entanglement_series

    def flaky(net, cov0, times):
        if np.max(net.couplings) > 0.2:
            raise np.linalg.LinAlgError("synthetic failure")
        return real(net, cov0, times)

    monkeypatch.setattr(sweep_mod, "entanglement_series", flaky)
    res = sweep_i_entanglement([0.01, 0.5], [0.0], SMALL)
    assert res[0].ok and not res[1].ok
    assert "synthetic failure" in res[1].error
    assert math.isnan(res[1].i_e)


def test_cell_diagnostics_and_series():
    cell = run_cell(SMALL, 0.2, 2.0, keep_series=True, diagnostics=True)
    assert cell.diagnostics["unitarity"] <= 1e-10
    assert cell.diagnostics["excitation"] <= cell.diagnostics["excitation_bound"]
    assert cell.diagnostics["ancilla_marginal"] <= 1e-10
    assert len(cell.series) == SMALL.steps + 1
    assert cell.i_e == pytest.approx(i_entanglement(cell.series))


def test_onset_alpha():
    res = sweep_i_entanglement([0.001, 0.1, 0.5], [0.0, 5.0], SMALL)
    assert onset_alpha(res, 0.0) <= onset_alpha(res, 5.0)
    assert onset_alpha(res, 7.0) == math.inf


def test_super_ohmic_needs_much_weaker_coupling():
    ohmic = BathModel(exponent=1.0, cutoff=10.0, modes=120, steps=400)
    super_ohmic = BathModel(exponent=3.0, cutoff=5.0, modes=120, steps=400)
    # at the same alpha the super-ohmic witness is far above the ohmic one ...
    assert run_cell(super_ohmic, 0.01, 0.0).i_e > 10 * max(run_cell(ohmic, 0.01, 0.0).i_e, 1e-4)
    # ... and a comparable witness needs an alpha more than an order of magnitude smaller
    target = run_cell(ohmic, 0.3, 0.0).i_e
    alphas = np.geomspace(1e-4, 0.3, 25)
    first = next(a for a in alphas if run_cell(super_ohmic, a, 0.0).i_e >= target)
    assert first < 0.3 / 10

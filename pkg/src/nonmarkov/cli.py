"""Command line front end: ``nonmarkov <dephasing|gaussian-sweep|divisibility> --config FILE``.

Exit status: 0 success, 1 usage or configuration error, 2 numerical
failure, 3 success with flagged windows or failed sweep cells.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, dump_config, read_config
from .divisibility import dephasing_oracle, measure_family
from .lindblad import TableFormatError, dephasing_generator, propagate, read_propagator_table
from .sweep import BathModel, onset_alpha, sweep_i_entanglement

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_FLAGGED = 0, 1, 2, 3
FMT = "{:.12g}"

logger = logging.getLogger("nonmarkov")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x):
    return FMT.format(x)


def _write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(_fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def _rate_profile(cfg):
    profile = cfg["profile"]
    if profile == "constant":
        gamma = cfg["gamma"]
        return gamma, (lambda t: gamma)
    if profile == "sin":
        amp, freq = cfg["amplitude"], cfg["frequency"]
        return None, (lambda t: amp * math.sin(freq * t))
    path = Path(cfg["table"])
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read rate table {path}: {exc}") from None
    if data.shape[1] != 2 or data.shape[0] < 2 or np.any(np.diff(data[:, 0]) <= 0):
        raise UsageError(f"rate table {path} must have rows 't,gamma' with increasing t")
    ts, gs = data[:, 0].copy(), data[:, 1].copy()
    return None, (lambda t: float(np.interp(t, ts, gs)))


def run_dephasing(cfg, out, emit_plots=False):
    constant, rate = _rate_profile(cfg)
    horizon, steps = cfg["horizon"], cfg["steps"]
    gen = dephasing_generator(constant if constant is not None else rate)
    family = propagate(gen, horizon, steps)
    report = measure_family(family)
    oracle = dephasing_oracle(rate, horizon, steps)
    rows = [(t, rate(t), g, c) for t, g, c in zip(report.times, report.g, report.cumulative)]
    _write_csv(out / "g_series.csv", ("t", "gamma", "g", "I_cumulative"), rows)
    abs_err = abs(report.I - oracle)
    rel_err = abs_err / oracle if oracle > 0 else math.nan
    summary = [
        f"I={_fmt(report.I)}",
        f"I_oracle={_fmt(oracle)}",
        f"absolute_error={_fmt(abs_err)}",
        f"relative_error={_fmt(rel_err)}",
        f"D_NM={_fmt(report.D_NM)}",
        f"horizon={_fmt(horizon)}",
        f"truncated_lower_bound={str(report.truncated).lower()}",
        f"flagged_windows={report.flagged_windows}",
    ]
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    if emit_plots:
        (out / "plot_g.py").write_text(PLOT_G)
    return EXIT_FLAGGED if report.flags else EXIT_OK


def _alpha_grid(cfg):
    if cfg["alphas"] is not None:
        return sorted(cfg["alphas"])
    return np.geomspace(cfg["alpha_min"], cfg["alpha_max"], cfg["alpha_count"]).tolist()


def resolve_sweep(cfg):
    model = BathModel(
        exponent=cfg["exponent"],
        cutoff=cfg["cutoff"],
        modes=cfg["modes"],
        omega_min=cfg["omega_min"],
        omega_max=cfg["omega_max"],
        squeezing=cfg["squeezing"],
        horizon=cfg["horizon"],
        steps=cfg["steps"],
        system_frequency=cfg["system_frequency"],
        ancilla_frequency=cfg["ancilla_frequency"],
    )
    try:
        model = model.resolved()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg.update(omega_min=model.omega_min, omega_max=model.omega_max, horizon=model.horizon)
    return model


def run_gaussian_sweep(cfg, out, jobs=1, emit_plots=False):
    model = resolve_sweep(cfg)
    alphas = _alpha_grid(cfg)
    temps = sorted(cfg["temperatures"])
    results = sweep_i_entanglement(alphas, temps, model, jobs=jobs, keep_series=cfg["series"])
    _write_csv(out / "sweep.csv", ("alpha", "T", "I_E"), [(r.alpha, r.temperature, r.i_e) for r in results])
    if cfg["series"]:
        for r in results:
            if r.series is not None:
                r.series.write_csv(out / f"series_{_fmt(r.alpha)}_{_fmt(r.temperature)}.csv", FMT)
    failed = [r for r in results if not r.ok]
    summary = [f"cells={len(results)}", f"failed_cells={len(failed)}", "detection_threshold=0.0001"]
    summary += [f"onset_alpha T={_fmt(t)} alpha={_fmt(onset_alpha(results, t))}" for t in temps]
    summary += [f"failed alpha={_fmt(r.alpha)} T={_fmt(r.temperature)} error={r.error}" for r in failed]
    (out / "sweep_summary.txt").write_text("\n".join(summary) + "\n")
    if emit_plots:
        (out / "plot_sweep.py").write_text(PLOT_SWEEP)
    return EXIT_FLAGGED if failed else EXIT_OK


def run_divisibility_file(cfg, out, emit_plots=False):
    try:
        family = read_propagator_table(cfg["file"])
    except OSError as exc:
        raise UsageError(f"cannot read propagator table: {exc}") from None
    report = measure_family(family, cfg["cond_threshold"])
    report.write(out, FMT)
    if emit_plots:
        (out / "plot_g.py").write_text(PLOT_G.replace("g_series.csv", "g_report.csv"))
    for k, t, reasons in report.flags:
        logger.warning("window %d at t=%s flagged: %s", k, _fmt(t), ", ".join(reasons))
    return EXIT_FLAGGED if report.flags else EXIT_OK


COMMANDS = {
    "dephasing": run_dephasing,
    "gaussian-sweep": run_gaussian_sweep,
    "divisibility": run_divisibility_file,
}


def build_parser():
    parser = _Parser(prog="nonmarkov", description="Non-Markovianity measures for open quantum evolutions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("experiment", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="key = value configuration file")
    parser.add_argument("--out", help="output directory (overrides 'out' in the config)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for sweep cells")
    parser.add_argument("--emit-plots", action="store_true", help="also write a matplotlib plot script")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        cfg = read_config(args.experiment, args.config)
        out = Path(args.out or cfg["out"] or ".")
        cfg["out"] = str(out)
        out.mkdir(parents=True, exist_ok=True)
        kwargs = {"emit_plots": args.emit_plots}
        if args.experiment == "gaussian-sweep":
            kwargs["jobs"] = args.jobs
            resolve_sweep(cfg)
        status = COMMANDS[args.experiment](cfg, out, **kwargs)
        (out / "config.resolved").write_text(dump_config(cfg))
    except (ConfigError, UsageError, TableFormatError) as exc:
        print(f"nonmarkov: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"nonmarkov: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if status == EXIT_FLAGGED:
        print("nonmarkov: completed with flags, see the summary files", file=sys.stderr)
    return status


PLOT_G = '''"""Plot g(t) and the running integral from g_series.csv."""
import csv

import matplotlib.pyplot as plt

with open("g_series.csv") as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True)
ax1.plot(t, [float(r["g"]) for r in rows])
ax1.set_ylabel("g(t)")
ax2.plot(t, [float(r["I_cumulative"]) for r in rows])
ax2.set_ylabel("I(t)")
ax2.set_xlabel("t")
fig.savefig("g_series.png", dpi=150)
'''

PLOT_SWEEP = '''"""Plot I^(E) against alpha, one curve per temperature, from sweep.csv."""
import csv
from collections import defaultdict

import matplotlib.pyplot as plt

curves = defaultdict(list)
with open("sweep.csv") as fh:
    for r in csv.DictReader(fh):
        curves[float(r["T"])].append((float(r["alpha"]), float(r["I_E"])))
fig, ax = plt.subplots()
for temp, pts in sorted(curves.items()):
    pts.sort()
    ax.plot([a for a, _ in pts], [v for _, v in pts], marker="o", label=f"T = {temp:g}")
ax.set_xscale("log")
ax.set_xlabel("alpha")
ax.set_ylabel("I^(E)")
ax.legend()
fig.savefig("sweep.png", dpi=150)
'''


if __name__ == "__main__":
    sys.exit(main())

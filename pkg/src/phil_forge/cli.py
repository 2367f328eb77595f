"""``phil-forge`` command line.

Exit status: 0 on success, 2 when a closed-loop validation fails, 1 on
errors.  All CSV files use a fixed column order and ``%.12g`` formatting so
that identical configurations give byte-identical files.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config, parse_config
from .errors import PhilForgeError
from .interfaces import itm_interface, wrap_scaled_controller
from .lti import StateSpace
from .plant import assemble_plant
from .simulation import SIGNAL_NAMES, accuracy_metrics, run_closed_loop, sweep_scr
from .synthesis import ControllerRealization, synthesize, validate_closed_loop

log = logging.getLogger("phil_forge")

CONTROLLER_FILE = "controller.json"
SWEEP_COLUMNS = ("S", "interface", "stable", "ss_rms_eV", "ss_rms_eI", "ss_rms_tV", "ss_rms_tI")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, str):
        return x
    return "%.12g" % x


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


# ----------------------------------------------------------------------------
# controller artifact


def save_controller(path: Path, K: ControllerRealization):
    """JSON artifact; floats are written with ``repr`` and round-trip exactly."""
    g = K.sys
    report = K.synthesis_report
    doc = {
        "gamma_achieved": K.gamma_achieved,
        "sample_time": g.dt,
        "A": g.A.tolist(), "B": g.B.tolist(), "C": g.C.tolist(), "D": g.D.tolist(),
        "closed_loop_norm": report.get("closed_loop_norm"),
        "bisection": [[gm, ok] for gm, ok in report.get("history", [])],
    }
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_controller(path: Path) -> ControllerRealization:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise PhilForgeError(f"controller artifact {path} not found; run 'synth' first") from exc
    n = len(doc["A"])
    p, m = len(doc["D"]), len(doc["D"][0]) if doc["D"] else 0
    g = StateSpace(np.array(doc["A"], float).reshape(n, n), np.array(doc["B"], float).reshape(n, m),
                   np.array(doc["C"], float).reshape(p, n), np.array(doc["D"], float).reshape(p, m),
                   doc["sample_time"])
    return ControllerRealization(g, float(doc["gamma_achieved"]),
                                 {"closed_loop_norm": doc.get("closed_loop_norm")})


# ----------------------------------------------------------------------------
# commands


def _out(cfg: RunConfig, args) -> Path:
    out = Path(args.out if args.out else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _controller(cfg, out: Path, required: bool) -> ControllerRealization:
    path = out / CONTROLLER_FILE
    if path.exists() or required:
        return load_controller(path)
    log.info("no controller artifact in %s, synthesizing", out)
    K = _synthesize(cfg)
    save_controller(path, K)
    return K


def _synthesize(cfg: RunConfig) -> ControllerRealization:
    plant = assemble_plant(cfg.scenario, cfg.scaling, cfg.weights, cfg.objective)
    return synthesize(plant, cfg.synthesis)


def cmd_synth(cfg: RunConfig, args) -> int:
    out = _out(cfg, args)
    K = _synthesize(cfg)
    save_controller(out / CONTROLLER_FILE, K)
    (out / "config_resolved.json").write_text(json.dumps(cfg.dump(), indent=1) + "\n",
                                              encoding="utf-8")
    print(f"gamma = {K.gamma_achieved:.6g}, controller order {K.sys.n_states}")
    return 0


def cmd_validate(cfg: RunConfig, args) -> int:
    out = _out(cfg, args)
    K = _controller(cfg, out, required=True)
    plant = assemble_plant(cfg.scenario, cfg.scaling, cfg.weights, cfg.objective)
    rep = validate_closed_loop(plant, K, f_max=cfg.f_max, n_points=cfg.n_points)
    rows = []
    if rep.stable:
        for (zn, wn), curve in rep.channel_curves_db.items():
            for f, g in zip(rep.frequencies_hz, curve):
                rows.append((f, f"{zn}<-{wn}", g))
    _write_csv(out / "freqresp.csv", ("freq_hz", "channel", "gain_db"), rows)
    summary = {
        "pass": rep.passed,
        "stable": rep.stable,
        "f_max": rep.f_max,
        "hinf_norm": rep.hinf_norm,
        "violations": [f"{z}<-{w}" for z, w in rep.violations],
    }
    (out / "validation.json").write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
    print("PASS" if rep.passed else "FAIL", "stable" if rep.stable else "unstable",
          *summary["violations"])
    return 0 if rep.passed else 2


def _interface(cfg, out, kind, required):
    if kind == "itm":
        return itm_interface(cfg.itm_cutoff, cfg.scenario.sample_time)
    return wrap_scaled_controller(_controller(cfg, out, required), cfg.scaling)


def cmd_simulate(cfg: RunConfig, args) -> int:
    out = _out(cfg, args)
    scenario = cfg.scenario if args.scr is None else cfg.scenario.with_scr(args.scr)
    itf = _interface(cfg, out, args.interface, required=True)
    trace = run_closed_loop(scenario, itf, cfg.duration)
    t = trace.t
    rows = []
    for p, phase in enumerate(trace.phases):
        for k in range(trace.n_samples):
            rows.append((t[k], phase, *(trace.signals[n][p, k] for n in SIGNAL_NAMES)))
    _write_csv(out / "trace.csv", ("t", "phase", *SIGNAL_NAMES), rows)
    if trace.diverged:
        print(f"diverged at sample {trace.divergence_index}")
    elif trace.n_samples:
        m = accuracy_metrics(trace, cfg.settle_fraction)
        print(f"ss_rms_eV = {m.ss_rms_eV:.6g} V, ss_rms_eI = {m.ss_rms_eI:.6g} A")
    return 0


def _sweep_rows(cfg, itf, label, keep_traces=False):
    rows = sweep_scr(cfg.scenario, itf, cfg.scr_values, cfg.duration, cfg.settle_fraction,
                     keep_traces=keep_traces)
    table = [(r.scr, label, r.stable, r.metrics.ss_rms_eV, r.metrics.ss_rms_eI,
              r.metrics.ss_rms_tV, r.metrics.ss_rms_tI) for r in rows]
    return rows, table


def cmd_sweep(cfg: RunConfig, args) -> int:
    out = _out(cfg, args)
    itf = _interface(cfg, out, args.interface, required=False)
    _, table = _sweep_rows(cfg, itf, args.interface)
    _write_csv(out / "sweep.csv", SWEEP_COLUMNS, table)
    for row in table:
        print(*(_fmt(v) for v in row[:3]))
    return 0


_PLOT_SCRIPT = '''"""Error traces of phase a per short-circuit ratio (generated by phil-forge compare)."""
import csv
from collections import defaultdict

import matplotlib.pyplot as plt

data = defaultdict(lambda: defaultdict(list))
with open("compare_traces.csv") as fh:
    for row in csv.DictReader(fh):
        key = (float(row["S"]), row["interface"])
        for col in ("t", "e_V", "e_I"):
            data[key][col].append(float(row[col]))

scrs = sorted({s for s, _ in data}, reverse=True)
fig, axes = plt.subplots(len(scrs), 2, figsize=(9, 1.8 * len(scrs)), sharex=True, squeeze=False)
for i, s in enumerate(scrs):
    for label, style in (("hinf", "-"), ("itm", "--")):
        d = data.get((s, label))
        if not d:
            continue
        axes[i][0].plot(d["t"], d["e_V"], style, label=label)
        axes[i][1].plot(d["t"], d["e_I"], style, label=label)
    axes[i][0].set_ylabel(f"S = {s:g}")
axes[0][0].set_title("e_V = V1 - Vc (V)")
axes[0][1].set_title("e_I = I1 - Id (A)")
axes[0][0].legend()
for ax in axes[-1]:
    ax.set_xlabel("t (s)")
fig.tight_layout()
fig.savefig("compare.png", dpi=150)
'''


def cmd_compare(cfg: RunConfig, args) -> int:
    out = _out(cfg, args)
    table, traces = [], []
    for label in ("hinf", "itm"):
        itf = _interface(cfg, out, label, required=False)
        rows, part = _sweep_rows(cfg, itf, label, keep_traces=True)
        table += part
        for r in rows:
            if r.trace is None or not r.stable:
                continue  # divergent runs are not drawn
            s = r.trace.signals
            eV = s["V1"][0] - s["Vc"][0]
            eI = s["I1"][0] - s["Id"][0]
            for k, t in enumerate(r.trace.t):
                traces.append((r.scr, label, t, eV[k], eI[k]))
    _write_csv(out / "compare.csv", SWEEP_COLUMNS, table)
    _write_csv(out / "compare_traces.csv", ("S", "interface", "t", "e_V", "e_I"), traces)
    (out / "plot_compare.py").write_text(_PLOT_SCRIPT, encoding="utf-8")
    for row in table:
        print(*(_fmt(v) for v in row[:3]))
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phil-forge",
                                description="H-infinity model-matching PHIL interface toolkit")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run configuration (defaults when omitted)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--interface", choices=("hinf", "itm"), default="hinf")
    p.add_argument("--scr", type=float, help="short-circuit ratio for 'simulate'")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else parse_config("{}")
        if args.scr is not None and not args.scr > 0:
            raise PhilForgeError("--scr must be positive")
        return COMMANDS[args.command](cfg, args)
    except (PhilForgeError, ValueError, OSError) as exc:
        print(f"phil-forge: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

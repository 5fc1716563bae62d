"""Command-line entry point: ``chiralep <experiment> [--config FILE] [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .averaging import MicroscopicParams, decompose, mc_orientation_average
from .config import ConfigError, Experiment, RunConfig, parse_config, serialize_config
from .dynamics import (
    BranchTrackingError,
    PropagationError,
    loop_time_sweep,
    ep_loop,
    run_encirclement,
)
from .eps import (
    EPNotConverged,
    closed_form_eps,
    grid_map,
    ratio_sweep,
    refine_ep,
    response_scaling_probe,
)
from .model import EffectiveParams, Handedness

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

RATIO_HEADER = ["ratio", "gamma2", "enantiomer", "branch", "delta_ep", "omega12_ep"]
MAP_HEADER = ["delta", "omega12", "log10_gap_R", "log10_gap_L"]
TIMESERIES_HEADER = [
    "tau", "re_c1", "im_c1", "re_c2", "im_c2", "re_aplus", "im_aplus",
    "re_aminus", "im_aminus", "pop_plus_norm", "pop_minus_norm", "branch_label",
]
LOOP_SWEEP_HEADER = [
    "loop_time", "enantiomer", "direction", "pop_plus_norm", "pop_minus_norm",
    "pop_plus_raw", "pop_minus_raw", "eigenvalue_swap", "dominant_final_state", "error",
]


# -- emission ----------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (complex, np.complexfloating)):
        return [_jsonable(value.real), _jsonable(value.imag)]
    return value


def emit_csv(path, header, rows) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit_json(path, record) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(record), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit(table_or_record, fmt: str, path) -> list[Path]:
    """Write a table ``(header, rows)`` as csv/json/both, or a dict as json."""
    path = Path(path)
    if isinstance(table_or_record, dict):
        return [emit_json(path.with_suffix(".json"), table_or_record)]
    header, rows = table_or_record
    written = []
    if fmt in ("csv", "both"):
        written.append(emit_csv(path.with_suffix(".csv"), header, rows))
    if fmt in ("json", "both"):
        records = [dict(zip(header, row)) for row in rows]
        written.append(emit_json(path.with_suffix(".json"), {"columns": header, "rows": records}))
    return written


# -- experiments -------------------------------------------------------------


def _loop_setup(p, loop_time, direction="as_written"):
    params = EffectiveParams(p["gamma1"], p["gamma2"], raman=p["raman"])
    center = None
    if p["center_delta"] is not None or p["center_omega"] is not None:
        if p["center_delta"] is None or p["center_omega"] is None:
            raise ConfigError("center_delta and center_omega must be given together")
        center = (p["center_delta"], p["center_omega"])
    path = ep_loop(params, loop_time, direction, center, p["radius"], p["phase"])
    return params, path


def _run_ep_locate(p, cfg, out):
    g1 = p["gamma1"]
    if (p["gamma2"] is None) == (p["ratio"] is None):
        raise ConfigError("give exactly one of gamma2 or ratio")
    g2 = p["gamma2"] if p["gamma2"] is not None else p["ratio"] * g1
    records = []
    for hand in (Handedness.RIGHT, Handedness.LEFT):
        for ep in closed_form_eps(g1, g2, hand):
            refined = refine_ep(ep, g1, g2, hand)
            records.append({
                "enantiomer": hand.value,
                "branch": ep.branch_index,
                "delta": ep.delta,
                "omega12": ep.omega12,
                "residual": ep.residual,
                "refined_delta": refined.delta,
                "refined_omega12": refined.omega12,
                "refined_residual": refined.residual,
            })
    return emit({"gamma1": g1, "gamma2": g2, "eps": records}, "json", out / "ep_locate")


def _run_ratio_sweep(p, cfg, out):
    rows = ratio_sweep(p["gamma1"], p["ratios"])
    table = [
        (r.ratio, r.gamma2, r.handedness.value, r.branch, r.delta_ep, r.omega12_ep)
        for r in rows
    ]
    flagged = [i for i, r in enumerate(rows) if not r.refined]
    files = emit((RATIO_HEADER, table), cfg.output_format, out / "ratio_sweep")
    return files, {"unrefined_rows": flagged}


def _auto_range(lo, hi, center, span):
    lo = center - span if lo is None else lo
    hi = center + span if hi is None else hi
    return lo, hi


def _run_map(p, cfg, out):
    base = EffectiveParams(p["gamma1"], p["gamma2"], p["delta"], p["omega12"])
    span = 2.0 * max(math.sqrt(base.gamma1 * base.gamma2), abs(base.half_difference) / 2, 1e-300)
    x_lo, x_hi = _auto_range(p["x_min"], p["x_max"], 0.0, span)
    y_lo, y_hi = _auto_range(p["y_min"], p["y_max"], 0.0, span)
    if p["x_count"] < 2 or p["y_count"] < 2:
        raise ConfigError("grid counts must be at least 2")
    grid = grid_map(
        base,
        p["x_axis"], np.linspace(x_lo, x_hi, p["x_count"]),
        p["y_axis"], np.linspace(y_lo, y_hi, p["y_count"]),
    )
    header = list(MAP_HEADER)
    if (p["x_axis"], p["y_axis"]) != ("delta", "omega12"):
        header[:2] = [p["x_axis"], p["y_axis"]]
    rows = [
        (x, y, grid["R"][i, j], grid["L"][i, j])
        for i, x in enumerate(grid["x"])
        for j, y in enumerate(grid["y"])
    ]
    return emit((header, rows), cfg.output_format, out / "eigengap_map")


def _run_encircle(p, cfg, out):
    params, path = _loop_setup(p, p["loop_time"], p["direction"])
    params = params.with_(handedness=Handedness.parse(p["enantiomer"]))
    res = run_encirclement(
        params, path, p["initial"], p["rel_tol"], p["abs_tol"],
        samples=p["samples"], min_samples=p["min_samples"],
    )
    traj = res.trajectory
    pops = traj.normalized_populations
    rows = []
    for k, t in enumerate(traj.times):
        c1, c2 = traj.bare_amplitudes[k]
        ap, am = traj.adiabatic_amplitudes[k]
        rows.append((
            t / path.loop_time, c1.real, c1.imag, c2.real, c2.imag,
            ap.real, ap.imag, am.real, am.imag, pops[k, 0], pops[k, 1],
            int(traj.branch_labels[k]),
        ))
    files = emit((TIMESERIES_HEADER, rows), cfg.output_format, out / "encircle_timeseries")
    summary = {
        "enantiomer": params.handedness.value,
        "direction": path.direction.value,
        "loop_time": path.loop_time,
        "center_delta": path.center_delta,
        "center_omega": path.center_omega,
        "radius": path.radius,
        "phase": path.phase,
        **res.summary(),
        "branch_cross_taus": [t / path.loop_time for t in traj.branch_cross_times],
        "nad_taus": [t / path.loop_time for t in res.nad_times],
    }
    files += emit(summary, "json", out / "encircle_summary")
    return files


def _run_loop_sweep(p, cfg, out):
    times = p["loop_times"] or list(np.geomspace(p["t_min"], p["t_max"], p["t_count"]))
    params, path = _loop_setup(p, max(times))
    rows = loop_time_sweep(
        params, path, times, p["initial"], p["rel_tol"], p["abs_tol"],
        samples=p["samples"], workers=p["workers"],
    )
    table = [
        (r.loop_time, r.handedness.value, r.direction.value, r.pop_plus_norm,
         r.pop_minus_norm, r.pop_plus_raw, r.pop_minus_raw, r.eigenvalue_swap,
         r.dominant_final_state, r.error)
        for r in rows
    ]
    files = emit((LOOP_SWEEP_HEADER, table), cfg.output_format, out / "loop_sweep")
    return files, {"failed_rows": [i for i, r in enumerate(rows) if r.error]}


def _run_average(p, cfg, out):
    micro = MicroscopicParams(
        p["d1e"], p["d2e"], p["d12"], p["f1"], p["f2"], p["f3"],
        p["omega1"], p["omega2"], p["omega3"], p["e1"], p["e2"],
    )
    dec = decompose(micro)
    mean, err = mc_orientation_average(micro, p["mc_samples"], cfg.seed, p["shards"])
    record = {
        "chi_m": dec.chi_m,
        "h3": dec.h3,
        "phi_m": dec.phi_m,
        "phi_l": dec.phi_l,
        "averaged_value": dec.averaged_value,
        "mc_estimate": mean,
        "mc_std_error": err,
        "mc_samples": p["mc_samples"],
        "deviation_in_std_errors": abs(mean - dec.averaged_value) / err if err > 0 else None,
    }
    return emit(record, "json", out / "average")


def _run_scaling(p, cfg, out):
    g1, g2 = p["gamma1"], p["gamma2"]
    hand = Handedness.parse(p["enantiomer"])
    ep = closed_form_eps(g1, g2, hand)[int(p["branch"])]
    ep = refine_ep(ep, g1, g2, hand)
    direction = (math.cos(p["angle"]), math.sin(p["angle"]))
    eps = np.geomspace(p["eps_min"], p["eps_max"], p["eps_count"]) * (g1 + g2)
    slope = response_scaling_probe(ep, g1, g2, direction, eps)
    record = {
        "ep_delta": ep.delta,
        "ep_omega12": ep.omega12,
        "enantiomer": hand.value,
        "direction": list(direction),
        "epsilons": list(eps),
        "fitted_exponent": slope,
    }
    return emit(record, "json", out / "scaling")


RUNNERS = {
    Experiment.EP_LOCATE: _run_ep_locate,
    Experiment.RATIO_SWEEP: _run_ratio_sweep,
    Experiment.EIGENGAP_MAP: _run_map,
    Experiment.ENCIRCLE: _run_encircle,
    Experiment.LOOP_SWEEP: _run_loop_sweep,
    Experiment.AVERAGE: _run_average,
    Experiment.SCALING_PROBE: _run_scaling,
}

NUMERIC_ERRORS = (EPNotConverged, PropagationError, BranchTrackingError, FloatingPointError,
                  np.linalg.LinAlgError, ValueError)


def dispatch(config: RunConfig) -> tuple[int, list[Path]]:
    """Run one experiment, write its files and a manifest; return (status, files)."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "chiralep",
        "version": __version__,
        "experiment": config.experiment.value,
        "seed": config.seed,
        "output_format": config.output_format,
        "parameters": dict(config.parameters),
        "config_text": serialize_config(config),
    }
    status, files, extra = EXIT_OK, [], {}
    try:
        result = RUNNERS[config.experiment](config.typed(), config, out)
        if isinstance(result, tuple):
            files, extra = result
        else:
            files = result
        manifest["status"] = "ok"
    except ConfigError as exc:
        status = EXIT_CONFIG
        manifest["status"] = "error"
        manifest["error"] = {"kind": "config", "type": type(exc).__name__, "message": str(exc)}
    except NUMERIC_ERRORS as exc:
        status = EXIT_NUMERIC
        manifest["status"] = "error"
        manifest["error"] = {"kind": "numerical", "type": type(exc).__name__, "message": str(exc)}
    manifest.update(extra)
    manifest["files"] = [f.name for f in files]
    emit_json(out / "manifest.json", manifest)
    if status != EXIT_OK:
        print(json.dumps(manifest["error"]), file=sys.stderr)
    return status, files + [out / "manifest.json"]


def _parse_set(items):
    overrides = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chiralep",
        description="Enantiosensitive exceptional points of a driven chiral two-level model.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for exp in Experiment:
        p = sub.add_parser(exp.value)
        p.add_argument("--config", help="configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", help="unsigned 64-bit seed")
        p.add_argument("--format", choices=["csv", "json", "both"])
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one parameter (repeatable)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = ""
        if args.config:
            text = Path(args.config).read_text(encoding="utf-8")
        overrides = _parse_set(args.set)
        for key, value in (("output_dir", args.out), ("seed", args.seed), ("format", args.format)):
            if value is not None:
                overrides[key] = value
        config = parse_config(text, args.experiment, overrides)
    except (ConfigError, OSError) as exc:
        print(json.dumps({"kind": "config", "type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_CONFIG
    status, _ = dispatch(config)
    return status


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: configs, scenario runs, sweeps, traces, reports.

The config file is a flat, commented key = value schema (see KEY_HELP);
unspecified keys fall back to the documented defaults. All outputs are
confined to the --out directory: trace CSVs, a summary table, a JSON manifest
with content digests, and (with --plot-data) two-column plot-data files plus
rendered PNG figures of the same series.
"""

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .agents import DRIVER_KINDS
from .authority import SwitchingConfig
from .figures import render_effort_figure, render_lateral_figure, render_switch_figure
from .sim import (
    SCENARIO_KINDS,
    PathShape,
    ScenarioConfig,
    run_scenario,
    verify_trace,
)
from .vehicle import VehicleParams, build_continuous, discretize

__all__ = ["load_config", "write_config", "run", "main"]


class ConfigError(ValueError):
    pass


def _as_float(raw):
    return float(raw)


def _as_int(raw):
    value = int(raw)
    return value


def _as_bool(raw):
    lowered = raw.lower()
    if lowered in ("true", "on", "yes", "1"):
        return True
    if lowered in ("false", "off", "no", "0"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _as_scenario(raw):
    if raw not in SCENARIO_KINDS:
        raise ValueError(f"expected one of {', '.join(SCENARIO_KINDS)}, got {raw!r}")
    return raw


def _as_driver(raw):
    if raw not in DRIVER_KINDS:
        raise ValueError(f"expected one of {', '.join(DRIVER_KINDS)}, got {raw!r}")
    return raw


# key -> (parser, help text); defaults are resolved in _scenario_from_values
KEY_HELP = {
    "scenario": (_as_scenario, "path_following | obstacle_avoidance | combined"),
    "duration": (_as_float, "run length [s]; default 10 (20 for combined)"),
    "driver": (_as_driver, "adaptive | conventional driver model"),
    "cf": (_as_float, "front cornering stiffness [N/rad]"),
    "cr": (_as_float, "rear cornering stiffness [N/rad]"),
    "a": (_as_float, "mass center to front axle [m]"),
    "b": (_as_float, "mass center to rear axle [m]"),
    "m": (_as_float, "vehicle mass [kg]"),
    "iz": (_as_float, "polar moment of inertia [kg m^2]"),
    "steering_ratio": (_as_float, "steering-wheel to road-wheel ratio"),
    "u_long": (_as_float, "constant longitudinal velocity [m/s]"),
    "t_s": (_as_float, "sampling period [s]"),
    "horizon": (_as_int, "prediction horizon [steps]"),
    "q_a_y": (_as_float, "automation output weight on y"),
    "q_a_psi": (_as_float, "automation output weight on psi"),
    "r_a": (_as_float, "automation input weight"),
    "q_d_y": (_as_float, "driver output weight on y (default by scenario)"),
    "q_d_psi": (_as_float, "driver output weight on psi (default by scenario)"),
    "r_d": (_as_float, "driver input weight"),
    "lambda_d": (_as_float, "initial driver authority weight"),
    "lambda_a": (_as_float, "initial automation authority weight"),
    "amplitude": (_as_float, "reference sinusoid amplitude [m]"),
    "period": (_as_float, "reference sinusoid period [s]"),
    "offset": (_as_float, "driver lane-change offset [m]"),
    "deviation_start": (_as_float, "driver deviation start time [s]"),
    "deviation_duration": (_as_float, "driver deviation transition length [s]"),
    "switching": (_as_bool, "enable the intent detector (default: on for combined)"),
    "window": (_as_int, "detector window length [steps]"),
    "threshold": (_as_float, "detector switching threshold [rad]"),
    "lambda_d_high": (_as_float, "driver weight after mismatch detection"),
    "lambda_d_low": (_as_float, "driver weight under matched intentions"),
    "q_d_hat_y": (_as_float, "estimated driver output weight on y"),
    "q_d_hat_psi": (_as_float, "estimated driver output weight on psi"),
    "r_d_hat": (_as_float, "estimated driver input weight (default: r_d)"),
    "clear_window_on_switch": (_as_bool, "drop the residual window after a switch"),
}

SUMMARY_COLUMNS = ("scenario", "lambda_D", "lambda_A", "rms_y_err", "rms_psi_err",
                   "rms_uD", "peak_uD", "latency_s", "switches")


def _parse_file(path):
    values = {}
    if not Path(path).is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
            key, _, raw = text.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in KEY_HELP:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            parser = KEY_HELP[key][0]
            try:
                values[key] = parser(raw)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: invalid value for {key!r}: {exc}") from None
    return values


def _scenario_from_values(values):
    """Validated ScenarioConfig from a raw key dict; unset keys take defaults."""
    kind = values.get("scenario", "path_following")
    duration = values.get("duration", 20.0 if kind == "combined" else 10.0)
    vehicle_keys = ("cf", "cr", "a", "b", "m", "iz", "steering_ratio", "u_long")
    vehicle = VehicleParams(**{k: values[k] for k in vehicle_keys if k in values})
    shape = PathShape(
        amplitude=values.get("amplitude", 2.0),
        period=values.get("period", 10.0),
        offset=values.get("offset", 3.0),
        deviation_start=values.get("deviation_start"),  # None: kind default
        deviation_duration=values.get("deviation_duration", 2.0),
    )
    r_d = values.get("r_d", 0.03)
    switching = None
    if values.get("switching", kind == "combined"):
        switching = SwitchingConfig(
            window=values.get("window", 50),
            threshold=values.get("threshold", 0.1),
            lambda_d_high=values.get("lambda_d_high", 0.7),
            lambda_d_low=values.get("lambda_d_low", 0.3),
            q_d_hat=np.diag([values.get("q_d_hat_y", 0.028),
                             values.get("q_d_hat_psi", 0.015)]),
            r_d_hat=np.array([[values.get("r_d_hat", r_d)]]),
            clear_on_switch=values.get("clear_window_on_switch", False),
        )
    q_d = None
    if "q_d_y" in values or "q_d_psi" in values:
        defaults = (36.0, 20.0) if kind == "obstacle_avoidance" else (0.036, 0.02)
        q_d = (values.get("q_d_y", defaults[0]), values.get("q_d_psi", defaults[1]))
    try:
        return ScenarioConfig(
            kind=kind,
            duration=duration,
            vehicle=vehicle,
            t_s=values.get("t_s", 0.02),
            horizon=values.get("horizon", 50),
            q_a=(values.get("q_a_y", 1.5), values.get("q_a_psi", 0.6)),
            r_a=values.get("r_a", 0.03),
            q_d=q_d,
            r_d=r_d,
            lambda_d=values.get("lambda_d"),
            lambda_a=values.get("lambda_a"),
            driver_kind=values.get("driver", "adaptive"),
            shape=shape,
            switching=switching,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ScenarioConfig:
    """Parse and validate a scenario config file."""
    return _scenario_from_values(_parse_file(path))


def write_config(cfg: ScenarioConfig, path):
    """Write a config file that loads back to exactly cfg."""
    lines = ["# sharedsteer scenario config", ""]

    def put(key, value):
        if isinstance(value, bool):
            value = "on" if value else "off"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")

    put("scenario", cfg.kind)
    put("duration", float(cfg.duration))
    put("driver", cfg.driver_kind)
    vp = cfg.vehicle
    for key, value in [("cf", vp.cf), ("cr", vp.cr), ("a", vp.a), ("b", vp.b),
                       ("m", vp.m), ("iz", vp.iz), ("steering_ratio", vp.steering_ratio),
                       ("u_long", vp.u_long)]:
        put(key, float(value))
    put("t_s", float(cfg.t_s))
    put("horizon", cfg.horizon)
    put("q_a_y", float(cfg.q_a[0]))
    put("q_a_psi", float(cfg.q_a[1]))
    put("r_a", float(cfg.r_a))
    put("q_d_y", float(cfg.q_d[0]))
    put("q_d_psi", float(cfg.q_d[1]))
    put("r_d", float(cfg.r_d))
    put("lambda_d", float(cfg.lambda_d))
    put("lambda_a", float(cfg.lambda_a))
    sh = cfg.shape
    put("amplitude", float(sh.amplitude))
    put("period", float(sh.period))
    put("offset", float(sh.offset))
    put("deviation_start", float(sh.deviation_start))
    put("deviation_duration", float(sh.deviation_duration))
    sw = cfg.switching
    put("switching", sw is not None)
    if sw is not None:
        put("window", sw.window)
        put("threshold", float(sw.threshold))
        put("lambda_d_high", float(sw.lambda_d_high))
        put("lambda_d_low", float(sw.lambda_d_low))
        put("q_d_hat_y", float(sw.q_d_hat[0, 0]))
        put("q_d_hat_psi", float(sw.q_d_hat[1, 1]))
        put("r_d_hat", float(sw.r_d_hat[0, 0]))
        put("clear_window_on_switch", sw.clear_on_switch)
    Path(path).write_text("\n".join(lines) + "\n")


def _format_cell(value):
    if value is None:
        return "-"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def _write_summary(path, rows):
    table = [SUMMARY_COLUMNS] + [tuple(_format_cell(v) for v in row) for row in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(SUMMARY_COLUMNS))]
    with open(path, "w") as fh:
        for row in table:
            fh.write("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() + "\n")


def _write_plot_data(path, t, values):
    with open(path, "w") as fh:
        fh.write("# t value\n")
        for ti, vi in zip(t, values):
            fh.write(f"{ti:.17g} {vi:.17g}\n")


def _sha256(path):
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def _run_tag(cfg, sweep_values):
    if sweep_values is None:
        return cfg.kind
    return f"{cfg.kind}_lambda_a_{cfg.lambda_a:g}"


def run(args) -> int:
    """Execute the requested runs; returns the process exit status."""
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name):
        path = out_dir / name
        written.append(path)
        return path

    try:
        values = _parse_file(args.config) if args.config else {}
        if args.scenario:
            values["scenario"] = args.scenario
        if args.driver:
            values["driver"] = args.driver
        sweep_values = None
        if args.sweep_lambda_a:
            try:
                sweep_values = [float(v) for v in args.sweep_lambda_a.split(",") if v.strip()]
            except ValueError:
                raise ConfigError(f"invalid sweep list {args.sweep_lambda_a!r}")
            if not sweep_values:
                raise ConfigError("sweep list is empty")
            if len(set(sweep_values)) != len(sweep_values):
                raise ConfigError("sweep list contains duplicate values")

        base_cfg = _scenario_from_values(values)
        configs = [base_cfg]
        if sweep_values is not None:
            configs = [replace(base_cfg, lambda_a=v, lambda_d=None) for v in sweep_values]

        summary_rows = []
        runs = []
        for cfg in configs:
            tag = _run_tag(cfg, sweep_values)
            trace, metrics = run_scenario(cfg)
            dyn = discretize(build_continuous(cfg.vehicle), cfg.t_s)
            verify_trace(trace, dyn)
            trace.to_csv(emit(f"trace_{tag}.csv"))
            summary_rows.append((cfg.kind, cfg.lambda_d, cfg.lambda_a,
                                 metrics.rms_y_err, metrics.rms_psi_err,
                                 metrics.rms_u_d, metrics.peak_u_d,
                                 metrics.latency_s, metrics.switch_count))
            runs.append((tag, cfg, trace, metrics))

        _write_summary(emit("summary.txt"), summary_rows)

        if args.plot_data:
            labeled = [(f"lambda_A={cfg.lambda_a:g}", trace) for _, cfg, trace, _ in runs]
            for (tag, cfg, trace, metrics) in runs:
                _write_plot_data(emit(f"plotdata_y_vs_t_{tag}.dat"), trace.t, trace.y)
                _write_plot_data(emit(f"plotdata_uD_vs_t_{tag}.dat"), trace.t, trace.u_D)
            render_lateral_figure(labeled, emit("fig_y_vs_t.png"))
            render_effort_figure(labeled, emit("fig_uD_vs_t.png"))
            for (tag, cfg, trace, metrics) in runs:
                if metrics.switch_count > 0:
                    switch = int(np.nonzero(np.diff(trace.lambda_D) != 0.0)[0][0] + 1)
                    t_s = cfg.t_s
                    half = int(round(1.0 / t_s))
                    lo = max(0, switch - half)
                    hi = min(len(trace), switch + half + 1)
                    _write_plot_data(emit(f"plotdata_uD_switch_{tag}.dat"),
                                     trace.t[lo:hi], trace.u_D[lo:hi])
                    render_switch_figure(trace, switch, emit(f"fig_uD_switch_{tag}.png"))

        manifest = {
            "digest_algorithm": "sha256",
            "scenario": base_cfg.kind,
            "driver": base_cfg.driver_kind,
            "config": str(args.config) if args.config else None,
            "out_dir": str(args.out),
            "sweep": ({"parameter": "lambda_a", "values": sweep_values}
                      if sweep_values is not None else None),
            "files": {p.name: _sha256(p) for p in sorted(written)},
        }
        (out_dir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return 0
    except Exception as exc:
        for path in written:
            path.unlink(missing_ok=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sharedsteer",
        description="Closed-loop shared-steering simulation runner.")
    parser.add_argument("--scenario", choices=SCENARIO_KINDS,
                        help="scenario kind (overrides the config file)")
    parser.add_argument("--config", help="path to a key = value config file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--sweep-lambda-a", metavar="LIST",
                        help="comma-separated automation weights, one run each")
    parser.add_argument("--driver", choices=DRIVER_KINDS,
                        help="driver model (overrides the config file)")
    parser.add_argument("--plot-data", action="store_true",
                        help="also emit two-column plot data files and PNG figures")
    parser.add_argument("--seedless", action="store_true",
                        help="assert the run uses no randomness (always true; guard flag)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: config parsing, experiment dispatch, CSV + manifest.

Config files are flat ``key = value`` text; ``#``/``;`` comments and
``[section]`` headers are tolerated and ignored. Every run emits one CSV
(schema fixed per subcommand) and a plain-text manifest echoing the resolved
configuration, the master seed, the tool version, and the wall-clock
duration, which together suffice to regenerate the CSV byte for byte.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .detector import COVARIANCE_RATIO, ENERGY
from .errors import ConfigInvalid, CovdetError
from .experiment import (
    ENERGY_UNCERTAIN,
    ExperimentPlan,
    ProjectionSpec,
    _STREAM_CALIBRATE,
    calibrate_threshold,
    evaluate_detectors,
    roc_curve,
    sweep_snr,
    sweep_sparsity,
)
from .scenario import DirectRho, PowerExponential, ScenarioConfig

# Default master seed; fixed so runs are reproducible unless a seed is given.
DEFAULT_SEED = 20250101

_INT_KEYS = frozenset({"num_sensors", "M", "K", "T", "trials", "seed"})
_FLOAT_KEYS = frozenset(
    {
        "inter_sensor_distance",
        "rho",
        "theta1",
        "sigma_s2",
        "sigma_v2",
        "sigma_w2",
        "compression_ratio",
        "s0",
        "alpha0",
        "beta_db",
    }
)
_STR_KEYS = frozenset({"projection_kind"})
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS

_DEFAULT_NOISE_GRID_DB = "-10,-5,0,5,10"
_DEFAULT_SNR_GRID_DB = "-12,-9,-6,-3,0"
_DEFAULT_SPARSITY_SNR_GRID_DB = "-6,-4,-2,0,2"


def _read_raw_config(path: Path) -> dict[str, str]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigInvalid("config", f"cannot read {path}: {exc}") from exc
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        for marker in ("#", ";"):
            if marker in line:
                line = line.split(marker, 1)[0]
        line = line.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigInvalid(key, "unknown configuration key")
        if key in raw:
            raise ConfigInvalid(key, "duplicate key")
        if not value:
            raise ConfigInvalid(key, "empty value")
        raw[key] = value
    return raw


def _convert(raw: dict[str, str]) -> dict[str, object]:
    values: dict[str, object] = {}
    for key, text in raw.items():
        try:
            if key in _INT_KEYS:
                values[key] = int(text)
            elif key in _FLOAT_KEYS:
                values[key] = float(text)
            else:
                values[key] = text
        except ValueError:
            expected = "an integer" if key in _INT_KEYS else "a real number"
            raise ConfigInvalid(key, f"expected {expected}, got {text!r}") from None
    return values


def parse_config(path: str | os.PathLike) -> ExperimentPlan:
    """Parse a config file into an ExperimentPlan, applying documented defaults.

    Defaults: K=3, projection_kind=orthonormal, s0=1, beta_db=0,
    inter_sensor_distance=1, seed=DEFAULT_SEED. ``rho``/``theta1`` and
    ``compression_ratio``/``M`` are mutually exclusive pairs, one of each
    required. Unknown keys are hard errors.
    """
    values = _convert(_read_raw_config(Path(path)))

    for key in ("num_sensors", "sigma_s2", "sigma_v2", "sigma_w2", "T", "alpha0", "trials"):
        if key not in values:
            raise ConfigInvalid(key, "required key is missing")
    if "rho" in values and "theta1" in values:
        raise ConfigInvalid("rho", "mutually exclusive with theta1; give exactly one")
    if "rho" not in values and "theta1" not in values:
        raise ConfigInvalid("rho", "either rho or theta1 is required")
    if "compression_ratio" in values and "M" in values:
        raise ConfigInvalid(
            "compression_ratio", "mutually exclusive with M; give exactly one"
        )
    if "compression_ratio" not in values and "M" not in values:
        raise ConfigInvalid("compression_ratio", "either compression_ratio or M is required")

    if "rho" in values:
        correlation = DirectRho(float(values["rho"]))
    else:
        correlation = PowerExponential(float(values["theta1"]))

    scenario = ScenarioConfig(
        num_sensors=int(values["num_sensors"]),
        correlation=correlation,
        sigma_s2=float(values["sigma_s2"]),
        sigma_v2=float(values["sigma_v2"]),
        sigma_w2=float(values["sigma_w2"]),
        inter_sensor_distance=float(values.get("inter_sensor_distance", 1.0)),
    )

    if "M" in values:
        m = int(values["M"])
    else:
        ratio = float(values["compression_ratio"])
        if not (0.0 < ratio <= 1.0):
            raise ConfigInvalid(
                "compression_ratio", f"requires 0 < ratio <= 1, got {ratio}"
            )
        m = round(ratio * scenario.num_sensors)
        if m < 1:
            raise ConfigInvalid(
                "compression_ratio", f"ratio {ratio} rounds to zero measurements"
            )
    projection = ProjectionSpec(
        kind=str(values.get("projection_kind", "orthonormal")),
        num_measurements=m,
        s0=float(values.get("s0", 1.0)),
    )

    beta_db = float(values.get("beta_db", 0.0))
    detectors: tuple[str, ...] = (COVARIANCE_RATIO, ENERGY)
    if beta_db > 0.0:
        detectors = detectors + (ENERGY_UNCERTAIN,)

    return ExperimentPlan(
        scenario=scenario,
        projection=projection,
        num_snapshots=int(values["T"]),
        trials=int(values["trials"]),
        seed=int(values.get("seed", DEFAULT_SEED)),
        num_lags=int(values.get("K", 3)),
        alpha0=float(values["alpha0"]),
        beta_db=beta_db,
        detectors=detectors,
    )


def _format_real(value: float) -> str:
    return format(float(value), ".9g")


def _atomic_write(path: Path, text: str) -> None:
    parent = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, str):
                cells.append(cell)
            elif isinstance(cell, int):
                cells.append(str(cell))
            else:
                cells.append(_format_real(cell))
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def _config_echo(plan: ExperimentPlan) -> list[str]:
    scenario = plan.scenario
    lines = [
        f"num_sensors = {scenario.num_sensors}",
        f"inter_sensor_distance = {scenario.inter_sensor_distance!r}",
    ]
    if isinstance(scenario.correlation, DirectRho):
        lines.append(f"rho = {scenario.correlation.rho!r}")
    else:
        lines.append(f"theta1 = {scenario.correlation.theta1!r}")
    lines += [
        f"sigma_s2 = {scenario.sigma_s2!r}",
        f"sigma_v2 = {scenario.sigma_v2!r}",
        f"sigma_w2 = {scenario.sigma_w2!r}",
        f"projection_kind = {plan.projection.kind}",
        f"M = {plan.projection.num_measurements}",
        f"s0 = {plan.projection.s0!r}",
        f"K = {plan.num_lags}",
        f"T = {plan.num_snapshots}",
        f"alpha0 = {plan.alpha0!r}",
        f"beta_db = {plan.beta_db!r}",
        f"trials = {plan.trials}",
        f"seed = {plan.seed}",
    ]
    return lines


def _write_manifest(
    path: Path,
    subcommand: str,
    plan: ExperimentPlan,
    output_csv: Path,
    duration: float,
    extras: list[str],
) -> None:
    lines = [
        "covdet run manifest",
        f"version = {__version__}",
        f"subcommand = {subcommand}",
        f"seed = {plan.seed}",
        f"duration_seconds = {duration:.3f}",
        f"output_csv = {output_csv}",
    ]
    lines += extras
    lines.append("")
    lines.append("[config]")
    lines += _config_echo(plan)
    _atomic_write(path, "\n".join(lines) + "\n")


def _parse_grid(text: str, flag: str) -> list[float]:
    try:
        grid = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigInvalid(flag, f"expected comma-separated reals, got {text!r}") from None
    if not grid:
        raise ConfigInvalid(flag, "grid is empty")
    return grid


def _sigma_v2_for_snr(plan: ExperimentPlan, gamma_db: float) -> float:
    """Sensor-noise power that achieves the requested SNR at fixed source
    and fusion powers."""
    scenario = plan.scenario
    total_noise = scenario.sigma_s2 / 10.0 ** (gamma_db / 10.0)
    sigma_v2 = total_noise - scenario.sigma_w2
    if sigma_v2 <= 0.0:
        raise ConfigInvalid(
            "snr_grid_db",
            f"{gamma_db} dB is unreachable: it needs sensor noise "
            f"{sigma_v2:.3g} <= 0 at sigma_w2 = {scenario.sigma_w2}",
        )
    return sigma_v2


def _run_calibrate(plan: ExperimentPlan, args) -> tuple[list[str], list[tuple], list[str]]:
    grid = _parse_grid(args.noise_grid_db, "noise_grid_db")
    rows = []
    for i, noise_db in enumerate(grid):
        target = 10.0 ** (noise_db / 10.0)
        scale = target / plan.scenario.noise_power
        scenario = replace(
            plan.scenario,
            sigma_v2=plan.scenario.sigma_v2 * scale,
            sigma_w2=plan.scenario.sigma_w2 * scale,
        )
        tau_c = calibrate_threshold(
            replace(plan, scenario=scenario), stream_key=(_STREAM_CALIBRATE, i)
        )
        rows.append((noise_db, tau_c))
    return ["noise_db", "tau_c"], rows, [f"noise_grid_db = {args.noise_grid_db}"]


def _run_roc(plan: ExperimentPlan, args) -> tuple[list[str], list[tuple], list[str]]:
    curve = roc_curve(plan)
    rows = [(float(pf), float(pd)) for pf, pd in curve.points]
    return ["pf", "pd"], rows, [f"detector = {curve.detector}"]


def _run_rates(plan: ExperimentPlan, args) -> tuple[list[str], list[tuple], list[str]]:
    tau_c = calibrate_threshold(plan)
    results = evaluate_detectors(plan, tau_c)
    rows = [
        (name, r.threshold_used, r.pf, r.pf_halfwidth, r.pd, r.pd_halfwidth)
        for name, r in results.items()
    ]
    return (
        ["detector", "tau", "pf", "pf_hw", "pd", "pd_hw"],
        rows,
        [f"tau_c = {tau_c!r}"],
    )


def _run_sweep_snr(plan: ExperimentPlan, args) -> tuple[list[str], list[tuple], list[str]]:
    grid_db = _parse_grid(args.snr_grid_db, "snr_grid_db")
    sigma_v2_grid = [_sigma_v2_for_snr(plan, g) for g in grid_db]
    points = sweep_snr(plan, sigma_v2_grid)
    rows = []
    for point in points:
        for name, r in point.results.items():
            rows.append(
                (point.gamma0_db, name, r.pf, r.pd, r.pf_halfwidth, r.pd_halfwidth)
            )
    return (
        ["gamma0_db", "detector", "pf", "pd", "pf_hw", "pd_hw"],
        rows,
        [f"snr_grid_db = {args.snr_grid_db}"],
    )


def _run_sweep_sparsity(plan: ExperimentPlan, args) -> tuple[list[str], list[tuple], list[str]]:
    if args.s0_grid:
        s0_grid = _parse_grid(args.s0_grid, "s0_grid")
    else:
        l = plan.scenario.num_sensors
        s0_grid = [1.0, math.sqrt(l), float(l)]
    grid_db = _parse_grid(args.snr_grid_db, "snr_grid_db")
    sigma_v2_grid = [_sigma_v2_for_snr(plan, g) for g in grid_db]
    points = sweep_sparsity(plan, s0_grid, sigma_v2_grid)
    # The orthonormal-rows reference configuration is encoded as s0 = 0.
    rows = [
        (
            0.0 if point.s0 is None else point.s0,
            point.gamma0_db,
            point.result.pd,
            point.result.pd_halfwidth,
        )
        for point in points
    ]
    extras = [
        f"s0_grid = {args.s0_grid or ','.join(_format_real(v) for v in s0_grid)}",
        f"snr_grid_db = {args.snr_grid_db}",
    ]
    return ["s0", "gamma0_db", "pd", "pd_hw"], rows, extras


_SUBCOMMANDS = {
    "calibrate": _run_calibrate,
    "roc": _run_roc,
    "rates": _run_rates,
    "sweep-snr": _run_sweep_snr,
    "sweep-sparsity": _run_sweep_sparsity,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covdet",
        description="Monte Carlo experiments for covariance-ratio detection "
        "from MAC-compressed sensor data.",
    )
    parser.add_argument("--version", action="version", version=f"covdet {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name in _SUBCOMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", required=True, help="path to the config file")
        sub.add_argument("--seed", type=int, default=None, help="override the seed")
        sub.add_argument("--output", default=f"{name}.csv", help="CSV output path")
        sub.add_argument(
            "--manifest", default=None, help="manifest path (default: beside the CSV)"
        )
    for name in ("calibrate",):
        subparsers.choices[name].add_argument(
            "--noise-grid-db", default=_DEFAULT_NOISE_GRID_DB,
            help="total noise powers to calibrate at, in dB",
        )
    subparsers.choices["sweep-snr"].add_argument(
        "--snr-grid-db", default=_DEFAULT_SNR_GRID_DB, help="SNR grid in dB"
    )
    sparsity = subparsers.choices["sweep-sparsity"]
    sparsity.add_argument(
        "--s0-grid", default=None, help="sparsity levels (default: 1, sqrt(L), L)"
    )
    sparsity.add_argument(
        "--snr-grid-db", default=_DEFAULT_SPARSITY_SNR_GRID_DB, help="SNR grid in dB"
    )
    return parser


def run(argv: list[str]) -> int:
    """Execute one subcommand; returns the process exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        plan = parse_config(args.config)
        if args.seed is not None:
            plan = replace(plan, seed=args.seed)
        started = time.perf_counter()
        header, rows, extras = _SUBCOMMANDS[args.subcommand](plan, args)
        duration = time.perf_counter() - started
        output = Path(args.output)
        manifest = (
            Path(args.manifest)
            if args.manifest
            else output.with_suffix(".manifest.txt")
        )
        _write_csv(output, header, rows)
        _write_manifest(manifest, args.subcommand, plan, output, duration, extras)
    except ConfigInvalid as exc:
        print(f"covdet: config error: {exc}", file=sys.stderr)
        return 2
    except CovdetError as exc:
        print(f"covdet: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"covdet: i/o error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    return run(sys.argv[1:] if argv is None else argv)

"""Command line entry point: config loading, single episodes and sweeps.

This is the only module that touches the file system.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .model import ConfigError, SystemConfig, dbm_to_w
from .sca import TRACE_COLUMNS
from .scenario import SUMMARY_COLUMNS, SWEEP_COLUMNS, IgnoreBranch, run_episode, sweep

RESOLVED_NAME = "resolved_config.toml"


class SpecError(ValueError):
    """Unreadable or invalid experiment file; ``field`` names the culprit."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        super().__init__(message)
        self.field = field
        self.line = line


# section -> key -> (SystemConfig field or None, converter, default)
# Keys carry their unit; converters map to the SI value SystemConfig expects.
def _same(x):
    return x


def _dbm(x):
    return tuple(dbm_to_w(v) for v in x) if isinstance(x, list) else dbm_to_w(x)


def _mbps(x):
    return tuple(v * 1e6 for v in x) if isinstance(x, list) else x * 1e6


def _tuple(x):
    return tuple(x)


_D = SystemConfig()

SCHEMA = {
    "model": {
        "n_aps": ("n_aps", _same, _D.n_aps),
        "antennas_per_ap": ("antennas_per_ap", _same, _D.antennas_per_ap),
        "n_users": ("n_users", _same, _D.n_users),
        "n_ris_elements": ("n_ris_elements", _same, _D.n_ris_elements),
        "bandwidth_hz": ("bandwidth_hz", _same, _D.bandwidth_hz),
        "noise_power_dbm": ("noise_power_w", _dbm, -100.0),
        "max_tx_power_dbm": ("max_tx_power_w", _dbm, 32.0),
        "rate_target_mbps": ("rate_targets_bps", _mbps, 37.0),
        "carrier_wavelength_m": ("carrier_wavelength_m", _same, _D.carrier_wavelength_m),
        "element_spacing_m": ("element_spacing_m", _same, _D.element_spacing_m),
        "area_half_extent_m": ("area_half_extent_m", _same, _D.area_half_extent_m),
        "shadowing_std_db": ("shadowing_std_db", _same, _D.shadowing_std_db),
        "pathloss_ref_db": ("pathloss_ref_db", _same, _D.pathloss_ref_db),
        "pathloss_exp_direct": ("pathloss_exp_direct", _same, _D.pathloss_exp_direct),
        "pathloss_exp_ris": ("pathloss_exp_ris", _same, _D.pathloss_exp_ris),
        "ap_height_m": ("ap_height_m", _same, _D.ap_height_m),
        "ris_height_m": ("ris_height_m", _same, _D.ris_height_m),
        "user_height_m": ("user_height_m", _same, _D.user_height_m),
    },
    "fbl": {
        "bler": ("bler", _same, _D.bler),
        "blocklength": ("blocklength", _same, _D.blocklength),
    },
    "metrics": {
        "resilience_weights": ("resilience_weights", _tuple, list(_D.resilience_weights)),
        "t0_max_recovery_s": ("t0_max_recovery_s", _same, _D.t0_max_recovery_s),
        "capped": (None, _same, True),
    },
    "sca": {
        "coherence_time_s": ("coherence_time_s", _same, _D.coherence_time_s),
        "per_subproblem_time_s": ("per_subproblem_time_s", _same, _D.per_subproblem_time_s),
        "penalty_weight": ("penalty_weight", _same, _D.penalty_weight),
        "solver_tol": ("solver_tol", _same, _D.solver_tol),
        "steady_state_max_steps": ("steady_state_max_steps", _same, _D.steady_state_max_steps),
    },
    "scenario": {
        "seed": ("rng_seed", _same, _D.rng_seed),
        "probe_steps": ("probe_steps", _same, _D.probe_steps),
        "blockage": (None, _same, True),
        "ignore_branch": (None, _same, IgnoreBranch.STALE.value),
    },
    "sweep": {
        "eta_grid": (None, _same, None),
        "m_grid": (None, _same, None),
        "rate_target_grid_mbps": (None, _same, None),
        "seeds": (None, _same, None),
        "eta_axis": (None, _same, "log"),
    },
    "output": {
        "dir": (None, _same, "out"),
        "emit_plots": (None, _same, True),
    },
}


@dataclass(frozen=True)
class ExperimentSpec:
    system: SystemConfig
    eta_grid: tuple
    m_grid: tuple
    rate_target_grid_bps: tuple
    seeds: tuple
    output_dir: Path
    emit_plots: bool = True
    blockage: bool = True
    ignore_branch: IgnoreBranch = IgnoreBranch.STALE
    capped: bool = True
    eta_axis: str = "log"
    resolved: dict = field(default_factory=dict, compare=False)
    defaults_applied: tuple = field(default=(), compare=False)


def _parse_error_line(exc) -> int | None:
    line = getattr(exc, "lineno", None)
    if line is None and "line " in str(exc):
        try:
            line = int(str(exc).split("line ")[1].split(",")[0].split(")")[0])
        except ValueError:
            line = None
    return line


def _int_list(value, name):
    if not isinstance(value, list) or not value:
        raise SpecError(f"{name} must be a non-empty list", name)
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise SpecError(f"{name} entries must be integers", name)
    return tuple(value)


def spec_from_dict(raw: dict) -> ExperimentSpec:
    """Apply defaults, check types and ranges, convert units."""
    unknown = [s for s in raw if s not in SCHEMA]
    if unknown:
        raise SpecError(f"unknown section [{unknown[0]}]", unknown[0])
    resolved, applied, kwargs = {}, [], {}
    for section, keys in SCHEMA.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise SpecError(f"[{section}] must be a table", section)
        extra = [k for k in given if k not in keys]
        if extra:
            raise SpecError(f"unknown key {section}.{extra[0]}", f"{section}.{extra[0]}")
        resolved[section] = {}
        for key, (target, convert, default) in keys.items():
            if key in given:
                value = given[key]
            elif default is None:
                continue
            else:
                value = default
                applied.append(f"{section}.{key} = {default!r}")
            resolved[section][key] = value
            if target is not None:
                try:
                    kwargs[target] = convert(value)
                except TypeError:
                    raise SpecError(f"{section}.{key} has the wrong type: {value!r}", f"{section}.{key}") from None

    try:
        system = SystemConfig(**kwargs)
    except ConfigError as exc:
        raise SpecError(f"invalid value: {exc}", exc.field) from None
    except TypeError as exc:
        raise SpecError(f"invalid value: {exc}") from None

    sw = resolved["sweep"]
    eta_grid = _int_list(sw["eta_grid"], "sweep.eta_grid") if "eta_grid" in sw else (system.blocklength,)
    m_grid = _int_list(sw["m_grid"], "sweep.m_grid") if "m_grid" in sw else (system.n_ris_elements,)
    seeds = _int_list(sw["seeds"], "sweep.seeds") if "seeds" in sw else (system.rng_seed,)
    if "rate_target_grid_mbps" in sw:
        grid = sw["rate_target_grid_mbps"]
        if not isinstance(grid, list) or not grid or not all(isinstance(v, (int, float)) and v > 0 for v in grid):
            raise SpecError("sweep.rate_target_grid_mbps must be a non-empty list of positive numbers", "sweep.rate_target_grid_mbps")
        targets = tuple(float(v) * 1e6 for v in grid)
    else:
        targets = (system.rate_targets_bps[0],)
    for eta in eta_grid:
        if eta < 1:
            raise SpecError("sweep.eta_grid entries must be >= 1", "sweep.eta_grid")
    for m in m_grid:
        if m < 1:
            raise SpecError("sweep.m_grid entries must be >= 1", "sweep.m_grid")
    if sw["eta_axis"] not in ("log", "linear"):
        raise SpecError("sweep.eta_axis must be 'log' or 'linear'", "sweep.eta_axis")
    try:
        branch = IgnoreBranch(resolved["scenario"]["ignore_branch"])
    except ValueError:
        raise SpecError("scenario.ignore_branch must be 'stale' or 'reoptimize'", "scenario.ignore_branch") from None
    for key in (("metrics", "capped"), ("scenario", "blockage"), ("output", "emit_plots")):
        if not isinstance(resolved[key[0]][key[1]], bool):
            raise SpecError(f"{key[0]}.{key[1]} must be true or false", f"{key[0]}.{key[1]}")

    return ExperimentSpec(
        system=system,
        eta_grid=eta_grid,
        m_grid=m_grid,
        rate_target_grid_bps=targets,
        seeds=seeds,
        output_dir=Path(resolved["output"]["dir"]),
        emit_plots=resolved["output"]["emit_plots"],
        blockage=resolved["scenario"]["blockage"],
        ignore_branch=branch,
        capped=resolved["metrics"]["capped"],
        eta_axis=sw["eta_axis"],
        resolved=resolved,
        defaults_applied=tuple(applied),
    )


def load_spec(path) -> ExperimentSpec:
    """Read and validate an experiment file (TOML)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = _parse_error_line(exc)
        where = f" at line {line}" if line else ""
        raise SpecError(f"{path}: parse error{where}: {exc}", line=line) from None
    return spec_from_dict(raw)


def resolved_toml(spec: ExperimentSpec) -> str:
    """The spec with every default filled in; loads back to the same spec."""
    return tomli_w.dumps(spec.resolved)


def with_overrides(spec: ExperimentSpec, **changes) -> ExperimentSpec:
    """Apply command-line overrides and keep the resolved echo in sync."""
    resolved = {s: dict(v) for s, v in spec.resolved.items()}
    mapping = {
        "output_dir": ("output", "dir", str),
        "emit_plots": ("output", "emit_plots", bool),
        "ignore_branch": ("scenario", "ignore_branch", lambda b: IgnoreBranch(b).value),
        "capped": ("metrics", "capped", bool),
        "blockage": ("scenario", "blockage", bool),
        "seed": ("scenario", "seed", int),
        "seeds": ("sweep", "seeds", list),
    }
    for name, value in changes.items():
        if value is None:
            continue
        section, key, cast = mapping[name]
        resolved[section][key] = cast(value)
    return spec_from_dict(resolved)


# ---------------------------------------------------------------- writers


def _fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.12g}"
    if isinstance(value, (np.floating,)):
        return _fmt(float(value))
    return str(value)


def table_csv(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def episode_trace_csv(result) -> str:
    """Steady-state and response alternation steps with a stage column."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("stage",) + TRACE_COLUMNS)
    runs = [("steady", result.steady_trace)] if result.steady_trace is not None else []
    runs += [("response", t) for t in result.traces]
    for stage, trace in runs:
        for s in trace.steps:
            writer.writerow([stage, s.z, s.kind.value, _fmt(float(s.psi)), s.status, f"{s.time_s:.6g}"])
    return buf.getvalue()


def _prepare_dir(path: Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    probe = path / ".write-check"
    probe.write_bytes(b"")
    probe.unlink()
    return path


def _write(path: Path, text: str):
    path.write_bytes(text.encode("utf-8"))


def cmd_run(spec: ExperimentSpec, seed: int | None = None) -> int:
    """One episode; writes episode_<seed>.jsonl and trace_<seed>.csv."""
    seed = spec.system.rng_seed if seed is None else seed
    config = replace(spec.system, rng_seed=seed)
    try:
        out = _prepare_dir(spec.output_dir)
    except OSError as exc:
        print(f"error: cannot write to output directory {spec.output_dir}: {exc.strerror or exc}", file=sys.stderr)
        return 3
    result = run_episode(
        config,
        np.random.default_rng(seed),
        blockage=spec.blockage,
        ignore_branch=spec.ignore_branch,
        capped=spec.capped,
    )
    record = {"seed": seed, **result.to_record()}
    try:
        _write(out / RESOLVED_NAME, resolved_toml(spec))
        _write(out / f"episode_{seed}.jsonl", json.dumps(record, sort_keys=True) + "\n")
        _write(out / f"trace_{seed}.csv", episode_trace_csv(result))
    except OSError as exc:
        print(f"error: writing results failed: {exc}", file=sys.stderr)
        return 3
    print(f"seed {seed}: {result.status}, decision {result.decision.value}, r = {_fmt(result.r)}")
    if result.failed:
        print(f"error: episode failed: {result.status}", file=sys.stderr)
        return 1
    return 0


def sweep_csv_name(target_bps: float) -> str:
    return f"sweep_rdes{target_bps / 1e6:g}mbps.csv"


def cmd_sweep(spec: ExperimentSpec, jobs: int | None = None) -> int:
    """Sweep every rate target; one CSV per target, a summary and charts."""
    try:
        out = _prepare_dir(spec.output_dir)
    except OSError as exc:
        print(f"error: cannot write to output directory {spec.output_dir}: {exc.strerror or exc}", file=sys.stderr)
        return 3
    summaries, summary_rows, n_failed = {}, [], 0
    for target in spec.rate_target_grid_bps:
        config = replace(spec.system, rate_targets_bps=(target,) * spec.system.n_users)
        table = sweep(
            config,
            spec.eta_grid,
            spec.m_grid,
            spec.seeds,
            jobs=jobs,
            blockage=spec.blockage,
            ignore_branch=spec.ignore_branch,
            capped=spec.capped,
        )
        summary = table.summary()
        summaries[target] = summary
        summary_rows += [{"rate_target_mbps": target / 1e6, **e} for e in summary]
        n_failed += sum(e["n_failed"] for e in summary)
        try:
            _write(out / sweep_csv_name(target), table_csv(table.rows, SWEEP_COLUMNS))
        except OSError as exc:
            print(f"error: writing results failed: {exc}", file=sys.stderr)
            return 3
    try:
        _write(out / "summary.csv", table_csv(summary_rows, ("rate_target_mbps",) + SUMMARY_COLUMNS))
        _write(out / RESOLVED_NAME, resolved_toml(spec))
        if spec.emit_plots:
            from .plotting import sweep_charts

            sweep_charts(summaries, spec.m_grid, out, spec.eta_axis)
    except OSError as exc:
        print(f"error: writing results failed: {exc}", file=sys.stderr)
        return 3
    cells = len(spec.eta_grid) * len(spec.m_grid) * len(spec.seeds) * len(spec.rate_target_grid_bps)
    print(f"{cells} episodes, {n_failed} failed; results in {out}")
    return 0


def cmd_validate(spec: ExperimentSpec) -> int:
    for line in spec.defaults_applied:
        print(f"default: {line}", file=sys.stderr)
    sys.stdout.write(resolved_toml(spec))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fblris", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "run one episode"),
        ("sweep", "sweep blocklength, RIS size, rate target and seed"),
        ("validate", "check a config file and print it with defaults filled in"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="experiment file (TOML)")
        if name == "validate":
            continue
        p.add_argument("--seed", type=int, help="seed override (sweep: run this seed only)")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--ignore-branch", choices=[b.value for b in IgnoreBranch])
        p.add_argument("--uncapped-metrics", action="store_true", help="do not cap per-user rate ratios at 1")
        p.add_argument("--no-blockage", action="store_true", help="control run without the disruption")
        if name == "sweep":
            p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel workers")
            p.add_argument("--no-plots", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_spec(args.config)
        if args.command == "validate":
            return cmd_validate(spec)
        overrides = dict(
            output_dir=args.out,
            ignore_branch=args.ignore_branch,
            capped=False if args.uncapped_metrics else None,
            blockage=False if args.no_blockage else None,
        )
        if args.command == "sweep":
            overrides["emit_plots"] = False if args.no_plots else None
            overrides["seeds"] = [args.seed] if args.seed is not None else None
        else:
            overrides["seed"] = args.seed
        spec = with_overrides(spec, **overrides)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "run":
        return cmd_run(spec)
    return cmd_sweep(spec, args.jobs)


if __name__ == "__main__":
    sys.exit(main())

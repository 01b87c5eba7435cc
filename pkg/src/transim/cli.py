"""Batch front-end: parse a JSON experiment manifest, run the experiments
(single point or Cartesian sweep), and write machine-readable results.

Any sweepable key may hold a scalar or a list of values; lists expand as a
Cartesian product. Every grid point gets a seed derived from the master
seed, the resolved parameter tuple, and the replicate index, so editing or
permuting the grid never silently changes unrelated cells.

Outputs per run directory:
    summary.json   generator info plus one entry per experiment
    table.csv      one summary row per experiment (fixed header)
    trace_*.csv    one per-trial row per experiment (optional)
A RUN_INCOMPLETE marker exists while a run is in flight and is removed on
success; finding one means the directory holds partial output.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import analytics
from .batch import run_batch
from .hardware import DetectorKind
from .strategies import (ConfigError, ExperimentConfig, ResultsSummary,
                         Strategy, TrialRecord, run_experiment)
from .timeline import GENERATOR_NAME, GENERATOR_VERSION

ENV_OUTPUT_DIR = "TRANSIM_OUT"
DEFAULT_OUTPUT_DIR = "runs"
MARKER_NAME = "RUN_INCOMPLETE"

KNOWN_FORMATS = ("summary-json", "table-csv", "trace-csv")
DEFAULT_FORMATS = ("summary-json", "table-csv")

# Keys that may hold a scalar or a list of values. "eta" is shorthand: it
# sets eta_up_source and eta_down_dest together for dqt, eta_up for eqt.
SWEEPABLE_KEYS = ("eta", "eta_up_source", "eta_down_dest", "eta_up",
                  "detector_kind", "eta_d", "fiber_length_km",
                  "attenuation_length_km")
SCALAR_KEYS = ("strategy", "trials", "period_ps", "seed", "replicates",
               "output_dir", "formats")

_EFFICIENCY_KEYS = ("eta", "eta_up_source", "eta_down_dest", "eta_up", "eta_d")

TABLE_COLUMNS = (
    "strategy", "eta_up_source", "eta_down_dest", "eta_up", "detector_kind",
    "eta_d", "fiber_length_km", "attenuation_length_km", "period_ps",
    "trials", "replicate", "seed", "n_observed", "p_sim", "p_theory",
    "ci95_lo", "ci95_hi", "within_ci", "z_score",
)

DQT_TRACE_COLUMNS = ("trial_index", "time_ps", "up_source_ok",
                     "channel_survived", "down_dest_ok", "classification")
EQT_TRACE_COLUMNS = ("trial_index", "time_ps", "up_source_ok", "up_dest_ok",
                     "source_arm_survived", "dest_arm_survived",
                     "photons_at_bsm", "detector0_count", "detector1_count",
                     "classification")


class ManifestError(Exception):
    """Raised for unreadable, malformed, or out-of-range manifests."""


@dataclass(frozen=True)
class ExperimentPoint:
    """One fully resolved grid cell."""

    params: dict
    replicate: int
    seed: int
    tag: str
    config: ExperimentConfig


@dataclass(frozen=True)
class RunManifest:
    """Validated experiment plan: a strategy, a parameter grid, run settings."""

    strategy: Strategy
    grid: dict
    trials: int
    period_ps: int
    master_seed: int
    replicates: int
    output_dir: str | None
    formats: tuple[str, ...]
    source_path: str

    def points(self) -> list[ExperimentPoint]:
        """Expand the grid (Cartesian product) and replicates, in order."""
        keys = [k for k in SWEEPABLE_KEYS if k in self.grid]
        points = []
        for values in itertools.product(*(self.grid[k] for k in keys)):
            chosen = dict(zip(keys, values))
            eta = chosen.pop("eta", None)
            if eta is not None:
                if self.strategy is Strategy.DQT:
                    chosen["eta_up_source"] = eta
                    chosen["eta_down_dest"] = eta
                else:
                    chosen["eta_up"] = eta
            eqt = self.strategy is Strategy.EQT
            params = {
                "strategy": self.strategy.value,
                "eta_up_source": chosen.get("eta_up_source"),
                "eta_down_dest": chosen.get("eta_down_dest"),
                "eta_up": chosen.get("eta_up"),
                "detector_kind": (chosen["detector_kind"].value
                                  if "detector_kind" in chosen else None),
                "eta_d": chosen.get("eta_d", 1.0) if eqt else None,
                "fiber_length_km": chosen.get("fiber_length_km", 0.0),
                "attenuation_length_km": chosen.get("attenuation_length_km", 22.0),
                "period_ps": self.period_ps,
                "trials": self.trials,
            }
            for replicate in range(self.replicates):
                seed, tag = _derive_seed(self.master_seed, params, replicate)
                config = ExperimentConfig(
                    strategy=self.strategy,
                    eta_up_source=params["eta_up_source"],
                    eta_down_dest=params["eta_down_dest"],
                    eta_up=params["eta_up"],
                    detector_kind=(DetectorKind(params["detector_kind"])
                                   if params["detector_kind"] else None),
                    eta_d=params["eta_d"] if params["eta_d"] is not None else 1.0,
                    fiber_length_km=params["fiber_length_km"],
                    attenuation_length_km=params["attenuation_length_km"],
                    period_ps=self.period_ps,
                    trials=self.trials,
                    master_seed=seed,
                )
                config.validate()
                points.append(ExperimentPoint(
                    params=params, replicate=replicate, seed=seed, tag=tag,
                    config=config))
        return points


def _derive_seed(master_seed: int, params: dict, replicate: int) -> tuple[int, str]:
    """Seed and filename tag from (master seed, parameter tuple, replicate)."""
    payload = json.dumps(
        {"master_seed": master_seed, "replicate": replicate, "params": params},
        sort_keys=True)
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    return int(digest[:16], 16) & (2 ** 63 - 1), digest[:10]


def _as_list(value) -> list:
    return list(value) if isinstance(value, list) else [value]


def _require_int(raw: dict, key: str, default: int, path: str) -> int:
    value = raw.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ManifestError(f"{path}: {key} must be an integer (got {value!r})")
    return value


def parse_manifest(path: str | Path) -> RunManifest:
    """Load and validate a manifest file, filling in defaults."""
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")

    allowed = set(SWEEPABLE_KEYS) | set(SCALAR_KEYS)
    for key in raw:
        if key not in allowed:
            raise ManifestError(f"{path}: unknown key {key!r}")

    strategy_raw = raw.get("strategy")
    try:
        strategy = Strategy(str(strategy_raw).lower())
    except ValueError:
        raise ManifestError(
            f"{path}: strategy must be one of 'dqt', 'eqt' (got {strategy_raw!r})")

    if "eta" in raw:
        exclusive = ("eta_up_source", "eta_down_dest", "eta_up")
        clash = [k for k in exclusive if k in raw]
        if clash:
            raise ManifestError(
                f"{path}: 'eta' cannot be combined with {clash[0]!r}")

    inapplicable = (("eta_up", "detector_kind", "eta_d")
                    if strategy is Strategy.DQT
                    else ("eta_up_source", "eta_down_dest"))
    for key in inapplicable:
        if key in raw:
            raise ManifestError(
                f"{path}: {key!r} does not apply to the {strategy.value} strategy")

    grid: dict = {}
    for key in SWEEPABLE_KEYS:
        if key not in raw:
            continue
        values = _as_list(raw[key])
        if not values:
            raise ManifestError(f"{path}: {key} must not be an empty list")
        if key == "detector_kind":
            parsed = []
            for value in values:
                try:
                    parsed.append(DetectorKind(str(value).lower()))
                except ValueError:
                    raise ManifestError(
                        f"{path}: detector_kind must be 'spd' or 'pnrd' (got {value!r})")
            grid[key] = parsed
            continue
        converted = []
        for value in values:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ManifestError(f"{path}: {key} must be numeric (got {value!r})")
            value = float(value)
            if key in _EFFICIENCY_KEYS and not 0.0 <= value <= 1.0:
                raise ManifestError(
                    f"{path}: {key} must be within [0, 1] (got {value})")
            if key in ("fiber_length_km", "attenuation_length_km") and value < 0:
                raise ManifestError(
                    f"{path}: {key} must be non-negative (got {value})")
            converted.append(value)
        grid[key] = converted

    formats = tuple(raw.get("formats", DEFAULT_FORMATS))
    for fmt in formats:
        if fmt not in KNOWN_FORMATS:
            raise ManifestError(
                f"{path}: unknown format {fmt!r}; choose from {KNOWN_FORMATS}")

    trials = _require_int(raw, "trials", 100, path)
    period_ps = _require_int(raw, "period_ps", 1_000_000, path)
    master_seed = _require_int(raw, "seed", 0, path)
    replicates = _require_int(raw, "replicates", 1, path)
    if replicates < 1:
        raise ManifestError(f"{path}: replicates must be at least 1 (got {replicates})")

    output_dir = raw.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ManifestError(f"{path}: output_dir must be a string")

    manifest = RunManifest(
        strategy=strategy, grid=grid, trials=trials, period_ps=period_ps,
        master_seed=master_seed, replicates=replicates,
        output_dir=output_dir, formats=formats, source_path=path)
    try:
        points = manifest.points()
    except ConfigError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    if not points:
        raise ManifestError(f"{path}: manifest expands to no experiments")
    return manifest


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _table_row(point: ExperimentPoint, summary: ResultsSummary,
               report: analytics.ComparisonReport) -> list[str]:
    p = point.params
    return [_fmt(v) for v in (
        p["strategy"], p["eta_up_source"], p["eta_down_dest"], p["eta_up"],
        p["detector_kind"], p["eta_d"], p["fiber_length_km"],
        p["attenuation_length_km"], p["period_ps"], p["trials"],
        point.replicate, point.seed, summary.n_observed,
        summary.simulated_probability, summary.theoretical_probability,
        summary.ci95[0], summary.ci95[1], report.within_ci, report.z_score,
    )]


def emit_trace(path: Path, records: list[TrialRecord], strategy: Strategy,
               period_ps: int) -> None:
    """Write one per-trial row per record; an empty list yields header only."""
    lines = []
    if strategy is Strategy.DQT:
        lines.append(",".join(DQT_TRACE_COLUMNS))
        for r in records:
            survived = r.channel_survived[0] if r.channel_survived else None
            lines.append(",".join(_fmt(v) for v in (
                r.trial_index, r.trial_index * period_ps, r.up_source_ok,
                survived, r.down_dest_ok, r.classification.value)))
    else:
        lines.append(",".join(EQT_TRACE_COLUMNS))
        for r in records:
            entries = list(r.channel_survived)
            src_surv = entries.pop(0) if r.up_source_ok else None
            dst_surv = entries.pop(0) if r.up_dest_ok else None
            det = r.detections
            lines.append(",".join(_fmt(v) for v in (
                r.trial_index, r.trial_index * period_ps, r.up_source_ok,
                r.up_dest_ok, src_surv, dst_surv,
                det.photons_at_splitter if det else 0,
                det.detected_counts[0] if det else 0,
                det.detected_counts[1] if det else 0,
                r.classification.value)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def execute(manifest: RunManifest, out_dir: Path, *, trace: bool = False,
            quiet: bool = False) -> int:
    """Run every experiment in the manifest and write the requested outputs.

    Artifacts are deterministic for a given manifest and seed: no
    timestamps, stable key order, seeds keyed by parameter tuple. Runs
    needing per-trial traces go through the event engine; summary-only runs
    use the batched engine, which produces identical summaries.
    """
    formats = set(manifest.formats)
    if trace:
        formats.add("trace-csv")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    marker = out_dir / MARKER_NAME
    marker.write_text("run in progress or interrupted\n", encoding="utf-8")

    points = manifest.points()
    want_records = "trace-csv" in formats
    if want_records:
        results = [run_experiment(point.config) for point in points]
    else:
        results = [(run_batch(point.config), None) for point in points]

    entries = []
    table_rows = []
    for point, (summary, records) in zip(points, results):
        report = analytics.compare(summary)
        trace_name = None
        if want_records:
            trace_name = f"trace_{point.params['strategy']}_{point.tag}_r{point.replicate}.csv"
            emit_trace(out_dir / trace_name, records, manifest.strategy,
                       manifest.period_ps)
        entries.append({
            "strategy": point.params["strategy"],
            "params": point.params,
            "replicate": point.replicate,
            "seed": point.seed,
            "n_ideal": summary.n_ideal,
            "n_observed": summary.n_observed,
            "p_sim": summary.simulated_probability,
            "p_theory": summary.theoretical_probability,
            "ci95": list(summary.ci95),
            "within_ci": report.within_ci,
            "z_score": report.z_score,
            "class_histogram": summary.class_histogram,
            "trace_file": trace_name,
        })
        table_rows.append(_table_row(point, summary, report))
        if not quiet:
            print(f"{point.params['strategy']} {point.tag} r{point.replicate}: "
                  f"p_sim={summary.simulated_probability:.4f} "
                  f"p_theory={summary.theoretical_probability:.4f} "
                  f"n={summary.n_observed}/{summary.trials}")

    if "summary-json" in formats:
        payload = {
            "generator": {"name": GENERATOR_NAME, "version": GENERATOR_VERSION},
            "experiments": entries,
        }
        (out_dir / "summary.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if "table-csv" in formats:
        lines = [",".join(TABLE_COLUMNS)]
        lines.extend(",".join(row) for row in table_rows)
        (out_dir / "table.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    marker.unlink()
    return 0


def resolve_output_dir(flag_value: str | None, manifest: RunManifest) -> Path:
    """Precedence: --out flag, then manifest output_dir, then env, then ./runs."""
    if flag_value:
        return Path(flag_value)
    if manifest.output_dir:
        return Path(manifest.output_dir)
    env = os.environ.get(ENV_OUTPUT_DIR)
    if env:
        return Path(env)
    return Path(DEFAULT_OUTPUT_DIR)


class _ArgumentParser(argparse.ArgumentParser):
    # Usage mistakes are configuration errors (exit 1), not runtime failures.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ManifestError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="transim",
        description="Run link-strategy experiment manifests and write "
                    "summary, table, and trace files.")
    parser.add_argument("manifest", help="path to a JSON experiment manifest")
    parser.add_argument("--out", metavar="DIR",
                        help=f"output directory (wins over ${ENV_OUTPUT_DIR} "
                             "and the manifest's output_dir)")
    parser.add_argument("--trials", type=int, metavar="N",
                        help="override the manifest's trial count")
    parser.add_argument("--seed", type=int, metavar="INT",
                        help="override the manifest's master seed")
    parser.add_argument("--trace", action="store_true",
                        help="also write per-trial trace files")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress per-experiment progress lines")
    return parser


def main(argv: list[str] | None = None) -> int:
    """Entry point; returns 0 on success, 1 on config errors, 2 on failures."""
    try:
        args = build_parser().parse_args(argv)
        manifest = parse_manifest(args.manifest)
        if args.trials is not None:
            manifest = replace(manifest, trials=args.trials)
        if args.seed is not None:
            manifest = replace(manifest, master_seed=args.seed)
        out_dir = resolve_output_dir(args.out, manifest)
        manifest.points()  # re-validate with overrides applied
    except (ManifestError, ConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        return execute(manifest, out_dir, trace=args.trace, quiet=args.quiet)
    except (ManifestError, ConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary of the process
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def entry_point() -> None:
    sys.exit(main())

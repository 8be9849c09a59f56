"""Benchmark harness: experiment configs, solver-by-field run matrices,
sensitivity sweeps, and machine-readable reports.

Configs are YAML documents (see ``configs/example.yaml``). A run matrix is
paired by design: within one field, every solver integrates from the same
start states, so per-run comparisons across solvers are paired samples.
Cells execute serially; all randomness flows from the config seed, so a
rerun reproduces the bundle bit for bit apart from wall-clock fields.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import json
import statistics
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import (
    ConfigError,
    ContractViolation,
    NumericalBlowup,
    StiffnessError,
    UnsupportedOracle,
    WeightFormatError,
    WeightSchemaError,
)
from .fields import FieldSpec, exact_endpoint
from .metrics import aggregate, endpoint_error
from .probe import HorizonRow, ScheduleParams, adaptive_solve, sweep_probe_horizon
from .solvers import (
    Rk45Config,
    SolveReport,
    ab2_solve,
    euler_solve,
    reference_solve,
    rk45_solve,
)

TOOL_VERSION = "0.1.0"  # keep in sync with pyproject

SOLVER_NAMES = ("euler", "ab2", "rk45", "adaptive")

CSV_COLUMNS = (
    "run_id",
    "solver",
    "field",
    "steps",
    "nfe",
    "solver_time_s",
    "error",
    "success",
    "probe_similarity",
    "scheduled_N",
)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_TOP_LEVEL_KEYS = {
    "corpus",
    "solvers",
    "runs",
    "seed",
    "success_threshold",
    "timing_repeats",
    "epsilon_values",
    "dt_values",
    "output_dir",
    "train",
}


@dataclass
class ExperimentConfig:
    corpus: list[tuple[str, FieldSpec]]
    solvers: list[dict]
    runs: int = 10
    seed: int = 0
    success_threshold: float = 1e-2
    timing_repeats: int = 3
    epsilon_values: list[float] | None = None
    dt_values: list[float] | None = None
    output_dir: str | None = None
    train: dict | None = None

    def __post_init__(self):
        if not self.corpus:
            raise ConfigError("config needs at least one corpus field")
        if not self.solvers:
            raise ConfigError("config needs at least one solver")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.timing_repeats < 1:
            raise ConfigError("timing_repeats must be >= 1")
        labels = [label for label, _ in self.corpus]
        if len(set(labels)) != len(labels):
            raise ConfigError("corpus entry names must be unique")
        slabels = [solver_label(e) for e in self.solvers]
        if len(set(slabels)) != len(slabels):
            raise ConfigError("solver labels must be unique")

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a mapping")
        unknown = set(doc) - _TOP_LEVEL_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        corpus = []
        for i, entry in enumerate(doc.get("corpus", [])):
            if not isinstance(entry, dict):
                raise ConfigError(f"corpus entry {i} must be a mapping")
            entry = dict(entry)
            name = entry.pop("name", None) or f"{entry.get('kind', 'field')}-{i}"
            if base_dir is not None and entry.get("kind") == "learned":
                w = Path(entry.get("weights", ""))
                if not w.is_absolute():
                    entry["weights"] = str(base_dir / w)
            try:
                spec = FieldSpec.from_dict(entry)
                spec.build()  # weight files must be loadable at config time
            except (
                ContractViolation,
                WeightFormatError,
                WeightSchemaError,
                OSError,
                KeyError,
            ) as exc:
                raise ConfigError(f"corpus entry '{name}': {exc}") from exc
            corpus.append((name, spec))
        solvers = doc.get("solvers", [])
        for i, entry in enumerate(solvers):
            if not isinstance(entry, dict) or entry.get("name") not in SOLVER_NAMES:
                raise ConfigError(
                    f"solver entry {i} must name one of {SOLVER_NAMES}"
                )
            try:
                make_solver(entry)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"solver entry {i}: {exc}") from exc
        return cls(
            corpus=corpus,
            solvers=[dict(e) for e in solvers],
            runs=int(doc.get("runs", 10)),
            seed=int(doc.get("seed", 0)),
            success_threshold=float(doc.get("success_threshold", 1e-2)),
            timing_repeats=int(doc.get("timing_repeats", 3)),
            epsilon_values=doc.get("epsilon_values"),
            dt_values=doc.get("dt_values"),
            output_dir=doc.get("output_dir"),
            train=doc.get("train"),
        )

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        except OSError as exc:
            raise ConfigError(str(exc)) from exc
        return cls.from_dict(doc, base_dir=path.parent)

    def to_dict(self) -> dict:
        return {
            "corpus": [
                {"name": label, **spec.to_dict()} for label, spec in self.corpus
            ],
            "solvers": self.solvers,
            "runs": self.runs,
            "seed": self.seed,
            "success_threshold": self.success_threshold,
            "timing_repeats": self.timing_repeats,
            "epsilon_values": self.epsilon_values,
            "dt_values": self.dt_values,
            "output_dir": self.output_dir,
            "train": self.train,
        }


def solver_label(entry: dict) -> str:
    """Stable label for one solver config entry."""
    if "label" in entry:
        return str(entry["label"])
    name = entry.get("name")
    if name == "euler":
        return f"euler-n{entry.get('n', 50)}"
    if name == "ab2":
        return f"ab2-n{entry.get('n', 10)}"
    if name == "rk45":
        return f"rk45-atol{entry.get('atol', 1e-6):g}-rtol{entry.get('rtol', 1e-6):g}"
    if name == "adaptive":
        return (
            f"adaptive-eps{entry.get('epsilon', 0.008):g}"
            f"-dt{entry.get('dt_probe', 0.5):g}"
        )
    return str(name)


_SOLVER_PARAM_KEYS = {
    "euler": {"n"},
    "ab2": {"n"},
    "rk45": {"atol", "rtol", "initial_step", "min_step", "max_step"},
    "adaptive": {"epsilon", "dt_probe", "n_min", "n_max", "delta_n"},
}


def make_solver(entry: dict):
    """Build a ``solve(field, x0) -> SolveReport`` closure from a config entry."""
    name = entry.get("name")
    unknown = set(entry) - {"name", "label"} - _SOLVER_PARAM_KEYS.get(name, set())
    if unknown:
        raise ContractViolation(
            f"unknown parameters for {name} solver: {sorted(unknown)}"
        )
    if name == "euler":
        n = int(entry.get("n", 50))
        if n < 1:
            raise ContractViolation("euler needs n >= 1")
        return lambda field, x0: euler_solve(field, x0, None, n)
    if name == "ab2":
        n = int(entry.get("n", 10))
        if n < 2:
            raise ContractViolation("ab2 needs n >= 2")
        return lambda field, x0: ab2_solve(field, x0, None, n)
    if name == "rk45":
        cfg = Rk45Config(
            atol=float(entry.get("atol", 1e-6)),
            rtol=float(entry.get("rtol", 1e-6)),
            initial_step=float(entry.get("initial_step", 0.1)),
            min_step=float(entry.get("min_step", 1e-12)),
            max_step=float(entry.get("max_step", 1.0)),
        )
        return lambda field, x0: rk45_solve(field, x0, None, cfg)
    if name == "adaptive":
        params = schedule_params_from(entry)
        return lambda field, x0: adaptive_solve(field, x0, None, params)
    raise ContractViolation(f"unknown solver name {name!r}")


def schedule_params_from(entry: dict) -> ScheduleParams:
    return ScheduleParams(
        epsilon=float(entry.get("epsilon", 0.008)),
        dt_probe=float(entry.get("dt_probe", 0.5)),
        n_min=int(entry.get("n_min", 2)),
        n_max=int(entry.get("n_max", 10)),
        delta_n=int(entry.get("delta_n", 2)),
    )


# ---------------------------------------------------------------------------
# run records and bundles
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    run_id: int
    field: str
    solver: str
    steps: int | None
    nfe: int | None
    solver_time_s: float | None
    error: float | None
    success: bool
    probe_similarity: float | None
    scheduled_n: int | None
    x0_sha256: str
    failed: bool = False
    message: str | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)


@dataclass
class EpsilonRow:
    """One row of the linearity-threshold sweep table."""

    epsilon: float
    mean_steps: float
    mean_solver_time_s: float
    mean_error: float
    success_rate: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ReportBundle:
    """Everything one harness invocation produced."""

    config: dict
    tool_version: str
    timestamp: str
    fields: list[dict]
    cells: list[dict]
    runs: list[RunRecord]
    epsilon_sweep: list[EpsilonRow] | None = None
    horizon_sweep: list[HorizonRow] | None = None

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "fields": self.fields,
            "cells": self.cells,
            "runs": [r.to_dict() for r in self.runs],
            "epsilon_sweep": (
                None
                if self.epsilon_sweep is None
                else [r.to_dict() for r in self.epsilon_sweep]
            ),
            "horizon_sweep": (
                None
                if self.horizon_sweep is None
                else [dict(r.__dict__) for r in self.horizon_sweep]
            ),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReportBundle":
        return cls(
            config=d["config"],
            tool_version=d["tool_version"],
            timestamp=d["timestamp"],
            fields=d["fields"],
            cells=d["cells"],
            runs=[RunRecord.from_dict(r) for r in d["runs"]],
            epsilon_sweep=(
                None
                if d.get("epsilon_sweep") is None
                else [EpsilonRow(**r) for r in d["epsilon_sweep"]]
            ),
            horizon_sweep=(
                None
                if d.get("horizon_sweep") is None
                else [HorizonRow(**r) for r in d["horizon_sweep"]]
            ),
        )

    def any_cell_all_failed(self) -> bool:
        return any(c["aggregate"] is None for c in self.cells)


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _x0_hash(x0: np.ndarray) -> str:
    return hashlib.sha256(x0.tobytes()).hexdigest()


def run_matrix(config: ExperimentConfig) -> ReportBundle:
    """Run every solver over every field; paired x0 draws within a field.

    Solver failures are recorded as failed runs and the matrix continues.
    Latency figures are the median over ``timing_repeats`` identical solves;
    oracle endpoints are computed outside all timed sections and their cost
    is reported per field, never in solver columns.
    """
    rng = np.random.default_rng(config.seed)
    solvers = [(solver_label(e), make_solver(e)) for e in config.solvers]
    field_infos: list[dict] = []
    cells: list[dict] = []
    records: list[RunRecord] = []
    for flabel, spec in config.corpus:
        t0 = time.perf_counter()
        field = spec.build()
        setup_time = time.perf_counter() - t0
        x0s = rng.standard_normal((config.runs, field.dim))
        t0 = time.perf_counter()
        oracles = []
        for x0 in x0s:
            try:
                oracles.append(exact_endpoint(spec, x0))
            except UnsupportedOracle:
                oracles.append(reference_solve(field, x0))
        oracle_time = time.perf_counter() - t0
        field_infos.append(
            {
                "field": flabel,
                "kind": spec.kind,
                "dim": field.dim,
                "setup_time_s": setup_time,
                "oracle_time_s": oracle_time,
            }
        )
        for slabel, solve in solvers:
            cell_reports: list[SolveReport] = []
            cell_oracles = []
            for run_id, x0 in enumerate(x0s):
                try:
                    report = solve(field, x0)
                    walls = [report.wall_time] + [
                        solve(field, x0).wall_time
                        for _ in range(config.timing_repeats - 1)
                    ]
                    report.wall_time = statistics.median(walls)
                except (NumericalBlowup, StiffnessError) as exc:
                    records.append(
                        RunRecord(
                            run_id=run_id,
                            field=flabel,
                            solver=slabel,
                            steps=None,
                            nfe=None,
                            solver_time_s=None,
                            error=None,
                            success=False,
                            probe_similarity=None,
                            scheduled_n=None,
                            x0_sha256=_x0_hash(x0),
                            failed=True,
                            message=str(exc),
                        )
                    )
                    continue
                err = endpoint_error(report, oracles[run_id])
                records.append(
                    RunRecord(
                        run_id=run_id,
                        field=flabel,
                        solver=slabel,
                        steps=report.steps_taken,
                        nfe=report.nfe,
                        solver_time_s=report.wall_time,
                        error=err,
                        success=err < config.success_threshold,
                        probe_similarity=report.probe_similarity,
                        scheduled_n=report.scheduled_n,
                        x0_sha256=_x0_hash(x0),
                    )
                )
                cell_reports.append(report)
                cell_oracles.append(oracles[run_id])
            agg = (
                aggregate(cell_reports, cell_oracles, config.success_threshold)
                if cell_reports
                else None
            )
            cells.append(
                {
                    "field": flabel,
                    "solver": slabel,
                    "completed": len(cell_reports),
                    "failed": config.runs - len(cell_reports),
                    "aggregate": None if agg is None else dict(agg.__dict__),
                }
            )
    records.sort(key=lambda r: (r.field, r.solver, r.run_id))
    cells.sort(key=lambda c: (c["field"], c["solver"]))
    field_infos.sort(key=lambda f: f["field"])
    return ReportBundle(
        config=config.to_dict(),
        tool_version=TOOL_VERSION,
        timestamp=_timestamp(),
        fields=field_infos,
        cells=cells,
        runs=records,
    )


def sweep_epsilon(
    config: ExperimentConfig, epsilon_values: list[float]
) -> list[EpsilonRow]:
    """Adaptive-solver sensitivity sweep over the linearity tolerance.

    Start states are paired across epsilon values, so per-run schedules are
    monotone in epsilon by construction of the scheduler.
    """
    values = [float(eps) for eps in (epsilon_values or [])]
    if len(values) < 2 or any(eps <= 0 for eps in values):
        raise ConfigError("sweep-epsilon needs at least two positive values")
    base = _base_schedule_params(config)
    tasks = _sweep_tasks(config)
    rows = []
    for eps in values:
        params = replace(base, epsilon=eps)
        steps, times, errors, successes = [], [], [], []
        n_total = 0
        for field, x0, oracle in tasks:
            n_total += 1
            try:
                report = adaptive_solve(field, x0, None, params)
            except (NumericalBlowup, StiffnessError):
                successes.append(False)
                continue
            err = endpoint_error(report, oracle)
            steps.append(report.steps_taken)
            times.append(report.wall_time)
            errors.append(err)
            successes.append(err < config.success_threshold)
        rows.append(
            EpsilonRow(
                epsilon=eps,
                mean_steps=float(np.mean(steps)) if steps else float("nan"),
                mean_solver_time_s=float(np.mean(times)) if times else float("nan"),
                mean_error=float(np.mean(errors)) if errors else float("nan"),
                success_rate=float(np.mean(successes)),
            )
        )
    return rows


def sweep_horizon(config: ExperimentConfig, dt_values: list[float]) -> list[HorizonRow]:
    """Probe-horizon sweep over the config corpus (see sweep_probe_horizon)."""
    values = [float(dt) for dt in (dt_values or [])]
    if not values:
        raise ConfigError("sweep-horizon needs at least one dt value")
    return sweep_probe_horizon(
        [spec for _, spec in config.corpus],
        values,
        _base_schedule_params(config),
        runs=config.runs,
        seed=config.seed,
        success_threshold=config.success_threshold,
    )


def sweep_bundle(
    config: ExperimentConfig,
    epsilon_sweep: list[EpsilonRow] | None = None,
    horizon_sweep: list[HorizonRow] | None = None,
) -> ReportBundle:
    """Bundle holding only sweep tables (no matrix cells)."""
    return ReportBundle(
        config=config.to_dict(),
        tool_version=TOOL_VERSION,
        timestamp=_timestamp(),
        fields=[],
        cells=[],
        runs=[],
        epsilon_sweep=epsilon_sweep,
        horizon_sweep=horizon_sweep,
    )


def _base_schedule_params(config: ExperimentConfig) -> ScheduleParams:
    for entry in config.solvers:
        if entry.get("name") == "adaptive":
            return schedule_params_from(entry)
    return ScheduleParams()


def _sweep_tasks(config: ExperimentConfig):
    """(field, x0, oracle) triples with paired draws, oracles precomputed."""
    rng = np.random.default_rng(config.seed)
    tasks = []
    for _, spec in config.corpus:
        field = spec.build()
        x0s = rng.standard_normal((config.runs, field.dim))
        for x0 in x0s:
            try:
                oracle = exact_endpoint(spec, x0)
            except UnsupportedOracle:
                oracle = reference_solve(field, x0)
            tasks.append((field, x0, oracle))
    return tasks


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------


def _cell_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_reports(
    bundle: ReportBundle, formats=("csv", "json"), out_dir="out"
) -> list[Path]:
    """Write the bundle to disk: runs CSV, full JSON, and sweep plot data.

    Plot data files are plain two-column numeric text, one file per curve.
    Returns the list of written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    formats = set(formats)
    unknown = formats - {"csv", "json"}
    if unknown:
        raise ConfigError(f"unknown report formats: {sorted(unknown)}")
    if "csv" in formats:
        path = out / "runs.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in bundle.runs:
                writer.writerow(
                    [
                        _cell_text(v)
                        for v in (
                            r.run_id,
                            r.solver,
                            r.field,
                            r.steps,
                            r.nfe,
                            r.solver_time_s,
                            r.error,
                            r.success,
                            r.probe_similarity,
                            r.scheduled_n,
                        )
                    ]
                )
        written.append(path)
    if "json" in formats:
        path = out / "bundle.json"
        with open(path, "w") as fh:
            json.dump(bundle.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    if bundle.epsilon_sweep:
        curves = {
            "epsilon_mean_steps.dat": lambda r: r.mean_steps,
            "epsilon_mean_error.dat": lambda r: r.mean_error,
            "epsilon_success_rate.dat": lambda r: r.success_rate,
            "epsilon_mean_solver_time.dat": lambda r: r.mean_solver_time_s,
        }
        for fname, get in curves.items():
            path = out / fname
            _write_curve(path, [(r.epsilon, get(r)) for r in bundle.epsilon_sweep])
            written.append(path)
    if bundle.horizon_sweep:
        curves = {
            "horizon_mean_steps.dat": lambda r: r.mean_steps,
            "horizon_mean_error.dat": lambda r: r.mean_error,
            "horizon_failure_rate.dat": lambda r: r.failure_rate,
        }
        for fname, get in curves.items():
            path = out / fname
            _write_curve(path, [(r.dt_probe, get(r)) for r in bundle.horizon_sweep])
            written.append(path)
    return written


def _write_curve(path: Path, points) -> None:
    with open(path, "w") as fh:
        for x, y in points:
            fh.write(f"{x:.17g} {y:.17g}\n")


def load_bundle(path) -> ReportBundle:
    with open(path) as fh:
        return ReportBundle.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# benchmark corpora
# ---------------------------------------------------------------------------


def mixed_corpus(
    n_fields: int = 20, seed: int = 0, straight_fraction: float = 0.7
) -> list[tuple[str, FieldSpec]]:
    """Mostly-straight corpus with a curved-piecewise minority.

    The straight majority mixes exactly-constant fields with gently curving
    rotations. The curved minority is piecewise: mostly short, gentle
    curvature windows finishing before the default probe horizon, plus a
    strongly curved tail whose truncation error dominates every solver's
    error budget at matched step counts.
    """
    rng = np.random.default_rng(seed)
    n_straight = round(n_fields * straight_fraction)
    corpus: list[tuple[str, FieldSpec]] = []
    for i in range(n_straight):
        if i % 2 == 0:
            u = _random_direction(rng) * rng.uniform(0.5, 2.0)
            spec = FieldSpec("constant", {"velocity": u.tolist()})
        else:
            # gentle enough that the default tolerance still schedules n_min
            omega = rng.uniform(0.12, 0.22) * rng.choice([-1.0, 1.0])
            spec = FieldSpec("rotation", {"omega": float(omega)})
        corpus.append((f"straight-{i:02d}", spec))
    for i in range(n_fields - n_straight):
        u = _random_direction(rng)
        if i % 3 != 2:
            # gentle curvature window, finished before the probe horizon
            b1 = rng.uniform(0.15, 0.35)
            b2 = b1 + rng.uniform(0.04, 0.08)
            spec = FieldSpec(
                "piecewise-curvature",
                {
                    "velocity": (u * rng.uniform(0.8, 1.5)).tolist(),
                    "breakpoints": [float(b1), float(b2)],
                    "omega": float(rng.uniform(0.2, 0.5) * rng.choice([-1.0, 1.0])),
                },
            )
        else:
            # strong curvature starting early; reliably detected by the probe
            spec = FieldSpec(
                "piecewise-curvature",
                {
                    "velocity": (u * rng.uniform(4.0, 8.0)).tolist(),
                    "breakpoints": [float(rng.uniform(0.15, 0.4))],
                    "omega": float(rng.uniform(1.5, 3.5) * rng.choice([-1.0, 1.0])),
                },
            )
        corpus.append((f"curved-{i:02d}", spec))
    return corpus


def piecewise_corpus(
    n_fields: int = 15, seed: int = 0, late_fraction: float = 0.3
) -> list[tuple[str, FieldSpec]]:
    """Single-breakpoint piecewise fields for the probe-horizon study.

    ``late_fraction`` of the fields switch to curvature after t = 0.5, where
    only a long probe horizon can see them; the rest switch early. The
    post-break rotation is slow, so a missed switch leaves the bypass route
    overshooting by a large fraction of the straight-phase displacement while
    a dense schedule that catches the switch stays accurate.
    """
    rng = np.random.default_rng(seed)
    n_late = round(n_fields * late_fraction)
    corpus = []
    for i in range(n_fields):
        late = i < n_late
        t_break = rng.uniform(0.55, 0.8) if late else rng.uniform(0.15, 0.45)
        u = _random_direction(rng) * rng.uniform(1.5, 2.5)
        spec = FieldSpec(
            "piecewise-curvature",
            {
                "velocity": u.tolist(),
                "breakpoints": [float(t_break)],
                "omega": float(rng.uniform(0.1, 0.3) * rng.choice([-1.0, 1.0])),
            },
        )
        corpus.append((f"{'late' if late else 'early'}-{i:02d}", spec))
    return corpus


def _random_direction(rng) -> np.ndarray:
    angle = rng.uniform(0.0, 2.0 * np.pi)
    return np.array([np.cos(angle), np.sin(angle)])

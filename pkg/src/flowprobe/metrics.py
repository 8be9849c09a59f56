"""Error, cost, and distribution metrics for solver runs.

Endpoint error is relative Euclidean distance with a unit floor on the
denominator. The "success" notion used throughout the benchmark is a run
whose endpoint error is below a configured threshold (default 1e-2), the
desk-scale stand-in for a task-level success rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import wasserstein_distance

from .errors import ContractViolation
from .solvers import SolveReport

DEFAULT_SUCCESS_THRESHOLD = 1e-2

DISTANCE_KINDS = ("energy-distance", "sliced-wasserstein")


def endpoint_error(report, oracle) -> float:
    """Relative endpoint error ``|x - x*| / max(|x*|, 1)``.

    ``report`` may be a :class:`SolveReport` or a bare endpoint array.
    """
    x = report.endpoint if isinstance(report, SolveReport) else np.asarray(report)
    oracle = np.asarray(oracle, dtype=float)
    if x.shape != oracle.shape:
        raise ContractViolation(
            f"endpoint shape {x.shape} does not match oracle shape {oracle.shape}"
        )
    return float(np.linalg.norm(x - oracle) / max(np.linalg.norm(oracle), 1.0))


@dataclass
class RunAggregate:
    """Summary statistics over one (solver, field) cell.

    Standard deviations are None when fewer than two runs contributed.
    Wall-time statistics cover solver time only; oracle computation is
    timed separately by the harness and never enters these columns.
    """

    solver: str
    runs: int
    mean_steps: float
    std_steps: float | None
    mean_nfe: float
    std_nfe: float | None
    mean_wall_time: float
    p95_wall_time: float
    mean_error: float
    success_rate: float


def aggregate(
    reports: list[SolveReport],
    oracles,
    success_threshold: float = DEFAULT_SUCCESS_THRESHOLD,
) -> RunAggregate:
    """Deterministic statistics over paired (report, oracle) runs."""
    if not reports:
        raise ContractViolation("aggregate needs at least one report")
    if len(reports) != len(oracles):
        raise ContractViolation("reports and oracles must have equal length")
    errors = [endpoint_error(r, o) for r, o in zip(reports, oracles)]
    steps = np.array([r.steps_taken for r in reports], dtype=float)
    nfes = np.array([r.nfe for r in reports], dtype=float)
    walls = np.array([r.wall_time for r in reports], dtype=float)
    many = len(reports) >= 2
    return RunAggregate(
        solver=reports[0].solver_name,
        runs=len(reports),
        mean_steps=float(steps.mean()),
        std_steps=float(steps.std(ddof=1)) if many else None,
        mean_nfe=float(nfes.mean()),
        std_nfe=float(nfes.std(ddof=1)) if many else None,
        mean_wall_time=float(walls.mean()),
        p95_wall_time=float(np.percentile(walls, 95)),
        mean_error=float(np.mean(errors)),
        success_rate=float(np.mean([e < success_threshold for e in errors])),
    )


@dataclass
class DistributionDistance:
    value: float
    kind: str


def distribution_distance(
    samples_a,
    samples_b,
    kind: str = "energy-distance",
    *,
    n_projections: int = 64,
    seed: int = 0,
) -> DistributionDistance:
    """Distance between two sample sets of equal dimension.

    ``energy-distance`` is the plain pairwise form
    ``2 E|a - b| - E|a - a'| - E|b - b'|`` with all means taken over full
    pairwise grids (V-statistic, self-pairs included) and no square root,
    so identical sets give exactly zero. ``sliced-wasserstein`` averages
    one-dimensional W1 distances over ``n_projections`` fixed-seed random
    unit directions.
    """
    a = np.atleast_2d(np.asarray(samples_a, dtype=float))
    b = np.atleast_2d(np.asarray(samples_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ContractViolation("sample sets must be non-empty")
    if a.shape[1] != b.shape[1]:
        raise ContractViolation(
            f"sample dimensions differ: {a.shape[1]} vs {b.shape[1]}"
        )
    if kind not in DISTANCE_KINDS:
        raise ContractViolation(f"unknown distance kind {kind!r}")
    if kind == "energy-distance":
        value = (
            2.0 * cdist(a, b).mean() - cdist(a, a).mean() - cdist(b, b).mean()
        )
    else:
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((n_projections, a.shape[1]))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        value = float(
            np.mean(
                [wasserstein_distance(a @ d, b @ d) for d in dirs]
            )
        )
    return DistributionDistance(value=float(value), kind=kind)

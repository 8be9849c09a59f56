"""One-shot lookahead linearity probe and curvature-adaptive integration.

The probe spends two field evaluations: one at the start state and one at a
state extrapolated a large interval ahead along the initial velocity. The
cosine similarity between the two velocities is a geometric proxy for local
path curvature: near 1 the path is straight and almost all intermediate
steps can be skipped, lower values trigger a denser schedule.

:func:`adaptive_solve` turns the similarity into a step count and routes the
integration so that both probe evaluations are reused when the path is
straight (total cost 2 evaluations) and the start evaluation is reused
otherwise (cost N + 1).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractViolation, NumericalBlowup, UnsupportedOracle
from .fields import Array, FieldSpec, VectorField, exact_endpoint
from .metrics import endpoint_error
from .solvers import SolveReport, StepRecord, _quiet, reference_solve

# below this velocity norm the cosine is numerically meaningless; treat the
# path as maximally uncertain and let the scheduler go dense
DEGENERATE_NORM = 1e-12


@dataclass
class ScheduleParams:
    """Probe and scheduler configuration.

    Defaults are the benchmark defaults: tolerance 0.008, probe horizon 0.5,
    steps scaled in increments of 2 between 2 and 10. ``n_min`` must be at
    least 2 because the probe itself already spends two evaluations.
    """

    epsilon: float = 0.008
    dt_probe: float = 0.5
    n_min: int = 2
    n_max: int = 10
    delta_n: int = 2

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ContractViolation("epsilon must be positive")
        if not 0.0 < self.dt_probe < 1.0:
            raise ContractViolation("dt_probe must lie in (0, 1)")
        if self.n_min < 2:
            raise ContractViolation("n_min must be >= 2 (the probe costs 2 NFEs)")
        if self.n_max < self.n_min:
            raise ContractViolation("n_max must be >= n_min")
        if self.delta_n < 1:
            raise ContractViolation("delta_n must be >= 1")


@dataclass
class ProbeResult:
    v_start: Array
    x_probe: Array
    v_probe: Array
    similarity: float


def probe(
    field: VectorField, x0, c=None, params: ScheduleParams | None = None
) -> ProbeResult:
    """Two-evaluation linearity probe.

    Evaluates the field at ``(x0, 0)`` and at the lookahead state
    ``x0 + dt_probe * v_start`` (passing ``dt_probe`` as the time argument),
    then returns the cosine similarity of the two velocities. If either
    velocity norm is below ``DEGENERATE_NORM`` the similarity is defined as
    0, which schedules the dense route.
    """
    params = params or ScheduleParams()
    x0 = np.asarray(x0, dtype=float)
    v_start = field.evaluate(x0, 0.0, c)
    if not np.all(np.isfinite(v_start)):
        raise NumericalBlowup("probe start velocity is non-finite")
    with _quiet():
        x_probe = x0 + params.dt_probe * v_start
    if not np.all(np.isfinite(x_probe)):
        raise NumericalBlowup("probe lookahead state is non-finite")
    v_probe = field.evaluate(x_probe, params.dt_probe, c)
    if not np.all(np.isfinite(v_probe)):
        raise NumericalBlowup("probe lookahead velocity is non-finite")
    ns = float(np.linalg.norm(v_start))
    np_ = float(np.linalg.norm(v_probe))
    if ns < DEGENERATE_NORM or np_ < DEGENERATE_NORM:
        similarity = 0.0
    elif np.array_equal(v_start, v_probe):
        similarity = 1.0  # exactly straight fields read exactly 1
    elif np.array_equal(v_start, -v_probe):
        similarity = -1.0
    else:
        similarity = float(np.dot(v_start, v_probe) / (ns * np_))
        similarity = min(1.0, max(-1.0, similarity))
    return ProbeResult(v_start, x_probe, v_probe, similarity)


def schedule_steps(similarity: float, params: ScheduleParams | None = None) -> int:
    """Map a similarity score to a step count.

    ``N = clip(n_min + floor((1 - S) / epsilon) * delta_n, n_min, n_max)``
    with the mathematical floor; the clip saturates at both bounds.
    """
    params = params or ScheduleParams()
    if not -1.0 - 1e-9 <= similarity <= 1.0 + 1e-9:
        raise ContractViolation(f"similarity {similarity} outside [-1, 1]")
    s = min(1.0, max(-1.0, float(similarity)))
    n = params.n_min + math.floor((1.0 - s) / params.epsilon) * params.delta_n
    return int(min(max(n, params.n_min), params.n_max))


def adaptive_solve(
    field: VectorField, x0, c=None, params: ScheduleParams | None = None
) -> SolveReport:
    """Probe once, schedule N, then integrate with maximal state reuse.

    When the schedule lands on ``n_min`` the intermediate integration is
    bypassed entirely: the endpoint is ``x_probe + v_probe * (1 - dt_probe)``
    and both probe evaluations are reused, for a total of 2 NFEs. Otherwise
    integration restarts from ``x0`` on the uniform N-grid, reusing the start
    velocity for the first step and discarding the lookahead one, for a total
    of N + 1 NFEs.
    """
    params = params or ScheduleParams()
    x0 = np.asarray(x0, dtype=float).copy()
    nfe0 = field.nfe
    start = time.perf_counter()
    pr = probe(field, x0, c, params)
    n = schedule_steps(pr.similarity, params)
    record: StepRecord = [(0.0, x0.copy(), pr.v_start)]
    if n == params.n_min:
        with _quiet():
            endpoint = pr.x_probe + pr.v_probe * (1.0 - params.dt_probe)
        _check_endpoint(endpoint, n)
        record.append((params.dt_probe, pr.x_probe.copy(), pr.v_probe))
    else:
        dt = 1.0 / n
        with _quiet():
            x = x0 + pr.v_start * dt
            if not np.all(np.isfinite(x)):
                raise NumericalBlowup("adaptive solve blew up at step 1", step=1)
            for i in range(1, n):
                t = i / n
                v = field.evaluate(x, t, c)
                record.append((t, x.copy(), v))
                x = x + v * dt
                if not np.all(np.isfinite(x)):
                    raise NumericalBlowup(
                        f"adaptive solve blew up at step {i + 1}", step=i + 1
                    )
        endpoint = x
    wall = time.perf_counter() - start
    record.append((1.0, endpoint.copy(), None))
    return SolveReport(
        endpoint=endpoint,
        steps_taken=n,
        nfe=field.nfe - nfe0,
        step_record=record,
        wall_time=wall,
        solver_name="adaptive",
        probe_similarity=pr.similarity,
        scheduled_n=n,
    )


def _check_endpoint(x: Array, n: int) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericalBlowup(f"adaptive bypass endpoint non-finite (N = {n})")


@dataclass
class HorizonRow:
    """One row of the probe-horizon sweep table."""

    dt_probe: float
    mean_steps: float
    mean_error: float
    failure_rate: float


def sweep_probe_horizon(
    corpus: list[FieldSpec],
    dt_values: list[float],
    params: ScheduleParams | None = None,
    *,
    runs: int = 20,
    seed: int = 0,
    success_threshold: float = 1e-2,
) -> list[HorizonRow]:
    """Sweep the lookahead horizon over a field corpus.

    For each ``dt`` every (field, run) pair is solved adaptively from the
    same start states (paired across horizons) and compared against the
    field's oracle endpoint: the closed form where one exists, otherwise a
    high-accuracy reference solve. A run fails when its relative endpoint
    error is at least ``success_threshold`` or the solve raises.
    """
    if not corpus or not dt_values:
        raise ContractViolation("sweep needs a non-empty corpus and dt grid")
    for dt in dt_values:
        if not 0.0 < dt < 1.0:
            raise ContractViolation(f"dt_probe value {dt} outside (0, 1)")
    params = params or ScheduleParams()
    rng = np.random.default_rng(seed)
    starts: list[tuple[VectorField, Array, Array]] = []
    for spec in corpus:
        field = spec.build()
        x0s = rng.standard_normal((runs, field.dim))
        for x0 in x0s:
            try:
                oracle = exact_endpoint(spec, x0)
            except UnsupportedOracle:
                oracle = reference_solve(field, x0)
            starts.append((field, x0, oracle))
    rows = []
    for dt in dt_values:
        p = replace(params, dt_probe=float(dt))
        steps, errors, failures = [], [], 0
        for field, x0, oracle in starts:
            try:
                report = adaptive_solve(field, x0, None, p)
            except (NumericalBlowup, ContractViolation):
                failures += 1
                continue
            err = endpoint_error(report, oracle)
            steps.append(report.steps_taken)
            errors.append(err)
            if err >= success_threshold:
                failures += 1
        rows.append(
            HorizonRow(
                dt_probe=float(dt),
                mean_steps=float(np.mean(steps)) if steps else float("nan"),
                mean_error=float(np.mean(errors)) if errors else float("nan"),
                failure_rate=failures / len(starts),
            )
        )
    return rows

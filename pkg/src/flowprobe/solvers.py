"""Baseline integrators for the probability-flow ODE.

Fixed-step forward Euler, two-step Adams-Bashforth, an embedded
Dormand-Prince 5(4) pair with adaptive step size, and a high-accuracy
reference endpoint used as the error oracle where no closed form exists.

Every solver returns a :class:`SolveReport`. NFE figures are the
field-counter delta over the solve, so they count exactly the evaluations
the solver performed, including rejected Dormand-Prince stages.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, NumericalBlowup, StiffnessError
from .fields import Array, VectorField

# step record entries are (t, x, v); v is None where no evaluation happened
# at that node (the t = 1 entry of the fixed-step solvers)
StepRecord = list[tuple[float, Array, Array | None]]


@dataclass
class SolveReport:
    """Everything one solve produced: endpoint, trajectory, and cost."""

    endpoint: Array
    steps_taken: int
    nfe: int
    step_record: StepRecord
    wall_time: float
    solver_name: str
    probe_similarity: float | None = None
    scheduled_n: int | None = None


@dataclass
class Rk45Config:
    atol: float = 1e-6
    rtol: float = 1e-6
    initial_step: float = 0.1
    min_step: float = 1e-12
    max_step: float = 1.0

    def __post_init__(self):
        if self.atol <= 0 or self.rtol <= 0:
            raise ContractViolation("tolerances must be positive")
        if not self.min_step <= self.initial_step <= self.max_step:
            raise ContractViolation(
                "step bounds must satisfy min_step <= initial_step <= max_step"
            )


def _check_finite(x: Array, step: int, solver: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericalBlowup(
            f"{solver} produced a non-finite state at step {step}", step=step
        )


def _quiet():
    # overflow inside a diverging solve is detected per step and raised as
    # NumericalBlowup; suppress the redundant numpy warnings on that path
    return np.errstate(over="ignore", invalid="ignore")


def euler_solve(field: VectorField, x0, c=None, n: int = 50) -> SolveReport:
    """Fixed-step forward Euler on the uniform grid t_k = k/n; nfe = n."""
    if n < 1:
        raise ContractViolation(f"euler_solve requires n >= 1, got {n}")
    x = np.asarray(x0, dtype=float).copy()
    dt = 1.0 / n
    record: StepRecord = []
    nfe0 = field.nfe
    start = time.perf_counter()
    with _quiet():
        for k in range(n):
            t = k / n
            v = field.evaluate(x, t, c)
            record.append((t, x.copy(), v))
            x = x + dt * v
            _check_finite(x, k + 1, "euler")
    wall = time.perf_counter() - start
    record.append((1.0, x.copy(), None))
    return SolveReport(x, n, field.nfe - nfe0, record, wall, "euler")


def ab2_solve(field: VectorField, x0, c=None, n: int = 10) -> SolveReport:
    """Two-step Adams-Bashforth with an Euler bootstrap step; nfe = n.

    Step 1 is plain Euler; steps 2..n use
    ``x_{k+1} = x_k + dt * (3/2 v_k - 1/2 v_{k-1})``, reusing the previous
    velocity so each step costs one new evaluation.
    """
    if n < 2:
        raise ContractViolation(f"ab2_solve requires n >= 2, got {n}")
    x = np.asarray(x0, dtype=float).copy()
    dt = 1.0 / n
    record: StepRecord = []
    nfe0 = field.nfe
    start = time.perf_counter()
    with _quiet():
        v_prev = field.evaluate(x, 0.0, c)
        record.append((0.0, x.copy(), v_prev))
        x = x + dt * v_prev
        _check_finite(x, 1, "ab2")
        for k in range(1, n):
            t = k / n
            v = field.evaluate(x, t, c)
            record.append((t, x.copy(), v))
            x = x + dt * (1.5 * v - 0.5 * v_prev)
            _check_finite(x, k + 1, "ab2")
            v_prev = v
    wall = time.perf_counter() - start
    record.append((1.0, x.copy(), None))
    return SolveReport(x, n, field.nfe - nfe0, record, wall, "ab2")


# Dormand-Prince 5(4) tableau. The seventh stage row equals the fifth-order
# weights, so the last stage of an accepted step is the first stage of the
# next one (FSAL) and each accepted step after the first costs 6 evaluations.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# fifth-order minus embedded fourth-order weights: the error estimate
_DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


def rk45_solve(
    field: VectorField, x0, c=None, cfg: Rk45Config | None = None
) -> SolveReport:
    """Embedded Dormand-Prince 5(4) with standard step-size control.

    Steps are accepted when the scaled RMS of the embedded error estimate
    against ``atol + rtol * max(|x|, |x_new|)`` is at most 1; the next step
    is scaled by ``0.9 * err^(-1/5)`` clamped to [0.2, 5.0]. Rejected-step
    stages are counted in the NFE total, and the final step is shortened to
    land exactly on t = 1.
    """
    cfg = cfg or Rk45Config()
    x = np.asarray(x0, dtype=float).copy()
    record: StepRecord = []
    nfe0 = field.nfe
    start = time.perf_counter()
    t = 0.0
    h = min(cfg.initial_step, 1.0)
    k1 = field.evaluate(x, t, c)
    record.append((0.0, x.copy(), k1))
    accepted = 0
    attempts = 0
    with _quiet():
        while t < 1.0:
            last = h >= 1.0 - t
            if last:
                h = 1.0 - t
            attempts += 1
            ks = [k1]
            for i in range(1, 7):
                xi = x + h * sum(a * k for a, k in zip(_DP_A[i], ks))
                if not np.all(np.isfinite(xi)):
                    raise NumericalBlowup(
                        f"rk45 stage state non-finite at attempt {attempts}",
                        step=attempts,
                    )
                ti = min(t + _DP_C[i] * h, 1.0)
                ks.append(field.evaluate(xi, ti, c))
            x_new = x + h * sum(b * k for b, k in zip(_DP_B5, ks) if b != 0.0)
            _check_finite(x_new, attempts, "rk45")
            err_vec = h * sum(e * k for e, k in zip(_DP_E, ks) if e != 0.0)
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(x), np.abs(x_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if not np.isfinite(err):
                raise NumericalBlowup(
                    f"rk45 error estimate non-finite at attempt {attempts}",
                    step=attempts,
                )
            if err <= 1.0:
                t = 1.0 if last else t + h
                x = x_new
                k1 = ks[6]
                accepted += 1
                record.append((t, x.copy(), k1))
                factor = _MAX_FACTOR if err == 0.0 else min(
                    _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2)
                )
                h = min(max(h * factor, cfg.min_step), cfg.max_step)
            else:
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2))
                h = h * factor
                if h < cfg.min_step:
                    raise StiffnessError(
                        f"rk45 step size underflowed {cfg.min_step:g} at t = {t:.6g}"
                    )
    wall = time.perf_counter() - start
    return SolveReport(x, accepted, field.nfe - nfe0, record, wall, "rk45")


# Reference oracle policy, fixed for reproducibility: Dormand-Prince at
# atol = rtol = 1e-10, falling back to a 10^6-step Euler solve if the
# adaptive solve fails.
_REFERENCE_CFG = Rk45Config(
    atol=1e-10, rtol=1e-10, initial_step=0.01, min_step=1e-14, max_step=1.0
)
_REFERENCE_EULER_N = 10**6


def reference_solve(field: VectorField, x0, c=None) -> Array:
    """High-accuracy endpoint used as the error oracle for learned fields."""
    try:
        return rk45_solve(field, x0, c, _REFERENCE_CFG).endpoint
    except (StiffnessError, NumericalBlowup):
        return euler_solve(field, x0, c, _REFERENCE_EULER_N).endpoint

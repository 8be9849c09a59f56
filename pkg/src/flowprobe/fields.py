"""Vector fields for probability-flow integration.

A field is an evaluatable velocity ``v(x, t, c)`` over flow time
``t in [0, 1]``. Every evaluation goes through :meth:`VectorField.evaluate`,
which validates its inputs and increments the instance's NFE counter, the
cost unit used throughout the benchmark.

Besides the abstract base this module provides a family of analytic fields
with known exact flows (constant, affine, planar rotation, and a piecewise
straight/curved profile) so that solver output can be checked against closed
forms, plus :class:`FieldSpec`, a serializable description used by benchmark
configs.
"""

from __future__ import annotations

import bisect
import threading
from dataclasses import dataclass, field as _field
from typing import Any

import numpy as np
from scipy.linalg import expm

from .errors import ContractViolation, UnsupportedOracle

Array = np.ndarray

# 90 degree rotation generator: v = omega * J @ x curls counterclockwise.
_J = np.array([[0.0, -1.0], [1.0, 0.0]])

FIELD_KINDS = ("constant", "affine", "rotation", "piecewise-curvature", "learned")

_FIELD_PARAM_KEYS = {
    "constant": {"velocity"},
    "affine": {"matrix", "offset"},
    "rotation": {"omega"},
    "piecewise-curvature": {"velocity", "breakpoints", "omega"},
    "learned": {"weights"},
}


def _as_vector(value, name: str) -> Array:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.size < 1:
        raise ContractViolation(f"{name} must have at least one component")
    return arr


class VectorField:
    """Base class: a velocity field with an evaluation (NFE) counter.

    Evaluation is a pure function of ``(x, t, c)``; the only mutable state
    is the NFE counter. The counter is guarded by a lock, so a single field
    instance may be shared across threads and still count every evaluation
    exactly once. Concurrent solves that want independent counts should use
    one instance per solve instead.
    """

    def __init__(self, dim: int):
        dim = int(dim)
        if dim < 1:
            raise ContractViolation(f"field dimension must be >= 1, got {dim}")
        self.dim = dim
        self._nfe = 0
        self._nfe_lock = threading.Lock()

    def evaluate(self, x, t: float, c=None) -> Array:
        """Return ``v(x, t, c)`` and increment the NFE counter by one."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ContractViolation(
                f"state has shape {x.shape}, field dimension is {self.dim}"
            )
        if not np.all(np.isfinite(x)):
            raise ContractViolation("non-finite state passed to evaluate")
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise ContractViolation(f"flow time {t} outside [0, 1]")
        v = self._velocity(x, t, c)
        with self._nfe_lock:
            self._nfe += 1
        return v

    def _velocity(self, x: Array, t: float, c) -> Array:
        raise NotImplementedError

    @property
    def nfe(self) -> int:
        """Total evaluations since construction or the last reset."""
        with self._nfe_lock:
            return self._nfe

    def reset_nfe(self) -> None:
        with self._nfe_lock:
            self._nfe = 0


def nfe_count(field: VectorField) -> int:
    """Evaluation count of ``field`` (function form of :attr:`VectorField.nfe`)."""
    return field.nfe


class ConstantField(VectorField):
    """``v(x, t) = u`` for a fixed vector ``u``; the exactly-straight case."""

    def __init__(self, velocity):
        u = _as_vector(velocity, "velocity")
        super().__init__(u.size)
        self.velocity = u

    def _velocity(self, x, t, c):
        return self.velocity.copy()


class AffineField(VectorField):
    """``v(x, t) = A x + b`` with exact flow through the matrix exponential."""

    def __init__(self, matrix, offset=None):
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ContractViolation(f"matrix must be square, got shape {a.shape}")
        super().__init__(a.shape[0])
        self.matrix = a
        self.offset = (
            np.zeros(self.dim) if offset is None else _as_vector(offset, "offset")
        )
        if self.offset.size != self.dim:
            raise ContractViolation("offset dimension does not match matrix")

    def _velocity(self, x, t, c):
        return self.matrix @ x + self.offset


class RotationField(VectorField):
    """Planar field ``v = omega * J x``; the exact flow rotates about the origin."""

    def __init__(self, omega: float):
        super().__init__(2)
        self.omega = float(omega)

    def _velocity(self, x, t, c):
        return self.omega * (_J @ x)


class PiecewiseCurvatureField(VectorField):
    """Alternating straight and rotating phases over flow time.

    The field is the constant velocity ``u`` on ``[0, b_1)``, rotates with
    angular rate ``omega`` on ``[b_1, b_2)``, and keeps alternating at each
    further breakpoint. A single breakpoint gives the straight-then-curved
    profile used by the benchmark corpora; the breakpoint positions control
    where along the trajectory the curvature sits relative to the probe
    horizon.
    """

    def __init__(self, velocity, breakpoints, omega: float):
        u = _as_vector(velocity, "velocity")
        if u.size != 2:
            raise ContractViolation("piecewise-curvature field requires d = 2")
        super().__init__(2)
        bps = [float(b) for b in breakpoints]
        if not bps:
            raise ContractViolation("at least one breakpoint is required")
        if sorted(bps) != bps or len(set(bps)) != len(bps):
            raise ContractViolation("breakpoints must be strictly ascending")
        if bps[0] <= 0.0 or bps[-1] >= 1.0:
            raise ContractViolation("breakpoints must lie strictly inside (0, 1)")
        self.velocity = u
        self.breakpoints = bps
        self.omega = float(omega)

    def _phase(self, t: float) -> int:
        # number of breakpoints <= t; even -> straight, odd -> rotating
        return bisect.bisect_right(self.breakpoints, t)

    def _velocity(self, x, t, c):
        if self._phase(t) % 2 == 0:
            return self.velocity.copy()
        return self.omega * (_J @ x)


@dataclass(frozen=True)
class FieldSpec:
    """Serializable description of a field, used by configs and oracles.

    ``params`` holds the kind-specific parameters:

    - ``constant``: ``velocity`` (list of floats)
    - ``affine``: ``matrix`` (nested list), optional ``offset``
    - ``rotation``: ``omega``
    - ``piecewise-curvature``: ``velocity``, ``breakpoints``, ``omega``
    - ``learned``: ``weights`` (path to a weight document)

    ``dim`` may be omitted for ``learned`` specs, in which case it is
    resolved from the weight document at build time.
    """

    kind: str
    params: dict = _field(default_factory=dict)
    dim: int | None = None

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ContractViolation(
                f"unknown field kind {self.kind!r}; expected one of {FIELD_KINDS}"
            )
        unknown = set(self.params) - _FIELD_PARAM_KEYS[self.kind]
        if unknown:
            raise ContractViolation(
                f"unknown parameters for {self.kind} field: {sorted(unknown)}"
            )
        if self.kind != "learned" and self.dim is None:
            object.__setattr__(self, "dim", self._inferred_dim())
        # construct eagerly so bad parameters fail at spec time, not solve time
        if self.kind != "learned":
            self.build()

    def _inferred_dim(self) -> int:
        if self.kind == "constant":
            return _as_vector(self.params.get("velocity", []), "velocity").size
        if self.kind == "affine":
            return np.asarray(self.params.get("matrix", []), dtype=float).shape[0]
        return 2

    def build(self) -> VectorField:
        """Construct a fresh field instance (NFE counter at zero)."""
        p = self.params
        if self.kind == "constant":
            f = ConstantField(p["velocity"])
        elif self.kind == "affine":
            f = AffineField(p["matrix"], p.get("offset"))
        elif self.kind == "rotation":
            f = RotationField(p["omega"])
        elif self.kind == "piecewise-curvature":
            f = PiecewiseCurvatureField(p["velocity"], p["breakpoints"], p["omega"])
        else:
            from .mlp import load_weights_file

            f = load_weights_file(p["weights"])
        if self.dim is not None and f.dim != self.dim:
            raise ContractViolation(
                f"spec declares dimension {self.dim} but field has {f.dim}"
            )
        return f

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind}
        d.update(self.params)
        if self.dim is not None:
            d["dim"] = self.dim
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FieldSpec":
        d = dict(d)
        kind = d.pop("kind", None)
        if kind is None:
            raise ContractViolation("field entry is missing 'kind'")
        dim = d.pop("dim", None)
        return cls(kind=kind, params=d, dim=dim)


def exact_endpoint(spec: FieldSpec, x0) -> Array:
    """Closed-form solution ``x(1)`` of ``dx/dt = v(x, t)`` from ``x(0) = x0``.

    Only analytic kinds have a closed form; ``learned`` raises
    :class:`UnsupportedOracle` (use a high-accuracy reference solve instead).
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if spec.kind == "learned":
        raise UnsupportedOracle("learned fields have no closed-form endpoint")
    if spec.dim is not None and x0.size != spec.dim:
        raise ContractViolation(
            f"x0 has dimension {x0.size}, spec declares {spec.dim}"
        )
    p = spec.params
    if spec.kind == "constant":
        return x0 + _as_vector(p["velocity"], "velocity")
    if spec.kind == "affine":
        a = np.asarray(p["matrix"], dtype=float)
        b = (
            np.zeros(a.shape[0])
            if p.get("offset") is None
            else _as_vector(p["offset"], "offset")
        )
        # augmented generator: d/dt [x; 1] = [[A, b], [0, 0]] [x; 1]
        m = np.zeros((a.shape[0] + 1, a.shape[0] + 1))
        m[:-1, :-1] = a
        m[:-1, -1] = b
        # a diverging generator overflows to inf; callers see non-finite output
        with np.errstate(over="ignore", invalid="ignore"):
            return (expm(m) @ np.append(x0, 1.0))[:-1]
    if spec.kind == "rotation":
        return _rotate(x0, float(p["omega"]))
    # piecewise-curvature: compose the segment maps in time order
    bps = [float(b) for b in p["breakpoints"]]
    u = _as_vector(p["velocity"], "velocity")
    omega = float(p["omega"])
    x = x0.copy()
    edges = [0.0] + bps + [1.0]
    for i in range(len(edges) - 1):
        span = edges[i + 1] - edges[i]
        if i % 2 == 0:
            x = x + span * u
        else:
            x = _rotate(x, omega * span)
    return x


def _rotate(x: Array, angle: float) -> Array:
    ca, sa = np.cos(angle), np.sin(angle)
    return np.array([ca * x[0] - sa * x[1], sa * x[0] + ca * x[1]])

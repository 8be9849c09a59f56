"""A small learned vector field trained with the flow-matching objective.

The network is a plain fully-connected MLP mapping ``concat(x, t, c)`` to a
velocity of dimension d, with tanh hidden layers. Training regresses the
field output at interpolated states ``x_t = t x1 + (1 - t) x0`` onto the
displacement ``x1 - x0``; gradients come from hand-written backpropagation
and the optimizer is an in-repo Adam. Three hidden layers of width 64 are
enough to give the learned field visible, if mild, curvature on 2-D toy
targets, which is exactly what the lookahead probe needs to be exercised on.

Weight documents are a self-describing binary format; see
:func:`save_weights` for the layout.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    ContractViolation,
    TrainingDiverged,
    WeightFormatError,
    WeightSchemaError,
)
from .fields import Array, VectorField

DATASETS = ("single-point", "two-gaussians", "two-moons")

SINGLE_POINT_TARGET = np.array([3.0, 3.0])
# two well-separated modes (4 sigma apart) on the same side of the prior, so
# the optimal transport directions from typical noise draws are similar and
# the learned field stays near-straight, as flow matching promises
TWO_GAUSSIAN_MEANS = np.array([[4.0, 1.0], [4.0, -1.0]])
TWO_GAUSSIAN_SIGMA = 0.5
TWO_MOON_SCALE = 2.0
TWO_MOON_NOISE = 0.15

DEFAULT_HIDDEN = (64, 64, 64)


class MlpField(VectorField):
    """Tanh MLP velocity field; weights are a list of (W, b) layer pairs."""

    def __init__(self, dim: int, cond_dim: int = 0, layers=None):
        super().__init__(dim)
        self.cond_dim = int(cond_dim)
        self.layers: list[tuple[Array, Array]] = layers or []
        in_dim = self.dim + 1 + self.cond_dim
        for i, (w, b) in enumerate(self.layers):
            if w.shape[1] != in_dim or b.shape != (w.shape[0],):
                raise ContractViolation(f"layer {i} shape mismatch")
            in_dim = w.shape[0]
        if self.layers and in_dim != self.dim:
            raise ContractViolation("output dimension does not match state dimension")

    @classmethod
    def initialize(
        cls, dim: int, cond_dim: int = 0, hidden=DEFAULT_HIDDEN, rng=None
    ) -> "MlpField":
        """Fresh network with fan-in scaled Gaussian weights."""
        rng = np.random.default_rng(rng)
        sizes = [dim + 1 + cond_dim, *hidden, dim]
        layers = []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            w = rng.standard_normal((n_out, n_in)) / np.sqrt(n_in)
            b = np.zeros(n_out)
            layers.append((w, b))
        return cls(dim, cond_dim, layers)

    def _inputs(self, x: Array, t: float, c) -> Array:
        parts = [x, [float(t)]]
        if self.cond_dim:
            c = np.zeros(self.cond_dim) if c is None else np.asarray(c, dtype=float)
            if c.shape != (self.cond_dim,):
                raise ContractViolation(
                    f"condition has shape {c.shape}, expected ({self.cond_dim},)"
                )
            parts.append(c)
        return np.concatenate(parts)

    def _velocity(self, x, t, c):
        return self.forward(self._inputs(x, t, c)[None, :])[0]

    def forward(self, inputs: Array) -> Array:
        """Batched forward pass; ``inputs`` is (batch, d + 1 + cond_dim)."""
        a = inputs
        for w, b in self.layers[:-1]:
            a = np.tanh(a @ w.T + b)
        w, b = self.layers[-1]
        return a @ w.T + b

    def _forward_cached(self, inputs: Array):
        # returns output plus every layer's post-activation, for backprop
        acts = [inputs]
        a = inputs
        for w, b in self.layers[:-1]:
            a = np.tanh(a @ w.T + b)
            acts.append(a)
        w, b = self.layers[-1]
        return a @ w.T + b, acts

    def backprop(self, inputs: Array, d_out: Array) -> list[tuple[Array, Array]]:
        """Gradients of ``sum(output * d_out)`` w.r.t. every weight and bias."""
        out, acts = self._forward_cached(inputs)
        grads: list[tuple[Array, Array]] = [None] * len(self.layers)
        delta = d_out
        for i in range(len(self.layers) - 1, -1, -1):
            w, _ = self.layers[i]
            grads[i] = (delta.T @ acts[i], delta.sum(axis=0))
            if i > 0:
                delta = (delta @ w) * (1.0 - acts[i] ** 2)
        return grads


def sample_pair(dataset: str, rng) -> tuple[Array, Array]:
    """Draw a single (noise, target) pair for the named 2-D toy dataset."""
    x0, x1 = sample_batch(dataset, 1, rng)
    return x0[0], x1[0]


def sample_batch(dataset: str, n: int, rng) -> tuple[Array, Array]:
    """Draw ``n`` (noise, target) pairs; noise is always standard normal."""
    if dataset not in DATASETS:
        raise ContractViolation(f"unknown dataset {dataset!r}; expected {DATASETS}")
    rng = np.random.default_rng(rng)
    x0 = rng.standard_normal((n, 2))
    if dataset == "single-point":
        x1 = np.tile(SINGLE_POINT_TARGET, (n, 1))
    elif dataset == "two-gaussians":
        component = rng.integers(0, 2, size=n)
        x1 = TWO_GAUSSIAN_MEANS[component] + TWO_GAUSSIAN_SIGMA * rng.standard_normal(
            (n, 2)
        )
    else:
        theta = rng.uniform(0.0, np.pi, size=n)
        lower = rng.integers(0, 2, size=n).astype(bool)
        x1 = TWO_MOON_SCALE * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        x1[lower] = TWO_MOON_SCALE * np.stack(
            [1.0 - np.cos(theta[lower]), 0.5 - np.sin(theta[lower])], axis=1
        )
        x1 += TWO_MOON_NOISE * rng.standard_normal((n, 2))
    return x0, x1


def fm_loss(field: MlpField, x0, x1, t: float, c=None) -> float:
    """Squared distance between the field at ``x_t`` and the displacement.

    ``x_t = t x1 + (1 - t) x0`` and the regression target is ``x1 - x0``.
    Uses the raw network forward pass, so it does not touch the NFE counter.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if not 0.0 <= t <= 1.0:
        raise ContractViolation(f"t = {t} outside [0, 1]")
    x_t = t * x1 + (1.0 - t) * x0
    out = field.forward(field._inputs(x_t, t, c)[None, :])[0]
    return float(np.sum((out - (x1 - x0)) ** 2))


def fm_loss_and_grads(field: MlpField, x0, x1, t: float, c=None):
    """Loss as :func:`fm_loss` plus its analytic gradients per layer."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    x_t = t * x1 + (1.0 - t) * x0
    inputs = field._inputs(x_t, t, c)[None, :]
    out = field.forward(inputs)
    diff = out - (x1 - x0)[None, :]
    grads = field.backprop(inputs, 2.0 * diff)
    return float(np.sum(diff**2)), grads


COUPLINGS = ("ot", "independent")


def ot_pairing(x0: Array, x1: Array) -> Array:
    """Re-pair a batch by minimum total squared distance (minibatch OT).

    Returns ``x1`` permuted so that pair i is ``(x0[i], x1_perm[i])``. The
    marginals are untouched; only the coupling changes, trading the random
    pairing for the batch-optimal transport plan that flow matching then
    interpolates along near-straight, non-crossing segments.
    """
    cost = (
        np.sum(x0**2, axis=1)[:, None]
        - 2.0 * x0 @ x1.T
        + np.sum(x1**2, axis=1)[None, :]
    )
    _, cols = linear_sum_assignment(cost)
    return x1[cols]


@dataclass
class TrainingConfig:
    dataset: str = "two-gaussians"
    batch_size: int = 128
    steps: int = 4000
    learning_rate: float = 2e-3
    seed: int = 0
    coupling: str = "ot"
    trace_intervals: int = 20

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ContractViolation(f"unknown dataset {self.dataset!r}")
        if self.coupling not in COUPLINGS:
            raise ContractViolation(f"unknown coupling {self.coupling!r}")
        if self.batch_size < 1 or self.steps < 1:
            raise ContractViolation("batch_size and steps must be >= 1")
        if self.learning_rate <= 0:
            raise ContractViolation("learning_rate must be positive")


@dataclass
class TrainingTrace:
    """Average loss per consecutive interval of training steps."""

    interval_losses: list[float]

    @property
    def first(self) -> float:
        return self.interval_losses[0]

    @property
    def last(self) -> float:
        return self.interval_losses[-1]


_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


def train(config: TrainingConfig) -> tuple[MlpField, TrainingTrace]:
    """Fit the field to the flow-matching objective; deterministic given the seed.

    Times are drawn uniformly on [0, 1] per sample. Pairs are coupled per
    batch by minibatch optimal transport by default (``coupling="ot"``),
    which straightens the learned trajectories; ``"independent"`` keeps the
    plain random pairing. The optimizer is Adam with fixed hyperparameters,
    implemented here so training stays dependency-free and bit-reproducible.
    Raises :class:`TrainingDiverged` (with the step index) if the loss ever
    goes non-finite.
    """
    rng = np.random.default_rng(config.seed)
    field = MlpField.initialize(2, rng=rng)
    lr = config.learning_rate
    m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in field.layers]
    v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in field.layers]
    window = max(1, config.steps // config.trace_intervals)
    interval_losses: list[float] = []
    acc, count = 0.0, 0
    for step in range(config.steps):
        bx0, bx1 = sample_batch(config.dataset, config.batch_size, rng)
        if config.coupling == "ot":
            bx1 = ot_pairing(bx0, bx1)
        bt = rng.uniform(0.0, 1.0, size=(config.batch_size, 1))
        x_t = bt * bx1 + (1.0 - bt) * bx0
        inputs = np.concatenate([x_t, bt], axis=1)
        # divergence is detected by the finiteness check, not numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            out, _ = field._forward_cached(inputs)
            diff = out - (bx1 - bx0)
            loss = float(np.mean(np.sum(diff**2, axis=1)))
        if not np.isfinite(loss):
            raise TrainingDiverged(step)
        grads = field.backprop(inputs, 2.0 * diff / config.batch_size)
        bias1 = 1.0 - _ADAM_BETA1 ** (step + 1)
        bias2 = 1.0 - _ADAM_BETA2 ** (step + 1)
        new_layers = []
        for i, ((w, b), (gw, gb)) in enumerate(zip(field.layers, grads)):
            mw = _ADAM_BETA1 * m[i][0] + (1.0 - _ADAM_BETA1) * gw
            mb = _ADAM_BETA1 * m[i][1] + (1.0 - _ADAM_BETA1) * gb
            vw = _ADAM_BETA2 * v[i][0] + (1.0 - _ADAM_BETA2) * gw**2
            vb = _ADAM_BETA2 * v[i][1] + (1.0 - _ADAM_BETA2) * gb**2
            m[i], v[i] = (mw, mb), (vw, vb)
            new_layers.append(
                (
                    w - lr * (mw / bias1) / (np.sqrt(vw / bias2) + _ADAM_EPS),
                    b - lr * (mb / bias1) / (np.sqrt(vb / bias2) + _ADAM_EPS),
                )
            )
        field.layers = new_layers
        acc += loss
        count += 1
        if count == window:
            interval_losses.append(acc / count)
            acc, count = 0.0, 0
    if count:
        interval_losses.append(acc / count)
    return field, TrainingTrace(interval_losses)


# Weight document layout (all integers little-endian):
#   0:4   magic b"MLPW"
#   4:8   u32 format version (1)
#   8:12  u32 state dimension d
#   12:16 u32 condition dimension
#   16:20 u32 layer count L
#   then L pairs of (u32 rows, u32 cols)
#   then per layer: rows*cols float64 (W, row-major) followed by rows float64 (b)
_MAGIC = b"MLPW"
_VERSION = 1


def save_weights(field: MlpField) -> bytes:
    """Serialize a field to the self-describing binary weight document."""
    head = _MAGIC + struct.pack(
        "<III", _VERSION, field.dim, field.cond_dim
    ) + struct.pack("<I", len(field.layers))
    dims = b"".join(struct.pack("<II", *w.shape) for w, _ in field.layers)
    data = b"".join(
        w.astype("<f8").tobytes() + b.astype("<f8").tobytes()
        for w, b in field.layers
    )
    return head + dims + data


def load_weights(document: bytes) -> MlpField:
    """Parse a weight document back into a field.

    Truncation and bad framing raise :class:`WeightFormatError` with the
    offending byte offset; inconsistent declared dimensions raise
    :class:`WeightSchemaError`. Round-trips are bitwise lossless.
    """
    if len(document) < 20:
        raise WeightFormatError("truncated header", offset=len(document))
    if document[:4] != _MAGIC:
        raise WeightFormatError("bad magic, not a weight document", offset=0)
    version, dim, cond_dim, n_layers = struct.unpack("<IIII", document[4:20])
    if version != _VERSION:
        raise WeightFormatError(f"unsupported format version {version}", offset=4)
    if not 1 <= n_layers <= 256:
        raise WeightSchemaError(f"implausible layer count {n_layers}")
    offset = 20
    shapes = []
    for _ in range(n_layers):
        if len(document) < offset + 8:
            raise WeightFormatError("truncated layer table", offset=len(document))
        rows, cols = struct.unpack("<II", document[offset : offset + 8])
        if rows < 1 or cols < 1:
            raise WeightSchemaError(f"layer declares empty shape ({rows}, {cols})")
        shapes.append((rows, cols))
        offset += 8
    expect_in = dim + 1 + cond_dim
    for i, (rows, cols) in enumerate(shapes):
        if cols != expect_in:
            raise WeightSchemaError(
                f"layer {i} declares {cols} inputs, expected {expect_in}"
            )
        expect_in = rows
    if shapes[-1][0] != dim:
        raise WeightSchemaError(
            f"output dimension {shapes[-1][0]} does not match state dimension {dim}"
        )
    layers = []
    for rows, cols in shapes:
        n_bytes = 8 * rows * (cols + 1)
        if len(document) < offset + n_bytes:
            raise WeightFormatError("truncated weight data", offset=len(document))
        w = np.frombuffer(
            document, dtype="<f8", count=rows * cols, offset=offset
        ).reshape(rows, cols)
        b = np.frombuffer(
            document, dtype="<f8", count=rows, offset=offset + 8 * rows * cols
        )
        layers.append((w.copy(), b.copy()))
        offset += n_bytes
    if offset != len(document):
        raise WeightFormatError("trailing bytes after weight data", offset=offset)
    return MlpField(dim, cond_dim, layers)


def save_weights_file(field: MlpField, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_weights(field))


def load_weights_file(path) -> MlpField:
    with open(path, "rb") as fh:
        return load_weights(fh.read())

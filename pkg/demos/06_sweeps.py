"""Sensitivity sweeps: the linearity tolerance and the probe horizon.

Tightening the tolerance buys accuracy with steps; the probe horizon shows
the two failure regimes, myopic on the left (curvature switched on after
the probe looked) and over-conservative on the right (steps inflate).
"""

from pathlib import Path

from flowprobe import (
    ExperimentConfig,
    emit_reports,
    mixed_corpus,
    piecewise_corpus,
    sweep_bundle,
    sweep_epsilon,
    sweep_horizon,
)

cfg_eps = ExperimentConfig(
    corpus=mixed_corpus(16, seed=2),
    solvers=[{"name": "adaptive"}],
    runs=12,
    seed=2,
    timing_repeats=1,
)
eps_rows = sweep_epsilon(cfg_eps, [0.001, 0.002, 0.004, 0.008, 0.016])
print("tolerance sweep (mixed corpus):")
print(f"{'epsilon':>9s} {'steps':>7s} {'error':>11s} {'success':>8s}")
for r in eps_rows:
    print(
        f"{r.epsilon:9.3f} {r.mean_steps:7.2f} {r.mean_error:11.3e} {r.success_rate:8.2f}"
    )

cfg_dt = ExperimentConfig(
    corpus=piecewise_corpus(15, seed=0),
    solvers=[{"name": "adaptive"}],
    runs=12,
    seed=0,
    success_threshold=0.2,
    timing_repeats=1,
)
dt_rows = sweep_horizon(cfg_dt, [0.1, 0.3, 0.5, 0.7, 0.9])
print("\nprobe-horizon sweep (piecewise corpus, failure = rel error >= 0.2):")
print(f"{'dt_probe':>9s} {'steps':>7s} {'error':>11s} {'failure':>8s}")
for r in dt_rows:
    print(
        f"{r.dt_probe:9.2f} {r.mean_steps:7.2f} {r.mean_error:11.3e} {r.failure_rate:8.2f}"
    )

bundle = sweep_bundle(cfg_eps, epsilon_sweep=eps_rows, horizon_sweep=dt_rows)
paths = emit_reports(bundle, ("json",), Path(__file__).parent / "out" / "sweeps")
print()
for p in paths:
    print(f"wrote {p}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(__file__).parent / "out"
    out.mkdir(exist_ok=True)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    ax1.plot([r.epsilon for r in eps_rows], [r.mean_steps for r in eps_rows], "o-")
    ax1.set_xscale("log")
    ax1.set_xlabel(r"tolerance $\epsilon$")
    ax1.set_ylabel("mean steps")
    ax1.set_title("steps vs tolerance")
    ax2b = ax2.twinx()
    ax2.plot([r.dt_probe for r in dt_rows], [r.failure_rate for r in dt_rows], "b-o")
    ax2b.plot([r.dt_probe for r in dt_rows], [r.mean_steps for r in dt_rows], "r--s")
    ax2.set_xlabel(r"probe horizon $\Delta t$")
    ax2.set_ylabel("failure rate", color="b")
    ax2b.set_ylabel("mean steps", color="r")
    ax2.set_title("horizon trade-off")
    fig.tight_layout()
    fig.savefig(out / "sweeps.png", dpi=120)
    print(f"wrote {out / 'sweeps.png'}")
except ImportError:
    print("matplotlib not available; skipped the plot")

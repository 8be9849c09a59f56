"""The lookahead linearity probe and the similarity-to-steps scheduler.

Two field evaluations: one at the start, one at a state extrapolated half
the flow ahead. The cosine similarity between the two velocities reads the
local curvature; the scheduler maps it to a step count between 2 and 10.

On a planar rotation field the similarity has the closed form
S = 1 / sqrt(1 + (omega * dt_probe)^2), so sweeping the angular rate shows
the whole scheduling range. The plot lands in demos/out/.
"""

from pathlib import Path

import numpy as np

from flowprobe import RotationField, ScheduleParams, probe, schedule_steps

params = ScheduleParams()  # epsilon=0.008, dt_probe=0.5, N in [2, 10], step 2

print("similarity -> steps at the default tolerance:")
for s in (1.0, 0.995, 0.99, 0.98, 0.97, 0.9, 0.0, -1.0):
    print(f"  S = {s:+.3f}  ->  N = {schedule_steps(s, params)}")

omegas = np.linspace(0.1, 2 * np.pi, 40)
sims, ns = [], []
for w in omegas:
    pr = probe(RotationField(w), [1.0, 0.0], params=params)
    closed_form = 1.0 / np.sqrt(1.0 + (w * params.dt_probe) ** 2)
    assert abs(pr.similarity - closed_form) < 1e-9
    sims.append(pr.similarity)
    ns.append(schedule_steps(pr.similarity, params))

print("\nrotation-rate sweep (omega in [0.1, 2*pi]):")
for w, s, n in zip(omegas[::8], sims[::8], ns[::8]):
    print(f"  omega = {w:5.2f}  S = {s:.4f}  N = {n}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(__file__).parent / "out"
    out.mkdir(exist_ok=True)
    fig, ax1 = plt.subplots(figsize=(7, 4))
    ax1.plot(omegas, sims, "b-", label="similarity S")
    ax1.set_xlabel(r"angular rate $\omega$")
    ax1.set_ylabel("cosine similarity", color="b")
    ax2 = ax1.twinx()
    ax2.step(omegas, ns, "r-", where="post", label="scheduled N")
    ax2.set_ylabel("scheduled steps", color="r")
    ax1.set_title("curvature reading and step schedule vs rotation rate")
    fig.tight_layout()
    fig.savefig(out / "probe_schedule.png", dpi=120)
    print(f"\nwrote {out / 'probe_schedule.png'}")
except ImportError:
    print("\nmatplotlib not available; skipped the plot")

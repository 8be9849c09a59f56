"""Convergence orders of the baseline integrators.

Euler is first order, Adams-Bashforth-2 second order, and Dormand-Prince
5(4) reaches tolerance-limited accuracy with adaptive steps. The field is
v = x (exact endpoint e), so every error below is against a closed form.
"""

from pathlib import Path

import numpy as np

from flowprobe import AffineField, Rk45Config, ab2_solve, euler_solve, rk45_solve

EXACT = np.e
ns = [10, 100, 1000, 10000]

rows = []
for n in ns:
    e_err = abs(euler_solve(AffineField([[1.0]]), [1.0], n=n).endpoint[0] - EXACT)
    a_err = abs(ab2_solve(AffineField([[1.0]]), [1.0], n=n).endpoint[0] - EXACT)
    rows.append((n, e_err, a_err))

print(f"{'N':>6s} {'euler error':>14s} {'ab2 error':>14s}")
for n, e_err, a_err in rows:
    print(f"{n:6d} {e_err:14.3e} {a_err:14.3e}")

e_slope = np.polyfit(np.log(ns), np.log([r[1] for r in rows]), 1)[0]
a_slope = np.polyfit(np.log(ns), np.log([r[2] for r in rows]), 1)[0]
print(f"\nlog-log slopes: euler {e_slope:.3f} (first order), ab2 {a_slope:.3f} (second order)")

print("\nDormand-Prince 5(4) at decreasing tolerances:")
for tol in (1e-4, 1e-6, 1e-8, 1e-10):
    r = rk45_solve(AffineField([[1.0]]), [1.0], cfg=Rk45Config(atol=tol, rtol=tol))
    print(
        f"  tol = {tol:7.0e}: error = {abs(r.endpoint[0] - EXACT):9.3e}  "
        f"accepted steps = {r.steps_taken}  NFE = {r.nfe}"
    )

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(__file__).parent / "out"
    out.mkdir(exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(ns, [r[1] for r in rows], "o-", label=f"euler (slope {e_slope:.2f})")
    ax.loglog(ns, [r[2] for r in rows], "s-", label=f"ab2 (slope {a_slope:.2f})")
    ax.set_xlabel("steps N")
    ax.set_ylabel("endpoint error")
    ax.legend()
    ax.set_title("global error orders on v = x")
    fig.tight_layout()
    fig.savefig(out / "convergence.png", dpi=120)
    print(f"\nwrote {out / 'convergence.png'}")
except ImportError:
    print("\nmatplotlib not available; skipped the plot")

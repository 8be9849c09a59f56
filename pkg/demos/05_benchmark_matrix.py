"""A full solver-by-field benchmark matrix, assembled in code.

Every solver integrates from the same start states per field, so the cells
are directly comparable. The adaptive solver collapses to 2 evaluations on
straight fields and spends its budget only where the probe sees curvature.
"""

from pathlib import Path

from flowprobe import ExperimentConfig, emit_reports, mixed_corpus, run_matrix

config = ExperimentConfig(
    corpus=mixed_corpus(12, seed=5),
    solvers=[
        {"name": "euler", "n": 50},
        {"name": "euler", "n": 10},
        {"name": "ab2", "n": 10},
        {"name": "adaptive"},
    ],
    runs=10,
    seed=5,
    timing_repeats=1,
)

bundle = run_matrix(config)

# aggregate each solver over all fields of a flavor
totals = {}
for cell in bundle.cells:
    flavor = cell["field"].split("-")[0]
    agg = cell["aggregate"]
    bucket = totals.setdefault((cell["solver"], flavor), [])
    bucket.append((agg["mean_steps"], agg["mean_nfe"], agg["mean_error"]))

print(f"{'solver':>24s} {'flavor':>10s} {'steps':>7s} {'nfe':>7s} {'mean error':>12s}")
for (solver, flavor), rows in sorted(totals.items()):
    steps = sum(r[0] for r in rows) / len(rows)
    nfe = sum(r[1] for r in rows) / len(rows)
    err = sum(r[2] for r in rows) / len(rows)
    print(f"{solver:>24s} {flavor:>10s} {steps:7.2f} {nfe:7.2f} {err:12.3e}")

paths = emit_reports(bundle, ("csv", "json"), Path(__file__).parent / "out" / "matrix")
print()
for p in paths:
    print(f"wrote {p}")

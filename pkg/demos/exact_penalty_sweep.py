"""How the trim constraint switches on as gamma crosses the threshold.

For a few seeded instances with three planted nonzeros and trim level
K = 1, solve at multiples of the certified threshold and print the
support size next to K.
Below the threshold the penalty may leave extra nonzeros; above it every
converged, probe-passing point has at most K of them.

    python demos/exact_penalty_sweep.py [family]
"""

import sys

from tlx import ExperimentConfig, run_experiment

family = sys.argv[1] if len(sys.argv) > 1 else "sparse_ols"
grid = (0.01, 0.05, 0.2, 0.5, 1.001, 2.0)
rows = run_experiment(ExperimentConfig(family, seeds=(0, 1, 2), gamma_grid=grid, dims={"K": 1}))

print(f"{family}: support size per block (K in brackets)")
print("seed  " + "  ".join(f"{m:>7g}" for m in grid))
for seed in (0, 1, 2):
    cells = []
    for m in grid:
        mine = [r for r in rows if r.seed == seed and r.gamma_multiplier == m]
        cells.append("/".join(f"{r.final_cardinality_or_rank}[{r.K}]" for r in mine))
    print(f"{seed:>4}  " + "  ".join(f"{c:>7}" for c in cells))

bad = [r for r in rows if not r.headline_ok]
print(f"violations above the threshold: {len(bad)}")

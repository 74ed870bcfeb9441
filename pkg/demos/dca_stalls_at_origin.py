"""DCA can sit at a critical point that proximal gradient leaves at once.

With A = I, b = (3, 1), K = 1 and gamma = 3.2 the DCA subproblem at the
origin linearizes the largest-K norm to zero, so its l1 threshold of
gamma exceeds every gradient entry and the iterate never moves.  The
prox of the trimmed penalty keeps the largest entry unpenalized, so PGM
reaches (3, 0) in one step.
"""

import numpy as np

from tlx import SolverConfig, dstationarity_residual, make_problem, solve_dca, solve_pgm

P = make_problem("sparse_ols", K=1, A=np.eye(2), b=np.array([3.0, 1.0]))
gamma = 3.2

dca = solve_dca(P, gamma, SolverConfig("dca", min_iter=100, max_iter=100))
pgm = solve_pgm(P, gamma)

print(f"DCA after {dca.iterations} iterations: x = {dca.final_point}, "
      f"support changes = {dca.extras['support_changes']}, objective = {dca.objective:.4f}")
print(f"PGM after {pgm.iterations} iterations: x = {pgm.final_point}, objective = {pgm.objective:.4f}")

for name, x in (("origin", dca.final_point), ("PGM point", pgm.final_point)):
    v = dstationarity_residual(P, gamma, x)
    print(f"min directional derivative at the {name}: {v.residual:+.4f} along {v.worst_provenance}")

"""How the classical solvers behave on random coefficient matrices.

Run with ``python demos/solver_landscape.py``.
"""

import math

import numpy as np

from pdqubo import QuboProblem, SolverConfig, solve
from pdqubo.solvers import sample_stability, solve_exhaustive

rng = np.random.default_rng(0)


def random_q(n):
    a = rng.normal(scale=0.01, size=(n, n))
    return np.triu(a) + np.triu(a, 1).T


# %% On small problems every solver can be checked against enumeration
q = random_q(12)
exact = solve_exhaustive(QuboProblem(q, k=6))
print("exhaustive optimum: %.6f" % exact.best_energy)
for kind in ("sa", "tabu", "sgd"):
    res = solve(QuboProblem(q, k=6), SolverConfig(kind=kind, seed=0, num_samples=100))
    print("%-5s %.6f  %.3fs" % (kind, res.best_energy, res.wall_time))

# %% Drawing more samples can only lower the best energy found
q = random_q(40)
k = math.ceil(0.9 * 40)
reports = sample_stability(QuboProblem(q, k), SolverConfig(seed=0, cooling=0.5),
                           [1, 10, 100], repetitions=10)
for r in reports:
    print("best of %4d samples: mean %.5f  var %.2e" % (r.num_samples, r.mean, r.variance))

# %% Dropping the cardinality target can only lower the optimum
for n in (8, 12, 16):
    q = random_q(n)
    free = solve_exhaustive(QuboProblem(q)).best_energy
    fixed = solve_exhaustive(QuboProblem(q, math.ceil(0.9 * n))).best_energy
    print("n=%2d unconstrained %.5f <= constrained %.5f" % (n, free, fixed))

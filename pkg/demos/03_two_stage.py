"""The two-stage algorithm on two disjoint chains.

The strong chain is learned from a first batch of rows over every vertex;
the weak chain gets a second batch of its own.  The sample sizes come from
closed-form plans, and the same quantities drive the assumption report.
"""

import numpy as np

from activeggm import RowStream, algorithm4, algorithm5, metrics
from activeggm.model import rho_params
from activeggm.twostage import check_a5_a7, plan_alg4, plan_alg5, scaling_report, two_chain_model

model, split = two_chain_model(40, 20)
rho = rho_params(model, split, 1)
print("difficulty:", rho)

c2 = 64.0
print("plan without prior :", plan_alg4(40, rho, 1, c2, p1_hat=20))
print("plan given the split:", plan_alg5(20, rho, 1, c2, p1_hat=20))

for alg in (4, 5):
    draw = RowStream(model, np.random.default_rng(0)).reader()
    res = algorithm4(draw, rho, 1, c2, 40) if alg == 4 else algorithm5(draw, split, rho, 1, c2)
    print(f"algorithm {alg}: ED {metrics(res.graph, model.graph)[2]:.0f}, "
          f"|V1 estimate| {len(res.split.v1)}, scalars {res.ledger.scalar_count}")

print("\nsufficient conditions:")
for ineq in check_a5_a7(40, 20, 20, rho, 1, c2):
    print("  " + ineq.line())

# a much weaker cluster is where the active count drops below the passive one
rep = scaling_report(400, 20, 0.02, 0.3, 2)
print(f"\np=400, p1=20: passive/active scalar ratio {rep.ratio:.2f}, condition holds: {rep.advantage}")

"""Active and passive estimation on a chain with a weak segment.

Both estimators get the same scalar budget q = n * p and read the same
stream of rows.  The passive one spends it on n complete rows; the active
one spends half the remaining budget per round on the vertices it has not
settled yet.
"""

import numpy as np

from activeggm import ActiveState, EstimatorConfig, RowStream, algorithm1, generate, metrics
from activeggm.active import estimate

p, n = 30, 400
model = generate("chain", p=p, p1=6)
est = EstimatorConfig(l=10, tau_selection="shared", selection="oracle", truth=model.graph)

for seed in range(3):
    stream = RowStream(model, np.random.default_rng(seed))
    g_act, ledger = algorithm1(stream.reader(), ActiveState.initial(p), n * p, 5, 0.5, est,
                               rng=seed, p=p)
    g_pas, _ = estimate(stream.rows(0, n), range(p), p, 2, est, oracle=True)
    rounds = ", ".join(f"{len(vs)}x{m}" for vs, m in ledger.rounds)
    print(f"seed {seed}: active ED {metrics(g_act, model.graph)[2]:.0f} "
          f"(rounds |A| x rows: {rounds}), passive ED {metrics(g_pas, model.graph)[2]:.0f}")

"""Choosing the CIT threshold by extended BIC.

Sweeps a threshold grid, prints the edge count and score along the path,
and compares the EBIC pick with the graph closest to the truth.
"""

import numpy as np

from activeggm import generate, metrics, sample, select
from activeggm.modelsel import oracle_select

model = generate("hub", p=30, p1=10)
x = sample(model, 300, rng=np.random.default_rng(1))
path = select(x, kappa=2, tau_grid=np.geomspace(0.02, 0.6, 12))
for k, (tau, g, score) in enumerate(zip(path.taus, path.graphs, path.scores)):
    mark = "  <- EBIC" if k == path.chosen else ""
    print(f"tau {tau:.3f}  edges {g.n_edges:3d}  EBIC {score:10.1f}{mark}")
best = oracle_select(path, model.graph)
print("EBIC pick    TPR/FDR/ED:", metrics(path.graph, model.graph))
print("oracle pick  TPR/FDR/ED:", metrics(best, model.graph))

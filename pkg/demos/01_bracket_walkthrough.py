"""How one bracketing step settles part of a graph.

Six vertices, an upper graph H+ (every pair that might be an edge) and a
lower graph H- (pairs that are surely edges).  Triangulating H+ and looking
at its maximal cliques tells us where the two graphs agree; agreeing
cliques are settled and vertices covered only by them stop being measured.
"""

from activeggm import ActiveState, Graph, greedy_fill
from activeggm.active import Bracket, update_state

import numpy as np

h_plus = Graph.from_edges(6, [(0, 1), (0, 3), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (4, 5)])
h_minus = Graph.from_edges(6, [(0, 1), (1, 2), (2, 4), (4, 5)])

fill = greedy_fill(h_plus)
print("elimination order:", fill.ordering)
print("fill-in edges:", sorted(fill.fill.edges - h_plus.edges) or "none (H+ is chordal)")
for c in fill.cliques:
    pairs = [(a, b) for a in sorted(c) for b in sorted(c) if a < b]
    agree = all(h_plus.has_edge(a, b) == h_minus.has_edge(a, b) for a, b in pairs)
    print(f"  clique {sorted(c)}: {'agrees' if agree else 'uncertain'}")

state = update_state(ActiveState.initial(6), Bracket(h_plus, h_minus, np.zeros((6, 6))))
print("\nstill active:", sorted(state.active))
print("confirmed edges:", sorted(state.confirmed_edges))
print("confirmed non-edges:", sorted(state.confirmed_nonedges))
# vertex 5 hangs off the graph through a single sure edge, so it retires
# and is never measured again.

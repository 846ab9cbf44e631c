"""
Power networks as weighted graphs
=================================

Vertices are substations with an electricity surplus in [0, 1); a region is
self-sufficient when the surplus of its vertices, each measured against a
threshold k, does not add up to more than zero.
"""

import io

import numpy as np

from powerpart import CliquePairSpec, PartitionModel, evaluate_cqm, generate_clique_pair, generate_grid_network, load_network

# a network is read from two CSV files: substations and the lines between them
vertices = io.StringIO("id,lon,lat,surplus\na,7.0,50.0,0.2\nb,8.0,51.0,0.8\nc,8.5,50.5,0.1\n")
links = io.StringIO("id,v1,v2\nl1,a,b\nl2,b,c\n")
g = load_network(vertices, links)
print(g, g.ids, g.surplus)

# two ways to put it into two regions
model = PartitionModel(g, 2)
for labels in ([0, 0, 0], [0, 0, 1]):
    v = np.zeros((3, 2), dtype=int)
    v[np.arange(3), labels] = 1
    ev = evaluate_cqm(model, v)
    print(labels, "objective", ev.objective, "loads", ev.loads, "violations", ev.violations)

# synthetic instances: two cliques joined by one line, and a planar grid
pair = generate_clique_pair(CliquePairSpec(4, seed=1))
print(pair, "clique means", pair.surplus[:4].mean(), pair.surplus[4:].mean())

grid = generate_grid_network(120, seed=1)
print(grid, "mean degree", 2 * grid.num_edges / grid.num_vertices)

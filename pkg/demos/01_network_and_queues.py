"""Build the geographic load-balancing network and push traffic through it.

The scenario is a bipartite mapping layer: J mapping nodes receive user
requests and forward them over J*K links to K data centers, which drain work
through per-center service edges into a sink.  Queues live on the nodes;
flows live on the edges; the incidence matrix ties them together.
"""
import numpy as np

from netalloc import ScenarioConfig, build_geo_load_balancing
from netalloc.graph import load_network, queue_update, save_network
from netalloc.rng import stream

scenario = build_geo_load_balancing(ScenarioConfig(mapping_nodes=3, data_centers=2,
                                                   scenario_seed=7))
graph = scenario.graph
print(f"nodes: {graph.node_count}  edges: {graph.edge_count}")
print(f"first edges (1-based src -> dst, None = sink): {graph.edges[:4]} ...")
print(f"incidence column sums (should be 0 for mapping links, -1 for service "
      f"edges): {graph.incidence.sum(axis=0)}")

# one slot of state: prices, renewables, arrivals fold into a quadratic
# edge cost and a constant; capacities bound the flow box
gen = stream(7, 0, "state")
sample = scenario.sample_state(gen)
print(f"\narrivals this slot: {np.round(sample.arrivals, 2)}")
print(f"edge cost coefficients: {np.round(sample.edge_coeff, 3)}")

# route a third of each arrival down every link and watch the queues move
x = np.full(graph.edge_count, 10.0)
q = np.zeros(graph.node_count)
for slot in range(3):
    q = queue_update(q, x, sample.arrivals, graph)
    print(f"after slot {slot + 1}: total queue {q.sum():9.2f}  per node {np.round(q, 2)}")

# the network and its flow box round-trip through a plain text file
save_network(graph, scenario.box, "/tmp/demo_network.txt")
again, box_again = load_network("/tmp/demo_network.txt")
print(f"\nsaved and reloaded network: exact match = "
      f"{again.edges == graph.edges and np.array_equal(box_again.upper, scenario.box.upper)}")

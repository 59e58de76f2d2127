"""The per-slot Lagrangian minimizer, two ways.

Every controller in this package reduces to the same inner step: given node
multipliers lam, allocate flow x minimizing  cost(x; s) + lam . (A x + c(s))
over the flow box.  The cost is separable and quadratic per edge, so the
minimizer is a one-line clamp; a projected-gradient solve is kept alongside
as an independent check.
"""
import numpy as np

from netalloc import ScenarioConfig, build_geo_load_balancing
from netalloc.lagrangian import (dual_value, gradient_bound, minimize_lagrangian,
                                 stochastic_dual_gradient)
from netalloc.rng import stream

scenario = build_geo_load_balancing(ScenarioConfig(mapping_nodes=2, data_centers=2,
                                                   scenario_seed=3))
gen = stream(3, 0, "state")
sample = scenario.sample_state(gen)

lam = np.array([40.0, 35.0, 60.0, 55.0])
x_closed = minimize_lagrangian(lam, sample, scenario.graph, scenario.box)
x_iter = minimize_lagrangian(lam, sample, scenario.graph, scenario.box,
                             method="projected_gradient")
print(f"closed form:        {np.round(x_closed, 6)}")
print(f"projected gradient: {np.round(x_iter, 6)}")
print(f"max deviation: {np.abs(x_closed - x_iter).max():.2e}")

# the slot dual D_t(lam) is concave; its gradient is the queue drift A x + c
print("\nlam scale sweep (dual value is concave in lam):")
for scale in (0.25, 0.5, 1.0, 2.0, 4.0):
    d = dual_value(scale * lam, sample, scenario.graph, scenario.box)
    g = stochastic_dual_gradient(scale * lam, sample, scenario.graph, scenario.box)
    print(f"  scale {scale:4.2f}: D_t = {d:12.2f}   ||drift|| = {np.linalg.norm(g):8.3f}")

m = gradient_bound(scenario.graph, scenario.box, scenario.arrival_upper)
print(f"\nworst-case drift norm over the box (used by scaled step rules): {m:.2f}")

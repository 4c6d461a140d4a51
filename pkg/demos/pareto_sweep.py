"""
Threshold sweep and the energy / worst-group TPR frontier
=========================================================
"""

import literoute as lr
from literoute.sweep import pareto_front

cfg = lr.RunConfig.from_dict({
    "dataset": {"synth": {"seed": 1, "n_samples": 1500, "subgroup_lite_noise": [2.0, 1.0, 1.0]}},
    "seed": 1,
})

grid = {"tau_H": [0.2, 0.4, 0.6, 0.8, 1.0], "tau_Delta": [0.5, 0.8], "tau_risk": [0.6, 2.0]}

# heads and risk models are fitted once; each cell only re-applies the gate
points = lr.grid_sweep(cfg, grid)
front = pareto_front(points)

print(f"{len(points)} cells, {len(front)} on the frontier\n")
print(f"{'tau_H':>6s} {'tau_D':>6s} {'tau_r':>6s} {'J/sample':>9s} {'WG-TPR':>7s} {'routed':>7s}")
for p in front:
    c = p.config
    print(f"{c.tau_H:6.1f} {c.tau_Delta:6.1f} {c.tau_risk:6.1f} {p.energy:9.3f} {p.wg_tpr:7.3f} {p.routing_pct:7.1%}")

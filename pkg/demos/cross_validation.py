"""
Cross-validated comparison of the three arms
============================================

Lite only, heavy only, and routed inference on a synthetic cohort in which
one subgroup is badly served by the lite encoder.
"""

import literoute as lr

spec = {"seed": 0, "n_samples": 2000, "subgroup_lite_noise": [2.0, 1.0, 1.0]}
cfg = lr.RunConfig.from_dict({
    "dataset": {"synth": spec},
    "routing": {"tau_H": 0.5, "tau_Delta": 0.6, "tau_risk": 0.6},
    "k": 5,
    "seed": 0,
})

report = lr.run_cv(cfg, write=False)

print(f"{'arm':8s} {'macroF1':>8s} {'WG-TPR':>7s} {'gap':>6s} {'J/sample':>9s} {'routed':>7s}")
for arm in ("lite", "heavy", "routed"):
    r = report.row(arm, "pooled")
    routed = "-" if arm == "heavy" else f"{r['routing_pct']:.1%}"
    print(f"{arm:8s} {r['macro_f1']:8.3f} {r['tpr_worst']:7.3f} {r['tpr_gap']:6.3f} {r['energy_j']:9.3f} {routed:>7s}")

routed = report.row("routed", "pooled")
print(f"\nworst-group TPR change vs lite: {routed['d_wg_tpr_vs_lite']:+.3f}")
print(f"TPR gap reduction vs lite:      {routed['d_gap_vs_lite']:+.3f}")

# per-subgroup detail for the routed arm
print(routed["_fairness"].tpr)

# fold-level spread
m, s = report.row("routed", "mean"), report.row("routed", "std")
print(f"routing rate over folds: {m['routing_pct']:.3f} +/- {s['routing_pct']:.3f}")

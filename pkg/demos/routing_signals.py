"""
Routing signals on a single prediction
======================================

How the gate reads one lite-pathway class distribution.
"""

import numpy as np

import literoute as lr

taxonomy = lr.ham10000_taxonomy()
print(taxonomy.class_names)

# a confident benign call: mass concentrated on nv
confident = [0.01, 0.01, 0.03, 0.01, 0.02, 0.90, 0.02]
# an undecided one: mel and nv split the mass
torn = [0.02, 0.03, 0.05, 0.02, 0.40, 0.45, 0.03]

for name, p in [("confident", confident), ("torn", torn)]:
    p_safe, p_danger, delta = lr.safe_danger_gap(p, taxonomy)
    print(f"{name:10s} H={lr.entropy(p):.3f} nats  H~={lr.norm_entropy(p):.3f}  "
          f"P_S={p_safe:.2f} P_D={p_danger:.2f}  A={lr.ambiguity(delta):.3f}")

# a risk model calibrated on a toy training fold
# face lesions are malignant more often than back lesions
train = [lr.Sample(f"t{i}", taxonomy.index("mel" if i % 4 == 0 or i % 10 == 3 else "nv"), 25.0 + 2 * i,
                   ["face", "back"][i % 2])
         for i in range(30)]
risk = lr.calibrate(train, taxonomy)
print("malignancy rate per site:", risk.mal_rate)

patient = lr.Sample("p1", taxonomy.index("nv"), 40.0, "back")
print("tabular risk:", round(lr.tab_risk(patient, risk), 3))

# trigger mode: any one signal over its threshold escalates
cfg = lr.RoutingConfig(tau_H=0.5, tau_Delta=0.6, tau_risk=0.6)
for name, p in [("confident", confident), ("torn", torn)]:
    d = lr.route_sample(patient, p, risk, cfg, taxonomy)
    print(f"{name:10s} gate={d.gate} reasons={d.reasons}")

# score mode folds entropy and ambiguity into one number
score_cfg = lr.RoutingConfig(gate_mode="score", lambda_H=0.5, lambda_Delta=0.5, tau_r=0.5, tau_risk=0.9)
d = lr.route_sample(patient, np.array(torn), risk, score_cfg, taxonomy)
print(f"score={d.score:.3f} gate={d.gate}")

# an older face patient trips the metadata override even on a confident call
elder = lr.Sample("p2", taxonomy.index("nv"), 80.0, "face")
d = lr.route_sample(elder, confident, risk, cfg, taxonomy)
print(f"elder: tabular risk {d.tab_risk:.3f}, gate={d.gate}, reasons={d.reasons}")

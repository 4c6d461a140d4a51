"""
Energy of lite-first routing
============================

Expected per-sample energy for a few encoder pairs as the routing rate grows.
"""

import json

import numpy as np

import literoute as lr
from literoute.data import path

profiles = {p["encoder_id"]: lr.EncoderProfile.from_dict(p)
            for p in json.loads(path("backbone_profiles.json").read_text())}
for p in profiles.values():
    print(f"{p.encoder_id:18s} {p.tier:6s} {p.energy_per_sample:7.3f} J")

pairs = [("MobileNetV2", "ResNet50"), ("MobileNetV3Small", "DenseNet201"), ("MobileNetV3Small", "EfficientNetB6")]

# every sample pays for the lite encoder; escalated ones pay for both
for lite, heavy in pairs:
    el, eh = profiles[lite].energy_per_sample, profiles[heavy].energy_per_sample
    r_star = lr.breakeven_rate(el, eh)
    print(f"\n{lite} -> {heavy}: break-even routing rate {r_star:.1%}")
    for r in np.linspace(0.0, 1.0, 6):
        rep = lr.energy.account_rate(r, el, eh)
        print(f"  r={r:4.0%}  e={rep.e_routed:6.3f} J  saving vs heavy {rep.savings_vs_heavy:+7.1%}")

# the small contrast pair loses its advantage quickly; the large one almost never does

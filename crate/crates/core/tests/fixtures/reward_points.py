"""Regenerates reward_points.json: closed-form reward values with the
arithmetic spelled out, computed with Python's math module.

Run from this directory: python3 reward_points.py
"""
import json
import math


def press(d):
    a, b = 1000 * d * d, 30 * d * d
    v = 0.8 * math.exp(-a) + 0.2 * math.exp(-b)
    return v, f"0.8*exp(-1000*{d}^2) + 0.2*exp(-30*{d}^2) = 0.8*exp(-{a:.10g}) + 0.2*exp(-{b:.10g})"


def open_(d):
    r = d / 0.007
    v = min(r * r, 1.0)
    return v, f"min(({d}/0.007)^2, 1) = min({r * r:.10g}, 1)"


def mute(d):
    o, _ = open_(d)
    return 0.9 + 0.1 * o, f"0.9 + 0.1*open({d}) = 0.9 + 0.1*{o:.10g}"


def energy(wrist, tips):
    s = wrist + 0.1 * sum(tips)
    return math.exp(-s * s), f"exp(-({wrist} + 0.1*{sum(tips):.10g})^2) = exp(-{s * s:.10g})"


def pick_distance(d):
    a, b = 10000 * d * d, 2000 * d * d
    v = 0.175 * math.exp(-a) + 0.025 * math.exp(-b)
    return v, f"0.175*exp(-10000*{d}^2) + 0.025*exp(-2000*{d}^2) = 0.175*exp(-{a:.10g}) + 0.025*exp(-{b:.10g})"


def no_pick(d_top, d_bottom):
    t, _ = pick_distance(d_top)
    b, _ = pick_distance(d_bottom)
    return 0.2 + 2 * min(t, b), f"0.2 + 2*min(r_d({d_top}), r_d({d_bottom})) = 0.2 + 2*min({t:.10g}, {b:.10g})"


def pick_energy(v, a):
    v2 = sum(x * x for x in v)
    an = math.sqrt(sum(x * x for x in a))
    val = math.exp(-20 * v2) - 14 * (0.05 * an) ** 4
    return val, f"exp(-20*|v|^2) - 14*(0.05*|a|)^4 with |v|^2 = {v2:.10g}, |a| = {an:.10g}"


distances = [0.0, 0.0005, 0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.0065, 0.007,
             0.0075, 0.008, 0.01, 0.0125, 0.015, 0.02, 0.025, 0.03, 0.05, 0.1, 0.2, 0.45]
wrists = [0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0]
tip_sets = [[0.0] * 5, [0.1, 0.2, 0.0, 0.05, 0.3]]
pairs = [(a, b) for a in [0.0, 0.002, 0.005, 0.01, 0.02] for b in [0.0, 0.004, 0.008, 0.03]]
vels = [[0, 0, 0], [0.1, 0, 0], [0, 0.2, 0], [0, 0, -0.3], [0.1, 0.1, 0.1], [0.5, 0, 0], [-0.2, 0.3, 0.05]]
accs = [[0, 0, 0], [10, 0, 0], [0, -20, 5]]

out = {"press": [], "open": [], "mute": [], "energy": [], "pick_distance": [], "no_pick": [], "pick_energy": []}
for d in distances:
    for key, f in [("press", press), ("open", open_), ("mute", mute), ("pick_distance", pick_distance)]:
        v, why = f(d)
        out[key].append({"d": d, "expected": v, "derivation": why})
for w in wrists:
    for tips in tip_sets:
        v, why = energy(w, tips)
        out["energy"].append({"wrist": w, "tips": tips, "expected": v, "derivation": why})
for a, b in pairs:
    v, why = no_pick(a, b)
    out["no_pick"].append({"d_top": a, "d_bottom": b, "expected": v, "derivation": why})
for vel in vels:
    for acc in accs:
        v, why = pick_energy(vel, acc)
        out["pick_energy"].append({"velocity": vel, "acceleration": acc, "expected": v, "derivation": why})

with open("reward_points.json", "w") as f:
    json.dump(out, f, indent=1)
    f.write("\n")

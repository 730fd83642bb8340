"""Hand fixtures for the seven attention filters, evaluated directly."""

import math

# Proportional: dwell a1=30, a2=70.
print("proportional:", {"a1": 30 / 70, "a2": 1.0})

# Inverse: v_resp = [0.8, 0.1]; participant p dwelled a1 (alpha) 20 s.
# Cohort (short window): p a1 20, q a1 10, q a2 30 (alpha), q b1 50 (beta).
alpha_total = 20 + 10 + 30
share = {"a1": 30 / alpha_total, "a2": 30 / alpha_total, "b1": 1.0}
raw = {"a1": 0.0, "a2": 0.8 * share["a2"], "b1": 0.0}
print("inverse raw:", raw)

# Differential: baseline mean [0.5, 0.5], std [0.1, 0.1].
# Current: a1 60, a2 20 (alpha), b1 20 (beta).
total = 100
z = [abs(80 / total - 0.5) / 0.1, abs(20 / total - 0.5) / 0.1]
raw = {"a1": z[0] * 60 / 80, "a2": z[0] * 20 / 80, "b1": z[1] * 1.0}
m = max(raw.values())
print("differential z:", z, "scores:", {k: v / m for k, v in raw.items()})

# Sequential: transition [[0.9, 0.1], [0.5, 0.5]]; path a1(alpha) b1 b2(beta) a2(alpha).
T = [[0.9, 0.1], [0.5, 0.5]]
raw = {"b1": -math.log(T[0][1]), "b2": -math.log(T[1][1]), "a2": -math.log(T[1][0]), "a1": 0.0}
m = max(raw.values())
print("sequential raw:", raw, "scores:", {k: v / m for k, v in raw.items()})

# Collective: three participants, lambda_out = 0.5.
dwell = {"p1": {"a": 10, "b": 30}, "p2": {"a": 20, "b": 20}, "p3": {"b": 50, "c": 25}}
arts = ["a", "b", "c"]
norm = []
for d in dwell.values():
    mx = max(d.values())
    norm.append({x: d.get(x, 0) / mx for x in arts})
raw = {}
for x in arts:
    mean = sum(n[x] for n in norm) / len(norm)
    out = max(abs(n[x] - mean) for n in norm)
    raw[x] = mean + 0.5 * out
m = max(raw.values())
print("collective raw:", {k: f"{v:.15f}" for k, v in raw.items()}, "scores:", {k: f"{v / m:.15f}" for k, v in raw.items()})

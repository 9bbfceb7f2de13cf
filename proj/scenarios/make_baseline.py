"""Regenerates baseline.yaml: a synthetic 31-ask curve totalling 1502.38 units.

Prices rise by a random 0.50..3.00 step from 12.00; quantities are random
weights in 20..80 rescaled to the target total, with the rounding remainder
added to the last ask.
"""
import random

TARGET = 150238  # hundredths
N_ASKS = 31

rng = random.Random(20231117)
price = 1200
asks = []
for m in range(N_ASKS):
    if m:
        price += rng.randint(50, 300)
    asks.append([price, rng.randint(20, 80)])
weight = sum(q for _, q in asks)
for a in asks:
    a[1] = a[1] * TARGET // weight
asks[-1][1] += TARGET - sum(q for _, q in asks)
assert asks[-1][1] > 0 and sum(q for _, q in asks) == TARGET


def dec(x):
    return f"{x // 100}.{x % 100:02d}"


lines = [
    "# Three buyers over a 24-round PDA. The ask curve is synthetic (see",
    "# make_baseline.py); only its size and total supply are fixed.",
    "id: baseline",
    "horizon: 24",
    "start_round: 1",
    "k: 0.5",
    "p_max: 100.00",
    "psi: 200.00",
    "beta: 1.99",
    "seed: 7",
    "requirements: [232.18, 164.60, 90.70]",
    "policies: [mpne, mpne, mpne]",
    "asks:",
]
lines += [f"  - [{dec(p)}, {dec(q)}]" for p, q in asks]
with open("baseline.yaml", "w") as f:
    f.write("\n".join(lines) + "\n")

"""
How close to uniform is a hashed key?
=====================================

A terminal holds a bit string correlated with an observer's view and
compresses it with a randomly chosen universal hash.  We measure how far the
hash output is from a uniform key that is independent of the observer.
"""

from __future__ import annotations

import math

import numpy as np

from multikey.hashing import HashFamily, collision_audit
from multikey.info_measures import JointPmf, cond_renyi_entropy, product, uniform
from multikey.output_statistics import (
    HashSystem,
    binary_symmetric_source,
    exact_ensemble_expectation,
    kl_decomposition,
    monte_carlo_expectation,
    secrecy_exponent,
)

###############################################################################
# Universal families
# ------------------
# A family is universal when two distinct inputs collide with probability at
# most epsilon / N.  The audit enumerates small families exactly.
for kind in ("fully_random_table", "toeplitz_gf2", "modular_multiply"):
    res = collision_audit(HashFamily(kind, 8, 2))
    print(f"{kind:20s} worst collision {float(res.max_collision):.3f}  passed={res.passed}")

###############################################################################
# The smallest interesting case
# -----------------------------
# One uniform bit, an observer who learns nothing, and all four functions from
# one bit to one bit.  Two of them are bijections and two are constant.
source = product(uniform(["A"], [2]), uniform(["E"], [2]))
lhs, rhs, slack = exact_ensemble_expectation(source, HashSystem([HashFamily("fully_random_table", 2, 2)]), 1.0)
print(f"\nE[exp(s C)] = {lhs:.3f}, bound = {rhs:.3f}, slack = {slack:.3f}")

###############################################################################
# Where does the leakage come from?
# ---------------------------------
# For a fixed hash the divergence splits into non-uniformity of the key and
# dependence on the observer.
noisy = binary_symmetric_source(0.1)
print("\nfixed-hash view of a noisy bit (identity hash):")
for name, value in kl_decomposition(JointPmf(["M1", "E"], noisy.probs)).decomposition:
    print(f"  {name:12s} {value:.4f} nats")

###############################################################################
# Decay with block length
# -----------------------
# Compress n noisy bits to a key at a rate below the collision entropy.  The
# averaged divergence falls roughly exponentially and the exponent bound gives
# a floor on the decay rate.
crossover = 0.178
source = binary_symmetric_source(crossover)
h2 = cond_renyi_entropy(source, "A", "E", 1.0)
rate = 0.5 * h2
print(f"\nH_2(A|E) = {h2:.4f} nats, key rate {rate:.4f}")
ns, logs = [], []
for n in range(4, 15, 2):
    m = max(int(math.floor(n * rate / math.log(2) + 1e-9)), 1)
    system = HashSystem([HashFamily("toeplitz_gf2", 2**n, 2**m)], n)
    est = monte_carlo_expectation(source, system, 0.0, 2000, master_seed=1)
    ns.append(n)
    logs.append(math.log(est.mean))
    print(f"  n={n:2d}  key bits={m}  E[C] = {est.mean:.4f} +/- {est.stderr:.4f}")
slope = np.polyfit(ns, logs, 1)[0]
print(f"fitted slope {slope:.3f}; exponent bound {secrecy_exponent(source, [rate]):.3f}")

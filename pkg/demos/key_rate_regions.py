"""
Key-rate regions by variable elimination
========================================

The scheme's conditions couple the key rates (R1, R2) with the public message
rates (Rt1, Rt2, Rt3).  Eliminating the message rates leaves a region over key
rates alone.  We also evaluate the Gaussian regions directly.
"""

from __future__ import annotations

from fractions import Fraction

from multikey.info_measures import GaussianModel
from multikey.quantization import standard_model
from multikey.regions import (
    achievable_system,
    closed_form_key_region,
    is_capacity,
    project_to_keys,
    region_cellular,
    region_mp,
    vertices_2d,
)

###############################################################################
# A symbolic instance
# -------------------
# Every conditional entropy of the binned sequences is 2 nats and each key
# terminal has 5 nats of uncertainty left for the other observers.  Exact
# rational arithmetic keeps the constants readable.
oracle = {
    "H(B1|A2,A3)": Fraction(5), "H(B2|A1,A3)": Fraction(5),
    "H(B1|B0,B2,B3)": Fraction(1), "H(B2|B0,B1,B3)": Fraction(1), "H(B3|B0,B1,B2)": Fraction(1),
    "H(B1,B2|B0,B3)": Fraction(2), "H(B1,B3|B0,B2)": Fraction(2), "H(B2,B3|B0,B1)": Fraction(2),
    "H(B1,B2,B3|B0)": Fraction(3),
}
delta = Fraction(1, 100)
system = achievable_system(oracle, delta)
print("conditions over", system.variables)
for line in system.describe():
    print("  ", line)

region = project_to_keys(system)
print("\nafter eliminating Rt3, Rt2, Rt1:")
for line in region.describe():
    print("  ", line)

###############################################################################
# The elimination is exact, so the sum row carries 3 delta.  Asking for one
# more delta of margin gives a slightly smaller region.
conservative = closed_form_key_region(oracle, delta, sum_margin=4)
print("with a 4 delta sum margin:", conservative.describe()[-1])

###############################################################################
# Gaussian regions
# ----------------
# For the standard test source the helper separates the key holders, so the
# helper region is the capacity region.
model = standard_model()
mp = region_mp(model)
print("\nhelper region (capacity:", is_capacity(model), ")")
for line in mp.describe():
    print("  ", line)
print("   corners:", [tuple(round(v, 4) for v in p) for p in vertices_2d(mp)])

###############################################################################
# Add a fourth terminal and compare the cellular inner and outer bounds for
# the key holders {1, 2}.
cov = [[2.0, 0.8, 0.8, 0.6, 0.5],
       [0.8, 1.0, 0.3, 0.5, 0.2],
       [0.8, 0.3, 1.0, 0.5, 0.2],
       [0.6, 0.5, 0.5, 1.0, 0.1],
       [0.5, 0.2, 0.2, 0.1, 1.0]]
cell = GaussianModel([f"A{i}" for i in range(5)], cov)
for side in ("inner", "outer"):
    reg = region_cellular(cell, [1, 2], side)
    print(f"\n{side} bound")
    for line in reg.describe():
        print("  ", line)

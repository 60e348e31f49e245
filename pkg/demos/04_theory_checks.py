"""Numerical verification of the perception/decision separation theory.

Three stories:

1. The counterexample risk table.  On the two-bit world, deciding from the
   full input or from the causal bit is lossless; deciding from the
   group-invariant bit costs half the probability mass (one full bit of
   conditional entropy).

2. Flatness of the Bayes risk along perception updates.  For encoders that
   factor through the orbit statistic with an injective link, nothing a
   perception update can do (while staying injective) moves the Bayes risk.

3. The two ways it breaks: enforce invariance to a transform the label
   depends on, or move along a direction that merges distinct orbits.
   Both raise the Bayes risk materially, and the checks catch both.
"""

from pelab import (Rng, assumption_audit, make_bernoulli_uv_world,
                   make_rotation_world, risk_table, run_scenario)

# --- 1. the risk table -------------------------------------------------------
buv = make_bernoulli_uv_world()
table = risk_table(buv)
print("two-bit world risk table (exact):")
print("  zero-one:", table["zero_one"])
print("  log-loss (bits):", table["log_bits"])

# --- 2 & 3. orthogonality and its violations --------------------------------
print("\ntheory scenarios:")
for name in ("orthogonality_rotation", "over_invariance_bernoulli",
             "merged_orbits"):
    verdict, expected_pass, ok = run_scenario(name, seed=11)
    print(f"  {name}")
    print(f"    expected {'pass' if expected_pass else 'fail'}, "
          f"observed {'pass' if verdict.passed else 'fail'} "
          f"({'as predicted' if ok else 'MISMATCH'})")
    for key, value in verdict.measured.items():
        print(f"    {key} = {value}")

# --- assumption audit on both worlds -----------------------------------------
print("\nassumption audit:")
for world in (make_rotation_world(), buv):
    print(f"  {world.name} (declares label invariance = {world.a1_invariant})")
    for v in assumption_audit(world, Rng(3)):
        print(f"    {v.name:26s} passed={v.passed} measured={v.measured}")

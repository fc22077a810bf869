"""How the cost parameter reshapes triplet sampling.

Builds a tiny catalog with a 9:1 majority/minority imbalance, then shows:
  * the probability pair assigned to the two groups for a few costs,
  * the induced per-item weights,
  * the empirical group composition of sampled negatives versus the exact
    weight law n_g * w_g / sum_h n_h * w_h.

Run: python demos/01_sampling_laws.py
"""

import numpy as np

from fairbpr import (
    Catalog,
    Interaction,
    SamplerConfig,
    build_item_weights,
    group_probability_vector,
    sample_and_audit,
    temporal_split,
)

# ---------------------------------------------------------------------------
# the probability pair: emphasized group gets (C*100)/(C+1), the other 100/(C+1)
# ---------------------------------------------------------------------------
print("cost -> (emphasized %, other %)")
for cost in (1.0, 1.2, 2.0, 3.0, 5.0):
    p_emph, p_other = group_probability_vector(cost)
    print(f"  C={cost:<4g} -> ({p_emph:6.2f}, {p_other:6.2f})")

# ---------------------------------------------------------------------------
# a 90/10 catalog: items m000..m089 from the majority group, f00..f09 minority
# ---------------------------------------------------------------------------
groups = {f"m{k:03d}": "M" for k in range(90)}
groups.update({f"f{k:02d}": "F" for k in range(10)})
groups["seen"] = "M"
catalog = Catalog.from_groups(groups)

# one user interacted only with "seen"; a second user owns everything, so it
# is never sampled and the first user's negatives range over the 100 items
rows = [Interaction("alice", "seen", 5.0, 0)]
rows += [Interaction("omniscient", item, 5.0, t) for t, item in enumerate(sorted(groups), 1)]
split = temporal_split(rows, 0.0, 0.0)

cfg = SamplerConfig(cost=2.0, target_slot="negative", emphasized_group="M", seed=0)
weights = build_item_weights(set(groups), catalog, cfg)
print("\nper-item weights at C=2 (two groups -> percentage pair):")
print(f"  majority item weight: {weights.weights['m000']:.3f}")
print(f"  minority item weight: {weights.weights['f00']:.3f}")

# ---------------------------------------------------------------------------
# empirical negative-slot composition versus the exact law
# ---------------------------------------------------------------------------
print("\nnegative-slot majority share, 100k draws per cost:")
print(f"  {'C':>4}  {'empirical':>10}  {'analytic':>9}")
for cost in (1.0, 2.0, 3.0, 5.0):
    cfg = SamplerConfig(cost=cost, target_slot="negative",
                        emphasized_group="M", seed=7)
    record = sample_and_audit(split, cfg, catalog, 100_000)
    analytic = 90 * cost / (90 * cost + 10 * 1.0)
    got = record["negative_share"]["M"]
    print(f"  {cost:>4g}  {got:>10.4f}  {analytic:>9.4f}")

print("\nwith C=1 both groups are drawn uniformly; raising C starves the")
print("minority group out of the negative slot, which is what later lifts")
print("its exposure once a pairwise model trains on these triplets.")

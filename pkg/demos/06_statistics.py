"""Comparing prediction sets with the nonparametric battery.

Simulates per-case Dice scores from three hypothetical models and runs the
Friedman test followed by pairwise Wilcoxon signed-rank tests with
Bonferroni correction, the standard protocol for paired, non-Gaussian
segmentation scores.
"""

import numpy as np

from shoulderct import bonferroni, friedman_test, wilcoxon_signed_rank
from shoulderct.pipeline import compare_prediction_sets

g = np.random.default_rng(0)
base = 0.96 + 0.02 * g.beta(2, 2, size=24)       # 24 shared test cases
scores = {
    "model_a": (base + 0.010 + g.normal(0, 0.004, 24)).clip(0, 1).tolist(),
    "model_b": (base + g.normal(0, 0.004, 24)).clip(0, 1).tolist(),
    "model_c": (base - 0.002 + g.normal(0, 0.004, 24)).clip(0, 1).tolist(),
}

fr = friedman_test(list(scores.values()))
print(f"Friedman: chi2 {fr['statistic']:.2f}, p {fr['p']:.2e}")

names = list(scores)
raw = []
for i in range(3):
    for j in range(i + 1, 3):
        res = wilcoxon_signed_rank(scores[names[i]], scores[names[j]])
        raw.append(res["p"])
        print(f"{names[i]} vs {names[j]}: W {res['statistic']:.1f}, raw p {res['p']:.2e}")

print("Bonferroni-adjusted:", [f"{p:.2e}" for p in bonferroni(raw)])

# the pipeline wraps the same protocol in one call
summary = compare_prediction_sets(scores)
print("\ncompare_prediction_sets ->")
for pair in summary["pairwise"]:
    print(f"  {pair['a']} vs {pair['b']}: adjusted p {pair['p_adjusted']:.2e}")

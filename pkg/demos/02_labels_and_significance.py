"""Labeling a cohort from questionnaire scores and testing which raw
measures separate the groups."""
import numpy as np

from stressfusion.data_model import Scheme, label_three_class, label_two_class, three_class_bounds
from stressfusion.ingest import generate_cohort
from stressfusion.stats import raw_measures, significance_report

# %% the two labeling rules on a hand-made score list
scores = [8, 12, 15, 17, 18, 19, 21, 22, 22, 24, 26, 27, 30, 33]
mu, sd = np.mean(scores), np.std(scores)
lo, hi = three_class_bounds(mu, sd)
print(f"mean {mu:.2f}, sd {sd:.2f}: non-stressed <= {lo}, mildly stressed <= {hi}")
for s, two, three in zip(scores, label_two_class(scores), label_three_class(scores)):
    print(f"  score {s:>2}  {str(two):<12} {three}")

# %% significance of mean band powers and signal levels on a synthetic cohort
records = generate_cohort(40, seed=7, duration_seconds=60.0)
report = significance_report(raw_measures(records))
for scheme in Scheme:
    print(f"\nfive smallest p-values, {scheme.value}-class:")
    for row in report.for_scheme(scheme)[:5]:
        r = row.result
        print(f"  {row.measure:<22} stat {r.statistic:>8.3f}   p {r.p_value:.4g}"
              f"{'  *' if r.significant else ''}")

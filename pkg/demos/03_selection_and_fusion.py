"""Band selection, per-modality wrapper selection and late fusion.

Uses naive Bayes so the whole search finishes in seconds; swap in
``ClassifierSpec("mlp")`` for the default pipeline classifier.
"""
from stressfusion.classify import ClassifierSpec
from stressfusion.data_model import Scheme
from stressfusion.evaluate import loocv, metrics_text
from stressfusion.features import assemble_subject_features, build_dataset
from stressfusion.ingest import generate_cohort
from stressfusion.select import band_columns, band_selection, fuse_late

spec = ClassifierSpec("nb")
records = generate_cohort(40, seed=7, duration_seconds=60.0)
vectors = [assemble_subject_features(r) for r in records]

for scheme in Scheme:
    data = build_dataset(records, scheme, vectors=vectors)

    # %% which EEG bands carry the label?
    band = band_selection(data.modality("EEG"), spec)
    top = sorted(band.trace, key=lambda t: -t[2])[:3]
    print(f"\n{scheme.value}-class: best band subsets " +
          ", ".join(f"{c} {100 * a:.1f}%" for _, c, a in top))

    # %% greedy selection inside each modality, then concatenation
    parts = [(band_columns(data, band.chosen), spec), (data.modality("GSR"), spec),
             (data.modality("PPG"), spec)]
    fused, results = fuse_late(parts)
    for (ds, _), res in zip(parts, results):
        mod = ds.tags[0].modality
        print(f"  {mod}: {', '.join(res.chosen) or '(none)'}  -> {100 * res.objective:.1f}%")

    report = loocv(fused, spec)
    print(f"  fused {fused.n_features} features, leave-one-out:")
    print(report.confusion.to_text())
    print(metrics_text(report.metrics, report.confusion.class_names))

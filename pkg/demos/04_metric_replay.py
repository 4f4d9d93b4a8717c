"""Metrics recomputed from published confusion matrices."""
from stressfusion.evaluate import ConfusionMatrix, metrics, metrics_text

tables = {
    "two-class": ConfusionMatrix([[21, 1], [1, 17]], ("NonStressed", "Stressed")),
    "three-class": ConfusionMatrix([[10, 1, 1], [2, 15, 2], [1, 2, 6]],
                                   ("NonStressed", "MildlyStressed", "Stressed")),
}
for name, cm in tables.items():
    print(f"== {name}")
    print(cm.to_text())
    print(metrics_text(metrics(cm), cm.class_names))

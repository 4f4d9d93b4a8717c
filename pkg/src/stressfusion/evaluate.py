"""Leave-one-out cross-validation, confusion-matrix metrics and the
modality x classifier x scheme comparison grid."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import classify
from .classify import ClassifierSpec
from .data_model import LabeledDataset, Scheme, hstack
from .errors import ConfigError, StressFusionError, TrainingError
from .seeding import derive_seed

MODALITIES = ("EEG", "GSR", "PPG")
MODALITY_COMBOS = (("EEG",), ("GSR",), ("PPG",), ("EEG", "GSR"), ("EEG", "PPG"),
                   ("GSR", "PPG"), ("EEG", "GSR", "PPG"))


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = actual class, columns = predicted class."""

    counts: np.ndarray
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        c = np.array(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] == 0:
            raise ConfigError("confusion matrix must be square and non-empty")
        if np.any(c < 0) or not np.all(c == np.round(c)):
            raise ConfigError("confusion counts must be non-negative integers")
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        names = tuple(self.class_names) or tuple(f"class{i}" for i in range(c.shape[0]))
        if len(names) != c.shape[0]:
            raise ConfigError("one class name per row required")
        object.__setattr__(self, "class_names", names)

    @classmethod
    def from_predictions(cls, actual, predicted, n_classes: int, class_names=()) -> "ConfusionMatrix":
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (np.asarray(actual), np.asarray(predicted)), 1)
        return cls(counts, class_names)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_text(self) -> str:
        """Table laid out as rows of counts followed by the actual class."""
        width = max(5, *(len(n) for n in self.class_names))
        head = " ".join(f"{n:>{width}}" for n in self.class_names) + "   <- classified as"
        rows = [" ".join(f"{v:>{width}d}" for v in row) + f"   {name}"
                for row, name in zip(self.counts, self.class_names)]
        return "\n".join([head, *rows]) + "\n"


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    weighted_f: float
    macro_f: float
    kappa: float
    undefined_precision: tuple[bool, ...]
    undefined_recall: tuple[bool, ...]

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.__dict__.items()}


def metrics(confusion: ConfusionMatrix) -> Metrics:
    """Accuracy, per-class precision/recall/F1, weighted and macro F, Cohen's kappa.

    A zero denominator yields 0 for that rate and sets the matching
    ``undefined_*`` flag.
    """
    c = confusion.counts.astype(float)
    total = c.sum()
    if total <= 0:
        raise ConfigError("confusion matrix is empty")
    diag = np.diag(c)
    rows, cols = c.sum(axis=1), c.sum(axis=0)
    undef_p = cols == 0
    undef_r = rows == 0
    precision = np.where(undef_p, 0.0, diag / np.where(undef_p, 1.0, cols))
    recall = np.where(undef_r, 0.0, diag / np.where(undef_r, 1.0, rows))
    pr = precision + recall
    f1 = np.where(pr > 0, 2 * precision * recall / np.where(pr > 0, pr, 1.0), 0.0)
    accuracy = diag.sum() / total
    p_e = float(np.sum(rows * cols)) / total ** 2
    if p_e >= 1.0:
        kappa = 1.0 if accuracy == 1.0 else 0.0
    else:
        kappa = (accuracy - p_e) / (1.0 - p_e)
    return Metrics(float(accuracy), tuple(precision.tolist()), tuple(recall.tolist()), tuple(f1.tolist()),
                   float(np.sum(rows / total * f1)), float(f1.mean()), float(kappa),
                   tuple(undef_p.tolist()), tuple(undef_r.tolist()))


@dataclass
class EvaluationReport:
    confusion: ConfusionMatrix
    metrics: Metrics
    subject_ids: tuple[str, ...]
    actual: tuple[int, ...]
    predicted: tuple[int | None, ...]
    feature_names: tuple[str, ...] = ()
    failed_folds: dict = field(default_factory=dict)

    @property
    def accuracy(self) -> float:
        return self.metrics.accuracy

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.counts.tolist(),
            "classes": list(self.confusion.class_names),
            "metrics": self.metrics.to_dict(),
            "features": list(self.feature_names),
            "predictions": [{"subject": s, "actual": a, "predicted": p}
                            for s, a, p in zip(self.subject_ids, self.actual, self.predicted)],
            "failed_folds": {str(k): v for k, v in self.failed_folds.items()},
        }


# A custom predictor maps (X_train, y_train, X_test, n_classes, seed) -> labels.
Predictor = Callable[[np.ndarray, np.ndarray, np.ndarray, int, int], np.ndarray]


def _class_names(scheme: Scheme) -> tuple[str, ...]:
    return tuple(c.value for c in scheme.classes)


def loocv_batch(datasets: Sequence[LabeledDataset], spec, seeds: Sequence[int],
                threads: int = 1) -> list[EvaluationReport]:
    """Leave-one-out evaluation of several datasets with one classifier spec.

    Fold ``i`` of the run with seed ``s`` trains with seed ``derive_seed(s, i)``.
    All folds of all runs are trained together, which lets MLP folds share
    batched kernel calls; the reports equal separate :func:`loocv` calls.
    """
    jobs = []  # (run index, fold index, X_train, y_train, x_test, fold seed)
    failed = [dict() for _ in datasets]
    for r, (data, seed) in enumerate(zip(datasets, seeds)):
        n = data.n_subjects
        if n < 2 or np.unique(data.labels).size < 2:
            raise ConfigError("LOOCV needs at least two subjects and two classes")
        if data.n_features == 0:
            raise ConfigError("LOOCV needs at least one feature")
        for i in range(n):
            keep = np.arange(n) != i
            y_train = data.labels[keep]
            if np.unique(y_train).size < 2:
                failed[r][i] = "training fold contains a single class"
                continue
            jobs.append((r, i, data.features[keep], y_train, data.features[i:i + 1],
                         derive_seed(seed, i)))
    predictions = [dict() for _ in datasets]
    if isinstance(spec, ClassifierSpec):
        n_classes = datasets[0].scheme.n_classes
        models = classify.fit_many(spec, [j[2] for j in jobs], [j[3] for j in jobs], n_classes,
                                   [j[5] for j in jobs], threads=threads)
        for (r, i, _, _, x, _), m in zip(jobs, models):
            predictions[r][i] = int(classify.predict_indices(m, x)[0])
    else:
        for r, i, X, y, x, s in jobs:
            try:
                predictions[r][i] = int(np.asarray(spec(X, y, x, datasets[r].scheme.n_classes, s))[0])
            except TrainingError as exc:
                failed[r][i] = str(exc)
    reports = []
    for r, data in enumerate(datasets):
        done = sorted(predictions[r])
        if not done:
            raise TrainingError("every LOOCV fold failed")
        cm = ConfusionMatrix.from_predictions(data.labels[done], [predictions[r][i] for i in done],
                                              data.scheme.n_classes, _class_names(data.scheme))
        reports.append(EvaluationReport(
            cm, metrics(cm), data.subject_ids, tuple(int(v) for v in data.labels),
            tuple(predictions[r].get(i) for i in range(data.n_subjects)),
            data.feature_names, failed[r]))
    return reports


def loocv(dataset: LabeledDataset, spec, seed: int = 0, threads: int = 1) -> EvaluationReport:
    """Leave-one-subject-out evaluation.

    ``spec`` is a :class:`ClassifierSpec` or a custom predictor callable
    ``(X_train, y_train, X_test, n_classes, seed) -> labels``.
    """
    return loocv_batch([dataset], spec, [seed], threads)[0]


def majority_predictor(X_train, y_train, X_test, n_classes, seed):
    """Baseline predicting the most frequent training class (lowest index on ties)."""
    counts = np.bincount(y_train, minlength=n_classes)
    return np.full(len(X_test), int(np.argmax(counts)))


# -- modality sweep ----------------------------------------------------------

@dataclass
class SweepCell:
    modalities: tuple[str, ...]
    classifier: str
    scheme: Scheme
    report: EvaluationReport | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.report is None

    def row(self) -> dict:
        base = {"modalities": "+".join(self.modalities), "scheme": self.scheme.value,
                "classifier": self.classifier.upper()}
        if self.failed:
            return {**base, "status": "failed", "accuracy": "", "f_weighted": "", "f_macro": "",
                    "kappa": "", "n_features": "", "error": self.error}
        m = self.report.metrics
        return {**base, "status": "ok", "accuracy": m.accuracy, "f_weighted": m.weighted_f,
                "f_macro": m.macro_f, "kappa": m.kappa, "n_features": len(self.report.feature_names),
                "error": ""}


@dataclass
class SweepResult:
    cells: list[SweepCell]
    selections: dict = field(default_factory=dict)

    def cell(self, modalities, classifier, scheme) -> SweepCell:
        modalities = tuple(modalities)
        for c in self.cells:
            if c.modalities == modalities and c.classifier == classifier and c.scheme is scheme:
                return c
        raise KeyError((modalities, classifier, scheme))

    def to_text(self) -> str:
        lines = [f"{'Modalities':<12} {'Classes':<7} {'Classifier':<10} {'Acc (%)':>8} "
                 f"{'F_m':>6} {'K':>6} {'FVL':>4}"]
        for c in self.cells:
            r = c.row()
            if c.failed:
                lines.append(f"{r['modalities']:<12} {r['scheme']:<7} {r['classifier']:<10} "
                             f"{'failed':>8}  {c.error}")
            else:
                lines.append(f"{r['modalities']:<12} {r['scheme']:<7} {r['classifier']:<10} "
                             f"{100 * r['accuracy']:>8.2f} {r['f_weighted']:>6.2f} {r['kappa']:>6.2f} "
                             f"{r['n_features']:>4d}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        rows = [c.row() for c in self.cells]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def modality_sweep(per_modality: dict, specs: dict, schemes=(Scheme.TWO, Scheme.THREE),
                   seed: int = 0, combos=MODALITY_COMBOS, selector=None, threads: int = 1) -> SweepResult:
    """Evaluate every modality combination with every classifier and scheme.

    ``per_modality`` maps scheme -> {modality: dataset}. Features are chosen
    per modality by ``selector(dataset, spec, seed)`` (greedy wrapper by
    default) and the chosen columns are concatenated for each combination
    (late fusion). A failing cell is recorded and the sweep continues.
    """
    from .select import wrapper_select

    selector = selector or (lambda d, s, sd: wrapper_select(d, s, seed=sd, threads=threads))
    cells, selections = [], {}
    for scheme in schemes:
        for name, spec in specs.items():
            chosen = {}
            for mod in MODALITIES:
                key = (scheme.value, name, mod)
                try:
                    res = selector(per_modality[scheme][mod], spec, seed)
                    selections[key] = res
                    chosen[mod] = per_modality[scheme][mod].columns(res.chosen)
                except (StressFusionError, KeyError) as exc:
                    chosen[mod] = exc
            for combo in combos:
                cell = SweepCell(tuple(combo), name, scheme)
                try:
                    parts = []
                    for m in combo:
                        if isinstance(chosen[m], Exception):
                            raise chosen[m]
                        parts.append(chosen[m])
                    fused = hstack(parts)
                    if fused.n_features == 0:
                        raise ConfigError("no features selected for this combination")
                    cell.report = loocv(fused, spec, seed, threads)
                except (StressFusionError, KeyError) as exc:
                    cell.error = f"{type(exc).__name__}: {exc}"
                cells.append(cell)
    return SweepResult(cells, selections)


def write_report_json(path, report: EvaluationReport, extra=None) -> None:
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def metrics_text(m: Metrics, class_names: Sequence[str]) -> str:
    lines = [f"accuracy   {100 * m.accuracy:.2f}%",
             f"f_weighted {m.weighted_f:.4f}",
             f"f_macro    {m.macro_f:.4f}",
             f"kappa      {m.kappa:.4f}",
             f"{'class':<16} {'precision':>9} {'recall':>9} {'f1':>9}"]
    for i, name in enumerate(class_names):
        flag = " (precision undefined)" if m.undefined_precision[i] else ""
        flag += " (recall undefined)" if m.undefined_recall[i] else ""
        lines.append(f"{name:<16} {m.precision[i]:>9.4f} {m.recall[i]:>9.4f} {m.f1[i]:>9.4f}{flag}")
    return "\n".join(lines) + "\n"

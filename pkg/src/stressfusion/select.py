"""EEG band selection, greedy wrapper feature selection and feature fusion."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data_model import BANDS, Band, LabeledDataset, hstack
from .errors import ConfigError
from .evaluate import loocv_batch
from .seeding import derive_seed

FUSION_ORDER = ("EEG", "GSR", "PPG")


@dataclass(frozen=True)
class BandSubset:
    included: tuple[Band, ...]

    def __post_init__(self):
        bands = tuple(sorted(set(self.included), key=BANDS.index))
        if not bands:
            raise ConfigError("a band subset must be non-empty")
        object.__setattr__(self, "included", bands)

    def __str__(self):
        return "+".join(b.short for b in self.included)

    def __contains__(self, band) -> bool:
        return band in self.included


def all_band_subsets() -> list[BandSubset]:
    """The 31 non-empty subsets, ordered by size then by band frequency."""
    return [BandSubset(c) for k in range(1, len(BANDS) + 1) for c in itertools.combinations(BANDS, k)]


@dataclass
class SelectionResult:
    """Outcome of a search.

    ``chosen`` is a :class:`BandSubset` for band selection and a tuple of
    feature names for the wrapper. ``trace`` lists every evaluated
    candidate as ``(step, candidate, accuracy)``; ``path`` holds the
    objective after each accepted greedy step.
    """

    chosen: object
    objective: float
    trace: list = field(default_factory=list)
    path: list = field(default_factory=list)
    seeds: dict = field(default_factory=dict)

    @property
    def chosen_names(self) -> tuple[str, ...]:
        return tuple(self.chosen) if not isinstance(self.chosen, BandSubset) else ()

    def to_dict(self) -> dict:
        chosen = str(self.chosen) if isinstance(self.chosen, BandSubset) else list(self.chosen)
        return {
            "chosen": chosen,
            "objective": self.objective,
            "path": list(self.path),
            "candidates": [{"step": s, "candidate": str(c) if isinstance(c, BandSubset) else c,
                            "accuracy": a} for s, c, a in self.trace],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def band_columns(dataset: LabeledDataset, subset: BandSubset) -> LabeledDataset:
    names = {b.short for b in subset.included}
    return dataset.select(lambda t: t.modality == "EEG" and t.band in names)


def band_selection(dataset: LabeledDataset, spec, iterations: int = 1, seed: int = 0,
                   threads: int = 1) -> SelectionResult:
    """Pick the EEG band subset with the highest mean LOOCV accuracy.

    Candidate ``c`` in repetition ``r`` is evaluated with seed
    ``derive_seed(seed, c, r)``. Deterministic classifiers run once. Ties go
    to the candidate with fewer bands, then lower-frequency bands.
    """
    if iterations < 1:
        raise ConfigError("iterations must be >= 1")
    if dataset.n_subjects == 0:
        raise ConfigError("empty dataset")
    subsets = all_band_subsets()
    views = [band_columns(dataset, s) for s in subsets]
    for s, v in zip(subsets, views):
        if v.n_features == 0:
            raise ConfigError(f"dataset has no EEG features for bands {s}")
    reps = iterations if getattr(spec, "stochastic", True) else 1
    jobs = [(c, r) for c in range(len(subsets)) for r in range(reps)]
    seeds = [derive_seed(seed, c, r) for c, r in jobs]
    reports = loocv_batch([views[c] for c, _ in jobs], spec, seeds, threads)
    acc = np.zeros((len(subsets), reps))
    for (c, r), rep in zip(jobs, reports):
        acc[c, r] = rep.accuracy
    means = acc.mean(axis=1)
    best = int(np.argmax(means))  # first maximum follows the canonical tie-break order
    trace = [(0, s, float(m)) for s, m in zip(subsets, means)]
    return SelectionResult(subsets[best], float(means[best]), trace, [float(means[best])],
                           {str(subsets[best]): [derive_seed(seed, best, r) for r in range(reps)]})


def majority_rate(dataset: LabeledDataset) -> float:
    return float(np.bincount(dataset.labels).max() / dataset.n_subjects)


def wrapper_select(dataset: LabeledDataset, spec, seed: int = 0, threads: int = 1) -> SelectionResult:
    """Greedy forward selection scored by LOOCV accuracy.

    Starts from the empty set, whose score is the majority-class rate, and
    adds the best feature while accuracy strictly improves. Every
    evaluation uses ``seed``, so the objective equals ``loocv(chosen, seed)``.
    Ties are broken by column order.
    """
    if dataset.n_subjects == 0 or dataset.n_features == 0:
        raise ConfigError("wrapper selection needs a non-empty dataset with features")
    chosen: list[str] = []
    objective = majority_rate(dataset)
    path = [objective]
    trace = []
    remaining = list(dataset.feature_names)
    step = 0
    while remaining and objective < 1.0:
        step += 1
        views = [dataset.columns(chosen + [f]) for f in remaining]
        reports = loocv_batch(views, spec, [seed] * len(views), threads)
        scores = [r.accuracy for r in reports]
        trace.extend((step, f, a) for f, a in zip(remaining, scores))
        best = int(np.argmax(scores))
        if scores[best] <= objective:
            break
        chosen.append(remaining.pop(best))
        objective = scores[best]
        path.append(objective)
    return SelectionResult(tuple(chosen), float(objective), trace, path, {"loocv": seed})


def _check_aligned(datasets: Sequence[LabeledDataset]) -> None:
    hstack(list(datasets))  # raises AlignmentError on mismatch


def _modality_key(dataset: LabeledDataset) -> int:
    mods = {t.modality for t in dataset.tags}
    order = [FUSION_ORDER.index(m) for m in mods if m in FUSION_ORDER]
    return min(order) if order else len(FUSION_ORDER)


def fuse_late(per_modality: Sequence, seed: int = 0, threads: int = 1):
    """Select features within each modality, then concatenate the choices.

    ``per_modality`` holds ``(dataset, spec)`` pairs. Returns the fused
    dataset and the per-modality :class:`SelectionResult` list (input order).
    """
    if not per_modality:
        raise ConfigError("no modalities to fuse")
    datasets = [d for d, _ in per_modality]
    _check_aligned(datasets)
    results = [wrapper_select(d, s, seed, threads) for d, s in per_modality]
    order = sorted(range(len(datasets)), key=lambda i: _modality_key(datasets[i]))
    fused = hstack([datasets[i].columns(results[i].chosen) for i in order])
    return fused, results


def fuse_early(per_modality: Sequence[LabeledDataset], spec, seed: int = 0, threads: int = 1):
    """Concatenate every modality, then run one wrapper selection pass."""
    if not per_modality:
        raise ConfigError("no modalities to fuse")
    order = sorted(range(len(per_modality)), key=lambda i: _modality_key(per_modality[i]))
    joined = hstack([per_modality[i] for i in order])
    result = wrapper_select(joined, spec, seed, threads)
    return joined.columns(result.chosen), result

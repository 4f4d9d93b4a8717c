"""EEG asymmetry/power features and GSR/PPG amplitude statistics."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .data_model import BANDS, FeatureName, LabeledDataset, Scheme, SignalChannel, SubjectRecord, \
    EEG_CHANNELS, label_scores
from .errors import DataQualityError, StressFusionError, SubjectError
from .preprocess import ArtifactConfig, SgConfig, StftConfig, band_powers, savitzky_golay, \
    screen_artifacts

ASYMMETRY_PAIRS = (("TP9", "TP10"), ("AF7", "AF8"))
EEG_KINDS = ("DASM", "RASM", "C", "Pmean")
SIGNAL_KINDS = ("K", "E", "SdMar", "Var")


@dataclass(frozen=True)
class FeatureVector:
    """Ordered, uniquely named feature values."""

    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        names = tuple(str(n) for n in self.names)
        if len(set(names)) != len(names):
            raise DataQualityError("feature names must be unique")
        if values.shape != (len(names),):
            raise DataQualityError("one value per feature name required")
        bad = [n for n, v in zip(names, values) if not np.isfinite(v)]
        if bad:
            raise DataQualityError(f"non-finite features: {', '.join(bad)}")
        values.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.names)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def items(self):
        return zip(self.names, self.values.tolist())

    def __add__(self, other: "FeatureVector") -> "FeatureVector":
        return FeatureVector(self.names + other.names, np.concatenate([self.values, other.values]))


def eeg_feature_name(kind: str, band, channels: Sequence[str]) -> str:
    return str(FeatureName(kind, "EEG", band.short, tuple(channels)))


def signal_feature_name(kind: str, modality: str) -> str:
    return str(FeatureName(kind, modality))


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    den = np.sqrt(np.dot(da, da) * np.dot(db, db))
    if den == 0:
        raise DataQualityError("correlation undefined for a constant power series")
    return float(np.clip(np.dot(da, db) / den, -1.0, 1.0))


def eeg_features(bp) -> FeatureVector:
    """DASM, RASM and correlation for both hemispheric pairs plus mean power.

    Asymmetries are left minus / over right with TP9 and AF7 on the left;
    correlation is taken between the per-window power series of the pair.
    """
    if bp.n_windows < 2:
        raise DataQualityError("need at least two STFT windows for EEG features")
    mean = bp.mean_power()
    ch = {name: i for i, name in enumerate(bp.channel_names)}
    names, values = [], []

    def add(kind, band, chans, value):
        names.append(eeg_feature_name(kind, band, chans))
        values.append(value)

    for kind in EEG_KINDS[:3]:
        for bi, band in enumerate(BANDS):
            for left, right in ASYMMETRY_PAIRS:
                pl, pr = mean[ch[left], bi], mean[ch[right], bi]
                if kind == "DASM":
                    add(kind, band, (left, right), pl - pr)
                elif kind == "RASM":
                    if pr == 0:
                        raise DataQualityError(
                            f"RASM undefined: zero {band.short} power on {right}")
                    add(kind, band, (left, right), pl / pr)
                else:
                    add(kind, band, (left, right),
                        _pearson(bp.powers[ch[left], bi], bp.powers[ch[right], bi]))
    for bi, band in enumerate(BANDS):
        for name in EEG_CHANNELS:
            add("Pmean", band, (name,), mean[ch[name], bi])
    return FeatureVector(tuple(names), np.array(values))


def kurtosis(x: np.ndarray) -> float:
    """Pearson (non-excess) kurtosis ``m4 / m2**2`` with 1/n moments."""
    dev = x - x.mean()
    m2 = np.mean(dev ** 2)
    if m2 == 0:
        raise DataQualityError("kurtosis undefined for zero variance")
    return float(np.mean(dev ** 4) / m2 ** 2)


def histogram_entropy(x: np.ndarray, bins: int = 16) -> float:
    """Shannon entropy in bits of an equal-width amplitude histogram on [min, max]."""
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return 0.0
    counts, _ = np.histogram(x, bins=bins, range=(lo, hi))
    p = counts[counts > 0] / x.shape[0]
    return float(-np.sum(p * np.log2(p)) + 0.0)


def sd_mean_abs_ratio(x: np.ndarray) -> float:
    mean_abs = np.mean(np.abs(x))
    if mean_abs == 0:
        raise DataQualityError("SdMar undefined: mean absolute value is zero")
    return float(np.std(x) / mean_abs)


def signal_features(x: np.ndarray, modality: str, entropy_bins: int = 16) -> FeatureVector:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise DataQualityError(f"{modality} signal is empty")
    values = [kurtosis(x), histogram_entropy(x, entropy_bins), sd_mean_abs_ratio(x), float(np.var(x))]
    return FeatureVector(tuple(signal_feature_name(k, modality) for k in SIGNAL_KINDS), values)


def gsr_ppg_features(gsr: SignalChannel, ppg: SignalChannel, entropy_bins: int = 16) -> FeatureVector:
    return (signal_features(gsr.samples, "GSR", entropy_bins)
            + signal_features(ppg.samples, "PPG", entropy_bins))


def canonical_feature_names() -> tuple[str, ...]:
    """The 58 feature names in pipeline order."""
    names = []
    for kind in EEG_KINDS[:3]:
        for band in BANDS:
            for pair in ASYMMETRY_PAIRS:
                names.append(eeg_feature_name(kind, band, pair))
    for band in BANDS:
        for name in EEG_CHANNELS:
            names.append(eeg_feature_name("Pmean", band, (name,)))
    for modality in ("GSR", "PPG"):
        names.extend(signal_feature_name(k, modality) for k in SIGNAL_KINDS)
    return tuple(names)


@dataclass(frozen=True)
class FeatureConfig:
    sg: SgConfig = field(default_factory=SgConfig)
    stft: StftConfig = field(default_factory=StftConfig)
    artifact: ArtifactConfig | None = field(default_factory=ArtifactConfig)
    entropy_bins: int = 16


def assemble_subject_features(record: SubjectRecord, cfg: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """Full per-subject extraction: 50 EEG features followed by 8 GSR/PPG features."""
    try:
        gsr = savitzky_golay(record.gsr, cfg.sg)
        ppg = savitzky_golay(record.ppg, cfg.sg)
        eeg = record.eeg
        if cfg.artifact is not None:
            eeg, _ = screen_artifacts(eeg, cfg.artifact)
        bp = band_powers(eeg, cfg.stft)
        return eeg_features(bp) + gsr_ppg_features(gsr, ppg, cfg.entropy_bins)
    except StressFusionError as exc:
        raise SubjectError(record.subject_id, exc) from exc


def build_dataset(records: Iterable[SubjectRecord], scheme: Scheme,
                  cfg: FeatureConfig = FeatureConfig(), vectors=None,
                  mean=None, sd=None) -> LabeledDataset:
    """Extract features for a cohort and label it from the PSS scores.

    Precomputed ``vectors`` (one per record) skip extraction.
    """
    records = list(records)
    if vectors is None:
        vectors = [assemble_subject_features(r, cfg) for r in records]
    scores = [r.pss_score for r in records]
    labels = [lab.index for lab in label_scores(scores, scheme, mean, sd)]
    return LabeledDataset(tuple(r.subject_id for r in records),
                          np.vstack([v.values for v in vectors]), vectors[0].names,
                          labels, scheme, tuple(scores))


def write_feature_csv(path, dataset: LabeledDataset) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "label", *dataset.feature_names])
        for sid, lab, row in zip(dataset.subject_ids, dataset.class_labels, dataset.features):
            w.writerow([sid, str(lab), *[repr(float(v)) for v in row]])

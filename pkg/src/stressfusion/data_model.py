"""Core domain types, PSS-driven labeling and dataset assembly."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AlignmentError, CohortEmptyError, ConfigError

SAMPLE_RATE_HZ = 256.0
NOMINAL_DURATION_S = 180.0
EEG_CHANNELS = ("TP9", "AF7", "AF8", "TP10")
PSS_MIN, PSS_MAX = 0, 40

# Cohort statistics reported for the original 40-participant study.
REFERENCE_PSS_MEAN = 22.0
REFERENCE_PSS_SD = 7.15


class Band(enum.Enum):
    """EEG frequency bands as half-open ``[low, high)`` ranges in Hz."""

    DELTA = (0.0, 4.0)
    THETA = (4.0, 7.0)
    ALPHA = (8.0, 12.0)
    BETA = (12.0, 30.0)
    GAMMA = (30.0, 50.0)

    @property
    def low(self) -> float:
        return self.value[0]

    @property
    def high(self) -> float:
        return self.value[1]

    @property
    def short(self) -> str:
        return self.name.lower()

    def contains(self, freqs):
        freqs = np.asarray(freqs)
        return (freqs >= self.low) & (freqs < self.high)

    @classmethod
    def from_name(cls, name: str) -> "Band":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ConfigError(f"unknown band {name!r}") from None


BANDS = tuple(Band)


class Scheme(enum.Enum):
    TWO = "two"
    THREE = "three"

    @property
    def classes(self) -> tuple["Stress", ...]:
        if self is Scheme.TWO:
            return (Stress.NON_STRESSED, Stress.STRESSED)
        return (Stress.NON_STRESSED, Stress.MILDLY_STRESSED, Stress.STRESSED)

    @property
    def n_classes(self) -> int:
        return len(self.classes)


class Stress(enum.Enum):
    NON_STRESSED = "NonStressed"
    MILDLY_STRESSED = "MildlyStressed"
    STRESSED = "Stressed"


@dataclass(frozen=True)
class ClassLabel:
    scheme: Scheme
    value: Stress

    def __post_init__(self):
        if self.value not in self.scheme.classes:
            raise ConfigError(f"{self.value.value} is not a {self.scheme.value}-class label")

    @property
    def index(self) -> int:
        """Position of the label in the scheme's canonical class order."""
        return self.scheme.classes.index(self.value)

    @classmethod
    def from_index(cls, scheme: Scheme, index: int) -> "ClassLabel":
        return cls(scheme, scheme.classes[int(index)])

    def __str__(self):
        return self.value.value


@dataclass(frozen=True, eq=False)
class SignalChannel:
    """A single uniformly sampled channel."""

    samples: np.ndarray
    sample_rate: float
    name: str

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if not self.sample_rate > 0:
            raise ConfigError(f"channel {self.name}: sample_rate must be > 0")
        if samples.ndim != 1:
            raise ConfigError(f"channel {self.name}: samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise ConfigError(f"channel {self.name}: non-finite samples")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_seconds(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples) -> "SignalChannel":
        return SignalChannel(samples, self.sample_rate, self.name)


@dataclass(frozen=True, eq=False)
class EegRecording:
    """Four-channel EEG in the fixed order TP9, AF7, AF8, TP10."""

    channels: tuple[SignalChannel, ...]
    expected_duration_s: float | None = None
    duration_tolerance_s: float = 1.0

    def __post_init__(self):
        channels = tuple(self.channels)
        names = [c.name for c in channels]
        if sorted(names) != sorted(EEG_CHANNELS) or len(names) != 4:
            raise ConfigError(f"EEG needs exactly channels {EEG_CHANNELS}, got {names}")
        by_name = {c.name: c for c in channels}
        channels = tuple(by_name[n] for n in EEG_CHANNELS)
        lengths = {len(c) for c in channels}
        if len(lengths) != 1:
            raise ConfigError(f"EEG channels have unequal lengths {sorted(lengths)}")
        if len({c.sample_rate for c in channels}) != 1:
            raise ConfigError("EEG channels have different sample rates")
        object.__setattr__(self, "channels", channels)
        if self.expected_duration_s is not None:
            if abs(self.duration_seconds - self.expected_duration_s) > self.duration_tolerance_s:
                raise ConfigError(
                    f"EEG lasts {self.duration_seconds:.2f} s, expected "
                    f"{self.expected_duration_s} +/- {self.duration_tolerance_s} s")

    @classmethod
    def from_array(cls, data, sample_rate: float = SAMPLE_RATE_HZ, **kwargs) -> "EegRecording":
        """Build from a ``(4, n)`` array in canonical channel order."""
        data = np.asarray(data, dtype=float)
        return cls(tuple(SignalChannel(row, sample_rate, name)
                         for name, row in zip(EEG_CHANNELS, data)), **kwargs)

    def channel(self, name: str) -> SignalChannel:
        return self.channels[EEG_CHANNELS.index(name)]

    def as_array(self) -> np.ndarray:
        return np.vstack([c.samples for c in self.channels])

    @property
    def sample_rate(self) -> float:
        return self.channels[0].sample_rate

    @property
    def n_samples(self) -> int:
        return len(self.channels[0])

    @property
    def duration_seconds(self) -> float:
        return self.n_samples / self.sample_rate


@dataclass(frozen=True, eq=False)
class SubjectRecord:
    subject_id: str
    pss_score: int
    eeg: EegRecording
    gsr: SignalChannel
    ppg: SignalChannel

    def __post_init__(self):
        _check_score(self.pss_score)


def _check_score(score):
    if int(score) != score or not PSS_MIN <= score <= PSS_MAX:
        raise ConfigError(f"PSS score {score!r} outside {PSS_MIN}..{PSS_MAX}")


def _cohort(scores) -> np.ndarray:
    scores = np.asarray(list(scores), dtype=float)
    if scores.size == 0:
        raise CohortEmptyError("cannot label an empty cohort")
    for s in scores:
        _check_score(s)
    return scores


def label_two_class(scores: Sequence[int], mean: float | None = None) -> list[ClassLabel]:
    """Scores at or below the cohort mean are non-stressed, above it stressed.

    ``mean`` pins the threshold instead of estimating it from ``scores``.
    """
    arr = _cohort(scores)
    mu = arr.mean() if mean is None else float(mean)
    return [ClassLabel(Scheme.TWO, Stress.STRESSED if s > mu else Stress.NON_STRESSED)
            for s in arr]


def three_class_bounds(mean: float, sd: float) -> tuple[int, int]:
    """Return ``(last non-stressed score, last mildly-stressed score)``.

    With ``lo = ceil(mean - sd/2)`` and ``hi = ceil(mean + sd/2)`` the bands are
    ``[0, lo - 1]``, ``[lo, hi]`` and ``[hi + 1, 40]``; for mean 22, sd 7.15
    that is 0-18, 19-26, 27-40.
    """
    lo = math.ceil(mean - sd / 2.0)
    hi = math.ceil(mean + sd / 2.0)
    return lo - 1, hi


def label_three_class(scores: Sequence[int], mean: float | None = None,
                      sd: float | None = None) -> list[ClassLabel]:
    """Three-level labels from ceil-rounded thresholds at mean -/+ sd/2.

    ``sd`` is the population standard deviation of the cohort unless pinned.
    A cohort with zero spread is labeled entirely non-stressed.
    """
    arr = _cohort(scores)
    mu = arr.mean() if mean is None else float(mean)
    sigma = arr.std() if sd is None else float(sd)
    if sigma < 0:
        raise ConfigError("sd must be non-negative")
    if sigma == 0:
        return [ClassLabel(Scheme.THREE, Stress.NON_STRESSED) for _ in arr]
    ns_max, ms_max = three_class_bounds(mu, sigma)
    out = []
    for s in arr:
        if s <= ns_max:
            value = Stress.NON_STRESSED
        elif s <= ms_max:
            value = Stress.MILDLY_STRESSED
        else:
            value = Stress.STRESSED
        out.append(ClassLabel(Scheme.THREE, value))
    return out


def label_scores(scores, scheme: Scheme, mean=None, sd=None) -> list[ClassLabel]:
    if scheme is Scheme.TWO:
        return label_two_class(scores, mean=mean)
    return label_three_class(scores, mean=mean, sd=sd)


@dataclass(frozen=True)
class FeatureName:
    """Structured feature identifier, rendered as ``kind:modality:band:channels``."""

    kind: str
    modality: str
    band: str | None = None
    channels: tuple[str, ...] = ()

    def __str__(self):
        return ":".join([self.kind, self.modality, self.band or "-",
                         "-".join(self.channels) or "-"])

    @classmethod
    def parse(cls, text: str) -> "FeatureName":
        try:
            kind, modality, band, chans = text.split(":")
        except ValueError:
            raise ConfigError(f"malformed feature name {text!r}") from None
        return cls(kind, modality, None if band == "-" else band,
                   () if chans == "-" else tuple(chans.split("-")))


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature matrix for a cohort.

    ``labels`` holds class indices in the scheme's canonical order.
    """

    subject_ids: tuple[str, ...]
    features: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray
    scheme: Scheme
    pss_scores: tuple[int, ...] | None = None
    _tags: tuple[FeatureName, ...] = field(default=(), repr=False)

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        if X.ndim == 1 and len(self.subject_ids) and X.size == 0:
            X = X.reshape(len(self.subject_ids), 0)
        y = np.array(self.labels, dtype=np.int64)
        ids = tuple(str(s) for s in self.subject_ids)
        names = tuple(str(n) for n in self.feature_names)
        if X.ndim != 2:
            raise ConfigError("features must be a 2-D matrix")
        if not X.shape[0] == y.shape[0] == len(ids):
            raise ConfigError(f"rows {X.shape[0]}, labels {y.shape[0]} and ids {len(ids)} differ")
        if X.shape[1] != len(names):
            raise ConfigError(f"{X.shape[1]} columns but {len(names)} feature names")
        if len(set(names)) != len(names):
            raise ConfigError("feature names must be unique")
        if not np.all(np.isfinite(X)):
            raise ConfigError("features contain non-finite values")
        if y.size and (y.min() < 0 or y.max() >= self.scheme.n_classes):
            raise ConfigError("label index out of range for scheme")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "subject_ids", ids)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "_tags", tuple(FeatureName.parse(n) for n in names))

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def tags(self) -> tuple[FeatureName, ...]:
        return self._tags

    @property
    def class_labels(self) -> list[ClassLabel]:
        return [ClassLabel.from_index(self.scheme, i) for i in self.labels]

    def columns(self, names: Sequence[str]) -> "LabeledDataset":
        idx = [self.feature_names.index(n) for n in names]
        return LabeledDataset(self.subject_ids, self.features[:, idx],
                              tuple(self.feature_names[i] for i in idx),
                              self.labels, self.scheme, self.pss_scores)

    def select(self, predicate) -> "LabeledDataset":
        """Keep columns whose :class:`FeatureName` satisfies ``predicate``."""
        return self.columns([n for n, t in zip(self.feature_names, self.tags) if predicate(t)])

    def modality(self, modality: str) -> "LabeledDataset":
        return self.select(lambda t: t.modality == modality)

    def rows(self, index) -> "LabeledDataset":
        index = np.asarray(index)
        scores = None
        if self.pss_scores is not None:
            scores = tuple(np.asarray(self.pss_scores)[index].tolist())
        return LabeledDataset(tuple(np.asarray(self.subject_ids)[index]),
                              self.features[index], self.feature_names,
                              self.labels[index], self.scheme, scores)

    def relabel(self, scheme: Scheme, mean=None, sd=None) -> "LabeledDataset":
        """Recompute labels from the stored PSS scores under ``scheme``."""
        if self.pss_scores is None:
            raise ConfigError("dataset carries no PSS scores to relabel from")
        labels = [lab.index for lab in label_scores(self.pss_scores, scheme, mean, sd)]
        return LabeledDataset(self.subject_ids, self.features, self.feature_names,
                              labels, scheme, self.pss_scores)


def hstack(datasets: Sequence[LabeledDataset]) -> LabeledDataset:
    """Concatenate the columns of aligned datasets."""
    if not datasets:
        raise ConfigError("nothing to concatenate")
    first = datasets[0]
    for d in datasets[1:]:
        if d.subject_ids != first.subject_ids:
            raise AlignmentError("datasets describe different subjects or orders")
        if d.scheme is not first.scheme or not np.array_equal(d.labels, first.labels):
            raise AlignmentError("datasets carry different labels")
    X = np.hstack([d.features for d in datasets])
    names = tuple(n for d in datasets for n in d.feature_names)
    return LabeledDataset(first.subject_ids, X, names, first.labels, first.scheme,
                          first.pss_scores)

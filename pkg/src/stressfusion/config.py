"""Flat ``key = value`` pipeline configuration.

Lines starting with ``#`` and blank lines are ignored; unknown keys are an
error. Keys carry their unit where one applies (``_hz``, ``_samples``,
``_seconds``).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .classify import ClassifierSpec
from .data_model import Scheme
from .errors import ConfigError
from .features import FeatureConfig
from .preprocess import ArtifactConfig, SgConfig, StftConfig

PATH_KEYS = ("input_dir", "output_dir")
SCHEMES = {"two": (Scheme.TWO,), "three": (Scheme.THREE,), "both": (Scheme.TWO, Scheme.THREE)}


@dataclass(frozen=True)
class PipelineConfig:
    input_dir: str = "cohort"
    output_dir: str = "results"
    seed: int = 7
    threads: int = 1
    scheme: str = "both"
    fusion: str = "lff"
    classifier: str = "mlp"
    run_sweep: bool = True
    # labeling: blank means "estimate from the cohort"
    pss_mean: float | None = None
    pss_sd: float | None = None
    # preprocessing
    sg_window_samples: int = 11
    sg_poly_order: int = 3
    stft_window_samples: int = 256
    stft_overlap_fraction: float = 0.9
    stft_taper: str = "hamming"
    stft_detrend: bool = True
    artifact_relative_variance: float = 5.0
    artifact_variance_threshold_uv2: float | None = None
    artifact_kurtosis_threshold: float = 8.0
    artifact_epoch_seconds: float = 1.0
    entropy_bins: int = 16
    # classifiers
    mlp_hidden_layers: tuple = (16, 16, 8, 8)
    mlp_learning_rate: float = 0.3
    mlp_momentum: float = 0.2
    mlp_epochs: int = 500
    mlp_loss: str = "squared"
    svm_gamma: float = 0.01
    svm_c: float = 10.0
    svm_tolerance: float = 1e-3
    svm_max_passes: int = 10
    nb_variance_floor: float = 1e-9
    # selection
    band_iterations: int = 2

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {sorted(SCHEMES)}")
        if self.fusion not in ("lff", "eff"):
            raise ConfigError("fusion must be 'lff' or 'eff'")
        if self.classifier not in ("mlp", "svm", "nb"):
            raise ConfigError("classifier must be mlp, svm or nb")
        if self.threads < 1 or self.band_iterations < 1:
            raise ConfigError("threads and band_iterations must be >= 1")
        # building the sub-configs validates their ranges
        self.feature_config()
        for k in ("mlp", "svm", "nb"):
            self.spec(k)

    @property
    def schemes(self) -> tuple[Scheme, ...]:
        return SCHEMES[self.scheme]

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            sg=SgConfig(self.sg_window_samples, self.sg_poly_order),
            stft=StftConfig(self.stft_window_samples, self.stft_overlap_fraction, self.stft_taper,
                            self.stft_detrend),
            artifact=ArtifactConfig(self.artifact_variance_threshold_uv2, self.artifact_relative_variance,
                                    self.artifact_kurtosis_threshold, self.artifact_epoch_seconds),
            entropy_bins=self.entropy_bins)

    def spec(self, kind: str | None = None) -> ClassifierSpec:
        kind = kind or self.classifier
        return ClassifierSpec(kind, hidden_layers=self.mlp_hidden_layers,
                              learning_rate=self.mlp_learning_rate, momentum=self.mlp_momentum,
                              epochs=self.mlp_epochs, loss=self.mlp_loss, seed=self.seed,
                              gamma=self.svm_gamma, C=self.svm_c, tolerance=self.svm_tolerance,
                              max_passes=self.svm_max_passes, variance_floor=self.nb_variance_floor)

    def to_text(self, include_paths: bool = True) -> str:
        """Render as a config file; without paths, the text depends only on settings."""
        lines = []
        for f in fields(self):
            if not include_paths and f.name in PATH_KEYS:
                continue
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        """SHA-256 of the path-independent settings."""
        return hashlib.sha256(self.to_text(include_paths=False).encode()).hexdigest()

    def with_overrides(self, **kw) -> "PipelineConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


# Values the source study does not state; flagged in every run manifest.
ARTIFACT_DEFAULTS = ("sg_window_samples", "sg_poly_order", "stft_taper", "stft_detrend",
                     "artifact_relative_variance", "artifact_variance_threshold_uv2",
                     "artifact_kurtosis_threshold", "artifact_epoch_seconds", "entropy_bins",
                     "mlp_hidden_layers", "mlp_epochs", "mlp_loss", "svm_tolerance", "svm_max_passes",
                     "nb_variance_floor", "band_iterations", "seed")


def _format(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


def _parse_value(name: str, text: str, default):
    text = text.strip()
    optional = default is None or name in ("pss_mean", "pss_sd", "artifact_variance_threshold_uv2")
    if text == "" and optional:
        return None
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(text)
            return low in ("true", "yes", "1")
        if isinstance(default, tuple):
            return tuple(int(x) for x in text.split(",") if x.strip())
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float) or optional:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None


def parse_config(text: str, source: str = "<string>") -> PipelineConfig:
    defaults = PipelineConfig()
    known = {f.name for f in fields(PipelineConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, value, getattr(defaults, key))
    return PipelineConfig(**values)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))

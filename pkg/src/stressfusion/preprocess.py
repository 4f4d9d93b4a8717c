"""Signal conditioning: Savitzky-Golay smoothing, EEG artifact screening and
short-time FFT band powers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data_model import BANDS, Band, EegRecording, SignalChannel
from .errors import ConfigError, EmptyRecordingError


@dataclass(frozen=True)
class SgConfig:
    window_length: int = 11
    poly_order: int = 3

    def __post_init__(self):
        if self.window_length < 5 or self.window_length % 2 == 0:
            raise ConfigError("Savitzky-Golay window_length must be odd and >= 5")
        if not 0 <= self.poly_order < self.window_length:
            raise ConfigError("poly_order must satisfy 0 <= poly_order < window_length")


def _fit_matrix(window_length: int, poly_order: int) -> np.ndarray:
    """Least-squares projector mapping a window onto polynomial coefficients.

    Row ``k`` holds the weights producing the coefficient of ``t**k`` with
    ``t`` measured in samples from the window centre.
    """
    half = window_length // 2
    t = np.arange(-half, half + 1, dtype=float)
    vander = np.vander(t, poly_order + 1, increasing=True)
    return np.linalg.pinv(vander)


def savgol_weights(window_length: int, poly_order: int) -> np.ndarray:
    """Dot-product weights that evaluate the fitted polynomial at the centre."""
    return _fit_matrix(window_length, poly_order)[0]


def savitzky_golay(signal: SignalChannel, cfg: SgConfig = SgConfig()) -> SignalChannel:
    """Smooth ``signal`` with a centred least-squares polynomial fit.

    The first and last ``window_length // 2`` samples are taken from the
    polynomial fitted to the first/last full window.
    """
    x = signal.samples
    w, p = cfg.window_length, cfg.poly_order
    if x.shape[0] < w:
        raise ConfigError(f"signal of {x.shape[0]} samples is shorter than window {w}")
    half = w // 2
    proj = _fit_matrix(w, p)
    out = np.empty_like(x)
    out[half:-half] = sliding_window_view(x, w) @ proj[0]
    t = np.arange(-half, half + 1, dtype=float)
    vander = np.vander(t, p + 1, increasing=True)
    out[:half] = (vander @ (proj @ x[:w]))[:half]
    out[-half:] = (vander @ (proj @ x[-w:]))[-half:]
    return signal.with_samples(out)


@dataclass(frozen=True)
class StftConfig:
    window_size: int = 256
    overlap_fraction: float = 0.90
    taper: str = "hamming"
    detrend: bool = True

    def __post_init__(self):
        if self.window_size < 2:
            raise ConfigError("window_size must be >= 2")
        if not 0 <= self.overlap_fraction < 1:
            raise ConfigError("overlap_fraction must lie in [0, 1)")
        if self.taper not in _TAPERS:
            raise ConfigError(f"unknown taper {self.taper!r}; choose from {sorted(_TAPERS)}")

    @property
    def hop(self) -> int:
        return max(1, int(round(self.window_size * (1.0 - self.overlap_fraction))))

    def window(self) -> np.ndarray:
        return _TAPERS[self.taper](self.window_size)


_TAPERS = {
    "hamming": np.hamming,
    "hann": np.hanning,
    "rectangular": np.ones,
}


@dataclass(frozen=True, eq=False)
class BandPowerSeries:
    """Absolute band power, indexed ``[channel, band, window]``."""

    powers: np.ndarray
    window_times: np.ndarray
    channel_names: tuple[str, ...]
    bands: tuple[Band, ...] = BANDS

    def __post_init__(self):
        if self.powers.shape[:2] != (len(self.channel_names), len(self.bands)):
            raise ConfigError("powers shape does not match channels/bands")
        if self.powers.shape[2] != self.window_times.shape[0]:
            raise ConfigError("window_times length does not match window count")

    @property
    def n_windows(self) -> int:
        return self.powers.shape[2]

    def series(self, channel: str, band: Band) -> np.ndarray:
        return self.powers[self.channel_names.index(channel), self.bands.index(band)]

    def mean_power(self) -> np.ndarray:
        """Window-averaged power, ``[channel, band]``."""
        return self.powers.mean(axis=2)


def window_count(n_samples: int, cfg: StftConfig) -> int:
    if n_samples < cfg.window_size:
        return 0
    return (n_samples - cfg.window_size) // cfg.hop + 1


def periodogram_frames(x: np.ndarray, sample_rate: float, cfg: StftConfig):
    """One-sided periodograms of every STFT frame of ``x``.

    Returns ``(freqs, power)`` with ``power[frame, bin]`` scaled so that the
    bins of a frame sum to ``sum((w*x)**2) / sum(w**2)``, i.e. the plain
    mean square of the frame for a rectangular taper.
    """
    n = cfg.window_size
    frames = sliding_window_view(np.asarray(x, dtype=float), n)[::cfg.hop]
    if cfg.detrend:
        frames = frames - frames.mean(axis=1, keepdims=True)
    win = cfg.window()
    spec = np.fft.rfft(frames * win, axis=1)
    power = np.abs(spec) ** 2 / (n * np.sum(win ** 2))
    # fold negative frequencies; DC and (even-n) Nyquist appear once
    if n % 2 == 0:
        power[:, 1:-1] *= 2.0
    else:
        power[:, 1:] *= 2.0
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    return freqs, power


def band_powers(eeg: EegRecording, cfg: StftConfig = StftConfig()) -> BandPowerSeries:
    """Per-window absolute power of every channel in every band.

    Band power is the sum of periodogram bins whose centre frequency falls in
    the band's half-open range; bins in the 7-8 Hz gap belong to no band.
    """
    n = eeg.n_samples
    if n < cfg.window_size:
        raise ConfigError(f"channel length {n} is shorter than window_size {cfg.window_size}")
    masks = None
    out = []
    for ch in eeg.channels:
        freqs, power = periodogram_frames(ch.samples, eeg.sample_rate, cfg)
        if masks is None:
            masks = np.stack([b.contains(freqs) for b in BANDS]).astype(float)
        out.append(masks @ power.T)
    powers = np.stack(out)
    starts = np.arange(powers.shape[2]) * cfg.hop
    times = (starts + cfg.window_size / 2.0) / eeg.sample_rate
    return BandPowerSeries(powers, times, tuple(c.name for c in eeg.channels))


@dataclass(frozen=True)
class ArtifactConfig:
    """Epoch rejection thresholds.

    ``variance_threshold`` is absolute (µV²); when ``None`` an epoch is
    rejected if its variance exceeds ``relative_variance`` times the median
    epoch variance of the same channel.
    """

    variance_threshold: float | None = None
    relative_variance: float = 5.0
    kurtosis_threshold: float = 8.0
    epoch_seconds: float = 1.0

    def __post_init__(self):
        if self.epoch_seconds <= 0:
            raise ConfigError("epoch_seconds must be > 0")
        if self.variance_threshold is not None and self.variance_threshold < 0:
            raise ConfigError("variance_threshold must be >= 0")
        if self.relative_variance < 0 or self.kurtosis_threshold < 0:
            raise ConfigError("thresholds must be >= 0")


def epoch_statistics(x: np.ndarray, epoch_len: int):
    """Population variance and (non-excess) kurtosis of consecutive epochs.

    Kurtosis of a flat epoch is reported as 0.
    """
    n_epochs = x.shape[0] // epoch_len
    ep = x[: n_epochs * epoch_len].reshape(n_epochs, epoch_len)
    dev = ep - ep.mean(axis=1, keepdims=True)
    m2 = np.mean(dev ** 2, axis=1)
    m4 = np.mean(dev ** 4, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        kurt = np.where(m2 > 0, m4 / np.where(m2 > 0, m2, 1.0) ** 2, 0.0)
    return m2, kurt


def screen_artifacts(eeg: EegRecording, cfg: ArtifactConfig = ArtifactConfig()):
    """Drop epochs in which any channel's variance or kurtosis is too high.

    Returns ``(clean, rejected)`` where ``rejected`` is a boolean mask over the
    full epochs of the input; a trailing partial epoch is discarded.
    """
    epoch_len = int(round(cfg.epoch_seconds * eeg.sample_rate))
    n_epochs = eeg.n_samples // epoch_len
    if epoch_len < 1 or n_epochs == 0:
        raise EmptyRecordingError("recording is shorter than one epoch")
    rejected = np.zeros(n_epochs, dtype=bool)
    for ch in eeg.channels:
        var, kurt = epoch_statistics(ch.samples, epoch_len)
        if cfg.variance_threshold is not None:
            limit = cfg.variance_threshold
        else:
            limit = cfg.relative_variance * np.median(var)
        rejected |= (var > limit) | (kurt > cfg.kurtosis_threshold)
    if rejected.all():
        raise EmptyRecordingError("every EEG epoch was rejected as an artifact")
    keep = np.repeat(~rejected, epoch_len)
    clean = EegRecording(tuple(ch.with_samples(ch.samples[: n_epochs * epoch_len][keep])
                               for ch in eeg.channels))
    return clean, rejected

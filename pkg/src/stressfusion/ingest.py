"""Device CSV parsing/writing and the seeded synthetic-subject generator.

Canonical CSV headers (UTF-8, comma separated, one header row):

* MUSE EEG: ``timestamp,raw_tp9,raw_af7,raw_af8,raw_tp10`` (seconds, µV)
* Shimmer: ``timestamp,gsr_kOhm,ppg_mV`` or ``timestamp,gsr_uS,ppg_mV``;
  conductance is converted to resistance on load.

Real exports with other column names can be read by passing ``column_map``
(canonical name -> name in the file).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .data_model import EEG_CHANNELS, REFERENCE_PSS_MEAN, REFERENCE_PSS_SD, SAMPLE_RATE_HZ, EegRecording, \
    Scheme, SignalChannel, Stress, SubjectRecord
from .errors import ConfigError, EmptyRecordingError, FormatError, SchemaError
from .seeding import derive_seed, make_rng

MUSE_COLUMNS = ("timestamp",) + tuple(f"raw_{c.lower()}" for c in EEG_CHANNELS)
GSR_UNITS = {"gsr_kOhm": "kOhm", "gsr_uS": "uS"}
RATE_TOLERANCE = 0.01


class ShimmerRecording(NamedTuple):
    gsr: SignalChannel
    ppg: SignalChannel
    dropped_rows: int


class MuseRecording(NamedTuple):
    eeg: EegRecording
    dropped_rows: int


def _read_table(path, required, column_map=None):
    """Read the required columns; rows with a blank/invalid cell are dropped."""
    path = Path(path)
    column_map = column_map or {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyRecordingError(f"{path} is empty") from None
        idx = []
        for col in required:
            name = column_map.get(col, col)
            if name not in header:
                raise SchemaError(col, path)
            idx.append(header.index(name))
        rows, dropped = [], 0
        for line in reader:
            if not line or all(not c.strip() for c in line):
                continue
            try:
                vals = [float(line[i]) for i in idx]
            except (ValueError, IndexError):
                dropped += 1
                continue
            if not all(math.isfinite(v) for v in vals):
                dropped += 1
                continue
            rows.append(vals)
    if not rows:
        raise EmptyRecordingError(f"{path} contains no complete data rows")
    return np.array(rows), dropped


def _check_timestamps(t, path, expected_rate):
    if np.any(np.diff(t) <= 0):
        raise FormatError(f"{path}: timestamps are not strictly increasing")
    if t.shape[0] >= 2:
        rate = 1.0 / np.median(np.diff(t))
        if abs(rate - expected_rate) > RATE_TOLERANCE * expected_rate:
            raise FormatError(f"{path}: sampled at {rate:.2f} Hz, expected {expected_rate:g} Hz")


def parse_muse_csv(path, column_map=None, sample_rate: float = SAMPLE_RATE_HZ) -> MuseRecording:
    data, dropped = _read_table(path, MUSE_COLUMNS, column_map)
    _check_timestamps(data[:, 0], path, sample_rate)
    eeg = EegRecording(tuple(SignalChannel(data[:, i + 1], sample_rate, name)
                             for i, name in enumerate(EEG_CHANNELS)))
    return MuseRecording(eeg, dropped)


def parse_shimmer_csv(path, column_map=None, sample_rate: float = SAMPLE_RATE_HZ) -> ShimmerRecording:
    """Read GSR (returned as resistance in kΩ) and PPG (mV)."""
    path = Path(path)
    column_map = column_map or {}
    with open(path, newline="", encoding="utf-8") as fh:
        header = [h.strip() for h in next(csv.reader(fh), [])]
    gsr_col = next((c for c in GSR_UNITS if column_map.get(c, c) in header), None)
    if gsr_col is None:
        raise SchemaError("gsr_kOhm|gsr_uS", path)
    data, dropped = _read_table(path, ("timestamp", gsr_col, "ppg_mV"), column_map)
    _check_timestamps(data[:, 0], path, sample_rate)
    gsr = data[:, 1]
    if GSR_UNITS[gsr_col] == "uS":
        if np.any(gsr <= 0):
            raise FormatError(f"{path}: non-positive skin conductance")
        gsr = 1000.0 / gsr  # µS -> kΩ
    return ShimmerRecording(SignalChannel(gsr, sample_rate, "GSR"),
                            SignalChannel(data[:, 2], sample_rate, "PPG"), dropped)


def _fmt(x):
    return format(float(x), ".10g")


def write_muse_csv(path, eeg: EegRecording) -> None:
    t = np.arange(eeg.n_samples) / eeg.sample_rate
    data = eeg.as_array()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(MUSE_COLUMNS) + "\n")
        fh.writelines(",".join([_fmt(t[i])] + [_fmt(v) for v in data[:, i]]) + "\n"
                      for i in range(eeg.n_samples))


def write_shimmer_csv(path, gsr: SignalChannel, ppg: SignalChannel, unit: str = "kOhm") -> None:
    if len(gsr) != len(ppg):
        raise ConfigError("GSR and PPG must have equal lengths")
    if unit not in ("kOhm", "uS"):
        raise ConfigError("unit must be 'kOhm' or 'uS'")
    g = gsr.samples if unit == "kOhm" else 1000.0 / gsr.samples
    t = np.arange(len(gsr)) / gsr.sample_rate
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"timestamp,gsr_{unit},ppg_mV\n")
        fh.writelines(f"{_fmt(t[i])},{_fmt(g[i])},{_fmt(ppg.samples[i])}\n" for i in range(len(gsr)))


# -- synthetic subjects ------------------------------------------------------

# PSS draw ranges per planted class, inside the published label intervals.
PSS_RANGES = {
    Scheme.TWO: {Stress.NON_STRESSED: (12, 22), Stress.STRESSED: (23, 32)},
    Scheme.THREE: {Stress.NON_STRESSED: (10, 18), Stress.MILDLY_STRESSED: (19, 26),
                   Stress.STRESSED: (27, 34)},
}
# Class proportions of the reference cohort (12 / 19 / 9 of 40).
THREE_CLASS_SHARE = (12, 19, 9)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic subject.

    ``modality_spread`` sets how much each modality's view of the stress
    level deviates from the shared latent value; the three deviations sum to
    zero, so only the combination of all modalities recovers it exactly.
    """

    seed: int
    scheme: Scheme = Scheme.THREE
    planted_class: Stress = Stress.NON_STRESSED
    duration_seconds: float = 180.0
    sample_rate: float = SAMPLE_RATE_HZ
    pss_score: int | None = None
    effect_scale: float = 1.0
    modality_spread: float = 0.6
    blink_rate_hz: float = 0.05
    subject_id: str | None = None

    def __post_init__(self):
        if self.duration_seconds <= 0 or self.sample_rate <= 0:
            raise ConfigError("duration and sample_rate must be > 0")
        if self.planted_class not in self.scheme.classes:
            raise ConfigError(f"{self.planted_class.value} is not a {self.scheme.value}-class label")
        if self.effect_scale < 0 or self.modality_spread < 0 or self.blink_rate_hz < 0:
            raise ConfigError("effect_scale, modality_spread and blink_rate_hz must be >= 0")


def _pink_noise(rng, n, fs, rms):
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / fs)
    spec[0] = 0.0
    spec[1:] /= np.sqrt(np.maximum(f[1:], 0.5))
    x = np.fft.irfft(spec, n)
    return x * (rms / np.sqrt(np.mean(x ** 2)))


def _tone(rng, t, f_lo, f_hi, power):
    """Sinusoid with random frequency in [f_lo, f_hi] and phase, mean power ``power``."""
    freq = rng.uniform(f_lo, f_hi)
    phase = rng.uniform(0, 2 * np.pi)
    return np.sqrt(2.0 * power) * np.sin(2 * np.pi * freq * t + phase)


def _blinks(rng, t, rate, amplitude=150.0, width=0.08):
    out = np.zeros_like(t)
    for c in np.sort(rng.uniform(0, t[-1], rng.poisson(rate * t[-1]))):
        out += amplitude * np.exp(-0.5 * ((t - c) / width) ** 2)
    return out


def modality_levels(rng, latent, spread):
    """Per-modality stress levels ``latent + e`` with ``e`` summing to zero."""
    e = rng.standard_normal(3) * spread
    e -= e.mean()
    return latent + e


def generate_synthetic_subject(spec: SynthSpec) -> SubjectRecord:
    """Deterministic subject with stress-dependent physiology.

    Stress level is the PSS score standardized with the reference cohort
    statistics. Effects (all monotone in the level): added theta power on
    TP9/TP10, a small and noisy beta addition on TP9, lower mean skin
    resistance with stronger phasic fluctuation, and larger PPG pulse
    amplitude.
    """
    rng = make_rng(spec.seed)
    if spec.pss_score is None:
        lo, hi = PSS_RANGES[spec.scheme][spec.planted_class]
        pss = int(rng.integers(lo, hi + 1))
    else:
        pss = int(spec.pss_score)
        rng.integers(0, 1)  # keep the draw sequence aligned
    latent = (pss - REFERENCE_PSS_MEAN) / REFERENCE_PSS_SD
    eeg_lvl, gsr_lvl, ppg_lvl = spec.effect_scale * modality_levels(rng, latent, spec.modality_spread)

    fs = spec.sample_rate
    n = int(round(spec.duration_seconds * fs))
    t = np.arange(n) / fs

    eeg = []
    for name in EEG_CHANNELS:
        gain = np.exp(0.05 * rng.standard_normal())
        x = gain * _pink_noise(rng, n, fs, rms=10.0)
        x += _tone(rng, t, 9.0, 11.0, power=8.0)
        if name in ("TP9", "TP10"):
            x += _tone(rng, t, 4.8, 6.2, power=30.0 * np.exp(0.6 * eeg_lvl))
        if name == "TP9":
            x += _tone(rng, t, 16.0, 24.0, power=6.0 * np.exp(0.2 * eeg_lvl + 0.3 * rng.standard_normal()))
        if name in ("AF7", "AF8"):
            x += _blinks(rng, t, spec.blink_rate_hz)
        eeg.append(850.0 + x)

    mean_r = 300.0 * np.exp(-0.25 * gsr_lvl)
    phasic = sum(_tone(rng, t, 0.05, 0.5, power=8.0 * np.exp(0.5 * gsr_lvl)) for _ in range(6))
    drift = _tone(rng, t, 0.002, 0.005, power=4.0)
    gsr = mean_r + phasic + drift + 0.5 * rng.standard_normal(n)

    hr = rng.uniform(1.05, 1.35)
    amp = 50.0 * np.exp(0.3 * ppg_lvl)
    ph = rng.uniform(0, 2 * np.pi)
    pulse = np.sin(2 * np.pi * hr * t + ph) + 0.35 * np.sin(4 * np.pi * hr * t + 2 * ph + 0.8)
    ppg = 500.0 + amp * pulse + _tone(rng, t, 0.05, 0.3, power=20.0) + 1.0 * rng.standard_normal(n)

    sid = spec.subject_id or f"synth-{spec.seed}"
    return SubjectRecord(
        sid, pss,
        EegRecording(tuple(SignalChannel(x, fs, name) for name, x in zip(EEG_CHANNELS, eeg))),
        SignalChannel(gsr, fs, "GSR"), SignalChannel(ppg, fs, "PPG"))


def planted_classes(n: int, rng) -> list[Stress]:
    """Reference-cohort class proportions for ``n`` subjects, shuffled."""
    share = np.array(THREE_CLASS_SHARE, dtype=float) / sum(THREE_CLASS_SHARE)
    counts = np.floor(share * n).astype(int)
    for i in np.argsort(-(share * n - counts), kind="stable")[: n - counts.sum()]:
        counts[i] += 1
    classes = [c for c, k in zip(Scheme.THREE.classes, counts) for _ in range(k)]
    return [classes[i] for i in rng.permutation(n)]


def cohort_specs(n: int, seed: int, **kwargs) -> list[SynthSpec]:
    if n < 1:
        raise ConfigError("cohort needs at least one subject")
    rng = make_rng(seed)
    width = max(2, len(str(n)))
    return [SynthSpec(seed=derive_seed(seed, i), scheme=Scheme.THREE, planted_class=c,
                      subject_id=f"S{i + 1:0{width}d}", **kwargs)
            for i, c in enumerate(planted_classes(n, rng))]


def generate_cohort(n: int = 40, seed: int = 7, **kwargs) -> list[SubjectRecord]:
    """Synthetic cohort with the reference class mix; ``kwargs`` go to :class:`SynthSpec`."""
    return [generate_synthetic_subject(s) for s in cohort_specs(n, seed, **kwargs)]


# -- cohort directories ------------------------------------------------------

SUBJECTS_FILE = "subjects.csv"


def muse_path(directory, subject_id) -> Path:
    return Path(directory) / f"{subject_id}_muse.csv"


def shimmer_path(directory, subject_id) -> Path:
    return Path(directory) / f"{subject_id}_shimmer.csv"


def write_cohort(directory, records, planted=None) -> None:
    """Write one MUSE and one Shimmer CSV per subject plus ``subjects.csv``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / SUBJECTS_FILE, "w", newline="", encoding="utf-8") as fh:
        fh.write("subject_id,pss_score" + (",planted_class" if planted else "") + "\n")
        for i, r in enumerate(records):
            extra = f",{planted[i].value}" if planted else ""
            fh.write(f"{r.subject_id},{r.pss_score}{extra}\n")
    for r in records:
        write_muse_csv(muse_path(directory, r.subject_id), r.eeg)
        write_shimmer_csv(shimmer_path(directory, r.subject_id), r.gsr, r.ppg)


def read_subject_index(directory) -> list[tuple[str, int]]:
    path = Path(directory) / SUBJECTS_FILE
    if not path.is_file():
        raise FileNotFoundError(f"missing subject index {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for col in ("subject_id", "pss_score"):
            if col not in (reader.fieldnames or []):
                raise SchemaError(col, path)
        out = []
        for row in reader:
            try:
                out.append((row["subject_id"].strip(), int(row["pss_score"])))
            except (TypeError, ValueError):
                raise FormatError(f"{path}: bad row {row}") from None
    if not out:
        raise EmptyRecordingError(f"{path} lists no subjects")
    return out


def load_cohort(directory, sample_rate: float = SAMPLE_RATE_HZ) -> list[SubjectRecord]:
    """Read every subject listed in ``subjects.csv``; missing files raise ``FileNotFoundError``."""
    records = []
    for sid, pss in read_subject_index(directory):
        for p in (muse_path(directory, sid), shimmer_path(directory, sid)):
            if not p.is_file():
                raise FileNotFoundError(f"missing recording {p}")
        eeg = parse_muse_csv(muse_path(directory, sid), sample_rate=sample_rate).eeg
        shim = parse_shimmer_csv(shimmer_path(directory, sid), sample_rate=sample_rate)
        records.append(SubjectRecord(sid, pss, eeg, shim.gsr, shim.ppg))
    return records

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sst

from stressfusion.data_model import BANDS, EEG_CHANNELS, Scheme, SignalChannel, SubjectRecord
from stressfusion.errors import DataQualityError, SubjectError
from stressfusion.features import (FeatureConfig, assemble_subject_features, build_dataset,
                                   canonical_feature_names, eeg_features, histogram_entropy, kurtosis,
                                   sd_mean_abs_ratio, signal_features, write_feature_csv)
from stressfusion.ingest import SynthSpec, generate_synthetic_subject
from stressfusion.preprocess import BandPowerSeries


def _bp(powers):
    powers = np.asarray(powers, dtype=float)
    return BandPowerSeries(powers, np.arange(powers.shape[2], dtype=float), EEG_CHANNELS)


def _random_bp(seed=0, n=30):
    return _bp(np.random.default_rng(seed).uniform(1.0, 10.0, (4, 5, n)))


def test_symmetric_hemispheres_give_neutral_asymmetry():
    base = np.random.default_rng(1).uniform(1, 5, (5, 40))
    # TP9 == TP10 and AF7 == AF8
    fv = eeg_features(_bp(np.stack([base, base * 2, base * 2, base])))
    for band in BANDS:
        assert fv[f"DASM:EEG:{band.short}:TP9-TP10"] == 0.0
        assert fv[f"RASM:EEG:{band.short}:AF7-AF8"] == 1.0
        assert fv[f"C:EEG:{band.short}:TP9-TP10"] == pytest.approx(1.0)


def test_asymmetry_of_doubled_channel():
    p = np.random.default_rng(0).uniform(1.0, 3.0, (4, 5, 10))
    p[0, 1] = 2.0 * p[3, 1]
    fv = eeg_features(_bp(p))
    assert fv["RASM:EEG:theta:TP9-TP10"] == pytest.approx(2.0, rel=1e-12)
    assert fv["DASM:EEG:theta:TP9-TP10"] == pytest.approx(p[3, 1].mean(), rel=1e-12)
    assert fv["C:EEG:theta:TP9-TP10"] == pytest.approx(1.0, rel=1e-12)


def test_feature_vector_layout():
    fv = eeg_features(_random_bp())
    assert len(fv) == 50
    names = canonical_feature_names()
    assert len(names) == 58 and names[:50] == fv.names
    assert names[50:] == tuple(f"{k}:{m}:-:-" for m in ("GSR", "PPG") for k in ("K", "E", "SdMar", "Var"))


def test_correlation_matches_scipy():
    bp = _random_bp(5)
    fv = eeg_features(bp)
    r = sst.pearsonr(bp.powers[1, 3], bp.powers[2, 3]).statistic
    assert fv["C:EEG:beta:AF7-AF8"] == pytest.approx(r, abs=1e-12)


def test_eeg_degenerate_inputs():
    with pytest.raises(DataQualityError):
        eeg_features(_random_bp(n=1))
    p = np.random.default_rng(2).uniform(1, 2, (4, 5, 10))
    p[3, 0] = 0.0
    with pytest.raises(DataQualityError, match="RASM"):
        eeg_features(_bp(p))


def test_signal_statistics_against_scipy():
    x = np.random.default_rng(3).gamma(2.0, 3.0, 4000)
    assert kurtosis(x) == pytest.approx(sst.kurtosis(x, fisher=False, bias=True), rel=1e-12)
    counts, _ = np.histogram(x, bins=16)
    assert histogram_entropy(x, 16) == pytest.approx(sst.entropy(counts, base=2), rel=1e-12)
    assert sd_mean_abs_ratio(x) == pytest.approx(np.std(x) / np.mean(np.abs(x)), rel=1e-14)
    fv = signal_features(x, "GSR")
    assert fv["Var:GSR:-:-"] == pytest.approx(sst.tvar(x) * (x.size - 1) / x.size, rel=1e-12)


def test_signal_statistics_edge_cases():
    assert histogram_entropy(np.full(10, 3.0)) == 0.0
    assert histogram_entropy(np.arange(16.0), 16) == pytest.approx(4.0)
    with pytest.raises(DataQualityError):
        kurtosis(np.ones(5))
    with pytest.raises(DataQualityError):
        sd_mean_abs_ratio(np.zeros(5))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100), st.floats(-50, 50), st.integers(0, 10_000))
def test_kurtosis_affine_and_sdmar_scale_invariance(a, b, seed):
    x = np.random.default_rng(seed).standard_normal(300)
    assert kurtosis(a * x + b) == pytest.approx(kurtosis(x), rel=1e-6)
    assert sd_mean_abs_ratio(a * (x + b)) == pytest.approx(sd_mean_abs_ratio(x + b), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_signal_features_ignore_sample_order(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(200) + 5
    a = signal_features(x, "PPG").values
    b = signal_features(rng.permutation(x), "PPG").values
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_subject_extraction_and_dataset(tmp_path):
    recs = [generate_synthetic_subject(SynthSpec(seed=s, subject_id=f"S{s:02d}", duration_seconds=12.0))
            for s in range(1, 5)]
    fv = assemble_subject_features(recs[0])
    assert fv.names == canonical_feature_names()
    assert np.all(np.isfinite(fv.values))
    ds = build_dataset(recs, Scheme.TWO)
    assert ds.features.shape == (4, 58)
    path = tmp_path / "f.csv"
    write_feature_csv(path, ds)
    head = path.read_text().splitlines()
    assert head[0].startswith("subject_id,label,DASM:EEG:delta:TP9-TP10") and len(head) == 5


def test_failures_name_the_subject():
    rec = generate_synthetic_subject(SynthSpec(seed=1, subject_id="S07", duration_seconds=12.0))
    flat = SubjectRecord(rec.subject_id, rec.pss_score, rec.eeg,
                         SignalChannel(np.zeros(len(rec.gsr)), 256.0, "GSR"), rec.ppg)
    with pytest.raises(SubjectError) as err:
        assemble_subject_features(flat)
    assert err.value.subject_id == "S07" and isinstance(err.value.cause, DataQualityError)


def test_artifact_screen_can_be_disabled():
    rec = generate_synthetic_subject(SynthSpec(seed=2, duration_seconds=12.0))
    a = assemble_subject_features(rec, FeatureConfig(artifact=None))
    b = assemble_subject_features(rec)
    assert a.names == b.names
    # GSR/PPG features never pass through the EEG screen
    np.testing.assert_array_equal(a.values[50:], b.values[50:])

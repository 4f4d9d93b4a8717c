import numpy as np
import pytest

from stressfusion.classify import ClassifierSpec
from stressfusion.data_model import Band, LabeledDataset, Scheme
from stressfusion.errors import AlignmentError, ConfigError
from stressfusion.evaluate import loocv, majority_predictor
from stressfusion.features import canonical_feature_names
from stressfusion.select import (BandSubset, all_band_subsets, band_columns, band_selection, fuse_early,
                                 fuse_late, majority_rate, wrapper_select)

NB = ClassifierSpec("nb")
EEG_NAMES = canonical_feature_names()[:50]


def _ds(X, y, names, scheme=Scheme.TWO):
    return LabeledDataset(tuple(f"s{i:02d}" for i in range(len(y))), np.asarray(X, dtype=float),
                          tuple(names), np.asarray(y), scheme)


def _eeg_dataset(planted=Band.THETA, n=24, seed=0, effect=3.0):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    X = rng.standard_normal((n, 50))
    for j, name in enumerate(EEG_NAMES):
        if f":{planted.short}:" in name:
            X[:, j] += effect * y
    return _ds(X, y, EEG_NAMES)


def _modality(mod, X, y):
    return _ds(X, y, [f"K{j}:{mod}:-:-" for j in range(X.shape[1])])


def test_thirty_one_subsets_in_canonical_order():
    subsets = all_band_subsets()
    assert len(subsets) == 31 and len(set(map(str, subsets))) == 31
    assert [str(s) for s in subsets[:6]] == ["delta", "theta", "alpha", "beta", "gamma", "delta+theta"]
    assert str(subsets[-1]) == "delta+theta+alpha+beta+gamma"
    assert str(BandSubset((Band.GAMMA, Band.THETA))) == "theta+gamma"
    with pytest.raises(ConfigError):
        BandSubset(())


def test_band_columns_keep_only_requested_bands():
    view = band_columns(_eeg_dataset(), BandSubset((Band.THETA,)))
    assert view.n_features == 10
    assert all(":theta:" in n for n in view.feature_names)


def test_planted_band_is_selected():
    result = band_selection(_eeg_dataset(), NB)
    assert Band.THETA in result.chosen
    assert len(result.trace) == 31
    assert result.objective == max(a for _, _, a in result.trace)


def test_ties_go_to_the_first_canonical_subset():
    result = band_selection(_eeg_dataset(effect=0.0), majority_predictor, iterations=2)
    assert str(result.chosen) == "delta"


def test_band_selection_rejects_bad_input():
    ds = _eeg_dataset()
    with pytest.raises(ConfigError):
        band_selection(ds, NB, iterations=0)
    with pytest.raises(ConfigError):
        band_selection(_modality("GSR", np.zeros((4, 1)), [0, 1, 0, 1]), NB)


def test_band_selection_thread_invariant():
    ds = _eeg_dataset(seed=3, effect=1.0)
    spec = ClassifierSpec("mlp", hidden_layers=(4,), epochs=15)
    a = band_selection(ds, spec, seed=5, threads=1)
    b = band_selection(ds, spec, seed=5, threads=2)
    assert a.to_json() == b.to_json()


def test_wrapper_finds_the_perfect_feature():
    rng = np.random.default_rng(1)
    y = np.repeat([0, 1], 10)
    X = rng.standard_normal((20, 5))
    X[:, 3] = y * 10.0 + rng.uniform(0, 0.1, 20)
    result = wrapper_select(_modality("GSR", X, y), NB)
    assert result.chosen == ("K3:GSR:-:-",) and result.objective == 1.0


def test_wrapper_stops_at_baseline_when_nothing_helps():
    y = np.repeat([0, 1], 6)
    X = np.tile(np.arange(3.0), (12, 1))
    result = wrapper_select(_modality("PPG", X, y), majority_predictor)
    assert result.chosen == () and result.objective == majority_rate(_modality("PPG", X, y))


def test_wrapper_skips_duplicate_columns():
    rng = np.random.default_rng(2)
    y = np.repeat([0, 1], 8)
    good = y * 2.0 + rng.standard_normal(16) * 0.6
    X = np.column_stack([good, good, rng.standard_normal(16)])
    result = wrapper_select(_modality("GSR", X, y), NB)
    assert "K0:GSR:-:-" in result.chosen and "K1:GSR:-:-" not in result.chosen


def test_wrapper_path_strictly_increases_and_is_self_consistent():
    rng = np.random.default_rng(4)
    y = np.repeat([0, 1, 2], 8)
    X = rng.standard_normal((24, 6)) + 0.8 * y[:, None] * rng.uniform(0, 1, 6)
    ds = _ds(X, y, [f"K{j}:GSR:-:-" for j in range(6)], Scheme.THREE)
    spec = ClassifierSpec("mlp", hidden_layers=(4,), epochs=30)
    result = wrapper_select(ds, spec, seed=11)
    assert all(b > a for a, b in zip(result.path, result.path[1:]))
    assert len(result.path) == len(result.chosen) + 1
    again = loocv(ds.columns(result.chosen), spec, seed=11).accuracy
    assert abs(again - result.objective) <= 1e-12


def test_late_fusion_concatenates_in_modality_order():
    rng = np.random.default_rng(5)
    y = np.repeat([0, 1], 10)
    parts = {m: _modality(m, rng.standard_normal((20, 3)) + s * y[:, None], y)
             for m, s in (("PPG", 1.0), ("EEG", 2.0), ("GSR", 1.5))}
    fused, results = fuse_late([(parts[m], NB) for m in ("PPG", "EEG", "GSR")])
    assert fused.n_features == sum(len(r.chosen) for r in results)
    mods = [n.split(":")[1] for n in fused.feature_names]
    assert mods == sorted(mods, key=["EEG", "GSR", "PPG"].index)


def test_early_fusion_of_one_modality_equals_wrapper():
    rng = np.random.default_rng(6)
    y = np.repeat([0, 1], 10)
    ds = _modality("GSR", rng.standard_normal((20, 4)) + y[:, None], y)
    fused, result = fuse_early([ds], NB)
    assert result.to_json() == wrapper_select(ds, NB).to_json()
    assert fused.feature_names == result.chosen


def test_fusion_rejects_misaligned_modalities():
    y = np.array([0, 1, 0, 1])
    a = _modality("GSR", np.arange(4.0)[:, None], y)
    b = _modality("PPG", np.arange(4.0)[:, None], y[::-1])
    with pytest.raises(AlignmentError):
        fuse_late([(a, NB), (b, NB)])
    with pytest.raises(AlignmentError):
        fuse_early([a, b], NB)
    with pytest.raises(ConfigError):
        fuse_late([])

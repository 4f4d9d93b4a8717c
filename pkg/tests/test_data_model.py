import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import REFERENCE_SCORES
from stressfusion.data_model import (BANDS, Band, ClassLabel, EegRecording, FeatureName, LabeledDataset,
                                     Scheme, SignalChannel, Stress, hstack, label_scores,
                                     label_three_class, label_two_class, three_class_bounds)
from stressfusion.errors import AlignmentError, CohortEmptyError, ConfigError

NS, MS, S = Stress.NON_STRESSED, Stress.MILDLY_STRESSED, Stress.STRESSED
scores_st = st.lists(st.integers(0, 40), min_size=1, max_size=60)


def values(labels):
    return [lab.value for lab in labels]


def test_reference_multiset_has_reference_statistics():
    arr = np.array(REFERENCE_SCORES, dtype=float)
    assert arr.size == 40 and arr.mean() == 22.0
    # any population sd in (6, 8) maps mean 22 onto the 18/26 boundaries
    assert 6.0 < arr.std() < 8.0


def test_two_class_threshold_at_mean():
    assert values(label_two_class([21, 22, 23])) == [NS, NS, S]


def test_two_class_identical_scores_all_non_stressed():
    assert values(label_two_class([17] * 5)) == [NS] * 5


def test_two_class_reference_split():
    v = values(label_two_class(REFERENCE_SCORES))
    assert (v.count(NS), v.count(S)) == (22, 18)


def test_three_class_reference_bounds():
    assert three_class_bounds(22.0, 7.15) == (18, 26)
    labels = values(label_three_class([18, 19, 26, 27], mean=22.0, sd=7.15))
    assert labels == [NS, MS, MS, S]


def test_three_class_reference_split():
    v = values(label_three_class(REFERENCE_SCORES))
    assert (v.count(NS), v.count(MS), v.count(S)) == (12, 19, 9)


def test_single_subject_is_non_stressed():
    assert values(label_three_class([31])) == [NS]
    assert values(label_two_class([31])) == [NS]


def test_empty_cohort_and_bad_scores():
    with pytest.raises(CohortEmptyError):
        label_two_class([])
    with pytest.raises(CohortEmptyError):
        label_three_class([])
    with pytest.raises(ConfigError):
        label_two_class([12, 41])
    with pytest.raises(ConfigError):
        label_three_class([12, 2.5])


@given(scores_st, st.randoms())
def test_labeling_is_permutation_equivariant(scores, rnd):
    perm = list(range(len(scores)))
    rnd.shuffle(perm)
    shuffled = [scores[i] for i in perm]
    for scheme in Scheme:
        base = values(label_scores(scores, scheme))
        assert values(label_scores(shuffled, scheme)) == [base[i] for i in perm]


@given(scores_st, st.integers(-40, 40))
def test_two_class_shift_invariance(scores, c):
    shifted = [s + c for s in scores]
    if min(shifted) < 0 or max(shifted) > 40:
        return
    assert values(label_two_class(shifted)) == values(label_two_class(scores))


def test_three_class_intervals_partition_scale_exhaustively():
    for mu in np.arange(0.0, 40.01, 0.25):
        for sigma in np.arange(2.0, 14.01, 0.25):
            labels = values(label_three_class(list(range(41)), mean=mu, sd=sigma))
            idx = [Scheme.THREE.classes.index(v) for v in labels]
            # each score gets exactly one class and classes never go backwards
            assert len(idx) == 41 and all(a <= b for a, b in zip(idx, idx[1:]))
            ns_max, ms_max = three_class_bounds(mu, sigma)
            assert ns_max == math.ceil(mu - sigma / 2) - 1 and ms_max == math.ceil(mu + sigma / 2)
            assert ns_max < ms_max


def test_class_label_consistency():
    with pytest.raises(ConfigError):
        ClassLabel(Scheme.TWO, MS)
    assert ClassLabel.from_index(Scheme.THREE, 1).value is MS
    assert ClassLabel(Scheme.THREE, S).index == 2


def test_band_ranges_and_gap():
    assert [b.value for b in BANDS] == [(0, 4), (4, 7), (8, 12), (12, 30), (30, 50)]
    f = np.array([3.99, 4.0, 7.5, 8.0, 49.9, 50.0])
    assert Band.THETA.contains(f).tolist() == [False, True, False, False, False, False]
    assert not any(b.contains(7.5) for b in BANDS)
    assert Band.from_name("Theta") is Band.THETA


def test_signal_channel_validation():
    with pytest.raises(ConfigError):
        SignalChannel([1.0, np.nan], 256.0, "x")
    with pytest.raises(ConfigError):
        SignalChannel([1.0], 0.0, "x")
    ch = SignalChannel([1.0, 2.0], 256.0, "x")
    with pytest.raises(ValueError):
        ch.samples[0] = 5.0


def test_eeg_recording_reorders_and_validates():
    chans = [SignalChannel(np.full(512, i, dtype=float), 256.0, n)
             for i, n in enumerate(["TP10", "AF8", "AF7", "TP9"])]
    eeg = EegRecording(tuple(chans))
    assert [c.name for c in eeg.channels] == ["TP9", "AF7", "AF8", "TP10"]
    assert eeg.channel("TP9").samples[0] == 3.0 and eeg.duration_seconds == 2.0
    with pytest.raises(ConfigError):
        EegRecording(tuple(chans[:3]))
    with pytest.raises(ConfigError):
        EegRecording(tuple(chans[:3]) + (SignalChannel(np.zeros(10), 256.0, "TP9"),))
    with pytest.raises(ConfigError):
        EegRecording(tuple(chans), expected_duration_s=180.0)


def test_feature_name_round_trip():
    for text in ("DASM:EEG:theta:TP9-TP10", "Pmean:EEG:alpha:AF7", "SdMar:GSR:-:-"):
        assert str(FeatureName.parse(text)) == text
    with pytest.raises(ConfigError):
        FeatureName.parse("nonsense")


def _ds(labels=(0, 1, 0, 1), names=("K:GSR:-:-", "K:PPG:-:-"), ids=None):
    n = len(labels)
    return LabeledDataset(ids or tuple(f"s{i}" for i in range(n)), np.arange(n * len(names), dtype=float)
                          .reshape(n, len(names)), names, labels, Scheme.TWO)


def test_labeled_dataset_invariants():
    with pytest.raises(ConfigError):
        LabeledDataset(("a", "b"), np.zeros((3, 1)), ("K:GSR:-:-",), [0, 1], Scheme.TWO)
    with pytest.raises(ConfigError):
        LabeledDataset(("a",), np.array([[np.inf]]), ("K:GSR:-:-",), [0], Scheme.TWO)
    with pytest.raises(ConfigError):
        _ds(names=("K:GSR:-:-", "K:GSR:-:-"))
    with pytest.raises(ConfigError):
        _ds(labels=(0, 2, 0, 1))
    d = _ds()
    assert d.modality("PPG").feature_names == ("K:PPG:-:-",)
    assert [str(c) for c in d.class_labels] == ["NonStressed", "Stressed"] * 2


def test_hstack_alignment():
    a, b = _ds(names=("K:GSR:-:-",)), _ds(names=("K:PPG:-:-",))
    assert hstack([a, b]).n_features == 2
    with pytest.raises(AlignmentError):
        hstack([a, _ds(labels=(1, 1, 0, 0), names=("K:PPG:-:-",))])
    with pytest.raises(AlignmentError):
        hstack([a, _ds(names=("K:PPG:-:-",), ids=("x", "y", "z", "w"))])


@settings(max_examples=25)
@given(st.lists(st.integers(0, 40), min_size=2, max_size=30))
def test_relabel_matches_direct_labeling(scores):
    d = LabeledDataset(tuple(f"s{i}" for i in range(len(scores))), np.zeros((len(scores), 1)),
                       ("K:GSR:-:-",), [0] * len(scores), Scheme.TWO, tuple(scores))
    three = d.relabel(Scheme.THREE)
    assert three.labels.tolist() == [lab.index for lab in label_three_class(scores)]

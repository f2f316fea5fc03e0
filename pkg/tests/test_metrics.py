import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedval.data import GROUP_A, GROUP_D, TabularDataset
from fedval.errors import ConfigError, MissingGroupError, MissingPositivesError
from fedval.metrics import (
    ObjectiveSpec,
    ScoreVector,
    accuracy,
    composite_score,
    eod,
    objective_score,
    spd,
)
from fedval.model import classify
from helpers import UNIT_MODEL, coverage_dataset, pattern_dataset, random_params


def counting_oracle(preds, labels, groups):
    """Brute-force recount of all three metrics from prediction tuples."""
    rows = list(zip(preds, labels, groups))
    acc = sum(1 for p, y, _ in rows if p == y) / len(rows)

    def pos_rate(g):
        sub = [p for p, _, gg in rows if gg == g]
        return sum(sub) / len(sub)

    def tpr(g):
        sub = [p for p, y, gg in rows if gg == g and y == 1]
        return sum(sub) / len(sub)

    return acc, abs(pos_rate(GROUP_A) - pos_rate(GROUP_D)), abs(tpr(GROUP_A) - tpr(GROUP_D))


# ---------------------------------------------------------------------------
# point fixtures with hand-counted values
# ---------------------------------------------------------------------------

# 8 rows: (pred, label, group); designed so every cell is populated
EIGHT = dict(
    preds=[1, 0, 1, 1, 0, 0, 1, 0],
    labels=[1, 0, 0, 1, 1, 0, 1, 1],
    groups=[GROUP_A, GROUP_A, GROUP_A, GROUP_A, GROUP_D, GROUP_D, GROUP_D, GROUP_D],
)
# by hand:
#   correct = rows 0,1,3,5,6 -> acc = 5/8
#   pos rate a = 3/4, pos rate d = 1/4 -> spd = 0.5
#   tpr a = 2/2, tpr d = 1/3          -> eod = 2/3


def test_accuracy_hand_count():
    ds = pattern_dataset(**EIGHT)
    assert accuracy(UNIT_MODEL, ds) == 5 / 8


def test_spd_hand_count():
    ds = pattern_dataset(**EIGHT)
    assert spd(UNIT_MODEL, ds) == 0.5


def test_eod_hand_count():
    ds = pattern_dataset(**EIGHT)
    assert eod(UNIT_MODEL, ds) == 1 - 1 / 3  # tpr_a = 2/2, tpr_d = 1/3


def test_metrics_match_counting_oracle_exactly():
    rng = np.random.default_rng(123)
    for _ in range(25):
        n = int(rng.integers(8, 60))
        preds = rng.integers(0, 2, n).tolist()
        labels = rng.integers(0, 2, n).tolist()
        groups = rng.integers(0, 2, n).tolist()
        # ensure defined: both groups present, positives in both groups
        preds[:4] = [1, 0, 1, 0]
        labels[:4] = [1, 1, 1, 1]
        groups[:4] = [GROUP_A, GROUP_A, GROUP_D, GROUP_D]
        ds = pattern_dataset(preds, labels, groups)
        got_preds = classify(UNIT_MODEL, ds.features)
        assert got_preds.tolist() == preds  # pattern encoding is faithful
        acc, s, e = counting_oracle(preds, labels, groups)
        assert accuracy(UNIT_MODEL, ds) == acc
        assert spd(UNIT_MODEL, ds) == s
        assert eod(UNIT_MODEL, ds) == e


def test_spd_is_symmetric_in_groups():
    ds = pattern_dataset(**EIGHT)
    flipped = TabularDataset(ds.features, ds.labels, 1 - ds.sensitive)
    assert spd(UNIT_MODEL, ds) == spd(UNIT_MODEL, flipped)


def test_spd_zero_for_identical_group_behavior():
    preds = [1, 0, 1, 0]
    labels = [1, 0, 1, 1]
    groups = [GROUP_A, GROUP_A, GROUP_D, GROUP_D]
    ds = pattern_dataset(preds, labels, groups)
    assert spd(UNIT_MODEL, ds) == 0.0


def test_spd_missing_group_names_the_gap():
    ds = pattern_dataset([1, 0], [1, 0], [GROUP_A, GROUP_A])
    with pytest.raises(MissingGroupError, match="'d'"):
        spd(UNIT_MODEL, ds)


def test_eod_missing_positives_is_specific_error():
    # both groups present, but group d has no positive labels
    ds = pattern_dataset([1, 0, 1], [1, 1, 0], [GROUP_A, GROUP_A, GROUP_D])
    with pytest.raises(MissingPositivesError):
        eod(UNIT_MODEL, ds)
    # spd is still well-defined on the same data: rates 1/2 vs 1/1
    assert spd(UNIT_MODEL, ds) == 0.5


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_metric_ranges_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 50))
    preds = rng.integers(0, 2, n).tolist()
    labels = rng.integers(0, 2, n).tolist()
    groups = rng.integers(0, 2, n).tolist()
    preds[:4] = [1, 0, 0, 1]
    labels[:4] = [1, 1, 1, 1]
    groups[:4] = [GROUP_A, GROUP_A, GROUP_D, GROUP_D]
    ds = pattern_dataset(preds, labels, groups)
    for metric in (accuracy, spd, eod):
        v = metric(UNIT_MODEL, ds)
        assert 0.0 <= v <= 1.0


# ---------------------------------------------------------------------------
# objective scores (higher is better)
# ---------------------------------------------------------------------------


def test_objective_score_transforms():
    ds = pattern_dataset(**EIGHT)
    assert objective_score("accuracy", UNIT_MODEL, ds) == 5 / 8
    assert objective_score("spd", UNIT_MODEL, ds) == 0.5  # 1 - 0.5
    assert objective_score("eod", UNIT_MODEL, ds) == pytest.approx(1 / 3)


def test_objective_score_unknown_kind():
    ds = pattern_dataset(**EIGHT)
    with pytest.raises(ConfigError, match="f1"):
        objective_score("f1", UNIT_MODEL, ds)


# ---------------------------------------------------------------------------
# ObjectiveSpec and composites
# ---------------------------------------------------------------------------


def test_objective_spec_normalizes_kinds():
    spec = ObjectiveSpec((("Accuracy", 1.0), ("SPD", 2.0)))
    assert spec.kinds == ("accuracy", "spd")


def test_objective_spec_rejects_duplicates_and_bad_weights():
    with pytest.raises(ConfigError):
        ObjectiveSpec((("accuracy", 1.0), ("accuracy", 2.0)))
    with pytest.raises(ConfigError):
        ObjectiveSpec((("accuracy", -1.0),))
    with pytest.raises(ConfigError):
        ObjectiveSpec((("accuracy", 0.0),))  # weights must sum positive
    with pytest.raises(ConfigError):
        ObjectiveSpec(())


def test_composite_is_weighted_sum():
    ds = pattern_dataset(**EIGHT)
    spec = ObjectiveSpec((("accuracy", 2.0), ("spd", 1.0), ("eod", 0.5)))
    expected = 2.0 * (5 / 8) + 1.0 * 0.5 + 0.5 * (1 / 3)
    assert composite_score(UNIT_MODEL, ds, spec) == pytest.approx(expected, abs=1e-15)


def test_composite_single_objective_equals_score():
    ds = pattern_dataset(**EIGHT)
    spec = ObjectiveSpec((("eod", 3.0),))
    assert composite_score(UNIT_MODEL, ds, spec) == pytest.approx(3.0 * (1 / 3))


def test_composite_on_trained_model_is_positive():
    ds = coverage_dataset(120, 3, seed=4)
    spec = ObjectiveSpec((("accuracy", 1.0), ("spd", 1.0), ("eod", 1.0)))
    assert composite_score(random_params(3, seed=1), ds, spec) > 0.0


# ---------------------------------------------------------------------------
# ScoreVector
# ---------------------------------------------------------------------------


def test_score_vector_alignment_checks():
    sv = ScoreVector((0, 1), (0.5, 0.7), ({"accuracy": 0.5}, {"accuracy": 0.7}))
    assert len(sv) == 2
    with pytest.raises(ConfigError):
        ScoreVector((0, 0), (0.5, 0.7), ({}, {}))  # duplicate ids
    with pytest.raises(ConfigError):
        ScoreVector((0, 1), (0.5,), ({},))  # misaligned lengths
    with pytest.raises(ConfigError):
        ScoreVector((0, 1), (0.5, float("nan")), ({}, {}))
    with pytest.raises(ConfigError):
        ScoreVector((0, 1), (0.5, -0.1), ({}, {}))


def test_metrics_are_row_permutation_invariant():
    ds = coverage_dataset(53, 3, seed=77)
    params = random_params(3, seed=5)
    perm = np.random.default_rng(3).permutation(53)
    shuffled = ds.subset(perm)
    assert accuracy(params, ds) == accuracy(params, shuffled)
    assert spd(params, ds) == spd(params, shuffled)
    assert eod(params, ds) == eod(params, shuffled)


def test_composite_score_is_linear_in_weights():
    ds = coverage_dataset(40, 2, seed=21)
    params = random_params(2, seed=8)
    base = (("accuracy", 0.7), ("spd", 1.3), ("eod", 0.4))
    score = composite_score(params, ds, ObjectiveSpec(base))
    for alpha in (0.1, 3.0, 100.0):
        scaled = ObjectiveSpec(tuple((k, alpha * w) for k, w in base))
        assert composite_score(params, ds, scaled) == pytest.approx(alpha * score, rel=1e-12)

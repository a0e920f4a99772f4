import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eyecontact.errors import ConfigError, DimensionMismatchError
from eyecontact.evaluation import (
    BUCKET_LABELS,
    ConfusionCounts,
    ExperimentConfig,
    bucket_head_pose,
    bucket_id,
    confusion_matrix,
    failure_accounting,
    lopo_folds,
    mcc,
    process_dataset,
    run_cross_experiment,
    run_within_experiment,
)
from eyecontact.pipeline import CATEGORIES, VisibilityCategory
from eyecontact.synthgen import GeneratorConfig, generate_dataset

LOW_NOISE = dict(gaze_noise_deg=2.0, feature_noise=0.05)


def direct_mcc(tp, fp, tn, fn):
    d = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    return 0.0 if d == 0 else (tp * tn - fp * fn) / math.sqrt(d)


# --- confusion / MCC ---------------------------------------------------------


def test_confusion_examples():
    assert confusion_matrix([1, 1, 0], [1, 1, 0]) == ConfusionCounts(tp=2, fp=0, tn=1, fn=0)
    g = np.array([1, 0, 1, 1, 0], bool)
    c = confusion_matrix(~g, g)
    assert c.tp == 0 and c.tn == 0
    pred = [1, 0, 1, 0, 1, 1, 0, 1, 0, 1]
    gt = [1, 0, 0, 1, 1, 1, 0, 0, 0, 1]
    assert confusion_matrix(pred, gt) == ConfusionCounts(tp=4, fp=2, tn=3, fn=1)


def test_confusion_errors():
    with pytest.raises(DimensionMismatchError):
        confusion_matrix([1, 0], [1])
    with pytest.raises(ValueError):
        confusion_matrix([], [])
    with pytest.raises(ValueError):
        ConfusionCounts(tp=-1)


def test_mcc_examples():
    assert mcc(ConfusionCounts(tp=5, tn=5)) == 1.0
    assert mcc(ConfusionCounts(fp=5, fn=5)) == -1.0
    assert mcc(ConfusionCounts(tp=4, tn=3, fp=1, fn=2)) == pytest.approx(0.40825, abs=1e-5)
    assert mcc(ConfusionCounts(tp=3, fp=2)) == 0.0
    with pytest.raises(ValueError):
        mcc(ConfusionCounts())


def test_mcc_matches_formula_on_grid():
    for tp, fp, tn, fn in itertools.product(range(7), repeat=4):
        c = ConfusionCounts(tp, fp, tn, fn)
        if c.total == 0:
            continue
        assert abs(mcc(c) - direct_mcc(tp, fp, tn, fn)) <= 1e-12


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60))
def test_mcc_flip_symmetry(pairs):
    p = np.array([a for a, _ in pairs])
    g = np.array([b for _, b in pairs])
    assert mcc(confusion_matrix(~p, ~g)) == pytest.approx(mcc(confusion_matrix(p, g)), abs=1e-12)
    if g.any() and not g.all():
        assert mcc(confusion_matrix(g, g)) == 1.0
        assert mcc(confusion_matrix(~g, g)) == -1.0
    assert -1.0 <= mcc(confusion_matrix(p, g)) <= 1.0


# --- folds and buckets -------------------------------------------------------


def test_lopo_examples():
    assert lopo_folds(["B", "A", "C", "A"]) == [(("B", "C"), "A"), (("A", "C"), "B"), (("A", "B"), "C")]
    with pytest.raises(ConfigError):
        lopo_folds(["A", "A"])


@given(st.lists(st.sampled_from("ABCDEFGH"), min_size=2, max_size=80).filter(lambda x: len(set(x)) >= 2))
def test_lopo_partition(persons):
    folds = lopo_folds(persons)
    tests = [t for _, t in folds]
    assert sorted(tests) == sorted(set(persons))
    for train, test in folds:
        assert test not in train and set(train) | {test} == set(persons)
    # each frame lands in exactly one test set
    hits = [sum(p == t for t in tests) for p in persons]
    assert hits == [1] * len(persons)


def test_bucket_examples():
    assert bucket_head_pose(0, 0) == (2, 2)
    assert bucket_id(*bucket_head_pose(15, 0)) == "pitch[10,20)_yaw[-10,10)"
    assert bucket_head_pose(0, 25) == (2, 4)
    assert bucket_head_pose(-20, 10) == (1, 3)
    assert bucket_head_pose(-20.000001, -10) == (0, 2)
    assert bucket_head_pose(-10.000001, 20) == (1, 4)
    with pytest.raises(ValueError):
        bucket_head_pose(float("nan"), 0)


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_bucket_is_total(p, y):
    r, c = bucket_head_pose(p, y)
    assert 0 <= r < 5 and 0 <= c < 5
    lo = [-np.inf, -20, -10, 10, 20]
    hi = [-20, -10, 10, 20, np.inf]
    assert lo[r] <= p < hi[r] and lo[c] <= y < hi[c]
    assert BUCKET_LABELS[r] in bucket_id(r, c)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(label_source="human")
    with pytest.raises(ConfigError):
        ExperimentConfig(breakdown="age")


# --- experiments -------------------------------------------------------------


@pytest.fixture(scope="module")
def low_noise():
    recs = generate_dataset(GeneratorConfig(n_persons=10, frames_per_person=500, seed=0, **LOW_NOISE))
    return process_dataset(recs)


@pytest.fixture(scope="module")
def gt_report(low_noise):
    return run_within_experiment(low_noise, ExperimentConfig(label_source="ground-truth"))


def test_within_ground_truth_low_noise(gt_report):
    assert gt_report.n_folds == 10
    assert gt_report.mean >= 0.9


def test_within_clustered_close_to_ground_truth(low_noise, gt_report):
    rep = run_within_experiment(low_noise, ExperimentConfig(label_source="clustered"))
    assert abs(rep.mean - gt_report.mean) <= 0.1


def test_report_mean_sd_consistent(gt_report):
    vals = [f["mcc"] for f in gt_report.cells[0].folds]
    assert len(vals) == 10
    assert gt_report.cells[0].mean == pytest.approx(np.mean(vals), abs=1e-12)
    assert gt_report.cells[0].sd == pytest.approx(np.std(vals, ddof=1), abs=1e-12)
    assert "n-1" in gt_report.to_dict()["sd_convention"]


def test_every_frame_accounted(low_noise, gt_report):
    fr = gt_report.frames
    assert fr["total"] == len(low_noise)
    assert fr["evaluated"] + sum(fr["excluded"].values()) + sum(fr["unevaluated"].values()) == fr["total"]
    assert fr["evaluated"] == sum(c.n_test for c in gt_report.cells)


def test_report_is_deterministic(low_noise):
    cfg = ExperimentConfig(label_source="clustered", breakdown="visibility-category", seed=3)
    a = run_within_experiment(low_noise, cfg).to_dict()
    b = run_within_experiment(low_noise, cfg).to_dict()
    assert a == b


def test_single_class_test_person_marked():
    recs = generate_dataset(GeneratorConfig(n_persons=3, frames_per_person=60, seed=1, **LOW_NOISE))
    # person P02 only ever looks at the device
    recs = [r for r in recs if r.person_id != "P02" or r.gt_eye_contact]
    rep = run_within_experiment(recs, ExperimentConfig(label_source="ground-truth"))
    fold = next(f for f in rep.cells[0].folds if f["test_person"] == "P02")
    assert fold["reason"] == "single-class" and fold["mcc"] == 0.0


def test_untrainable_cell_marked_not_fatal():
    recs = generate_dataset(GeneratorConfig(n_persons=3, frames_per_person=60, seed=1, **LOW_NOISE))
    recs = [r for r in recs if r.gt_eye_contact]
    rep = run_within_experiment(recs, ExperimentConfig(label_source="ground-truth"))
    cell = rep.cells[0]
    assert cell.reason == "untrainable" and cell.mean == 0.0
    assert all(f["reason"] == "single-class-training" for f in cell.folds)


def test_category_breakdown_names_and_no_face():
    recs = generate_dataset(GeneratorConfig(n_persons=3, frames_per_person=150, seed=2))
    rep = run_within_experiment(recs, ExperimentConfig(label_source="ground-truth", breakdown="visibility-category"))
    assert [c.cell_id for c in rep.cells] == [c.value for c in CATEGORIES]
    no_face = rep.cell("No face")
    assert no_face.mean == 0.0 and no_face.reason == "no-usable-frames" and no_face.n_excluded > 0


def test_headpose_breakdown_has_25_cells(low_noise):
    rep = run_within_experiment(low_noise, ExperimentConfig(label_source="ground-truth", breakdown="headpose-bucket"))
    assert len(rep.cells) == 25
    assert len({c.cell_id for c in rep.cells}) == 25
    assert rep.cell("pitch[-10,10)_yaw[-10,10)").n_test > 0


def test_cross_same_dataset_at_least_within(low_noise, gt_report):
    rep = run_cross_experiment([pf.record for pf in low_noise], [pf.record for pf in low_noise],
                               ExperimentConfig(label_source="ground-truth"))
    assert rep.n_folds == 1
    assert rep.cells[0].mcc >= gt_report.mean


def test_cross_dimension_mismatch():
    a = generate_dataset(GeneratorConfig(n_persons=2, frames_per_person=10, feature_dim=8))
    b = generate_dataset(GeneratorConfig(n_persons=2, frames_per_person=10, feature_dim=9))
    with pytest.raises(DimensionMismatchError):
        run_cross_experiment(a, b)


def test_cross_shift_degrades():
    cfg = GeneratorConfig(n_persons=6, frames_per_person=200, seed=0)
    train = generate_dataset(cfg)
    same = generate_dataset(cfg.replace(seed=1000))
    shifted = generate_dataset(cfg.replace(seed=1000, yaw_mean=20.0))
    ec = ExperimentConfig(label_source="ground-truth")
    assert run_cross_experiment(train, shifted, ec).cells[0].mcc < run_cross_experiment(train, same, ec).cells[0].mcc


# --- failure accounting ------------------------------------------------------


def test_failure_accounting_examples():
    recs = generate_dataset(GeneratorConfig(n_persons=2, frames_per_person=200, seed=3))
    acc = failure_accounting(recs)
    assert acc["No face"]["rate"] == 1.0
    assert acc["Whole face all landmarks"]["rate"] == 0.0
    assert sum(v["total"] for v in acc.values()) == len(recs)
    assert acc["No face"]["reasons"] == {"insufficient-landmarks": acc["No face"]["excluded"]}


def test_failure_accounting_detection_rate():
    whole = (1.0, 0, 0, 0, 0, 0, 0, 0)
    cfg = GeneratorConfig(n_persons=4, frames_per_person=500, seed=4, visibility_weights=whole,
                          detection_failure=(0.3, 0, 0, 0, 0, 0, 0, 0))
    acc = failure_accounting(generate_dataset(cfg))[VisibilityCategory.WHOLE_ALL.value]
    n = acc["total"]
    assert abs(acc["rate"] - 0.3) <= 3 * math.sqrt(0.3 * 0.7 / n)


# --- ground-truth baseline dominance -----------------------------------------


def test_ground_truth_baseline_dominates_on_average():
    gt, cl = [], []
    for seed in range(20):
        frames = process_dataset(generate_dataset(GeneratorConfig(n_persons=4, frames_per_person=150, seed=seed)))
        gt.append(run_within_experiment(frames, ExperimentConfig(label_source="ground-truth", seed=seed)).mean)
        cl.append(run_within_experiment(frames, ExperimentConfig(label_source="clustered", seed=seed)).mean)
    assert np.mean(gt) >= np.mean(cl) - 0.02

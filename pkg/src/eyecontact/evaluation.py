"""Evaluation protocol: MCC, leave-one-person-out CV, breakdowns, transfer.

Frames that fail the pipeline preconditions (too few landmarks, pose
solver failure, missing inputs) never enter an MCC; they are counted per
reason in every report. Folds and cells that cannot be trained (a single
label class, no dense gaze cluster) score MCC 0 and carry a reason.
"""
import csv
import io
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .classifier import SvmHyperParams, predict_batch, train_svm
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateGeometryError,
    DegenerateTrainingError,
    DimensionMismatchError,
    EyeContactError,
    InsufficientCorrespondencesError,
    MissingInputError,
    NoClusterError,
    RollUndefinedError,
)
from .pipeline import CATEGORIES, ClusterParams, FrameRecord, GazeSample, process_frame, training_labels_from_clusters

LABEL_SOURCES = ("clustered", "ground-truth")
BREAKDOWNS = ("none", "visibility-category", "headpose-bucket")
SD_CONVENTION = "sample (n-1) across evaluated folds; 0 when fewer than two"

BUCKET_EDGES = (-20.0, -10.0, 10.0, 20.0)
BUCKET_LABELS = ("(-inf,-20)", "[-20,-10)", "[-10,10)", "[10,20)", "[20,inf)")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)


def confusion_matrix(pred, gt) -> ConfusionCounts:
    p = np.asarray(pred, dtype=bool)
    g = np.asarray(gt, dtype=bool)
    if p.shape != g.shape or p.ndim != 1:
        raise DimensionMismatchError(f"predictions {p.shape} and ground truth {g.shape} differ")
    if len(p) == 0:
        raise ValueError("empty prediction list")
    return ConfusionCounts(
        tp=int(np.sum(p & g)), fp=int(np.sum(p & ~g)), tn=int(np.sum(~p & ~g)), fn=int(np.sum(~p & g))
    )


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any marginal is empty."""
    if c.total <= 0:
        raise ValueError("MCC of an empty confusion matrix")
    denom = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if denom == 0:
        return 0.0
    return float((c.tp * c.tn - c.fp * c.fn) / np.sqrt(float(denom)))


def lopo_folds(dataset) -> list[tuple[tuple[str, ...], str]]:
    """One (train persons, test person) pair per person, in sorted person order.

    ``dataset`` may be FrameRecords or plain person ids.
    """
    ids = sorted({r.person_id if isinstance(r, FrameRecord) else str(r) for r in dataset})
    if len(ids) < 2:
        raise ConfigError(f"leave-one-person-out needs at least 2 persons, got {len(ids)}")
    return [(tuple(p for p in ids if p != test), test) for test in ids]


def bucket_head_pose(pitch_n: float, yaw_n: float) -> tuple[int, int]:
    """(row, col) in the 5x5 grid; row indexes pitch, col indexes yaw.

    Per axis: (-inf,-20), [-20,-10), [-10,10), [10,20), [20,inf).
    """
    if not (np.isfinite(pitch_n) and np.isfinite(yaw_n)):
        raise ValueError("head pose angles must be finite")
    row = int(np.searchsorted(BUCKET_EDGES, pitch_n, side="right"))
    col = int(np.searchsorted(BUCKET_EDGES, yaw_n, side="right"))
    return row, col


def bucket_id(row: int, col: int) -> str:
    return f"pitch{BUCKET_LABELS[row]}_yaw{BUCKET_LABELS[col]}"


@dataclass(frozen=True)
class ExperimentConfig:
    label_source: str = "clustered"
    breakdown: str = "none"
    cluster: ClusterParams = ClusterParams()
    svm: SvmHyperParams = SvmHyperParams()
    seed: int = 0
    per_person_clustering: bool = False

    def __post_init__(self):
        if self.label_source not in LABEL_SOURCES:
            raise ConfigError(f"label_source must be one of {LABEL_SOURCES}")
        if self.breakdown not in BREAKDOWNS:
            raise ConfigError(f"breakdown must be one of {BREAKDOWNS}")

    @property
    def svm_params(self) -> SvmHyperParams:
        return SvmHyperParams(self.svm.lam, self.svm.epochs, self.seed, self.svm.class_weight)

    @property
    def cluster_params(self) -> ClusterParams:
        c = self.cluster
        return ClusterParams(c.eps, c.min_samples, c.max_points, self.seed)


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProcessedFrame:
    record: FrameRecord
    sample: GazeSample | None
    reason: str | None  # exclusion reason when sample is None

    @property
    def usable(self) -> bool:
        return self.sample is not None


def process_dataset(records) -> list[ProcessedFrame]:
    out = []
    for rec in records:
        reason = None
        sample = None
        try:
            sample = process_frame(rec)
        except InsufficientCorrespondencesError:
            reason = "insufficient-landmarks"
        except ConvergenceError:
            reason = "pose-not-converged"
        except MissingInputError:
            reason = "missing-gaze-estimate"
        except DegenerateGeometryError:
            reason = "degenerate-geometry"
        except RollUndefinedError:
            reason = "roll-undefined"
        if sample is not None and rec.feature is None:
            sample, reason = None, "missing-feature"
        if sample is not None and rec.gt_eye_contact is None:
            sample, reason = None, "missing-ground-truth"
        out.append(ProcessedFrame(rec, sample, reason))
    return out


def failure_accounting(dataset, processed: list[ProcessedFrame] | None = None) -> dict:
    """Per visibility category: total frames, excluded frames, rate and reasons."""
    if processed is None:
        processed = process_dataset(dataset)
    acc = {c.value: {"total": 0, "excluded": 0, "rate": 0.0, "reasons": Counter()} for c in CATEGORIES}
    for pf in processed:
        entry = acc[pf.record.visibility_category.value]
        entry["total"] += 1
        if not pf.usable:
            entry["excluded"] += 1
            entry["reasons"][pf.reason] += 1
    for entry in acc.values():
        entry["rate"] = entry["excluded"] / entry["total"] if entry["total"] else 0.0
        entry["reasons"] = dict(sorted(entry["reasons"].items()))
    return acc


def _cell_of(pf: ProcessedFrame, breakdown: str) -> str | None:
    if breakdown == "none":
        return "all"
    if breakdown == "visibility-category":
        return pf.record.visibility_category.value
    if pf.sample is None:
        return None
    return bucket_id(*bucket_head_pose(pf.sample.pitch_n, pf.sample.yaw_n))


def cell_ids(breakdown: str) -> list[str]:
    if breakdown == "none":
        return ["all"]
    if breakdown == "visibility-category":
        return [c.value for c in CATEGORIES]
    return [bucket_id(r, c) for r in range(5) for c in range(5)]


# ---------------------------------------------------------------------------
# training / scoring
# ---------------------------------------------------------------------------


def _train(frames: list[ProcessedFrame], cfg: ExperimentConfig):
    """Train on usable frames; returns (model, n_used) or raises EyeContactError."""
    if not frames:
        raise DegenerateTrainingError("no training frames")
    X = np.array([pf.record.feature for pf in frames])
    if cfg.label_source == "ground-truth":
        labels = np.array([pf.record.gt_eye_contact for pf in frames], dtype=bool)
        included = np.ones(len(frames), dtype=bool)
    else:
        groups = [pf.record.person_id for pf in frames] if cfg.per_person_clustering else None
        labels, included = training_labels_from_clusters([pf.sample for pf in frames], cfg.cluster_params, groups)
    model = train_svm(X[included], labels[included], cfg.svm_params, label_source=cfg.label_source)
    return model, int(included.sum())


def _failure_reason(exc: EyeContactError) -> str:
    if isinstance(exc, NoClusterError):
        return "no-cluster"
    if isinstance(exc, DegenerateTrainingError):
        return "single-class-training"
    return type(exc).__name__


def _score(model, frames: list[ProcessedFrame]):
    X = np.array([pf.record.feature for pf in frames])
    gt = np.array([pf.record.gt_eye_contact for pf in frames], dtype=bool)
    counts = confusion_matrix(predict_batch(model, X), gt)
    reason = "single-class" if gt.all() or not gt.any() else None
    return counts, mcc(counts), reason


def _counts_dict(c: ConfusionCounts) -> dict:
    return {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn}


def _mean_sd(values) -> tuple[float, float]:
    if not values:
        return 0.0, 0.0
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else 0.0


@dataclass
class CellResult:
    cell_id: str
    n_train: int = 0
    n_test: int = 0
    n_excluded: int = 0
    mcc: float = 0.0
    mean: float = 0.0
    sd: float = 0.0
    reason: str | None = None
    folds: list = field(default_factory=list)
    counts: ConfusionCounts = ConfusionCounts()

    def to_dict(self) -> dict:
        return {
            "cell_id": self.cell_id,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "n_excluded": self.n_excluded,
            "mcc": self.mcc,
            "mean": self.mean,
            "sd": self.sd,
            "reason": self.reason,
            "counts": _counts_dict(self.counts),
            "folds": self.folds,
        }


@dataclass
class ExperimentReport:
    experiment: str
    label_source: str
    breakdown: str
    seed: int
    n_folds: int
    cells: list[CellResult]
    frames: dict
    failure_accounting: dict
    sd_convention: str = SD_CONVENTION

    def cell(self, cell_id: str) -> CellResult:
        for c in self.cells:
            if c.cell_id == cell_id:
                return c
        raise KeyError(cell_id)

    @property
    def fold_mccs(self) -> list[float]:
        """Per-fold MCCs of the single cell of an unbroken-down report."""
        return [f["mcc"] for f in self.cells[0].folds if f["mcc"] is not None]

    @property
    def mean(self) -> float:
        return self.cells[0].mean if len(self.cells) == 1 else float(np.mean([c.mean for c in self.cells]))

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "label_source": self.label_source,
            "breakdown": self.breakdown,
            "seed": self.seed,
            "n_folds": self.n_folds,
            "sd_convention": self.sd_convention,
            "frames": self.frames,
            "failure_accounting": self.failure_accounting,
            "cells": [c.to_dict() for c in self.cells],
        }

    def to_csv(self) -> str:
        return report_dict_to_csv(self.to_dict())


CSV_COLUMNS = ("breakdown_id", "n_train", "n_test", "n_excluded", "mcc", "mean", "sd", "reason")


def report_dict_to_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for c in report["cells"]:
        writer.writerow([c["cell_id"], c["n_train"], c["n_test"], c["n_excluded"],
                         repr(c["mcc"]), repr(c["mean"]), repr(c["sd"]), c["reason"] or ""])
    return buf.getvalue()


def _frame_accounting(processed, evaluated: int, unevaluated: Counter) -> dict:
    excluded = Counter(pf.reason for pf in processed if not pf.usable)
    return {
        "total": len(processed),
        "evaluated": evaluated,
        "excluded": dict(sorted(excluded.items())),
        "unevaluated": dict(sorted(unevaluated.items())),
    }


def _accounting_for_report(processed) -> dict:
    return failure_accounting(None, processed)


def run_within_experiment(dataset, cfg: ExperimentConfig = ExperimentConfig()) -> ExperimentReport:
    """Leave-one-person-out evaluation, optionally inside breakdown cells.

    Clustering and training use only the training split of each fold and
    cell. A fold is evaluated when its held-out person has frames in the
    cell; untrainable folds score 0 and count towards the cell mean.
    """
    processed = dataset if dataset and isinstance(dataset[0], ProcessedFrame) else process_dataset(dataset)
    folds = lopo_folds([pf.record for pf in processed])
    by_cell: dict[str, list[ProcessedFrame]] = {cid: [] for cid in cell_ids(cfg.breakdown)}
    excluded_by_cell = Counter()
    for pf in processed:
        cid = _cell_of(pf, cfg.breakdown)
        if not pf.usable:
            if cid is not None:
                excluded_by_cell[cid] += 1
            continue
        by_cell[cid].append(pf)

    evaluated = 0
    unevaluated = Counter()
    cells = []
    for cid, frames in by_cell.items():
        cell = CellResult(cid, n_train=len(frames), n_excluded=excluded_by_cell[cid])
        fold_mccs = []
        pooled = ConfusionCounts()
        for train_persons, test_person in folds:
            test = [pf for pf in frames if pf.record.person_id == test_person]
            if not test:
                continue
            train = [pf for pf in frames if pf.record.person_id != test_person]
            entry = {"test_person": test_person, "n_train": 0, "n_test": len(test), "mcc": 0.0, "reason": None}
            try:
                model, n_used = _train(train, cfg)
            except EyeContactError as exc:
                entry["reason"] = _failure_reason(exc)
                unevaluated[entry["reason"]] += len(test)
            else:
                counts, value, reason = _score(model, test)
                entry.update(n_train=n_used, mcc=value, reason=reason, counts=_counts_dict(counts))
                pooled = pooled + counts
                evaluated += len(test)
                cell.n_test += len(test)
            fold_mccs.append(entry["mcc"])
            cell.folds.append(entry)
        cell.mean, cell.sd = _mean_sd(fold_mccs)
        cell.counts = pooled
        if pooled.total:
            cell.mcc = mcc(pooled)
        if not cell.folds:
            cell.reason = "no-usable-frames"
        elif pooled.total == 0:
            cell.reason = "untrainable"
        cells.append(cell)

    return ExperimentReport(
        experiment="within",
        label_source=cfg.label_source,
        breakdown=cfg.breakdown,
        seed=cfg.seed,
        n_folds=len(folds),
        cells=cells,
        frames=_frame_accounting(processed, evaluated, unevaluated),
        failure_accounting=_accounting_for_report(processed),
    )


def run_cross_experiment(train_dataset, test_dataset, cfg: ExperimentConfig = ExperimentConfig()) -> ExperimentReport:
    """Train one model on all of ``train_dataset``; score ``test_dataset`` per cell."""
    train_p = process_dataset(train_dataset)
    test_p = process_dataset(test_dataset)
    dims = {len(pf.record.feature) for pf in train_p + test_p if pf.record.feature is not None}
    if len(dims) > 1:
        raise DimensionMismatchError(f"train and test feature dimensions differ: {sorted(dims)}")

    train_frames = [pf for pf in train_p if pf.usable]
    model, train_reason, n_used = None, None, 0
    try:
        model, n_used = _train(train_frames, cfg)
    except EyeContactError as exc:
        train_reason = _failure_reason(exc)

    by_cell: dict[str, list[ProcessedFrame]] = {cid: [] for cid in cell_ids(cfg.breakdown)}
    excluded_by_cell = Counter()
    for pf in test_p:
        cid = _cell_of(pf, cfg.breakdown)
        if not pf.usable:
            if cid is not None:
                excluded_by_cell[cid] += 1
            continue
        by_cell[cid].append(pf)

    evaluated = 0
    unevaluated = Counter()
    cells = []
    for cid, frames in by_cell.items():
        cell = CellResult(cid, n_train=n_used, n_excluded=excluded_by_cell[cid])
        if not frames:
            cell.reason = "no-usable-frames"
        elif model is None:
            cell.reason = train_reason
            unevaluated[train_reason] += len(frames)
        else:
            counts, value, reason = _score(model, frames)
            cell.counts, cell.mcc, cell.mean, cell.reason = counts, value, value, reason
            cell.n_test = len(frames)
            evaluated += len(frames)
        cells.append(cell)

    return ExperimentReport(
        experiment="cross",
        label_source=cfg.label_source,
        breakdown=cfg.breakdown,
        seed=cfg.seed,
        n_folds=1,
        cells=cells,
        frames=_frame_accounting(test_p, evaluated, unevaluated),
        failure_accounting=_accounting_for_report(test_p),
    )

"""Linear SVM trained with Pegasos subgradient descent."""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DatasetFormatError, DegenerateTrainingError, DimensionMismatchError

MODEL_FORMAT_VERSION = 1
LABEL_SOURCES = ("clustered", "ground-truth")


@dataclass(frozen=True)
class SvmHyperParams:
    lam: float = 1e-4
    epochs: int = 20
    seed: int = 0
    class_weight: str | None = None  # None or "balanced"

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError("regularization strength must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.class_weight not in (None, "balanced"):
            raise ConfigError(f"unknown class_weight {self.class_weight!r}")


@dataclass(frozen=True, eq=False)
class EyeContactModel:
    weights: np.ndarray
    bias: float
    feature_dim: int
    n_positive: int = 0
    n_negative: int = 0
    label_source: str = "ground-truth"
    hyperparams: SvmHyperParams = SvmHyperParams()
    objective_trace: tuple = field(default=(), repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.shape != (self.feature_dim,):
            raise DimensionMismatchError(f"weights have shape {w.shape}, feature_dim is {self.feature_dim}")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def hinge_objective(weights, bias, X, y, lam) -> float:
    """lam/2 * ||[w, b]||^2 + mean hinge loss, with y in {-1, +1}."""
    margins = y * (X @ weights + bias)
    return float(0.5 * lam * (weights @ weights + bias * bias) + np.maximum(0.0, 1.0 - margins).mean())


def train_svm(features, labels, hp: SvmHyperParams = SvmHyperParams(),
              label_source: str = "ground-truth") -> EyeContactModel:
    """Fit a linear SVM on boolean labels (True = eye contact).

    The bias is learned as the weight of a constant feature, so it is
    regularized along with the weights. Sample visiting order is a fresh
    seeded permutation per epoch; equal inputs and seed give an identical
    model.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatchError("features must be a 2D array (n_samples, dim)")
    lab = np.asarray(labels, dtype=bool)
    if len(lab) != len(X):
        raise DimensionMismatchError(f"{len(X)} feature rows but {len(lab)} labels")
    n_pos = int(lab.sum())
    n_neg = len(lab) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateTrainingError(f"training labels are single-class ({n_pos} positive, {n_neg} negative)")
    if label_source not in LABEL_SOURCES:
        raise ConfigError(f"unknown label source {label_source!r}")

    y = np.where(lab, 1.0, -1.0)
    Xa = np.ascontiguousarray(np.column_stack([X, np.ones(len(X))]))
    sw = np.ones(len(X))
    if hp.class_weight == "balanced":
        sw = np.where(lab, len(lab) / (2.0 * n_pos), len(lab) / (2.0 * n_neg))
    rng = np.random.default_rng(hp.seed)
    order = np.stack([rng.permutation(len(X)) for _ in range(hp.epochs)]).astype(np.int64)
    history = kernels.pegasos(Xa, y, sw, float(hp.lam), order)

    w_final = history[-1]
    trace = [hinge_objective(np.zeros(X.shape[1]), 0.0, X, y, hp.lam)]
    trace += [hinge_objective(h[:-1], h[-1], X, y, hp.lam) for h in history]
    return EyeContactModel(
        weights=w_final[:-1].copy(),
        bias=float(w_final[-1]),
        feature_dim=X.shape[1],
        n_positive=n_pos,
        n_negative=n_neg,
        label_source=label_source,
        hyperparams=hp,
        objective_trace=tuple(trace),
    )


def decision_value(model: EyeContactModel, feature) -> float:
    f = np.asarray(feature, dtype=np.float64)
    if f.shape != (model.feature_dim,):
        raise DimensionMismatchError(f"feature has shape {f.shape}, model expects ({model.feature_dim},)")
    return float(model.weights @ f + model.bias)


def predict(model: EyeContactModel, feature) -> bool:
    """Eye contact iff the decision value is >= 0 (ties count as contact)."""
    return decision_value(model, feature) >= 0.0


def predict_batch(model: EyeContactModel, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.feature_dim:
        raise DimensionMismatchError(f"features have shape {X.shape}, model expects (n, {model.feature_dim})")
    return X @ model.weights + model.bias >= 0.0


def model_to_dict(model: EyeContactModel) -> dict:
    hp = model.hyperparams
    return {
        "version": MODEL_FORMAT_VERSION,
        "feature_dim": model.feature_dim,
        "weights": [float(w) for w in model.weights],
        "bias": model.bias,
        "label_source": model.label_source,
        "hyperparams": {"lam": hp.lam, "epochs": hp.epochs, "class_weight": hp.class_weight},
        "seed": hp.seed,
        "n_positive": model.n_positive,
        "n_negative": model.n_negative,
    }


def model_from_dict(d: dict) -> EyeContactModel:
    if d.get("version") != MODEL_FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported model version {d.get('version')!r}")
    try:
        hp = SvmHyperParams(seed=int(d["seed"]), **d["hyperparams"])
        return EyeContactModel(
            weights=np.asarray(d["weights"], dtype=np.float64),
            bias=float(d["bias"]),
            feature_dim=int(d["feature_dim"]),
            n_positive=int(d.get("n_positive", 0)),
            n_negative=int(d.get("n_negative", 0)),
            label_source=d["label_source"],
            hyperparams=hp,
        )
    except (KeyError, TypeError) as exc:
        raise DatasetFormatError(f"malformed model document: {exc}") from exc

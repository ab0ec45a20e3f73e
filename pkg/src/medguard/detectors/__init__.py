"""Detector families behind one fit / score / flag contract (higher score = more anomalous).

Scaling is part of the fitted model: tree, neighbour, forest and kernel
detectors standardize their inputs, the two networks min-max scale them.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..datamodel import DetectorSpec, FeatureMatrix, Family, TrainedModel
from ..preprocess import ScalerStats, minmax_scale, standard_scale
from ..rng import Rng
from .base import ConvergenceError, DetectorError, check_binary
from .gbdt import GbdtModel, gbdt_fit, gbdt_score
from .iforest import IsoForestModel, c_factor, isoforest_fit, isoforest_score
from .knn import KnnModel, knn_fit, knn_score
from .neural import NeuralNetModel, kl_divergence, loss_and_grads, neural_fit, reconstruction_error
from .ocsvm import OcsvmModel, ocsvm_fit, ocsvm_score
from .thresholds import percentile_threshold, quota_flags, threshold_flags

MODEL_FORMAT = "medguard-model"
MODEL_VERSION = 1

_PARAM_TYPES = {
    Family.GBDT: GbdtModel, Family.KNN: KnnModel, Family.ISOFOREST: IsoForestModel,
    Family.OCSVM: OcsvmModel, Family.AUTOENCODER: NeuralNetModel, Family.VAE: NeuralNetModel,
}
_MINMAX = (Family.AUTOENCODER, Family.VAE)

__all__ = [
    "ConvergenceError", "DetectorError", "fit_detector", "score", "flag", "save_model", "load_model",
    "gbdt_fit", "gbdt_score", "knn_fit", "knn_score", "isoforest_fit", "isoforest_score", "c_factor",
    "ocsvm_fit", "ocsvm_score", "neural_fit", "reconstruction_error", "loss_and_grads", "kl_divergence",
    "threshold_flags", "quota_flags", "percentile_threshold",
]


def _scale(family: Family, X: FeatureMatrix, stats=None):
    return (minmax_scale if family in _MINMAX else standard_scale)(X, stats)


def _raw_scores(family: Family, params, x: np.ndarray) -> np.ndarray:
    if family is Family.GBDT:
        return gbdt_score(params, x)
    if family is Family.KNN:
        return knn_score(params, x)
    if family is Family.ISOFOREST:
        return isoforest_score(params, x)
    if family is Family.OCSVM:
        return ocsvm_score(params, x)
    return reconstruction_error(params, x)


def _fit_params(spec: DetectorSpec, x: np.ndarray, y):
    f = spec.family
    if f is Family.GBDT:
        return gbdt_fit(x, y, spec.learning_rate, spec.max_depth, spec.n_rounds, spec.reg_lambda)
    if f is Family.KNN:
        return knn_fit(x, y, spec.k, spec.distance)
    if f is Family.ISOFOREST:
        return isoforest_fit(x, spec.n_trees, spec.subsample, spec.contamination, spec.seed)
    if f is Family.OCSVM:
        if x.shape[0] > spec.ocsvm_max_train:
            rows = np.sort(Rng(spec.seed).child(0x5B).choice(x.shape[0], spec.ocsvm_max_train))
            x = x[rows]
        return ocsvm_fit(x, spec.nu, spec.gamma, spec.ocsvm_tol, spec.ocsvm_max_iter)
    return neural_fit(x, f.value, spec.latent_dim, spec.hidden_dim, spec.epochs, spec.batch_size,
                      spec.nn_learning_rate, spec.seed)


def _rule(family: Family) -> str:
    return {Family.GBDT: "ge", Family.KNN: "ge", Family.OCSVM: "gt",
            Family.ISOFOREST: "quota"}.get(family, "percentile")


def fit_detector(spec: DetectorSpec, X: FeatureMatrix, y=None) -> TrainedModel:
    """Fit one detector on the given training rows.

    ``y`` is required for the supervised families (GBDT, KNN) and ignored by
    the others; callers pick which rows to train on.
    """
    if X.has_missing:
        raise DetectorError("feature matrix has missing cells; impute before fitting")
    if X.n_rows == 0:
        raise DetectorError("no training rows")
    family = Family(spec.family)
    if family in (Family.GBDT, Family.KNN):
        if y is None:
            raise DetectorError(f"{family.value} needs labels")
        y = check_binary(y)
    xs, stats = _scale(family, X)
    params = _fit_params(spec, xs.values, y)
    model = TrainedModel(family, spec, params, X.column_names, stats, 0.0, _rule(family))
    train_scores = _raw_scores(family, params, xs.values)
    model.train_flags, model.threshold = _flags(model, train_scores)
    return model


def score(model: TrainedModel, X: FeatureMatrix) -> np.ndarray:
    """Anomaly scores for the rows of ``X`` (columns matched by name)."""
    X = X.select(model.feature_names)
    if X.has_missing:
        raise DetectorError("feature matrix has missing cells")
    xs, _ = _scale(model.family, X, model.scaler)
    return _raw_scores(model.family, model.params, xs.values)


def _flags(model: TrainedModel, scores):
    scores = np.asarray(scores, dtype=np.float64)
    rule = model.threshold_rule
    if rule == "ge":
        return (scores >= 0.5).astype(np.int64), 0.5
    if rule == "gt":
        return (scores > 0.0).astype(np.int64), 0.0
    if rule == "quota":
        return quota_flags(scores, model.spec.contamination)
    if rule == "percentile":
        return threshold_flags(scores, model.spec.threshold_percentile)
    raise DetectorError(f"unknown threshold rule {rule!r}")


def flag(model: TrainedModel, scores) -> np.ndarray:
    """Binary flags.  Batch rules (quota, percentile) are applied to ``scores`` as a whole."""
    return _flags(model, scores)[0]


def _enc(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def save_model(model: TrainedModel, path) -> None:
    """Write a versioned JSON document with everything ``score`` and ``flag`` need."""
    doc = {
        "format": MODEL_FORMAT, "version": MODEL_VERSION,
        "family": model.family.value, "spec": model.spec.to_dict(),
        "params": model.params.to_dict(), "feature_names": list(model.feature_names),
        "scaler": model.scaler.to_dict(), "threshold": _enc(model.threshold),
        "threshold_rule": model.threshold_rule,
        "train_flags": None if model.train_flags is None else model.train_flags.tolist(),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_model(path) -> TrainedModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != MODEL_FORMAT:
        raise DetectorError(f"{path}: not a saved detector")
    if doc.get("version") != MODEL_VERSION:
        raise DetectorError(f"{path}: unsupported model version {doc.get('version')}")
    family = Family(doc["family"])
    params = _PARAM_TYPES[family].from_dict(doc["params"])
    flags = doc["train_flags"]
    return TrainedModel(family, DetectorSpec.from_dict(doc["spec"]), params, tuple(doc["feature_names"]),
                        ScalerStats.from_dict(doc["scaler"]), float(doc["threshold"]),
                        doc["threshold_rule"], None if flags is None else np.array(flags, dtype=np.int64))

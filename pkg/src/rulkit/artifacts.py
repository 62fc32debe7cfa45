"""Versioned model files (model.v1) shared by all three model kinds.

A saved artifact bundles the trained parameters, the training
configuration, the feature scaler, the RUL tercile thresholds, the feature
name order, and free-form training metadata, so a loaded model can score
raw-unit feature rows directly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from datetime import datetime, timezone

import numpy as np

from . import evaluation, gbdt, gru, mlp
from .data import SampleTable, ScalerParams, TercileThresholds, apply_scaler
from .errors import SchemaError

MODEL_SCHEMA = "model.v1"


@dataclass
class ModelArtifact:
    kind: str
    model: object
    config: object
    scaler: ScalerParams
    thresholds: TercileThresholds
    feature_names: list
    metadata: dict

    def predict(self, matrix) -> np.ndarray:
        """Class predictions for raw-unit feature rows."""
        scaled = apply_scaler(self.scaler, np.atleast_2d(matrix))
        return evaluation.predict_model(self.kind, self.model, scaled)

    def predict_probs(self, matrix) -> np.ndarray:
        scaled = apply_scaler(self.scaler, np.atleast_2d(matrix))
        return evaluation.predict_probs(self.kind, self.model, scaled)

    def row_from_features(self, features: dict) -> np.ndarray:
        """Order a name->value mapping into this model's feature layout.

        Raises KeyError naming the first missing feature and ValueError for
        non-finite values.
        """
        row = np.empty(len(self.feature_names))
        for i, name in enumerate(self.feature_names):
            if name not in features:
                raise KeyError(name)
            value = float(features[name])
            if not np.isfinite(value):
                raise ValueError(f"feature {name!r} is not finite")
            row[i] = value
        return row


def _config_to_dict(kind, config):
    doc = asdict(config)
    if kind == "mlp":
        doc["hidden"] = list(config.hidden)
    return doc


def _config_from_dict(kind, doc):
    if kind == "mlp":
        doc = dict(doc)
        doc["hidden"] = tuple(doc["hidden"])
        return mlp.MlpConfig(**doc)
    if kind == "gru":
        return gru.GruConfig(**doc)
    if kind == "gbdt":
        return gbdt.GbdtConfig(**doc)
    raise SchemaError(f"unknown model kind {kind!r}")


def _params_to_dict(kind, model):
    if kind == "mlp":
        return mlp.params_to_dict(model)
    if kind == "gru":
        return gru.params_to_dict(model)
    if kind == "gbdt":
        return gbdt.ensemble_to_dict(model)
    raise SchemaError(f"unknown model kind {kind!r}")


def _params_from_dict(kind, doc):
    if kind == "mlp":
        return mlp.params_from_dict(doc)
    if kind == "gru":
        return gru.params_from_dict(doc)
    if kind == "gbdt":
        return gbdt.ensemble_from_dict(doc)
    raise SchemaError(f"unknown model kind {kind!r}")


def save_model(path: str, artifact: ModelArtifact) -> None:
    doc = {
        "schema": MODEL_SCHEMA,
        "kind": artifact.kind,
        "config": _config_to_dict(artifact.kind, artifact.config),
        "params": _params_to_dict(artifact.kind, artifact.model),
        "scaler": {
            "mean": artifact.scaler.mean.tolist(),
            "std": artifact.scaler.std.tolist(),
            "zero_std": artifact.scaler.zero_std.tolist(),
        },
        "thresholds": {"t1": artifact.thresholds.t1, "t2": artifact.thresholds.t2},
        "feature_names": list(artifact.feature_names),
        "metadata": artifact.metadata,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path: str) -> ModelArtifact:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != MODEL_SCHEMA:
        raise SchemaError(f"{path}: not a {MODEL_SCHEMA} file")
    kind = doc["kind"]
    return ModelArtifact(
        kind=kind,
        model=_params_from_dict(kind, doc["params"]),
        config=_config_from_dict(kind, doc["config"]),
        scaler=ScalerParams(
            mean=np.asarray(doc["scaler"]["mean"], dtype=np.float64),
            std=np.asarray(doc["scaler"]["std"], dtype=np.float64),
            zero_std=np.asarray(doc["scaler"]["zero_std"], dtype=bool),
        ),
        thresholds=TercileThresholds(**doc["thresholds"]),
        feature_names=list(doc["feature_names"]),
        metadata=doc.get("metadata", {}),
    )


def fit_artifact(kind: str, table: SampleTable, config=None, seed: int = 42,
                 test_frac: float = 0.2, profile: str = "full"):
    """Train one model on the standard shuffled split.

    Returns (artifact, report_dict, history) where the report carries the
    held-out confusion metrics and train/test accuracy.
    """
    from . import data as data_mod

    labels, thresholds = data_mod.bin_rul_terciles(table)
    table.labels = labels
    split = data_mod.train_test_split(table.n_rows, test_frac=test_frac, seed=seed)
    scaler = data_mod.fit_scaler(table, split.train)
    x_train = apply_scaler(scaler, table.x[split.train])
    x_test = apply_scaler(scaler, table.x[split.test])
    y_train = labels[split.train]
    y_test = labels[split.test]

    if config is None:
        config = evaluation.default_config(kind, profile=profile, seed=seed)
    model, history = evaluation.train_model(
        kind, config, x_train, y_train, x_test, y_test)

    train_acc = float(np.mean(evaluation.predict_model(kind, model, x_train) == y_train))
    test_pred = evaluation.predict_model(kind, model, x_test)
    test_acc = float(np.mean(test_pred == y_test))
    report = evaluation.evaluate(y_test, test_pred)

    artifact = ModelArtifact(
        kind=kind,
        model=model,
        config=config,
        scaler=scaler,
        thresholds=thresholds,
        feature_names=list(table.feature_names),
        metadata={
            "seed": seed,
            "test_frac": test_frac,
            "profile": profile,
            "n_train": int(len(split.train)),
            "n_test": int(len(split.test)),
            "train_accuracy": train_acc,
            "test_accuracy": test_acc,
            "trained_at": datetime.now(timezone.utc).isoformat(),
        },
    )
    report_doc = evaluation.report_to_dict(
        kind, report, train_accuracy=train_acc, test_accuracy=test_acc)
    return artifact, report_doc, history

"""Confusion-matrix metrics, the cross-validation driver, and the
model-comparison table.

Accuracy for the three-class problem is trace/total; per-class TP/FP/FN/TN
come from the one-vs-rest reduction. Fold tables report the mean and the
population standard deviation (divisor n) to match how small fold spreads
round; a flag switches to the sample estimator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import data as data_mod
from . import gbdt as gbdt_mod
from . import gru as gru_mod
from . import mlp as mlp_mod

N_CLASSES = 3
MODEL_KINDS = ("mlp", "gru", "gbdt")
REPORT_SCHEMA = "report.v1"


def confusion(y_true, y_pred) -> np.ndarray:
    """3x3 count matrix, entry (i, j) = true class i predicted as j."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size and not (
        0 <= y_true.min() and y_true.max() < N_CLASSES
        and 0 <= y_pred.min() and y_pred.max() < N_CLASSES
    ):
        raise ValueError("labels must be in {0, 1, 2}")
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def accuracy(cm: np.ndarray) -> float:
    total = cm.sum()
    return float(np.trace(cm) / total) if total else 0.0


@dataclass
class ClassMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float


def _safe_div(num, den):
    return float(num / den) if den else 0.0


def class_metrics(cm: np.ndarray, cls: int) -> ClassMetrics:
    """One-vs-rest TP/FP/FN/TN and the derived ratios for one class."""
    tp = int(cm[cls, cls])
    fn = int(cm[cls].sum() - tp)
    fp = int(cm[:, cls].sum() - tp)
    tn = int(cm.sum() - tp - fn - fp)
    p = _safe_div(tp, tp + fp)
    r = _safe_div(tp, tp + fn)
    f = _safe_div(2 * p * r, p + r)
    return ClassMetrics(tp=tp, fp=fp, fn=fn, tn=tn, precision=p, recall=r, f1=f)


def precision(cm: np.ndarray, cls: int) -> float:
    return class_metrics(cm, cls).precision


def recall(cm: np.ndarray, cls: int) -> float:
    return class_metrics(cm, cls).recall


def f1(cm: np.ndarray, cls: int) -> float:
    return class_metrics(cm, cls).f1


def macro_metrics(cm: np.ndarray):
    """Unweighted per-class means of precision, recall and F1."""
    per_class = [class_metrics(cm, c) for c in range(N_CLASSES)]
    return (
        float(np.mean([m.precision for m in per_class])),
        float(np.mean([m.recall for m in per_class])),
        float(np.mean([m.f1 for m in per_class])),
    )


@dataclass
class EvalReport:
    confusion: np.ndarray
    accuracy: float
    per_class: list
    macro_precision: float
    macro_recall: float
    macro_f1: float


def evaluate(y_true, y_pred) -> EvalReport:
    cm = confusion(y_true, y_pred)
    mp, mr, mf = macro_metrics(cm)
    return EvalReport(
        confusion=cm,
        accuracy=accuracy(cm),
        per_class=[class_metrics(cm, c) for c in range(N_CLASSES)],
        macro_precision=mp,
        macro_recall=mr,
        macro_f1=mf,
    )


@dataclass
class CvReport:
    fold_accuracies: list
    mean: float
    std: float


def summarize_folds(fold_accuracies, sample_std: bool = False) -> CvReport:
    accs = np.asarray(fold_accuracies, dtype=np.float64)
    ddof = 1 if sample_std else 0
    return CvReport(
        fold_accuracies=accs.tolist(),
        mean=float(accs.mean()),
        std=float(accs.std(ddof=ddof)) if accs.size > ddof else 0.0,
    )


def default_config(kind: str, profile: str = "full", seed: int = 42):
    """Per-model training configuration; smoke caps boosting at 50
    iterations and network training at 5 epochs."""
    if kind == "mlp":
        config = mlp_mod.MlpConfig(seed=seed)
        if profile == "smoke":
            config.epochs = 5
        return config
    if kind == "gru":
        config = gru_mod.GruConfig(seed=seed)
        if profile == "smoke":
            config.epochs = 5
        return config
    if kind == "gbdt":
        config = gbdt_mod.GbdtConfig()
        if profile == "smoke":
            config.iterations = 50
        return config
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def train_model(kind: str, config, x_train, y_train, x_val=None, y_val=None):
    """Fit one model; returns (model, history-or-loss-trace)."""
    if kind == "mlp":
        params, history = mlp_mod.train(config, x_train, y_train)
        return params, history
    if kind == "gru":
        params, history = gru_mod.train(config, x_train, y_train, x_val, y_val)
        return params, history
    if kind == "gbdt":
        ensemble = gbdt_mod.train(config, x_train, y_train)
        return ensemble, ensemble.loss_trace
    raise ValueError(f"unknown model kind {kind!r}")


def predict_model(kind: str, model, x) -> np.ndarray:
    if kind == "mlp":
        return mlp_mod.predict(model, x)
    if kind == "gru":
        return gru_mod.predict(model, x)
    if kind == "gbdt":
        return gbdt_mod.predict(model, x)
    raise ValueError(f"unknown model kind {kind!r}")


def predict_probs(kind: str, model, x) -> np.ndarray:
    if kind == "mlp":
        return np.atleast_2d(mlp_mod.forward(model, x))
    if kind == "gru":
        return np.atleast_2d(gru_mod.forward(model, gru_mod.reshape_to_sequence(np.atleast_2d(x))))
    if kind == "gbdt":
        return gbdt_mod.softmax_scores(model, x)
    raise ValueError(f"unknown model kind {kind!r}")


def cv_run(kind: str, config, table, k: int = 10, seed: int = 42,
           stratified: bool = True, sample_std: bool = False) -> CvReport:
    """k-fold cross-validation: per fold, fit scaler and model on the
    train part and score accuracy on the held-out part."""
    if table.labels is None:
        raise ValueError("table must be labeled (run tercile binning first)")
    folds = data_mod.kfold(
        table.n_rows, k=k, shuffle=True, seed=seed,
        stratify_labels=table.labels if stratified else None)
    accuracies = []
    for i, fold in enumerate(folds):
        try:
            scaler = data_mod.fit_scaler(table, fold.train)
            x_train = data_mod.apply_scaler(scaler, table.x[fold.train])
            x_test = data_mod.apply_scaler(scaler, table.x[fold.test])
            model, _ = train_model(kind, config, x_train, table.labels[fold.train])
            preds = predict_model(kind, model, x_test)
        except Exception as exc:
            exc.args = (f"fold {i}: {exc}",) + exc.args[1:]
            raise
        accuracies.append(float(np.mean(preds == table.labels[fold.test])))
    return summarize_folds(accuracies, sample_std=sample_std)


def format_cv_table(cv: CvReport) -> str:
    """Fold table layout: one row per fold, then mean and std rows."""
    lines = ["Fold    Accuracy"]
    for i, acc in enumerate(cv.fold_accuracies, start=1):
        lines.append(f"Fold {i:<3d}{acc:.4f}")
    lines.append(f"Mean Accuracy       {cv.mean:.4f}")
    lines.append(f"Standard Deviation  {cv.std:.4f}")
    return "\n".join(lines)


def compare_models(rows) -> str:
    """Rows of {model, train_accuracy, test_accuracy} to an aligned text
    table, ordered MLP, GRU, GBDT."""
    order = {kind: i for i, kind in enumerate(MODEL_KINDS)}
    rows = sorted(rows, key=lambda r: order.get(r["model"], len(order)))
    lines = ["Model    Training Accuracy  Testing Accuracy"]
    for row in rows:
        lines.append(
            f"{row['model'].upper():<9}"
            f"{row['train_accuracy']:<19.4f}"
            f"{row['test_accuracy']:.4f}"
        )
    return "\n".join(lines)


def write_comparison(path: str, rows) -> None:
    """Machine-readable companion of the comparison text table."""
    import json

    order = {kind: i for i, kind in enumerate(MODEL_KINDS)}
    with open(path, "w") as fh:
        json.dump({
            "schema": "comparison.v1",
            "rows": sorted(rows, key=lambda r: order.get(r["model"], len(order))),
        }, fh)


def load_comparison(path: str) -> list:
    import json

    with open(path) as fh:
        doc = json.load(fh)
    return doc["rows"]


def report_to_dict(kind: str, report: EvalReport, cv: CvReport | None = None,
                   train_accuracy: float | None = None,
                   test_accuracy: float | None = None) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "model": kind,
        "confusion": report.confusion.tolist(),
        "accuracy": report.accuracy,
        "per_class": [
            {
                "tp": m.tp, "fp": m.fp, "fn": m.fn, "tn": m.tn,
                "precision": m.precision, "recall": m.recall, "f1": m.f1,
            }
            for m in report.per_class
        ],
        "macro": {
            "precision": report.macro_precision,
            "recall": report.macro_recall,
            "f1": report.macro_f1,
        },
        "cv": None if cv is None else {
            "fold_accuracies": cv.fold_accuracies,
            "mean": cv.mean,
            "std": cv.std,
        },
        "train_accuracy": train_accuracy,
        "test_accuracy": test_accuracy,
    }


def history_to_csv(history, path: str) -> None:
    """Per-epoch metrics as CSV for external plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        has_val = bool(history.val_loss)
        header = ["epoch", "train_loss", "train_accuracy"]
        if has_val:
            header += ["val_loss", "val_accuracy"]
        writer.writerow(header)
        for i in range(len(history.train_loss)):
            row = [i + 1, history.train_loss[i], history.train_accuracy[i]]
            if has_val:
                row += [history.val_loss[i], history.val_accuracy[i]]
            writer.writerow(row)

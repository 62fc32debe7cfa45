"""Battery-cycle dataset handling.

Loads the RUL CSV (14 NMC-LCO 18650 cells cycled to end of life), derives
three balanced RUL classes by equal-frequency binning, produces
deterministic train/test splits and k-folds, z-score scaling fit on
training rows only, and a synthetic generator for dataset-free testing.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .errors import (
    DegenerateTargetError,
    EmptyDatasetError,
    SchemaError,
    SplitError,
)

# Canonical feature names, in the order the source file usually carries them.
# `total_time_s` is optional: kept when the file has it, absent otherwise.
CYCLE_INDEX = "cycle_index"
TOTAL_TIME = "total_time_s"
RUL_COLUMN = "rul"

_CANONICAL = {
    "cycleindex": CYCLE_INDEX,
    "dischargetime": "discharge_time_s",
    "decrement3634v": "decrement_3p6_3p4v_s",
    "maxvoltagedischarge": "max_voltage_discharge_v",
    "minvoltagecharge": "min_voltage_charge_v",
    "timeat415v": "time_at_4p15v_s",
    "timeconstantcurrent": "time_constant_current_s",
    "chargingtime": "charging_time_s",
    "totaltime": TOTAL_TIME,
    "rul": RUL_COLUMN,
}

REQUIRED_COLUMNS = [k for k in _CANONICAL if k not in ("totaltime",)]

DATASET_SCHEMA = "dataset.v1"


def normalize_header(name: str) -> str:
    """Lowercase, drop unit parentheticals and all punctuation/spaces."""
    name = re.sub(r"\([^)]*\)", " ", str(name))
    return re.sub(r"[^a-z0-9]", "", name.lower())


def _match_canonical(header: str) -> str | None:
    """Map a raw CSV header to its canonical name, tolerating truncated
    spellings like "Max. Voltage Dischar." via prefix matching."""
    if header in _CANONICAL.values():
        return header  # already canonical (e.g. re-exported snapshots)
    norm = normalize_header(header)
    if not norm:
        return None
    if norm in _CANONICAL:
        return _CANONICAL[norm]
    for key, canonical in _CANONICAL.items():
        if len(norm) >= 3 and len(key) >= 3:
            if norm.startswith(key) or key.startswith(norm):
                return canonical
    return None


@dataclass
class TercileThresholds:
    """RUL values closing the low and mid classes (low: rul <= t1)."""

    t1: float
    t2: float


@dataclass
class ScalerParams:
    """Per-feature mean/std computed on training rows only."""

    mean: np.ndarray
    std: np.ndarray
    zero_std: np.ndarray  # bool mask of degenerate features


@dataclass
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    seed: int


@dataclass
class SampleTable:
    """Feature matrix plus RUL target (and class labels once binned)."""

    feature_names: list[str]
    x: np.ndarray  # (n_rows, n_features) float64
    rul: np.ndarray  # (n_rows,) float64
    labels: np.ndarray | None = None  # (n_rows,) int64 in {0,1,2}
    n_dropped: int = 0

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def without_features(self, names) -> "SampleTable":
        """Copy of the table with the named feature columns removed."""
        drop = set(names)
        keep = [i for i, n in enumerate(self.feature_names) if n not in drop]
        return replace(
            self,
            feature_names=[self.feature_names[i] for i in keep],
            x=self.x[:, keep],
        )


def load_dataset(path: str) -> SampleTable:
    """Read the battery-cycle CSV into a SampleTable.

    Every numeric column except RUL becomes a feature, in file order.
    Rows with missing/non-numeric cells (or negative RUL) are dropped and
    counted in ``n_dropped``.

    Raises SchemaError when a required column is absent and
    EmptyDatasetError when no usable rows remain.
    """
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise EmptyDatasetError(f"{path}: no header or data rows")

    mapping = {}  # original column -> canonical or normalized name
    seen = set()
    for col in df.columns:
        canonical = _match_canonical(col)
        if canonical is not None and canonical not in seen:
            mapping[col] = canonical
            seen.add(canonical)
        else:
            fallback = normalize_header(col) or str(col)
            mapping[col] = fallback

    missing = [k for k in REQUIRED_COLUMNS if _CANONICAL[k] not in seen]
    if missing:
        pretty = ", ".join(_CANONICAL[k] for k in missing)
        raise SchemaError(f"{path}: missing required column(s): {pretty}")

    if len(df) == 0:
        raise EmptyDatasetError(f"{path}: header present but no data rows")

    # Numeric columns: required ones always; extras if most cells parse.
    numeric = {}
    for col in df.columns:
        values = pd.to_numeric(df[col], errors="coerce")
        n_valid = values.notna().sum()
        if mapping[col] in _CANONICAL.values() or n_valid >= 0.5 * len(df):
            numeric[mapping[col]] = values.to_numpy(dtype=np.float64)

    feature_names = [mapping[c] for c in df.columns
                     if mapping[c] in numeric and mapping[c] != RUL_COLUMN]
    rul = numeric[RUL_COLUMN]

    matrix = np.column_stack([numeric[n] for n in feature_names]) \
        if feature_names else np.empty((len(df), 0))
    valid = np.isfinite(rul) & (rul >= 0)
    if matrix.shape[1]:
        valid &= np.all(np.isfinite(matrix), axis=1)
    n_dropped = int((~valid).sum())

    if not valid.any():
        raise EmptyDatasetError(f"{path}: no valid data rows (dropped {n_dropped})")

    return SampleTable(
        feature_names=feature_names,
        x=matrix[valid],
        rul=rul[valid],
        n_dropped=n_dropped,
    )


def bin_rul_terciles(table: SampleTable):
    """Split RUL into three equal-frequency classes (0=low, 1=mid, 2=high).

    Rows are ranked by RUL (stable ties) and dealt to classes so counts
    differ by at most one; the reported thresholds are the RUL values at
    the class boundaries. Returns ``(labels, TercileThresholds)``.
    """
    rul = np.asarray(table.rul, dtype=np.float64)
    n = rul.shape[0]
    if n < 3 or np.unique(rul).size < 3:
        raise DegenerateTargetError(
            f"need >= 3 rows with >= 3 distinct RUL values, got {n} rows "
            f"with {np.unique(rul).size} distinct"
        )
    order = np.argsort(rul, kind="stable")
    counts = [n // 3 + (1 if i < n % 3 else 0) for i in range(3)]
    labels = np.empty(n, dtype=np.int64)
    labels[order[: counts[0]]] = 0
    labels[order[counts[0]: counts[0] + counts[1]]] = 1
    labels[order[counts[0] + counts[1]:]] = 2
    t1 = float(rul[order[counts[0] - 1]])
    t2 = float(rul[order[counts[0] + counts[1] - 1]])
    return labels, TercileThresholds(t1=t1, t2=t2)


def train_test_split(n: int, test_frac: float = 0.2, seed: int = 42) -> SplitIndices:
    """Deterministic shuffled partition with |test| = round(test_frac * n)."""
    if not 0.0 < test_frac < 1.0:
        raise SplitError(f"test_frac must be in (0,1), got {test_frac}")
    if n < 2:
        raise SplitError(f"need at least 2 rows to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(test_frac * n))
    return SplitIndices(train=perm[n_test:], test=perm[:n_test], seed=seed)


def kfold(n: int, k: int = 10, shuffle: bool = True, seed: int = 42,
          stratify_labels=None) -> list[SplitIndices]:
    """k disjoint folds covering all rows; fold sizes differ by <= 1.

    With ``stratify_labels``, per-class counts in each fold match the
    global proportions to within one sample.
    """
    if k < 2 or k > n:
        raise SplitError(f"fold count k={k} invalid for n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n) if shuffle else np.arange(n)

    if stratify_labels is None:
        sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
        members, pos = [], 0
        for size in sizes:
            members.append(perm[pos: pos + size])
            pos += size
    else:
        y = np.asarray(stratify_labels)
        if y.shape[0] != n:
            raise SplitError("stratify_labels length must equal n")
        members = [[] for _ in range(k)]
        loads = np.zeros(k, dtype=np.int64)
        for cls in np.unique(y):
            idx = perm[y[perm] == cls]
            base, rem = divmod(len(idx), k)
            counts = np.full(k, base, dtype=np.int64)
            # remainder goes to the lightest folds, lowest index first
            counts[np.lexsort((np.arange(k), loads))[:rem]] += 1
            loads += counts
            pos = 0
            for f in range(k):
                members[f].extend(idx[pos: pos + counts[f]])
                pos += counts[f]
        members = [np.array(m, dtype=np.int64) for m in members]

    folds = []
    everything = np.arange(n)
    for test in members:
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        folds.append(SplitIndices(train=everything[mask], test=np.asarray(test), seed=seed))
    return folds


def fit_scaler(table: SampleTable, train_indices) -> ScalerParams:
    """Per-feature mean/std over the training rows (population std)."""
    rows = np.asarray(table.x[np.asarray(train_indices)], dtype=np.float64)
    if rows.shape[0] == 0:
        raise SplitError("cannot fit a scaler on zero training rows")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    return ScalerParams(mean=mean, std=std, zero_std=std == 0.0)


def apply_scaler(params: ScalerParams, matrix: np.ndarray) -> np.ndarray:
    """Standardize columns; zero-std features map to 0."""
    matrix = np.asarray(matrix, dtype=np.float64)
    safe = np.where(params.zero_std, 1.0, params.std)
    out = (matrix - params.mean) / safe
    out[:, params.zero_std] = 0.0
    return out


# Synthetic-generator trends: feature -> (base value, end-of-life factor).
# A factor < 1 means the feature decays over the battery's life.
_SYNTH_TRENDS = {
    "discharge_time_s": (1700.0, 0.45),
    "decrement_3p6_3p4v_s": (1200.0, 0.40),
    "max_voltage_discharge_v": (4.25, 0.92),
    "min_voltage_charge_v": (3.30, 1.12),
    "time_at_4p15v_s": (1500.0, 0.50),
    "time_constant_current_s": (1400.0, 0.55),
    "charging_time_s": (6000.0, 1.35),
}


def synth_generate(n_batteries: int = 14, max_cycles: int = 1100,
                   seed: int = 0) -> SampleTable:
    """Monotone-trend synthetic battery-cycle table for dataset-free tests.

    Each battery contributes ``max_cycles`` rows with
    ``rul = max_cycles - cycle_index``, so the RUL marginal is uniform on
    [0, max_cycles); discharge time and time-at-4.15V decay with cycle,
    plus bounded noise.
    """
    if n_batteries < 1 or max_cycles < 10:
        raise ValueError("need n_batteries >= 1 and max_cycles >= 10")
    rng = np.random.default_rng(seed)
    cycles = np.arange(1, max_cycles + 1, dtype=np.float64)
    progress = (cycles - 1) / (max_cycles - 1)

    names = [CYCLE_INDEX, "discharge_time_s", "decrement_3p6_3p4v_s",
             "max_voltage_discharge_v", "min_voltage_charge_v",
             "time_at_4p15v_s", "time_constant_current_s",
             "charging_time_s", TOTAL_TIME]
    blocks = []
    for _ in range(n_batteries):
        cols = {CYCLE_INDEX: cycles}
        for feat, (base, end_factor) in _SYNTH_TRENDS.items():
            scale = base * rng.uniform(0.9, 1.1)
            trend = scale * (1.0 + (end_factor - 1.0) * progress)
            noise = rng.uniform(-0.02, 0.02, size=max_cycles) * scale
            cols[feat] = trend + noise
        cols[TOTAL_TIME] = cols["discharge_time_s"] + cols["charging_time_s"]
        blocks.append(np.column_stack([cols[n] for n in names]))

    x = np.vstack(blocks)
    rul = np.tile(max_cycles - cycles, n_batteries)
    return SampleTable(feature_names=names, x=x, rul=rul)


def save_snapshot(path: str, table: SampleTable,
                  thresholds: TercileThresholds | None = None) -> None:
    """Write the self-describing dataset.v1 snapshot JSON."""
    doc = {
        "schema": DATASET_SCHEMA,
        "feature_names": table.feature_names,
        "n_rows": table.n_rows,
        "n_dropped": table.n_dropped,
        "thresholds": None if thresholds is None
        else {"t1": thresholds.t1, "t2": thresholds.t2},
        "labels": None if table.labels is None else table.labels.tolist(),
        "rul": table.rul.tolist(),
        "features": table.x.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_snapshot(path: str):
    """Read a dataset.v1 snapshot; returns (SampleTable, thresholds)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != DATASET_SCHEMA:
        raise SchemaError(f"{path}: not a {DATASET_SCHEMA} file")
    table = SampleTable(
        feature_names=list(doc["feature_names"]),
        x=np.asarray(doc["features"], dtype=np.float64),
        rul=np.asarray(doc["rul"], dtype=np.float64),
        labels=None if doc["labels"] is None
        else np.asarray(doc["labels"], dtype=np.int64),
        n_dropped=int(doc.get("n_dropped", 0)),
    )
    thresholds = None
    if doc.get("thresholds"):
        thresholds = TercileThresholds(**doc["thresholds"])
    return table, thresholds

#!/usr/bin/env python3
"""Walk through the data pipeline on synthetic battery cycles.

Generates a small synthetic fleet, bins RUL into three balanced classes,
builds deterministic splits and folds, and standardizes features with
train-only statistics.
"""

import numpy as np

from rulkit import data

table = data.synth_generate(n_batteries=4, max_cycles=500, seed=7)
print(f"{table.n_rows} rows x {table.n_features} features")
print("features:", ", ".join(table.feature_names))

labels, thresholds = data.bin_rul_terciles(table)
table.labels = labels
print(f"\ntercile thresholds: t1={thresholds.t1:.0f}  t2={thresholds.t2:.0f}")
print("class counts:", np.bincount(labels))

split = data.train_test_split(table.n_rows, test_frac=0.2, seed=42)
print(f"\n80:20 split -> {len(split.train)} train / {len(split.test)} test rows")

folds = data.kfold(table.n_rows, k=10, seed=42, stratify_labels=labels)
print("fold sizes:", [len(f.test) for f in folds])
for i, fold in enumerate(folds[:3]):
    counts = np.bincount(labels[fold.test], minlength=3)
    print(f"  fold {i + 1} class counts: {counts}")

scaler = data.fit_scaler(table, split.train)
z = data.apply_scaler(scaler, table.x[split.train])
print(f"\nscaled train columns: mean~{np.abs(z.mean(axis=0)).max():.1e} "
      f"std~{np.abs(z.std(axis=0) - 1).max():.1e}")

# statistics come from training rows only, so test rows can't leak in
z_test = data.apply_scaler(scaler, table.x[split.test])
print(f"scaled test columns (train stats): mean range "
      f"[{z_test.mean(axis=0).min():+.3f}, {z_test.mean(axis=0).max():+.3f}]")

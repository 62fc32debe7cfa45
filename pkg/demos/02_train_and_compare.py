#!/usr/bin/env python3
"""Train all three classifiers on synthetic data and print the comparison
table plus a fold table for the boosted model.

Uses reduced smoke settings so the whole script finishes in ~a minute;
pass a CSV path as argv[1] to run against the real dataset instead.
"""

import sys

from rulkit import artifacts, data, evaluation

if len(sys.argv) > 1:
    table = data.load_dataset(sys.argv[1])
else:
    table = data.synth_generate(n_batteries=6, max_cycles=400, seed=11)

rows = []
for kind in ("mlp", "gru", "gbdt"):
    artifact, report, history = artifacts.fit_artifact(
        kind, table, seed=42, profile="smoke")
    rows.append({
        "model": kind,
        "train_accuracy": artifact.metadata["train_accuracy"],
        "test_accuracy": artifact.metadata["test_accuracy"],
    })
    print(f"trained {kind}: test accuracy "
          f"{artifact.metadata['test_accuracy']:.4f}")

print()
print(evaluation.compare_models(rows))
evaluation.write_comparison("comparison.json", rows)
print("(written to comparison.json)")

print("\n3-fold cross-validation, boosted trees:")
labels, _ = data.bin_rul_terciles(table)
table.labels = labels
cv = evaluation.cv_run("gbdt", evaluation.default_config("gbdt", "smoke"),
                       table, k=3, seed=42)
print(evaluation.format_cv_table(cv))

import numpy as np
import pytest

from rulkit import artifacts, data, gbdt


@pytest.fixture(scope="session")
def smoke_artifact():
    """Small boosted model trained on synthetic data, shared across tests."""
    table = data.synth_generate(4, 240, seed=100)
    config = gbdt.GbdtConfig(iterations=30, depth=4)
    artifact, _, _ = artifacts.fit_artifact("gbdt", table, config=config, seed=42)
    return artifact


@pytest.fixture(scope="session")
def feature_rows(smoke_artifact):
    """One raw feature dict per predicted class under smoke_artifact."""
    table = data.synth_generate(4, 240, seed=100)
    preds = smoke_artifact.predict(table.x)
    rows = {}
    for cls in (0, 1, 2):
        idx = int(np.flatnonzero(preds == cls)[0])
        rows[cls] = dict(zip(table.feature_names, table.x[idx].tolist()))
    return rows

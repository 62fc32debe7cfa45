#!/usr/bin/env python3
"""Exercise the telemetry HTTP API end to end without a network socket:
train a small model, post feature rows, toggle the relay, and read the
live event stream."""

import numpy as np
from fastapi.testclient import TestClient

from rulkit import artifacts, data, gbdt, service

table = data.synth_generate(3, 200, seed=3)
artifact, _, _ = artifacts.fit_artifact(
    "gbdt", table, config=gbdt.GbdtConfig(iterations=25, depth=4), seed=42)

core = service.ServiceCore(artifact=artifact)
client = TestClient(service.create_app(core))

preds = artifact.predict(table.x)
low = dict(zip(table.feature_names, table.x[np.flatnonzero(preds == 0)[0]]))
high = dict(zip(table.feature_names, table.x[np.flatnonzero(preds == 2)[0]]))

print("GET /api/model ->", client.get("/api/model").json()["kind"])

body = client.post("/api/predict", json={"features": high}).json()
print(f"high-RUL row -> class {body['class']}, relay {body['relay']}")

body = client.post("/api/predict", json={"features": low}).json()
print(f"low-RUL row  -> class {body['class']}, relay {body['relay']}")

body = client.post("/api/relay", json={"state": "off", "mode": "manual"}).json()
print("manual off   ->", body)
body = client.post("/api/relay", json={"mode": "release"}).json()
print("release      ->", body)

print("\npins snapshot:")
for pin, entry in sorted(client.get("/api/pins").json()["pins"].items(),
                         key=lambda kv: int(kv[0][1:])):
    print(f"  {pin:<4} {entry['value']}")

print("\nfirst 8 events on the stream:")
text = client.get("/api/events", params={"resume": 0, "limit": 8}).text
for block in text.strip().split("\n\n"):
    print("  " + block.replace("\n", "  "))

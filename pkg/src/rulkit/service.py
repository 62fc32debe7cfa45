"""Self-hosted telemetry and automation service.

Replaces the cloud dashboard layer with a local HTTP API: virtual pins
V0..V8 mirror the nine feature values (dataset order), V9 the predicted
class, V10 the relay state. Predictions run host-side through the loaded
model artifact, feed the charge controller, and actuate the device link;
every mutation lands in an append-only event log that the SSE endpoint
replays and streams (kinds: pin, relay, notification, fault).

Writes require the shared-secret token when RUL_API_TOKEN is set; reads
stay open.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel

from . import controller as ctl
from . import link as link_mod


class PredictBody(BaseModel):
    features: dict | None = None


class RelayBody(BaseModel):
    state: str | None = None
    mode: str = "manual"

PIN_FEATURE_ORDER = [
    "cycle_index",
    "discharge_time_s",
    "time_at_4p15v_s",
    "time_constant_current_s",
    "decrement_3p6_3p4v_s",
    "max_voltage_discharge_v",
    "min_voltage_charge_v",
    "charging_time_s",
    "total_time_s",
]
FEATURE_PINS = {name: f"V{i}" for i, name in enumerate(PIN_FEATURE_ORDER)}
CLASS_PIN = "V9"
RELAY_PIN = "V10"
ALL_PINS = [f"V{i}" for i in range(11)]


class ApiError(Exception):
    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status
        self.detail = detail


@dataclass(frozen=True)
class Event:
    seq: int
    timestamp: float
    kind: str  # pin | relay | notification | fault
    payload: dict


class ServiceCore:
    """Single-owner state: all mutations run under one lock, appending to
    an append-only event log that SSE subscribers fan out from."""

    def __init__(self, artifact=None, config: ctl.ControllerConfig | None = None,
                 link=None, clock=time.time):
        self.artifact = artifact
        self.config = config or ctl.ControllerConfig()
        self.link = link if link is not None else link_mod.LoopbackLink()
        self.clock = clock
        self.state = ctl.initial_state(now=clock())
        self._lock = threading.Lock()
        self._wakeup = threading.Condition(self._lock)
        self._events: list[Event] = []
        self._pins = {pin: {"value": None, "timestamp": None} for pin in ALL_PINS}

    # -- event log ----------------------------------------------------------

    def _emit(self, kind: str, payload: dict):
        event = Event(seq=len(self._events) + 1, timestamp=self.clock(),
                      kind=kind, payload=payload)
        self._events.append(event)
        self._wakeup.notify_all()
        return event

    def events_since(self, seq: int) -> list[Event]:
        with self._lock:
            return self._events[seq:]

    def wait_for_events(self, seq: int, timeout: float = 0.5) -> list[Event]:
        with self._wakeup:
            if len(self._events) <= seq:
                self._wakeup.wait(timeout)
            return self._events[seq:]

    def _set_pin(self, pin: str, value):
        self._pins[pin] = {"value": value, "timestamp": self.clock()}
        self._emit("pin", {"pin": pin, "value": value})

    # -- command plumbing ----------------------------------------------------

    def _run_commands(self, commands):
        """Relay controller commands onto the wire and into the log."""
        for command in commands:
            if command in (ctl.Command.SET_RELAY_ON, ctl.Command.SET_RELAY_OFF):
                want_on = command is ctl.Command.SET_RELAY_ON
                replies = self.link.send(link_mod.MsgType.SET_RELAY,
                                         link_mod.set_relay_payload(want_on))
                for reply in replies:
                    if reply.msg_type == link_mod.MsgType.RELAY_STATE:
                        on = reply.payload[0] == 1
                        self._set_pin(RELAY_PIN, 1 if on else 0)
                        self._emit("relay", {"state": "on" if on else "off"})
            elif command is ctl.Command.NOTIFY_CHARGE_NEEDED:
                self._emit("notification", {"kind": "charge_needed"})

    # -- API operations ------------------------------------------------------

    def predict(self, features: dict) -> dict:
        with self._lock:
            if self.artifact is None:
                raise ApiError(409, "no model loaded")
            if self.state.mode is ctl.Mode.FAULT:
                raise ApiError(503, "device link in FAULT")
            try:
                row = self.artifact.row_from_features(features)
            except KeyError as exc:
                raise ApiError(400, f"missing feature: {exc.args[0]}")
            except (TypeError, ValueError) as exc:
                raise ApiError(400, f"invalid feature value: {exc}")

            probs = self.artifact.predict_probs(row)[0]
            cls = int(np.argmax(probs))

            for name, value in features.items():
                pin = FEATURE_PINS.get(name)
                if pin is not None:
                    self._set_pin(pin, float(value))
            self._set_pin(CLASS_PIN, cls)

            self.link.send(link_mod.MsgType.PREDICTION,
                           link_mod.prediction_payload(cls, float(probs[cls])))
            self.state, commands = ctl.on_prediction(self.state, self.config, cls)
            self._run_commands(commands)
            return {
                "class": cls,
                "probabilities": [float(p) for p in probs],
                "relay": self.state.relay.value,
                "mode": self.state.mode.value,
            }

    def set_relay(self, state: str | None, mode: str) -> dict:
        with self._lock:
            if mode == "release":
                self.state = ctl.release_override(self.state)
            elif mode == "manual":
                if self.state.mode is ctl.Mode.FAULT:
                    raise ApiError(503, "device link in FAULT")
                if state not in ("on", "off"):
                    raise ApiError(400, "state must be 'on' or 'off'")
                desired = ctl.Relay.ON if state == "on" else ctl.Relay.OFF
                self.state, commands = ctl.on_manual(self.state, desired)
                self._run_commands(commands)
            else:
                raise ApiError(400, "mode must be 'manual' or 'release'")
            return {"relay": self.state.relay.value, "mode": self.state.mode.value}

    def pins_snapshot(self) -> dict:
        with self._lock:
            return {pin: dict(info) for pin, info in self._pins.items()}

    def model_info(self) -> dict:
        with self._lock:
            if self.artifact is None:
                raise ApiError(404, "no model loaded")
            return {
                "kind": self.artifact.kind,
                "feature_names": list(self.artifact.feature_names),
                "thresholds": {"t1": self.artifact.thresholds.t1,
                               "t2": self.artifact.thresholds.t2},
                "metadata": self.artifact.metadata,
            }

    def dump_events(self, path: str) -> int:
        """Flush the append-only event log as JSON lines; returns count."""
        with self._lock:
            events = list(self._events)
        with open(path, "w") as fh:
            for event in events:
                fh.write(json.dumps({
                    "seq": event.seq,
                    "timestamp": event.timestamp,
                    "kind": event.kind,
                    "payload": event.payload,
                }) + "\n")
        return len(events)

    def tick(self, now: float | None = None) -> None:
        """Pump device heartbeats and the fault clock."""
        now = self.clock() if now is None else now
        with self._lock:
            for frame in self.link.poll(now):
                if frame.msg_type == link_mod.MsgType.HEARTBEAT:
                    was_fault = self.state.mode is ctl.Mode.FAULT
                    self.state, _ = ctl.on_heartbeat(self.state, now)
                    if was_fault:
                        self._emit("fault", {"status": "recovered"})
            before = self.state.mode
            self.state, commands = ctl.on_clock(self.state, self.config, now)
            if self.state.mode is ctl.Mode.FAULT and before is not ctl.Mode.FAULT:
                self._emit("fault", {"status": "heartbeat lost"})
            self._run_commands(commands)


def format_sse(event: Event) -> str:
    return (f"id: {event.seq}\n"
            f"event: {event.kind}\n"
            f"data: {json.dumps(event.payload)}\n\n")


def create_app(core: ServiceCore, token: str | None = None, ui_dir: str | None = None):
    """FastAPI wiring over a ServiceCore. `token` guards mutating routes."""
    from fastapi import FastAPI, Header
    from fastapi.responses import JSONResponse, StreamingResponse

    app = FastAPI(title="rulkit telemetry", version="1")
    app.state.core = core
    token = token if token is not None else os.environ.get("RUL_API_TOKEN")

    def check_token(x_api_token, authorization):
        if not token:
            return
        supplied = x_api_token
        if not supplied and authorization and authorization.startswith("Bearer "):
            supplied = authorization[len("Bearer "):]
        if supplied != token:
            raise ApiError(401, "invalid or missing API token")

    @app.exception_handler(ApiError)
    async def handle_api_error(request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"detail": exc.detail})

    @app.get("/api/pins")
    def get_pins():
        return {"pins": core.pins_snapshot()}

    @app.get("/api/model")
    def get_model():
        return core.model_info()

    @app.post("/api/predict")
    def post_predict(body: PredictBody,
                     x_api_token: str | None = Header(default=None),
                     authorization: str | None = Header(default=None)):
        check_token(x_api_token, authorization)
        if not isinstance(body.features, dict):
            raise ApiError(400, "body must be {\"features\": {name: value}}")
        return core.predict(body.features)

    @app.post("/api/relay")
    def post_relay(body: RelayBody,
                   x_api_token: str | None = Header(default=None),
                   authorization: str | None = Header(default=None)):
        check_token(x_api_token, authorization)
        return core.set_relay(body.state, body.mode)

    @app.get("/api/events")
    def get_events(resume: int = 0, limit: int | None = None):
        def stream():
            delivered = 0
            last = resume
            while True:
                events = core.wait_for_events(last, timeout=0.25)
                if not events:
                    if limit is not None:
                        return  # bounded request drained the log: stop
                    yield ": keepalive\n\n"
                    continue
                for event in events:
                    yield format_sse(event)
                    last = event.seq
                    delivered += 1
                    if limit is not None and delivered >= limit:
                        return

        return StreamingResponse(stream(), media_type="text/event-stream")

    if ui_dir and os.path.isdir(ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def start_heartbeat_pump(core: ServiceCore, interval: float | None = None):
    """Daemon thread driving core.tick on the heartbeat cadence."""
    period = interval if interval is not None else core.config.heartbeat_interval / 2
    stop = threading.Event()

    def run():
        while not stop.is_set():
            core.tick()
            stop.wait(period)

    thread = threading.Thread(target=run, daemon=True, name="rulkit-heartbeat")
    thread.start()
    return stop

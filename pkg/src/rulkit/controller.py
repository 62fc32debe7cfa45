"""Charging automation policy.

Maps streamed RUL-class predictions to relay commands with debounce
(k consecutive low-class predictions to switch on, k consecutive
high-class to switch off), manual override, and heartbeat-loss fault
handling. Transition functions are pure: (state, config, event) fully
determines (state', commands), so traces replay exactly.

The charging rule follows the source system literally: a low predicted
RUL class triggers recharging. The off-rule (consecutive high-class
predictions) and fault recovery on the next heartbeat are documented
completions; the mid class conservatively resets both debounce counters.
Manual commands are ignored while in FAULT so no ON command can ever be
emitted before recovery.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum


class Mode(str, Enum):
    AUTO = "AUTO"
    MANUAL_OVERRIDE = "MANUAL_OVERRIDE"
    FAULT = "FAULT"


class Relay(str, Enum):
    ON = "on"
    OFF = "off"


class Command(str, Enum):
    SET_RELAY_ON = "SET_RELAY_ON"
    SET_RELAY_OFF = "SET_RELAY_OFF"
    NOTIFY_CHARGE_NEEDED = "NOTIFY_CHARGE_NEEDED"


@dataclass(frozen=True)
class ControllerConfig:
    k_on: int = 1
    k_off: int = 1
    heartbeat_interval: float = 1.0
    missed_heartbeats_to_fault: int = 3

    def __post_init__(self):
        if self.k_on < 1 or self.k_off < 1:
            raise ValueError("k_on and k_off must be >= 1")


@dataclass(frozen=True)
class ControllerState:
    mode: Mode = Mode.AUTO
    relay: Relay = Relay.OFF
    consecutive_low: int = 0
    consecutive_high: int = 0
    last_heartbeat: float = 0.0


def initial_state(now: float = 0.0) -> ControllerState:
    return ControllerState(last_heartbeat=now)


def on_prediction(state: ControllerState, config: ControllerConfig,
                  predicted: int):
    """Feed one RUL-class prediction; returns (state', commands)."""
    if state.mode is not Mode.AUTO:
        return state, []
    if predicted == 0:
        low = state.consecutive_low + 1
        if low >= config.k_on and state.relay is Relay.OFF:
            new = replace(state, relay=Relay.ON,
                          consecutive_low=0, consecutive_high=0)
            return new, [Command.SET_RELAY_ON, Command.NOTIFY_CHARGE_NEEDED]
        return replace(state, consecutive_low=low, consecutive_high=0), []
    if predicted == 2:
        high = state.consecutive_high + 1
        if high >= config.k_off and state.relay is Relay.ON:
            new = replace(state, relay=Relay.OFF,
                          consecutive_low=0, consecutive_high=0)
            return new, [Command.SET_RELAY_OFF]
        return replace(state, consecutive_low=0, consecutive_high=high), []
    return replace(state, consecutive_low=0, consecutive_high=0), []


def on_manual(state: ControllerState, desired: Relay):
    """Operator-forced relay state; enters MANUAL_OVERRIDE.

    Ignored while in FAULT (the relay stays commanded off until the link
    recovers)."""
    if state.mode is Mode.FAULT:
        return state, []
    new = replace(state, mode=Mode.MANUAL_OVERRIDE,
                  consecutive_low=0, consecutive_high=0, relay=desired)
    if desired is state.relay:
        return new, []
    command = Command.SET_RELAY_ON if desired is Relay.ON else Command.SET_RELAY_OFF
    return new, [command]


def release_override(state: ControllerState) -> ControllerState:
    """Back to AUTO with counters zeroed; FAULT is not releasable here."""
    if state.mode is Mode.FAULT:
        return state
    return replace(state, mode=Mode.AUTO, consecutive_low=0, consecutive_high=0)


def on_clock(state: ControllerState, config: ControllerConfig, now: float):
    """Fault when the heartbeat is older than the missed-beat budget."""
    limit = config.missed_heartbeats_to_fault * config.heartbeat_interval
    if state.mode is not Mode.FAULT and now - state.last_heartbeat > limit:
        new = replace(state, mode=Mode.FAULT, relay=Relay.OFF,
                      consecutive_low=0, consecutive_high=0)
        return new, [Command.SET_RELAY_OFF]
    return state, []


def on_heartbeat(state: ControllerState, now: float):
    """Record device liveness; a heartbeat in FAULT recovers to AUTO."""
    if state.mode is Mode.FAULT:
        return replace(state, mode=Mode.AUTO, last_heartbeat=now,
                       consecutive_low=0, consecutive_high=0), []
    return replace(state, last_heartbeat=now), []


def format_trace_line(timestamp: float, kind: str, event_input,
                      state: ControllerState, commands) -> str:
    """One tab-separated log line per event (state is post-transition)."""
    rendered = "+".join(c.value for c in commands) if commands else "NONE"
    return (f"{timestamp:.3f}\t{kind}\t{event_input}\t"
            f"{state.mode.value}\t{state.relay.value}\t{rendered}")

import itertools

import numpy as np
import pytest

from rulkit.controller import (
    Command,
    ControllerConfig,
    ControllerState,
    Mode,
    Relay,
    format_trace_line,
    initial_state,
    on_clock,
    on_heartbeat,
    on_manual,
    on_prediction,
    release_override,
)

from helpers import controller_ref_initial as ref_initial
from helpers import controller_ref_step as ref_step


def impl_step(state, config, event):
    kind = event[0]
    if kind == "predict":
        return on_prediction(state, config, event[1])
    if kind == "manual":
        return on_manual(state, Relay(event[1]))
    if kind == "release":
        return release_override(state), []
    if kind == "clock":
        return on_clock(state, config, event[1])
    if kind == "heartbeat":
        return on_heartbeat(state, event[1])
    raise AssertionError(kind)


def as_ref(state: ControllerState):
    return {"mode": state.mode.value, "relay": state.relay.value,
            "low": state.consecutive_low, "high": state.consecutive_high,
            "hb": state.last_heartbeat}


def run_both(events, k_on=1, k_off=1, interval=1.0, missed=3):
    config = ControllerConfig(k_on=k_on, k_off=k_off,
                              heartbeat_interval=interval,
                              missed_heartbeats_to_fault=missed)
    ref_config = {"k_on": k_on, "k_off": k_off, "interval": interval,
                  "missed": missed}
    state = initial_state()
    ref = ref_initial()
    trace = []
    for event in events:
        state, commands = impl_step(state, config, event)
        ref, ref_commands = ref_step(ref, ref_config, event)
        assert as_ref(state) == ref, f"state mismatch after {event}"
        assert [c.value for c in commands] == ref_commands, f"commands differ on {event}"
        trace.append((as_ref(state), ref_commands))
    return trace


class TestPredictionExamples:
    def test_immediate_trigger_with_default_debounce(self):
        config = ControllerConfig()
        state, commands = on_prediction(initial_state(), config, 0)
        assert commands == [Command.SET_RELAY_ON, Command.NOTIFY_CHARGE_NEEDED]
        assert state.relay is Relay.ON

    def test_override_ignores_predictions(self):
        state = ControllerState(mode=Mode.MANUAL_OVERRIDE, relay=Relay.OFF)
        new, commands = on_prediction(state, ControllerConfig(), 0)
        assert new == state
        assert commands == []

    def test_debounce_three_fires_on_fifth_event(self):
        config = ControllerConfig(k_on=3)
        state = initial_state()
        fired_at = None
        for i, cls in enumerate([0, 1, 0, 0, 0], start=1):
            state, commands = on_prediction(state, config, cls)
            if Command.SET_RELAY_ON in commands:
                fired_at = i
        assert fired_at == 5
        assert state.relay is Relay.ON

    def test_mid_class_resets_counters(self):
        config = ControllerConfig(k_on=2)
        state, _ = on_prediction(initial_state(), config, 0)
        state, _ = on_prediction(state, config, 1)
        assert state.consecutive_low == 0
        assert state.consecutive_high == 0

    def test_high_class_debounce_switches_off(self):
        config = ControllerConfig(k_off=2)
        state = ControllerState(relay=Relay.ON)
        state, commands = on_prediction(state, config, 2)
        assert commands == []
        state, commands = on_prediction(state, config, 2)
        assert commands == [Command.SET_RELAY_OFF]
        assert state.relay is Relay.OFF


class TestManualAndRelease:
    def test_manual_off_while_charging(self):
        state = ControllerState(mode=Mode.AUTO, relay=Relay.ON)
        new, commands = on_manual(state, Relay.OFF)
        assert new.mode is Mode.MANUAL_OVERRIDE
        assert commands == [Command.SET_RELAY_OFF]

    def test_manual_matching_current_relay_changes_mode_only(self):
        new, commands = on_manual(initial_state(), Relay.OFF)
        assert new.mode is Mode.MANUAL_OVERRIDE
        assert commands == []

    def test_override_then_release_then_low_prediction(self):
        config = ControllerConfig()
        state, _ = on_manual(initial_state(), Relay.OFF)
        state = release_override(state)
        assert state.mode is Mode.AUTO
        state, commands = on_prediction(state, config, 0)
        assert Command.SET_RELAY_ON in commands

    def test_release_idempotent_in_auto(self):
        state = initial_state()
        assert release_override(state) == state

    def test_fault_not_releasable(self):
        state = ControllerState(mode=Mode.FAULT, relay=Relay.OFF)
        assert release_override(state) == state

    def test_manual_ignored_in_fault(self):
        state = ControllerState(mode=Mode.FAULT, relay=Relay.OFF)
        new, commands = on_manual(state, Relay.ON)
        assert new == state
        assert commands == []


class TestClockAndHeartbeat:
    def test_heartbeat_within_budget_no_change(self):
        state = ControllerState(last_heartbeat=10.0)
        new, commands = on_clock(state, ControllerConfig(), now=12.9)
        assert new == state
        assert commands == []

    def test_fault_at_three_missed_heartbeats(self):
        state = ControllerState(last_heartbeat=10.0, relay=Relay.ON)
        new, commands = on_clock(state, ControllerConfig(), now=13.1)
        assert new.mode is Mode.FAULT
        assert new.relay is Relay.OFF
        assert commands == [Command.SET_RELAY_OFF]

    def test_boundary_is_strictly_greater(self):
        state = ControllerState(last_heartbeat=0.0)
        new, _ = on_clock(state, ControllerConfig(), now=3.0)
        assert new.mode is Mode.AUTO

    def test_heartbeat_recovers_fault(self):
        state = ControllerState(mode=Mode.FAULT, relay=Relay.OFF)
        new, commands = on_heartbeat(state, now=20.0)
        assert new.mode is Mode.AUTO
        assert new.last_heartbeat == 20.0
        assert commands == []

    def test_no_repeated_off_while_faulted(self):
        state = ControllerState(last_heartbeat=0.0)
        state, first = on_clock(state, ControllerConfig(), now=5.0)
        state, second = on_clock(state, ControllerConfig(), now=6.0)
        assert first == [Command.SET_RELAY_OFF]
        assert second == []


class TestExhaustiveAgainstReference:
    def test_all_single_transitions_up_to_k3(self):
        checked = 0
        for k_on, k_off in itertools.product(range(1, 4), repeat=2):
            config = ControllerConfig(k_on=k_on, k_off=k_off)
            ref_config = {"k_on": k_on, "k_off": k_off, "interval": 1.0, "missed": 3}
            counter_pairs = [(l, h) for l in range(4) for h in range(4)
                             if l == 0 or h == 0]
            events = ([("predict", c) for c in range(3)]
                      + [("manual", "on"), ("manual", "off"), ("release",),
                         ("clock", 2.0), ("clock", 4.0), ("heartbeat", 1.0)])
            for mode, relay, (low, high), event in itertools.product(
                    Mode, Relay, counter_pairs, events):
                state = ControllerState(mode=mode, relay=relay,
                                        consecutive_low=low,
                                        consecutive_high=high,
                                        last_heartbeat=0.0)
                got_state, got_commands = impl_step(state, config, event)
                ref_state, ref_commands = ref_step(as_ref(state), ref_config, event)
                assert as_ref(got_state) == ref_state, (state, event)
                assert [c.value for c in got_commands] == ref_commands, (state, event)
                checked += 1
        assert checked == 9 * 3 * 2 * 7 * 9


def random_events(rng, length):
    events = []
    now = 0.0
    for _ in range(length):
        roll = rng.integers(0, 10)
        now += float(rng.random())
        if roll < 5:
            events.append(("predict", int(rng.integers(0, 3))))
        elif roll < 6:
            events.append(("manual", "on" if rng.integers(0, 2) else "off"))
        elif roll < 7:
            events.append(("release",))
        elif roll < 9:
            events.append(("heartbeat", now))
        else:
            events.append(("clock", now + float(rng.integers(0, 6))))
    return events


class TestRandomSequenceProperties:
    def test_agreement_and_safety_over_random_sequences(self):
        rng = np.random.default_rng(1234)
        for _ in range(300):
            k_on = int(rng.integers(1, 4))
            k_off = int(rng.integers(1, 4))
            events = random_events(rng, 25)
            trace = run_both(events, k_on=k_on, k_off=k_off)
            faulted = False
            for state, commands in trace:
                if state["mode"] == "FAULT":
                    faulted = True
                if faulted and state["mode"] == "FAULT":
                    assert "SET_RELAY_ON" not in commands
                if state["mode"] != "FAULT":
                    faulted = False
                assert not (state["low"] > 0 and state["high"] > 0)

    def test_debounce_never_fires_early(self):
        rng = np.random.default_rng(99)
        config = ControllerConfig(k_on=3)
        for _ in range(200):
            state = initial_state()
            run = 0
            for cls in rng.integers(0, 3, size=30):
                before_relay = state.relay
                state, commands = on_prediction(state, config, int(cls))
                run = run + 1 if cls == 0 else 0
                if Command.SET_RELAY_ON in commands:
                    assert run >= 3
                    assert before_relay is Relay.OFF

    def test_replaying_a_trace_reproduces_it(self):
        rng = np.random.default_rng(7)
        events = random_events(rng, 50)
        first = run_both(events, k_on=2, k_off=2)
        second = run_both(events, k_on=2, k_off=2)
        assert first == second


def test_trace_line_format():
    state = ControllerState(mode=Mode.AUTO, relay=Relay.ON)
    line = format_trace_line(1.5, "predict", 0, state,
                             [Command.SET_RELAY_ON, Command.NOTIFY_CHARGE_NEEDED])
    assert line == "1.500\tpredict\t0\tAUTO\ton\tSET_RELAY_ON+NOTIFY_CHARGE_NEEDED"
    assert format_trace_line(2.0, "predict", 1, state, []) .endswith("\tNONE")

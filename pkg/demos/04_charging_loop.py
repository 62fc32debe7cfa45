#!/usr/bin/env python3
"""Drive the charging controller and device simulator through a scripted
scenario: debounced turn-on, manual override, release, heartbeat loss,
and recovery."""

from rulkit import controller as ctl
from rulkit.link import LoopbackLink, MsgType, set_relay_payload

config = ctl.ControllerConfig(k_on=2)  # two consecutive low predictions
state = ctl.initial_state()
link = LoopbackLink()


def actuate(commands):
    for command in commands:
        if command in (ctl.Command.SET_RELAY_ON, ctl.Command.SET_RELAY_OFF):
            link.send(MsgType.SET_RELAY,
                      set_relay_payload(command is ctl.Command.SET_RELAY_ON))


def show(label, commands):
    rendered = "+".join(c.value for c in commands) if commands else "-"
    print(f"{label:<28} mode={state.mode.value:<16} relay={state.relay.value:<4}"
          f" device={'on' if link.sim.relay_on else 'off':<4} commands={rendered}")


for cls in (2, 0, 1, 0, 0):
    state, commands = ctl.on_prediction(state, config, cls)
    actuate(commands)
    show(f"prediction class {cls}", commands)

state, commands = ctl.on_manual(state, ctl.Relay.OFF)
actuate(commands)
show("operator forces off", commands)

state = ctl.release_override(state)
show("override released", [])

# device goes silent; the clock watchdog cuts the relay
for frame in link.poll(0.0):
    state, _ = ctl.on_heartbeat(state, 0.0)
state, commands = ctl.on_clock(state, config, now=5.0)
actuate(commands)
show("3 heartbeats missed", commands)

for frame in link.poll(5.5):
    state, _ = ctl.on_heartbeat(state, 5.5)
show("heartbeat returns", [])

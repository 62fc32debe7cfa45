"""Shared test oracles: finite differences, parameter flattening, and an
independent dict-based interpreter of the charging policy rules."""

import numpy as np


def controller_ref_initial(now=0.0):
    return {"mode": "AUTO", "relay": "off", "low": 0, "high": 0, "hb": now}


def controller_ref_step(state, config, event):
    """Reference transition: (state dict, config dict, event tuple) ->
    (state', command names). Events: predict/manual/release/clock/heartbeat."""
    s = dict(state)
    kind = event[0]
    if kind == "predict":
        if s["mode"] != "AUTO":
            return s, []
        cls = event[1]
        if cls == 0:
            s["low"], s["high"] = s["low"] + 1, 0
            if s["low"] >= config["k_on"] and s["relay"] == "off":
                s.update(relay="on", low=0, high=0)
                return s, ["SET_RELAY_ON", "NOTIFY_CHARGE_NEEDED"]
        elif cls == 2:
            s["low"], s["high"] = 0, s["high"] + 1
            if s["high"] >= config["k_off"] and s["relay"] == "on":
                s.update(relay="off", low=0, high=0)
                return s, ["SET_RELAY_OFF"]
        else:
            s["low"] = s["high"] = 0
        return s, []
    if kind == "manual":
        if s["mode"] == "FAULT":
            return s, []
        desired = event[1]
        changed = desired != s["relay"]
        s.update(mode="MANUAL_OVERRIDE", relay=desired, low=0, high=0)
        if changed:
            return s, ["SET_RELAY_ON" if desired == "on" else "SET_RELAY_OFF"]
        return s, []
    if kind == "release":
        if s["mode"] == "FAULT":
            return s, []
        s.update(mode="AUTO", low=0, high=0)
        return s, []
    if kind == "clock":
        now = event[1]
        if s["mode"] != "FAULT" and now - s["hb"] > config["missed"] * config["interval"]:
            s.update(mode="FAULT", relay="off", low=0, high=0)
            return s, ["SET_RELAY_OFF"]
        return s, []
    if kind == "heartbeat":
        now = event[1]
        if s["mode"] == "FAULT":
            s.update(mode="AUTO", hb=now, low=0, high=0)
        else:
            s["hb"] = now
        return s, []
    raise AssertionError(kind)


def central_difference(loss_fn, theta, step=1e-5):
    """Numeric gradient of loss_fn at flat parameter vector theta."""
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        bumped = theta.copy()
        bumped[i] += step
        hi = loss_fn(bumped)
        bumped[i] = theta[i] - step
        lo = loss_fn(bumped)
        grad[i] = (hi - lo) / (2.0 * step)
    return grad


def max_relative_error(analytic, numeric, floor=1e-4):
    """Worst per-component relative error, with a floor so near-zero
    components are judged on absolute error instead."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def flatten_arrays(arrays):
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays])


def unflatten_like(vector, arrays):
    out, pos = [], 0
    for a in arrays:
        size = a.size
        out.append(vector[pos: pos + size].reshape(a.shape))
        pos += size
    return out

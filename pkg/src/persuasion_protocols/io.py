"""JSON reading and writing of an environment together with a protocol.

Document layout::

    {"prior": 0.5, "signals": ["h", "l"],
     "pi_H": {"h": 0.7, "l": 0.3}, "pi_L": {"h": 0.3, "l": 0.7},
     "m": 3,
     "transition": {"2": {"h": {"3": 1.0}, "l": {"1": 1.0}}, ...},
     "initial": {"2": 1.0},
     "action": {"3": 1.0}}

State keys are the labels ``"1".."m"``. Omitted transition targets, initial
entries and actions are 0. A state or ``(state, signal)`` pair missing from
``transition`` altogether is an error, so a typo cannot silently create a leak.
"""

from __future__ import annotations

import json

import numpy as np

from .model import Environment, Protocol, SignalModel


class DocumentError(ValueError):
    """The document is structurally malformed (as opposed to numerically invalid)."""


def _state(key, m):
    try:
        i = int(key)
    except (TypeError, ValueError):
        raise DocumentError(f"state key {key!r} is not an integer label") from None
    if not 1 <= i <= m:
        raise DocumentError(f"state {i} outside 1..{m}")
    return i


def _state_vector(obj, m, name):
    out = np.zeros(m)
    if not isinstance(obj, dict):
        raise DocumentError(f"{name} must be an object keyed by state")
    for k, v in obj.items():
        out[_state(k, m) - 1] = float(v)
    return out


def from_dict(doc):
    try:
        signals = list(doc["signals"])
        m = int(doc["m"])
        prior = float(doc["prior"])
        pi_H = [float(doc["pi_H"].get(s, 0.0)) for s in signals]
        pi_L = [float(doc["pi_L"].get(s, 0.0)) for s in signals]
        trans = doc["transition"]
    except (KeyError, TypeError, AttributeError) as exc:
        raise DocumentError(f"missing or malformed field: {exc}") from None
    if len(set(signals)) != len(signals):
        raise DocumentError("signal names must be distinct")
    if m < 1:
        raise DocumentError("m must be at least 1")
    env = Environment(prior, SignalModel(signals, pi_H, pi_L))
    t = np.zeros((m, len(signals), m))
    for i in range(1, m + 1):
        row = trans.get(str(i))
        if row is None:
            raise DocumentError(f"transition has no entry for state {i}")
        for s, name in enumerate(signals):
            if name not in row:
                raise DocumentError(f"transition has no entry for state {i}, signal {name!r}")
            for j, pr in row[name].items():
                t[i - 1, s, _state(j, m) - 1] = float(pr)
    for k in trans:
        _state(k, m)
    g = _state_vector(doc.get("initial", {}), m, "initial")
    a = _state_vector(doc.get("action", {}), m, "action")
    return env, Protocol(t, g, a)


def to_dict(env, proto, keep_zeros=False):
    sm = env.signal_model
    signals = list(sm.signals)

    def vec(x):
        return {str(i + 1): float(v) for i, v in enumerate(x) if keep_zeros or v != 0.0}

    trans = {}
    for i in range(proto.m):
        trans[str(i + 1)] = {
            name: {str(j + 1): float(v) for j, v in enumerate(proto.transition[i, s]) if v != 0.0}
            for s, name in enumerate(signals)
        }
    return {
        "prior": float(env.prior),
        "signals": signals,
        "pi_H": {name: float(v) for name, v in zip(signals, sm.pi_H)},
        "pi_L": {name: float(v) for name, v in zip(signals, sm.pi_L)},
        "m": proto.m,
        "transition": trans,
        "initial": vec(proto.initial),
        "action": vec(proto.action),
    }


def load(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"not valid JSON: {exc}") from None
    return from_dict(doc)


def dump(env, proto, path, extra=None):
    doc = to_dict(env, proto)
    if extra:
        doc = {**extra, **doc}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")

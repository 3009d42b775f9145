"""Seeded random environments and protocols for property checks."""

from __future__ import annotations

import numpy as np

from .model import Environment, Protocol, SignalModel, shape


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def random_signal_model(rng, n_signals=None):
    """Full-support signal model with 2 or 3 signals and distinct distributions."""
    n = int(rng.integers(2, 4)) if n_signals is None else n_signals
    names = ("h", "l", "m")[:n] if n <= 3 else tuple(f"s{k}" for k in range(n))
    while True:
        pi_H = rng.dirichlet(np.ones(n)) * 0.9 + 0.1 / n
        pi_L = rng.dirichlet(np.ones(n)) * 0.9 + 0.1 / n
        if np.max(np.abs(pi_H - pi_L)) > 0.05:
            return SignalModel(names, pi_H / pi_H.sum(), pi_L / pi_L.sum())


def random_environment(rng, n_signals=None):
    return Environment(float(rng.uniform(0.15, 0.85)), random_signal_model(rng, n_signals))


def _random_row(rng, m, max_support=None):
    k = int(rng.integers(1, (max_support or m) + 1))
    support = rng.choice(m, size=k, replace=False)
    row = np.zeros(m)
    row[support] = rng.dirichlet(np.ones(k))
    return row


def _random_actions(rng, m):
    a = rng.uniform(0.0, 1.0, size=m)
    # a share of coarse values so that ties between states actually occur
    coarse = rng.random(m) < 0.3
    a[coarse] = rng.choice([0.0, 0.5, 1.0], size=int(coarse.sum()))
    return a


def random_protocol(rng, env, m, absorbing_share=0.25, degenerate_start=None):
    """Arbitrary protocol: sparse random rows, a few absorbing states, random actions."""
    n = len(env.signal_model.signals)
    t = np.zeros((m, n, m))
    for i in range(m):
        if rng.random() < absorbing_share:
            t[i, :, i] = 1.0
            continue
        for s in range(n):
            t[i, s] = _random_row(rng, m, max_support=min(m, 3))
    if degenerate_start is None:
        degenerate_start = rng.random() < 0.7
    if degenerate_start:
        g = np.zeros(m)
        g[int(rng.integers(m))] = 1.0
    else:
        g = _random_row(rng, m)
    return Protocol(t, g, _random_actions(rng, m))


def random_transient_start_protocol(rng, env, m):
    """Protocol with a degenerate start at a non-absorbing state."""
    while True:
        proto = random_protocol(rng, env, m, degenerate_start=True)
        i = proto.start_state()
        if not np.all(proto.transition[i - 1, :, i - 1] == 1.0):
            return proto


def random_parsimonious(rng, env, m, max_tries=1000):
    """Parsimonious protocol on ``m >= 3`` states: 1 and ``m`` absorbing with actions 0
    and 1, degenerate start at a transient state."""
    if m < 3:
        raise ValueError("need m >= 3 for a transient start")
    n = len(env.signal_model.signals)
    for _ in range(max_tries):
        t = np.zeros((m, n, m))
        t[0, :, 0] = 1.0
        t[m - 1, :, m - 1] = 1.0
        for i in range(1, m - 1):
            for s in range(n):
                t[i, s] = _random_row(rng, m, max_support=min(m, 3))
        g = np.zeros(m)
        g[int(rng.integers(1, m - 1))] = 1.0
        a = np.zeros(m)
        a[m - 1] = 1.0
        proto = Protocol(t, g, a)
        if shape(proto).is_parsimonious:
            return proto
    raise RuntimeError("could not draw a parsimonious protocol")

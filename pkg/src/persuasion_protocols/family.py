"""Explicit protocols: the three worked examples and the near-optimal ladder family.

The ladder on ``m`` states moves up one step on the most favorable signal ``h``
and down one step on the least favorable signal ``l``; state 2 exits to the low
absorbing state 1 on ``l`` with a small probability, and state ``m - 1`` exits to
the high absorbing state ``m`` on ``h``. Every other signal leaves the state
unchanged.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .best_response import best_response, continue_everywhere
from .chain import absorption
from .diagnostics import absorbing_transition_mass, entry_metrics, lr_order
from .errors import ParamOutOfRange, RegimeError
from .model import THETAS, Protocol
from .payoffs import (
    evaluate,
    interior,
    log_power,
    receiver_optimal_value,
    sender_limit_value,
    solve_relaxed,
    spread_ratio,
)


def _binary_indices(env):
    sm = env.signal_model
    return sm.h_index, sm.l_index


def manipulable_cycle(env):
    """Three states, no absorbing state, action 0 / 0.5 / 1, start in the middle."""
    h, l = _binary_indices(env)
    moves = {(1, h): 2, (2, h): 3, (2, l): 1, (3, l): 2}
    return Protocol.from_deterministic(3, len(env.signal_model.signals), moves, 2, [0.0, 0.5, 1.0])


def three_state(env):
    """Three states; the middle one jumps to the low absorbing state on ``l`` and to
    the high one on ``h``."""
    h, l = _binary_indices(env)
    moves = {(2, h): 3, (2, l): 1}
    return Protocol.from_deterministic(3, len(env.signal_model.signals), moves, 2, [0.0, 0.0, 1.0])


def five_state_ladder(env, eps):
    """Five-state ladder started at 3 with exit probability ``eps`` at both ends."""
    if not 0.0 <= eps <= 1.0:
        raise ParamOutOfRange(f"eps = {eps} is not a probability")
    h, l = _binary_indices(env)
    moves = {
        (2, h): 3,
        (2, l): {1: eps, 2: 1.0 - eps},
        (3, h): 4,
        (3, l): 2,
        (4, h): {5: eps, 4: 1.0 - eps},
        (4, l): 3,
    }
    return Protocol.from_deterministic(5, len(env.signal_model.signals), moves, 3, [0, 0, 0, 0, 1.0])


@dataclass(frozen=True)
class FamilyParams:
    m: int
    eps1: float
    eps2: float

    def scales(self, env):
        """Multipliers turning ``eps1`` / ``eps2`` into exit probabilities."""
        sm = env.signal_model
        h, l = sm.h_index, sm.l_index
        half = (self.m - 2) / 2.0
        c_lo = math.exp(half * math.log(sm.pi_H[h] * sm.pi_L[h]))
        c_hi = math.exp(half * math.log(sm.pi_H[l] * sm.pi_L[l]))
        return c_lo, c_hi

    def exits(self, env):
        """``(exit from 2 to 1 on l, exit from m-1 to m on h)``."""
        c_lo, c_hi = self.scales(env)
        lo, hi = c_lo * self.eps1, c_hi * self.eps2
        if self.m == 3:
            # one transient state: only the ratio matters, so the larger exit is pinned at 1
            top = max(lo, hi)
            return lo / top, hi / top
        return lo, hi


def build_family(env, params):
    m = params.m
    if m < 3:
        raise ParamOutOfRange("the ladder family needs m >= 3")
    if params.eps1 <= 0 or params.eps2 <= 0:
        raise ParamOutOfRange("eps1 and eps2 must be positive")
    lo, hi = params.exits(env)
    if lo > 1.0 or hi > 1.0:
        raise ParamOutOfRange(f"exit probabilities ({lo:.6g}, {hi:.6g}) exceed 1")
    n_sig = len(env.signal_model.signals)
    h, l = _binary_indices(env)
    t = np.zeros((m, n_sig, m))
    for i in range(m):
        t[i, :, i] = 1.0  # absorbing ends and non-extreme signals hold in place
    for i in range(2, m):  # 1-indexed transient states 2..m-1
        r = i - 1
        t[r, h] = 0.0
        t[r, l] = 0.0
        if i == 2:
            t[r, l, 0] = lo
            t[r, l, r] = 1.0 - lo
        else:
            t[r, l, r - 1] = 1.0
        if i == m - 1:
            t[r, h, m - 1] = hi
            t[r, h, r] = 1.0 - hi
        else:
            t[r, h, r + 1] = 1.0
    g = np.zeros(m)
    g[1] = 1.0
    a = np.zeros(m)
    a[m - 1] = 1.0
    return Protocol(t, g, a)


def optimal_weight_ratio(env, m):
    """Ratio ``k2 / k1`` of the two exit weights that steers the ladder's limit
    absorption law onto the relaxed optimum."""
    if not interior(env, m):
        raise RegimeError("gamma^(m-2) <= kappa: acting on the prior is optimal")
    p = env.prior
    root_g = math.exp(0.5 * log_power(env, m))
    k = math.sqrt((1 - p) / p)
    return (root_g - k) / (root_g * k - 1.0)


def limit_mu_hi_H(env, m, ratio):
    """Limit of ``mu_m^H`` as the exit weights vanish with fixed ``k2 / k1 = ratio``."""
    x = ratio * math.exp(0.5 * log_power(env, m))
    return x / (1.0 + x)


def normalized_params(env, m, eps, ratio):
    """Family parameters with ``eps2 / eps1 = ratio`` scaled so the larger exit
    probability equals ``eps``."""
    probe = FamilyParams(m, 1.0, ratio)
    c_lo, c_hi = probe.scales(env)
    k1 = 1.0 / max(c_lo, c_hi * ratio)
    return FamilyParams(m, k1 * eps, k1 * ratio * eps)


SWEEP_COLUMNS = (
    "eps",
    "u_receiver",
    "u_sender",
    "mu_mH",
    "mu_1L",
    "max_abs_transition",
    "entry_metric_1",
    "entry_metric_m",
    "spread_lhs",
    "spread_rhs",
)


@dataclass(frozen=True)
class SweepRow:
    eps: float
    u_receiver: float
    u_sender: float
    mu_mH: float
    mu_1L: float
    max_abs_transition: float
    entry_metric_1: float
    entry_metric_m: float
    spread_lhs: float
    spread_rhs: float
    spread_ok: bool
    spread_strict: bool | None
    best_response_continues: bool

    def values(self):
        return tuple(getattr(self, c) for c in SWEEP_COLUMNS)


@dataclass(frozen=True)
class SweepResult:
    m: int
    ratio: float
    rows: tuple
    receiver_target: float
    sender_target: float
    alpha_star: float
    limit_mu_mH: float

    @property
    def final(self):
        return self.rows[-1]

    @property
    def receiver_gap(self):
        return abs(self.final.u_receiver - self.receiver_target)

    @property
    def sender_gap(self):
        return abs(self.final.u_sender - self.sender_target)


def geometric_grid(eps_max=1.0, eps_min=1e-6, ratio=10.0):
    if not 0 < eps_min <= eps_max or ratio <= 1:
        raise ValueError("need 0 < eps_min <= eps_max and ratio > 1")
    out = []
    e = eps_max
    while e >= eps_min * (1 - 1e-9):
        out.append(e)
        e /= ratio
    return out


def worker_count():
    try:
        return max(1, int(os.environ.get("PPL_THREADS", "1")))
    except ValueError:
        return 1


def sweep_row(env, m, eps, ratio):
    params = normalized_params(env, m, eps, ratio)
    proto = build_family(env, params)
    sigma = best_response(env, proto)
    continues = sigma == continue_everywhere(proto)
    analyses = {th: absorption(env, proto, sigma, th) for th in THETAS}
    rep = evaluate(env, proto, sigma, analyses)
    sp = spread_ratio(env, proto)
    em = entry_metrics(env, proto, lr_order(env, proto, warn=False))
    return SweepRow(
        eps=eps,
        u_receiver=rep.u_receiver,
        u_sender=rep.u_sender,
        mu_mH=analyses["H"].mu_at(m),
        mu_1L=analyses["L"].mu_at(1),
        max_abs_transition=absorbing_transition_mass(proto),
        entry_metric_1=em.lo_min,
        entry_metric_m=em.hi_min,
        spread_lhs=sp.lhs,
        spread_rhs=sp.rhs,
        spread_ok=sp.ok,
        spread_strict=sp.strict,
        best_response_continues=continues,
    )


def sweep(env, m, eps_grid=None, ratio=None, max_workers=None):
    """Evaluate the ladder family along a decreasing grid of exit scales.

    With ``m = 3`` the exit scale is irrelevant and a single row at ``eps = 1`` is
    produced.
    """
    if ratio is None:
        ratio = optimal_weight_ratio(env, m)
    if eps_grid is None:
        eps_grid = geometric_grid()
    grid = [1.0] if m == 3 else sorted(eps_grid, reverse=True)
    workers = worker_count() if max_workers is None else max_workers
    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda e: sweep_row(env, m, e, ratio), grid))
    else:
        rows = [sweep_row(env, m, e, ratio) for e in grid]
    return SweepResult(
        m=m,
        ratio=ratio,
        rows=tuple(rows),
        receiver_target=receiver_optimal_value(env, m).value,
        sender_target=sender_limit_value(env, m),
        alpha_star=solve_relaxed(env, m).alpha_star,
        limit_mu_mH=limit_mu_hi_H(env, m, ratio),
    )

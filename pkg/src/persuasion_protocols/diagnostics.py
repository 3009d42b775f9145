"""Behavioral diagnostics of parsimonious protocols.

Everything here is computed from the chain itself (first-step decompositions over
the hitting frequencies of the modified chain); Monte Carlo is used only in tests.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .best_response import continue_everywhere
from .chain import absorption
from .errors import PreconditionFailed, ShapeError, TieBreakWarning, ZeroMass
from .model import THETAS, shape
from .payoffs import solve_relaxed

RATIO_TIE_RTOL = 1e-12


def _parsimonious_setup(env, proto):
    sh = shape(proto)
    if not sh.is_parsimonious:
        raise ShapeError("protocol is not parsimonious")
    start = proto.start_state()
    transient = [i for i in proto.states if i not in (sh.lo_abs, sh.hi_abs)]
    if start is None or start not in transient:
        raise PreconditionFailed("diagnostics need a degenerate start at a transient state")
    sigma = continue_everywhere(proto)
    analyses = {th: absorption(env, proto, sigma, th) for th in THETAS}
    return sh, transient, start, sigma, analyses


def entry_distribution(env, proto, theta, target, analysis=None):
    """Law of the (state, signal) pair just before absorption at ``target``.

    Keys are ``(state, signal_name)``; the weights are
    ``nu_i * pi_theta(s) * f(i, s)(target)`` normalized over transient ``i``.
    """
    sh, transient, _, _, analyses = _parsimonious_setup(env, proto)
    an = analyses[theta] if analysis is None else analysis
    if an.mu_at(target) <= 0.0:
        raise ZeroMass(f"state {target} is never reached under {theta}")
    pi = env.pi(theta)
    idx = np.array(transient) - 1
    w = an.nu[idx, None] * pi[None, :] * proto.transition[idx, :, target - 1]
    total = w.sum()
    names = env.signal_model.signals
    out = {}
    for a, i in enumerate(transient):
        for s, name in enumerate(names):
            if w[a, s] > 0.0:
                out[(i, name)] = float(w[a, s] / total)
    return out


@dataclass(frozen=True)
class LrOrder:
    order: tuple  # transient states, increasing nu^H / nu^L
    ratios: dict
    ties: tuple  # adjacent pairs in ``order`` with equal ratios


def lr_order(env, proto, warn=True):
    """Transient states sorted by ``nu_i^H / nu_i^L``; ties broken by label."""
    _, transient, _, _, analyses = _parsimonious_setup(env, proto)
    nuH, nuL = analyses["H"].nu, analyses["L"].nu
    ratios = {}
    for i in transient:
        h, l = nuH[i - 1], nuL[i - 1]
        ratios[i] = h / l if l > 0 else (np.inf if h > 0 else np.nan)
    reached = [i for i in transient if not np.isnan(ratios[i])]
    unreached = [i for i in transient if np.isnan(ratios[i])]
    order = sorted(reached, key=lambda i: (ratios[i], i)) + unreached
    ties = tuple(
        (a, b)
        for a, b in zip(order, order[1:])
        if np.isfinite(ratios[a]) and np.isclose(ratios[a], ratios[b], rtol=RATIO_TIE_RTOL, atol=0.0)
    )
    if ties and warn:
        warnings.warn(f"transient states share a hitting-frequency ratio: {ties}", TieBreakWarning, stacklevel=2)
    return LrOrder(tuple(order), ratios, ties)


@dataclass(frozen=True)
class EntryMetrics:
    lo: dict  # theta -> P(previous = (lowest-ratio state, l) | absorbed low)
    hi: dict  # theta -> P(previous = (highest-ratio state, h) | absorbed high)

    @property
    def lo_min(self):
        return min(self.lo.values())

    @property
    def hi_min(self):
        return min(self.hi.values())


def entry_metrics(env, proto, order=None):
    sh, _, _, _, analyses = _parsimonious_setup(env, proto)
    if order is None:
        order = lr_order(env, proto, warn=False)
    h, l = env.signal_model.h_signal, env.signal_model.l_signal
    lo_state, hi_state = order.order[0], order.order[-1]
    lo, hi = {}, {}

    def share(th, target, key):
        an = analyses[th]
        if an.mu_at(target) <= 0:
            return float("nan")
        return entry_distribution(env, proto, th, target, an).get(key, 0.0)

    for th in THETAS:
        lo[th] = share(th, sh.lo_abs, (lo_state, l))
        hi[th] = share(th, sh.hi_abs, (hi_state, h))
    return EntryMetrics(lo, hi)


def absorbing_transition_mass(proto):
    """Largest one-step probability of jumping from a transient state into an absorbing one."""
    sh = shape(proto)
    if not sh.is_parsimonious:
        raise ShapeError("protocol is not parsimonious")
    lo, hi = sh.lo_abs - 1, sh.hi_abs - 1
    transient = [i for i in range(proto.m) if i not in (lo, hi)]
    if not transient:
        return 0.0
    t = proto.transition[transient]
    return float(np.max(t[:, :, lo] + t[:, :, hi]))


@dataclass(frozen=True)
class BehaviorMetrics:
    order: tuple
    absorption: dict  # theta -> (low-entry share, high-entry share)
    mixing_a: dict  # theta -> list of (cut, up share, down share)
    mixing_b: list  # list of (cut, up likelihood ratio, down likelihood ratio)
    bias: float
    alpha_star: float
    mu_hi_H: float


def _safe_div(a, b):
    return float(a / b) if b > 0 else float("nan")


def behavior_metrics(env, proto):
    """Optimal-absorption, optimal-mixing and optimal-bias statistics.

    Transient states are relabeled by :func:`lr_order`; cut ``k`` separates the
    first ``k`` of them from the rest. The modified chain sends every absorbing
    transition back to the start state.
    """
    sh, transient, start, _, analyses = _parsimonious_setup(env, proto)
    order = lr_order(env, proto)
    em = entry_metrics(env, proto, order)
    pos = [i - 1 for i in order.order]
    n = len(pos)
    # per-signal modified transition g(i, s)(j) on ordered transient states
    t = proto.transition
    g = t[np.ix_(pos, range(proto.n_signals), pos)].copy()
    exit_mass = t[pos][:, :, sh.lo_abs - 1] + t[pos][:, :, sh.hi_abs - 1]
    g[:, :, order.order.index(start)] += exit_mass
    piH, piL = env.pi("H"), env.pi("L")
    mixing_a = {}
    for th in THETAS:
        nu = analyses[th].nu[pos]
        flow = nu[:, None, None] * env.pi(th)[None, :, None] * g  # (i, s, j)
        flow = flow.sum(axis=1)
        rows = []
        for k in range(1, n):
            up = flow[:k, k:]
            down = flow[k:, :k]
            rows.append((k, _safe_div(up[k - 1].sum(), up.sum()), _safe_div(down[0].sum(), down.sum())))
        mixing_a[th] = rows
    mixing_b = []
    for k in range(1, n):
        up_H = (piH[:, None] * g[k - 1][:, k:]).sum()
        up_L = (piL[:, None] * g[k - 1][:, k:]).sum()
        dn_H = (piH[:, None] * g[k][:, :k]).sum()
        dn_L = (piL[:, None] * g[k][:, :k]).sum()
        mixing_b.append((k, _safe_div(up_H, up_L), _safe_div(dn_H, dn_L)))
    rel = solve_relaxed(env, proto.m)
    mu_hi_H = analyses["H"].mu_at(sh.hi_abs)
    absorption_ratios = {th: (em.lo[th], em.hi[th]) for th in THETAS}
    return BehaviorMetrics(
        order.order, absorption_ratios, mixing_a, mixing_b, abs(mu_hi_H - rel.alpha_star), rel.alpha_star, mu_hi_H
    )


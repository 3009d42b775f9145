"""Domain types: signal models, environments, receiver protocols, and their
structural classification.

States are labeled ``1..m`` at every public boundary (sets, dict keys, JSON);
arrays are indexed ``0..m-1`` internally, so state ``i`` lives at row ``i - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

THETAS = ("H", "L")

PROB_TOL = 1e-12
STRUCTURAL_ZERO = 1e-15


def _frozen(x):
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SignalModel:
    """Finite signal set with state-conditional distributions ``pi_H`` and ``pi_L``."""

    signals: tuple
    pi_H: np.ndarray
    pi_L: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "signals", tuple(self.signals))
        object.__setattr__(self, "pi_H", _frozen(self.pi_H))
        object.__setattr__(self, "pi_L", _frozen(self.pi_L))
        if self.pi_H.shape != (len(self.signals),) or self.pi_L.shape != (len(self.signals),):
            raise ValueError("pi_H and pi_L must have one entry per signal")

    def pi(self, theta):
        if theta == "H":
            return self.pi_H
        if theta == "L":
            return self.pi_L
        raise ValueError(f"unknown state of nature {theta!r}")

    @property
    def lr(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.pi_H / self.pi_L

    @property
    def l_bar(self):
        return float(np.max(self.lr))

    @property
    def l_under(self):
        return float(np.min(self.lr))

    @property
    def gamma(self):
        return self.l_bar / self.l_under

    @property
    def h_index(self):
        return int(np.argmax(self.lr))

    @property
    def l_index(self):
        return int(np.argmin(self.lr))

    @property
    def h_signal(self):
        return self.signals[self.h_index]

    @property
    def l_signal(self):
        return self.signals[self.l_index]

    def lr_ties(self):
        """Groups of signal names sharing a likelihood ratio (only groups of size > 1)."""
        lr = self.lr
        groups = []
        seen = set()
        for i in range(len(lr)):
            if i in seen:
                continue
            grp = [j for j in range(len(lr)) if np.isclose(lr[i], lr[j], rtol=1e-12, atol=0.0)]
            seen.update(grp)
            if len(grp) > 1:
                groups.append(tuple(self.signals[j] for j in grp))
        return groups

    @classmethod
    def binary_symmetric(cls, q):
        """``S = {h, l}`` with ``pi_H(h) = pi_L(l) = q``."""
        return cls(("h", "l"), [q, 1.0 - q], [1.0 - q, q])


@dataclass(frozen=True)
class Environment:
    prior: float
    signal_model: SignalModel

    @property
    def kappa(self):
        p = self.prior
        return max(p / (1.0 - p), (1.0 - p) / p)

    @property
    def gamma(self):
        return self.signal_model.gamma

    def pi(self, theta):
        return self.signal_model.pi(theta)

    def theta_weight(self, theta):
        return self.prior if theta == "H" else 1.0 - self.prior

    @classmethod
    def binary_symmetric(cls, q, prior=0.5):
        return cls(prior, SignalModel.binary_symmetric(q))


@dataclass(frozen=True)
class Protocol:
    """Receiver automaton ``(f, g, a)`` on ``m`` memory states.

    ``transition[i, s, j]`` is the probability of moving from state ``i + 1`` to
    ``j + 1`` on signal index ``s``; ``initial`` and ``action`` are length-``m``.
    """

    transition: np.ndarray
    initial: np.ndarray
    action: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "initial", _frozen(self.initial))
        object.__setattr__(self, "action", _frozen(self.action))
        m = self.transition.shape[0]
        if self.transition.ndim != 3 or self.transition.shape[2] != m:
            raise ValueError("transition must have shape (m, n_signals, m)")
        if self.initial.shape != (m,) or self.action.shape != (m,):
            raise ValueError("initial and action must have length m")

    @property
    def m(self):
        return self.transition.shape[0]

    @property
    def n_signals(self):
        return self.transition.shape[1]

    @property
    def states(self):
        return range(1, self.m + 1)

    def f(self, i, s, j):
        """Transition probability with 1-indexed states and a signal index."""
        return float(self.transition[i - 1, s, j - 1])

    def a(self, i):
        return float(self.action[i - 1])

    def signal_averaged(self, pi):
        """One-step matrix ``sum_s pi(s) f(i, s)(j)``."""
        return np.einsum("s,isj->ij", np.asarray(pi, dtype=float), self.transition)

    def start_state(self):
        """The start state label if ``g`` is degenerate, else ``None``."""
        support = np.flatnonzero(self.initial > STRUCTURAL_ZERO)
        if len(support) == 1 and abs(self.initial[support[0]] - 1.0) <= PROB_TOL:
            return int(support[0]) + 1
        return None

    def replace(self, transition=None, initial=None, action=None):
        return Protocol(
            self.transition if transition is None else transition,
            self.initial if initial is None else initial,
            self.action if action is None else action,
        )

    def with_action(self, i, value):
        action = self.action.copy()
        action[i - 1] = value
        return self.replace(action=action)

    def permuted(self, order):
        """Relabel states: new state ``k`` is old state ``order[k - 1]`` (1-indexed labels)."""
        idx = np.asarray(order, dtype=int) - 1
        if sorted(idx.tolist()) != list(range(self.m)):
            raise ValueError("order must be a permutation of the state labels")
        return Protocol(
            self.transition[idx][:, :, idx],
            self.initial[idx],
            self.action[idx],
        )

    def without_state(self, k):
        """Drop state ``k`` (1-indexed); callers must first move all mass away from it."""
        keep = [i for i in range(self.m) if i != k - 1]
        return Protocol(
            self.transition[keep][:, :, keep],
            self.initial[keep],
            self.action[keep],
        )

    @classmethod
    def from_deterministic(cls, m, n_signals, moves, initial_state, action):
        """Build from ``moves[(i, s)] = j`` or ``moves[(i, s)] = {j: prob}``; unspecified
        ``(i, s)`` pairs self-loop."""
        t = np.zeros((m, n_signals, m))
        for i in range(m):
            for s in range(n_signals):
                t[i, s, i] = 1.0
        for (i, s), target in moves.items():
            t[i - 1, s, :] = 0.0
            if isinstance(target, dict):
                for j, pr in target.items():
                    t[i - 1, s, j - 1] += pr
            else:
                t[i - 1, s, target - 1] = 1.0
        g = np.zeros(m)
        g[initial_state - 1] = 1.0
        return cls(t, g, action)


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    where: tuple = ()
    detail: str = ""

    def __str__(self):
        loc = f" at {self.where}" if self.where else ""
        return f"{self.kind}{loc}: {self.detail}" if self.detail else f"{self.kind}{loc}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = field(default_factory=tuple)

    @property
    def ok(self):
        return not self.violations

    def kinds(self):
        return {v.kind for v in self.violations}


def validate(env, proto):
    """Check the model constraints; violations are returned, not raised."""
    out = []
    sm = env.signal_model
    if not 0.0 < env.prior < 1.0:
        out.append(Violation("prior range", (), f"p = {env.prior}"))
    for theta in THETAS:
        pi = sm.pi(theta)
        for s, name in enumerate(sm.signals):
            if not pi[s] > 0.0:
                out.append(Violation("full support", (theta, name), f"pi_{theta}({name}) = {pi[s]}"))
        if abs(pi.sum() - 1.0) > PROB_TOL:
            out.append(Violation("signal distribution sum", (theta,), f"sums to {pi.sum():.15g}"))
    if np.allclose(sm.pi_H, sm.pi_L, rtol=0.0, atol=PROB_TOL):
        out.append(Violation("identical signal distributions", (), "pi_H == pi_L gives gamma = 1"))
    if proto.n_signals != len(sm.signals):
        out.append(
            Violation("signal count", (), f"protocol has {proto.n_signals}, model has {len(sm.signals)}")
        )
        return ValidationReport(tuple(out))
    if proto.m < 1:
        out.append(Violation("state count", (), "m must be at least 1"))
        return ValidationReport(tuple(out))
    t = proto.transition
    for i in range(proto.m):
        for s, name in enumerate(sm.signals):
            row = t[i, s]
            if np.any(row < 0.0):
                out.append(Violation("negative transition", (i + 1, name), f"min entry {row.min():.3g}"))
            if abs(row.sum() - 1.0) > PROB_TOL:
                out.append(Violation("transition row sum", (i + 1, name), f"sums to {row.sum():.15g}"))
    if np.any(proto.initial < 0.0) or abs(proto.initial.sum() - 1.0) > PROB_TOL:
        out.append(Violation("initial distribution", (), f"sums to {proto.initial.sum():.15g}"))
    for i in range(proto.m):
        ai = proto.action[i]
        if not 0.0 <= ai <= 1.0:
            out.append(Violation("action range", (i + 1,), f"a = {ai}"))
    return ValidationReport(tuple(out))


# -- classification -----------------------------------------------------------


@dataclass(frozen=True)
class StateClassification:
    absorbing: frozenset
    transient: frozenset
    recurrent_classes: tuple
    reachable: frozenset

    @property
    def nonabsorbing_recurrent(self):
        """Closed classes with more than one state."""
        return tuple(c for c in self.recurrent_classes if len(c) > 1)


def support_graph(proto):
    return proto.transition.sum(axis=1) > STRUCTURAL_ZERO


def reachable_from(adj, sources):
    seen = set(sources)
    stack = list(sources)
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            j = int(j)
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return seen


def classify_states(proto):
    t = proto.transition
    m = proto.m
    absorbing = {i + 1 for i in range(m) if np.all(t[i, :, i] >= 1.0 - PROB_TOL)}
    adj = support_graph(proto)
    _, labels = connected_components(adj, directed=True, connection="strong")
    classes = {}
    for i, c in enumerate(labels):
        classes.setdefault(int(c), []).append(i)
    recurrent = []
    for members in classes.values():
        mset = set(members)
        closed = all(set(np.flatnonzero(adj[i]).tolist()) <= mset for i in members)
        if closed:
            recurrent.append(frozenset(i + 1 for i in members))
    recurrent.sort(key=min)
    in_recurrent = set().union(*recurrent) if recurrent else set()
    transient = frozenset(i for i in range(1, m + 1) if i not in in_recurrent)
    starts = np.flatnonzero(proto.initial > STRUCTURAL_ZERO).tolist()
    reach = frozenset(i + 1 for i in reachable_from(adj, starts))
    return StateClassification(frozenset(absorbing), transient, tuple(recurrent), reach)


@dataclass(frozen=True)
class ProtocolShape:
    is_simple: bool
    is_parsimonious: bool
    lo_abs: int | None
    hi_abs: int | None


def shape(proto):
    cls = classify_states(proto)
    absorbing = sorted(cls.absorbing)
    is_simple = len(absorbing) == 2 and len(cls.transient) == proto.m - 2
    lo = hi = None
    if len(absorbing) == 2:
        lo, hi = sorted(absorbing, key=lambda i: (proto.a(i), i))
    is_pars = False
    if is_simple:
        acts = proto.action
        others = [i for i in range(1, proto.m + 1) if i != hi]
        is_pars = acts[hi - 1] == 1.0 and all(acts[i - 1] == 0.0 for i in others)
    return ProtocolShape(is_simple, is_pars, lo, hi)

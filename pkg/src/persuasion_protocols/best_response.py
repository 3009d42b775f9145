"""The sender's optimal stopping problem against a fixed protocol.

For each state of nature the sender faces an undiscounted Markov stopping problem
with reward ``a(i)`` on stopping. The value function is the least fixed point of
``V = max(a, P V)``; it is found by monotone value iteration from ``V = a`` and
polished with an exact policy-evaluation solve once the stopping set settles.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import IterationCapExceeded, TooLarge
from .model import PROB_TOL, STRUCTURAL_ZERO, THETAS, classify_states

TIE_TOL = 1e-12
VALUE_TOL = 1e-12
MAX_SWEEPS = 10**6
STABLE_SWEEPS = 100


@dataclass(frozen=True)
class ValueFunction:
    """``v[i - 1, t]`` is the sender's value in state ``i`` under ``THETAS[t]``."""

    v: np.ndarray
    sweeps: tuple = (0, 0)

    def __call__(self, i, theta):
        return float(self.v[i - 1, THETAS.index(theta)])

    def column(self, theta):
        return self.v[:, THETAS.index(theta)]


@dataclass(frozen=True)
class SenderStrategy:
    """Stationary pure strategy; ``stop[i - 1, t]`` is True when the sender stops."""

    stop: np.ndarray

    def __post_init__(self):
        arr = np.array(self.stop, dtype=bool)
        arr.setflags(write=False)
        object.__setattr__(self, "stop", arr)

    def stops(self, i, theta):
        return bool(self.stop[i - 1, THETAS.index(theta)])

    def column(self, theta):
        return self.stop[:, THETAS.index(theta)]

    def stopping_set(self, theta):
        return frozenset(int(i) + 1 for i in np.flatnonzero(self.column(theta)))

    @property
    def M_H(self):
        return self.stopping_set("H")

    @property
    def M_L(self):
        return self.stopping_set("L")

    def asymmetric_states(self):
        return self.M_H ^ self.M_L

    def with_stop(self, i, theta, value):
        stop = self.stop.copy()
        stop[i - 1, THETAS.index(theta)] = value
        return SenderStrategy(stop)

    def without_state(self, k):
        return SenderStrategy(np.delete(self.stop, k - 1, axis=0))

    def permuted(self, order):
        return SenderStrategy(self.stop[np.asarray(order, dtype=int) - 1])

    def __eq__(self, other):
        return isinstance(other, SenderStrategy) and np.array_equal(self.stop, other.stop)

    def __hash__(self):
        return hash(self.stop.tobytes())

    def table(self):
        return {i + 1: {th: bool(self.stop[i, t]) for t, th in enumerate(THETAS)} for i in range(len(self.stop))}


def absorbing_mask(proto):
    t = proto.transition
    return np.array([np.all(t[i, :, i] >= 1.0 - PROB_TOL) for i in range(proto.m)])


def continue_everywhere(proto):
    """Continue at every non-absorbing state (the best response to a parsimonious protocol)."""
    ab = absorbing_mask(proto)
    return SenderStrategy(np.column_stack([ab, ab]))


def stop_everywhere(proto):
    return SenderStrategy(np.ones((proto.m, 2), dtype=bool))


def policy_value(P, reward, terminal):
    """Expected terminal reward when play stops on ``terminal`` states.

    States from which play never reaches a terminal state score 0.
    """
    m = len(reward)
    V = np.zeros(m)
    V[terminal] = reward[terminal]
    live = ~terminal
    adj = P > STRUCTURAL_ZERO
    # backward reachability to the terminal set
    can_end = terminal.copy()
    changed = True
    while changed:
        nxt = can_end | (live & (adj[:, can_end].any(axis=1)))
        changed = bool((nxt != can_end).any())
        can_end = nxt
    R = np.flatnonzero(live & can_end)
    if len(R):
        T = np.flatnonzero(terminal)
        A = np.eye(len(R)) - P[np.ix_(R, R)]
        b = P[np.ix_(R, T)] @ reward[T]
        V[R] = np.linalg.solve(A, b)
    return V


def _theta_problem(env, proto, theta):
    P = proto.signal_averaged(env.pi(theta))
    return P, proto.action.astype(float), absorbing_mask(proto)


def value_iterates(env, proto, theta, max_sweeps=MAX_SWEEPS):
    """Yield the raw value-iteration sequence ``V_0 = a, V_{k+1} = max(a, P V_k)``."""
    P, a, _ = _theta_problem(env, proto, theta)
    V = a.copy()
    yield V.copy()
    for _ in range(max_sweeps):
        V = np.maximum(a, P @ V)
        yield V.copy()


def _solve_theta(env, proto, theta, tol, max_sweeps, stable_sweeps):
    P, a, ab = _theta_problem(env, proto, theta)
    V = a.copy()
    prev_stop = None
    stable = 0
    residual = np.inf
    for sweep in range(1, max_sweeps + 1):
        cont = P @ V
        V_new = np.maximum(a, cont)
        residual = float(np.max(np.abs(V_new - V)))
        V = V_new
        if residual < tol:
            return _polish(P, a, ab, V, tol), sweep
        stop = (a >= P @ V - TIE_TOL) | ab
        if prev_stop is not None and np.array_equal(stop, prev_stop):
            stable += 1
        else:
            stable = 0
        prev_stop = stop
        if stable >= stable_sweeps:
            W = policy_value(P, a, stop)
            if _bellman_ok(P, a, W, 1e-10):
                return W, sweep
            stable = 0
    raise IterationCapExceeded(max_sweeps, residual)


def _bellman_ok(P, a, W, tol):
    cont = P @ W
    return bool(np.all(W >= a - tol) and np.all(W >= cont - tol) and np.all(np.abs(W - np.maximum(a, cont)) <= tol))


def _polish(P, a, ab, V, tol):
    """Replace an iterate by the exact value of its greedy stopping rule when that
    value passes the Bellman check; otherwise keep the iterate."""
    stop = (a >= P @ V - TIE_TOL) | ab
    W = policy_value(P, a, stop)
    if _bellman_ok(P, a, W, 1e-10) and np.max(np.abs(W - V)) <= 1e-9:
        return W
    return V


def solve_value(env, proto, tol=VALUE_TOL, max_sweeps=MAX_SWEEPS, stable_sweeps=STABLE_SWEEPS):
    """Least fixed point of the sender's Bellman equation, per state of nature."""
    cols = []
    sweeps = []
    for theta in THETAS:
        V, n = _solve_theta(env, proto, theta, tol, max_sweeps, stable_sweeps)
        cols.append(V)
        sweeps.append(n)
    return ValueFunction(np.column_stack(cols), tuple(sweeps))


def continuation_values(env, proto, value):
    return np.column_stack(
        [proto.signal_averaged(env.pi(th)) @ value.column(th) for th in THETAS]
    )


def best_response(env, proto, value=None):
    """Stationary pure best response; the sender stops whenever stopping is at least
    as good as continuing."""
    if value is None:
        value = solve_value(env, proto)
    cont = continuation_values(env, proto, value)
    a = proto.action[:, None]
    stop = (a >= cont - TIE_TOL) | absorbing_mask(proto)[:, None]
    return SenderStrategy(stop)


def strategy_value(env, proto, sigma):
    """Sender's value of a fixed stationary strategy, shape ``(m, 2)``."""
    ab = absorbing_mask(proto)
    cols = []
    for t, theta in enumerate(THETAS):
        P = proto.signal_averaged(env.pi(theta))
        cols.append(policy_value(P, proto.action.astype(float), sigma.stop[:, t] | ab))
    return np.column_stack(cols)


def is_best_response(env, proto, sigma, tol=1e-9, value=None):
    if value is None:
        value = solve_value(env, proto)
    return bool(np.max(np.abs(strategy_value(env, proto, sigma) - value.v)) <= tol)


@dataclass(frozen=True)
class OracleResult:
    strategy: SenderStrategy
    value: np.ndarray
    maximizers: dict


def enumerate_best_response_oracle(env, proto, max_states=12, tol=1e-12):
    """Brute force over every stationary stopping set, each scored by an exact
    hitting-probability solve. Returns the pointwise-best value, one strategy
    achieving it everywhere (largest stopping set among ties), and all maximizers
    per state of nature."""
    if proto.m > max_states:
        raise TooLarge(f"m = {proto.m} exceeds the enumeration limit {max_states}")
    ab = absorbing_mask(proto)
    free = [i for i in range(proto.m) if not ab[i]]
    a = proto.action.astype(float)
    values = []
    stops = []
    maximizers = {}
    for theta in THETAS:
        P = proto.signal_averaged(env.pi(theta))
        scored = []
        for bits in itertools.product((False, True), repeat=len(free)):
            stop = ab.copy()
            for i, b in zip(free, bits):
                stop[i] = b
            scored.append((stop, policy_value(P, a, stop)))
        best = np.max(np.array([v for _, v in scored]), axis=0)
        winners = [s for s, v in scored if np.all(v >= best - tol)]
        winners.sort(key=lambda s: (-int(s.sum()), tuple(np.flatnonzero(s))))
        maximizers[theta] = [frozenset(int(i) + 1 for i in np.flatnonzero(s)) for s in winners]
        values.append(best)
        stops.append(winners[0])
    return OracleResult(SenderStrategy(np.column_stack(stops)), np.column_stack(values), maximizers)


def is_fully_manipulable(env, proto, value=None, tol=1e-9):
    """True when the sender can secure the best action everywhere the protocol starts."""
    if value is None:
        value = solve_value(env, proto)
    top = float(np.max(proto.action))
    reach = [i - 1 for i in classify_states(proto).reachable]
    return bool(np.all(np.abs(value.v[reach] - top) <= tol))

"""Markov chains induced by a protocol and a sender strategy.

Terminal states (sender stops, or the protocol is absorbing) end play. From the
non-terminal block ``Q`` of the transition matrix we get absorption
probabilities, expected absorption time, and, for a fixed start state, the
relative hitting frequencies as the stationary law of the *modified* chain in
which every exit is sent back to the start.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .best_response import absorbing_mask
from .errors import PreconditionFailed, SingularSystem
from .model import STRUCTURAL_ZERO, reachable_from


@dataclass(frozen=True)
class InducedChain:
    theta: str
    P: np.ndarray  # terminal rows are identity
    step: np.ndarray  # one-step law before stopping is applied
    terminal: np.ndarray
    start: np.ndarray

    @property
    def m(self):
        return len(self.terminal)


def induce(env, proto, sigma, theta):
    step = proto.signal_averaged(env.pi(theta))
    terminal = sigma.column(theta) | absorbing_mask(proto)
    P = step.copy()
    P[terminal] = 0.0
    P[terminal, terminal] = 1.0
    return InducedChain(theta, P, step, terminal, proto.initial.copy())


@dataclass(frozen=True)
class AbsorptionAnalysis:
    theta: str
    mu: np.ndarray  # absorption probability per state (nonzero only on terminal states)
    end_prob: float
    expected_time: float
    nu: np.ndarray | None = None
    visits: np.ndarray | None = None
    start: int | None = None
    trapped: np.ndarray = field(default=None)

    def mu_at(self, i):
        return float(self.mu[i - 1])

    def nu_at(self, i):
        return None if self.nu is None else float(self.nu[i - 1])


def _can_end(chain):
    adj = chain.step > STRUCTURAL_ZERO
    live = ~chain.terminal
    ok = chain.terminal.copy()
    changed = True
    while changed:
        nxt = ok | (live & adj[:, ok].any(axis=1))
        changed = bool((nxt != ok).any())
        ok = nxt
    return ok


def absorption_matrix(chain):
    """``B[i, j]``: probability that play from ``i`` ends at terminal ``j``, and the
    expected-visit matrix ``N`` on the non-terminal states that can still end.

    Non-terminal states that cannot reach a terminal state (closed classes) keep
    all their mass trapped and get zero rows.
    """
    m = chain.m
    term = np.flatnonzero(chain.terminal)
    B = np.zeros((m, m))
    B[term, term] = 1.0
    ends = _can_end(chain)
    R = np.flatnonzero(~chain.terminal & ends)
    N = np.zeros((m, m))
    if len(R):
        A = np.eye(len(R)) - chain.step[np.ix_(R, R)]
        lu_inv = np.linalg.solve(A, np.eye(len(R)))
        if not np.all(np.isfinite(lu_inv)):
            raise SingularSystem("I - Q is singular on the live states")
        N[np.ix_(R, R)] = lu_inv
        B[np.ix_(R, term)] = lu_inv @ chain.step[np.ix_(R, term)]
    trapped = ~chain.terminal & ~ends
    return B, N, trapped


def modified_chain(chain, start):
    """Transient block with every exit redirected to ``start`` (1-indexed), restricted
    to the states reachable from ``start`` without passing a terminal state.

    Returns ``(states, matrix)`` with 0-indexed ``states``.
    """
    s0 = start - 1
    live = ~chain.terminal
    adj = (chain.step > STRUCTURAL_ZERO) & live[None, :] & live[:, None]
    states = sorted(reachable_from(adj, [s0]))
    idx = np.array(states)
    G = chain.step[np.ix_(idx, idx)].copy()
    exit_mass = 1.0 - G.sum(axis=1)
    G[:, states.index(s0)] += exit_mass
    return idx, G


def stationary(G):
    """Stationary law of an irreducible stochastic matrix by a dense linear solve."""
    n = len(G)
    A = G.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    x = np.linalg.solve(A, b)
    return x


def absorption(env, proto, sigma, theta, start=None, strict=False):
    """Absorption law, expected absorption time and hitting frequencies.

    ``start`` (1-indexed) overrides ``g``. Hitting frequencies are computed only
    for a degenerate start at a non-terminal state that ends with probability 1.
    With ``strict=True`` any trapped mass raises :class:`SingularSystem`.
    """
    chain = induce(env, proto, sigma, theta)
    if start is None:
        g = chain.start
        start = proto.start_state()
    else:
        g = np.zeros(chain.m)
        g[start - 1] = 1.0
    B, N, trapped = absorption_matrix(chain)
    mu = g @ B
    end_prob = float(mu.sum())
    # whether mass is trapped is decided on the support graph, not by the
    # rounded value of 1 - end_prob (ill-conditioned when exits are tiny)
    live = (chain.step > STRUCTURAL_ZERO) & ~chain.terminal[:, None]
    seen = reachable_from(live, np.flatnonzero(g > STRUCTURAL_ZERO))
    trapped_mass = 1.0 - end_prob if any(trapped[i] for i in seen) else 0.0
    if strict and trapped_mass > 0.0:
        raise SingularSystem(f"play never ends with probability {trapped_mass:.6g}", trapped_mass)
    if trapped_mass > 0.0:
        return AbsorptionAnalysis(theta, mu, end_prob, float("inf"), None, None, start, trapped)
    visits = g @ N
    expected_time = float(visits.sum())
    nu = None
    if start is not None and not chain.terminal[start - 1]:
        idx, G = modified_chain(chain, start)
        nu = np.zeros(chain.m)
        nu[idx] = stationary(G)
    return AbsorptionAnalysis(theta, mu, end_prob, expected_time, nu, visits, start, trapped)


def hellman_check(env, proto, sigma, theta, analysis=None):
    """Largest gap over terminal targets between the absorption probability and
    ``E[tau] * sum_i nu_i p_{i, target}``."""
    chain = induce(env, proto, sigma, theta)
    start = proto.start_state()
    if start is None or chain.terminal[start - 1]:
        raise PreconditionFailed("hellman_check needs a degenerate start at a non-terminal state")
    if analysis is None:
        analysis = absorption(env, proto, sigma, theta)
    if analysis.nu is None or not np.isfinite(analysis.expected_time):
        raise PreconditionFailed("hellman_check needs play to end with probability 1")
    live = ~chain.terminal
    flow = analysis.nu[live] @ chain.step[live]
    predicted = analysis.expected_time * flow
    term = chain.terminal
    return float(np.max(np.abs(analysis.mu[term] - predicted[term])))


@dataclass(frozen=True)
class EmpiricalAnalysis:
    theta: str
    runs: int
    seed: int
    mu: np.ndarray
    mu_se: np.ndarray
    nu: np.ndarray
    nu_se: np.ndarray
    expected_time: float
    expected_time_se: float
    end_prob: float
    capped: int
    final_state: np.ndarray = field(repr=False)
    last_state: np.ndarray = field(repr=False)
    last_signal: np.ndarray = field(repr=False)


def _joint_tables(env, proto, theta):
    """Per-state cumulative law over flattened (signal, next state) pairs."""
    joint = env.pi(theta)[None, :, None] * proto.transition
    flat = joint.reshape(proto.m, -1)
    cum = np.cumsum(flat, axis=1)
    cum[:, -1] = 1.0
    return cum


def simulate(env, proto, sigma, theta, runs, seed, max_steps=10**7, start=None):
    """Monte Carlo estimate of the absorption analysis, vectorized over runs.

    Runs still going after ``max_steps`` steps are reported as ``capped`` and
    counted as non-ending mass.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    m = proto.m
    terminal = sigma.column(theta) | absorbing_mask(proto)
    cum = _joint_tables(env, proto, theta)
    if start is None:
        state = rng.choice(m, size=runs, p=proto.initial)
    else:
        state = np.full(runs, start - 1)
    visits = np.zeros((runs, m), dtype=np.int64)
    steps = np.zeros(runs, dtype=np.int64)
    last_state = np.full(runs, -1)
    last_signal = np.full(runs, -1)
    active = np.flatnonzero(~terminal[state])
    n_steps = 0
    while len(active) and n_steps < max_steps:
        cur = state[active]
        visits[active, cur] += 1
        steps[active] += 1
        u = rng.random(len(active))
        k = (cum[cur] < u[:, None]).sum(axis=1)
        k = np.minimum(k, cum.shape[1] - 1)
        last_state[active] = cur
        last_signal[active] = k // m
        state[active] = k % m
        active = active[~terminal[state[active]]]
        n_steps += 1
    capped = len(active)
    ended = np.ones(runs, dtype=bool)
    ended[active] = False
    counts = np.bincount(state[ended], minlength=m).astype(float)
    mu = counts / runs
    mu_se = np.sqrt(mu * (1.0 - mu) / runs)
    done = steps[ended].astype(float)
    tau = float(done.mean()) if len(done) else float("nan")
    tau_se = float(done.std(ddof=1) / np.sqrt(len(done))) if len(done) > 1 else float("nan")
    total = visits[ended].sum(axis=0).astype(float)
    nu = total / total.sum() if total.sum() > 0 else np.zeros(m)
    if len(done) > 1 and total.sum() > 0:
        # delta method for a ratio of means
        resid = visits[ended] - np.outer(done, nu)
        nu_se = resid.std(axis=0, ddof=1) / (np.sqrt(len(done)) * done.mean())
    else:
        nu_se = np.full(m, np.nan)
    return EmpiricalAnalysis(
        theta, runs, seed, mu, mu_se, nu, nu_se, tau, tau_se, float(ended.mean()), capped,
        state.copy(), last_state, last_signal,
    )


def simulate_shared_signals(proto, signal_path, runs, seed, start=None):
    """Run independent copies of the protocol on one common signal sequence.

    Only the protocol's own transition randomness differs between copies. Returns
    the final state (0-indexed, ``-1`` if the path ran out first) per copy.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    m = proto.m
    ab = absorbing_mask(proto)
    cum = np.cumsum(proto.transition, axis=2)
    cum[:, :, -1] = 1.0
    if start is None:
        state = rng.choice(m, size=runs, p=proto.initial)
    else:
        state = np.full(runs, start - 1)
    for s in signal_path:
        live = np.flatnonzero(~ab[state])
        if not len(live):
            break
        u = rng.random(len(live))
        nxt = (cum[state[live], s] < u[:, None]).sum(axis=1)
        state[live] = np.minimum(nxt, m - 1)
    out = state.copy()
    out[~ab[state]] = -1
    return out

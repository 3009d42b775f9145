"""Reduce an arbitrary protocol to a parsimonious one without hurting the receiver.

The pipeline carries a (protocol, sender best response) profile through a
sequence of local rewrites. Every rewrite keeps the carried strategy a best
response (checked after each step) and weakly raises the receiver's payoff
evaluated at that strategy:

1. ``to_simple``: create absorbing states inside recurrent classes, go from one
   absorbing state to two, and merge surplus absorbing states into the two
   extremes.
2. ``to_parsimonious``: prune transient states where the sender stops under
   both states of nature, lower actions at states where the sender never stops, bound
   actions into ``[a(lo), a(hi)]``, and shrink the asymmetric stopping set with
   a linear program over the actions there. Finally rescale actions to
   ``{0, 1}`` or fall back to acting on the prior.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linprog

from .best_response import absorbing_mask, best_response, is_best_response
from .errors import LpInfeasible, NoIntermediate, ProtocolError
from .model import THETAS, Protocol, classify_states, shape
from .payoffs import evaluate

PAYOFF_SLACK = 1e-9
BIND_TOL = 1e-9
ACTION_TOL = 1e-12


# -- elementary rewrites --------------------------------------------------------


def make_state_absorbing(proto, i):
    """Replace every transition out of ``i`` by a self-loop."""
    t = proto.transition.copy()
    t[i - 1] = 0.0
    t[i - 1, :, i - 1] = 1.0
    return proto.replace(transition=t)


def absorbing_by_action(proto):
    """Absorbing states sorted by ``(a, label)``."""
    ab = np.flatnonzero(absorbing_mask(proto)) + 1
    return sorted((int(i) for i in ab), key=lambda i: (proto.a(i), i))


def merge_plan(proto, k=None):
    """``(k, lo, hi, rho)`` for folding absorbing state ``k`` into the extremes.

    ``rho`` is the share sent to the high extreme; ``k`` defaults to the
    lowest-labeled intermediate absorbing state.
    """
    order = absorbing_by_action(proto)
    if len(order) < 3:
        raise NoIntermediate(f"need at least 3 absorbing states, found {len(order)}")
    lo, hi = order[0], order[-1]
    middle = order[1:-1]
    if k is None:
        k = min(middle)
    elif k not in middle:
        raise NoIntermediate(f"state {k} is not an intermediate absorbing state")
    a_lo, a_hi = proto.a(lo), proto.a(hi)
    rho = 0.5 if a_hi == a_lo else (proto.a(k) - a_lo) / (a_hi - a_lo)
    return k, lo, hi, float(rho)


def merge_absorbing(proto, k=None):
    """Delete intermediate absorbing state ``k``, splitting its inflow and initial
    mass between the extremes so the expected action is unchanged."""
    k, lo, hi, rho = merge_plan(proto, k)
    t = proto.transition.copy()
    g = proto.initial.copy()
    inflow = t[:, :, k - 1].copy()
    t[:, :, hi - 1] += rho * inflow
    t[:, :, lo - 1] += (1.0 - rho) * inflow
    t[:, :, k - 1] = 0.0
    g[hi - 1] += rho * g[k - 1]
    g[lo - 1] += (1.0 - rho) * g[k - 1]
    g[k - 1] = 0.0
    return proto.replace(transition=t, initial=g).without_state(k)


def prior_protocol(env, n_signals):
    """Two absorbing states with actions 0 and 1, started at the one matching the
    more likely state of nature."""
    t = np.zeros((2, n_signals, 2))
    t[0, :, 0] = 1.0
    t[1, :, 1] = 1.0
    g = np.array([0.0, 1.0]) if env.prior > 0.5 else np.array([1.0, 0.0])
    return Protocol(t, g, [0.0, 1.0])


# -- trace ----------------------------------------------------------------------


@dataclass(frozen=True)
class TraceStep:
    name: str
    m_before: int
    m_after: int
    u_before: float
    u_after: float
    detail: dict = field(default_factory=dict)


@dataclass
class ReductionTrace:
    u_input: float
    steps: list = field(default_factory=list)
    final: Protocol | None = None

    @property
    def u_final(self):
        return self.steps[-1].u_after if self.steps else self.u_input

    def u_column(self):
        return [self.u_input] + [s.u_after for s in self.steps]

    def monotone(self, slack=PAYOFF_SLACK):
        return all(s.u_after >= s.u_before - slack for s in self.steps)

    def to_dict(self, env=None):
        from .io import to_dict as protocol_doc

        out = {
            "u_input": self.u_input,
            "u_final": self.u_final,
            "steps": [asdict(s) for s in self.steps],
        }
        if self.final is not None and env is not None:
            out["final"] = protocol_doc(env, self.final)
        return out

    def to_json(self, env=None):
        return json.dumps(self.to_dict(env), indent=2)


class _Run:
    """Mutable (protocol, strategy, payoff) triple plus its trace."""

    def __init__(self, env, proto, sigma, check=True):
        self.env = env
        self.proto = proto
        self.sigma = sigma
        self.check = check
        self.u = evaluate(env, proto, sigma).u_receiver
        self.trace = ReductionTrace(self.u)

    def apply(self, name, proto, sigma, **detail):
        if self.check and not is_best_response(self.env, proto, sigma):
            raise ProtocolError(f"internal: strategy is no longer a best response after {name}")
        u = evaluate(self.env, proto, sigma).u_receiver
        self.trace.steps.append(TraceStep(name, self.proto.m, proto.m, self.u, u, detail))
        self.proto, self.sigma, self.u = proto, sigma, u

    def replace_all(self, name, proto, sigma, **detail):
        """A step whose strategy is recomputed rather than carried."""
        u = evaluate(self.env, proto, sigma).u_receiver
        self.trace.steps.append(TraceStep(name, self.proto.m, proto.m, self.u, u, detail))
        self.proto, self.sigma, self.u = proto, sigma, u


def _stop_both(sigma, i):
    return sigma.with_stop(i, "H", True).with_stop(i, "L", True)


def _continue_both(sigma, i):
    return sigma.with_stop(i, "H", False).with_stop(i, "L", False)


def _argmax_action(proto, states):
    return min(states, key=lambda i: (-proto.a(i), i))


# -- stage 1: simple protocols ----------------------------------------------------


def _absorb(run, i, reason):
    proto = make_state_absorbing(run.proto, i)
    run.apply("make_absorbing", proto, _stop_both(run.sigma, i), state=i, reason=reason)


def _merge(run, k=None):
    k, lo, hi, rho = merge_plan(run.proto, k)
    proto = merge_absorbing(run.proto, k)
    run.apply("merge", proto, run.sigma.without_state(k), state=k, low=lo, high=hi, rho=rho)


def _simple_loop(run):
    while True:
        proto = run.proto
        cls = classify_states(proto)
        n_abs = len(cls.absorbing)
        classes = cls.nonabsorbing_recurrent
        if n_abs > 2:
            _merge(run)
        elif classes:
            target = min(classes, key=min)
            _absorb(run, _argmax_action(proto, target), "recurrent class")
        elif n_abs == 1:
            (only,) = cls.absorbing
            others = [i for i in proto.states if i != only]
            if not others or max(proto.a(i) for i in others) <= proto.a(only):
                fallback = prior_protocol(run.env, proto.n_signals)
                run.replace_all("prior_fallback", fallback, best_response(run.env, fallback), reason="no learning")
                return
            _absorb(run, _argmax_action(proto, others), "second absorbing state")
        elif n_abs == 2:
            return
        else:  # pragma: no cover - a finite chain always has a closed class
            raise ProtocolError("internal: no absorbing state and no recurrent class")


def _start(env, proto):
    if proto.m < 2:
        raise ValueError("reduction needs at least two states")
    return _Run(env, proto, best_response(env, proto))


def to_simple(env, proto):
    """Protocol with exactly two absorbing states and all others transient."""
    run = _start(env, proto)
    _simple_loop(run)
    run.trace.final = run.proto
    return run.proto, run.trace


# -- stage 2: the linear program on asymmetric stopping states -------------------


def _value_maps(env, proto, sigma):
    """Per theta, the matrix ``A`` with ``V_sigma = A @ a`` and the one-step matrix."""
    ab = absorbing_mask(proto)
    out = {}
    for t, th in enumerate(THETAS):
        P = proto.signal_averaged(env.pi(th))
        stop = sigma.stop[:, t] | ab
        S = np.flatnonzero(stop)
        C = np.flatnonzero(~stop)
        A = np.zeros((proto.m, proto.m))
        A[S, S] = 1.0
        if len(C):
            lu = np.linalg.solve(np.eye(len(C)) - P[np.ix_(C, C)], P[np.ix_(C, S)])
            A[np.ix_(C, S)] = lu
        out[th] = (A, P, stop)
    return out


@dataclass(frozen=True)
class LpProblem:
    free: tuple  # labels of the decision variables
    rows: np.ndarray  # constraint rows r with r @ a_tilde >= 0
    row_keys: tuple  # (state, theta) per row
    objective: np.ndarray  # receiver payoff = objective @ a_tilde + constant
    constant: float
    bounds: tuple


def build_program(env, proto, sigma):
    sh = shape(proto)
    lo, hi = sh.lo_abs, sh.hi_abs
    free = tuple(sorted(sigma.asymmetric_states()))
    maps = _value_maps(env, proto, sigma)
    ab = absorbing_mask(proto)
    rows, keys = [], []
    eye = np.eye(proto.m)
    for th in THETAS:
        A, P, stop = maps[th]
        for i in range(proto.m):
            if ab[i]:
                continue
            rows.append(eye[i] - P[i] @ A if stop[i] else A[i] - eye[i])
            keys.append((i + 1, th))
    g = proto.initial
    p = env.prior
    objective = p * (g @ maps["H"][0]) - (1 - p) * (g @ maps["L"][0])
    return LpProblem(free, np.array(rows), tuple(keys), objective, 1.0 - p, (proto.a(lo), proto.a(hi)))


def solve_program(prob, action):
    """Extreme-point maximizer of the receiver payoff over the free actions."""
    idx = np.array(prob.free) - 1
    base = np.array(action, dtype=float)
    base[idx] = 0.0
    R = prob.rows
    A_ub = -R[:, idx]
    b_ub = R @ base + ACTION_TOL
    c = -prob.objective[idx]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[prob.bounds] * len(idx), method="highs-ds")
    if res.status != 0:
        raise LpInfeasible(f"action program failed: {res.message}")
    x = np.clip(res.x, *prob.bounds)
    full = base.copy()
    full[idx] = x
    return full


def _binding_candidates(prob, action):
    """Rewrites suggested by the constraints binding at ``action``, lowest label first."""
    a_lo, a_hi = prob.bounds
    slack = prob.rows @ action
    by_key = dict(zip(prob.row_keys, slack))
    out = []
    for i in prob.free:
        x = action[i - 1]
        if abs(x - a_lo) <= BIND_TOL:
            out.append(("box_low", i, None))
        if abs(x - a_hi) <= BIND_TOL:
            out.append(("box_high", i, None))
        for th in THETAS:
            if abs(by_key[(i, th)]) <= BIND_TOL:
                out.append(("indifferent", i, th))
    return out


def _apply_candidate(proto, sigma, action, cand, bounds):
    kind, i, th = cand
    a = action.copy()
    if kind == "box_low":
        a[i - 1] = bounds[0]
        return proto.replace(action=a), _continue_both(sigma, i)
    if kind == "box_high":
        a[i - 1] = bounds[1]
        return proto.replace(action=a), _stop_both(sigma, i)
    other = "L" if th == "H" else "H"
    # the indifferent state of nature copies the other one's choice
    return proto.replace(action=a), sigma.with_stop(i, th, sigma.stops(i, other))


def _lp_step(env, proto, sigma):
    prob = build_program(env, proto, sigma)
    if not prob.free:
        return proto, sigma, None
    action = solve_program(prob, proto.action)
    tried = []
    for cand in _binding_candidates(prob, action):
        new_proto, new_sigma = _apply_candidate(proto, sigma, action, cand, prob.bounds)
        tried.append(cand)
        if is_best_response(env, new_proto, new_sigma):
            kind, i, th = cand
            detail = {
                "binding": kind,
                "state": i,
                "theta": th,
                "free": list(prob.free),
                "actions": [float(action[j - 1]) for j in prob.free],
                "candidates": len(tried),
            }
            return new_proto, new_sigma, detail
    raise LpInfeasible(f"no usable binding constraint at the program's extreme point (tried {tried})")


def lp_symmetrize(env, proto, sigma):
    """One pass of the action program: re-optimize actions on the asymmetric
    stopping states and use a binding constraint to make the sender's choice
    agree across states of nature at one of them."""
    new_proto, new_sigma, _ = _lp_step(env, proto, sigma)
    return new_proto, new_sigma


# -- stage 2 driver ----------------------------------------------------------------


def _transient(proto):
    ab = absorbing_mask(proto)
    return [i for i in proto.states if not ab[i - 1]]


def _prune(run, i):
    _absorb(run, i, "stops in both states of nature")
    _merge(run)


def _parsimonious_loop(run):
    last = None
    while True:
        proto, sigma = run.proto, run.sigma
        sh = shape(proto)
        if not sh.is_simple:
            raise ProtocolError("internal: profile lost its simple shape")
        lo, hi = sh.lo_abs, sh.hi_abs
        a_lo, a_hi = proto.a(lo), proto.a(hi)
        transient = _transient(proto)
        both = [i for i in transient if sigma.stops(i, "H") and sigma.stops(i, "L")]
        never = [i for i in transient if not sigma.stops(i, "H") and not sigma.stops(i, "L")]
        asym = sorted(sigma.asymmetric_states())
        unlowered = [i for i in never if proto.a(i) != a_lo]
        measure = (proto.m, len(asym), len(unlowered))
        if last is not None and not measure < last:
            raise ProtocolError(f"internal: reduction measure did not decrease ({last} -> {measure})")
        last = measure
        if both:
            _prune(run, both[0])
            continue
        if unlowered:
            a = proto.action.copy()
            for i in unlowered:
                a[i - 1] = a_lo
            run.apply("lower_actions", proto.replace(action=a), sigma, states=unlowered, value=a_lo)
            continue
        low = [i for i in asym if proto.a(i) < a_lo - ACTION_TOL]
        if low:
            raise ProtocolError(f"internal: best response stops below the low action at {low}")
        high = [i for i in asym if proto.a(i) > a_hi + ACTION_TOL]
        if high:
            j = _argmax_action(proto, proto.states)
            run.apply("stop_at_max_action", proto, _stop_both(sigma, j), state=j)
            continue
        if not asym:
            return
        new_proto, new_sigma, detail = _lp_step(run.env, proto, sigma)
        run.apply("lp_symmetrize", new_proto, new_sigma, **detail)


def _finish(run):
    """Rescale actions to ``{0, 1}`` and relabel, or act on the prior when that is
    at least as good; one trace step either way."""
    env, proto = run.env, run.proto
    sh = shape(proto)
    lo, hi = sh.lo_abs, sh.hi_abs
    a_lo, a_hi = proto.a(lo), proto.a(hi)
    fallback = prior_protocol(env, proto.n_signals)
    if a_hi - a_lo <= ACTION_TOL:
        run.replace_all("prior_fallback", fallback, best_response(env, fallback), reason="constant action")
        return
    a = np.zeros(proto.m)
    a[hi - 1] = 1.0
    order = [lo] + [i for i in proto.states if i not in (lo, hi)] + [hi]
    rescaled = proto.replace(action=a).permuted(order)
    sigma = run.sigma.permuted(order)
    if evaluate(env, rescaled, sigma).u_receiver < max(env.prior, 1.0 - env.prior):
        run.replace_all("prior_fallback", fallback, best_response(env, fallback), reason="prior dominates")
        return
    run.apply("rescale", rescaled, sigma, low=a_lo, high=a_hi, order=order)


def to_parsimonious(env, proto, check=True):
    """Parsimonious protocol with no more states and a weakly higher receiver payoff.

    Returns the input unchanged (with an empty trace) when it is already
    parsimonious.
    """
    if shape(proto).is_parsimonious:
        sigma = best_response(env, proto)
        trace = ReductionTrace(evaluate(env, proto, sigma).u_receiver, [], proto)
        return proto, trace
    run = _start(env, proto)
    run.check = check
    _simple_loop(run)
    if not shape(run.proto).is_parsimonious:
        _parsimonious_loop(run)
        _finish(run)
    run.trace.final = run.proto
    return run.proto, run.trace


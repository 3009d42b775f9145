"""The acceptance suite: one function per criterion, shared by the CLI and pytest.

Each check returns a :class:`CheckResult`; tolerances are module constants so
that a reader can see every threshold in one place.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import best_response as br
from . import chain
from . import diagnostics as dg
from . import family as fam
from . import generators as gen
from . import payoffs as pay
from . import reduction as red
from .model import THETAS, Environment, SignalModel, shape

EXACT_TOL = 1e-12
CONVERGENCE_TOL = 1e-3
ORACLE_TOL = 1e-9
HELLMAN_TOL = 1e-9
SPREAD_SLACK = 1e-10
HITTING_SLACK = 1e-9
PAYOFF_SLACK = 1e-9
MONOTONE_SLACK = 1e-12
MC_SIGMAS = 3.0

SWEEP_GRID = tuple(10.0 ** -k for k in range(0, 7))


@dataclass
class CheckResult:
    id: str
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        info = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"{status} {self.id} {self.title} ({self.seconds:.2f}s) {info}"

    def as_dict(self):
        return {
            "id": self.id,
            "title": self.title,
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "detail": {k: _plain(v) for k, v in self.detail.items()},
        }


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _symmetric(q=0.7, p=0.5):
    return Environment.binary_symmetric(q, prior=p)


def _receiver_closed_form(p, G):
    """Receiver supremum in the interior regime, written in the un-normalized form."""
    return 1.0 - (2.0 * math.sqrt(p * (1 - p) * G) - 1.0) / (G - 1.0)


def _sender_closed_form(p, G):
    return p + (2 * p - 1) / (G - 1.0)


# -- criteria ------------------------------------------------------------------------


def c01_three_state():
    env = _symmetric()
    rep = pay.evaluate(env, fam.three_state(env))
    err_r, err_s = abs(rep.u_receiver - 0.7), abs(rep.u_sender - 0.5)
    return max(err_r, err_s) <= EXACT_TOL, {"u_receiver": rep.u_receiver, "u_sender": rep.u_sender}


def c02_manipulable():
    env = _symmetric()
    proto = fam.manipulable_cycle(env)
    v = br.solve_value(env, proto)
    rep = pay.evaluate(env, proto)
    v_err = float(np.max(np.abs(v.v - 1.0)))
    ok = v_err <= EXACT_TOL and abs(rep.u_receiver - 0.5) <= EXACT_TOL
    return ok, {"max_abs_V_minus_1": v_err, "u_receiver": rep.u_receiver}


def c03_five_state_deterministic():
    env = _symmetric()
    rep = pay.evaluate(env, fam.five_state_ladder(env, 1.0))
    target = 0.49 / 0.58
    return abs(rep.u_receiver - target) <= EXACT_TOL, {"u_receiver": rep.u_receiver, "target": target}


def _symmetric_sweep():
    env = _symmetric()
    return env, fam.sweep(env, 5, SWEEP_GRID)


def _asymmetric_sweep():
    env = Environment(0.6, SignalModel.binary_symmetric(0.7))
    return env, fam.sweep(env, 4, SWEEP_GRID, ratio=fam.optimal_weight_ratio(env, 4))


def _row(result, eps):
    return next(r for r in result.rows if math.isclose(r.eps, eps, rel_tol=1e-9))


def c04_symmetric_convergence():
    q = 0.7
    _, res = _symmetric_sweep()
    target = q**3 / (q**3 + (1 - q) ** 3)
    row = _row(res, 1e-4)
    u = [r.u_receiver for r in res.rows]  # eps decreasing
    monotone = all(b >= a - MONOTONE_SLACK for a, b in zip(u, u[1:]))
    gap = abs(row.u_receiver - target)
    return gap <= CONVERGENCE_TOL and monotone, {"gap_at_1e-4": gap, "target": target, "monotone": monotone}


def c05_asymmetric_convergence():
    env, res = _asymmetric_sweep()
    G = env.gamma ** 2
    target = _receiver_closed_form(env.prior, G)
    gap = abs(res.final.u_receiver - target)
    return gap <= CONVERGENCE_TOL, {"gap": gap, "target": target, "ratio": res.ratio, "eps": res.final.eps}


def c06_sender_limit():
    detail = {}
    ok = True
    for name, (env, res), m in (("symmetric", _symmetric_sweep(), 5), ("asymmetric", _asymmetric_sweep(), 4)):
        target = _sender_closed_form(env.prior, env.gamma ** (m - 2))
        gap = abs(res.final.u_sender - target)
        detail[f"{name}_gap"] = gap
        detail[f"{name}_target"] = target
        ok = ok and gap <= CONVERGENCE_TOL
    return ok, detail


def c07_oracle_equivalence(n=200, seed=7):
    rng = gen.make_rng(seed)
    worst = 0.0
    for _ in range(n):
        env = gen.random_environment(rng)
        proto = gen.random_protocol(rng, env, int(rng.integers(1, 6)))
        v = br.solve_value(env, proto).v
        oracle = br.enumerate_best_response_oracle(env, proto).value
        worst = max(worst, float(np.max(np.abs(v - oracle))))
    return worst <= ORACLE_TOL, {"draws": n, "max_abs_diff": worst}


def c08_hellman(n=200, seed=8):
    rng = gen.make_rng(seed)
    worst = 0.0
    checked = 0
    while checked < n:
        env = gen.random_environment(rng)
        proto = gen.random_transient_start_protocol(rng, env, int(rng.integers(2, 7)))
        sigma = br.best_response(env, proto)
        start = proto.start_state()
        for th in THETAS:
            if sigma.stops(start, th):
                continue
            an = chain.absorption(env, proto, sigma, th)
            if an.nu is None:
                continue
            worst = max(worst, chain.hellman_check(env, proto, sigma, th, an))
            checked += 1
    return worst <= HELLMAN_TOL, {"checks": checked, "max_residual": worst}


def _parsimonious_population(n, seed):
    rng = gen.make_rng(seed)
    for _ in range(n):
        env = gen.random_environment(rng)
        yield env, gen.random_parsimonious(rng, env, int(rng.integers(3, 8)))


def c09_spread(n=1000, seed=9):
    bad_ok = bad_strict = strict_cases = 0
    worst = -math.inf
    for env, proto in _parsimonious_population(n, seed):
        sp = pay.spread_ratio(env, proto, slack=SPREAD_SLACK)
        worst = max(worst, sp.lhs - sp.rhs)
        bad_ok += not sp.ok
        if sp.strict is not None:
            strict_cases += 1
            bad_strict += not sp.strict
    ok = bad_ok == 0 and bad_strict == 0
    return ok, {"draws": n, "violations": bad_ok, "strict_cases": strict_cases, "non_strict": bad_strict,
                "max_lhs_minus_rhs": worst}


def hitting_ratio_excess(env, proto):
    """Largest ``(nu_i^H nu_j^L) / (nu_i^L nu_j^H) - gamma^(m-3)`` over transient pairs."""
    sigma = br.continue_everywhere(proto)
    nu = {th: chain.absorption(env, proto, sigma, th).nu for th in THETAS}
    live = np.flatnonzero((nu["H"] > 0) & (nu["L"] > 0))
    r = nu["H"][live] / nu["L"][live]
    if not len(r):
        return -math.inf
    bound = env.gamma ** (proto.m - 3)
    return float(r.max() / r.min() - bound)


def c10_hitting_ratio(n=1000, seed=9):
    worst = -math.inf
    for env, proto in _parsimonious_population(n, seed):
        worst = max(worst, hitting_ratio_excess(env, proto))
    return worst <= HITTING_SLACK, {"draws": n, "max_excess": worst}


def c11_reduction(n=200, seed=11):
    rng = gen.make_rng(seed)
    fails = []
    worst = math.inf
    for k in range(n):
        env = gen.random_environment(rng)
        proto = gen.random_protocol(rng, env, int(rng.integers(2, 7)))
        out, trace = red.to_parsimonious(env, proto)
        u_in = pay.evaluate(env, proto).u_receiver
        u_out = pay.evaluate(env, out).u_receiver
        worst = min(worst, u_out - u_in)
        again, trace2 = red.to_parsimonious(env, out)
        ok = (
            shape(out).is_parsimonious
            and out.m <= proto.m
            and u_out >= u_in - PAYOFF_SLACK
            and trace.monotone(PAYOFF_SLACK)
            and not trace2.steps
            and again == out
        )
        if not ok:
            fails.append(k)
    return not fails, {"draws": n, "failures": fails[:10], "min_improvement": worst}


def c12_diagnostics():
    env, res = _symmetric_sweep()
    entry_exact = all(r.entry_metric_1 == 1.0 and r.entry_metric_m == 1.0 for r in res.rows)
    eps = np.array([r.eps for r in res.rows])
    mass = np.array([r.max_abs_transition for r in res.rows])
    C = float(eps @ mass / (eps @ eps))
    linear = bool(np.all(mass <= C * eps * (1 + 1e-9)))
    smallest = min(res.rows, key=lambda r: r.eps)
    proto = fam.build_family(env, fam.normalized_params(env, 5, smallest.eps, res.ratio))
    bias = dg.behavior_metrics(env, proto).bias
    ok = entry_exact and linear and bias <= CONVERGENCE_TOL
    return ok, {"entry_metrics_exact": entry_exact, "C": C, "mass_linear": linear, "bias_gap": bias}


def c13_monte_carlo(runs=10**6, seed=2024):
    env = _symmetric()
    proto = fam.five_state_ladder(env, 0.1)
    sigma = br.continue_everywhere(proto)
    exact = chain.absorption(env, proto, sigma, "H")
    emp = chain.simulate(env, proto, sigma, "H", runs, seed)
    z = 0.0
    for i in (0, 4):
        sd = math.sqrt(exact.mu[i] * (1 - exact.mu[i]) / runs)
        z = max(z, abs(emp.mu[i] - exact.mu[i]) / sd)
    # polarization witness: many copies, one common signal prefix
    rng = gen.make_rng(seed + 1)
    path = rng.choice(2, size=400, p=env.pi("H"))
    finals = chain.simulate_shared_signals(proto, path, 20000, seed + 2)
    low, high = int(np.sum(finals == 0)), int(np.sum(finals == 4))
    ok = z <= MC_SIGMAS and emp.capped == 0 and low > 0 and high > 0
    return ok, {"runs": runs, "max_z": z, "shared_path_low": low, "shared_path_high": high}


def c14_comparative_statics():
    qs = [round(0.55 + 0.05 * k, 2) for k in range(9)]
    ms = list(range(3, 9))
    priors = (0.3, 0.5, 0.6)
    bad = []
    for p in priors:
        table_r = {}
        table_s = {}
        for q in qs:
            env = _symmetric(q, p)
            for m in ms:
                if pay.interior(env, m):
                    table_r[(q, m)] = pay.receiver_optimal_value(env, m).value
                    table_s[(q, m)] = pay.sender_limit_value(env, m)

        def pairs():
            for m in ms:
                yield [(q, m) for q in qs]
            for q in qs:
                yield [(q, m) for m in ms]

        for seq in pairs():
            keys = [k for k in seq if k in table_r]
            for a, b in zip(keys, keys[1:]):
                if not table_r[b] > table_r[a]:
                    bad.append(("receiver", p, a, b))
                ds = table_s[b] - table_s[a]
                if (p < 0.5 and not ds > 0) or (p > 0.5 and not ds < 0) or (p == 0.5 and abs(ds) > EXACT_TOL):
                    bad.append(("sender", p, a, b))
    return not bad, {"violations": len(bad), "first": bad[:3]}


CRITERIA = (
    ("c01", "three_state", "three-state example payoffs", c01_three_state),
    ("c02", "manipulable_cycle", "fully manipulable protocol", c02_manipulable),
    ("c03", "five_state_ladder", "deterministic five-state payoff", c03_five_state_deterministic),
    ("c04", "symmetric_sweep", "symmetric family converges", c04_symmetric_convergence),
    ("c05", "asymmetric_sweep", "asymmetric family converges", c05_asymmetric_convergence),
    ("c06", "sender_limit", "sender payoff limit", c06_sender_limit),
    ("c07", "oracle", "value iteration vs enumeration", c07_oracle_equivalence),
    ("c08", "hellman", "absorption identity", c08_hellman),
    ("c09", "spread", "spread inequality", c09_spread),
    ("c10", "hitting_ratio", "hitting-frequency ratio bound", c10_hitting_ratio),
    ("c11", "reduction", "reduction soundness", c11_reduction),
    ("c12", "diagnostics", "entry and transition diagnostics", c12_diagnostics),
    ("c13", "monte_carlo", "simulation consistency", c13_monte_carlo),
    ("c14", "statics", "comparative statics", c14_comparative_statics),
)

QUICK = ("c01", "c02", "c03", "c04", "c05", "c06", "c08", "c12", "c14")


def run_one(key):
    for cid, name, title, fn in CRITERIA:
        if key in (cid, name, f"{cid}_{name}"):
            t0 = time.perf_counter()
            try:
                passed, detail = fn()
            except Exception as exc:  # a crash is a failure, not an abort of the suite
                passed, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
            return CheckResult(f"{cid}_{name}", title, bool(passed), detail, time.perf_counter() - t0)
    raise KeyError(key)


def run_all(quick=False):
    keys = QUICK if quick else tuple(c[0] for c in CRITERIA)
    return [run_one(k) for k in keys]

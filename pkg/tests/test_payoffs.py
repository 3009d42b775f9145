import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from persuasion_protocols import best_response as br
from persuasion_protocols import family as fam
from persuasion_protocols import generators as gen
from persuasion_protocols import payoffs as pay
from persuasion_protocols.errors import KnifeEdge, ShapeError
from persuasion_protocols.model import Environment, SignalModel


def _env(q, p):
    return Environment(p, SignalModel.binary_symmetric(q))


def test_evaluate_examples(env07):
    rep = pay.evaluate(env07, fam.three_state(env07))
    assert rep.u_receiver == pytest.approx(0.7, abs=1e-12) and rep.u_sender == pytest.approx(0.5, abs=1e-12)
    assert pay.evaluate(env07, fam.manipulable_cycle(env07)).u_receiver == pytest.approx(0.5, abs=1e-12)
    assert pay.evaluate(env07, fam.five_state_ladder(env07, 1.0)).u_receiver == pytest.approx(0.49 / 0.58, abs=1e-12)


def test_never_ending_mass_pays_zero(env07):
    p = fam.five_state_ladder(env07, 0.0)
    rep = pay.evaluate(env07, p, br.continue_everywhere(p))
    assert rep.u_receiver == 0.0 and rep.u_sender == 0.0


def test_parsimonious_formula(env07):
    p = fam.five_state_ladder(env07, 0.3)
    rep = pay.evaluate(env07, p)
    assert rep.u_receiver == pytest.approx(0.5 * rep.mu["H"][4] + 0.5 * rep.mu["L"][0], abs=1e-15)


def test_receiver_optimal_examples():
    q = 0.7
    v = pay.receiver_optimal_value(_env(q, 0.5), 5)
    assert v.value == pytest.approx(q**3 / (q**3 + (1 - q) ** 3), abs=1e-12)
    assert v.regime == "interior" and not v.attained
    assert pay.receiver_optimal_value(_env(q, 0.5), 3).attained
    # gamma^(m-2) <= 9 = kappa at p = 0.9
    v = pay.receiver_optimal_value(_env(0.6, 0.9), 4)
    assert (v.value, v.regime) == (0.9, "prior")


def test_closed_form_matches_unnormalized():
    for q, p, m in [(0.7, 0.6, 4), (0.8, 0.3, 6), (0.65, 0.5, 9)]:
        env = _env(q, p)
        G = env.gamma ** (m - 2)
        expected = 1 - (2 * math.sqrt(p * (1 - p) * G) - 1) / (G - 1)
        assert pay.receiver_optimal_value(env, m).value == pytest.approx(expected, abs=1e-12)
        assert pay.sender_limit_value(env, m) == pytest.approx(p + (2 * p - 1) / (G - 1), abs=1e-12)


def test_boundary_continuity():
    # choose p so that gamma^(m-2) equals kappa exactly at m = 3
    q = 0.7
    gamma = (q / (1 - q)) ** 2
    p = gamma / (1 + gamma)
    env = _env(q, p)
    assert pay.receiver_optimal_value(env, 3).regime == "prior" or env.kappa < env.gamma
    for shift in (1e-7, 1e-9):
        inner = _env(q, p - shift)
        v = pay.receiver_optimal_value(inner, 3)
        assert v.value == pytest.approx(max(p, 1 - p), abs=1e-3)


def test_large_m_no_overflow():
    env = _env(0.9, 0.5)
    v = pay.receiver_optimal_value(env, 400)
    assert math.isfinite(v.value) and v.value == pytest.approx(1.0, abs=1e-12)
    assert pay.solve_relaxed(env, 400).alpha_star <= 1.0


def test_sender_limit_examples():
    assert pay.sender_limit_value(_env(0.7, 0.5), 5) == pytest.approx(0.5, abs=1e-15)
    assert pay.sender_limit_value(_env(0.7, 0.6), 4) == pytest.approx(0.6 + 0.2 / 28.641975308641975, abs=1e-12)
    assert pay.sender_limit_value(_env(0.7, 0.6), 4) == pytest.approx(0.60698, abs=1e-5)
    low = _env(0.55, 0.3)
    assert not pay.interior(low, 3)
    assert pay.sender_limit_value(low, 3) == 0.0
    assert pay.sender_limit_value(_env(0.55, 0.7), 3) == 1.0
    with pytest.raises(KnifeEdge):
        pay.sender_limit_value(_env(0.55, 0.5), 2)


def _rr_grid(p, G, n=2001):
    """Brute-force maximum of p*alpha + (1-p)*beta on the boundary alpha*beta = G(1-alpha)(1-beta)."""
    a = np.linspace(0.0, 1.0, n)
    # largest feasible beta for each alpha: beta (alpha + G(1-alpha)) <= G(1-alpha)
    b = np.minimum(1.0, G * (1 - a) / (a + G * (1 - a)))
    vals = p * a + (1 - p) * b
    k = int(np.argmax(vals))
    return vals[k], a[k], b[k]


@pytest.mark.parametrize("q,p,m", [(0.7, 0.5, 5), (0.7, 0.6, 4), (0.8, 0.25, 4), (0.6, 0.5, 7), (0.7, 0.7, 3)])
def test_relaxed_against_grid(q, p, m):
    env = _env(q, p)
    sol = pay.solve_relaxed(env, m)
    G = env.gamma ** (m - 2)
    best, a, b = _rr_grid(p, G)
    assert sol.value >= best - 1e-12
    assert sol.value == pytest.approx(best, abs=1e-5)
    assert sol.alpha_star == pytest.approx(a, abs=2e-3)
    if pay.interior(env, m):
        assert sol.constraint_residual(env, m) <= 1e-10
        assert sol.value == pytest.approx(pay.receiver_optimal_value(env, m).value, abs=1e-12)


def test_relaxed_examples():
    env = _env(0.7, 0.5)
    G = env.gamma ** 3
    sol = pay.solve_relaxed(env, 5)
    assert sol.alpha_star == pytest.approx(math.sqrt(G) / (math.sqrt(G) + 1), abs=1e-12)
    assert sol.alpha_star == pytest.approx(sol.beta_star, abs=1e-15)
    # gamma = 1.2 below kappa = 7/3
    q = math.sqrt(1.2) / (1 + math.sqrt(1.2))
    env = _env(q, 0.7)
    sol = pay.solve_relaxed(env, 3)
    assert (sol.alpha_star, sol.beta_star, sol.value) == (1.0, 0.0, 0.7)
    assert not pay.solve_relaxed(_env(0.55, 0.5), 2).unique


def test_spread_examples(env07):
    sp = pay.spread_ratio(env07, fam.three_state(env07))
    assert sp.lhs == pytest.approx(0.49) and sp.rhs == pytest.approx(0.49) and sp.ok and sp.strict is None
    sp = pay.spread_ratio(env07, fam.five_state_ladder(env07, 0.5))
    assert sp.ok and sp.strict
    with pytest.raises(ShapeError):
        pay.spread_ratio(env07, fam.manipulable_cycle(env07))


def test_spread_zero_mu(env07):
    # the high state cannot be reached: lhs = 0
    p = fam.three_state(env07)
    t = p.transition.copy()
    t[1, 0] = [1.0, 0.0, 0.0]
    sp = pay.spread_ratio(env07, p.replace(transition=t))
    assert sp.lhs == 0.0 and sp.ok and sp.strict is None


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 7))
def test_parsimonious_below_optimum(seed, m):
    rng = gen.make_rng(seed)
    env = gen.random_environment(rng)
    p = gen.random_parsimonious(rng, env, m)
    assert pay.evaluate(env, p).u_receiver <= pay.receiver_optimal_value(env, m).value + 1e-9
    assert pay.spread_ratio(env, p).ok


def test_comparative_statics_gamma():
    qs = np.linspace(0.55, 0.95, 9)
    for p in (0.3, 0.5, 0.7):
        for m in (3, 5, 8):
            pts = [(q, _env(q, p)) for q in qs if pay.interior(_env(q, p), m)]
            r = [pay.receiver_optimal_value(e, m).value for _, e in pts]
            s = [pay.sender_limit_value(e, m) for _, e in pts]
            assert all(b > a for a, b in zip(r, r[1:]))
            if p < 0.5:
                assert all(b > a for a, b in zip(s, s[1:]))
            elif p > 0.5:
                assert all(b < a for a, b in zip(s, s[1:]))

import json

import numpy as np
import pytest

from persuasion_protocols import family as fam
from persuasion_protocols import generators as gen
from persuasion_protocols import payoffs as pay
from persuasion_protocols import reduction as red
from persuasion_protocols.best_response import best_response, is_best_response
from persuasion_protocols.errors import NoIntermediate
from persuasion_protocols.model import Protocol, classify_states, shape

SLACK = red.PAYOFF_SLACK


def _three_absorbing(env, a_mid):
    """Transient 1 feeding absorbing 2 (a=0), 3 (a=a_mid), 4 (a=1)."""
    n = len(env.signal_model.signals)
    t = np.zeros((4, n, 4))
    h, l = env.signal_model.h_index, env.signal_model.l_index
    t[0, h] = [0.0, 0.0, 0.5, 0.5]
    t[0, l] = [0.0, 0.6, 0.4, 0.0]
    for i in (1, 2, 3):
        t[i, :, i] = 1.0
    return Protocol(t, [1.0, 0, 0, 0], [0.5, 0.0, a_mid, 1.0])


def test_merge_split(env07):
    p = _three_absorbing(env07, 0.3)
    k, lo, hi, rho = red.merge_plan(p)
    assert (k, lo, hi) == (3, 2, 4) and rho == pytest.approx(0.3)
    out = red.merge_absorbing(p)
    assert out.m == 3
    h, l = env07.signal_model.h_index, env07.signal_model.l_index
    # state 3's inflow: 0.5 on h, 0.4 on l; 30% goes high
    np.testing.assert_allclose(out.transition[0, h], [0.0, 0.35, 0.65], atol=1e-15)
    np.testing.assert_allclose(out.transition[0, l], [0.0, 0.88, 0.12], atol=1e-15)


def test_merge_top_action_goes_high(env07):
    p = _three_absorbing(env07, 1.0)
    # states 3 and 4 share the top action; 3 is ordered first so it is the intermediate
    k, lo, hi, rho = red.merge_plan(p)
    assert k == 3 and hi == 4 and rho == 1.0


def test_merge_preserves_payoffs(env07):
    p = _three_absorbing(env07, 0.3)
    before = pay.evaluate(env07, p)
    after = pay.evaluate(env07, red.merge_absorbing(p))
    assert after.u_receiver >= before.u_receiver - SLACK
    assert after.u_sender == pytest.approx(before.u_sender, abs=1e-12)


def test_merge_needs_intermediate(env07):
    with pytest.raises(NoIntermediate):
        red.merge_plan(fam.three_state(env07))
    with pytest.raises(NoIntermediate):
        red.merge_plan(_three_absorbing(env07, 0.3), k=4)


def test_merge_random_four_absorbing():
    rng = gen.make_rng(11)
    checked = 0
    for _ in range(400):
        env = gen.random_environment(rng)
        p = gen.random_protocol(rng, env, 7, absorbing_share=0.6)
        if len(classify_states(p).absorbing) < 4:
            continue
        sigma = best_response(env, p)
        before = pay.evaluate(env, p, sigma)
        q = red.merge_absorbing(p)
        k = red.merge_plan(p)[0]
        sigma2 = sigma.without_state(k)
        assert is_best_response(env, q, sigma2)
        after = pay.evaluate(env, q, sigma2)
        assert after.u_receiver == pytest.approx(before.u_receiver, abs=1e-9)
        assert after.u_sender == pytest.approx(before.u_sender, abs=1e-9)
        checked += 1
    assert checked >= 20


def test_make_state_absorbing(env07):
    p = fam.manipulable_cycle(env07)
    q = red.make_state_absorbing(p, 3)
    assert 3 in classify_states(q).absorbing
    assert best_response(env07, q).stops(3, "H") and best_response(env07, q).stops(3, "L")
    assert pay.evaluate(env07, q).u_receiver == pytest.approx(pay.evaluate(env07, p).u_receiver, abs=1e-12)
    f2 = fam.three_state(env07)
    np.testing.assert_array_equal(red.make_state_absorbing(f2, 3).transition, f2.transition)


def test_to_simple_manipulable(env07):
    out, trace = red.to_simple(env07, fam.manipulable_cycle(env07))
    assert shape(out).is_simple
    assert trace.u_final >= 0.5 - SLACK and trace.monotone()


def test_to_simple_identity(env07):
    p = fam.five_state_ladder(env07, 0.3)
    out, trace = red.to_simple(env07, p)
    assert out is p and not trace.steps


def test_to_simple_random():
    rng = gen.make_rng(5)
    for _ in range(200):
        env = gen.random_environment(rng)
        p = gen.random_protocol(rng, env, int(rng.integers(2, 8)))
        u0 = pay.evaluate(env, p).u_receiver
        out, trace = red.to_simple(env, p)
        assert shape(out).is_simple and out.m <= p.m
        assert trace.monotone() and trace.u_final >= u0 - SLACK


def _asymmetric_case():
    rng = gen.make_rng(3)
    for _ in range(2000):
        env = gen.random_environment(rng)
        p, _ = red.to_simple(env, gen.random_protocol(rng, env, int(rng.integers(4, 7))))
        sigma = best_response(env, p)
        if sigma.asymmetric_states():
            return env, p, sigma
    raise AssertionError("no asymmetric stopping state found")


def test_lp_identity_without_asymmetry(env07):
    p = fam.five_state_ladder(env07, 0.3)
    sigma = best_response(env07, p)
    q, s = red.lp_symmetrize(env07, p, sigma)
    assert q is p and s is sigma


def test_lp_symmetrize_progress():
    env, p, sigma = _asymmetric_case()
    u0 = pay.evaluate(env, p, sigma).u_receiver
    q, s = red.lp_symmetrize(env, p, sigma)
    assert is_best_response(env, q, s)
    assert len(s.asymmetric_states()) < len(sigma.asymmetric_states()) or q.m < p.m
    assert pay.evaluate(env, q, s).u_receiver >= u0 - SLACK
    prob = red.build_program(env, p, sigma)
    action = red.solve_program(prob, p.action)
    assert np.all(prob.rows @ action >= -1e-9)


def test_to_parsimonious_identity(env07):
    p = fam.three_state(env07)
    out, trace = red.to_parsimonious(env07, p)
    assert out is p and trace.steps == [] and trace.u_final == pytest.approx(0.7)


def test_to_parsimonious_manipulable(env07):
    out, trace = red.to_parsimonious(env07, fam.manipulable_cycle(env07))
    assert shape(out).is_parsimonious and out.m <= 3
    assert trace.u_final >= 0.5 - SLACK and trace.monotone()
    assert trace.u_final <= pay.receiver_optimal_value(env07, 3).value + SLACK


def test_to_parsimonious_idempotent():
    rng = gen.make_rng(21)
    for _ in range(50):
        env = gen.random_environment(rng)
        p = gen.random_protocol(rng, env, int(rng.integers(2, 7)))
        out, trace = red.to_parsimonious(env, p)
        assert shape(out).is_parsimonious and trace.monotone()
        again, t2 = red.to_parsimonious(env, out)
        assert again is out and not t2.steps


def test_to_parsimonious_too_small(env07):
    p = Protocol(np.ones((1, 2, 1)), [1.0], [0.5])
    with pytest.raises(ValueError):
        red.to_parsimonious(env07, p)


def test_trace_json(env07):
    _, trace = red.to_parsimonious(env07, fam.manipulable_cycle(env07))
    doc = json.loads(trace.to_json(env07))
    assert doc["u_final"] == trace.u_final
    assert [s["name"] for s in doc["steps"]] == [s.name for s in trace.steps]
    assert "final" in doc and doc["final"]["m"] == trace.final.m

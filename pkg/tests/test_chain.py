import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from persuasion_protocols import best_response as br
from persuasion_protocols import chain
from persuasion_protocols import family as fam
from persuasion_protocols import generators as gen
from persuasion_protocols.errors import PreconditionFailed, SingularSystem
from persuasion_protocols.model import Protocol


def _ratio_formula(q, eps):
    return q**2 * (q + (1 - q) * eps) / ((1 - q) ** 2 * ((1 - q) + q * eps))


def test_induce_three_state(env07):
    p = fam.three_state(env07)
    c = chain.induce(env07, p, br.continue_everywhere(p), "H")
    assert c.P[1, 2] == pytest.approx(0.7) and c.P[1, 0] == pytest.approx(0.3)
    c = chain.induce(env07, p, br.stop_everywhere(p), "H")
    assert c.terminal.all()
    assert np.array_equal(c.P, np.eye(3))


def test_absorption_three_state(env07):
    p = fam.three_state(env07)
    an = chain.absorption(env07, p, br.continue_everywhere(p), "H")
    assert an.mu_at(3) == pytest.approx(0.7, abs=1e-15)
    assert an.mu_at(1) == pytest.approx(0.3, abs=1e-15)
    assert an.expected_time == pytest.approx(1.0, abs=1e-15)
    assert an.nu_at(2) == 1.0


def test_five_state_ladder_ratio(env07):
    q, eps = 0.7, 0.1
    p = fam.five_state_ladder(env07, eps)
    an = chain.absorption(env07, p, br.continue_everywhere(p), "H", start=3)
    assert an.mu_at(5) / an.mu_at(1) == pytest.approx(_ratio_formula(q, eps), rel=1e-12)
    assert _ratio_formula(q, eps) == pytest.approx(10.7417, abs=5e-5)


def test_five_state_ladder_closed_class(env07):
    p = fam.five_state_ladder(env07, 0.0)
    sigma = br.continue_everywhere(p)
    an = chain.absorption(env07, p, sigma, "H")
    assert an.end_prob == 0.0
    assert math.isinf(an.expected_time) and an.nu is None
    assert set(np.flatnonzero(an.trapped) + 1) == {2, 3, 4}
    with pytest.raises(SingularSystem) as exc:
        chain.absorption(env07, p, sigma, "H", strict=True)
    assert exc.value.trapped_mass == pytest.approx(1.0)


def test_stop_at_start(env07):
    p = fam.five_state_ladder(env07, 0.3)
    an = chain.absorption(env07, p, br.stop_everywhere(p), "L")
    assert an.end_prob == 1.0 and an.expected_time == 0.0
    assert an.mu_at(3) == 1.0


def test_hellman_examples(env07):
    p = fam.three_state(env07)
    sigma = br.continue_everywhere(p)
    assert chain.hellman_check(env07, p, sigma, "H") <= 1e-12
    p = fam.five_state_ladder(env07, 0.5)
    for th in ("H", "L"):
        assert chain.hellman_check(env07, p, br.continue_everywhere(p), th) <= 1e-9


def test_hellman_precondition(env07):
    p = fam.three_state(env07)
    with pytest.raises(PreconditionFailed):
        chain.hellman_check(env07, p, br.stop_everywhere(p), "H")
    q = p.replace(initial=[0.5, 0.5, 0.0])
    with pytest.raises(PreconditionFailed):
        chain.hellman_check(env07, q, br.continue_everywhere(q), "H")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 7))
def test_parsimonious_chain_properties(seed, m):
    rng = gen.make_rng(seed)
    env = gen.random_environment(rng)
    p = gen.random_parsimonious(rng, env, m)
    sigma = br.continue_everywhere(p)
    for th in ("H", "L"):
        an = chain.absorption(env, p, sigma, th)
        assert an.end_prob == pytest.approx(1.0, abs=1e-12)
        assert an.mu_at(1) + an.mu_at(m) == pytest.approx(1.0, abs=1e-12)
        assert an.mu.sum() == pytest.approx(an.end_prob, abs=1e-15)
        assert an.nu.sum() == pytest.approx(1.0, abs=1e-12)
        assert chain.hellman_check(env, p, sigma, th, an) <= 1e-9
        idx, G = chain.modified_chain(chain.induce(env, p, sigma, th), p.start_state())
        assert np.max(np.abs(an.nu[idx] @ G - an.nu[idx])) <= 1e-10


def test_modified_chain_reducible(env07):
    # state 4 is transient but unreachable from the start
    t = np.zeros((5, 2, 5))
    t[0, :, 0] = t[4, :, 4] = 1.0
    t[1, 0, 2] = t[1, 1, 0] = 1.0
    t[2, 0, 4] = t[2, 1, 1] = 1.0
    t[3, :, 2] = 1.0
    p = Protocol(t, [0, 1, 0, 0, 0], [0, 0, 0, 0, 1])
    an = chain.absorption(env07, p, br.continue_everywhere(p), "H")
    assert an.nu_at(4) == 0.0 and an.nu_at(2) + an.nu_at(3) == pytest.approx(1.0)


def test_simulate_three_state(env07):
    p = fam.three_state(env07)
    emp = chain.simulate(env07, p, br.continue_everywhere(p), "H", 10**6, seed=1)
    assert abs(emp.mu[2] - 0.7) <= 3 * math.sqrt(0.21 / 10**6)
    assert emp.capped == 0 and emp.expected_time == 1.0


def test_simulate_single_run_deterministic(env07):
    p = fam.five_state_ladder(env07, 0.3)
    s = br.continue_everywhere(p)
    a = chain.simulate(env07, p, s, "H", 1, seed=5)
    b = chain.simulate(env07, p, s, "H", 1, seed=5)
    assert np.array_equal(a.final_state, b.final_state) and a.expected_time == b.expected_time


def test_simulate_five_state_ladder_ratio_and_nu(env07):
    p = fam.five_state_ladder(env07, 0.1)
    s = br.continue_everywhere(p)
    runs = 200_000
    emp = chain.simulate(env07, p, s, "H", runs, seed=3)
    exact = chain.absorption(env07, p, s, "H")
    r_hat = emp.mu[4] / emp.mu[0]
    # delta-method standard error of a ratio of multinomial proportions
    a, b = emp.mu[4], emp.mu[0]
    se = r_hat * math.sqrt((1 - a) / (a * runs) + (1 - b) / (b * runs) + 2 / runs)
    assert abs(r_hat - _ratio_formula(0.7, 0.1)) <= 3 * se
    live = [1, 2, 3]
    z = np.abs(emp.nu[live] - exact.nu[live]) / emp.nu_se[live]
    assert np.all(z <= 3.0)
    assert abs(emp.expected_time - exact.expected_time) <= 3 * emp.expected_time_se


def test_simulate_cap(env07):
    p = fam.five_state_ladder(env07, 0.0)
    emp = chain.simulate(env07, p, br.continue_everywhere(p), "H", 50, seed=0, max_steps=100)
    assert emp.capped == 50 and emp.end_prob == 0.0


def test_shared_signals_polarization(env07):
    p = fam.five_state_ladder(env07, 0.1)
    rng = gen.make_rng(9)
    path = rng.choice(2, size=300, p=env07.pi("H"))
    finals = chain.simulate_shared_signals(p, path, 5000, seed=4)
    assert np.sum(finals == 0) > 0 and np.sum(finals == 4) > 0

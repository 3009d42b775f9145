import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from persuasion_protocols import family as fam
from persuasion_protocols import generators as gen
from persuasion_protocols.model import Environment, Protocol, SignalModel, classify_states, shape, validate


def test_signal_model_derived():
    sm = SignalModel.binary_symmetric(0.7)
    assert sm.h_signal == "h" and sm.l_signal == "l"
    assert sm.l_bar == pytest.approx(7 / 3)
    assert sm.l_under == pytest.approx(3 / 7)
    assert sm.gamma == pytest.approx(49 / 9)


def test_kappa():
    assert Environment.binary_symmetric(0.7).kappa == 1.0
    assert Environment.binary_symmetric(0.7, prior=0.8).kappa == pytest.approx(4.0)


def test_validate_three_state_ok(env07):
    assert validate(env07, fam.three_state(env07)).ok


def test_validate_full_support():
    env = Environment(0.5, SignalModel(("h", "l"), [0.0, 1.0], [0.5, 0.5]))
    proto = fam.three_state(Environment.binary_symmetric(0.7))
    assert "full support" in validate(env, proto).kinds()


def test_validate_row_sum(env07):
    p = fam.three_state(env07)
    t = p.transition.copy()
    t[1, 0] = [0.0, 0.0, 0.9]
    rep = validate(env07, p.replace(transition=t))
    assert rep.kinds() == {"transition row sum"}
    assert rep.violations[0].where == (2, "h")


def test_validate_other_kinds(env07):
    p = fam.three_state(env07)
    assert "action range" in validate(env07, p.with_action(2, 1.5)).kinds()
    assert "initial distribution" in validate(env07, p.replace(initial=[0.5, 0.0, 0.0])).kinds()
    env_same = Environment(0.5, SignalModel(("h", "l"), [0.5, 0.5], [0.5, 0.5]))
    assert "identical signal distributions" in validate(env_same, p).kinds()
    assert "prior range" in validate(Environment(1.0, env07.signal_model), p).kinds()


def test_classify_examples(env07):
    c2 = classify_states(fam.three_state(env07))
    assert c2.absorbing == {1, 3} and c2.transient == {2}
    c1 = classify_states(fam.manipulable_cycle(env07))
    assert c1.absorbing == set() and c1.recurrent_classes == (frozenset({1, 2, 3}),)
    ident = Protocol(np.tile(np.eye(3)[:, None, :], (1, 2, 1)), [1, 0, 0], [0, 0, 0])
    assert classify_states(ident).absorbing == {1, 2, 3}


def test_shape(env07):
    assert shape(fam.three_state(env07)).is_parsimonious
    for eps in (0.1, 0.5, 1.0):
        assert shape(fam.five_state_ladder(env07, eps)).is_parsimonious
    s = shape(fam.three_state(env07).with_action(2, 0.5))
    assert s.is_simple and not s.is_parsimonious
    assert (s.lo_abs, s.hi_abs) == (1, 3)


def test_shape_tie_by_label(env07):
    p = fam.three_state(env07).replace(action=[0.3, 0.0, 0.3])
    assert (shape(p).lo_abs, shape(p).hi_abs) == (1, 3)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 6))
def test_classification_relabel_invariant(seed, m):
    rng = gen.make_rng(seed)
    env = gen.random_environment(rng)
    proto = gen.random_protocol(rng, env, m)
    order = [int(x) + 1 for x in rng.permutation(m)]
    c = classify_states(proto)
    cp = classify_states(proto.permuted(order))
    back = {k + 1: order[k] for k in range(m)}
    assert {back[i] for i in cp.absorbing} == set(c.absorbing)
    assert {frozenset(back[i] for i in r) for r in cp.recurrent_classes} == set(c.recurrent_classes)
    assert {back[i] for i in cp.transient} == set(c.transient)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6))
def test_partition_covers_states(seed, m):
    rng = gen.make_rng(seed)
    env = gen.random_environment(rng)
    c = classify_states(gen.random_protocol(rng, env, m))
    union = set(c.absorbing) | set(c.transient) | set().union(*c.recurrent_classes)
    assert union == set(range(1, m + 1))
    assert set(c.absorbing) <= set().union(*c.recurrent_classes)

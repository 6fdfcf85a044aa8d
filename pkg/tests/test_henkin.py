from .fixtures import SIG_FO, SIG_P, SIG_PQ, f, formulas

import itertools
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kripkeforge.fkd import FKDWorld, LinearFKD, is_T_consistent
from kripkeforge import henkin as henkin_module
from kripkeforge.henkin import *
from kripkeforge.oracle import Theory
from kripkeforge.syntax import (
    Const,
    Dia,
    Exists,
    Not,
    enumerate_sentence,
    index_of,
    instantiate,
    pair_schedule,
    size,
    to_text,
)

EMPTY_P = Theory(SIG_P)
EMPTY_PQ = Theory(SIG_PQ)
BOX_P = Theory(SIG_P, (f('[]p', SIG_P),))
RECURRENT_Q = Theory(SIG_PQ, (f('<>q -> []<>q', SIG_PQ),))
OBLIGATIONS = HenkinConfig(stabilize='obligations')


def _at_stage(state, i, e):
    """`state` moved to the first scheduled stage that targets (i, e)."""
    n = next(n for n in itertools.count() if pair_schedule(n) == (i, e))
    return replace(state, stage=n)


def _closure_violations(state):
    """Decided pairs of the final diagram that break a closure clause."""
    d = state.fkd
    problems = []
    for (world_id, e), value in state.decided.items():
        phi = enumerate_sentence(state.signature, e)
        position = d.position_of(world_id)
        world = d.worlds[position]
        if value != (phi in world) or (not value) != (Not(phi) in world):
            problems.append(('exactly-one', world_id, to_text(phi)))
        if value and isinstance(phi, Dia):
            if not any(phi.body in d.worlds[q] for q in range(position, len(d))):
                problems.append(('witness', world_id, to_text(phi)))
    for record in state.trace:
        if record.branch == 'exists':
            phi = enumerate_sentence(state.signature, record.e)
            instance = instantiate(phi.body, phi.var, Const(record.henkin))
            if instance not in d.worlds[d.position_of(record.world_id)]:
                problems.append(('henkin', record.world_id, record.sentence))
    return problems


def test_init_empty_theory():
    # Act
    state = init(EMPTY_P)
    # Assert
    assert len(state.fkd) == 1
    assert state.fkd.worlds[0].sentences == ()
    assert state.fkd.relation == frozenset()
    assert state.stage == 0
    assert state.decided == {}


def test_init_inconsistent_theory():
    with pytest.raises(InconsistentTheory):
        init(Theory(SIG_P, (f('p & ~p', SIG_P),)))


def test_init_box_theory():
    assert len(init(BOX_P).fkd) == 1


def test_init_counts_henkin_constants_in_axioms():
    t = Theory(SIG_FO, (f('P(c2)', SIG_FO),))
    assert init(t).next_henkin == 3


def test_diamond_stage_adds_witness_in_place():
    """Test that a diamond stage first tries its body in the same world."""
    # Arrange
    e = index_of(SIG_P, f('<>p', SIG_P))
    state = _at_stage(init(EMPTY_P), 0, e)
    # Act
    result = step(state)
    # Assert
    assert [to_text(s) for s in result.fkd.worlds[0].sentences] == ['<>p', 'p']
    assert result.decided == {(0, e): True}
    assert result.trace[-1].branch == 'diamond'
    assert result.trace[-1].candidate == 0


def test_diamond_stage_negated_under_axioms():
    # Arrange
    e = index_of(SIG_P, f('<>~p', SIG_P))
    state = _at_stage(init(BOX_P), 0, e)
    # Act
    result = step(state)
    # Assert
    assert result.trace[-1].branch == 'negate'
    assert Not(f('<>~p', SIG_P)) in result.fkd.worlds[0]


def test_diamond_stage_appends_world_when_needed():
    # Arrange
    e = index_of(SIG_P, f('<>~p', SIG_P))
    state = _at_stage(init(EMPTY_P), 0, e)
    state = replace(state, fkd=LinearFKD((FKDWorld(0, (f('p', SIG_P),)),)))
    # Act
    result = step(state)
    # Assert
    assert result.trace[-1].candidate == 1
    assert [to_text(s) for s in result.fkd.worlds[1].sentences] == ['~p']
    assert result.fkd.relation == frozenset({(0, 1)})


def test_exists_stage_adds_henkin_witness():
    # Arrange
    e = index_of(SIG_FO, f('exists x. P(x)', SIG_FO))
    state = _at_stage(init(Theory(SIG_FO)), 0, e)
    # Act
    result = step(state)
    # Assert
    assert [to_text(s) for s in result.fkd.worlds[0].sentences] == ['exists x0. P(x0)', 'P(c0)']
    assert result.trace[-1].henkin == 'c0'
    assert result.next_henkin == 1


def test_contradiction_stage_negates():
    # Arrange
    e = index_of(SIG_P, f('p & ~p', SIG_P))
    state = _at_stage(init(EMPTY_P), 0, e)
    # Act
    result = step(state)
    # Assert
    assert [to_text(s) for s in result.fkd.worlds[0].sentences] == ['~(p & ~p)']
    assert result.decided == {(0, e): False}


def test_stage_beyond_last_world_is_noop():
    # Arrange
    state = _at_stage(init(EMPTY_P), 2, 0)
    # Act
    result = step(state)
    # Assert
    assert result.trace[-1].branch == 'noop'
    assert result.fkd == state.fkd
    assert result.stage == state.stage + 1


def test_periodic_append():
    # Arrange
    config = HenkinConfig(append_every=1)
    state = _at_stage(init(EMPTY_P, config=config), 2, 0)
    # Act
    result = step(state)
    # Assert
    assert result.trace[-1].branch == 'append'
    assert len(result.fkd) == 2


def test_run_zero_stages():
    # Act
    state, trace = run(EMPTY_P, 0)
    # Assert
    assert trace == []
    assert state.fkd == init(EMPTY_P).fkd


def test_run_is_deterministic():
    first = run(EMPTY_PQ, 60)
    second = run(EMPTY_PQ, 60)
    assert first[1] == second[1]
    assert first[0].fkd == second[0].fkd


def test_run_grows_the_diagram():
    # Act
    state, trace = run(EMPTY_PQ, 100)
    # Assert
    assert len(trace) == 100
    assert len(state.fkd) > 1
    assert all(count >= 1 for count in state.moves.values())


# Up to stage 400 only pairs with i + e <= 6 are scheduled; the one diamond
# among them (<>p at world 0) is witnessed in place, so no world moves.
MAX_MOVES_BASELINE = 0


@pytest.mark.slow
def test_run_reaches_omega_progress():
    """Test that periodic appends give many worlds and positions settle."""
    # Act
    state, trace = run(EMPTY_PQ, 400)
    # Assert
    assert len(trace) == 400
    assert len(state.fkd) >= 90
    assert max(state.moves.values(), default=0) <= MAX_MOVES_BASELINE


def test_run_rejects_negative_stages():
    with pytest.raises(ValueError):
        run(EMPTY_P, -1)


@pytest.mark.slow
@pytest.mark.parametrize('theory', [EMPTY_PQ, Theory(SIG_PQ, (f('[]p', SIG_PQ),)), RECURRENT_Q])
def test_every_stage_stays_consistent(theory):
    """Test that each intermediate diagram is consistent with the theory."""
    # Arrange
    state = init(theory)
    checked = state.fkd
    # Act & Assert
    for _ in range(500):
        state = step(state)
        if state.fkd != checked:
            assert is_T_consistent(state.fkd, theory)
            checked = state.fkd


@pytest.mark.parametrize('theory', [EMPTY_PQ, RECURRENT_Q])
def test_closure_clauses_hold_on_final_state(theory):
    # Act
    state, _ = run(theory, 120)
    # Assert
    assert _closure_violations(state) == []


def test_conservative_placement_is_consistent():
    # Arrange
    config = HenkinConfig(placement='conservative')
    # Act
    state, trace = run(EMPTY_PQ, 80, config=config)
    # Assert
    assert is_T_consistent(state.fkd, EMPTY_PQ)
    assert all(r.placement == 'conservative' for r in trace)


def test_replay_does_not_consult_the_oracle(mocker):
    # Arrange
    state, trace = run(EMPTY_PQ, 80)
    consistency = mocker.patch('kripkeforge.henkin.consistency_verdict',
                               side_effect=AssertionError('oracle consulted'))
    satisfiable = mocker.patch('kripkeforge.henkin.satisfiable_linear',
                               side_effect=AssertionError('oracle consulted'))
    # Act
    replayed = replay(EMPTY_PQ, trace)
    # Assert
    assert replayed.fkd == state.fkd
    assert replayed.decided == state.decided
    assert replayed.trace == state.trace
    consistency.assert_not_called()
    satisfiable.assert_not_called()


def test_replay_warns_on_flag_mismatch():
    # Arrange
    _, trace = run(EMPTY_P, 10)
    # Act & Assert
    with pytest.warns(ReplayWarning):
        replay(EMPTY_P, trace, config=HenkinConfig(append_every=2))


def test_replay_rejects_out_of_order_records():
    _, trace = run(EMPTY_P, 5)
    with pytest.raises(ValueError):
        replay(EMPTY_P, trace[1:])


def test_query_axiom_consequence():
    # Arrange
    m = ConstructedModel(init(BOX_P))
    # Act & Assert
    assert query_truth(m, 0, f('p', SIG_P))


@pytest.mark.parametrize('i', [0, 1, 2, 3])
def test_query_true_everywhere(i):
    # Arrange
    m = ConstructedModel(init(EMPTY_PQ))
    # Act
    answer = query_truth(m, i, f('true', SIG_PQ))
    # Assert
    assert answer
    assert len(m.fkd) > i


def test_query_box_theory_later_world():
    m = ConstructedModel(init(BOX_P))
    assert query_truth(m, 2, f('[]p', SIG_P))


@settings(max_examples=30, deadline=None)
@given(formulas(atoms=('p',), max_leaves=3), st.integers(min_value=0, max_value=3))
def test_query_decides_sentence_or_negation(g, i):
    """Test that exactly one of a sentence and its negation is true at a world."""
    if size(g) > 6:
        return
    # Arrange
    m = ConstructedModel(init(EMPTY_P, config=OBLIGATIONS))
    # Act
    positive = query_truth(m, i, g)
    negative = query_truth(m, i, Not(g))
    # Assert
    assert positive != negative
    assert query_truth(m, i, g) == positive


def test_query_pins_world():
    """Test that a pinned world keeps answering after a splice moves it."""
    # Arrange
    m = ConstructedModel(init(EMPTY_P, config=OBLIGATIONS))
    query_truth(m, 0, f('p', SIG_P))
    before = query_truth(m, 1, f('p', SIG_P))
    pinned = m.pins[1]
    # Act
    query_truth(m, 0, f('<>~p', SIG_P))
    # Assert
    assert m.pins[1] == pinned
    assert m.fkd.position_of(pinned) == 2
    assert query_truth(m, 1, f('p', SIG_P)) == before


def test_query_budget():
    # Arrange
    m = ConstructedModel(init(EMPTY_P, config=HenkinConfig(query_budget=1)))
    # Act
    with pytest.raises(QueryBudgetExceeded):
        query_truth(m, 3, f('p', SIG_P))
    # Assert
    assert len(m.fkd) == 2


def test_query_rejects_negative_world():
    with pytest.raises(IndexError):
        query_truth(ConstructedModel(init(EMPTY_P)), -1, f('p', SIG_P))


@pytest.mark.parametrize('i, j, expected', [(0, 0, True), (2, 1, False), (1, 5, True)])
def test_accessible(i, j, expected):
    assert accessible(ConstructedModel(init(EMPTY_P)), i, j) == expected


def test_constructed_model_domain():
    m = ConstructedModel(init(Theory(SIG_FO)))
    assert m.domain_element(0) == 'c0'
    assert m.in_domain('c3')
    assert not m.in_domain('a')


def test_trace_frame():
    # Arrange
    _, trace = run(EMPTY_P, 12)
    # Act
    frame = trace_frame(trace)
    # Assert
    assert len(frame) == 12
    assert list(frame['step']) == list(range(12))
    assert set(frame['branch']) <= set(BRANCHES)


def test_config_validation():
    with pytest.raises(ValueError):
        HenkinConfig(placement='random')
    with pytest.raises(ValueError):
        HenkinConfig(append_every=0)
    with pytest.raises(ValueError):
        HenkinConfig(stabilize='lazy')
    with pytest.raises(ValueError):
        StageRecord(0, 0, 0, 0, 0, 'p', 'guess')


def test_query_runs_stages_under_model_lock(mocker):
    # Arrange
    m = ConstructedModel(init(EMPTY_P))
    execute = henkin_module._execute
    held = []

    def tracking_execute(*args, **kwargs):
        held.append(m.lock.locked())
        return execute(*args, **kwargs)

    mocker.patch('kripkeforge.henkin._execute', side_effect=tracking_execute)
    # Act
    query_truth(m, 0, f('p', SIG_P))
    # Assert
    assert held and all(held)
    assert not m.lock.locked()


def test_default_placement():
    assert HenkinConfig().placement == 'paper'
    assert PLACEMENTS == ('paper', 'conservative')

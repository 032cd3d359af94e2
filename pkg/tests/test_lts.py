import pytest

from coolcheck.errors import (BudgetError, CoolcheckError, FrontierError,
                              LaxModelError)
from coolcheck.lts import (Lts, Semantics, TermArena, check_lax_model,
                           embed_paired, explore, paired_saturate, paren_step,
                           saturate, tau_closure, weak_reach, weak_step)
from coolcheck.terms import parse_term, print_term


def test_semantics_sync(ccs_guarded, term):
    sem = Semantics(ccs_guarded)
    t = term(ccs_guarded, 'par(pre[a](nil), pre[abar](nil))')
    moves = [(l, print_term(u)) for l, u in sem.transitions(t)]
    assert moves == [
        ('a', 'par(nil, pre[abar](nil))'),
        ('abar', 'par(pre[a](nil), nil)'),
        ('tau', 'par(nil, nil)'),
        ]
    assert {d.rule.name for d in sem.derivations(t)} == \
        {'parl[a]', 'parr[abar]', 'sync_a'}


def test_semantics_guarded_sum(ccs_guarded, term):
    sem = Semantics(ccs_guarded)
    t = term(ccs_guarded, 'gsum_ab(pre[tau](nil), nil)')
    assert [(l, print_term(u)) for l, u in sem.transitions(t)] == [
        ('a', 'pre[tau](nil)'), ('b', 'nil')]


def test_semantics_replication(ccs_repl, term):
    sem = Semantics(ccs_repl)
    t = term(ccs_repl, 'bang(pre[a](nil))')
    assert [(l, print_term(u)) for l, u in sem.transitions(t)] == [
        ('a', 'par(nil, bang(pre[a](nil)))')]


def test_explore_finite(ccs_guarded, term):
    root = term(ccs_guarded, 'par(pre[a](nil), pre[abar](nil))')
    lts = explore(ccs_guarded, [root])
    assert len(lts) == 4
    assert lts.states[0] == root
    assert not lts.frontier
    assert not lts.budget_exhausted
    assert lts.core_states() == frozenset(range(4))
    nil_nil = lts.index(term(ccs_guarded, 'par(nil, nil)'))
    assert lts.successors(nil_nil) == ()


def test_explore_numbers_successors_in_print_order(ccs_guarded, term):
    root = term(ccs_guarded, 'gsum_ab(pre[tau](nil), nil)')
    lts = explore(ccs_guarded, [root])
    assert [lts.describe(i) for i in range(len(lts))] == \
        ['gsum_ab(pre[tau](nil), nil)', 'nil', 'pre[tau](nil)']


def test_explore_state_budget(ccs_repl, term):
    root = term(ccs_repl, 'bang(pre[a](nil))')
    lts = explore(ccs_repl, [root], max_states=3)
    assert lts.budget_exhausted
    assert lts.frontier
    assert len(lts) <= 3
    assert lts.successors(min(lts.frontier)) is None
    assert 0 not in lts.core_states()


def test_explore_depth_bound(ccs_repl, term):
    root = term(ccs_repl, 'bang(pre[a](nil))')
    lts = explore(ccs_repl, [root], max_states=None, max_depth=2)
    assert not lts.budget_exhausted
    assert lts.frontier == frozenset([2])
    assert len(lts) == 3


def test_explore_rejects_bad_budgets(ccs_guarded, term):
    with pytest.raises(BudgetError):
        explore(ccs_guarded, [term(ccs_guarded, 'nil')], max_states=0)
    with pytest.raises(BudgetError):
        explore(ccs_guarded, [term(ccs_guarded, 'nil')], max_depth=-1)


def test_explore_rejects_open_roots(ccs_guarded):
    root = parse_term('pre[a](x)', ccs_guarded.signature)
    with pytest.raises(CoolcheckError):
        explore(ccs_guarded, [root])


def test_tau_closure_and_paren_step(tau_lts):
    assert tau_closure(tau_lts, 0).states == (0, 1)
    assert not tau_closure(tau_lts, 0).truncated
    assert paren_step(tau_lts, 2, 'tau') == (2,)
    assert paren_step(tau_lts, 0, 'a') == ()


def test_weak_step(tau_lts):
    assert weak_reach(tau_lts, 0) == {0, 1}
    assert weak_step(tau_lts, 0, 'a') == {2}
    assert weak_step(tau_lts, 0, 'tau') == {0, 1}


def test_weak_step_at_frontier(make_lts):
    lts = make_lts(2, [(0, 'tau', 1)], frontier=[1])
    assert tau_closure(lts, 0).truncated
    with pytest.raises(FrontierError):
        weak_step(lts, 0, 'a')


def test_saturate_wb_and_db(make_lts):
    lts = make_lts(4, [(0, 'tau', 1), (1, 'a', 2), (2, 'tau', 3)])
    wb = saturate(lts, 'wb')
    assert set(wb.targets(0, 'a')) == {2, 3}
    assert set(wb.targets(0, 'tau')) == {0, 1}
    db = saturate(lts, 'db')
    assert set(db.targets(0, 'a')) == {2}
    assert not db.truncated
    assert not lts.truncated

    cut = make_lts(3, [(0, 'tau', 1), (1, 'a', 2)], frontier=[2])
    assert not cut.truncated
    assert saturate(cut, 'wb').truncated

    with pytest.raises(ValueError):
        saturate(lts, 'bb')


def test_paired_saturate(make_lts):
    lts = make_lts(4, [(0, 'tau', 1), (1, 'a', 2), (2, 'tau', 3)])
    bb = paired_saturate(lts, 'bb')
    assert bb.targets(0, 'a') == {(1, 2)}
    assert (0, 0) in bb.targets(0, 'tau')
    assert (0, 1) in bb.targets(0, 'tau')
    hb = paired_saturate(lts, 'hb')
    assert hb.targets(0, 'a') == {(1, 2), (1, 3)}


def test_embed_paired(tau_lts):
    paired = embed_paired(tau_lts)
    assert paired.targets(1, 'a') == {(1, 2)}
    assert paired.targets(0, 'a') == frozenset()


def test_aldebaran_export(tau_lts):
    text = tau_lts.to_aldebaran()
    assert text.splitlines()[0] == 'des (0, 3, 4)'
    assert '(0, "tau", 1)' in text
    again = Lts.from_aldebaran(text)
    assert again.transitions() == tau_lts.transitions()


def test_aldebaran_internal_action():
    lts = Lts.from_aldebaran('des (0, 1, 2)\n(0, i, 1)\n')
    assert lts.targets(0, 'tau') == (1,)


def test_json_with_terms(ccs_guarded, term):
    lts = explore(ccs_guarded, [term(ccs_guarded, 'pre[a](pre[b](nil))')])
    data = lts.to_json()
    assert data['states'][0] == 'pre[a](pre[b](nil))'
    again = Lts.from_json(data, ccs_guarded)
    assert again.states == lts.states
    assert again.transitions() == lts.transitions()


def test_frontier_states_have_no_transitions():
    with pytest.raises(ValueError):
        Lts(['0', '1'], ['a'], [(0, 'a', 1)], frontier=[0])


def test_term_arena_budget(ccs_repl, term):
    arena = TermArena(ccs_repl, max_states=1)
    t = term(ccs_repl, 'bang(pre[tau](nil))')
    assert arena.successors(t) is not None
    (_, u), = arena.successors(t)
    assert arena.successors(u) is None
    assert tau_closure(arena, t).truncated


def test_lax_model_guarded_ccs(ccs_guarded, term):
    root = term(ccs_guarded, 'par(pre[tau](pre[a](nil)), pre[abar](nil))')
    base = explore(ccs_guarded, [root])
    for mode in ('wb', 'bb', 'hb', 'db'):
        report = check_lax_model(ccs_guarded, base, mode)
        assert report.ok, (mode, report.violations)
        assert not report.vacuous


def test_lax_model_fails_for_choice(ccs_full, term):
    root = term(ccs_full, 'plus(pre[tau](pre[a](nil)), nil)')
    base = explore(ccs_full, [root])
    report = check_lax_model(ccs_full, base, 'bb')
    assert not report.ok
    rules = {v['rule'] for v in report.violations}
    assert {'plusl[a]', 'plusl[tau]'} <= rules
    assert all(r.startswith('plus') for r in rules)


def test_lax_model_needs_terms(ccs_guarded, tau_lts):
    with pytest.raises(LaxModelError):
        check_lax_model(ccs_guarded, tau_lts, 'wb')
    with pytest.raises(ValueError):
        check_lax_model(ccs_guarded, tau_lts, 'xx')

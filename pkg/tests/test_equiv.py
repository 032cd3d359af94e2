import itertools

import pytest

from coolcheck.equiv import (FunctionalKind, Relation, approximate,
                             branching_sim_check_bprime, gfp,
                             greatest_post_fixpoint_below, is_equivalence,
                             is_preorder, partition, rounds, step,
                             translate_rules_bprime)
from coolcheck.errors import CoolcheckError, FrontierError
from coolcheck.lts import explore
from coolcheck.spec import load_language


K = FunctionalKind


@pytest.fixture
def weak_not_branching(make_lts):
    """a.(tau.b + c) + a.b (state 0) against a.(tau.b + c) (state 5)
    """
    return make_lts(8, [
        (0, 'a', 1), (0, 'a', 3), (1, 'tau', 2), (1, 'c', 4), (2, 'b', 4),
        (3, 'b', 4), (5, 'a', 6), (6, 'tau', 7), (6, 'c', 4), (7, 'b', 4),
        ])


def random_lts(make_lts, rng, max_states=6):
    n = rng.randint(1, max_states)
    labels = ['tau', 'a', 'b']
    transitions = []
    for _ in range(rng.randint(0, 2 * n)):
        transitions.append((rng.randrange(n), rng.choice(labels), rng.randrange(n)))
    return make_lts(n, transitions)


def test_parse_kinds():
    assert K.parse('branching') is K.BRANCHING_BISIM
    assert K.parse('br') is K.BRANCHING_BISIM
    assert K.parse('emonogt') is K.BRANCHING_EXP
    assert K.parse('Weak-Bisim') is K.WEAK_BISIM
    assert K.parse('ds') is K.DELAY_SIM
    with pytest.raises(ValueError):
        K.parse('bogus')


def test_kind_properties():
    assert K.ETA_BISIM.is_bisim and K.ETA_BISIM.family == 'eta'
    assert K.DELAY_EXP.is_expansion and not K.DELAY_EXP.is_bisim
    assert not K.WEAK_SIM.is_bisim and not K.WEAK_SIM.is_expansion


def test_relation_operations():
    R = Relation([(0, 1), (1, 2)])
    assert (0, 1) in R
    assert list(R) == [(0, 1), (1, 2)]
    assert R.converse() == Relation([(1, 0), (2, 1)])
    assert R.compose(R) == Relation([(0, 2)])
    assert R.image(0) == {1}
    assert R.field() == {0, 1, 2}
    assert Relation([(0, 1)]) <= R
    assert (R - Relation([(0, 1)])) == Relation([(1, 2)])
    assert R.to_json(lambda s: f's{s}') == [['s0', 's1'], ['s1', 's2']]


def test_strong_and_branching_bisimilarity(tau_lts):
    strong = gfp(K.STRONG_BISIM, tau_lts)
    assert partition(strong, range(4)) == [[0], [1, 3], [2]]
    branching = gfp(K.BRANCHING_BISIM, tau_lts)
    assert partition(branching, range(4)) == [[0, 1, 3], [2]]
    assert is_equivalence(branching, range(4))


def test_expansion_is_asymmetric(tau_lts):
    exp = gfp(K.BRANCHING_EXP, tau_lts)
    assert (0, 1) in exp
    assert (0, 3) in exp
    assert (1, 0) not in exp
    assert is_preorder(exp, range(4))
    assert not is_equivalence(exp, range(4))


def test_weak_family_separation(weak_not_branching):
    lts = weak_not_branching
    assert (0, 5) in gfp(K.WEAK_BISIM, lts)
    assert (0, 5) in gfp(K.ETA_BISIM, lts)
    assert (0, 5) not in gfp(K.BRANCHING_BISIM, lts)
    assert (0, 5) not in gfp(K.DELAY_BISIM, lts)
    assert (5, 0) in gfp(K.BRANCHING_SIM, lts)


def test_inclusion_lattice(make_lts, make_rng):
    rng = make_rng(7)
    chains = [
        (K.STRONG_BISIM, K.BRANCHING_BISIM), (K.BRANCHING_BISIM, K.ETA_BISIM),
        (K.ETA_BISIM, K.WEAK_BISIM), (K.BRANCHING_BISIM, K.DELAY_BISIM),
        (K.DELAY_BISIM, K.WEAK_BISIM), (K.STRONG_BISIM, K.BRANCHING_EXP),
        (K.BRANCHING_EXP, K.BRANCHING_BISIM), (K.BRANCHING_BISIM, K.BRANCHING_SIM),
        (K.ETA_EXP, K.ETA_BISIM), (K.DELAY_EXP, K.DELAY_BISIM),
        ]
    for _ in range(200):
        lts = random_lts(make_lts, rng, max_states=8)
        fixpoints = {k: gfp(k, lts) for k in K}
        for small, large in chains:
            assert fixpoints[small] <= fixpoints[large], (small, large, lts.transitions())
        for k in K:
            if k.is_bisim:
                assert is_equivalence(fixpoints[k], range(len(lts)))
            elif k.is_expansion:
                assert is_preorder(fixpoints[k], range(len(lts)))
            else:
                assert Relation.identity(range(len(lts))) <= fixpoints[k]


def test_gfp_is_a_fixpoint(make_lts, make_rng):
    rng = make_rng(3)
    for _ in range(20):
        lts = random_lts(make_lts, rng)
        for k in (K.BRANCHING_BISIM, K.DELAY_SIM, K.ETA_EXP):
            R = gfp(k, lts)
            assert step(k, lts, R) == R


def test_greatest_post_fixpoint_below(tau_lts):
    R = Relation([(0, 3), (3, 0), (1, 3), (3, 1), (2, 2), (1, 2)])
    assert greatest_post_fixpoint_below(K.BRANCHING_BISIM, tau_lts, R) == \
        R - Relation([(1, 2)])


def test_rounds_record_answers(tau_lts):
    played = list(rounds(K.BRANCHING_BISIM, tau_lts, 0, 3))
    left = [r for r in played if r.challenge.side == 'left']
    assert [(r.challenge.label, r.challenge.target) for r in left] == [('tau', 1)]
    assert left[0].answers[0].required == ((0, 3), (1, 3))
    right = [r for r in played if r.challenge.side == 'right']
    assert right[0].challenge.label == 'a'
    assert ((1, 3), (2, 2)) in [a.required for a in right[0].answers]


def test_frontier_handling(make_lts):
    lts = make_lts(2, [(0, 'a', 1)], frontier=[1])
    with pytest.raises(FrontierError):
        gfp(K.STRONG_BISIM, lts)
    assert gfp(K.STRONG_BISIM, lts, core_only=True) == Relation()
    with pytest.raises(FrontierError):
        step(K.STRONG_BISIM, lts, Relation([(0, 0)]))
    approx = approximate(K.STRONG_BISIM, lts, 3)
    assert (0, 0) in approx and (1, 1) in approx
    assert (0, 1) in approx


def test_approximate_separates_at_depth(make_lts):
    lts = make_lts(3, [(0, 'a', 1), (1, 'a', 2)])
    assert (0, 1) in approximate(K.STRONG_BISIM, lts, 1)
    assert (0, 1) not in approximate(K.STRONG_BISIM, lts, 2)


def test_bprime_characterization(tau_lts, make_lts, make_rng):
    assert not branching_sim_check_bprime(tau_lts, Relation([(3, 0)]))
    R = Relation([(3, 0), (3, 1), (2, 2)])
    assert branching_sim_check_bprime(tau_lts, R)

    rng = make_rng(11)
    for _ in range(200):
        lts = random_lts(make_lts, rng, max_states=8)
        states = range(len(lts))
        for _ in range(50):
            R = Relation(pair for pair in itertools.product(states, states)
                         if rng.random() < 0.6)
            expected = R <= step(K.BRANCHING_SIM, lts, R, R.pairs)
            assert branching_sim_check_bprime(lts, R) == expected


def test_translate_rules_bprime(ccs_guarded):
    paired = {r.name: r for r in translate_rules_bprime(ccs_guarded)}
    parl = paired['parl[a]']
    assert parl.premises == (('x1', 'a', 'x1_mid', 'y1'),)
    assert str(parl) == ('parl[a]: x1 -a-> (x1_mid, y1) |- par(x1, x2) -a-> '
                         '(par(x1_mid, x2), par(y1, x2))')
    assert str(paired['pre[b]']) == 'pre[b]: |- pre[b](x1) -b-> (pre[b](x1), x1)'
    # the middle term follows the source, not the target
    assert str(paired['gsum_ab_a'].target[0]) == 'gsum_ab(x1, x2)'
    assert str(paired['sync_a'].target[0]) == 'par(x1_mid, x2_mid)'


def test_translate_rules_bprime_needs_straight_rules():
    lang = load_language("""
        labels tau, a
        op par 2
        rule dup: x1 -a-> y1, x1 -tau-> z1 |- par(x1, x2) -a-> par(y1, z1)
        """)
    with pytest.raises(CoolcheckError):
        translate_rules_bprime(lang)


def test_tau_prefix_facts(ccs_guarded, term):
    tau_a = term(ccs_guarded, 'pre[tau](pre[a](nil))')
    a = term(ccs_guarded, 'pre[a](nil)')
    nil = term(ccs_guarded, 'nil')
    lts = explore(ccs_guarded, [tau_a, nil])
    branching = gfp(K.BRANCHING_BISIM, lts)
    assert (lts.index(tau_a), lts.index(a)) in branching
    assert (lts.index(tau_a), lts.index(nil)) not in branching

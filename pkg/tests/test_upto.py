import itertools
import json
import time

import pytest

from coolcheck import upto
from coolcheck.equiv import FunctionalKind as K
from coolcheck.equiv import Relation, gfp, step
from coolcheck.errors import CertificateError, TechniqueError, UsageError
from coolcheck.laws import Law, LawSet
from coolcheck.lts import explore
from coolcheck.spec import classify_format
from coolcheck.terms import parse_term
from coolcheck.upto import (Compose, Const, Ctx, Id, SandwichLaws,
                            SandwichSem, Soundness, Union, UpToContext,
                            Verdict, check_up_to, companion_property_tests,
                            enumerate_image, load_certificate, member,
                            parse_technique, replay_report, run_certificate,
                            soundness_advice)


@pytest.fixture
def guarded_ctx(ccs_guarded):
    """Up-to context over the canonical model of guarded CCS
    """
    return UpToContext.for_language(ccs_guarded, max_states=500)


@pytest.fixture
def exp_laws(ccs_guarded):
    """An unverified expansion law set for guarded CCS
    """
    sig = ccs_guarded.signature
    return {'exp': LawSet('exp', [
        Law('comm', parse_term('par(x, y)', sig), parse_term('par(y, x)', sig)),
        Law('tau', parse_term('par(x, pre[tau](y))', sig),
            parse_term('par(x, y)', sig), 'expansion'),
        ])}


def test_parse_technique_precedence():
    assert parse_technique('id | ctx ; id') == \
        Union((Id(), Compose((Ctx(), Id()))))
    f = parse_technique('(id | ctx) ; id')
    assert f == Compose((Union((Id(), Ctx())), Id()))
    assert str(f) == '(id | ctx) ; id'
    assert parse_technique('const:my-rel') == Const('my-rel')


def test_parse_sandwiches():
    assert parse_technique('sand(exp, ctx, exp)', rewrite_depth=4) == \
        SandwichLaws('exp', Ctx(), 'exp', 4)
    f = parse_technique('sem(strong, id | ctx, expansion)')
    assert f == SandwichSem(K.STRONG_BISIM, Union((Id(), Ctx())), K.BRANCHING_EXP)
    assert str(f) == 'sem(strong_bisim, id | ctx, branching_exp)'


@pytest.mark.parametrize('text', [
    'id |', 'foo', 'sand(exp, ctx)', 'sem(weak_sim, id, strong)',
    'sem(bogus, id, strong)',
    ])
def test_parse_technique_errors(text):
    with pytest.raises(TechniqueError):
        parse_technique(text)


def test_member_ctx(ccs_guarded, term, guarded_ctx):
    R = Relation([(term(ccs_guarded, 'pre[a](nil)'),
                   term(ccs_guarded, 'pre[tau](pre[a](nil))'))])
    pair = (term(ccs_guarded, 'par(pre[a](nil), pre[b](nil))'),
            term(ccs_guarded, 'par(pre[tau](pre[a](nil)), pre[b](nil))'))
    result = member(Ctx(), R, pair, guarded_ctx)
    assert result.complete
    d = result.derivation
    assert d.rule == 'ctx-cong'
    assert [c.rule for c in d.children] == ['ctx-base', 'ctx-cong']

    swapped = (pair[0], term(ccs_guarded, 'par(pre[b](nil), pre[tau](pre[a](nil)))'))
    result = member(Ctx(), R, swapped, guarded_ctx)
    assert result.derivation is None
    assert result.complete


def test_member_union_and_const(ccs_guarded, term):
    nil = term(ccs_guarded, 'nil')
    a = term(ccs_guarded, 'pre[a](nil)')
    ctx = UpToContext.for_language(ccs_guarded, constants={'k': Relation([(nil, a)])})
    f = parse_technique('id | const:k')
    d = member(f, Relation(), (nil, a), ctx).derivation
    assert d.rule == 'union'
    assert d.detail == {'branch': 1}
    assert d.children[0].rule == 'const'
    assert member(f, Relation(), (a, nil), ctx).derivation is None

    with pytest.raises(TechniqueError):
        member(Const('missing'), Relation(), (nil, a), ctx)


def test_member_compose(tau_lts):
    ctx = UpToContext.for_lts(tau_lts)
    R = Relation([(0, 1), (1, 3)])
    d = member(parse_technique('id ; id'), R, (0, 3), ctx).derivation
    assert d.rule == 'compose'
    assert [c.pair for c in d.children] == [(0, 1), (1, 3)]
    assert d.to_json(ctx.describe)['pair'] == ['0', '3']
    assert member(parse_technique('id ; id'), R, (0, 1), ctx).derivation is None


def test_ctx_needs_terms(tau_lts):
    ctx = UpToContext.for_lts(tau_lts)
    with pytest.raises(TechniqueError):
        member(Ctx(), Relation([(0, 1)]), (0, 1), ctx)
    with pytest.raises(TechniqueError):
        enumerate_image(Ctx(), Relation([(0, 1)]), ctx)


def test_member_law_sandwich(ccs_guarded, term, exp_laws):
    ctx = UpToContext.for_language(ccs_guarded, laws=exp_laws)
    f = parse_technique('sand(exp, id, exp)', rewrite_depth=3)
    p = term(ccs_guarded, 'par(pre[tau](pre[a](nil)), nil)')
    q = term(ccs_guarded, 'par(nil, pre[a](nil))')
    R = Relation([(term(ccs_guarded, 'par(nil, pre[a](nil))'), q)])
    d = member(f, R, (p, q), ctx).derivation
    assert d.rule == 'sandwich-laws'
    assert [s.law for s in d.detail['left']] == ['comm', 'tau']
    assert d.detail['right'] == []

    result = member(f, R, (term(ccs_guarded, 'nil'), q), ctx)
    assert result.derivation is None
    assert result.complete


def test_member_semantic_sandwich(ccs_guarded, term, guarded_ctx):
    f = parse_technique('sem(branching_bisim, id, branching_bisim)')
    p = term(ccs_guarded, 'pre[tau](pre[a](nil))')
    q = term(ccs_guarded, 'pre[a](nil)')
    R = Relation([(q, q)])
    d = member(f, R, (p, q), guarded_ctx).derivation
    assert d.rule == 'sandwich-sem'
    assert d.detail['via'] == [q, q]


def test_law_sandwich_images_are_not_enumerable(guarded_ctx):
    f = parse_technique('sand(exp, ctx, exp)')
    with pytest.raises(TechniqueError):
        enumerate_image(f, Relation(), guarded_ctx)


def test_enumerate_ctx_image(ccs_guarded, term, guarded_ctx):
    a = term(ccs_guarded, 'pre[a](nil)')
    b = term(ccs_guarded, 'pre[b](nil)')
    image = enumerate_image(Ctx(), Relation([(a, b)]), guarded_ctx, depth=1)
    assert (a, b) in image
    assert (term(ccs_guarded, 'par(pre[a](nil), nil)'),
            term(ccs_guarded, 'par(pre[b](nil), nil)')) in image
    assert (term(ccs_guarded, 'pre[tau](pre[a](nil))'),
            term(ccs_guarded, 'pre[tau](pre[b](nil))')) in image


def test_check_up_to_identity_matches_step(make_lts, make_rng):
    rng = make_rng(5)
    for _ in range(25):
        n = rng.randint(1, 5)
        lts = make_lts(n, [(rng.randrange(n), rng.choice(['tau', 'a']), rng.randrange(n))
                           for _ in range(rng.randint(0, 2 * n))])
        states = range(n)
        R = Relation(pair for pair in itertools.product(states, states)
                     if rng.random() < 0.5)
        for kind in (K.STRONG_BISIM, K.BRANCHING_BISIM, K.DELAY_EXP):
            report = check_up_to(R, Id(), kind, UpToContext.for_lts(lts))
            expected = R <= step(kind, lts, R, R.pairs)
            assert (report.verdict is Verdict.CERTIFIED) == expected
            assert report.verdict is not Verdict.INCONCLUSIVE


def test_check_up_to_refutes_with_trace(tau_lts):
    report = check_up_to(Relation([(0, 2)]), Id(), K.STRONG_BISIM,
                         UpToContext.for_lts(tau_lts))
    assert report.verdict is Verdict.REFUTED
    data = report.to_json()
    assert data['verdict'] == 'refuted'
    rnd = data['pairs'][0]['rounds'][0]
    assert rnd['challenge'] == {'side': 'left', 'source': '0', 'label': 'tau',
                                'target': '1'}
    assert rnd['status'] == 'refuted'


def test_check_up_to_frontier_is_inconclusive(make_lts):
    lts = make_lts(3, [(0, 'a', 1), (2, 'a', 1)], frontier=[1])
    report = check_up_to(Relation([(0, 2), (1, 1)]), Id(), K.STRONG_BISIM,
                         UpToContext.for_lts(lts))
    assert report.verdict is Verdict.INCONCLUSIVE
    assert [str(p.status) for p in report.pairs] == ['certified', 'inconclusive']


def test_up_to_branching_bisimilarity_is_unsound(corpus_path):
    cert = load_certificate(corpus_path('tau_a_nil.cert.json'))
    report = run_certificate(cert)
    assert report.verdict is Verdict.CERTIFIED
    assert report.advisory.level is Soundness.UNSOUND
    # the certified pair is not branching bisimilar
    ctx = cert.context()
    ctx.include(cert.relation.field())
    (pair,) = cert.relation
    assert pair not in ctx.semantic(K.BRANCHING_BISIM)[0]


def test_plain_bisimulation_refutes_tau_prefix(corpus_path):
    cert = load_certificate(corpus_path('tau_a_nil.cert.json'))
    report = check_up_to(cert.relation, Id(), cert.kind, cert.context())
    assert report.verdict is Verdict.REFUTED


def test_certified_and_sound_implies_bisimilar(ccs_guarded, term, guarded_ctx):
    p = term(ccs_guarded, 'par(pre[a](nil), nil)')
    q = term(ccs_guarded, 'par(nil, pre[a](nil))')
    R = Relation([(p, q)])
    f = parse_technique('sem(strong, ctx, strong)')
    report = check_up_to(R, f, K.BRANCHING_BISIM, guarded_ctx)
    assert report.verdict is Verdict.CERTIFIED
    assert report.advisory.level is Soundness.CERTIFIED
    lts = explore(ccs_guarded, [p, q])
    assert (lts.index(p), lts.index(q)) in gfp(K.BRANCHING_BISIM, lts)


def test_replay_report(corpus_path):
    cert = load_certificate(corpus_path('tau_a_nil.cert.json'))
    data = json.loads(json.dumps(run_certificate(cert).to_json()))
    assert replay_report(data, cert.relation, cert.context()) == []

    data['pairs'][0]['rounds'][0]['derivations'][0]['rule'] = 'id'
    assert replay_report(data, cert.relation, cert.context())

    data['verdict'] = 'refuted'
    assert replay_report(data, cert.relation, cert.context()) == \
        ["report verdict is 'refuted', not certified"]


def test_replay_detects_missing_pairs(corpus_path):
    cert = load_certificate(corpus_path('tau_a_nil.cert.json'))
    data = run_certificate(cert).to_json()
    data['pairs'] = []
    assert replay_report(data, cert.relation, cert.context()) == \
        ['report does not cover exactly the pairs of R']


@pytest.mark.parametrize('name', ['ex41.cert.json', 'ex42.cert.json'])
def test_replication_certificates(corpus_path, name):
    cert = load_certificate(corpus_path(name))
    started = time.monotonic()
    report = run_certificate(cert)
    assert time.monotonic() - started < 120
    assert report.verdict is Verdict.CERTIFIED
    # replication leaves the format, so contexts are not covered
    assert report.advisory.level is Soundness.UNCERTIFIED
    assert any(r.startswith('format clause c3') for r in report.advisory.reasons)

    rounds = [r for p in report.pairs for r in p.rounds]
    assert rounds and all(r.status == 'answered' for r in rounds)
    found = [d for r in rounds for d in r.derivations]
    assert all(d.rule == 'sandwich-laws' for d in found)
    # some answer rewrites its left term before closing under contexts
    assert any(d.detail['left'] for d in found)
    # R itself is used below a parallel context
    assert any(n.rule == 'ctx-cong' and any(m.rule == 'ctx-base' for m in _walk(n))
               for d in found for n in _walk(d.children[0]))
    # a silent move is answered by standing still
    assert any(r.challenge.label == 'tau' and len(r.answer) == 2
               and r.answer[0] == r.answer[1] for r in rounds)


def _walk(d):
    yield d
    for c in d.children:
        yield from _walk(c)


def test_replay_law_sandwich(corpus_path):
    cert = load_certificate(corpus_path('ex42.cert.json'))
    data = json.loads(json.dumps(run_certificate(cert).to_json()))
    assert data['rewrite_depth'] == 4
    assert replay_report(data, cert.relation, cert.context()) == []


def test_soundness_of_contexts(ccs_guarded, ccs_full):
    guarded = classify_format(ccs_guarded)
    full = classify_format(ccs_full)
    assert soundness_advice(Ctx(), K.BRANCHING_BISIM, guarded).level is \
        Soundness.CERTIFIED
    assert soundness_advice(Ctx(), K.STRONG_BISIM, full).level is Soundness.CERTIFIED
    advice = soundness_advice(Ctx(), K.BRANCHING_BISIM, full)
    assert advice.level is Soundness.UNCERTIFIED
    assert advice.reasons[0].startswith('format clause c2 witness (rule ')
    assert advice.reasons[1] == 'format clause c3 witness (plus, arg 1)'
    assert soundness_advice(Ctx(), K.BRANCHING_EXP, guarded).level is \
        Soundness.UNCERTIFIED
    assert soundness_advice(Ctx(), K.WEAK_BISIM).level is Soundness.UNCERTIFIED


def test_soundness_of_sandwiches(ccs_guarded):
    fmt = classify_format(ccs_guarded)

    def level(text, kind):
        return soundness_advice(parse_technique(text), kind, fmt).level

    assert level('sem(strong, ctx, strong)', K.BRANCHING_BISIM) is Soundness.CERTIFIED
    assert level('sem(expansion, ctx, strong)', K.BRANCHING_BISIM) is \
        Soundness.CERTIFIED
    assert level('sem(expansion, ctx, strong)', K.DELAY_BISIM) is \
        Soundness.UNCERTIFIED
    assert level('sem(branching, id, branching)', K.BRANCHING_BISIM) is \
        Soundness.UNSOUND
    assert level('const:k', K.STRONG_BISIM) is Soundness.CONDITIONAL
    assert level('id | const:k ; id', K.STRONG_BISIM) is Soundness.CONDITIONAL


def test_soundness_of_law_sandwiches(ccs_guarded, exp_laws):
    fmt = classify_format(ccs_guarded)
    f = parse_technique('sand(exp, ctx, exp)')
    advice = soundness_advice(f, K.BRANCHING_BISIM, fmt, exp_laws)
    assert advice.level is Soundness.CONDITIONAL
    assert advice.reasons[0] == "law set 'exp' is not verified"
    assert advice.reasons.count("law set 'exp' is not verified") == 1

    verified = {'exp': exp_laws['exp'].with_status(
        {'comm': 'verified', 'tau': 'verified'})}
    assert soundness_advice(f, K.BRANCHING_BISIM, fmt, verified).level is \
        Soundness.CERTIFIED
    assert soundness_advice(f, K.BRANCHING_BISIM, fmt).level is \
        Soundness.UNCERTIFIED


def test_require_verified_laws(ccs_guarded, term, exp_laws):
    ctx = UpToContext.for_language(ccs_guarded, laws=exp_laws,
                                   require_verified=True)
    nil = term(ccs_guarded, 'nil')
    with pytest.raises(TechniqueError):
        member(parse_technique('sand(exp, id, exp)'), Relation(), (nil, nil), ctx)


def test_respectful_instance(tau_lts):
    ctx = UpToContext.for_lts(tau_lts, {'k': Relation([(0, 2)])})
    R = S = Relation([(2, 2)])
    result = upto.test_respectful_instance(Id(), K.STRONG_BISIM, R, S, ctx)
    assert result.passed and not result.vacuous
    assert result.checked == 1

    result = upto.test_respectful_instance(Const('k'), K.STRONG_BISIM, R, S, ctx)
    assert not result.passed
    assert result.witness == (0, 2)


def test_respectful_instance_vacuous(tau_lts):
    ctx = UpToContext.for_lts(tau_lts)
    result = upto.test_respectful_instance(
        Id(), K.STRONG_BISIM, Relation([(0, 0)]), Relation([(1, 1)]), ctx)
    assert result.passed and result.vacuous
    result = upto.test_respectful_instance(
        Id(), K.STRONG_BISIM, Relation([(0, 2)]), Relation([(0, 2)]), ctx)
    assert result.vacuous


def test_bisimilarity_sandwich_is_not_respectful(ccs_guarded, term, guarded_ctx):
    tau_a = term(ccs_guarded, 'pre[tau](pre[a](nil))')
    a = term(ccs_guarded, 'pre[a](nil)')
    nil = term(ccs_guarded, 'nil')
    R = Relation([(tau_a, nil)])
    S = R | Relation([(a, nil)])
    f = parse_technique('sem(branching, id, branching)')
    result = upto.test_respectful_instance(f, K.BRANCHING_BISIM, R, S, guarded_ctx)
    assert not result.vacuous
    assert not result.passed
    assert result.witness == (a, nil)


def test_respectful_contexts_in_guarded_ccs(ccs_guarded, term, guarded_ctx):
    a = term(ccs_guarded, 'pre[a](nil)')
    nil = term(ccs_guarded, 'nil')
    S = Relation([(a, a), (nil, nil)])
    result = upto.test_respectful_instance(
        Ctx(), K.BRANCHING_BISIM, Relation([(a, a)]), S, guarded_ctx, depth=1)
    assert result.passed
    assert result.checked > 0


def test_companion_property_tests(tau_lts, make_rng):
    checks = companion_property_tests(K.STRONG_BISIM, tau_lts, make_rng(5),
                                      samples=8)
    names = [c.name for c in checks]
    assert 'respectful[id ; id]' in names
    assert 'gfp-closed[const:gfp]' in names
    assert all(c.passed for c in checks), [c.to_json() for c in checks]


def write_cert(tmpdir, corpus_path, **fields):
    data = {
        'language': corpus_path('ccs_guarded.gsos'),
        'kind': 'branching_bisim',
        'relation': [['pre[a](nil)', 'pre[a](nil)']],
        'technique': 'id',
        }
    data.update(fields)
    path = tmpdir.join('test.cert.json')
    path.write(json.dumps(data))
    return str(path)


def test_load_certificate(tmpdir, corpus_path):
    path = write_cert(tmpdir, corpus_path,
                      laws=[{'lhs': 'par(x, y)', 'rhs': 'par(y, x)'}],
                      constants={'k': [['nil', 'nil']]},
                      technique='sand(default, const:k | id, default)')
    cert = load_certificate(path, {'max_states': 100, 'max_terms': None})
    assert cert.kind is K.BRANCHING_BISIM
    assert list(cert.laws) == ['default']
    assert cert.bounds == {'rewrite_depth': 6, 'max_states': 100, 'max_terms': 20000}
    assert cert.technique.depth == 6
    assert run_certificate(cert).verdict is Verdict.CERTIFIED


@pytest.mark.parametrize('fields', [
    {'technique': 'const:k'},
    {'technique': 'sand(nope, id, nope)'},
    {'relation': [['pre[a](nil)']]},
    {'relation': [['pre[a](x)', 'nil']]},
    {'kind': 'bogus'},
    {'technique': 'id |'},
    ])
def test_load_certificate_errors(tmpdir, corpus_path, fields):
    path = write_cert(tmpdir, corpus_path, **fields)
    with pytest.raises((CertificateError, TechniqueError)):
        load_certificate(path)


def test_load_certificate_missing_keys(tmpdir):
    path = tmpdir.join('bad.cert.json')
    path.write('{"language": "x.gsos"}')
    with pytest.raises(CertificateError) as excinfo:
        load_certificate(str(path))
    assert 'kind, relation, technique' in str(excinfo.value)


def test_load_certificate_bounds(tmpdir, corpus_path):
    path = write_cert(tmpdir, corpus_path, bounds={'max_states': 0})
    with pytest.raises(UsageError):
        load_certificate(path)
    path = write_cert(tmpdir, corpus_path, bounds={'fuel': 3})
    with pytest.raises(UsageError):
        load_certificate(path)

"""The ``coolcheck`` command.

Exit codes: 0 success or certified, 1 refuted or violations found,
2 inconclusive or truncated, 3 usage or input error.
"""
import argparse
import json
import logging
import random
import sys
from typing import List, Optional, Sequence

from coolcheck import flags
from coolcheck.config import use_color
from coolcheck.equiv import (FunctionalKind, Relation, gfp, partition,
                             translate_rules_bprime)
from coolcheck.errors import CoolcheckError, SpecError, UsageError
from coolcheck.laws import load_laws_file, sample_terms, verify_law
from coolcheck.lts import Lts, check_lax_model, explore
from coolcheck.signing import load_signed_report, sign_report
from coolcheck.spec import (argument_roles, classify_format, load_language_file,
                            rule_properties)
from coolcheck.terms import parse_term, print_term
from coolcheck.upto import (Verdict, load_certificate, parse_technique,
                            run_certificate, test_respectful_instance,
                            UpToContext)


__all__ = ['run', 'main']


log = logging.getLogger(__name__)


EXIT_OK = 0
EXIT_REFUTED = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 3

VERDICT_EXIT = {
    Verdict.CERTIFIED: EXIT_OK,
    Verdict.REFUTED: EXIT_REFUTED,
    Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
    }

_COLORS = {'green': '\033[32m', 'red': '\033[31m', 'yellow': '\033[33m'}


class _Parser(argparse.ArgumentParser):

    def error(self, message):
        raise UsageError(message)


class _Output:
    """Collects what a command prints, as text or as one JSON document."""

    def __init__(self, as_json: bool, stream):
        self.as_json = as_json
        self.stream = stream
        self.color = use_color(stream)

    def line(self, text: str=''):
        if not self.as_json:
            print(text, file=self.stream)

    def paint(self, text: str, color: str) -> str:
        if not self.color:
            return text
        return f'{_COLORS[color]}{text}\033[0m'

    def verdict(self, verdict: Verdict) -> str:
        color = {Verdict.CERTIFIED: 'green', Verdict.REFUTED: 'red',
                 Verdict.INCONCLUSIVE: 'yellow'}[verdict]
        return self.paint(str(verdict), color)

    def document(self, data):
        if self.as_json:
            print(json.dumps(data, indent=2, sort_keys=True), file=self.stream)


def _closed_terms(texts: Sequence[str], lang) -> list:
    return [parse_term(t, lang.signature, allow_variables=False) for t in texts]


def cmd_validate(args, out: _Output) -> int:
    try:
        lang = load_language_file(args.file)
    except SpecError as e:
        out.document({'valid': False,
                      'diagnostics': [d._asdict() for d in e.diagnostics]})
        for d in e.diagnostics:
            out.line(str(d))
        return EXIT_USAGE
    out.document({'valid': True, 'language': lang.name, 'rules': len(lang.rules)})
    out.line(f'{lang.name}: {len(lang.rules)} rules, positive GSOS')
    return EXIT_OK


def cmd_classify(args, out: _Output) -> int:
    lang = load_language_file(args.file)
    report = classify_format(lang)
    rules = []
    for r in lang.rules:
        props = rule_properties(r)
        rules.append({'rule': r.name, 'straight': props.straight,
                      'smooth': props.smooth, 'patience': props.is_patience})

    data = report.to_json()
    data['language'] = lang.name
    data['rules'] = rules
    data['arguments'] = [
        {'operator': op, 'argument': i, 'active': role.active,
         'receiving': role.receiving, 'patience': role.has_patience}
        for (op, i), role in sorted(argument_roles(lang).items())]
    if args.bprime:
        try:
            data['bprime'] = [str(r) for r in translate_rules_bprime(lang)]
        except CoolcheckError as e:
            data['bprime'] = None
            out.line(f'paired translation unavailable: {e}')
    out.document(data)

    out.line(f'language {lang.name}')
    for name, verdict in sorted(report.clauses.items()):
        mark = 'ok' if verdict.ok else out.paint('fails', 'red')
        out.line(f'  {name} {mark}')
        for w in verdict.witnesses:
            if 'rule' in w:
                out.line(f'      rule {w["rule"]}')
            else:
                out.line(f'      ({w["operator"]}, arg {w["argument"]})')
    formats = ', '.join(f'{k}: {str(v).lower()}'
                        for k, v in report.formats().items())
    out.line(f'formats {{{formats}}}')
    for r in rules:
        patience = f', patience in arg {r["patience"]}' if r['patience'] else ''
        out.line(f'  {r["rule"]}: straight={str(r["straight"]).lower()}, '
                 f'smooth={str(r["smooth"]).lower()}{patience}')
    for line in data.get('bprime') or ():
        out.line(f'  {line}')
    return EXIT_OK


def _emit_lts(lts: Lts, path: str, fmt: str):
    with open(path, 'w', encoding='utf-8') as f:
        if fmt == 'json':
            json.dump(lts.to_json(), f, indent=2, sort_keys=True)
            f.write('\n')
        else:
            f.write(lts.to_aldebaran())


def cmd_explore(args, out: _Output) -> int:
    opts = flags.validate(flags.ExploreForm, {
        'max_states': args.max_states, 'max_depth': args.max_depth,
        'lts_format': args.lts_format})
    lang = load_language_file(args.spec)
    lts = explore(lang, _closed_terms(args.terms, lang), opts['max_states'],
                  opts['max_depth'])
    if args.emit_lts:
        _emit_lts(lts, args.emit_lts, opts['lts_format'])

    out.document({'states': len(lts), 'transitions': lts.transition_count,
                  'frontier': [lts.describe(i) for i in sorted(lts.frontier)],
                  'budget_exhausted': lts.budget_exhausted})
    out.line(f'{len(lts)} states, {lts.transition_count} transitions, '
             f'{len(lts.frontier)} frontier')
    for s, l, t in lts.transitions():
        out.line(f'  {lts.describe(s)} -{l}-> {lts.describe(t)}')
    return EXIT_INCONCLUSIVE if lts.frontier else EXIT_OK


def cmd_equiv(args, out: _Output) -> int:
    opts = flags.validate(flags.EquivForm, {
        'kind': args.kind, 'max_states': args.max_states,
        'max_depth': args.max_depth})
    kind = FunctionalKind.parse(opts['kind'])

    if args.lts:
        with open(args.lts, encoding='utf-8') as f:
            lts = Lts.from_aldebaran(f.read())
        names = {lts.describe(i): i for i in range(len(lts))}
        try:
            left, right = names[args.left], names[args.right]
        except KeyError as e:
            raise UsageError(f'no state {e.args[0]!r} in {args.lts}') from None
    elif args.spec:
        lang = load_language_file(args.spec)
        terms = _closed_terms([args.left, args.right], lang)
        lts = explore(lang, terms, opts['max_states'], opts['max_depth'])
        left, right = lts.index(terms[0]), lts.index(terms[1])
    else:
        raise UsageError('equiv needs --spec or --lts')

    relation = gfp(kind, lts, core_only=True)
    core = lts.core_states()
    symmetric = kind.is_bisim
    words = ('equivalent', 'not equivalent') if symmetric \
        else ('related', 'not related')

    if left not in core or right not in core:
        verdict, text, code = None, 'inconclusive', EXIT_INCONCLUSIVE
    elif (left, right) in relation:
        verdict, text, code = True, words[0], EXIT_OK
    else:
        verdict, text, code = False, words[1], EXIT_REFUTED

    data = {'kind': str(kind), 'left': lts.describe(left),
            'right': lts.describe(right), 'related': verdict}
    if args.partition:
        classes = partition(relation, core)
        data['partition'] = [[lts.describe(s) for s in block] for block in classes]
    out.document(data)
    out.line(text)
    for block in data.get('partition', ()):
        out.line('  {' + ', '.join(block) + '}')
    return code


def _render_derivation(node: dict, out: _Output, indent: int):
    pad = '  ' * indent
    l, r = node['pair']
    out.line(f'{pad}{node["rule"]}: {l}  ~  {r}')
    for side in ('left', 'right'):
        for step in node.get(side, ()) if isinstance(node.get(side), list) else ():
            out.line(f'{pad}  {side} {step["law"]} at {step["path"]} -> {step["term"]}')
    if 'via' in node:
        out.line(f'{pad}  via {node["via"][0]} / {node["via"][1]}')
    for child in node.get('children', ()):
        _render_derivation(child, out, indent + 1)


def cmd_check_upto(args, out: _Output) -> int:
    opts = flags.validate(flags.CheckUpToForm, {
        'rewrite_depth': args.rewrite_depth, 'max_states': args.max_states,
        'max_terms': args.max_terms})
    cert = load_certificate(args.cert, opts)
    report = run_certificate(cert, args.require_verified_laws)
    data = report.to_json()
    if args.sign_key:
        data['signed'] = sign_report(report.to_json(), args.sign_key)
    out.document(data)

    out.line(f'{out.verdict(report.verdict)} '
             f'({report.kind} up to {report.technique})')
    out.line(f'advisory: {report.advisory}')
    if args.trace or report.verdict != Verdict.CERTIFIED:
        for entry in data['pairs']:
            out.line(f'pair {entry["pair"][0]}  ~  {entry["pair"][1]}: '
                     f'{entry["status"]}')
            if entry['reason']:
                out.line(f'  {entry["reason"]}')
            for rnd in entry['rounds']:
                c = rnd['challenge']
                out.line(f'  [{c["side"]}] {c["source"]} -{c["label"]}-> '
                         f'{c["target"]}: {rnd["status"]}')
                if rnd['answer']:
                    out.line(f'    answer {" / ".join(rnd["answer"])}')
                for node in rnd['derivations']:
                    _render_derivation(node, out, 3)
    if args.sign_key:
        out.line(f'signed: {data["signed"]}')
    return VERDICT_EXIT[report.verdict]


def cmd_verify_laws(args, out: _Output) -> int:
    opts = flags.validate(flags.VerifyLawsForm, {
        'max_states': args.max_states, 'max_depth': args.max_depth})
    lang = load_language_file(args.spec)
    law_sets = load_laws_file(args.laws, lang)
    if args.sample:
        samples = _closed_terms(args.sample, lang)
    else:
        samples = sample_terms(lang)

    results = []
    for name in sorted(law_sets):
        for law in law_sets[name]:
            check = verify_law(law, lang, samples, opts['max_states'],
                               opts['max_depth'])
            results.append((name, check))
            failure = f' at {check.failure}' if check.failure else ''
            out.line(f'{name}/{check.law}: {check.status}{failure}')

    out.document({'laws': [dict(check.to_json(), set=name)
                           for name, check in results]})
    if any(c.failed for _, c in results):
        return EXIT_REFUTED
    if any(c.status == 'unchecked' for _, c in results):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_respectful_test(args, out: _Output) -> int:
    opts = flags.validate(flags.RespectfulForm, {
        'kind': args.kind, 'samples': args.samples,
        'context_depth': args.context_depth, 'max_states': args.max_states,
        'max_depth': args.max_depth})
    kind = FunctionalKind.parse(opts['kind'])
    lang = load_language_file(args.spec)
    technique = parse_technique(args.technique)
    roots = _closed_terms(args.root, lang)
    if not roots and not args.pair:
        raise UsageError('respectful-test needs --root or --pair')
    ctx = UpToContext.for_language(lang, opts['max_states'])

    if args.pair:
        R = Relation(tuple(_closed_terms(p, lang)) for p in args.pair)
        S = R | Relation(tuple(_closed_terms(p, lang)) for p in args.extra or ())
        instances = [(R, S)]
    else:
        fragment = explore(lang, roots, opts['max_states'], opts['max_depth'])
        best = gfp(kind, fragment, core_only=True)
        S = Relation((fragment.states[a], fragment.states[b]) for a, b in best)
        pairs = sorted(S.pairs, key=lambda pq: (print_term(pq[0]), print_term(pq[1])))
        rng = random.Random(args.seed)
        instances = []
        for _ in range(opts['samples']):
            k = rng.randint(1, min(3, len(pairs))) if pairs else 0
            instances.append((Relation(rng.sample(pairs, k)), S))

    results = []
    for R, S in instances:
        result = test_respectful_instance(technique, kind, R, S, ctx,
                                          opts['context_depth'])
        results.append(result)
        if not result.passed:
            w = result.witness
            out.line(f'fails on ({print_term(w[0])}, {print_term(w[1])})')

    failed = sum(not r.passed for r in results)
    vacuous = sum(r.vacuous for r in results)
    out.document({'technique': str(technique), 'kind': str(kind),
                  'instances': [r.to_json(print_term) for r in results]})
    out.line(f'{len(results) - failed}/{len(results)} instances pass '
             f'({vacuous} vacuous)')
    return EXIT_REFUTED if failed else EXIT_OK


def cmd_lax_check(args, out: _Output) -> int:
    opts = flags.validate(flags.LaxCheckForm, {
        'mode': args.mode, 'max_states': args.max_states,
        'max_depth': args.max_depth})
    lang = load_language_file(args.spec)
    base = explore(lang, _closed_terms(args.root, lang), opts['max_states'],
                   opts['max_depth'])
    report = check_lax_model(lang, base, opts['mode'], opts['max_states'])
    out.document(report.to_json())
    status = 'ok' if report.ok else ('truncated' if not report.violations
                                     else 'violations')
    out.line(f'{opts["mode"]} lax model: {status} '
             f'({report.checked_assignments} assignments)')
    for v in report.violations:
        out.line(f'  {v["rule"]}: missing {v["missing"]}')
    if report.violations:
        return EXIT_REFUTED
    return EXIT_INCONCLUSIVE if report.truncated else EXIT_OK


def cmd_verify_report(args, out: _Output) -> int:
    with open(args.file, encoding='utf-8') as f:
        content = f.read()
    token = content.strip()
    try:
        data = json.loads(content)
    except ValueError:
        data = None
    if isinstance(data, dict):
        token = data.get('signed', '')
    payload = load_signed_report(token, args.key)
    try:
        verdict = Verdict(payload['verdict'])
    except (KeyError, TypeError, ValueError):
        raise CoolcheckError('signed payload is not a check report') from None
    out.document(payload)
    out.line(f'signature ok: {out.verdict(verdict)} '
             f'({payload["kind"]} up to {payload["technique"]})')
    return VERDICT_EXIT[verdict]


def _budget_flags(p, depth=True):
    p.add_argument('--max-states', type=int, metavar='N')
    if depth:
        p.add_argument('--max-depth', type=int, metavar='N')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='coolcheck',
                     description='GSOS format checks and up-to bisimulation proofs.')
    parser.add_argument('--json', action='store_true',
                        help='print one JSON document instead of text')
    parser.add_argument('--seed', type=int, default=0,
                        help='seed for randomized sampling')
    parser.add_argument('--verbose', action='store_true',
                        help='log debug output to stderr')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('validate', help='check a .gsos file')
    p.add_argument('file')
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser('classify', help='classify a language into cool formats')
    p.add_argument('file')
    p.add_argument('--bprime', action='store_true',
                   help='also list the paired-transition rule translation')
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser('explore', help='explore the canonical model')
    p.add_argument('--spec', required=True)
    p.add_argument('terms', nargs='+', metavar='TERM')
    _budget_flags(p)
    p.add_argument('--emit-lts', metavar='FILE')
    p.add_argument('--lts-format')
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser('equiv', help='decide a behavioural relation')
    p.add_argument('--kind', required=True)
    p.add_argument('--spec')
    p.add_argument('--lts', metavar='FILE', help='an Aldebaran (.aut) file')
    p.add_argument('--left', required=True)
    p.add_argument('--right', required=True)
    p.add_argument('--partition', action='store_true')
    _budget_flags(p)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser('check-upto', help='check a certificate')
    p.add_argument('--cert', required=True)
    p.add_argument('--rewrite-depth', type=int, metavar='N')
    p.add_argument('--max-terms', type=int, metavar='N')
    _budget_flags(p, depth=False)
    p.add_argument('--require-verified-laws', action='store_true')
    p.add_argument('--trace', action='store_true')
    p.add_argument('--sign-key', metavar='KEY')
    p.set_defaults(func=cmd_check_upto)

    p = sub.add_parser('verify-laws', help='check laws on sample instances')
    p.add_argument('--spec', required=True)
    p.add_argument('--laws', required=True)
    p.add_argument('--sample', action='append', metavar='TERM',
                   help='sample term (default: every closed term of size 2 or less)')
    _budget_flags(p)
    p.set_defaults(func=cmd_verify_laws)

    p = sub.add_parser('respectful-test', help='test respectfulness instances')
    p.add_argument('--spec', required=True)
    p.add_argument('--kind', required=True)
    p.add_argument('--technique', required=True)
    p.add_argument('--root', action='append', default=[], metavar='TERM')
    p.add_argument('--pair', action='append', nargs=2, metavar=('P', 'Q'))
    p.add_argument('--extra', action='append', nargs=2, metavar=('P', 'Q'),
                   help='pairs added to S besides the pairs of R')
    p.add_argument('--samples', type=int, metavar='N')
    p.add_argument('--context-depth', type=int, metavar='N')
    _budget_flags(p)
    p.set_defaults(func=cmd_respectful_test)

    p = sub.add_parser('lax-check', help='check the weak lax-model property')
    p.add_argument('--spec', required=True)
    p.add_argument('--mode')
    p.add_argument('--root', action='append', required=True, metavar='TERM')
    _budget_flags(p)
    p.set_defaults(func=cmd_lax_check)

    p = sub.add_parser('verify-report', help='check a signed report')
    p.add_argument('--key', required=True)
    p.add_argument('file')
    p.set_defaults(func=cmd_verify_report)

    return parser


def run(argv: Optional[List[str]]=None, stdout=None) -> int:
    """Run the command line ``argv`` and return its exit code."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f'coolcheck: {e}', file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')

    out = _Output(args.json, stdout)
    try:
        return args.func(args, out)
    except (CoolcheckError, OSError) as e:
        print(f'coolcheck: {e}', file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run())

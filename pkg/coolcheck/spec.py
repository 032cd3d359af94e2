"""Positive GSOS language specifications and the simply cool rule formats.

A ``.gsos`` file is a sequence of declarations::

    language ccs_guarded
    labels a, abar, tau
    op nil 0
    op pre[*] 1
    op par 2
    rule pre forall A: |- pre[A](x1) -A-> x1
    rule parl forall A: x1 -A-> y1 |- par(x1, x2) -A-> par(y1, x2)
    rule sync: x1 -a-> y1, x2 -abar-> y2 |- par(x1, x2) -tau-> par(y1, y2)

``forall A`` introduces a label metavariable, optionally restricted with
``where A != tau``; schema rules are expanded into one concrete rule per label
at load time. Text after ``#`` is a comment.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

from lark import Lark, Tree
from lark.exceptions import UnexpectedInput

from coolcheck.errors import Diagnostic, SpecError, TermSyntaxError
from coolcheck.terms import (TAU, TERM_GRAMMAR, App, Operator, Signature, Term,
                             Var, print_term, resolve_term, subterms, vars_of)


__all__ = [
    'Premise',
    'Rule',
    'GsosLanguage',
    'RuleProperties',
    'ArgumentRole',
    'ClauseVerdict',
    'FORMAT_CLAUSES',
    'FormatReport',
    'load_language',
    'load_language_file',
    'rule_properties',
    'argument_roles',
    'classify_format',
    ]


log = logging.getLogger(__name__)


SPEC_GRAMMAR = r"""
start: _item*
_item: language | labels | op_decl | rule

language: "language" NAME
labels: "labels" NAME ("," NAME)*
op_decl: "op" NAME FAMILY? INT
FAMILY: "[*]"

rule: "rule" NAME schema? ":" premises? "|-" term "-" NAME "->" term
schema: "forall" NAME exclusions?
exclusions: "where" exclusion ("," exclusion)*
exclusion: NAME "!=" NAME

premises: premise ("," premise)*
premise: NAME "-" NAME "->" NAME      -> positive_premise
       | NAME "-/" NAME "->" NAME?    -> negative_premise

COMMENT: /#[^\n]*/

%import common.INT
%import common.WS
%ignore WS
%ignore COMMENT
""" + TERM_GRAMMAR

_spec_parser = Lark(SPEC_GRAMMAR, start='start', parser='lalr',
                    propagate_positions=True)


class Premise(NamedTuple):
    source: str
    label: str
    target: str

    def __str__(self):
        return f'{self.source} -{self.label}-> {self.target}'


@dataclass(frozen=True)
class Rule:
    """A positive GSOS rule ``H / op(x1, ..., xn) -label-> target``.
    """
    name: str
    operator: str
    operator_label: Optional[str]
    sources: Tuple[str, ...]
    premises: Tuple[Premise, ...]
    label: str
    target: Term
    line: Optional[int] = field(default=None, compare=False)

    @property
    def source(self) -> App:
        return App(self.operator, tuple(Var(x) for x in self.sources),
                   self.operator_label)

    @property
    def key(self) -> str:
        return self.source.key

    def __str__(self):
        premises = ', '.join(str(p) for p in self.premises)
        if premises:
            premises += ' '
        return (f'{self.name}: {premises}|- {print_term(self.source)} '
                f'-{self.label}-> {print_term(self.target)}')


class GsosLanguage:
    """A validated positive GSOS language ``(signature, rules)``.
    """

    def __init__(self, name: str, signature: Signature, rules: List[Rule]):
        self.name = name
        self.signature = signature
        self.rules = list(rules)
        self._by_operator: Dict[str, List[Rule]] = {}
        for r in self.rules:
            self._by_operator.setdefault(r.key, []).append(r)

    def rules_for(self, key: str) -> List[Rule]:
        """Rules whose source operator is ``key`` (e.g. ``pre[a]``)."""
        return self._by_operator.get(key, [])

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def __repr__(self):
        return f'GsosLanguage({self.name!r}, {len(self.rules)} rules)'


def _line(tree: Tree) -> Optional[int]:
    return getattr(tree.meta, 'line', None)


def _expand_rule(tree: Tree, sig: Signature,
                 diagnostics: List[Diagnostic]) -> List[Rule]:
    name = str(tree.children[0])
    line = _line(tree)

    schema = None
    premises_tree = None
    terms = []
    labels = []
    for child in tree.children[1:]:
        if isinstance(child, Tree):
            if child.data == 'schema':
                schema = child
            elif child.data == 'premises':
                premises_tree = child
            elif child.data == 'term':
                terms.append(child)
        else:
            labels.append(str(child))

    raw_premises = []
    if premises_tree is not None:
        for p in premises_tree.children:
            if p.data == 'negative_premise':
                diagnostics.append(Diagnostic(
                    'negative-premise',
                    'negative premises are not supported (positive GSOS only)',
                    name, _line(p)))
                return []
            raw_premises.append(tuple(str(c) for c in p.children))

    if schema is None:
        instantiations = [({}, name)]
    else:
        metavar = str(schema.children[0])
        excluded = set()
        for child in schema.children[1:]:
            for exclusion in child.children:
                left, right = (str(c) for c in exclusion.children)
                excluded.add(right if left == metavar else left)
        instantiations = [({metavar: label}, f'{name}[{label}]')
                          for label in sig.sorted_labels()
                          if label not in excluded]

    rules = []
    for subst, rule_name in instantiations:
        try:
            source = resolve_term(terms[0], sig, label_subst=subst)
            target = resolve_term(terms[1], sig, label_subst=subst)
        except TermSyntaxError as e:
            diagnostics.append(Diagnostic(e.code, str(e), rule_name, line))
            continue

        label = subst.get(labels[0], labels[0])
        premises = tuple(Premise(x, subst.get(b, b), y)
                         for x, b, y in raw_premises)

        bad_labels = [l for l in [label] + [p.label for p in premises]
                      if l not in sig.labels]
        if bad_labels:
            diagnostics.append(Diagnostic(
                'unknown-label', f'undeclared label(s) {sorted(set(bad_labels))}',
                rule_name, line))
            continue

        if not isinstance(source, App) or \
                not all(isinstance(a, Var) for a in source.args):
            diagnostics.append(Diagnostic(
                'bad-source', 'the source must be an operator applied to '
                'variables', rule_name, line))
            continue

        rules.append(Rule(rule_name, source.op, source.label,
                          tuple(a.name for a in source.args), premises,
                          label, target, line))
    return rules


def _validate_rule(r: Rule) -> List[Diagnostic]:
    diagnostics = []

    def report(code, message):
        diagnostics.append(Diagnostic(code, message, r.name, r.line))

    seen = set()
    for x in r.sources:
        if x in seen:
            report('duplicate-source-variable',
                   f'source variable {x} occurs more than once')
        seen.add(x)

    targets = set()
    for p in r.premises:
        if p.source not in r.sources:
            report('premise-lhs-not-source',
                   f'premise left-hand side {p.source} is not a source variable')
        if p.target in targets:
            report('duplicate-premise-target',
                   f'premise right-hand side {p.target} occurs more than once')
        if p.target in r.sources:
            report('premise-target-clashes-source',
                   f'premise right-hand side {p.target} is also a source variable')
        targets.add(p.target)

    unhoused = vars_of(r.target) - set(r.sources) - targets
    if unhoused:
        report('unhoused-target-variable',
               f'target uses variable(s) {sorted(unhoused)} that occur neither '
               f'in the source nor in a premise')
    return diagnostics


def load_language(text: str) -> GsosLanguage:
    """Parse and validate a ``.gsos`` language specification.

    Args:
      text (str): The specification source.

    Returns:
      GsosLanguage: The validated language, with schema rules expanded.

    Raises:
      SpecError: With one diagnostic per violation found.

    """
    try:
        tree = _spec_parser.parse(text)
    except UnexpectedInput as e:
        raise SpecError([Diagnostic('syntax', 'malformed specification',
                                    None, e.line)]) from None

    name = 'unnamed'
    labels = []
    operators = []
    rule_trees = []
    for item in tree.children:
        if item.data == 'language':
            name = str(item.children[0])
        elif item.data == 'labels':
            labels.extend(str(c) for c in item.children)
        elif item.data == 'op_decl':
            indexed = any(str(c) == '[*]' for c in item.children[1:-1])
            operators.append(Operator(str(item.children[0]),
                                      int(item.children[-1]), indexed))
        elif item.data == 'rule':
            rule_trees.append(item)

    sig = Signature(operators, labels)

    diagnostics: List[Diagnostic] = []
    rules = []
    for rule_tree in rule_trees:
        rules.extend(_expand_rule(rule_tree, sig, diagnostics))
    for r in rules:
        diagnostics.extend(_validate_rule(r))

    if diagnostics:
        raise SpecError(diagnostics)

    log.debug('loaded language %s with %d rules', name, len(rules))
    return GsosLanguage(name, sig, rules)


def load_language_file(path) -> GsosLanguage:
    with open(path, encoding='utf-8') as f:
        return load_language(f.read())


class RuleProperties(NamedTuple):
    straight: bool
    smooth: bool
    is_patience: Optional[int]


def _patience_argument(r: Rule) -> Optional[int]:
    if r.label != TAU or len(r.premises) != 1:
        return None
    p = r.premises[0]
    if p.label != TAU or p.source not in r.sources:
        return None
    i = r.sources.index(p.source)
    args = list(r.source.args)
    args[i] = Var(p.target)
    if r.target == App(r.operator, tuple(args), r.operator_label):
        return i + 1
    return None


def rule_properties(r: Rule) -> RuleProperties:
    """Compute the straight / smooth / patience flags of a rule. Argument
    indices are 1-based.
    """
    lhs = [p.source for p in r.premises]
    straight = len(lhs) == len(set(lhs))
    smooth = straight and not (set(lhs) & vars_of(r.target))
    return RuleProperties(straight, smooth, _patience_argument(r))


class ArgumentRole(NamedTuple):
    active: bool = False
    receiving: bool = False
    has_patience: bool = False


def argument_roles(lang: GsosLanguage) -> Dict[Tuple[str, int], ArgumentRole]:
    """Tabulate, for every concrete operator and 1-based argument index,
    whether the argument is active, receiving and has a patience rule.
    """
    active = set()
    receiving = set()
    patient = set()

    for r in lang.rules:
        for p in r.premises:
            if p.source in r.sources:
                active.add((r.key, r.sources.index(p.source) + 1))

        i = rule_properties(r).is_patience
        if i is not None:
            patient.add((r.key, i))

        received = {p.target for p in r.premises}
        if not received:
            continue
        for s in subterms(r.target):
            if not isinstance(s, App):
                continue
            for j, v in enumerate(s.args):
                if vars_of(v) & received:
                    receiving.add((s.key, j + 1))

    roles = {}
    for name, label, arity in lang.signature.instances():
        key = name if label is None else f'{name}[{label}]'
        for i in range(1, arity + 1):
            arg = (key, i)
            roles[arg] = ArgumentRole(arg in active, arg in receiving,
                                      arg in patient)
    return roles


@dataclass
class ClauseVerdict:
    ok: bool
    witnesses: List[dict] = field(default_factory=list)

    def to_json(self):
        return {'ok': self.ok, 'witnesses': list(self.witnesses)}


CLAUSES = {
    'c1': 'all rules are straight',
    'c2': 'only patience rules have tau-premises',
    'c3': 'every active argument has a patience rule',
    'c4': 'every receiving argument has a patience rule',
    'c5': 'all rules are smooth',
    }


FORMAT_CLAUSES = {
    'wb': ('c1', 'c2', 'c3', 'c4', 'c5'),
    'bb': ('c1', 'c2', 'c3'),
    'hb': ('c1', 'c2', 'c3', 'c4'),
    'db': ('c1', 'c2', 'c3', 'c5'),
    }


@dataclass
class FormatReport:
    clauses: Dict[str, ClauseVerdict]

    def grants(self, fmt: str) -> bool:
        return all(self.clauses[n].ok for n in FORMAT_CLAUSES[fmt])

    def failing(self, fmt: str) -> List[str]:
        """Clauses of format ``fmt`` that do not hold."""
        return [n for n in FORMAT_CLAUSES[fmt] if not self.clauses[n].ok]

    @property
    def wb_cool(self) -> bool:
        return self.grants('wb')

    @property
    def bb_cool(self) -> bool:
        return self.grants('bb')

    @property
    def hb_cool(self) -> bool:
        return self.grants('hb')

    @property
    def db_cool(self) -> bool:
        return self.grants('db')

    def formats(self) -> Dict[str, bool]:
        return {'wb': self.wb_cool, 'bb': self.bb_cool,
                'hb': self.hb_cool, 'db': self.db_cool}

    def to_json(self):
        return {
            'clauses': {name: self.clauses[name].to_json()
                        for name in sorted(self.clauses)},
            'formats': self.formats(),
            }


def _witness_key(w):
    return (w.get('rule', ''), w.get('operator', ''), w.get('argument', 0))


def classify_format(lang: GsosLanguage) -> FormatReport:
    """Check the five clauses of the simply cool formats.

    Every failed clause carries at least one witness: a rule name for clauses
    about rules, an operator and argument for clauses about arguments.
    """
    witnesses = {name: [] for name in CLAUSES}

    for r in lang.rules:
        props = rule_properties(r)
        if not props.straight:
            witnesses['c1'].append({'rule': r.name})
        if not props.smooth:
            witnesses['c5'].append({'rule': r.name})
        if props.is_patience is None and \
                any(p.label == TAU for p in r.premises):
            witnesses['c2'].append({'rule': r.name})

    for (key, i), role in argument_roles(lang).items():
        if role.has_patience:
            continue
        if role.active:
            witnesses['c3'].append({'operator': key, 'argument': i})
        if role.receiving:
            witnesses['c4'].append({'operator': key, 'argument': i})

    clauses = {}
    for name in CLAUSES:
        found = sorted(witnesses[name], key=_witness_key)
        clauses[name] = ClauseVerdict(not found, found)
        if found:
            log.debug('clause %s fails: %s', name, found)
    return FormatReport(clauses)

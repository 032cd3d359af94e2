"""Signatures, terms, variables and substitutions.

Terms are immutable and hash by structure, so they double as state identities
of canonical models. The concrete syntax is::

    term := IDENT | OPNAME ('[' LABEL ']')? '(' (term (',' term)*)? ')'

where 0-ary applications may drop the parentheses and a bare identifier that is
not a declared 0-ary operator is a variable.
"""
import functools
from dataclasses import dataclass, field
from typing import (Dict, FrozenSet, Iterable, Iterator, Mapping, Optional,
                    Sequence, Tuple, Union)

from lark import Lark, Tree
from lark.exceptions import UnexpectedInput

from coolcheck.errors import Diagnostic, SpecError, TermSyntaxError


__all__ = [
    'TAU',
    'Operator',
    'Signature',
    'Var',
    'App',
    'Term',
    'Substitution',
    'TERM_GRAMMAR',
    'parse_term',
    'resolve_term',
    'print_term',
    'apply_substitution',
    'compose_substitutions',
    'vars_of',
    'is_closed',
    'subterms',
    'positions',
    'replace_at',
    'match',
    'term_size',
    ]


TAU = 'tau'


@dataclass(frozen=True)
class Operator:
    name: str
    arity: int
    indexed: bool = False

    def __str__(self):
        mark = '[*]' if self.indexed else ''
        return f'{self.name}{mark}/{self.arity}'


class Signature:
    """A finite set of operators together with a finite action alphabet.

    Label-indexed operator families (``pre[*]``) stand for one operator per
    declared label.
    """

    def __init__(self, operators: Iterable[Operator], labels: Iterable[str]):
        self.operators: Dict[str, Operator] = {}
        diagnostics = []
        for op in operators:
            if op.name in self.operators:
                diagnostics.append(Diagnostic(
                    'duplicate-operator', f'operator {op.name} declared twice'))
                continue
            if op.arity < 0:
                diagnostics.append(Diagnostic(
                    'arity-mismatch', f'operator {op.name} has negative arity'))
                continue
            self.operators[op.name] = op

        self.labels: FrozenSet[str] = frozenset(labels)
        if TAU not in self.labels:
            diagnostics.append(Diagnostic(
                'missing-tau', 'the silent action "tau" must be a declared label'))

        if diagnostics:
            raise SpecError(diagnostics)

    def operator(self, name: str) -> Optional[Operator]:
        return self.operators.get(name)

    def is_constant(self, name: str) -> bool:
        op = self.operators.get(name)
        return op is not None and op.arity == 0 and not op.indexed

    def sorted_labels(self) -> Tuple[str, ...]:
        # tau first, then alphabetical
        return tuple(sorted(self.labels, key=lambda l: (l != TAU, l)))

    def instances(self) -> Iterator[Tuple[str, Optional[str], int]]:
        """Yield every concrete operator ``(name, label, arity)``.
        """
        for name in sorted(self.operators):
            op = self.operators[name]
            if op.indexed:
                for label in self.sorted_labels():
                    yield name, label, op.arity
            else:
                yield name, None, op.arity

    def __repr__(self):
        ops = ', '.join(str(op) for op in self.operators.values())
        return f'Signature({ops}; labels={sorted(self.labels)})'


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class App:
    op: str
    args: Tuple['Term', ...] = ()
    label: Optional[str] = None
    _hash: int = field(default=0, init=False, repr=False, compare=False)
    _text: Optional[str] = field(default=None, init=False, repr=False,
                                 compare=False)

    def __post_init__(self):
        object.__setattr__(self, '_hash',
                           hash((self.op, self.label, self.args)))

    def __hash__(self):
        return self._hash

    @property
    def key(self) -> str:
        """Concrete operator name, e.g. ``pre[a]`` or ``par``."""
        if self.label is None:
            return self.op
        return f'{self.op}[{self.label}]'

    def __str__(self):
        return print_term(self)


Term = Union[Var, App]
Substitution = Mapping[str, Term]


TERM_GRAMMAR = r"""
term: NAME index? arguments?
index: "[" NAME "]"
arguments: "(" (term ("," term)*)? ")"

NAME: /[^\W\d]\w*/
"""

_term_parser = Lark(TERM_GRAMMAR + r"""
%import common.WS
%ignore WS
""", start='term', parser='lalr', propagate_positions=True)


def resolve_term(tree: Tree, sig: Signature, allow_variables: bool=True,
                 label_subst: Optional[Mapping[str, str]]=None) -> Term:
    """Turn a raw ``term`` parse tree into a :class:`Term` checked against
    ``sig``.

    ``label_subst`` renames label indices, which is how schema rules are
    instantiated.

    Raises:
      TermSyntaxError: On unknown operators, bad label indices or arity
          mismatches, with the position of the offending subterm.

    """
    name = str(tree.children[0])
    index = None
    arguments = None
    for child in tree.children[1:]:
        if child.data == 'index':
            index = str(child.children[0])
            if label_subst:
                index = label_subst.get(index, index)
        elif child.data == 'arguments':
            arguments = [c for c in child.children if isinstance(c, Tree)]

    line = getattr(tree.meta, 'line', None)
    column = getattr(tree.meta, 'column', None)

    op = sig.operator(name)
    if op is None:
        if index is None and arguments is None and allow_variables \
                and name[0].islower():
            return Var(name)
        raise TermSyntaxError(f'unknown operator {name!r}', line, column,
                              code='unknown-operator')

    if op.indexed and index is None:
        raise TermSyntaxError(
            f'operator family {name!r} needs a label index', line, column,
            code='unknown-operator')
    if not op.indexed and index is not None:
        raise TermSyntaxError(
            f'operator {name!r} is not label-indexed', line, column,
            code='unknown-operator')
    if index is not None and index not in sig.labels:
        raise TermSyntaxError(f'unknown label {index!r}', line, column,
                              code='unknown-label')

    arguments = arguments or []
    if len(arguments) != op.arity:
        raise TermSyntaxError(
            f'operator {name!r} expects {op.arity} argument(s), '
            f'got {len(arguments)}', line, column, code='arity-mismatch')

    args = tuple(resolve_term(a, sig, allow_variables, label_subst)
                 for a in arguments)
    return App(name, args, index)


def parse_term(text: str, sig: Signature, allow_variables: bool=True) -> Term:
    """Parse ``text`` into a term over ``sig``.

    Args:
      text (str): The term source.
      sig (Signature): The signature the term must fit.
      allow_variables (bool): Whether bare undeclared identifiers are read as
          variables. Defaults to True.

    Returns:
      Term: The parse tree.

    Raises:
      TermSyntaxError: On malformed syntax, unknown operators or arity
          mismatches.

    """
    try:
        tree = _term_parser.parse(text)
    except UnexpectedInput as e:
        raise TermSyntaxError('malformed term', e.line, e.column) from None
    return resolve_term(tree, sig, allow_variables)


@functools.lru_cache(maxsize=65536)
def print_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    # cached on the node; successor lists are sorted by printed form
    if t._text is None:
        head = t.key
        text = head if not t.args else \
            f'{head}({", ".join(print_term(a) for a in t.args)})'
        object.__setattr__(t, '_text', text)
    return t._text


def apply_substitution(t: Term, rho: Substitution) -> Term:
    """Replace the variables of ``t`` mapped by ``rho``; unmapped variables
    stay as they are.
    """
    if isinstance(t, Var):
        return rho.get(t.name, t)
    if not t.args:
        return t
    return App(t.op, tuple(apply_substitution(a, rho) for a in t.args), t.label)


def compose_substitutions(rho: Substitution,
                          theta: Substitution) -> Dict[str, Term]:
    """Return ``rho;theta``, i.e. first ``rho`` then ``theta``.
    """
    composed = dict(theta)
    for name, t in rho.items():
        composed[name] = apply_substitution(t, theta)
    return composed


@functools.lru_cache(maxsize=65536)
def vars_of(t: Term) -> FrozenSet[str]:
    if isinstance(t, Var):
        return frozenset((t.name,))
    result = frozenset()
    for a in t.args:
        result |= vars_of(a)
    return result


def is_closed(t: Term) -> bool:
    return not vars_of(t)


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from subterms(a)


def positions(t: Term, path: Tuple[int, ...]=()) -> Iterator[
        Tuple[Tuple[int, ...], Term]]:
    """Yield ``(path, subterm)`` in pre-order; a path lists 0-based argument
    indices from the root.
    """
    yield path, t
    if isinstance(t, App):
        for i, a in enumerate(t.args):
            yield from positions(a, path + (i,))


def replace_at(t: Term, path: Sequence[int], new: Term) -> Term:
    if not path:
        return new
    i = path[0]
    args = list(t.args)
    args[i] = replace_at(args[i], path[1:], new)
    return App(t.op, tuple(args), t.label)


def match(pattern: Term, t: Term,
          binding: Optional[Dict[str, Term]]=None) -> Optional[Dict[str, Term]]:
    """First-order matching of an open ``pattern`` against ``t``. Repeated
    variables must bind equal subterms.

    Returns:
      dict or None: The extended binding, or None if there is no match.

    """
    binding = {} if binding is None else binding
    if isinstance(pattern, Var):
        bound = binding.get(pattern.name)
        if bound is None:
            binding = dict(binding)
            binding[pattern.name] = t
            return binding
        return binding if bound == t else None

    if not isinstance(t, App) or t.op != pattern.op \
            or t.label != pattern.label or len(t.args) != len(pattern.args):
        return None

    for p, a in zip(pattern.args, t.args):
        binding = match(p, a, binding)
        if binding is None:
            return None
    return binding


def term_size(t: Term) -> int:
    if isinstance(t, Var):
        return 1
    return 1 + sum(term_size(a) for a in t.args)

"""Algebraic laws, congruent rewriting with laws, and bounded law verification.

A law ``lhs -> rhs`` with grade ``strong`` claims ``lhs ~ rhs``; with grade
``expansion`` it claims ``lhs >~ rhs`` (``lhs`` does at least the internal
steps of ``rhs``). Rewriting always replaces an instance of ``lhs`` by the
matching instance of ``rhs``, at any position of a term.
"""
import itertools
import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

from coolcheck.equiv import FunctionalKind, approximate, gfp
from coolcheck.errors import BudgetError, CertificateError, CoolcheckError
from coolcheck.lts import explore
from coolcheck.spec import GsosLanguage
from coolcheck.terms import (App, Term, apply_substitution, match,
                             parse_term, positions, print_term, replace_at,
                             vars_of)


__all__ = [
    'GRADES',
    'DEFAULT_REWRITE_DEPTH',
    'DEFAULT_MAX_TERMS',
    'Law',
    'LawSet',
    'RewriteStep',
    'RewriteClosure',
    'rewrite_once',
    'rewrite_closure',
    'laws_from_json',
    'load_laws_file',
    'LawCheck',
    'sample_terms',
    'verify_law',
    ]


log = logging.getLogger(__name__)


DEFAULT_REWRITE_DEPTH = 6
DEFAULT_MAX_TERMS = 20000
DEFAULT_SAMPLE_SIZE = 2
DEFAULT_MAX_INSTANCES = 512

GRADES = {
    'strong': FunctionalKind.STRONG_BISIM,
    'expansion': FunctionalKind.BRANCHING_EXP,
    }

UNCHECKED = 'unchecked'


@dataclass(frozen=True)
class Law:
    name: str
    lhs: Term
    rhs: Term
    grade: str = 'strong'
    status: str = field(default=UNCHECKED, compare=False)

    def __post_init__(self):
        if self.grade not in GRADES:
            raise CertificateError(f'law {self.name}: unknown grade {self.grade!r}')
        if not vars_of(self.rhs) <= vars_of(self.lhs):
            raise CertificateError(
                f'law {self.name}: right-hand side has variables the '
                f'left-hand side does not bind')

    @property
    def verified(self) -> bool:
        return self.status.startswith('verified')

    def reversed(self) -> 'Law':
        return Law(f'{self.name}~rev', self.rhs, self.lhs, self.grade, self.status)

    def __str__(self):
        arrow = '~' if self.grade == 'strong' else '>~'
        return f'{self.name}: {print_term(self.lhs)} {arrow} {print_term(self.rhs)}'


class LawSet:
    """A named, ordered collection of oriented laws."""

    def __init__(self, name: str, laws: Iterable[Law]):
        self.name = name
        self.laws: Tuple[Law, ...] = tuple(laws)

    @property
    def grade(self) -> str:
        """``strong`` if every law is strong, ``expansion`` otherwise."""
        if all(law.grade == 'strong' for law in self.laws):
            return 'strong'
        return 'expansion'

    @property
    def verified(self) -> bool:
        return all(law.verified for law in self.laws)

    def law(self, name: str) -> Law:
        for law in self.laws:
            if law.name == name:
                return law
        raise KeyError(name)

    def with_status(self, statuses: Dict[str, str]) -> 'LawSet':
        return LawSet(self.name, [replace(law, status=statuses.get(law.name, law.status))
                                  for law in self.laws])

    def __iter__(self):
        return iter(self.laws)

    def __len__(self):
        return len(self.laws)

    def __repr__(self):
        return f'LawSet({self.name!r}, {len(self.laws)} laws)'


class RewriteStep(NamedTuple):
    law: str
    path: Tuple[int, ...]
    result: Term

    def to_json(self):
        return {'law': self.law, 'path': list(self.path),
                'term': print_term(self.result)}


def rewrite_once(t: Term, laws: Iterable[Law]) -> Iterator[RewriteStep]:
    """Every single rewrite of ``t`` by one law at one position, in pre-order
    of positions and law order.
    """
    laws = tuple(laws)
    for path, sub in positions(t):
        for law in laws:
            binding = match(law.lhs, sub)
            if binding is None:
                continue
            new = replace_at(t, path, apply_substitution(law.rhs, binding))
            if new != t:
                yield RewriteStep(law.name, path, new)


class RewriteClosure:
    """Terms reachable from ``origin`` by at most ``depth`` rewrites, each with
    a shortest rewrite chain.

    Levels are computed on demand: :meth:`grow` adds one level at a time and
    iteration grows the closure to its full depth first.
    """

    def __init__(self, origin: Term, laws: LawSet, depth: int,
                 max_terms: int=DEFAULT_MAX_TERMS):
        self.origin = origin
        self.laws = laws
        self.depth = depth
        self.max_terms = max_terms
        self._parent: Dict[Term, Optional[Tuple[Term, RewriteStep]]] = {origin: None}
        self.levels: List[List[Term]] = [[origin]]
        self.saturated = False
        self.capped = False

    @property
    def done(self) -> bool:
        return (self.saturated or self.capped
                or len(self.levels) > self.depth)

    def grow(self) -> List[Term]:
        """Compute the next level and return its new terms (empty when the
        closure is done).
        """
        if self.done:
            return []
        nxt = []
        for t in self.levels[-1]:
            for s in rewrite_once(t, self.laws):
                if s.result in self._parent:
                    continue
                if len(self._parent) >= self.max_terms:
                    self.capped = True
                    break
                self._parent[s.result] = (t, s)
                nxt.append(s.result)
            if self.capped:
                break
        if not nxt and not self.capped:
            self.saturated = True
        self.levels.append(nxt)
        if self.done:
            log.debug('rewrite closure of %s: %d terms (saturated=%s, capped=%s)',
                      print_term(self.origin), len(self._parent),
                      self.saturated, self.capped)
        return nxt

    def complete(self) -> 'RewriteClosure':
        while not self.done:
            self.grow()
        return self

    def __contains__(self, t: Term) -> bool:
        return t in self.complete()._parent

    def __iter__(self):
        return iter(list(self.complete()._parent))

    def __len__(self):
        return len(self.complete()._parent)

    def seen(self) -> List[Term]:
        """Terms computed so far, without growing."""
        return list(self._parent)

    def reached(self, t: Term) -> bool:
        return t in self._parent

    def chain(self, t: Term) -> List[RewriteStep]:
        """The rewrite steps leading from the origin to ``t``."""
        steps = []
        entry = self._parent[t]
        while entry is not None:
            prev, s = entry
            steps.append(s)
            entry = self._parent[prev]
        steps.reverse()
        return steps


def rewrite_closure(t: Term, laws: LawSet, depth: int,
                    max_terms: int=DEFAULT_MAX_TERMS) -> RewriteClosure:
    return RewriteClosure(t, laws, depth, max_terms)


def laws_from_json(data, lang: GsosLanguage, name: str='default') -> LawSet:
    """Build a law set from a list of ``{name, lhs, rhs, grade}`` objects.
    ``"both_ways": true`` also adds the reversed law.

    Raises:
      CertificateError: On malformed entries.

    """
    if not isinstance(data, list):
        raise CertificateError(f'law set {name!r} must be a list')
    laws = []
    for i, entry in enumerate(data):
        try:
            law_name = entry.get('name', f'{name}{i + 1}')
            law = Law(law_name,
                      parse_term(entry['lhs'], lang.signature),
                      parse_term(entry['rhs'], lang.signature),
                      entry.get('grade', 'strong'),
                      entry.get('status', UNCHECKED))
        except (KeyError, AttributeError) as e:
            raise CertificateError(f'law set {name!r}: entry {i} is malformed') from e
        except CoolcheckError as e:
            raise CertificateError(f'law set {name!r}: entry {i}: {e}') from e
        laws.append(law)
        if entry.get('both_ways'):
            laws.append(law.reversed())
    return LawSet(name, laws)


def load_laws_file(path, lang: GsosLanguage) -> Dict[str, LawSet]:
    """Read a ``.laws.json`` file: either one list of laws (named after the
    file) or an object mapping set names to lists.
    """
    try:
        with open(path, encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        raise CertificateError(f'cannot read laws file {path}: {e}') from e
    if isinstance(data, dict) and 'laws' in data and len(data) == 1:
        data = data['laws']
    if isinstance(data, list):
        stem = os.path.basename(str(path)).split('.')[0]
        return {stem: laws_from_json(data, lang, stem)}
    return {name: laws_from_json(entries, lang, name)
            for name, entries in data.items()}


@dataclass
class LawCheck:
    law: str
    status: str
    instances: int = 0
    failure: Optional[Dict[str, str]] = None

    @property
    def failed(self) -> bool:
        return self.status == 'failed'

    def to_json(self):
        return {'law': self.law, 'status': self.status,
                'instances': self.instances, 'failure': self.failure}


def verify_law(law: Law, lang: GsosLanguage, samples: Sequence[Term],
               max_states: int=2000, max_depth: Optional[int]=None,
               max_instances: int=DEFAULT_MAX_INSTANCES) -> LawCheck:
    """Check a law on closed instances built from ``samples``.

    Both sides of every instance are explored together. A frontier-free
    fragment is decided exactly by the greatest fixpoint of the law's grade;
    a fragment cut by ``max_depth`` is judged by the depth-many-rounds
    approximant. The result is ``verified``, ``verified-at-bound-K``,
    ``failed`` (with the failing instance) or ``unchecked`` when the state
    budget was hit or more than ``max_instances`` instances exist.
    """
    kind = GRADES[law.grade]
    names = sorted(vars_of(law.lhs))
    total = len(samples) ** len(names)
    combos = itertools.islice(itertools.product(samples, repeat=len(names)),
                              max_instances)

    exact = True
    count = 0
    for combo in combos:
        rho = dict(zip(names, combo))
        lhs = apply_substitution(law.lhs, rho)
        rhs = apply_substitution(law.rhs, rho)
        instance = {x: print_term(t) for x, t in rho.items()}
        try:
            fragment = explore(lang, [lhs, rhs], max_states, max_depth)
        except BudgetError:
            return LawCheck(law.name, UNCHECKED, count)
        if fragment.budget_exhausted:
            log.warning('law %s: state budget hit on instance %s', law.name,
                        instance)
            return LawCheck(law.name, UNCHECKED, count)

        pair = (fragment.index(lhs), fragment.index(rhs))
        if fragment.frontier:
            exact = False
            related = approximate(kind, fragment, max_depth or 0)
        else:
            related = gfp(kind, fragment)
        count += 1
        if pair not in related:
            return LawCheck(law.name, 'failed', count, instance)

    if total > max_instances:
        log.warning('law %s: checked %d of %d instances', law.name, count,
                    total)
        return LawCheck(law.name, UNCHECKED, count)
    status = 'verified' if exact else f'verified-at-bound-{max_depth}'
    return LawCheck(law.name, status, count)


def _splits(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    # ordered ways of writing total as parts positive summands
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _splits(total - first, parts - 1):
            yield (first,) + rest


def sample_terms(lang: GsosLanguage,
                 max_size: int=DEFAULT_SAMPLE_SIZE) -> List[Term]:
    """Every closed term of the signature with at most ``max_size``
    operator occurrences, smallest first and then in printed order.
    """
    by_size: Dict[int, List[Term]] = {}
    instances = list(lang.signature.instances())
    for size in range(1, max_size + 1):
        found = []
        for name, label, arity in instances:
            if arity == 0:
                if size == 1:
                    found.append(App(name, (), label))
                continue
            if size - 1 < arity:
                continue
            for split in _splits(size - 1, arity):
                for args in itertools.product(*(by_size[s] for s in split)):
                    found.append(App(name, args, label))
        by_size[size] = sorted(found, key=print_term)
    return [t for size in sorted(by_size) for t in by_size[size]]

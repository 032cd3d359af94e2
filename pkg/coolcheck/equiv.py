"""Relation functionals for the strong and weak bisimulation families, their
greatest fixpoints on finite LTSs, and the paired-saturation characterization
of branching simulation.

Every functional is given by a list of game clauses. A clause names the side
that challenges and the pattern of the answer; the pairs an answer requires are
always oriented ``(left, right)``. Bisimulation kinds add the clause of their
simulation played from the right, which is ``sim(R) & rev(sim(rev(R)))``.
"""
import enum
import itertools
import logging
from collections import deque
from typing import (Callable, Dict, FrozenSet, Hashable, Iterable, Iterator,
                    List, NamedTuple, Optional, Set, Tuple)

from coolcheck.errors import CoolcheckError, FrontierError
from coolcheck.lts import (Lts, embed_paired, paired_saturate, paren_step,
                           tau_closure)
from coolcheck.spec import GsosLanguage, rule_properties
from coolcheck.terms import App, Term, Var, apply_substitution, print_term


__all__ = [
    'FunctionalKind',
    'Relation',
    'Challenge',
    'Answer',
    'Round',
    'rounds',
    'holds',
    'step',
    'gfp',
    'greatest_post_fixpoint_below',
    'approximate',
    'partition',
    'is_equivalence',
    'is_preorder',
    'branching_sim_check_bprime',
    'PairedRule',
    'translate_rules_bprime',
    ]


log = logging.getLogger(__name__)


class FunctionalKind(enum.Enum):
    STRONG_SIM = 'strong_sim'
    STRONG_BISIM = 'strong_bisim'
    BRANCHING_SIM = 'branching_sim'
    BRANCHING_BISIM = 'branching_bisim'
    DELAY_SIM = 'delay_sim'
    DELAY_BISIM = 'delay_bisim'
    WEAK_SIM = 'weak_sim'
    WEAK_BISIM = 'weak_bisim'
    ETA_SIM = 'eta_sim'
    ETA_BISIM = 'eta_bisim'
    BRANCHING_EXP = 'branching_exp'
    ETA_EXP = 'eta_exp'
    DELAY_EXP = 'delay_exp'

    @classmethod
    def parse(cls, name: str) -> 'FunctionalKind':
        """Look up a kind by value or by one of its short names.

        Raises:
          ValueError: If the name is unknown.

        """
        key = name.strip().lower().replace('-', '_')
        try:
            return cls(key)
        except ValueError:
            pass
        try:
            return cls(_ALIASES[key])
        except KeyError:
            raise ValueError(f'unknown functional kind {name!r}') from None

    @property
    def is_bisim(self) -> bool:
        return self.value.endswith('_bisim')

    @property
    def is_expansion(self) -> bool:
        return self.value.endswith('_exp')

    @property
    def family(self) -> str:
        """``strong``, ``branching``, ``delay``, ``weak`` or ``eta``."""
        return self.value.split('_')[0]

    def __str__(self):
        return self.value


_ALIASES = {
    'strong': 'strong_bisim',
    'sim': 'strong_sim',
    'bisim': 'strong_bisim',
    'branching': 'branching_bisim',
    'br': 'branching_bisim',
    'brs': 'branching_sim',
    'delay': 'delay_bisim',
    'd': 'delay_bisim',
    'ds': 'delay_sim',
    'weak': 'weak_bisim',
    'w': 'weak_bisim',
    'ws': 'weak_sim',
    'eta': 'eta_bisim',
    'etas': 'eta_sim',
    'expansion': 'branching_exp',
    'emonogt': 'branching_exp',
    'etamonogt': 'eta_exp',
    'dmonogt': 'delay_exp',
    }


KIND_NAMES = tuple(sorted({k.value for k in FunctionalKind} | set(_ALIASES)))


class Relation:
    """An immutable set of pairs of states."""

    __slots__ = ('pairs',)

    def __init__(self, pairs: Iterable[Tuple[Hashable, Hashable]]=()):
        self.pairs: FrozenSet[Tuple[Hashable, Hashable]] = frozenset(
            (a, b) for a, b in pairs)

    @classmethod
    def identity(cls, states: Iterable[Hashable]) -> 'Relation':
        return cls((s, s) for s in states)

    @classmethod
    def full(cls, states: Iterable[Hashable]) -> 'Relation':
        states = list(states)
        return cls(itertools.product(states, states))

    def __contains__(self, pair) -> bool:
        return pair in self.pairs

    def __iter__(self):
        try:
            return iter(sorted(self.pairs))
        except TypeError:
            return iter(sorted(self.pairs, key=repr))

    def __len__(self):
        return len(self.pairs)

    def __eq__(self, other):
        return isinstance(other, Relation) and self.pairs == other.pairs

    def __hash__(self):
        return hash(self.pairs)

    def __le__(self, other: 'Relation') -> bool:
        return self.pairs <= other.pairs

    def __or__(self, other: 'Relation') -> 'Relation':
        return Relation(self.pairs | other.pairs)

    def __and__(self, other: 'Relation') -> 'Relation':
        return Relation(self.pairs & other.pairs)

    def __sub__(self, other: 'Relation') -> 'Relation':
        return Relation(self.pairs - other.pairs)

    def converse(self) -> 'Relation':
        return Relation((b, a) for a, b in self.pairs)

    def compose(self, other: 'Relation') -> 'Relation':
        """``self ; other``: pairs ``(a, c)`` with ``a self b other c``."""
        by_first: Dict[Hashable, List[Hashable]] = {}
        for b, c in other.pairs:
            by_first.setdefault(b, []).append(c)
        return Relation((a, c) for a, b in self.pairs
                        for c in by_first.get(b, ()))

    def field(self) -> FrozenSet[Hashable]:
        return frozenset(x for pair in self.pairs for x in pair)

    def image(self, a: Hashable) -> FrozenSet[Hashable]:
        return frozenset(b for x, b in self.pairs if x == a)

    def to_json(self, describe: Callable[[Hashable], str]=str) -> List[List[str]]:
        return sorted([describe(a), describe(b)] for a, b in self.pairs)

    def __repr__(self):
        return f'Relation({len(self.pairs)} pairs)'


# answer patterns
STRONG, STUTTER, BRANCHING, DELAY, WEAK, ETA = (
    'strong', 'stutter', 'branching', 'delay', 'weak', 'eta')

LEFT, RIGHT = 'left', 'right'


class _Clause(NamedTuple):
    side: str
    pattern: str
    strict: bool = False


_SIM_PATTERN = {
    'strong': STRONG,
    'branching': BRANCHING,
    'delay': DELAY,
    'weak': WEAK,
    'eta': ETA,
    }


def _clauses(kind: FunctionalKind) -> Tuple[_Clause, ...]:
    if kind.is_expansion:
        return (_Clause(LEFT, STUTTER), _Clause(RIGHT, _SIM_PATTERN[kind.family],
                                                strict=True))
    clause = _Clause(LEFT, _SIM_PATTERN[kind.family])
    if kind.is_bisim:
        return (clause, clause._replace(side=RIGHT))
    return (clause,)


class Challenge(NamedTuple):
    side: str
    source: Hashable
    label: str
    target: Hashable


class Answer(NamedTuple):
    path: Tuple[Hashable, ...]
    required: Tuple[Tuple[Hashable, Hashable], ...]


class Round(NamedTuple):
    """One challenge with every answer found for it."""
    challenge: Challenge
    answers: Tuple[Answer, ...]
    truncated: bool


def _step(system, x, label: str, strict: bool):
    if strict:
        succ = system.successors(x)
        if succ is None:
            return None
        return tuple(t for l, t in succ if l == label)
    return paren_step(system, x, label)


def _answers(system, clause: _Clause, c, label: str, c2, a):
    # yields (answers, truncated); required pairs oriented (challenger, answerer)
    found = []
    truncated = False
    pattern = clause.pattern

    if pattern in (STRONG, STUTTER):
        targets = _step(system, a, label, strict=pattern == STRONG)
        if targets is None:
            return (), True
        return tuple(Answer((t,), ((c2, t),)) for t in targets), False

    reach = tau_closure(system, a)
    truncated |= reach.truncated
    for a1 in reach.states:
        targets = _step(system, a1, label, clause.strict)
        if targets is None:
            truncated = True
            continue
        for a2 in targets:
            if pattern == BRANCHING:
                found.append(Answer((a1, a2), ((c, a1), (c2, a2))))
            elif pattern == DELAY:
                found.append(Answer((a1, a2), ((c2, a2),)))
            else:
                ends = tau_closure(system, a2)
                truncated |= ends.truncated
                for a3 in ends.states:
                    if pattern == WEAK:
                        found.append(Answer((a1, a2, a3), ((c2, a3),)))
                    else:
                        found.append(Answer((a1, a2, a3),
                                            ((c, a1), (c2, a3))))
    return tuple(found), truncated


def rounds(kind: FunctionalKind, system, p, q) -> Iterator[Round]:
    """Enumerate the challenges the game of ``kind`` poses to ``(p, q)`` with
    their candidate answers. Required pairs are oriented ``(left, right)``.

    Raises:
      FrontierError: If a challenger's transitions are unknown.

    """
    for clause in _clauses(kind):
        challenger, answerer = (p, q) if clause.side == LEFT else (q, p)
        succ = system.successors(challenger)
        if succ is None:
            raise FrontierError(challenger, 'challenger has unknown transitions')
        for label, target in succ:
            answers, truncated = _answers(system, clause, challenger, label,
                                          target, answerer)
            if clause.side == RIGHT:
                answers = tuple(
                    Answer(ans.path, tuple((b, a) for a, b in ans.required))
                    for ans in answers)
            yield Round(Challenge(clause.side, challenger, label, target),
                        answers, truncated)


def holds(kind: FunctionalKind, system, contains: Callable[[tuple], bool],
          p, q, optimistic: bool=False,
          used: Optional[Set[tuple]]=None) -> bool:
    """Decide ``(p, q) in kind(R)`` where ``contains`` decides membership in R.

    With ``optimistic`` set, unknown transitions count in favour of the pair
    (the k-step approximant reading); otherwise they raise FrontierError. The
    required pairs of the chosen answers are added to ``used``.
    """
    try:
        for rnd in rounds(kind, system, p, q):
            for ans in rnd.answers:
                if all(contains(pair) for pair in ans.required):
                    if used is not None:
                        used.update(ans.required)
                    break
            else:
                if rnd.truncated:
                    if optimistic:
                        continue
                    raise FrontierError(rnd.challenge.source,
                                        'answer search reaches the frontier')
                return False
    except FrontierError:
        if optimistic:
            return True
        raise
    return True


def _require_core(lts: Lts, pairs: Iterable[tuple]):
    core = lts.core_states()
    for a, b in pairs:
        for x in (a, b):
            if x not in core:
                raise FrontierError(lts.describe(x),
                                    'relation touches a state that reaches the frontier')


def step(kind: FunctionalKind, lts: Lts, R: Relation,
         pairs: Optional[Iterable[tuple]]=None) -> Relation:
    """The exact image ``kind(R)``, restricted to ``pairs`` (all pairs of
    states by default).

    Raises:
      FrontierError: If a tested pair can reach the frontier.

    """
    if pairs is None:
        pairs = itertools.product(range(len(lts)), repeat=2)
    pairs = list(pairs)
    _require_core(lts, pairs)
    return Relation(pair for pair in pairs
                    if holds(kind, lts, R.pairs.__contains__, *pair))


def _refine(kind: FunctionalKind, system, start: Iterable[tuple],
            optimistic: bool=False) -> Set[tuple]:
    # downward worklist: a pair is rechecked only when a pair its answers used
    # is removed
    R = set(start)
    dependents: Dict[tuple, Set[tuple]] = {}
    queue = deque(sorted(R))
    queued = set(R)
    checks = 0
    while queue:
        pair = queue.popleft()
        queued.discard(pair)
        if pair not in R:
            continue
        checks += 1
        used: Set[tuple] = set()
        if holds(kind, system, R.__contains__, *pair, optimistic=optimistic,
                 used=used):
            for u in used:
                dependents.setdefault(u, set()).add(pair)
            continue
        R.discard(pair)
        for d in dependents.pop(pair, ()):
            if d in R and d not in queued:
                queued.add(d)
                queue.append(d)
    log.debug('%s fixpoint: %d checks, %d pairs remain', kind, checks, len(R))
    return R


def greatest_post_fixpoint_below(kind: FunctionalKind, lts: Lts,
                                 R: Relation) -> Relation:
    """The largest ``S <= R`` with ``S <= kind(S)``."""
    _require_core(lts, R.pairs)
    return Relation(_refine(kind, lts, R.pairs))


def gfp(kind: FunctionalKind, lts: Lts, core_only: bool=False) -> Relation:
    """The greatest fixpoint of ``kind`` on ``lts``.

    Args:
      kind (FunctionalKind): The functional.
      lts (Lts): A finite LTS.
      core_only (bool): Restrict to states that cannot reach the frontier
          instead of failing on them. Defaults to False.

    Raises:
      FrontierError: If ``lts`` has a frontier and ``core_only`` is False.

    """
    if lts.frontier and not core_only:
        raise FrontierError(lts.describe(min(lts.frontier)),
                            'gfp needs a frontier-free LTS')
    states = sorted(lts.core_states())
    return Relation(_refine(kind, lts, itertools.product(states, states)))


def approximate(kind: FunctionalKind, lts: Lts, rounds: int) -> Relation:
    """The ``rounds``-th approximant ``kind^k(full)`` over all states, reading
    unknown transitions optimistically.
    """
    states = range(len(lts))
    R = set(itertools.product(states, states))
    for i in range(rounds):
        snapshot = frozenset(R)
        R = {pair for pair in snapshot
             if holds(kind, lts, snapshot.__contains__, *pair, optimistic=True)}
        if R == snapshot:
            log.debug('%s approximant stable after %d round(s)', kind, i)
            break
    return Relation(R)


def partition(R: Relation, states: Iterable[Hashable]) -> List[List[Hashable]]:
    """Equivalence classes of ``R`` over ``states``, each sorted, in order of
    their least element.
    """
    seen = set()
    classes = []
    for s in sorted(states):
        if s in seen:
            continue
        block = sorted({s} | {b for a, b in R.pairs if a == s})
        seen.update(block)
        classes.append(block)
    return classes


def is_preorder(R: Relation, states: Iterable[Hashable]) -> bool:
    return (Relation.identity(states) <= R
            and R.compose(R) <= R)


def is_equivalence(R: Relation, states: Iterable[Hashable]) -> bool:
    return is_preorder(R, states) and R.converse() == R


def branching_sim_check_bprime(lts: Lts, R: Relation) -> bool:
    """Decide ``R <= s_bb(R)``: every embedded step ``x -a-> (x, x'')`` of a
    pair ``(x, y)`` is answered by a bb-saturated ``y -a-> (y', y'')`` with
    ``(x, y')`` and ``(x'', y'')`` in R.
    """
    _require_core(lts, R.pairs)
    challenges = embed_paired(lts)
    answers = paired_saturate(lts, 'bb')
    for x, y in R.pairs:
        for label in sorted(lts.labels):
            for x1, x2 in challenges.targets(x, label):
                if not any((x1, y1) in R and (x2, y2) in R
                           for y1, y2 in answers.targets(y, label)):
                    return False
    return True


class PairedRule(NamedTuple):
    name: str
    premises: Tuple[Tuple[str, str, str, str], ...]
    source: App
    label: str
    target: Tuple[Term, Term]

    def __str__(self):
        premises = ', '.join(f'{x} -{b}-> ({m}, {y})'
                             for x, b, m, y in self.premises)
        first, second = self.target
        return (f'{self.name}: {premises}{" " if premises else ""}|- '
                f'{print_term(self.source)} -{self.label}-> '
                f'({print_term(first)}, {print_term(second)})')


def translate_rules_bprime(lang: GsosLanguage) -> List[PairedRule]:
    """Translate every rule into a rule for paired transition systems.

    A premise ``x -b-> y`` becomes ``x -b-> (x_mid, y)``, and the conclusion
    target ``t`` becomes ``(s, t)`` where ``s`` is the source with every active
    ``x`` replaced by ``x_mid``. The middle component is built from the
    source, not from ``t``: for ``pre[b]`` the target is ``(pre[b](x1), x1)``.

    Raises:
      CoolcheckError: If some rule is not straight.

    """
    crooked = [r.name for r in lang.rules if not rule_properties(r).straight]
    if crooked:
        raise CoolcheckError(
            f'paired translation needs straight rules; not straight: '
            f'{", ".join(crooked)}')

    translated = []
    for r in lang.rules:
        rho = {p.source: Var(f'{p.source}_mid') for p in r.premises}
        premises = tuple((p.source, p.label, f'{p.source}_mid', p.target)
                         for p in r.premises)
        translated.append(PairedRule(
            r.name, premises, r.source, r.label,
            (apply_substitution(r.source, rho), r.target)))
    return translated

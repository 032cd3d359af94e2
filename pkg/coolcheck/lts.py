"""Labelled transition systems: bounded canonical models, weak closures,
saturations and lax-model checks.

Two kinds of transition systems share the ``successors`` protocol used by the
closure helpers:

* :class:`Lts` - a finished, explored system over indexed states. States whose
  outgoing transitions were not computed are in its frontier.
* :class:`TermArena` - the canonical model of a language queried lazily, one
  term at a time, with a budget on the number of terms visited.

``successors(x)`` returns a tuple of ``(label, target)`` pairs, or None when the
transitions of ``x`` are unknown.
"""
import itertools
import logging
import re
from collections import deque
from dataclasses import dataclass, field
from typing import (Dict, FrozenSet, Hashable, Iterable, List, NamedTuple,
                    Optional, Sequence, Set, Tuple)

from coolcheck.errors import (BudgetError, CoolcheckError, FrontierError,
                              LaxModelError)
from coolcheck.spec import GsosLanguage, Rule
from coolcheck.terms import (TAU, App, Term, apply_substitution, is_closed,
                             parse_term, print_term)


__all__ = [
    'DEFAULT_MAX_STATES',
    'DEFAULT_MAX_DEPTH',
    'Semantics',
    'Lts',
    'PairedLts',
    'TermArena',
    'Closure',
    'LaxModelReport',
    'LAX_MODES',
    'Derivation',
    'explore',
    'tau_closure',
    'paren_step',
    'weak_reach',
    'weak_step',
    'saturate',
    'paired_saturate',
    'embed_paired',
    'check_lax_model',
    ]


log = logging.getLogger(__name__)


DEFAULT_MAX_STATES = 10000
DEFAULT_MAX_DEPTH = None


class Derivation(NamedTuple):
    label: str
    target: Term
    rule: Rule
    substitution: Tuple[Tuple[str, Term], ...]


class Semantics:
    """One-step transitions of closed terms, derived from the rules of a
    language and memoized per term.
    """

    def __init__(self, lang: GsosLanguage):
        self.lang = lang
        self._derivations: Dict[Term, Tuple[Derivation, ...]] = {}
        self._transitions: Dict[Term, Tuple[Tuple[str, Term], ...]] = {}

    def derivations(self, term: Term) -> Tuple[Derivation, ...]:
        """Every rule instance deriving a transition of ``term``.

        Premises are matched against the transitions of the corresponding
        argument only, so recursion always descends into smaller terms.
        """
        cached = self._derivations.get(term)
        if cached is not None:
            return cached

        if not isinstance(term, App):
            raise CoolcheckError(f'cannot derive transitions of variable {term}')

        found = []
        for r in self.lang.rules_for(term.key):
            rho = dict(zip(r.sources, term.args))
            choices = []
            for p in r.premises:
                arg = rho[p.source]
                choices.append([t for (l, t) in self.transitions(arg)
                                if l == p.label])
            for picked in itertools.product(*choices):
                assignment = dict(rho)
                for p, t in zip(r.premises, picked):
                    assignment[p.target] = t
                target = apply_substitution(r.target, assignment)
                found.append(Derivation(r.label, target, r,
                                        tuple(sorted(assignment.items()))))

        result = tuple(found)
        self._derivations[term] = result
        return result

    def transitions(self, term: Term) -> Tuple[Tuple[str, Term], ...]:
        cached = self._transitions.get(term)
        if cached is not None:
            return cached
        pairs = {(d.label, d.target) for d in self.derivations(term)}
        result = tuple(sorted(pairs, key=lambda lt: (lt[0], print_term(lt[1]))))
        self._transitions[term] = result
        return result


def _describe(state) -> str:
    if isinstance(state, (App,)):
        return print_term(state)
    return str(state)


class Lts:
    """A finite explored LTS over indexed states.

    States are closed terms for canonical-model fragments and arbitrary
    hashable ids for hand-built systems. Every state in ``frontier`` has no
    recorded outgoing transitions. ``truncated`` marks a system derived from
    one with a frontier, whose transitions may be incomplete.
    """

    def __init__(self, states: Sequence[Hashable], labels: Iterable[str],
                 transitions: Iterable[Tuple[int, str, int]],
                 frontier: Iterable[int]=(), budget_exhausted: bool=False,
                 truncated: bool=False):
        self.states = list(states)
        self.labels = frozenset(labels) | {TAU}
        self.frontier: FrozenSet[int] = frozenset(frontier)
        self.budget_exhausted = budget_exhausted
        self.truncated = truncated
        self._index = {s: i for i, s in enumerate(self.states)}

        succ: Dict[int, Dict[str, Set[int]]] = {}
        count = 0
        for (s, l, t) in transitions:
            if not (0 <= s < len(self.states) and 0 <= t < len(self.states)):
                raise ValueError(f'transition ({s}, {l}, {t}) has invalid endpoints')
            if s in self.frontier:
                raise ValueError(f'frontier state {s} has outgoing transitions')
            bucket = succ.setdefault(s, {}).setdefault(l, set())
            if t not in bucket:
                bucket.add(t)
                count += 1
            self.labels |= {l}
        self._succ = {s: {l: tuple(sorted(ts)) for l, ts in by_label.items()}
                      for s, by_label in succ.items()}
        self.transition_count = count
        self._closures: Dict[int, 'Closure'] = {}
        self._core: Optional[FrozenSet[int]] = None

    def __len__(self):
        return len(self.states)

    @property
    def has_terms(self) -> bool:
        return all(isinstance(s, App) for s in self.states)

    def index(self, state: Hashable) -> int:
        return self._index[state]

    def find(self, state: Hashable) -> Optional[int]:
        return self._index.get(state)

    def describe(self, i: int) -> str:
        return _describe(self.states[i])

    def successors(self, i: int) -> Optional[Tuple[Tuple[str, int], ...]]:
        if i in self.frontier:
            return None
        return tuple((l, t) for l in sorted(self._succ.get(i, {}))
                     for t in self._succ[i][l])

    def targets(self, i: int, label: str) -> Tuple[int, ...]:
        return self._succ.get(i, {}).get(label, ())

    def transitions(self) -> List[Tuple[int, str, int]]:
        return [(s, l, t) for s in sorted(self._succ)
                for l in sorted(self._succ[s]) for t in self._succ[s][l]]

    def core_states(self) -> FrozenSet[int]:
        """States from which no frontier state is reachable."""
        if self._core is None:
            preds: Dict[int, Set[int]] = {}
            for s, _, t in self.transitions():
                preds.setdefault(t, set()).add(s)
            tainted = set(self.frontier)
            queue = deque(self.frontier)
            while queue:
                t = queue.popleft()
                for s in preds.get(t, ()):
                    if s not in tainted:
                        tainted.add(s)
                        queue.append(s)
            self._core = frozenset(range(len(self.states))) - tainted
        return self._core

    def disjoint_union(self, other: 'Lts') -> Tuple['Lts', int]:
        """Place ``other`` next to this system; returns the union and the
        offset added to ``other``'s state indices.
        """
        offset = len(self.states)
        states = [('L', s) for s in self.states] + [('R', s) for s in other.states]
        transitions = self.transitions() + [
            (s + offset, l, t + offset) for s, l, t in other.transitions()]
        frontier = set(self.frontier) | {s + offset for s in other.frontier}
        return Lts(states, self.labels | other.labels, transitions, frontier), offset

    def to_aldebaran(self, initial: int=0) -> str:
        transitions = self.transitions()
        lines = [f'des ({initial}, {len(transitions)}, {len(self.states)})']
        lines.extend(f'({s}, "{l}", {t})' for s, l, t in transitions)
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_aldebaran(cls, text: str) -> 'Lts':
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        header = re.match(r'des\s*\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)$',
                          lines[0]) if lines else None
        if header is None:
            raise CoolcheckError('missing or malformed "des" header')
        nstates = int(header.group(3))
        transitions = []
        for line in lines[1:]:
            m = re.match(r'\(\s*(\d+)\s*,\s*"([^"]*)"\s*,\s*(\d+)\s*\)$', line)
            if m is None:
                m = re.match(r'\(\s*(\d+)\s*,\s*([^,\s]+)\s*,\s*(\d+)\s*\)$', line)
            if m is None:
                raise CoolcheckError(f'malformed transition line {line!r}')
            l = 'tau' if m.group(2) in ('i', 'tau') else m.group(2)
            transitions.append((int(m.group(1)), l, int(m.group(3))))
        labels = {l for _, l, _ in transitions}
        return cls([str(i) for i in range(nstates)], labels, transitions)

    def to_json(self) -> dict:
        return {
            'states': [self.describe(i) for i in range(len(self.states))],
            'labels': sorted(self.labels),
            'transitions': [[s, l, t] for s, l, t in self.transitions()],
            'frontier': sorted(self.frontier),
            'budget_exhausted': self.budget_exhausted,
            }

    @classmethod
    def from_json(cls, data: dict, lang: Optional[GsosLanguage]=None) -> 'Lts':
        states = data['states']
        if lang is not None:
            states = [parse_term(s, lang.signature, allow_variables=False)
                      for s in states]
        return cls(states, data.get('labels', ()),
                   [tuple(t) for t in data['transitions']],
                   data.get('frontier', ()), data.get('budget_exhausted', False))

    def __repr__(self):
        return (f'Lts({len(self.states)} states, {self.transition_count} '
                f'transitions, {len(self.frontier)} frontier)')


class TermArena:
    """The canonical model of a language, explored lazily from whatever terms
    are asked about. Once ``max_states`` distinct terms have been expanded,
    further terms are reported as unknown.
    """

    def __init__(self, lang: GsosLanguage, max_states: int=DEFAULT_MAX_STATES):
        if max_states < 1:
            raise BudgetError('max_states must be positive')
        self.lang = lang
        self.semantics = Semantics(lang)
        self.max_states = max_states
        self._expanded: Set[Term] = set()
        self._closures: Dict[Term, 'Closure'] = {}

    def successors(self, term: Term) -> Optional[Tuple[Tuple[str, Term], ...]]:
        if term not in self._expanded:
            if len(self._expanded) >= self.max_states:
                return None
            self._expanded.add(term)
        return self.semantics.transitions(term)

    def describe(self, term: Term) -> str:
        return print_term(term)


class Closure(NamedTuple):
    states: Tuple[Hashable, ...]
    truncated: bool


def tau_closure(system, x) -> Closure:
    """All states reachable from ``x`` by tau-steps (including ``x``), in
    breadth-first order. ``truncated`` is set when some reached state has
    unknown transitions.
    """
    cache = getattr(system, '_closures', None)
    if cache is not None and x in cache:
        return cache[x]

    seen = {x}
    order = [x]
    queue = deque([x])
    truncated = False
    while queue:
        s = queue.popleft()
        succ = system.successors(s)
        if succ is None:
            truncated = True
            continue
        for l, t in succ:
            if l == TAU and t not in seen:
                seen.add(t)
                order.append(t)
                queue.append(t)

    result = Closure(tuple(order), truncated)
    if cache is not None:
        cache[x] = result
    return result


def paren_step(system, x, label: str) -> Optional[Tuple[Hashable, ...]]:
    """Targets of ``x -(label)->``: the label-successors, plus ``x`` itself for
    tau. None if the transitions of ``x`` are unknown.
    """
    succ = system.successors(x)
    if succ is None:
        return None
    targets = [t for l, t in succ if l == label]
    if label == TAU and x not in targets:
        targets.insert(0, x)
    return tuple(targets)


def _weak(system, x, label: str, trailing: bool) -> Closure:
    found = []
    seen = set()
    truncated = False
    reach = tau_closure(system, x)
    truncated |= reach.truncated
    for mid in reach.states:
        step = paren_step(system, mid, label)
        if step is None:
            truncated = True
            continue
        for t in step:
            ends = tau_closure(system, t) if trailing else Closure((t,), False)
            truncated |= ends.truncated
            for e in ends.states:
                if e not in seen:
                    seen.add(e)
                    found.append(e)
    return Closure(tuple(found), truncated)


def weak_reach(lts, x) -> FrozenSet:
    """The tau-closure of ``x``.

    Raises:
      FrontierError: If the closure runs into a state with unknown
          transitions.

    """
    c = tau_closure(lts, x)
    if c.truncated:
        raise FrontierError(x, 'tau-closure reaches the frontier')
    return frozenset(c.states)


def weak_step(lts, x, label: str) -> FrozenSet:
    """States ``x'`` with ``x => -(label)-> => x'``.

    Raises:
      FrontierError: If the search runs into a state with unknown
          transitions.

    """
    c = _weak(lts, x, label, trailing=True)
    if c.truncated:
        raise FrontierError(x, 'weak step reaches the frontier')
    return frozenset(c.states)


def saturate(lts: Lts, kind: str) -> Lts:
    """The wb- or db-saturation of ``lts``.

    wb: ``x -a-> x'`` iff ``x => -(a)-> => x'``; db drops the trailing ``=>``.
    The result has the same states and frontier; ``truncated`` is set when the
    input has a frontier.
    """
    if kind not in ('wb', 'db'):
        raise ValueError(f'unknown saturation kind {kind!r}')
    trailing = kind == 'wb'
    transitions = []
    for s in range(len(lts.states)):
        if s in lts.frontier:
            continue
        for label in sorted(lts.labels):
            c = _weak(lts, s, label, trailing)
            transitions.extend((s, label, t) for t in c.states)
    return Lts(lts.states, lts.labels, transitions, lts.frontier,
               lts.budget_exhausted, truncated=bool(lts.frontier))


class PairedLts:
    """A transition system whose transitions lead to pairs of states,
    ``x -a-> (x', x'')``.
    """

    def __init__(self, base: Lts,
                 transitions: Iterable[Tuple[int, str, Tuple[int, int]]]):
        self.base = base
        self.states = base.states
        self.labels = base.labels
        self.frontier = base.frontier
        self.truncated = bool(base.frontier)
        succ: Dict[int, Dict[str, Set[Tuple[int, int]]]] = {}
        for s, l, (m, t) in transitions:
            succ.setdefault(s, {}).setdefault(l, set()).add((m, t))
        self._succ = succ

    def targets(self, i: int, label: str) -> FrozenSet[Tuple[int, int]]:
        return frozenset(self._succ.get(i, {}).get(label, ()))

    def transitions(self) -> List[Tuple[int, str, Tuple[int, int]]]:
        return [(s, l, mt) for s in sorted(self._succ)
                for l in sorted(self._succ[s]) for mt in sorted(self._succ[s][l])]


def paired_saturate(lts: Lts, kind: str) -> PairedLts:
    """The bb- or hb-saturation: ``x -a-> (x', x'')`` iff ``x => x' -(a)-> x''``
    (bb), with a trailing ``=>`` after ``x''`` for hb.
    """
    if kind not in ('bb', 'hb'):
        raise ValueError(f'unknown paired saturation kind {kind!r}')
    transitions = []
    for s in range(len(lts.states)):
        if s in lts.frontier:
            continue
        for mid in tau_closure(lts, s).states:
            for label in sorted(lts.labels):
                step = paren_step(lts, mid, label)
                if step is None:
                    continue
                for t in step:
                    ends = tau_closure(lts, t).states if kind == 'hb' else (t,)
                    transitions.extend((s, label, (mid, e)) for e in ends)
    return PairedLts(lts, transitions)


def embed_paired(lts: Lts) -> PairedLts:
    """View an LTS as a paired system: ``x -a-> (x, x'')`` iff ``x -a-> x''``.
    """
    return PairedLts(lts, [(s, l, (s, t)) for s, l, t in lts.transitions()])


def explore(lang: GsosLanguage, roots: Sequence[Term],
            max_states: Optional[int]=DEFAULT_MAX_STATES,
            max_depth: Optional[int]=DEFAULT_MAX_DEPTH) -> Lts:
    """Breadth-first fragment of the canonical model of ``lang``.

    States are numbered in discovery order; the successors of one state are
    discovered in print order of their terms. A state is expanded only if it
    lies within ``max_depth`` of a root and all its new successors fit into
    ``max_states``; otherwise it is left in the frontier.

    Raises:
      BudgetError: If ``max_states`` is not positive.
      CoolcheckError: If a root is not a closed term.

    """
    if max_states is not None and max_states < 1:
        raise BudgetError('max_states must be positive')
    if max_depth is not None and max_depth < 0:
        raise BudgetError('max_depth must not be negative')
    for root in roots:
        if not is_closed(root):
            raise CoolcheckError(f'root {print_term(root)} is not closed')

    semantics = Semantics(lang)
    states: List[Term] = []
    index: Dict[Term, int] = {}
    depth: Dict[int, int] = {}
    for root in roots:
        if root not in index:
            index[root] = len(states)
            depth[index[root]] = 0
            states.append(root)

    transitions = []
    frontier = set()
    budget_exhausted = False
    queue = deque(range(len(states)))
    while queue:
        s = queue.popleft()
        if max_depth is not None and depth[s] >= max_depth:
            frontier.add(s)
            continue
        succ = semantics.transitions(states[s])
        new = sorted({t for _, t in succ if t not in index}, key=print_term)
        if max_states is not None and len(states) + len(new) > max_states:
            budget_exhausted = True
            frontier.add(s)
            continue
        for t in new:
            index[t] = len(states)
            depth[index[t]] = depth[s] + 1
            states.append(t)
            queue.append(index[t])
        transitions.extend((s, l, index[t]) for l, t in succ)

    if frontier:
        log.warning('exploration stopped with %d frontier state(s)', len(frontier))
    log.debug('explored %d states, %d transitions', len(states), len(transitions))
    return Lts(states, lang.signature.labels, transitions, frontier,
               budget_exhausted)


@dataclass
class LaxModelReport:
    mode: str
    violations: List[dict] = field(default_factory=list)
    checked_assignments: int = 0
    truncated: bool = False

    @property
    def vacuous(self) -> bool:
        return self.checked_assignments == 0

    @property
    def ok(self) -> bool:
        # vacuous fragments pass, but are flagged
        return not self.violations and not self.truncated

    def to_json(self):
        return {'mode': self.mode, 'ok': self.ok, 'vacuous': self.vacuous,
                'truncated': self.truncated,
                'checked_assignments': self.checked_assignments,
                'violations': list(self.violations)}


LAX_MODES = ('wb', 'bb', 'hb', 'db')


def _assignment(rho) -> Dict[str, str]:
    return {x: print_term(t) for x, t in sorted(rho.items())}


def check_lax_model(lang: GsosLanguage, base: Lts, mode: str,
                    max_states: int=DEFAULT_MAX_STATES) -> LaxModelReport:
    """Check that the weak transitions of the canonical model satisfy the
    rules of ``lang`` in the weak reading selected by ``mode``.

    Assignments range over the explored states of ``base``: every state
    ``op(P1, ..., Pn)`` fixes the source variables of the rules for ``op``;
    premise targets (and, for bb/hb, the intermediate assignment) range over
    the weak successors allowed by the mode. Weak closures are computed on the
    canonical model with a budget of ``max_states`` terms per check; a check
    that hits the budget marks the report truncated instead of failing.

    Raises:
      LaxModelError: If ``base`` has states that are not terms.

    """
    if mode not in LAX_MODES:
        raise ValueError(f'unknown lax-model mode {mode!r}')
    if not base.has_terms:
        raise LaxModelError('lax-model checks need an LTS over closed terms')

    arena = TermArena(lang, max_states)
    report = LaxModelReport(mode)

    def violation(r, rho, missing):
        report.violations.append({'rule': r.name, 'assignment': _assignment(rho),
                                  'missing': missing})

    for state in base.states:
        for r in lang.rules_for(state.key):
            eta = dict(zip(r.sources, state.args))
            if mode in ('wb', 'db'):
                _check_plain(arena, r, eta, mode, report, violation)
            else:
                _check_intermediate(arena, r, eta, mode, report, violation)

    if report.truncated:
        log.warning('lax-model check (%s) truncated by budget', mode)
    return report


def _check_plain(arena, r, eta, mode, report, violation):
    trailing = mode == 'wb'
    choices = []
    for p in r.premises:
        c = _weak(arena, eta[p.source], p.label, trailing)
        report.truncated |= c.truncated
        choices.append(c.states)

    source = apply_substitution(r.source, eta)
    for picked in itertools.product(*choices):
        rho = dict(eta)
        for p, t in zip(r.premises, picked):
            rho[p.target] = t
        report.checked_assignments += 1
        target = apply_substitution(r.target, rho)
        answers = _weak(arena, source, r.label, trailing)
        if target in answers.states:
            continue
        if answers.truncated:
            report.truncated = True
            continue
        arrow = '=> -({})-> =>' if trailing else '=> -({})->'
        violation(r, rho, f'{print_term(source)} {arrow.format(r.label)} '
                          f'{print_term(target)}')


def _check_intermediate(arena, r, eta, mode, report, violation):
    # theta moves each active argument along => -(beta)->; eta(y) follows
    # theta(y) by a further => in mode hb
    trailing = mode == 'hb'
    per_premise = []
    for p in r.premises:
        options = []
        reach = tau_closure(arena, eta[p.source])
        report.truncated |= reach.truncated
        for mid in reach.states:
            step = paren_step(arena, mid, p.label)
            if step is None:
                report.truncated = True
                continue
            for t in step:
                ends = tau_closure(arena, t) if trailing else Closure((t,), False)
                report.truncated |= ends.truncated
                options.extend((mid, t, e) for e in ends.states)
        per_premise.append(options)

    source_eta = apply_substitution(r.source, eta)
    for picked in itertools.product(*per_premise):
        theta = dict(eta)
        eta_full = dict(eta)
        for p, (mid, t, e) in zip(r.premises, picked):
            theta[p.source] = mid
            theta[p.target] = t
            eta_full[p.target] = e
        report.checked_assignments += 1

        source_theta = apply_substitution(r.source, theta)
        reach = tau_closure(arena, source_eta)
        if source_theta not in reach.states:
            if reach.truncated:
                report.truncated = True
            else:
                violation(r, theta, f'{print_term(source_eta)} => '
                                    f'{print_term(source_theta)}')
            continue

        target_theta = apply_substitution(r.target, theta)
        step = paren_step(arena, source_theta, r.label)
        if step is None:
            report.truncated = True
            continue
        if target_theta not in step:
            violation(r, theta, f'{print_term(source_theta)} -({r.label})-> '
                                f'{print_term(target_theta)}')
            continue

        if trailing:
            target_eta = apply_substitution(r.target, eta_full)
            ends = tau_closure(arena, target_theta)
            if target_eta not in ends.states:
                if ends.truncated:
                    report.truncated = True
                else:
                    violation(r, eta_full, f'{print_term(target_theta)} => '
                                           f'{print_term(target_eta)}')

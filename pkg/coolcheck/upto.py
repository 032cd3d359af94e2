"""Up-to techniques: expressions, membership in ``f(R)`` with derivations,
the "simulation up to f" game, per-instance respectfulness tests and soundness
advice.

A technique is evaluated against a fixed relation ``R`` inside an
:class:`UpToContext`, which owns the transition system the game is played on
(an explored :class:`~coolcheck.lts.Lts` or the lazily explored canonical
model of a language), the named constant relations and law sets, and the
semantic relations used by semantic sandwiches.

Technique syntax::

    expr := expr '|' expr            union
          | expr ';' expr            composition (left to right)
          | 'id' | 'ctx' | 'const:' NAME
          | 'sand(' LAWS ',' expr ',' LAWS ')'
          | 'sem(' KIND ',' expr ',' KIND ')'
          | '(' expr ')'
"""
import enum
import itertools
import json
import logging
import os
import random
from dataclasses import dataclass, field
from typing import (Any, Callable, Dict, Hashable, Iterable, List, Mapping,
                    NamedTuple, Optional, Tuple)

from lark import Lark, Transformer
from lark.exceptions import LarkError

from coolcheck import flags
from coolcheck.equiv import (FunctionalKind, Relation, gfp,
                             greatest_post_fixpoint_below, holds, rounds)
from coolcheck.errors import (CertificateError, CoolcheckError, FrontierError,
                              TechniqueError)
from coolcheck.laws import (DEFAULT_MAX_TERMS, DEFAULT_REWRITE_DEPTH, LawSet,
                            RewriteClosure, laws_from_json, load_laws_file,
                            rewrite_once)
from coolcheck.lts import DEFAULT_MAX_STATES, Lts, TermArena, explore
from coolcheck.spec import (FormatReport, GsosLanguage, classify_format,
                            load_language_file)
from coolcheck.terms import App, parse_term, print_term


__all__ = [
    'Technique',
    'Id',
    'Const',
    'Union',
    'Compose',
    'Ctx',
    'SandwichSem',
    'SandwichLaws',
    'parse_technique',
    'Derivation',
    'MemberResult',
    'UpToContext',
    'Evaluator',
    'member',
    'images',
    'enumerate_image',
    'Verdict',
    'CheckReport',
    'check_up_to',
    'replay_report',
    'RespectfulnessResult',
    'test_respectful_instance',
    'PropertyCheck',
    'companion_property_tests',
    'Soundness',
    'Advice',
    'soundness_advice',
    'Certificate',
    'load_certificate',
    'run_certificate',
    ]


log = logging.getLogger(__name__)


class Technique:
    """Base class of technique expressions."""

    def atoms(self) -> Iterable['Technique']:
        yield self


@dataclass(frozen=True)
class Id(Technique):
    def __str__(self):
        return 'id'


@dataclass(frozen=True)
class Const(Technique):
    name: str

    def __str__(self):
        return f'const:{self.name}'


@dataclass(frozen=True)
class Union(Technique):
    parts: Tuple[Technique, ...]

    def atoms(self):
        for p in self.parts:
            yield from p.atoms()

    def __str__(self):
        return ' | '.join(str(p) for p in self.parts)


@dataclass(frozen=True)
class Compose(Technique):
    parts: Tuple[Technique, ...]

    def atoms(self):
        for p in self.parts:
            yield from p.atoms()

    def __str__(self):
        return ' ; '.join(f'({p})' if isinstance(p, Union) else str(p)
                          for p in self.parts)


@dataclass(frozen=True)
class Ctx(Technique):
    def __str__(self):
        return 'ctx'


SANDWICH_KINDS = frozenset((
    FunctionalKind.STRONG_BISIM,
    FunctionalKind.BRANCHING_EXP,
    FunctionalKind.ETA_EXP,
    FunctionalKind.DELAY_EXP,
    FunctionalKind.BRANCHING_BISIM,
    ))


@dataclass(frozen=True)
class SandwichSem(Technique):
    """``L ; inner ; rev(K)`` for the greatest fixpoints of ``left`` and
    ``right``.
    """
    left: FunctionalKind
    inner: Technique
    right: FunctionalKind

    def __post_init__(self):
        for kind in (self.left, self.right):
            if kind not in SANDWICH_KINDS:
                raise TechniqueError(f'{kind} cannot be used in a sandwich')

    def atoms(self):
        yield self
        yield from self.inner.atoms()

    def __str__(self):
        return f'sem({self.left}, {self.inner}, {self.right})'


@dataclass(frozen=True)
class SandwichLaws(Technique):
    """Relates ``P`` and ``Q`` if both rewrite, within ``depth`` law
    applications, to terms related by ``inner``.
    """
    left: str
    inner: Technique
    right: str
    depth: int = DEFAULT_REWRITE_DEPTH

    def atoms(self):
        yield self
        yield from self.inner.atoms()

    def __str__(self):
        return f'sand({self.left}, {self.inner}, {self.right})'


TECHNIQUE_GRAMMAR = r"""
?start: union
?union: compose ("|" compose)*
?compose: atom (";" atom)*
?atom: "id"                                   -> ident
     | "ctx"                                  -> ctx
     | "const" ":" NAME                       -> const
     | "sand" "(" NAME "," union "," NAME ")" -> sand
     | "sem" "(" NAME "," union "," NAME ")"  -> sem
     | "(" union ")"

NAME: /[A-Za-z_][\w\-]*/

%import common.WS
%ignore WS
"""

_technique_parser = Lark(TECHNIQUE_GRAMMAR, parser='lalr')


class _BuildTechnique(Transformer):

    def __init__(self, rewrite_depth):
        super().__init__()
        self.rewrite_depth = rewrite_depth

    def union(self, children):
        return Union(tuple(children))

    def compose(self, children):
        return Compose(tuple(children))

    def ident(self, _):
        return Id()

    def ctx(self, _):
        return Ctx()

    def const(self, children):
        return Const(str(children[0]))

    def sand(self, children):
        left, inner, right = children
        return SandwichLaws(str(left), inner, str(right), self.rewrite_depth)

    def sem(self, children):
        left, inner, right = children
        try:
            return SandwichSem(FunctionalKind.parse(str(left)), inner,
                               FunctionalKind.parse(str(right)))
        except ValueError as e:
            raise TechniqueError(str(e)) from None


def parse_technique(text: str,
                    rewrite_depth: int=DEFAULT_REWRITE_DEPTH) -> Technique:
    """Parse a technique expression; ``;`` binds tighter than ``|``.

    Raises:
      TechniqueError: On malformed expressions or unusable sandwich kinds.

    """
    try:
        tree = _technique_parser.parse(text)
        result = _BuildTechnique(rewrite_depth).transform(tree)
    except TechniqueError:
        raise
    except LarkError as e:
        # errors raised inside the transformer arrive wrapped
        orig = getattr(e, 'orig_exc', None)
        if isinstance(orig, TechniqueError):
            raise orig from None
        raise TechniqueError(f'malformed technique {text!r}') from None
    return result


@dataclass
class Derivation:
    """Evidence that a pair belongs to ``f(R)``."""
    rule: str
    pair: Tuple[Hashable, Hashable]
    children: Tuple['Derivation', ...] = ()
    detail: Dict[str, Any] = field(default_factory=dict)

    def to_json(self, describe: Callable[[Hashable], str]) -> dict:
        data = {'rule': self.rule,
                'pair': [describe(self.pair[0]), describe(self.pair[1])]}
        for key, value in self.detail.items():
            if key == 'via':
                value = [describe(v) for v in value]
            elif key in ('left', 'right') and isinstance(value, list):
                value = [s.to_json() for s in value]
            data[key] = value
        if self.children:
            data['children'] = [c.to_json(describe) for c in self.children]
        return data


class MemberResult(NamedTuple):
    derivation: Optional[Derivation]
    complete: bool


class Images(NamedTuple):
    targets: Dict[Hashable, Derivation]
    complete: bool


class UpToContext:
    """Everything a technique needs besides ``R``.

    For a language, the game is played on the canonical model explored on
    demand, and the finite universe used by semantic sandwiches is explored
    from the terms related so far. For a plain LTS both roles fall to the LTS
    itself and states are its indices.
    """

    def __init__(self, system, lang: Optional[GsosLanguage]=None,
                 universe: Optional[Lts]=None,
                 laws: Optional[Mapping[str, LawSet]]=None,
                 constants: Optional[Mapping[str, Relation]]=None,
                 max_states: int=DEFAULT_MAX_STATES,
                 max_terms: int=DEFAULT_MAX_TERMS,
                 require_verified: bool=False):
        self.system = system
        self.lang = lang
        self.laws = dict(laws or {})
        self.constants = dict(constants or {})
        self.max_states = max_states
        self.max_terms = max_terms
        self.require_verified = require_verified
        self._universe = universe
        self._roots: set = set()
        self._semantic: Dict[FunctionalKind, Tuple[Relation, frozenset]] = {}
        self._closures: Dict[Tuple[Hashable, str, int], RewriteClosure] = {}
        self._format: Optional[FormatReport] = None
        for S in self.constants.values():
            self.include(S.field())

    @classmethod
    def for_lts(cls, lts: Lts, constants: Optional[Mapping[str, Relation]]=None
                ) -> 'UpToContext':
        return cls(lts, universe=lts, constants=constants)

    @classmethod
    def for_language(cls, lang: GsosLanguage, max_states: int=DEFAULT_MAX_STATES,
                     **kwargs) -> 'UpToContext':
        return cls(TermArena(lang, max_states), lang=lang, max_states=max_states,
                   **kwargs)

    @property
    def on_terms(self) -> bool:
        return self.lang is not None

    @property
    def format(self) -> Optional[FormatReport]:
        if self._format is None and self.lang is not None:
            self._format = classify_format(self.lang)
        return self._format

    def describe(self, state: Hashable) -> str:
        if self.on_terms:
            return print_term(state)
        return self.system.describe(state)

    def resolve(self, text: str) -> Hashable:
        """Turn a described state back into a state."""
        if self.on_terms:
            return parse_term(text, self.lang.signature, allow_variables=False)
        for i in range(len(self.system)):
            if self.system.describe(i) == text:
                return i
        raise CoolcheckError(f'unknown state {text!r}')

    def include(self, states: Iterable[Hashable]):
        """Make sure the semantic universe covers ``states``."""
        if not self.on_terms:
            return
        new = set(states) - self._roots
        if new:
            self._roots |= new
            self._universe = None
            self._semantic.clear()

    @property
    def universe(self) -> Lts:
        if self._universe is None:
            roots = sorted(self._roots, key=print_term)
            self._universe = explore(self.lang, roots, self.max_states)
            log.debug('semantic universe: %r', self._universe)
        return self._universe

    def semantic(self, kind: FunctionalKind) -> Tuple[Relation, frozenset]:
        """The greatest fixpoint of ``kind`` on the universe, over states of
        this context, together with the states it is exact for.
        """
        if kind not in self._semantic:
            u = self.universe
            rel = gfp(kind, u, core_only=True)
            core = u.core_states()
            if self.on_terms:
                rel = Relation((u.states[a], u.states[b]) for a, b in rel.pairs)
                core = frozenset(u.states[i] for i in core)
            self._semantic[kind] = (rel, frozenset(core))
        return self._semantic[kind]

    def constant(self, name: str) -> Relation:
        try:
            return self.constants[name]
        except KeyError:
            raise TechniqueError(f'unknown constant relation {name!r}') from None

    def law_set(self, name: str) -> LawSet:
        try:
            laws = self.laws[name]
        except KeyError:
            raise TechniqueError(f'unknown law set {name!r}') from None
        if self.require_verified and not laws.verified:
            raise TechniqueError(f'law set {name!r} has unverified laws')
        return laws

    def closure(self, t: Hashable, laws: str, depth: int) -> RewriteClosure:
        key = (t, laws, depth)
        if key not in self._closures:
            self._closures[key] = RewriteClosure(t, self.law_set(laws), depth,
                                                 self.max_terms)
        return self._closures[key]


def _index(R: Relation) -> Dict[Hashable, List[Hashable]]:
    by_first: Dict[Hashable, List[Hashable]] = {}
    for a, b in R:
        by_first.setdefault(a, []).append(b)
    return by_first


def _require_term(t, what='ctx'):
    if not isinstance(t, App):
        raise TechniqueError(f'{what} needs closed terms, got {t!r}')


class Evaluator:
    """Membership in ``f(R)`` and images under ``f(R)`` for one fixed ``R``,
    memoized.
    """

    def __init__(self, ctx: UpToContext, R: Relation):
        self.ctx = ctx
        self.R = R
        self._by_first = _index(R)
        self._const_index: Dict[str, Dict[Hashable, List[Hashable]]] = {}
        self._members: Dict[Tuple[Technique, Hashable, Hashable], MemberResult] = {}
        self._images: Dict[Tuple[Technique, Hashable], Images] = {}

    def _const(self, name):
        if name not in self._const_index:
            self._const_index[name] = _index(self.ctx.constant(name))
        return self._const_index[name]

    def member(self, f: Technique, pair: Tuple[Hashable, Hashable]) -> MemberResult:
        key = (f, pair[0], pair[1])
        if key not in self._members:
            self._members[key] = self._member(f, pair)
        return self._members[key]

    def images(self, f: Technique, p: Hashable) -> Images:
        key = (f, p)
        if key not in self._images:
            self._images[key] = self._image(f, p)
        return self._images[key]

    def _member(self, f, pair) -> MemberResult:
        p, q = pair
        if isinstance(f, Id):
            found = pair in self.R
            return MemberResult(Derivation('id', pair) if found else None, True)

        if isinstance(f, Const):
            found = pair in self.ctx.constant(f.name)
            return MemberResult(
                Derivation('const', pair, detail={'name': f.name}) if found else None,
                True)

        if isinstance(f, Union):
            complete = True
            for i, part in enumerate(f.parts):
                r = self.member(part, pair)
                if r.derivation is not None:
                    return MemberResult(
                        Derivation('union', pair, (r.derivation,), {'branch': i}),
                        True)
                complete &= r.complete
            return MemberResult(None, complete)

        if isinstance(f, Compose):
            if len(f.parts) == 1:
                return self.member(f.parts[0], pair)
            rest = f.parts[1] if len(f.parts) == 2 else Compose(f.parts[1:])
            first = self.images(f.parts[0], p)
            complete = first.complete
            for x, d in first.targets.items():
                r = self.member(rest, (x, q))
                if r.derivation is not None:
                    tail = r.derivation
                    steps = tail.children if isinstance(rest, Compose) else (tail,)
                    return MemberResult(Derivation('compose', pair, (d,) + steps),
                                        True)
                complete &= r.complete
            return MemberResult(None, complete)

        if isinstance(f, Ctx):
            _require_term(p)
            _require_term(q)
            if pair in self.R:
                return MemberResult(Derivation('ctx-base', pair), True)
            if p.key != q.key or len(p.args) != len(q.args):
                return MemberResult(None, True)
            children = []
            for a, b in zip(p.args, q.args):
                r = self.member(f, (a, b))
                if r.derivation is None:
                    return MemberResult(None, True)
                children.append(r.derivation)
            return MemberResult(Derivation('ctx-cong', pair, tuple(children)), True)

        if isinstance(f, SandwichLaws):
            return self._member_laws(f, pair)

        if isinstance(f, SandwichSem):
            return self._member_sem(f, pair)

        raise TechniqueError(f'unsupported technique {f!r}')

    def _member_laws(self, f: SandwichLaws, pair) -> MemberResult:
        p, q = pair
        _require_term(p, 'law rewriting')
        _require_term(q, 'law rewriting')
        left = self.ctx.closure(p, f.left, f.depth)
        right = self.ctx.closure(q, f.right, f.depth)

        # both sides grow one level per round; reach maps every inner image
        # of a left term to the first left term that produced it
        reach: Dict[Hashable, Tuple[Hashable, Derivation]] = {}
        partial = []
        new_left = [p]
        while True:
            for p0 in new_left:
                img = self.images(f.inner, p0)
                if not img.complete:
                    partial.append(p0)
                for q0, d in img.targets.items():
                    reach.setdefault(q0, (p0, d))
            hits = [q0 for q0 in right.seen() if q0 in reach]
            if hits:
                q0 = min(hits, key=lambda t: (len(right.chain(t)), print_term(t)))
                p0, d = reach[q0]
                return MemberResult(self._laws_derivation(
                    pair, left, right, p0, q0, d), True)
            if left.done and right.done:
                break
            new_left = left.grow()
            right.grow()

        for p0 in partial:
            for q0 in right.seen():
                r = self.member(f.inner, (p0, q0))
                if r.derivation is not None:
                    return MemberResult(self._laws_derivation(
                        pair, left, right, p0, q0, r.derivation), True)
        return MemberResult(None, left.saturated and right.saturated and not partial)

    @staticmethod
    def _laws_derivation(pair, left, right, p0, q0, inner):
        return Derivation('sandwich-laws', pair, (inner,),
                          {'left': left.chain(p0), 'right': right.chain(q0)})

    def _member_sem(self, f: SandwichSem, pair) -> MemberResult:
        p, q = pair
        left, left_core = self.ctx.semantic(f.left)
        right, right_core = self.ctx.semantic(f.right)
        complete = p in left_core and q in right_core
        for p0 in sorted(left.image(p), key=self.ctx.describe):
            img = self.images(f.inner, p0)
            complete &= img.complete
            for q0, d in img.targets.items():
                if (q, q0) in right:
                    return MemberResult(
                        Derivation('sandwich-sem', pair, (d,),
                                   {'via': [p0, q0], 'left_kind': str(f.left),
                                    'right_kind': str(f.right)}), True)
        return MemberResult(None, complete)

    def _image(self, f, p) -> Images:
        if isinstance(f, Id):
            return Images({q: Derivation('id', (p, q))
                           for q in self._by_first.get(p, ())}, True)

        if isinstance(f, Const):
            return Images({q: Derivation('const', (p, q), detail={'name': f.name})
                           for q in self._const(f.name).get(p, ())}, True)

        if isinstance(f, Union):
            targets: Dict[Hashable, Derivation] = {}
            complete = True
            for i, part in enumerate(f.parts):
                img = self.images(part, p)
                complete &= img.complete
                for q, d in img.targets.items():
                    targets.setdefault(q, Derivation('union', (p, q), (d,),
                                                     {'branch': i}))
            return Images(targets, complete)

        if isinstance(f, Compose):
            current = {p: ()}
            complete = True
            for part in f.parts:
                nxt = {}
                for x, chain in current.items():
                    img = self.images(part, x)
                    complete &= img.complete
                    for y, d in img.targets.items():
                        nxt.setdefault(y, chain + (d,))
                current = nxt
            return Images({q: Derivation('compose', (p, q), chain)
                           for q, chain in current.items()}, complete)

        if isinstance(f, Ctx):
            _require_term(p)
            targets = {q: Derivation('ctx-base', (p, q))
                       for q in self._by_first.get(p, ())}
            complete = True
            arg_images = [self.images(f, a) for a in p.args]
            sizes = 1
            for img in arg_images:
                sizes *= max(1, len(img.targets))
            if sizes > self.ctx.max_terms:
                complete = False
                arg_images = [Images(dict(itertools.islice(img.targets.items(), 1)),
                                     False) for img in arg_images]
            for picked in itertools.product(*(img.targets.items()
                                              for img in arg_images)):
                q = App(p.op, tuple(t for t, _ in picked), p.label)
                targets.setdefault(q, Derivation(
                    'ctx-cong', (p, q), tuple(d for _, d in picked)))
            return Images(targets, complete and all(i.complete for i in arg_images))

        if isinstance(f, SandwichLaws):
            # only the targets reached without rewriting the right side
            targets = {}
            left = self.ctx.closure(p, f.left, f.depth)
            for p0 in left:
                for q0, d in self.images(f.inner, p0).targets.items():
                    if q0 not in targets:
                        right = self.ctx.closure(q0, f.right, 0)
                        targets[q0] = self._laws_derivation(
                            (p, q0), left, right, p0, q0, d)
            return Images(targets, False)

        if isinstance(f, SandwichSem):
            left, left_core = self.ctx.semantic(f.left)
            right, right_core = self.ctx.semantic(f.right)
            back = _index(right.converse())
            targets = {}
            complete = p in left_core
            for p0 in sorted(left.image(p), key=self.ctx.describe):
                img = self.images(f.inner, p0)
                complete &= img.complete
                for q0, d in img.targets.items():
                    complete &= q0 in right_core
                    for q in back.get(q0, ()):
                        targets.setdefault(q, Derivation(
                            'sandwich-sem', (p, q), (d,),
                            {'via': [p0, q0], 'left_kind': str(f.left),
                             'right_kind': str(f.right)}))
            return Images(targets, complete)

        raise TechniqueError(f'unsupported technique {f!r}')


def member(f: Technique, R: Relation, pair, ctx: UpToContext) -> MemberResult:
    """Decide ``pair in f(R)``; a found pair comes with its derivation.
    ``complete`` is False when a negative answer is only relative to a
    bounded search.
    """
    ctx.include(R.field() | set(pair))
    return Evaluator(ctx, R).member(f, pair)


def images(f: Technique, R: Relation, p, ctx: UpToContext) -> Images:
    ctx.include(R.field() | {p})
    return Evaluator(ctx, R).images(f, p)


def _ctx_levels(R: Relation, ctx: UpToContext, depth: int,
                max_pairs: int) -> Relation:
    lang = ctx.lang
    base = set(R.pairs)
    base |= {(s, s) for s in ctx.universe.states}
    for name, label, arity in lang.signature.instances():
        if arity == 0:
            c = App(name, (), label)
            base.add((c, c))
    level = sorted(base, key=lambda pq: (print_term(pq[0]), print_term(pq[1])))
    pairs = set(level)
    for _ in range(depth):
        added = []
        for name, label, arity in lang.signature.instances():
            if arity == 0:
                continue
            for combo in itertools.product(level, repeat=arity):
                pair = (App(name, tuple(a for a, _ in combo), label),
                        App(name, tuple(b for _, b in combo), label))
                if pair not in pairs:
                    pairs.add(pair)
                    added.append(pair)
                if len(pairs) >= max_pairs:
                    log.warning('context enumeration capped at %d pairs', max_pairs)
                    return Relation(pairs)
        level = level + added
    return Relation(pairs)


def enumerate_image(f: Technique, R: Relation, ctx: UpToContext,
                    depth: int=flags.DEFAULT_CONTEXT_DEPTH,
                    max_pairs: int=5000) -> Relation:
    """A finite part of ``f(R)``: contexts are built up to ``depth`` operators
    deep over the states of the universe.

    Raises:
      TechniqueError: For law sandwiches, whose images are not enumerable.

    """
    ctx.include(R.field())
    if isinstance(f, Id):
        return R
    if isinstance(f, Const):
        return ctx.constant(f.name)
    if isinstance(f, Union):
        result = Relation()
        for part in f.parts:
            result = result | enumerate_image(part, R, ctx, depth, max_pairs)
        return result
    if isinstance(f, Compose):
        result = None
        for part in f.parts:
            img = enumerate_image(part, R, ctx, depth, max_pairs)
            result = img if result is None else result.compose(img)
        return result
    if isinstance(f, Ctx):
        if not ctx.on_terms:
            raise TechniqueError('ctx needs a language')
        return _ctx_levels(R, ctx, depth, max_pairs)
    if isinstance(f, SandwichSem):
        left, _ = ctx.semantic(f.left)
        right, _ = ctx.semantic(f.right)
        inner = enumerate_image(f.inner, R, ctx, depth, max_pairs)
        return left.compose(inner).compose(right.converse())
    raise TechniqueError(f'cannot enumerate the image of {f}')


class Verdict(str, enum.Enum):
    CERTIFIED = 'certified'
    REFUTED = 'refuted'
    INCONCLUSIVE = 'inconclusive'

    def __str__(self):
        return self.value


class Soundness(enum.IntEnum):
    CERTIFIED = 0
    CONDITIONAL = 1
    UNCERTIFIED = 2
    UNSOUND = 3

    def __str__(self):
        return self.name.lower()


@dataclass
class Advice:
    level: Soundness
    reasons: List[str] = field(default_factory=list)

    def to_json(self):
        return {'soundness': str(self.level), 'reasons': list(self.reasons)}

    def __str__(self):
        if not self.reasons:
            return str(self.level)
        return f'{self.level}: {"; ".join(self.reasons)}'


@dataclass
class RoundTrace:
    challenge: Any
    status: str
    answer: Optional[Tuple[Hashable, ...]] = None
    derivations: List[Derivation] = field(default_factory=list)

    def to_json(self, describe):
        c = self.challenge
        return {
            'challenge': {'side': c.side, 'source': describe(c.source),
                          'label': c.label, 'target': describe(c.target)},
            'status': self.status,
            'answer': None if self.answer is None
                      else [describe(s) for s in self.answer],
            'derivations': [d.to_json(describe) for d in self.derivations],
            }


@dataclass
class PairTrace:
    pair: Tuple[Hashable, Hashable]
    rounds: List[RoundTrace] = field(default_factory=list)
    reason: Optional[str] = None

    @property
    def status(self) -> Verdict:
        if any(r.status == 'refuted' for r in self.rounds):
            return Verdict.REFUTED
        if self.reason or any(r.status == 'inconclusive' for r in self.rounds):
            return Verdict.INCONCLUSIVE
        return Verdict.CERTIFIED

    def to_json(self, describe):
        return {'pair': [describe(self.pair[0]), describe(self.pair[1])],
                'status': str(self.status), 'reason': self.reason,
                'rounds': [r.to_json(describe) for r in self.rounds]}


@dataclass
class CheckReport:
    kind: FunctionalKind
    technique: Technique
    pairs: List[PairTrace]
    advisory: Advice
    describe: Callable[[Hashable], str] = str

    @property
    def verdict(self) -> Verdict:
        statuses = {p.status for p in self.pairs}
        if Verdict.REFUTED in statuses:
            return Verdict.REFUTED
        if Verdict.INCONCLUSIVE in statuses:
            return Verdict.INCONCLUSIVE
        return Verdict.CERTIFIED

    def to_json(self):
        return {
            'verdict': str(self.verdict),
            'kind': str(self.kind),
            'technique': str(self.technique),
            'rewrite_depth': max((a.depth for a in self.technique.atoms()
                                  if isinstance(a, SandwichLaws)),
                                 default=DEFAULT_REWRITE_DEPTH),
            'advisory': self.advisory.to_json(),
            'pairs': [p.to_json(self.describe) for p in self.pairs],
            }


def _play(ev: Evaluator, f: Technique, rnd) -> RoundTrace:
    complete = not rnd.truncated
    for ans in rnd.answers:
        derivations = []
        for pair in ans.required:
            r = ev.member(f, pair)
            if r.derivation is None:
                complete &= r.complete
                break
            derivations.append(r.derivation)
        else:
            return RoundTrace(rnd.challenge, 'answered', ans.path, derivations)
    return RoundTrace(rnd.challenge, 'refuted' if complete else 'inconclusive')


def check_up_to(R: Relation, f: Technique, kind: FunctionalKind,
                ctx: UpToContext) -> CheckReport:
    """Play the game of ``kind`` on every pair of ``R``, answering into
    ``f(R)``.

    The verdict is ``refuted`` only when some challenge has no answer in an
    exhaustively searched space, ``inconclusive`` when the search ran into
    unknown transitions or search bounds, and ``certified`` when every
    challenge has an answer with complete derivations.
    """
    ctx.include(R.field())
    ev = Evaluator(ctx, R)
    traces = []
    for pair in sorted(R.pairs, key=lambda pq: (ctx.describe(pq[0]),
                                                 ctx.describe(pq[1]))):
        trace = PairTrace(pair)
        try:
            for rnd in rounds(kind, ctx.system, *pair):
                played = _play(ev, f, rnd)
                log.debug('%s -%s-> %s: %s', ctx.describe(rnd.challenge.source),
                          rnd.challenge.label, ctx.describe(rnd.challenge.target),
                          played.status)
                trace.rounds.append(played)
        except FrontierError as e:
            trace.reason = str(e)
        traces.append(trace)

    advisory = soundness_advice(f, kind, ctx.format, ctx.laws)
    report = CheckReport(kind, f, traces, advisory, ctx.describe)
    log.info('%s up to %s: %s', kind, f, report.verdict)
    return report


def _check_chain(start, steps, laws: LawSet, depth, problems, where):
    if len(steps) > depth:
        problems.append(f'{where}: rewrite chain longer than {depth}')
    current = start
    for s in steps:
        try:
            law = laws.law(s['law'])
        except KeyError:
            problems.append(f'{where}: unknown law {s["law"]!r}')
            return None
        expected = [r.result for r in rewrite_once(current, [law])
                    if list(r.path) == list(s['path'])]
        if not expected or print_term(expected[0]) != s['term']:
            problems.append(f'{where}: law {law.name} does not yield {s["term"]}')
            return None
        current = expected[0]
    return current


def _check_derivation(node: dict, f: Technique, pair, ev: Evaluator,
                      problems: List[str]):
    ctx = ev.ctx
    where = f'derivation of ({ctx.describe(pair[0])}, {ctx.describe(pair[1])})'
    recorded = tuple(ctx.resolve(s) for s in node['pair'])
    if recorded != tuple(pair):
        problems.append(f'{where}: records pair {node["pair"]}')
        return
    rule = node['rule']
    children = node.get('children', [])

    def child_pairs():
        return [tuple(ctx.resolve(s) for s in c['pair']) for c in children]

    if isinstance(f, Id):
        if rule != 'id' or pair not in ev.R:
            problems.append(f'{where}: not in R')
    elif isinstance(f, Const):
        if rule != 'const' or pair not in ctx.constant(f.name):
            problems.append(f'{where}: not in const:{f.name}')
    elif isinstance(f, Union):
        i = node.get('branch', -1)
        if rule != 'union' or not 0 <= i < len(f.parts) or len(children) != 1:
            problems.append(f'{where}: malformed union step')
            return
        _check_derivation(children[0], f.parts[i], pair, ev, problems)
    elif isinstance(f, Compose):
        parts = f.parts
        cps = child_pairs()
        if rule != 'compose' or len(cps) != len(parts) or not cps \
                or cps[0][0] != pair[0] or cps[-1][1] != pair[1] \
                or any(a[1] != b[0] for a, b in zip(cps, cps[1:])):
            problems.append(f'{where}: malformed composition chain')
            return
        for c, part, cp in zip(children, parts, cps):
            _check_derivation(c, part, cp, ev, problems)
    elif isinstance(f, Ctx):
        p, q = pair
        if rule == 'ctx-base':
            if pair not in ev.R:
                problems.append(f'{where}: base pair not in R')
        elif rule == 'ctx-cong' and isinstance(p, App) and isinstance(q, App) \
                and p.key == q.key and child_pairs() == list(zip(p.args, q.args)):
            for c, cp in zip(children, child_pairs()):
                _check_derivation(c, f, cp, ev, problems)
        else:
            problems.append(f'{where}: malformed context step')
    elif isinstance(f, SandwichLaws):
        if rule != 'sandwich-laws' or len(children) != 1:
            problems.append(f'{where}: malformed law sandwich')
            return
        p0 = _check_chain(pair[0], node['left'], ctx.law_set(f.left), f.depth,
                          problems, where)
        q0 = _check_chain(pair[1], node['right'], ctx.law_set(f.right), f.depth,
                          problems, where)
        if p0 is not None and q0 is not None:
            _check_derivation(children[0], f.inner, (p0, q0), ev, problems)
    elif isinstance(f, SandwichSem):
        if rule != 'sandwich-sem' or len(children) != 1:
            problems.append(f'{where}: malformed semantic sandwich')
            return
        p0, q0 = (ctx.resolve(s) for s in node['via'])
        if (pair[0], p0) not in ctx.semantic(f.left)[0] \
                or (pair[1], q0) not in ctx.semantic(f.right)[0]:
            problems.append(f'{where}: semantic step does not hold')
            return
        _check_derivation(children[0], f.inner, (p0, q0), ev, problems)
    else:
        problems.append(f'{where}: unsupported technique {f}')


def replay_report(data: Mapping[str, Any], R: Relation, ctx: UpToContext
                  ) -> List[str]:
    """Re-validate a certified report (in its JSON form) from scratch.

    Every challenge of every pair must be recorded with an answer that is a
    legal answer of the game, and every derivation must check against ``R``,
    the laws and the semantic relations of ``ctx``.

    Returns:
      list: Problems found; empty if the report replays.

    """
    problems = []
    if data.get('verdict') != str(Verdict.CERTIFIED):
        return [f'report verdict is {data.get("verdict")!r}, not certified']

    ctx.include(R.field())
    kind = FunctionalKind.parse(data['kind'])
    f = parse_technique(data['technique'],
                        data.get('rewrite_depth', DEFAULT_REWRITE_DEPTH))
    ev = Evaluator(ctx, R)

    seen_pairs = set()
    for entry in data['pairs']:
        pair = tuple(ctx.resolve(s) for s in entry['pair'])
        seen_pairs.add(pair)
        recorded = {}
        for r in entry['rounds']:
            c = r['challenge']
            recorded[(c['side'], c['label'], c['target'])] = r
        for rnd in rounds(kind, ctx.system, *pair):
            c = rnd.challenge
            key = (c.side, c.label, ctx.describe(c.target))
            where = f'{entry["pair"]} challenge {key}'
            r = recorded.get(key)
            if r is None or r['answer'] is None:
                problems.append(f'{where}: no recorded answer')
                continue
            path = tuple(ctx.resolve(s) for s in r['answer'])
            legal = [a for a in rnd.answers if a.path == path]
            if not legal:
                problems.append(f'{where}: recorded answer is not a legal move')
                continue
            required = legal[0].required
            if len(required) != len(r['derivations']):
                problems.append(f'{where}: wrong number of derivations')
                continue
            for pr, node in zip(required, r['derivations']):
                _check_derivation(node, f, pr, ev, problems)

    if seen_pairs != set(R.pairs):
        problems.append('report does not cover exactly the pairs of R')
    return problems


@dataclass
class RespectfulnessResult:
    passed: bool
    vacuous: bool = False
    checked: int = 0
    skipped: int = 0
    witness: Optional[Tuple[Hashable, Hashable]] = None

    def to_json(self, describe=str):
        return {'passed': self.passed, 'vacuous': self.vacuous,
                'checked': self.checked, 'skipped': self.skipped,
                'witness': None if self.witness is None
                           else [describe(x) for x in self.witness]}


def test_respectful_instance(f: Technique, kind: FunctionalKind, R: Relation,
                             S: Relation, ctx: UpToContext,
                             depth: int=flags.DEFAULT_CONTEXT_DEPTH
                             ) -> RespectfulnessResult:
    """Test ``f(R) <= kind(f(S))`` for one instance with ``R <= S`` and
    ``R <= kind(S)``.

    Instances violating the hypothesis pass vacuously. Pairs of ``f(R)`` whose
    game runs into unknown transitions are skipped and counted.
    """
    ctx.include(R.field() | S.field())
    if not R <= S:
        return RespectfulnessResult(True, vacuous=True)
    try:
        if not all(holds(kind, ctx.system, S.pairs.__contains__, *pair)
                   for pair in R.pairs):
            return RespectfulnessResult(True, vacuous=True)
    except FrontierError:
        return RespectfulnessResult(True, vacuous=True)

    ev = Evaluator(ctx, S)
    in_fS = lambda pair: ev.member(f, pair).derivation is not None
    result = RespectfulnessResult(True)
    for pair in sorted(enumerate_image(f, R, ctx, depth).pairs,
                       key=lambda pq: (ctx.describe(pq[0]), ctx.describe(pq[1]))):
        try:
            ok = holds(kind, ctx.system, in_fS, *pair)
        except FrontierError:
            result.skipped += 1
            continue
        result.checked += 1
        if not ok:
            result.passed = False
            result.witness = pair
            break
    return result


test_respectful_instance.__test__ = False


@dataclass
class PropertyCheck:
    name: str
    passed: bool
    instances: int

    def to_json(self):
        return {'name': self.name, 'passed': self.passed,
                'instances': self.instances}


def _random_relation(states, rng: random.Random, density: float) -> Relation:
    return Relation(pair for pair in itertools.product(states, states)
                    if rng.random() < density)


def companion_property_tests(kind: FunctionalKind, lts: Lts,
                             rng: random.Random, samples: int=20
                             ) -> List[PropertyCheck]:
    """Randomized checks of the closure properties of techniques below the
    companion, on a small frontier-free LTS.
    """
    states = range(len(lts))
    gfp_rel = gfp(kind, lts)
    post = greatest_post_fixpoint_below(kind, lts,
                                        _random_relation(states, rng, 0.6))
    constants = {'empty': Relation(), 'gfp': gfp_rel, 'post': post}
    ctx = UpToContext.for_lts(lts, constants)

    def instances():
        for _ in range(samples):
            S = _random_relation(states, rng, 0.5)
            answered = [pair for pair in sorted(S.pairs)
                        if holds(kind, lts, S.pairs.__contains__, *pair)]
            R = Relation(pair for pair in answered if rng.random() < 0.7)
            yield R, S

    candidates = [
        parse_technique('id | const:empty'),
        parse_technique('id ; id'),
        parse_technique('id | id'),
        parse_technique('const:gfp'),
        parse_technique('const:post'),
        parse_technique('id ; const:gfp | const:post'),
        ]

    checks = []
    passing = []
    for f in candidates:
        ok = True
        count = 0
        for R, S in instances():
            count += 1
            if not test_respectful_instance(f, kind, R, S, ctx).passed:
                ok = False
                break
        checks.append(PropertyCheck(f'respectful[{f}]', ok, count))
        if ok:
            passing.append(f)

    for f in passing:
        image = enumerate_image(f, gfp_rel, ctx)
        checks.append(PropertyCheck(f'gfp-closed[{f}]', image <= gfp_rel, 1))
    return checks


_FORMAT_FOR_FAMILY = {
    'branching': 'bb',
    'weak': 'wb',
    'eta': 'hb',
    'delay': 'db',
    }

_EXPANSION_FOR_FAMILY = {
    'branching': FunctionalKind.BRANCHING_EXP,
    'eta': FunctionalKind.ETA_EXP,
    'delay': FunctionalKind.DELAY_EXP,
    }


def _worst(advices: Iterable[Advice]) -> Advice:
    advices = list(advices)
    level = max((a.level for a in advices), default=Soundness.CERTIFIED)
    # each reason once, in first-seen order
    return Advice(level, list(dict.fromkeys(r for a in advices for r in a.reasons)))


def _sandwich_advice(left: FunctionalKind, right: FunctionalKind,
                     kind: FunctionalKind) -> Advice:
    for k in (left, right):
        if k.is_bisim and k != FunctionalKind.STRONG_BISIM:
            return Advice(Soundness.UNSOUND,
                          [f'up to {k} is unsound in general'])
    allowed = {FunctionalKind.STRONG_BISIM}
    if kind.family in _EXPANSION_FOR_FAMILY:
        allowed.add(_EXPANSION_FOR_FAMILY[kind.family])
    bad = [str(k) for k in (left, right) if k not in allowed]
    if bad:
        return Advice(Soundness.UNCERTIFIED,
                      [f'no respectfulness result for {", ".join(bad)} '
                       f'sandwiches in {kind} games'])
    return Advice(Soundness.CERTIFIED)


def soundness_advice(f: Technique, kind: FunctionalKind,
                     fmt: Optional[FormatReport]=None,
                     laws: Optional[Mapping[str, LawSet]]=None) -> Advice:
    """Say whether ``f`` is known to be below the companion of ``kind``.

    Contextual closure is certified by the format the language satisfies,
    expansion and strong bisimilarity sandwiches by the respectfulness of the
    matching expansion preorder, and unions and compositions part by part.
    Sandwiches with weak-family bisimilarities are flagged unsound.
    """
    laws = laws or {}
    if isinstance(f, Id):
        return Advice(Soundness.CERTIFIED)
    if isinstance(f, Const):
        return Advice(Soundness.CONDITIONAL,
                      [f'const:{f.name} is sound only if it is a post-fixed point'])
    if isinstance(f, (Union, Compose)):
        return _worst(soundness_advice(p, kind, fmt, laws) for p in f.parts)

    if isinstance(f, Ctx):
        if kind.family == 'strong':
            return Advice(Soundness.CERTIFIED)
        if kind.is_expansion:
            return Advice(Soundness.UNCERTIFIED,
                          ['no format result for contexts in expansion games'])
        if fmt is None:
            return Advice(Soundness.UNCERTIFIED, ['ctx without a language'])
        name = _FORMAT_FOR_FAMILY[kind.family]
        if fmt.grants(name):
            return Advice(Soundness.CERTIFIED)
        reasons = []
        for clause in fmt.failing(name):
            w = fmt.clauses[clause].witnesses[0]
            if 'rule' in w:
                reasons.append(f'format clause {clause} witness (rule {w["rule"]})')
            else:
                reasons.append(f'format clause {clause} witness '
                               f'({w["operator"]}, arg {w["argument"]})')
        return Advice(Soundness.UNCERTIFIED, reasons)

    if isinstance(f, SandwichSem):
        return _worst([_sandwich_advice(f.left, f.right, kind),
                       soundness_advice(f.inner, kind, fmt, laws)])

    if isinstance(f, SandwichLaws):
        advices = []
        grades = {}
        for name in (f.left, f.right):
            law_set = laws.get(name)
            if law_set is None:
                advices.append(Advice(Soundness.UNCERTIFIED,
                                      [f'unknown law set {name!r}']))
                continue
            grades[name] = (FunctionalKind.STRONG_BISIM if law_set.grade == 'strong'
                            else FunctionalKind.BRANCHING_EXP)
            if not law_set.verified:
                advices.append(Advice(Soundness.CONDITIONAL,
                                      [f'law set {name!r} is not verified']))
        if len(grades) == 2:
            advices.append(_sandwich_advice(grades[f.left], grades[f.right], kind))
        advices.append(soundness_advice(f.inner, kind, fmt, laws))
        return _worst(advices)

    raise TechniqueError(f'unsupported technique {f!r}')


@dataclass
class Certificate:
    path: str
    language: GsosLanguage
    language_path: str
    kind: FunctionalKind
    relation: Relation
    technique: Technique
    laws: Dict[str, LawSet]
    constants: Dict[str, Relation]
    bounds: Dict[str, int]

    def context(self, require_verified: bool=False) -> UpToContext:
        return UpToContext.for_language(
            self.language, self.bounds['max_states'], laws=self.laws,
            constants=self.constants, max_terms=self.bounds['max_terms'],
            require_verified=require_verified)


def _relative(base: str, path: str) -> str:
    if os.path.isabs(path):
        return path
    return os.path.join(os.path.dirname(base), path)


def _term_pairs(entries, lang, what) -> Relation:
    try:
        return Relation(
            (parse_term(l, lang.signature, allow_variables=False),
             parse_term(r, lang.signature, allow_variables=False))
            for l, r in entries)
    except (TypeError, ValueError) as e:
        raise CertificateError(f'{what} must be a list of term pairs') from e
    except CoolcheckError as e:
        raise CertificateError(f'{what}: {e}') from e


def load_certificate(path, overrides: Optional[Mapping[str, int]]=None
                     ) -> Certificate:
    """Read a ``.cert.json`` file.

    ``language`` and law-file paths are relative to the certificate. ``laws``
    is a list (the law set ``default``), a path to a ``.laws.json`` file, or an
    object mapping set names to lists or paths. ``overrides`` replaces
    individual ``bounds``.

    Raises:
      CertificateError: On malformed content.
      UsageError: If the bounds fail validation.

    """
    path = str(path)
    try:
        with open(path, encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        raise CertificateError(f'cannot read certificate {path}: {e}') from e
    if not isinstance(data, dict):
        raise CertificateError('a certificate must be a JSON object')

    missing = [k for k in ('language', 'kind', 'relation', 'technique')
               if k not in data]
    if missing:
        raise CertificateError(f'certificate lacks {", ".join(missing)}')

    bounds = dict(data.get('bounds', {}))
    bounds.update({k: v for k, v in (overrides or {}).items() if v is not None})
    bounds = flags.validate_bounds(bounds)

    language_path = _relative(path, data['language'])
    lang = load_language_file(language_path)

    try:
        kind = FunctionalKind.parse(data['kind'])
    except ValueError as e:
        raise CertificateError(str(e)) from None

    laws: Dict[str, LawSet] = {}
    spec_laws = data.get('laws', {})
    if isinstance(spec_laws, str):
        laws.update(load_laws_file(_relative(path, spec_laws), lang))
    elif isinstance(spec_laws, list):
        laws['default'] = laws_from_json(spec_laws, lang)
    else:
        for name, entry in spec_laws.items():
            if isinstance(entry, str):
                loaded = load_laws_file(_relative(path, entry), lang)
                laws[name] = LawSet(name, [l for s in loaded.values() for l in s])
            else:
                laws[name] = laws_from_json(entry, lang, name)

    constants = {name: _term_pairs(pairs, lang, f'constant {name}')
                 for name, pairs in data.get('constants', {}).items()}
    relation = _term_pairs(data['relation'], lang, 'relation')
    technique = parse_technique(data['technique'], bounds['rewrite_depth'])

    for atom in technique.atoms():
        if isinstance(atom, Const) and atom.name not in constants:
            raise CertificateError(f'technique uses unknown constant {atom.name!r}')
        if isinstance(atom, SandwichLaws):
            for name in (atom.left, atom.right):
                if name not in laws:
                    raise CertificateError(f'technique uses unknown law set {name!r}')

    return Certificate(path, lang, language_path, kind, relation, technique,
                       laws, constants, bounds)


def run_certificate(cert: Certificate, require_verified: bool=False
                    ) -> CheckReport:
    ctx = cert.context(require_verified)
    return check_up_to(cert.relation, cert.technique, cert.kind, ctx)

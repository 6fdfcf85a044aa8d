"""Kripke semantics: finite models, lasso presentations of discrete linear
models, and the truth definition on both."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Iterator, Mapping, Optional, Tuple, Union

from kripkeforge.syntax import (
    FALSE_PREDICATE,
    And,
    ArityError,
    Atom,
    Box,
    Const,
    Dia,
    Exists,
    Formula,
    Not,
    Signature,
    UnknownSymbolError,
    Var,
)

Fact = Tuple[str, Tuple[str, ...]]
World = FrozenSet[Fact]


def make_world(facts: Iterable) -> World:
    """Build a world from facts given as ``'p'`` or ``('P', ('a', 'b'))``."""
    world = set()
    for fact in facts:
        if isinstance(fact, str):
            world.add((fact, ()))
        else:
            pred, args = fact
            world.add((pred, tuple(args)))
    return frozenset(world)


def fact_text(fact: Fact) -> str:
    pred, args = fact
    return f'{pred}({",".join(args)})' if args else pred


def _normalize_constants(constants):
    if isinstance(constants, Mapping):
        constants = constants.items()
    return tuple(sorted((str(c), str(d)) for c, d in constants))


def _check_structure(sig, worlds, domain, constants):
    if not domain:
        raise ValueError('Domain must be nonempty')
    elements = set(domain)
    if len(elements) != len(domain):
        raise ValueError('Domain elements must be distinct')
    for name, element in constants:
        if element not in elements:
            raise ValueError(f'Constant {name} is interpreted outside the domain')
    for world in worlds:
        for pred, args in world:
            arity = sig.arity(pred)
            if arity is None:
                raise UnknownSymbolError(f'Unknown predicate {pred}')
            # I(w, P) is a subset of D^n, so every tuple has length n
            if arity != len(args):
                raise ArityError(f'{pred} expects {arity} arguments, got {len(args)}')
            if not set(args) <= elements:
                raise ValueError(f'Fact {fact_text((pred, args))} leaves the domain')


@dataclass(frozen=True)
class KripkeModel:
    """A finite constant-domain Kripke model (W, R, D, I).

    The relation is an arbitrary digraph on world indices; only lassos are
    restricted to linear frames.
    """
    signature: Signature
    worlds: Tuple[World, ...]
    access: FrozenSet[Tuple[int, int]]
    domain: Tuple[str, ...] = ('e0',)
    constants: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'worlds', tuple(make_world(w) for w in self.worlds))
        object.__setattr__(self, 'access', frozenset((int(a), int(b)) for a, b in self.access))
        object.__setattr__(self, 'domain', tuple(self.domain))
        object.__setattr__(self, 'constants', _normalize_constants(self.constants))
        if not self.worlds:
            raise ValueError('A Kripke model needs at least one world')
        for a, b in self.access:
            if not (0 <= a < len(self.worlds) and 0 <= b < len(self.worlds)):
                raise ValueError(f'Edge ({a}, {b}) leaves the model')
        _check_structure(self.signature, self.worlds, self.domain, self.constants)

    @cached_property
    def successors(self) -> Tuple[Tuple[int, ...], ...]:
        out = [[] for _ in self.worlds]
        for a, b in sorted(self.access):
            out[a].append(b)
        return tuple(tuple(s) for s in out)

    @cached_property
    def interpretation(self) -> Dict[str, str]:
        return dict(self.constants)


@dataclass(frozen=True)
class LassoModel:
    """A discrete linear model presented as a lasso.

    The denoted omega-model visits ``prefix[0..k-1]`` and then repeats
    ``loop[0..m-1]`` forever; accessibility is ``<=`` on positions. Positions
    are flat indices into ``prefix + loop``; ``flat`` folds unrolled positions
    back onto them.
    """
    signature: Signature
    prefix: Tuple[World, ...]
    loop: Tuple[World, ...]
    domain: Tuple[str, ...] = ('e0',)
    constants: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'prefix', tuple(make_world(w) for w in self.prefix))
        object.__setattr__(self, 'loop', tuple(make_world(w) for w in self.loop))
        object.__setattr__(self, 'domain', tuple(self.domain))
        object.__setattr__(self, 'constants', _normalize_constants(self.constants))
        if not self.loop:
            raise ValueError('A lasso needs a nonempty loop')
        _check_structure(self.signature, self.worlds, self.domain, self.constants)

    @property
    def worlds(self) -> Tuple[World, ...]:
        return self.prefix + self.loop

    @property
    def loop_start(self) -> int:
        return len(self.prefix)

    def loop_position(self, j: int) -> int:
        return self.loop_start + j

    def flat(self, position: int) -> int:
        """Fold a position of the unrolled omega-sequence onto ``worlds``."""
        if position < self.loop_start:
            return position
        return self.loop_start + (position - self.loop_start) % len(self.loop)

    @cached_property
    def interpretation(self) -> Dict[str, str]:
        return dict(self.constants)


Model = Union[KripkeModel, LassoModel]


def _element(model, term, env):
    if isinstance(term, Var):
        try:
            return env[term.name]
        except KeyError:
            raise ValueError(f'Free variable {term.name} in a sentence position') from None
    if term.name in model.interpretation:
        return model.interpretation[term.name]
    if term.name in model.domain:
        return term.name
    raise UnknownSymbolError(f'Constant {term.name} is not interpreted')


def _atom_fact(model, f, env) -> Optional[Fact]:
    if f.pred == FALSE_PREDICATE and not f.args:
        return None
    arity = model.signature.arity(f.pred)
    if arity is None:
        raise UnknownSymbolError(f'Unknown predicate {f.pred}')
    if arity != len(f.args):
        raise ArityError(f'{f.pred} expects {arity} arguments, got {len(f.args)}')
    return f.pred, tuple(_element(model, t, env) for t in f.args)


def evaluate(m: KripkeModel, w: int, f: Formula) -> bool:
    """Truth of sentence `f` at world `w` of `m`.

    Parameters
    ----------
    m : KripkeModel
        The model.
    w : int
        World index.
    f : Formula
        A sentence over the model's signature; domain element names may be
        used as constants naming themselves.

    Returns
    -------
    bool
        Truth by the six inductive clauses: quantifiers range over the
        domain, modal operators over R-successors.
    """
    if not 0 <= w < len(m.worlds):
        raise IndexError(f'World {w} is not in the model')
    return _evaluate(m, w, f, {})


def _evaluate(m, w, f, env):
    if isinstance(f, Atom):
        fact = _atom_fact(m, f, env)
        return fact is not None and fact in m.worlds[w]
    if isinstance(f, Not):
        return not _evaluate(m, w, f.body, env)
    if isinstance(f, And):
        return _evaluate(m, w, f.left, env) and _evaluate(m, w, f.right, env)
    if isinstance(f, Exists):
        return any(_evaluate(m, w, f.body, {**env, f.var: d}) for d in m.domain)
    if isinstance(f, Dia):
        return any(_evaluate(m, v, f.body, env) for v in m.successors[w])
    if isinstance(f, Box):
        return all(_evaluate(m, v, f.body, env) for v in m.successors[w])
    raise TypeError(f'Not a formula: {f!r}')


def global_truth(m: KripkeModel, f: Formula) -> bool:
    """True iff `f` holds at every world of `m`."""
    return all(_evaluate(m, w, f, {}) for w in range(len(m.worlds)))


class _LassoEvaluator:
    """Computes truth vectors over all flat lasso positions at once.

    On a lasso, ``<>g`` at a prefix position q holds iff g holds somewhere at
    or after q, and at a loop position iff g holds somewhere on the loop,
    since loop worlds recur cofinally.
    """

    def __init__(self, model: LassoModel):
        self.model = model
        self.size = len(model.worlds)
        self.start = model.loop_start
        self._cache = {}

    def vector(self, f, env=()):
        key = (f, env)
        if key not in self._cache:
            self._cache[key] = self._compute(f, env)
        return self._cache[key]

    def _compute(self, f, env):
        if isinstance(f, Atom):
            fact = _atom_fact(self.model, f, dict(env))
            return tuple(fact is not None and fact in world for world in self.model.worlds)
        if isinstance(f, Not):
            return tuple(not v for v in self.vector(f.body, env))
        if isinstance(f, And):
            left, right = self.vector(f.left, env), self.vector(f.right, env)
            return tuple(a and b for a, b in zip(left, right))
        if isinstance(f, Exists):
            vectors = [self.vector(f.body, env + ((f.var, d),)) for d in self.model.domain]
            return tuple(any(column) for column in zip(*vectors))
        if isinstance(f, Dia):
            return self._suffix(self.vector(f.body, env), any)
        if isinstance(f, Box):
            return self._suffix(self.vector(f.body, env), all)
        raise TypeError(f'Not a formula: {f!r}')

    def _suffix(self, values, combine):
        on_loop = combine(values[self.start:])
        out = [on_loop] * self.size
        running = on_loop
        for q in reversed(range(self.start)):
            running = combine((values[q], running))
            out[q] = running
        return tuple(out)


def eval_lasso(m: LassoModel, pos: int, f: Formula) -> bool:
    """Truth of sentence `f` at flat position `pos` of lasso `m`.

    Exact for the denoted omega-model; use ``m.loop_position(j)`` to address
    the j-th loop world.
    """
    if not 0 <= pos < len(m.worlds):
        raise IndexError(f'Position {pos} is not in the lasso')
    return _LassoEvaluator(m).vector(f)[pos]


def lasso_truth_vector(m: LassoModel, f: Formula) -> Tuple[bool, ...]:
    return _LassoEvaluator(m).vector(f)


def lasso_global_truth(m: LassoModel, f: Formula) -> bool:
    return all(_LassoEvaluator(m).vector(f))


def unroll(m: LassoModel, steps: int) -> KripkeModel:
    """The finite reflexive-transitive unrolling of the prefix and `steps` loop copies.

    Positions are related by ``<=``, and the worlds of the last loop copy are
    additionally related to each other, so the last copy is a cluster standing
    in for the recurring loop. Evaluation at any position p of the result
    agrees with ``eval_lasso`` at ``m.flat(p)``.
    """
    if steps < 1:
        raise ValueError('Unrolling needs at least one loop copy')
    worlds = m.prefix + m.loop * steps
    last = len(worlds) - len(m.loop)
    access = {(a, b) for a in range(len(worlds)) for b in range(a, len(worlds))}
    access.update((a, b) for a in range(last, len(worlds)) for b in range(last, len(worlds)))
    return KripkeModel(m.signature, worlds, frozenset(access), m.domain, m.constants)


def gvquote(s):
    """Quote a string as a graphviz ID."""
    return '"{}"'.format(s.replace('"', r'\"'))


def _world_label(index, world):
    facts = ', '.join(sorted(fact_text(f) for f in world))
    return f'{index}: {{{facts}}}'


def to_dot(model: Model, name: str = 'model') -> Iterator[str]:
    """Render a model as graphviz dot lines.

    A lasso is drawn as its successor chain with a dashed edge closing the
    loop; reflexive and transitive edges are implied and omitted.
    """
    yield f'digraph {gvquote(name)} {{\n'
    yield '  rankdir=LR;\n'
    for i, world in enumerate(model.worlds):
        yield f'  w{i} [shape=box label={gvquote(_world_label(i, world))}];\n'
    if isinstance(model, LassoModel):
        for i in range(len(model.worlds) - 1):
            yield f'  w{i} -> w{i + 1};\n'
        last = len(model.worlds) - 1
        yield f'  w{last} -> w{model.loop_start} [style=dashed label="loop"];\n'
    else:
        for a, b in sorted(model.access):
            yield f'  w{a} -> w{b};\n'
    yield '}\n'

"""Bounded decision procedure for entailment over discrete linear frames.

A countermodel to ``T |= f`` is searched among lassos. The search grounds
quantifiers over a small domain, compiles axioms and goal into one node
program over ground-atom valuations, and then

1. enumerates loop sets U of distinct valuations by size, computing the
   uniform truth of every modal node on the loop, and
2. extends each admissible loop backwards one world at a time (breadth
   first), where the modal state of a new front world depends only on its
   valuation and the modal state of the world after it.

Identical modal states are interchangeable for further extension, so the
backward search terminates; reaching an empty frontier proves that no longer
prefix helps. Loops larger than the number of modal nodes plus one are never
needed: a sub-loop that keeps one witness per existential requirement has the
same modal state.
"""
import itertools
import logging
import os
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import pandas as pd

from kripkeforge.semantics import LassoModel, eval_lasso, lasso_global_truth, lasso_truth_vector
from kripkeforge.syntax import (
    FALSE_PREDICATE,
    And,
    Atom,
    Box,
    Const,
    Dia,
    Exists,
    Formula,
    Implies,
    Not,
    Or,
    Signature,
    Var,
    subsentences,
    subformulas,
    to_text,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_DOMAIN = 2
DEFAULT_BOUND_CAP = 4096
SCHEMATA = ('T', '4', 'K', 'D2', 'N1')


class SignatureMismatchError(ValueError):
    pass


class OracleExhausted(RuntimeError):
    """Raised in strict mode when the search could not certify validity."""


class OracleExhaustedWarning(UserWarning):
    pass


def bound_cap() -> int:
    return int(os.environ.get('KF_MAX_BOUND_CAP', DEFAULT_BOUND_CAP))


@dataclass(frozen=True)
class Theory:
    """A finite set of axioms, required to hold at every world."""
    signature: Signature
    axioms: Tuple[Formula, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'axioms', tuple(self.axioms))
        for axiom in self.axioms:
            check_signature(self.signature, axiom)


@dataclass(frozen=True)
class SearchBounds:
    """Search limits; ``None`` selects the default derived from the input.

    The derived defaults are ``2**s + s`` for the prefix and ``2**s`` for the
    loop, with s the size of the subsentence closure of the axioms and the
    goal, both capped by ``KF_MAX_BOUND_CAP``.
    """
    max_prefix: Optional[int] = None
    max_loop: Optional[int] = None
    max_domain: int = DEFAULT_MAX_DOMAIN

    def __post_init__(self):
        if self.max_prefix is not None and self.max_prefix < 0:
            raise ValueError('max_prefix must be at least 0')
        if self.max_loop is not None and self.max_loop < 1:
            raise ValueError('max_loop must be at least 1')
        if self.max_domain < 1:
            raise ValueError('max_domain must be at least 1')

    def resolve(self, closure_size: int) -> Tuple[int, int, int]:
        cap = bound_cap()
        # only the capped value matters
        big = 2 ** min(closure_size, cap.bit_length() + 1)
        max_prefix = self.max_prefix if self.max_prefix is not None else min(big + closure_size, cap)
        max_loop = self.max_loop if self.max_loop is not None else min(big, cap)
        return max_prefix, max_loop, self.max_domain


class Verdict(Enum):
    VALID = 'valid'
    COUNTERMODEL = 'countermodel'
    EXHAUSTED = 'exhausted'
    SATISFIABLE = 'satisfiable'
    UNSATISFIABLE = 'unsatisfiable'


@dataclass(frozen=True)
class OracleVerdict:
    status: Verdict
    model: Optional[LassoModel] = None
    position: Optional[int] = None

    @property
    def has_witness(self) -> bool:
        return self.model is not None


def check_signature(sig: Signature, f: Formula):
    """Raise ``SignatureMismatchError`` unless `f` only uses symbols of `sig`."""
    for g in subformulas(f):
        if not isinstance(g, Atom) or (g.pred == FALSE_PREDICATE and not g.args):
            continue
        arity = sig.arity(g.pred)
        if arity is None:
            raise SignatureMismatchError(f'Predicate {g.pred} is not in the signature')
        if arity != len(g.args):
            raise SignatureMismatchError(f'{g.pred} has arity {arity}, used with {len(g.args)}')
        for t in g.args:
            if isinstance(t, Const) and not sig.is_constant(t.name):
                raise SignatureMismatchError(f'Constant {t.name} is not in the signature')


# Node program -------------------------------------------------------------------

_FALSE, _ATOM, _NOT, _AND, _DIA, _BOX = range(6)


class _Program:
    """Hash-consed ground formula DAG in topological order."""

    def __init__(self):
        self.nodes: List[Tuple[int, int, int]] = []
        self.atoms: List[Tuple[str, Tuple[str, ...]]] = []
        self._index: Dict[Tuple[int, int, int], int] = {}
        self._atom_index: Dict[Tuple[str, Tuple[str, ...]], int] = {}
        self._modal_slots: Optional[Dict[int, int]] = None

    def node(self, op, a=-1, b=-1):
        key = (op, a, b)
        if key not in self._index:
            self._index[key] = len(self.nodes)
            self.nodes.append(key)
        return self._index[key]

    def atom(self, fact):
        if fact not in self._atom_index:
            self._atom_index[fact] = len(self.atoms)
            self.atoms.append(fact)
        return self.node(_ATOM, self._atom_index[fact])

    def disjunction(self, a, b):
        return self.node(_NOT, self.node(_AND, self.node(_NOT, a), self.node(_NOT, b)))

    @property
    def modal_slots(self) -> Dict[int, int]:
        if self._modal_slots is None:
            modal = [i for i, (op, _, _) in enumerate(self.nodes) if op in (_DIA, _BOX)]
            self._modal_slots = {node: slot for slot, node in enumerate(modal)}
        return self._modal_slots

    def valuation_facts(self, valuation):
        return frozenset(fact for k, fact in enumerate(self.atoms) if valuation >> k & 1)

    def loop_columns(self, loop):
        """Truth of every node at every loop world; modal nodes are uniform."""
        width = len(loop)
        columns = []
        for op, a, b in self.nodes:
            if op == _FALSE:
                col = (False,) * width
            elif op == _ATOM:
                col = tuple(bool(v >> a & 1) for v in loop)
            elif op == _NOT:
                col = tuple(not x for x in columns[a])
            elif op == _AND:
                col = tuple(x and y for x, y in zip(columns[a], columns[b]))
            elif op == _DIA:
                col = (any(columns[a]),) * width
            else:
                col = (all(columns[a]),) * width
            columns.append(col)
        return columns

    def state_of(self, values) -> Tuple[bool, ...]:
        return tuple(values[node] for node in self.modal_slots)

    def step(self, valuation, following):
        """Node values at a world placed directly before modal state `following`."""
        slots = self.modal_slots
        values = []
        for i, (op, a, b) in enumerate(self.nodes):
            if op == _FALSE:
                v = False
            elif op == _ATOM:
                v = bool(valuation >> a & 1)
            elif op == _NOT:
                v = not values[a]
            elif op == _AND:
                v = values[a] and values[b]
            elif op == _DIA:
                v = values[a] or following[slots[i]]
            else:
                v = values[a] and following[slots[i]]
            values.append(v)
        return values


def _ground(program, f, env, domain, interpretation, memo):
    key = (f, env)
    if key in memo:
        return memo[key]
    if isinstance(f, Atom):
        if f.pred == FALSE_PREDICATE and not f.args:
            node = program.node(_FALSE)
        else:
            bound = dict(env)
            elements = []
            for t in f.args:
                if isinstance(t, Var):
                    if t.name not in bound:
                        raise ValueError(f'Free variable {t.name}; a sentence is required')
                    elements.append(bound[t.name])
                else:
                    elements.append(interpretation[t.name])
            node = program.atom((f.pred, tuple(elements)))
    elif isinstance(f, Not):
        node = program.node(_NOT, _ground(program, f.body, env, domain, interpretation, memo))
    elif isinstance(f, And):
        node = program.node(_AND,
                            _ground(program, f.left, env, domain, interpretation, memo),
                            _ground(program, f.right, env, domain, interpretation, memo))
    elif isinstance(f, Exists):
        node = None
        for d in domain:
            inner = tuple(p for p in env if p[0] != f.var) + ((f.var, d),)
            g = _ground(program, f.body, inner, domain, interpretation, memo)
            node = g if node is None else program.disjunction(node, g)
    elif isinstance(f, Dia):
        node = program.node(_DIA, _ground(program, f.body, env, domain, interpretation, memo))
    elif isinstance(f, Box):
        node = program.node(_BOX, _ground(program, f.body, env, domain, interpretation, memo))
    else:
        raise TypeError(f'Not a formula: {f!r}')
    memo[key] = node
    return node


def _constant_order(sig, name):
    k = sig.henkin_index(name)
    if k is None:
        return 0, sig.base_constants.index(name), name
    return 1, k, name


def _interpretations(names, size) -> Iterator[Dict[str, int]]:
    """Constant interpretations into ``range(size)`` up to renaming elements."""
    def extend(i, assigned, top):
        if i == len(names):
            yield dict(zip(names, assigned))
            return
        for e in range(min(size, top + 2)):
            yield from extend(i + 1, assigned + (e,), max(top, e))
    yield from extend(0, (), -1)


# Search -------------------------------------------------------------------------

@dataclass
class _Candidate:
    total: int
    prefix: Tuple[int, ...]
    loop: Tuple[int, ...]
    position: int
    program: _Program
    domain: Tuple[str, ...]
    interpretation: Dict[str, str]


@dataclass
class _SearchLog:
    loops: int = 0
    states: int = 0
    truncated: List[str] = field(default_factory=list)


def _analyse(t, f):
    quantified = False
    constants = set()
    for formula in (*t.axioms, f):
        check_signature(t.signature, formula)
        for g in subformulas(formula):
            if isinstance(g, Exists):
                quantified = True
            elif isinstance(g, Atom):
                constants.update(a.name for a in g.args if isinstance(a, Const))
    closure = set()
    for formula in (*t.axioms, f):
        closure |= subsentences(formula)
    return quantified, sorted(constants, key=lambda c: _constant_order(t.signature, c)), len(closure)


def _backward(program, loop_state, axioms, goal, want, limit, log):
    """Breadth-first prefix search in front of a loop with modal state `loop_state`.

    Returns the prefix valuations (front first) of the shortest extension whose
    first world has goal value `want`, and whether the frontier was still
    nonempty when `limit` stopped the search.
    """
    valuations = range(2 ** len(program.atoms))
    frontier = [(loop_state, None)]
    seen = {loop_state}
    depth = 0
    while frontier:
        if depth >= limit:
            return None, True
        depth += 1
        following = []
        for state, chain in frontier:
            for v in valuations:
                values = program.step(v, state)
                if not all(values[a] for a in axioms):
                    continue
                link = (v, chain)
                if values[goal] == want:
                    prefix = []
                    while link is not None:
                        prefix.append(link[0])
                        link = link[1]
                    return tuple(prefix), False
                new = program.state_of(values)
                if new not in seen:
                    seen.add(new)
                    following.append((new, link))
        log.states += len(following)
        frontier = following
    return None, False


def _search(t: Theory, f: Formula, b: SearchBounds, want: bool, assume_bound_complete: bool):
    quantified, constants, closure = _analyse(t, f)
    max_prefix, max_loop, max_domain = b.resolve(closure)
    needed_domain = max(1, len(constants))
    if quantified:
        top_domain = max_domain
    else:
        top_domain = min(max_domain, needed_domain)

    log = _SearchLog()
    best: Optional[_Candidate] = None
    for n in range(1, top_domain + 1):
        if best is not None and n + 1 >= best.total:
            break
        domain = tuple(f'e{i}' for i in range(n))
        for assignment in _interpretations(constants, n):
            interpretation = {c: domain[e] for c, e in assignment.items()}
            program = _Program()
            memo = {}
            axioms = [_ground(program, a, (), domain, interpretation, memo) for a in t.axioms]
            goal = _ground(program, f, (), domain, interpretation, memo)
            valuation_count = 2 ** len(program.atoms)
            needed_loop = min(valuation_count, len(program.modal_slots) + 1)
            top_loop = min(max_loop, needed_loop)
            if top_loop < needed_loop:
                log.truncated.append('loop')
            explored = set()
            for m in range(1, top_loop + 1):
                if best is not None and n + m >= best.total:
                    break
                for loop in itertools.combinations(range(valuation_count), m):
                    log.loops += 1
                    columns = program.loop_columns(loop)
                    if not all(all(columns[a]) for a in axioms):
                        continue
                    hits = [j for j, value in enumerate(columns[goal]) if value == want]
                    if hits:
                        best = _Candidate(n + m, (), loop, hits[0], program, domain, interpretation)
                        break
                    state = program.state_of([col[0] for col in columns])
                    if state in explored:
                        continue
                    explored.add(state)
                    limit = max_prefix
                    if best is not None:
                        limit = min(limit, best.total - n - m - 1)
                    prefix, stopped = _backward(program, state, axioms, goal, want, limit, log)
                    if prefix is not None:
                        best = _Candidate(n + m + len(prefix), prefix, loop, 0, program, domain,
                                          interpretation)
                    elif stopped and limit == max_prefix:
                        log.truncated.append('prefix')
    if quantified and not assume_bound_complete:
        log.truncated.append('domain')
    elif not quantified and max_domain < needed_domain:
        log.truncated.append('domain')
    logger.debug('Searched %d loop sets and %d prefix states for %s; truncated: %s',
                 log.loops, log.states, to_text(f) if closure < 64 else '<large goal>',
                 sorted(set(log.truncated)) or 'no')
    return best, not log.truncated


def _build_model(t: Theory, candidate: _Candidate) -> LassoModel:
    program = candidate.program
    return LassoModel(
        signature=t.signature,
        prefix=tuple(program.valuation_facts(v) for v in candidate.prefix),
        loop=tuple(program.valuation_facts(v) for v in candidate.loop),
        domain=candidate.domain,
        constants=candidate.interpretation,
    )


def _witness(t, f, candidate, want):
    model = _build_model(t, candidate)
    position = 0 if candidate.prefix else model.loop_position(candidate.position)
    if eval_lasso(model, position, f) != want or not all(lasso_global_truth(model, a) for a in t.axioms):
        raise RuntimeError('Search produced a lasso that fails re-evaluation')
    return model, position


def entails_linear(t: Theory, f: Formula, b: Optional[SearchBounds] = None,
                   assume_bound_complete: bool = False) -> OracleVerdict:
    """Decide whether `f` holds at every world of every discrete linear model of `t`.

    Parameters
    ----------
    t : Theory
        Axioms, required at every world.
    f : Formula
        A sentence over the theory's signature, Henkin constants included.
    b : SearchBounds, optional
        Search limits. Default is ``SearchBounds()``.
    assume_bound_complete : bool
        Accept the domain bound as complete for quantified input.

    Returns
    -------
    OracleVerdict
        ``COUNTERMODEL`` with the smallest lasso (prefix + loop + domain) and a
        failing position, ``VALID`` when the search certifies that none exists,
        ``EXHAUSTED`` otherwise.
    """
    b = b or SearchBounds()
    best, complete = _search(t, f, b, False, assume_bound_complete)
    if best is not None:
        model, position = _witness(t, f, best, False)
        return OracleVerdict(Verdict.COUNTERMODEL, model, position)
    return OracleVerdict(Verdict.VALID if complete else Verdict.EXHAUSTED)


def satisfiable_linear(t: Theory, f: Formula, b: Optional[SearchBounds] = None,
                       assume_bound_complete: bool = False) -> OracleVerdict:
    """Dual of ``entails_linear``: find a model of `t` with `f` true somewhere."""
    b = b or SearchBounds()
    best, complete = _search(t, f, b, True, assume_bound_complete)
    if best is not None:
        model, position = _witness(t, f, best, True)
        return OracleVerdict(Verdict.SATISFIABLE, model, position)
    return OracleVerdict(Verdict.UNSATISFIABLE if complete else Verdict.EXHAUSTED)


def is_valid(verdict: OracleVerdict, strict: bool = False) -> bool:
    """Apply the strictness policy to an entailment verdict.

    An exhausted search raises ``OracleExhausted`` in strict mode and is
    otherwise treated as valid with an ``OracleExhaustedWarning``.
    """
    if verdict.status in (Verdict.VALID, Verdict.UNSATISFIABLE):
        return True
    if verdict.status in (Verdict.COUNTERMODEL, Verdict.SATISFIABLE):
        return False
    if strict:
        raise OracleExhausted('Search bounds exhausted without a certificate')
    warnings.warn('Search bounds exhausted; treating the entailment as valid',
                  OracleExhaustedWarning, stacklevel=2)
    return True


# Axiom schemata -----------------------------------------------------------------

def schema_instance(name: str, phi: Formula, psi: Optional[Formula] = None) -> Formula:
    """Instance of one of the schemata T, 4, K, D2, N1.

    K and D2 take two formulas; the others ignore `psi`.
    """
    if name == 'T':
        return Implies(Box(phi), phi)
    if name == '4':
        return Implies(Box(phi), Box(Box(phi)))
    if name in ('K', 'D2') and psi is None:
        raise ValueError(f'Schema {name} needs two formulas')
    if name == 'K':
        return Implies(Box(Implies(phi, psi)), Implies(Box(phi), Box(psi)))
    if name == 'D2':
        return Or(Box(Implies(Box(phi), psi)), Box(Implies(Box(psi), phi)))
    if name == 'N1':
        return Implies(Box(Implies(Box(Implies(phi, Box(phi))), phi)),
                       Implies(Dia(Box(phi)), phi))
    raise ValueError(f'Unknown schema {name!r}; expected one of {", ".join(SCHEMATA)}')


def check_schemata(m: LassoModel,
                   instances: Sequence[Tuple[str, Formula, Optional[Formula]]]) -> pd.DataFrame:
    """Truth table of schema instances over the positions of `m`.

    Returns
    -------
    pd.DataFrame
        One row per instance (indexed by schema name and instance text), one
        boolean column per flat lasso position.
    """
    rows, index = [], []
    for name, phi, psi in instances:
        instance = schema_instance(name, phi, psi)
        rows.append(lasso_truth_vector(m, instance))
        index.append((name, to_text(instance)))
    frame = pd.DataFrame(rows, columns=range(len(m.worlds)), dtype=bool)
    frame.index = pd.MultiIndex.from_tuples(index, names=['schema', 'instance'])
    return frame

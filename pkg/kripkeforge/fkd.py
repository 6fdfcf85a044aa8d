"""Linear finite Kripke diagrams and their representing formulas."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, Optional, Tuple

from kripkeforge.oracle import (
    OracleVerdict,
    SearchBounds,
    Theory,
    entails_linear,
    is_valid,
)
from kripkeforge.semantics import LassoModel, gvquote, lasso_truth_vector
from kripkeforge.syntax import TRUE, Dia, Formula, Not, conjunction, to_text

WitnessMap = Dict[int, int]


@dataclass(frozen=True)
class FKDWorld:
    id: int
    sentences: Tuple[Formula, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'sentences', tuple(self.sentences))
        if len(set(self.sentences)) != len(self.sentences):
            raise ValueError(f'World {self.id} lists a sentence twice')

    def __contains__(self, f):
        return f in self.sentences


@dataclass(frozen=True)
class LinearFKD:
    """A finite chain of worlds w_0 .. w_{p-1} with a relation between
    successor pairs and ``<=``.

    World ids are stable tokens; positions shift when worlds are spliced in.
    """
    worlds: Tuple[FKDWorld, ...] = (FKDWorld(0),)
    relation: FrozenSet[Tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, 'worlds', tuple(self.worlds))
        object.__setattr__(self, 'relation', frozenset((int(i), int(j)) for i, j in self.relation))
        if not self.worlds:
            raise ValueError('An FKD needs at least one world')
        ids = [w.id for w in self.worlds]
        if len(set(ids)) != len(ids):
            raise ValueError('World ids must be distinct')
        for i in range(len(self.worlds) - 1):
            if (i, i + 1) not in self.relation:
                raise ValueError(f'Relation misses the successor pair ({i}, {i + 1})')
        for i, j in self.relation:
            if not 0 <= i <= j < len(self.worlds):
                raise ValueError(f'Pair ({i}, {j}) is not in <= on positions')

    def __len__(self):
        return len(self.worlds)

    def position_of(self, world_id: int) -> int:
        for i, w in enumerate(self.worlds):
            if w.id == world_id:
                return i
        raise KeyError(world_id)

    @property
    def next_id(self) -> int:
        return max(w.id for w in self.worlds) + 1


def representing_formula(d: LinearFKD) -> Formula:
    """Psi^D, built by downward induction from the last world.

    Psi_i is the conjunction of the sentences of w_i (``true`` for an empty
    world) followed by ``<>Psi_j`` for every edge (i, j) with i < j in
    increasing j. Reflexive edges add nothing. Each Psi_j is built once and
    shared.
    """
    psi = [None] * len(d.worlds)
    for i in reversed(range(len(d.worlds))):
        own = list(d.worlds[i].sentences) or [TRUE]
        edges = sorted(j for a, j in d.relation if a == i and j > i)
        psi[i] = conjunction(own + [Dia(psi[j]) for j in edges])
    return psi[0]


def add_sentence(d: LinearFKD, i: int, f: Formula) -> LinearFKD:
    """D + {f in w_i}."""
    if not 0 <= i < len(d.worlds):
        raise IndexError(f'Position {i} is not in the FKD')
    if f in d.worlds[i]:
        return d
    world = d.worlds[i]
    worlds = d.worlds[:i] + (FKDWorld(world.id, world.sentences + (f,)),) + d.worlds[i + 1:]
    return LinearFKD(worlds, d.relation)


def splice_world(d: LinearFKD, i: int) -> LinearFKD:
    """Insert a fresh empty world at position `i`.

    The new relation holds every successor pair plus the image of each old
    pair under the shift ``j -> j + 1`` for ``j >= i``.
    """
    if not 0 <= i <= len(d.worlds):
        raise IndexError(f'Cannot splice at position {i}')

    def shift(j):
        return j if j < i else j + 1

    worlds = d.worlds[:i] + (FKDWorld(d.next_id),) + d.worlds[i:]
    relation = {(a, a + 1) for a in range(len(worlds) - 1)}
    relation.update((shift(a), shift(b)) for a, b in d.relation)
    return LinearFKD(worlds, frozenset(relation))


def consistency_verdict(d: LinearFKD, t: Theory, b: Optional[SearchBounds] = None,
                        assume_bound_complete: bool = False) -> OracleVerdict:
    """Oracle verdict on ``T |= ~Psi^D``; a countermodel witnesses D."""
    return entails_linear(t, Not(representing_formula(d)), b, assume_bound_complete)


def is_T_consistent(d: LinearFKD, t: Theory, b: Optional[SearchBounds] = None,
                    strict: bool = False, assume_bound_complete: bool = False) -> bool:
    """D is T-consistent iff ``~Psi^D`` is not entailed by `t`.

    Parameters
    ----------
    d : LinearFKD
        The diagram.
    t : Theory
        The theory.
    b : SearchBounds, optional
        Oracle bounds.
    strict : bool
        Raise ``OracleExhausted`` instead of treating an exhausted search as
        a proof of inconsistency.
    assume_bound_complete : bool
        Passed through to the oracle.

    Returns
    -------
    bool
    """
    verdict = consistency_verdict(d, t, b, assume_bound_complete)
    return not is_valid(verdict, strict)


def find_witness(d: LinearFKD, m: LassoModel) -> Optional[WitnessMap]:
    """Map each world of `d` to a position of `m` where all its sentences hold.

    The map is non-decreasing along the chain, which is order preservation on
    the relation since it contains every successor pair. Positions are those
    of the unrolled omega-sequence, below ``k + m * (worlds + 1)``. Placing
    each world at the earliest admissible position after its predecessor
    finds a witness whenever any exists.
    """
    limit = m.loop_start + len(m.loop) * (len(d.worlds) + 1)
    vectors = {}
    for world in d.worlds:
        for f in world.sentences:
            if f not in vectors:
                vectors[f] = lasso_truth_vector(m, f)

    witness = {}
    position = 0
    for world in d.worlds:
        while position < limit and not all(vectors[f][m.flat(position)] for f in world.sentences):
            position += 1
        if position >= limit:
            return None
        witness[world.id] = position
    return witness


def to_dot(d: LinearFKD, name: str = 'fkd') -> Iterator[str]:
    yield f'digraph {gvquote(name)} {{\n'
    yield '  rankdir=LR;\n'
    for i, world in enumerate(d.worlds):
        body = ', '.join(to_text(f) for f in world.sentences)
        label = f'{i} (id {world.id}): {{{body}}}'
        yield f'  w{world.id} [shape=box label={gvquote(label)}];\n'
    for i, j in sorted(d.relation):
        if i == j:
            continue
        style = '' if j == i + 1 else ' [style=dashed]'
        yield f'  w{d.worlds[i].id} -> w{d.worlds[j].id}{style};\n'
    yield '}\n'

"""The stage machine building a decidable discrete linear model of a theory,
and truth queries against the model it converges to."""
from __future__ import annotations

import itertools
import logging
import threading
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import pandas as pd

from kripkeforge.fkd import LinearFKD, add_sentence, consistency_verdict, splice_world
from kripkeforge.oracle import SearchBounds, Theory, Verdict, is_valid, satisfiable_linear
from kripkeforge.syntax import (
    Const,
    Dia,
    Exists,
    Formula,
    Not,
    conjunction,
    constants_of,
    enumerate_sentence,
    index_of,
    instantiate,
    pair_schedule,
    to_text,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_PLACEMENT = 'paper'
DEFAULT_APPEND_EVERY = 4
DEFAULT_QUERY_BUDGET = 20000
PLACEMENTS = ('paper', 'conservative')
STABILIZE_MODES = ('exhaustive', 'obligations')
BRANCHES = ('noop', 'append', 'negate', 'exists', 'diamond', 'affirm')


class InconsistentTheory(ValueError):
    pass


class ConstructionError(RuntimeError):
    """A stage could not keep the diagram consistent."""


class QueryBudgetExceeded(RuntimeError):
    pass


class ReplayWarning(UserWarning):
    pass


@dataclass(frozen=True)
class HenkinConfig:
    """Options of a construction run.

    Parameters
    ----------
    placement : {'paper', 'conservative'}
        Candidate order for a diamond stage. 'paper' tries, for each later
        position, a spliced world before the existing one; 'conservative'
        tries existing worlds and the end first and interior splices last.
    append_every : int
        Every `append_every`-th no-op stage appends an empty world.
    strict : bool
        Raise ``OracleExhausted`` instead of treating exhaustion as validity.
    assume_bound_complete : bool
        Let the oracle certify validity for quantified input.
    stabilize : {'exhaustive', 'obligations'}
        How much a query decides before answering.
    query_budget : int
        Maximum number of demand stages a single query may run.
    """
    placement: str = DEFAULT_PLACEMENT
    append_every: int = DEFAULT_APPEND_EVERY
    strict: bool = False
    assume_bound_complete: bool = False
    stabilize: str = 'exhaustive'
    query_budget: int = DEFAULT_QUERY_BUDGET

    def __post_init__(self):
        if self.placement not in PLACEMENTS:
            raise ValueError(f'placement must be one of {PLACEMENTS}')
        if self.stabilize not in STABILIZE_MODES:
            raise ValueError(f'stabilize must be one of {STABILIZE_MODES}')
        if self.append_every < 1:
            raise ValueError('append_every must be at least 1')
        if self.query_budget < 1:
            raise ValueError('query_budget must be at least 1')


@dataclass(frozen=True)
class StageRecord:
    """One executed stage; enough to re-apply it without the oracle."""
    step: int
    stage: int
    i: int
    e: int
    world_id: int
    sentence: str
    branch: str
    candidate: int = -1
    henkin: str = ''
    verdicts: Tuple[str, ...] = ()
    forced: bool = False
    worlds: int = 1
    placement: str = DEFAULT_PLACEMENT
    append_every: int = DEFAULT_APPEND_EVERY
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, 'verdicts', tuple(self.verdicts))
        if self.branch not in BRANCHES:
            raise ValueError(f'Unknown branch {self.branch!r}')


@dataclass(frozen=True)
class ConstructionState:
    theory: Theory
    bounds: SearchBounds
    config: HenkinConfig
    fkd: LinearFKD = field(default_factory=LinearFKD)
    stage: int = 0
    steps: int = 0
    decided: Dict[Tuple[int, int], bool] = field(default_factory=dict)
    next_henkin: int = 0
    noops: int = 0
    moves: Dict[int, int] = field(default_factory=dict)
    trace: Tuple[StageRecord, ...] = ()

    @property
    def signature(self):
        return self.theory.signature


def init(t: Theory, b: Optional[SearchBounds] = None,
         config: Optional[HenkinConfig] = None) -> ConstructionState:
    """Stage -1: one empty world, empty relation.

    Raises ``InconsistentTheory`` unless the theory has a discrete linear model
    within the bounds.
    """
    b = b or SearchBounds()
    config = config or HenkinConfig()
    verdict = satisfiable_linear(t, conjunction(t.axioms), b, config.assume_bound_complete)
    if verdict.status != Verdict.SATISFIABLE:
        if verdict.status == Verdict.EXHAUSTED:
            is_valid(verdict, config.strict)
        raise InconsistentTheory('The theory has no discrete linear model within the search bounds')
    state = ConstructionState(t, b, config)
    return replace(state, next_henkin=_next_henkin(state.next_henkin, t.axioms, t.signature))


def _next_henkin(current, sentences: Iterable[Formula], sig) -> int:
    for f in sentences:
        for name in constants_of(f):
            k = sig.henkin_index(name)
            if k is not None:
                current = max(current, k + 1)
    return current


def _candidates(d: LinearFKD, i: int, theta: Formula, placement: str) -> Iterator[LinearFKD]:
    """The diagrams a diamond stage tries, in order."""
    yield add_sentence(d, i, theta)
    later = range(i + 1, len(d.worlds))
    if placement == 'paper':
        for k in later:
            yield add_sentence(splice_world(d, k), k, theta)
            yield add_sentence(d, k, theta)
    else:
        for k in later:
            yield add_sentence(d, k, theta)
    end = len(d.worlds)
    yield add_sentence(splice_world(d, end), end, theta)
    if placement == 'conservative':
        for k in later:
            yield add_sentence(splice_world(d, k), k, theta)


def _check(s: ConstructionState, d: LinearFKD, verdicts: List[str]) -> bool:
    verdict = consistency_verdict(d, s.theory, s.bounds, s.config.assume_bound_complete)
    verdicts.append(verdict.status.value)
    return not is_valid(verdict, s.config.strict)


def _decide(s: ConstructionState, i: int, e: int):
    """Pick the branch of stage (i, e); the only place the oracle is consulted."""
    d = s.fkd
    if i >= len(d.worlds) or (d.worlds[i].id, e) in s.decided:
        branch = 'append' if (s.noops + 1) % s.config.append_every == 0 else 'noop'
        return branch, -1, '', []

    phi = enumerate_sentence(s.signature, e)
    world = d.worlds[i]
    verdicts = []
    if phi in world:
        verdicts.append('present')
        refuted = False
    elif Not(phi) in world or (isinstance(phi, Not) and phi.body in world):
        verdicts.append('refuted')
        refuted = True
    else:
        refuted = not _check(s, add_sentence(d, i, phi), verdicts)
    if refuted:
        return 'negate', -1, '', verdicts

    if isinstance(phi, Exists):
        k = _next_henkin(s.next_henkin, [phi], s.signature)
        return 'exists', -1, s.signature.henkin_name(k), verdicts

    if isinstance(phi, Dia):
        base = add_sentence(d, i, phi)
        for index, candidate in enumerate(_candidates(base, i, phi.body, s.config.placement)):
            if index == 0 and phi.body in world:
                verdicts.append('present')
                return 'diamond', 0, '', verdicts
            if _check(s, candidate, verdicts):
                return 'diamond', index, '', verdicts
        raise ConstructionError(f'No placement of {to_text(phi.body)} keeps the diagram consistent')

    return 'affirm', -1, '', verdicts


def _apply(s: ConstructionState, i: int, e: int, branch: str, candidate: int = -1,
           henkin: str = '', verdicts: Sequence[str] = (), forced: bool = False,
           sentence: Optional[str] = None) -> ConstructionState:
    d = s.fkd
    world_id = d.worlds[i].id if i < len(d.worlds) else -1
    noops = s.noops
    decided = s.decided
    added = []
    phi = None

    if branch in ('noop', 'append'):
        if not forced:
            noops += 1
        if branch == 'append':
            d = splice_world(d, len(d.worlds))
    else:
        phi = enumerate_sentence(s.signature, e)
        if sentence is not None and sentence != to_text(phi):
            raise ValueError(f'Stage {s.steps} names {sentence!r} but index {e} is {to_text(phi)!r}')
        if branch == 'negate':
            added = [Not(phi)]
        elif branch == 'exists':
            added = [phi, _instantiate_witness(phi, henkin)]
        else:
            added = [phi]
        for f in added:
            d = add_sentence(d, i, f)
        if branch == 'diamond':
            d = next(itertools.islice(_candidates(d, i, phi.body, s.config.placement), candidate, None))
        decided = {**decided, (world_id, e): branch != 'negate'}

    moves = _count_moves(s.fkd, d, s.moves)
    record = StageRecord(
        step=s.steps,
        stage=s.stage,
        i=i,
        e=e,
        world_id=world_id,
        sentence=to_text(phi) if phi is not None else '',
        branch=branch,
        candidate=candidate,
        henkin=henkin,
        verdicts=tuple(verdicts),
        forced=forced,
        worlds=len(d.worlds),
        placement=s.config.placement,
        append_every=s.config.append_every,
    )
    logger.debug('Step %d (stage %d, i=%d, e=%d): %s', s.steps, s.stage, i, e, branch)
    return replace(
        s,
        fkd=d,
        stage=s.stage if forced else s.stage + 1,
        steps=s.steps + 1,
        decided=decided,
        next_henkin=_next_henkin(s.next_henkin, added, s.signature),
        noops=noops,
        moves=moves,
        trace=s.trace + (record,),
    )


def _instantiate_witness(phi: Exists, henkin: str) -> Formula:
    return instantiate(phi.body, phi.var, Const(henkin))


def _count_moves(before: LinearFKD, after: LinearFKD, moves):
    if before is after:
        return moves
    old = {w.id: p for p, w in enumerate(before.worlds)}
    shifted = [w.id for p, w in enumerate(after.worlds) if w.id in old and old[w.id] != p]
    if not shifted:
        return moves
    moves = dict(moves)
    for world_id in shifted:
        moves[world_id] = moves.get(world_id, 0) + 1
    return moves


def _execute(s: ConstructionState, i: int, e: int, forced: bool = False) -> ConstructionState:
    branch, candidate, henkin, verdicts = _decide(s, i, e)
    return _apply(s, i, e, branch, candidate, henkin, verdicts, forced)


def step(s: ConstructionState) -> ConstructionState:
    """Execute the scheduled stage ``pair_schedule(s.stage)``."""
    i, e = pair_schedule(s.stage)
    return _execute(s, i, e)


def run(t: Theory, stages: int, b: Optional[SearchBounds] = None,
        config: Optional[HenkinConfig] = None) -> Tuple[ConstructionState, List[StageRecord]]:
    """Run `stages` scheduled stages from the initial diagram.

    Returns
    -------
    tuple
        The final state and its trace.
    """
    if stages < 0:
        raise ValueError('Stage count must be non-negative')
    state = init(t, b, config)
    for _ in range(stages):
        state = step(state)
    logger.info('Ran %d stages: %d worlds, %d decided pairs',
                stages, len(state.fkd.worlds), len(state.decided))
    return state, list(state.trace)


def replay(t: Theory, records: Iterable[StageRecord], b: Optional[SearchBounds] = None,
           config: Optional[HenkinConfig] = None) -> ConstructionState:
    """Rebuild a state from a trace without consulting the oracle.

    Records written under a different placement or append period are applied
    as recorded, with a ``ReplayWarning``.
    """
    config = config or HenkinConfig()
    state = ConstructionState(t, b or SearchBounds(), config)
    state = replace(state, next_henkin=_next_henkin(0, t.axioms, t.signature))
    warned = False
    for record in records:
        if not warned and (record.placement, record.append_every) != (config.placement,
                                                                      config.append_every):
            warnings.warn('Trace was produced with different construction flags', ReplayWarning,
                          stacklevel=2)
            warned = True
        if record.step != state.steps:
            raise ValueError(f'Trace record {record.step} is out of order')
        state = _apply(state, record.i, record.e, record.branch, record.candidate, record.henkin,
                       record.verdicts, record.forced, record.sentence or None)
    return state


def trace_frame(trace: Sequence[StageRecord]) -> pd.DataFrame:
    """The trace as a table, one row per stage."""
    columns = [f.name for f in StageRecord.__dataclass_fields__.values()]
    return pd.DataFrame([asdict(r) for r in trace], columns=columns)


# The constructed model ------------------------------------------------------------

class ConstructedModel:
    """The limit model presented through queries.

    Worlds are addressed by final position; the domain is the Henkin pool and
    accessibility is ``<=`` on positions. Queries extend a shared stage cache
    while holding ``lock``, so answers are linearizable; callers that read
    ``state`` and ``pins`` together take the same lock.
    """

    def __init__(self, state: ConstructionState):
        self.state = state
        self.pins: Dict[int, int] = {}
        self.lock = threading.Lock()

    @property
    def fkd(self) -> LinearFKD:
        return self.state.fkd

    @property
    def trace(self) -> List[StageRecord]:
        return list(self.state.trace)

    def domain_element(self, k: int) -> str:
        return self.state.signature.henkin_name(k)

    def in_domain(self, name: str) -> bool:
        return self.state.signature.henkin_index(name) is not None


def accessible(m: ConstructedModel, i: int, j: int) -> bool:
    return i <= j


def _pending(s: ConstructionState, i: int, e: int, pins) -> Optional[Tuple[int, int]]:
    d = s.fkd
    top = min(i, len(d.worlds) - 1)
    if s.config.stabilize == 'exhaustive':
        for ip in range(top + 1):
            for ep in range(e + 1):
                if (d.worlds[ip].id, ep) not in s.decided:
                    return ip, ep
        return None
    for ip in range(top):
        for f in d.worlds[ip].sentences:
            if isinstance(f, Dia):
                ep = index_of(s.signature, f)
                if (d.worlds[ip].id, ep) not in s.decided:
                    return ip, ep
    target = d.worlds[d.position_of(pins[i])] if i in pins else d.worlds[i]
    if (target.id, e) not in s.decided:
        return d.position_of(target.id), e
    return None


def query_truth(m: ConstructedModel, i: int, f: Formula) -> bool:
    """Truth of sentence `f` at the world with final position `i`.

    Runs demand stages until the queried pair and everything it depends on is
    decided, then answers whether the sentence was added. The first answered
    query at `i` pins the world there; later queries at `i` read that world.

    Raises
    ------
    QueryBudgetExceeded
        If more than ``config.query_budget`` demand stages would be needed.
    """
    if i < 0:
        raise IndexError(f'Position {i} is negative')
    e = index_of(m.state.signature, f)
    with m.lock:
        s = m.state
        spent = 0
        budget = s.config.query_budget

        def spend():
            nonlocal spent
            spent += 1
            if spent > budget:
                m.state = s
                raise QueryBudgetExceeded(f'Query at {i} needed more than {budget} stages')

        while len(s.fkd.worlds) <= i:
            spend()
            s = _apply(s, len(s.fkd.worlds), 0, 'append', forced=True)
        while True:
            pair = _pending(s, i, e, m.pins)
            if pair is None:
                break
            spend()
            s = _execute(s, pair[0], pair[1], forced=True)
        world_id = m.pins.setdefault(i, s.fkd.worlds[i].id)
        if (world_id, e) not in s.decided:
            spend()
            s = _execute(s, s.fkd.position_of(world_id), e, forced=True)
        m.state = s
        logger.info('Query %s at %d answered after %d demand stages', to_text(f), i, spent)
        return s.decided[(world_id, e)]

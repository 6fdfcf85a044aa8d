"""JSON document formats and the JSON-lines stage trace."""
import json
import os
import re
from contextlib import nullcontext
from dataclasses import asdict, fields
from typing import Iterable, List

import pandas as pd
from filelock import FileLock
from jsonschema import Draft7Validator

from kripkeforge.fkd import FKDWorld, LinearFKD
from kripkeforge.henkin import SCHEMA_VERSION, BRANCHES, StageRecord
from kripkeforge.oracle import OracleVerdict, Theory
from kripkeforge.semantics import KripkeModel, LassoModel, fact_text
from kripkeforge.syntax import Signature, parse, to_text

_FACT_RE = re.compile(r'^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\(([^()]*)\))?\s*$')

SIGNATURE_SCHEMA = {
    'type': 'object',
    'properties': {
        'predicates': {
            'type': 'array',
            'items': {
                'type': 'object',
                'properties': {
                    'name': {'type': 'string'},
                    'arity': {'type': 'integer', 'minimum': 0},
                },
                'required': ['name', 'arity'],
            },
        },
        'constants': {'type': 'array', 'items': {'type': 'string'}},
        'henkin_prefix': {'type': 'string'},
    },
    'required': ['predicates'],
}

THEORY_SCHEMA = {
    'type': 'object',
    'properties': {
        'signature': SIGNATURE_SCHEMA,
        'axioms': {'type': 'array', 'items': {'type': 'string'}},
    },
    'required': ['signature'],
}

_WORLD_LIST = {
    'type': 'array',
    'items': {
        'type': 'object',
        'properties': {'facts': {'type': 'array', 'items': {'type': 'string'}}},
        'required': ['facts'],
    },
}

LASSO_SCHEMA = {
    'type': 'object',
    'properties': {
        'prefix': _WORLD_LIST,
        'loop': dict(_WORLD_LIST, minItems=1),
        'domain': {'type': 'array', 'items': {'type': 'string'}, 'minItems': 1},
        'constants': {'type': 'object', 'additionalProperties': {'type': 'string'}},
    },
    'required': ['prefix', 'loop'],
}

KRIPKE_SCHEMA = {
    'type': 'object',
    'properties': {
        'worlds': dict(_WORLD_LIST, minItems=1),
        'access': {
            'type': 'array',
            'items': {'type': 'array', 'items': {'type': 'integer'}, 'minItems': 2, 'maxItems': 2},
        },
        'domain': {'type': 'array', 'items': {'type': 'string'}, 'minItems': 1},
        'constants': {'type': 'object', 'additionalProperties': {'type': 'string'}},
    },
    'required': ['worlds', 'access'],
}

FKD_SCHEMA = {
    'type': 'object',
    'properties': {
        'worlds': {
            'type': 'array',
            'minItems': 1,
            'items': {
                'type': 'object',
                'properties': {
                    'id': {'type': 'integer', 'minimum': 0},
                    'sentences': {'type': 'array', 'items': {'type': 'string'}},
                },
                'required': ['id', 'sentences'],
            },
        },
        'relation': {
            'type': 'array',
            'items': {'type': 'array', 'items': {'type': 'integer'}, 'minItems': 2, 'maxItems': 2},
        },
    },
    'required': ['worlds', 'relation'],
}

TRACE_RECORD_SCHEMA = {
    'type': 'object',
    'properties': {
        'step': {'type': 'integer', 'minimum': 0},
        'stage': {'type': 'integer', 'minimum': 0},
        'i': {'type': 'integer', 'minimum': 0},
        'e': {'type': 'integer', 'minimum': 0},
        'world_id': {'type': 'integer', 'minimum': -1},
        'sentence': {'type': 'string'},
        'branch': {'enum': list(BRANCHES)},
        'candidate': {'type': 'integer', 'minimum': -1},
        'henkin': {'type': 'string'},
        'verdicts': {'type': 'array', 'items': {'type': 'string'}},
        'forced': {'type': 'boolean'},
        'worlds': {'type': 'integer', 'minimum': 1},
        'placement': {'type': 'string'},
        'append_every': {'type': 'integer', 'minimum': 1},
        'schema_version': {'const': SCHEMA_VERSION},
    },
    'required': [f.name for f in fields(StageRecord)],
    'additionalProperties': False,
}


class DocumentError(ValueError):
    """A JSON document does not have the expected shape."""


class TraceSchemaError(DocumentError):
    pass


def _validate(document, schema, what, error=DocumentError):
    errors = sorted(Draft7Validator(schema).iter_errors(document), key=lambda e: list(e.path))
    if errors:
        location = '/'.join(str(p) for p in errors[0].path) or '<root>'
        raise error(f'Invalid {what} at {location}: {errors[0].message}')


def read_json(path):
    with open(path, 'r') as f:
        return json.load(f)


def write_json(document, path, overwrite=False):
    """Write `document` to `path`.

    Raises
    ------
    FileExistsError
        If the file exists and `overwrite` is False.
    """
    if os.path.exists(path) and not overwrite:
        raise FileExistsError(f'{path} already exists')
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(document, f, indent=2)
        f.write('\n')


# Signatures and theories ----------------------------------------------------------

def signature_to_dict(sig: Signature) -> dict:
    return {
        'predicates': [{'name': name, 'arity': arity} for name, arity in sig.predicates],
        'constants': list(sig.base_constants),
        'henkin_prefix': sig.henkin_prefix,
    }


def signature_from_dict(data: dict) -> Signature:
    _validate(data, SIGNATURE_SCHEMA, 'signature')
    predicates = [(p['name'], p['arity']) for p in data['predicates']]
    return Signature(predicates, data.get('constants', ()), data.get('henkin_prefix', 'c'))


def theory_to_dict(t: Theory) -> dict:
    return {
        'schema_version': SCHEMA_VERSION,
        'signature': signature_to_dict(t.signature),
        'axioms': [to_text(a) for a in t.axioms],
    }


def theory_from_dict(data: dict) -> Theory:
    _validate(data, THEORY_SCHEMA, 'theory')
    sig = signature_from_dict(data['signature'])
    return Theory(sig, tuple(parse(a, sig) for a in data.get('axioms', ())))


def load_theory(path) -> Theory:
    return theory_from_dict(read_json(path))


# Models -----------------------------------------------------------------------------

def parse_fact(text: str):
    """``'P(a,b)'`` -> ``('P', ('a', 'b'))``; ``'p'`` -> ``('p', ())``."""
    match = _FACT_RE.match(text)
    if match is None:
        raise DocumentError(f'Cannot read fact {text!r}')
    name, args = match.groups()
    if args is None:
        return name, ()
    return name, tuple(a.strip() for a in args.split(',') if a.strip())


def _world_to_dict(world):
    return {'facts': sorted(fact_text(f) for f in world)}


def _world_from_dict(world):
    return frozenset(parse_fact(f) for f in world['facts'])


def lasso_to_dict(m: LassoModel) -> dict:
    return {
        'prefix': [_world_to_dict(w) for w in m.prefix],
        'loop': [_world_to_dict(w) for w in m.loop],
        'domain': list(m.domain),
        'constants': dict(m.constants),
    }


def lasso_from_dict(sig: Signature, data: dict) -> LassoModel:
    _validate(data, LASSO_SCHEMA, 'lasso')
    return LassoModel(
        signature=sig,
        prefix=tuple(_world_from_dict(w) for w in data['prefix']),
        loop=tuple(_world_from_dict(w) for w in data['loop']),
        domain=tuple(data.get('domain', ('e0',))),
        constants=data.get('constants', {}),
    )


def kripke_from_dict(sig: Signature, data: dict) -> KripkeModel:
    _validate(data, KRIPKE_SCHEMA, 'Kripke model')
    return KripkeModel(
        signature=sig,
        worlds=tuple(_world_from_dict(w) for w in data['worlds']),
        access=frozenset(tuple(pair) for pair in data['access']),
        domain=tuple(data.get('domain', ('e0',))),
        constants=data.get('constants', {}),
    )


def verdict_to_dict(verdict: OracleVerdict) -> dict:
    return {
        'schema_version': SCHEMA_VERSION,
        'status': verdict.status.value,
        'position': verdict.position,
        'model': lasso_to_dict(verdict.model) if verdict.model is not None else None,
    }


# Diagrams -----------------------------------------------------------------------------

def fkd_to_dict(d: LinearFKD) -> dict:
    return {
        'schema_version': SCHEMA_VERSION,
        'worlds': [{'id': w.id, 'sentences': [to_text(f) for f in w.sentences]} for w in d.worlds],
        'relation': [list(pair) for pair in sorted(d.relation)],
    }


def fkd_from_dict(sig: Signature, data: dict) -> LinearFKD:
    _validate(data, FKD_SCHEMA, 'FKD')
    worlds = tuple(FKDWorld(w['id'], tuple(parse(s, sig) for s in w['sentences']))
                   for w in data['worlds'])
    return LinearFKD(worlds, frozenset(tuple(pair) for pair in data['relation']))


# Trace ---------------------------------------------------------------------------------

def trace_lock(path) -> FileLock:
    """The inter-process lock guarding the trace at `path`.

    Hold it across a whole read, extend and append cycle, and pass
    ``lock=False`` to the trace functions called inside it.
    """
    return FileLock(f'{path}.lock')


def _maybe_locked(path, lock):
    return trace_lock(path) if lock else nullcontext()


def append_trace(records: Iterable[StageRecord], path, lock=True):
    """Append stage records to a JSON-lines trace.

    Parameters
    ----------
    records : iterable of StageRecord
    path : str
    lock : bool, optional
        Take the trace lock for the write; False when the caller holds it.
    """
    records = list(records)
    if not records:
        return
    columns = [f.name for f in fields(StageRecord)]
    frame = pd.DataFrame([asdict(r) for r in records], columns=columns, dtype=object)
    text = frame.to_json(orient='records', lines=True)
    if not text.endswith('\n'):
        text += '\n'
    with _maybe_locked(path, lock):
        with open(path, 'a') as f:
            f.write(text)


def write_trace(records: Iterable[StageRecord], path, overwrite=False):
    if os.path.exists(path):
        if not overwrite:
            raise FileExistsError(f'{path} already exists')
        with trace_lock(path):
            os.remove(path)
    append_trace(records, path)


def read_trace(path, lock=True) -> List[StageRecord]:
    """Read and validate a trace written by ``append_trace``.

    Raises
    ------
    TraceSchemaError
        If a record does not match the trace schema.
    """
    with _maybe_locked(path, lock):
        if os.path.getsize(path) == 0:
            return []
        frame = pd.read_json(path, lines=True, orient='records', dtype=False,
                             convert_dates=False, keep_default_dates=False)
    records = []
    for n, row in enumerate(frame.to_dict(orient='records')):
        _validate(row, TRACE_RECORD_SCHEMA, f'trace record {n}', TraceSchemaError)
        records.append(StageRecord(**row))
    return records

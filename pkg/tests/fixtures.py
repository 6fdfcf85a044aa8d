import json

from hypothesis import strategies as st

from kripkeforge.semantics import LassoModel
from kripkeforge.syntax import FALSE, And, Atom, Box, Dia, Not, Signature, parse

SIG_PQ = Signature([('p', 0), ('q', 0)])
SIG_P = Signature([('p', 0)])
SIG_PQR = Signature([('p', 0), ('q', 0), ('r', 0)])
SIG_FO = Signature([('P', 1), ('p', 0)], ['a'])

ENUMERATION_VERSION = 1
GOLDEN_PREFIX_PQ = [
    'p', 'q', 'false',
    '~p', '~q', 'true',
    '<>p', '<>q', '<>false',
    '[]p', '[]q', '[]false',
]

EMPTY_THEORY_PQ = {
    'signature': {'predicates': [{'name': 'p', 'arity': 0}, {'name': 'q', 'arity': 0}]},
    'axioms': [],
}
BOX_P_THEORY = {
    'signature': {'predicates': [{'name': 'p', 'arity': 0}, {'name': 'q', 'arity': 0}]},
    'axioms': ['[]p'],
}
INCONSISTENT_THEORY = {
    'signature': {'predicates': [{'name': 'p', 'arity': 0}]},
    'axioms': ['p & ~p'],
}


def f(text, sig=SIG_PQR):
    return parse(text, sig)


def _fs_read_file(file_path):
    with open(file_path, 'r') as fh:
        return fh.read()


def _write_json(file_path, document):
    with open(file_path, 'w') as fh:
        json.dump(document, fh)


def formulas(atoms=('p', 'q'), max_leaves=8):
    """Hypothesis strategy for propositional modal formulas over `atoms`."""
    leaves = st.sampled_from([Atom(a, ()) for a in atoms] + [FALSE])
    return st.recursive(
        leaves,
        lambda children: st.one_of(
            children.map(Not),
            children.map(Dia),
            children.map(Box),
            st.tuples(children, children).map(lambda pair: And(*pair)),
        ),
        max_leaves=max_leaves,
    )


def lassos(sig, atoms, max_prefix=4, max_loop=3):
    """Hypothesis strategy for lassos whose worlds are sets of `atoms`."""
    worlds = st.frozensets(st.sampled_from(list(atoms)))
    return st.builds(
        lambda prefix, loop: LassoModel(sig, tuple(prefix), tuple(loop)),
        st.lists(worlds, max_size=max_prefix),
        st.lists(worlds, min_size=1, max_size=max_loop),
    )

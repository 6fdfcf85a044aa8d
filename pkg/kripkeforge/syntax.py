"""Formula syntax: the core modal AST, the ASCII grammar, the printer and the
computable sentence enumeration used to schedule the Henkin construction.

The core AST has exactly six node kinds (``Atom``, ``Not``, ``And``,
``Exists``, ``Dia``, ``Box``). ``Or``, ``Implies``, ``Forall``, ``TRUE`` and
``FALSE`` are constructors that expand into the core at build time, so the
parser never produces anything else.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields
from functools import lru_cache
from typing import Dict, FrozenSet, Iterator, Optional, Set, Tuple, Union

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedEOF, UnexpectedInput, VisitError

RESERVED_WORDS = frozenset({'true', 'false', 'exists', 'forall'})
FALSE_PREDICATE = 'false'
BOUND_VARIABLE_PREFIX = 'x'
_NAME_RE = re.compile(r'^[A-Za-z_][A-Za-z0-9_]*$')
_BOUND_VARIABLE_RE = re.compile(r'^x\d+$')


class FormulaSyntaxError(ValueError):
    """Raised when a formula text does not match the grammar."""

    def __init__(self, message, offset):
        super().__init__(f'{message} at offset {offset}')
        self.offset = offset


class UnknownSymbolError(ValueError):
    pass


class ArityError(ValueError):
    pass


@dataclass(frozen=True)
class Signature:
    """A first-order modal signature plus the name scheme of the Henkin pool.

    Parameters
    ----------
    predicates : sequence of (str, int)
        Predicate names with their arities. Arity-0 predicates are the
        propositional atoms.
    base_constants : sequence of str
        Constant symbols of the base language.
    henkin_prefix : str, optional
        Prefix of the countable Henkin constant pool ``c0, c1, ...``.
        Default is 'c'.
    """
    predicates: Tuple[Tuple[str, int], ...] = ()
    base_constants: Tuple[str, ...] = ()
    henkin_prefix: str = 'c'

    def __post_init__(self):
        predicates = tuple((str(name), int(arity)) for name, arity in self.predicates)
        object.__setattr__(self, 'predicates', predicates)
        object.__setattr__(self, 'base_constants', tuple(self.base_constants))
        self._validate()

    def _validate(self):
        if not _NAME_RE.match(self.henkin_prefix):
            raise ValueError(f'Invalid Henkin prefix {self.henkin_prefix!r}')
        seen = set()
        for name, arity in self.predicates:
            if arity < 0:
                raise ValueError(f'Predicate {name} has negative arity')
            self._check_name(name, seen)
        for name in self.base_constants:
            self._check_name(name, seen)
            if _BOUND_VARIABLE_RE.match(name):
                raise ValueError(f'Constant {name} collides with bound variable names')

    def _check_name(self, name, seen):
        if not _NAME_RE.match(name) or name in RESERVED_WORDS:
            raise ValueError(f'Invalid symbol name {name!r}')
        if name in seen:
            raise ValueError(f'Symbol {name} is declared twice')
        if self.henkin_index(name) is not None:
            raise ValueError(f'Symbol {name} collides with the Henkin pool')
        seen.add(name)

    def arity(self, name) -> Optional[int]:
        for pred, arity in self.predicates:
            if pred == name:
                return arity
        return None

    def henkin_name(self, k: int) -> str:
        return f'{self.henkin_prefix}{k}'

    def henkin_index(self, name) -> Optional[int]:
        rest = name[len(self.henkin_prefix):]
        if name.startswith(self.henkin_prefix) and rest.isdigit():
            if rest == '0' or not rest.startswith('0'):
                return int(rest)
        return None

    def is_constant(self, name) -> bool:
        return name in self.base_constants or self.henkin_index(name) is not None

    @property
    def is_propositional(self) -> bool:
        return all(arity == 0 for _, arity in self.predicates)


# Terms ------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self):
        return self.name


Term = Union[Var, Const]


# Formulas ---------------------------------------------------------------------

class Formula:
    def __str__(self):
        return to_text(self)


def _formula_hash(self):
    # Representing formulas share subterms, so the structural hash is memoised
    try:
        return self.__dict__['_hash']
    except KeyError:
        h = hash((type(self).__name__,) + tuple(getattr(self, f.name) for f in fields(self)))
        object.__setattr__(self, '_hash', h)
        return h


@dataclass(frozen=True)
class Atom(Formula):
    pred: str
    args: Tuple[Term, ...] = ()
    __hash__ = _formula_hash


@dataclass(frozen=True)
class Not(Formula):
    body: Formula
    __hash__ = _formula_hash


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula
    __hash__ = _formula_hash


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula
    __hash__ = _formula_hash


@dataclass(frozen=True)
class Dia(Formula):
    body: Formula
    __hash__ = _formula_hash


@dataclass(frozen=True)
class Box(Formula):
    body: Formula
    __hash__ = _formula_hash


FALSE = Atom(FALSE_PREDICATE, ())
TRUE = Not(FALSE)


def Or(left, right):
    return Not(And(Not(left), Not(right)))


def Implies(left, right):
    return Not(And(left, Not(right)))


def Forall(var, body):
    return Not(Exists(var, Not(body)))


def conjunction(formulas):
    """Left-nested conjunction of `formulas`; ``TRUE`` when empty."""
    result = None
    for f in formulas:
        result = f if result is None else And(result, f)
    return TRUE if result is None else result


# Structural helpers -------------------------------------------------------------

def free_variables(f: Formula) -> FrozenSet[str]:
    if isinstance(f, Atom):
        return frozenset(t.name for t in f.args if isinstance(t, Var))
    if isinstance(f, And):
        return free_variables(f.left) | free_variables(f.right)
    if isinstance(f, Exists):
        return free_variables(f.body) - {f.var}
    return free_variables(f.body)


def is_sentence(f: Formula) -> bool:
    return not free_variables(f)


def instantiate(f: Formula, var: str, term: Term) -> Formula:
    """Replace the free occurrences of `var` in `f` by `term`.

    Only constants are ever substituted during the construction, so no
    variable capture can occur; a binder of the same name shadows `var`.
    """
    if isinstance(f, Atom):
        args = tuple(term if isinstance(t, Var) and t.name == var else t for t in f.args)
        return Atom(f.pred, args)
    if isinstance(f, And):
        return And(instantiate(f.left, var, term), instantiate(f.right, var, term))
    if isinstance(f, Exists):
        if f.var == var:
            return f
        return Exists(f.var, instantiate(f.body, var, term))
    return type(f)(instantiate(f.body, var, term))


def size(f: Formula) -> int:
    """Number of formula nodes in `f`."""
    if isinstance(f, Atom):
        return 1
    if isinstance(f, And):
        return 1 + size(f.left) + size(f.right)
    return 1 + size(f.body)


def modal_depth(f: Formula) -> int:
    if isinstance(f, Atom):
        return 0
    if isinstance(f, And):
        return max(modal_depth(f.left), modal_depth(f.right))
    if isinstance(f, (Dia, Box)):
        return 1 + modal_depth(f.body)
    return modal_depth(f.body)


def constants_of(f: Formula) -> Set[str]:
    if isinstance(f, Atom):
        return {t.name for t in f.args if isinstance(t, Const)}
    if isinstance(f, And):
        return constants_of(f.left) | constants_of(f.right)
    return constants_of(f.body)


def predicates_of(f: Formula) -> Set[Tuple[str, int]]:
    if isinstance(f, Atom):
        return {(f.pred, len(f.args))}
    if isinstance(f, And):
        return predicates_of(f.left) | predicates_of(f.right)
    return predicates_of(f.body)


def has_quantifier(f: Formula) -> bool:
    if isinstance(f, Exists):
        return True
    if isinstance(f, Atom):
        return False
    if isinstance(f, And):
        return has_quantifier(f.left) or has_quantifier(f.right)
    return has_quantifier(f.body)


def subformulas(f: Formula) -> Iterator[Formula]:
    """Each distinct subformula of `f` once, outermost first."""
    seen = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if g in seen:
            continue
        seen.add(g)
        yield g
        if isinstance(g, And):
            stack.extend((g.right, g.left))
        elif not isinstance(g, Atom):
            stack.append(g.body)


def subsentences(f: Formula) -> Set[Formula]:
    """Subformulas of `f` closed under single negation.

    Parameters
    ----------
    f : Formula
        A sentence.

    Returns
    -------
    set of Formula
        Every subformula ``g`` of `f` together with ``~g``; the size is at most
        twice the node count of `f`.
    """
    closure = set()
    for g in subformulas(f):
        closure.add(g)
        closure.add(Not(g))
    return closure


def normalize(f: Formula) -> Formula:
    """Canonical form used by the enumeration.

    Bound variables are renamed ``x0, x1, ...`` by binder depth and vacuous
    quantifiers are dropped. Both steps preserve truth in every model with a
    nonempty domain.
    """
    return _normalize(f, {}, 0)


def _normalize(f, renaming, depth):
    if isinstance(f, Atom):
        args = tuple(Var(renaming[t.name]) if isinstance(t, Var) and t.name in renaming else t
                     for t in f.args)
        return Atom(f.pred, args)
    if isinstance(f, And):
        return And(_normalize(f.left, renaming, depth), _normalize(f.right, renaming, depth))
    if isinstance(f, Exists):
        if f.var not in free_variables(f.body):
            return _normalize(f.body, renaming, depth)
        name = _bound_name(depth)
        inner = dict(renaming)
        inner[f.var] = name
        return Exists(name, _normalize(f.body, inner, depth + 1))
    return type(f)(_normalize(f.body, renaming, depth))


def _bound_name(depth):
    return f'{BOUND_VARIABLE_PREFIX}{depth}'


# Grammar ----------------------------------------------------------------------

FORMULA_GRAMMAR = r"""
    ?start: implication

    ?implication: disjunction
                | disjunction "->" implication      -> implies
                | quantified

    ?quantified: "exists" NAME "." implication       -> exists
               | "forall" NAME "." implication       -> forall

    ?disjunction: conjunction
                | disjunction "|" conjunction       -> or_

    ?conjunction: unary
                | conjunction "&" unary             -> and_

    ?unary: "~" unary                               -> not_
          | BOX unary                               -> box
          | DIA unary                               -> dia
          | primary

    ?primary: "true"                                -> true
            | "false"                               -> false
            | NAME "(" NAME ("," NAME)* ")"         -> predication
            | NAME                                  -> proposition
            | "(" implication ")"

    BOX: "[]" | "□"
    DIA: "<>" | "◇"
    NAME: /[A-Za-z_][A-Za-z0-9_]*/

    %import common.WS
    %ignore WS
"""

_PARSER = Lark(FORMULA_GRAMMAR, parser='lalr')


@v_args(inline=True)
class _FormulaBuilder(Transformer):
    """Builds the core AST with every term as a ``Const`` placeholder.

    Names bound by a quantifier are turned into variables afterwards by
    ``_resolve``, which sees the whole tree.
    """

    def implies(self, left, right):
        return Implies(left, right)

    def exists(self, name, body):
        return Exists(str(name), body)

    def forall(self, name, body):
        return Forall(str(name), body)

    def or_(self, left, right):
        return Or(left, right)

    def and_(self, left, right):
        return And(left, right)

    def not_(self, body):
        return Not(body)

    def box(self, _op, body):
        return Box(body)

    def dia(self, _op, body):
        return Dia(body)

    def true(self):
        return TRUE

    def false(self):
        return FALSE

    def predication(self, name, *args):
        return Atom(str(name), tuple(Const(str(a)) for a in args))

    def proposition(self, name):
        return Atom(str(name), ())


def parse(text: str, sig: Signature) -> Formula:
    """Parse `text` into a core formula over `sig`.

    Parameters
    ----------
    text : str
        Formula in the ASCII grammar. The Unicode symbols for the two modal
        operators are accepted as aliases of ``<>`` and ``[]``.
    sig : Signature
        Signature the formula must be written in.

    Returns
    -------
    Formula
        The core AST; derived connectives are already expanded.

    Raises
    ------
    FormulaSyntaxError
        If `text` is not in the grammar; ``offset`` is a UTF-8 byte offset.
    UnknownSymbolError
        If a predicate or constant is not part of `sig`.
    ArityError
        If a predicate is applied to the wrong number of terms.
    """
    try:
        tree = _PARSER.parse(text)
        raw = _FormulaBuilder().transform(tree)
    except UnexpectedInput as exc:
        raise FormulaSyntaxError('Syntax error', _error_offset(text, exc)) from None
    except VisitError as exc:
        raise exc.orig_exc
    return _resolve(raw, sig, frozenset())


def _error_offset(text, exc):
    token = getattr(exc, 'token', None)
    if isinstance(exc, UnexpectedEOF) or (token is not None and token.type == '$END'):
        char_offset = len(text)
    else:
        char_offset = exc.pos_in_stream
    return len(text[:char_offset].encode('utf-8'))


def _resolve(f, sig, bound):
    if isinstance(f, Atom):
        if f.pred == FALSE_PREDICATE and not f.args:
            return f
        arity = sig.arity(f.pred)
        if arity is None:
            raise UnknownSymbolError(f'Unknown predicate {f.pred}')
        if arity != len(f.args):
            raise ArityError(f'{f.pred} expects {arity} arguments, got {len(f.args)}')
        args = []
        for term in f.args:
            if term.name in bound:
                args.append(Var(term.name))
            elif sig.is_constant(term.name):
                args.append(term)
            else:
                raise UnknownSymbolError(f'Unknown constant {term.name}')
        return Atom(f.pred, tuple(args))
    if isinstance(f, And):
        return And(_resolve(f.left, sig, bound), _resolve(f.right, sig, bound))
    if isinstance(f, Exists):
        return Exists(f.var, _resolve(f.body, sig, bound | {f.var}))
    return type(f)(_resolve(f.body, sig, bound))


# Printer ------------------------------------------------------------------------

_QUANTIFIER_LEVEL = 0
_CONJUNCTION_LEVEL = 3
_UNARY_LEVEL = 4


def to_text(f: Formula, parens: bool = False) -> str:
    """Print `f` in the canonical ASCII grammar.

    The printer never rewrites: ``Not(Not(p))`` prints as ``~~p``. With
    ``parens=True`` every conjunction and quantifier is parenthesised.
    """
    return _to_text(f, _QUANTIFIER_LEVEL, parens)


def _to_text(f, level, parens):
    if isinstance(f, Atom):
        if not f.args:
            return f.pred
        return f'{f.pred}({",".join(t.name for t in f.args)})'
    if isinstance(f, Not):
        if f.body == FALSE:
            return 'true'
        return '~' + _to_text(f.body, _UNARY_LEVEL, parens)
    if isinstance(f, Dia):
        return '<>' + _to_text(f.body, _UNARY_LEVEL, parens)
    if isinstance(f, Box):
        return '[]' + _to_text(f.body, _UNARY_LEVEL, parens)
    if isinstance(f, And):
        text = (_to_text(f.left, _CONJUNCTION_LEVEL, parens) + ' & '
                + _to_text(f.right, _UNARY_LEVEL, parens))
        needs_parens = parens or level > _CONJUNCTION_LEVEL
        return f'({text})' if needs_parens else text
    text = f'exists {f.var}. ' + _to_text(f.body, _QUANTIFIER_LEVEL, parens)
    needs_parens = parens or level > _QUANTIFIER_LEVEL
    return f'({text})' if needs_parens else text


# Enumeration ------------------------------------------------------------------

def weight(f: Formula, sig: Signature) -> int:
    """Enumeration weight: node count, with Henkin constant ``c_k`` weighing k + 1."""
    if isinstance(f, Atom):
        return 1 + sum(_term_weight(t, sig) for t in f.args)
    if isinstance(f, And):
        return 1 + weight(f.left, sig) + weight(f.right, sig)
    return 1 + weight(f.body, sig)


def _term_weight(term, sig):
    if isinstance(term, Const):
        k = sig.henkin_index(term.name)
        if k is not None:
            return k + 1
    return 1


def _terms_of_weight(sig, term_weight, depth):
    terms = []
    if term_weight == 1:
        terms.extend(Var(_bound_name(d)) for d in range(depth))
        terms.extend(Const(c) for c in sig.base_constants)
    terms.append(Const(sig.henkin_name(term_weight - 1)))
    return terms


def _argument_tuples(sig, arity, total, depth):
    if arity == 0:
        if total == 0:
            yield ()
        return
    for first in range(1, total - arity + 2):
        for term in _terms_of_weight(sig, first, depth):
            for rest in _argument_tuples(sig, arity - 1, total - first, depth):
                yield (term,) + rest


def _atoms_of_weight(sig, target, depth):
    for name, arity in sig.predicates:
        if arity == 0:
            if target == 1:
                yield Atom(name, ())
        elif target - 1 >= arity:
            for args in _argument_tuples(sig, arity, target - 1, depth):
                yield Atom(name, args)
    if target == 1:
        yield FALSE


@lru_cache(maxsize=None)
def _weight_class(sig, target, depth):
    """All normal formulas of weight `target` whose free variables are among
    the first `depth` bound-variable names, in enumeration order: atoms,
    negations, diamonds, boxes, conjunctions (by left weight), existentials."""
    out = list(_atoms_of_weight(sig, target, depth))
    if target >= 2:
        smaller = _weight_class(sig, target - 1, depth)
        out.extend(Not(f) for f in smaller)
        out.extend(Dia(f) for f in smaller)
        out.extend(Box(f) for f in smaller)
    for left_weight in range(1, target - 1):
        right_weight = target - 1 - left_weight
        for left in _weight_class(sig, left_weight, depth):
            for right in _weight_class(sig, right_weight, depth):
                out.append(And(left, right))
    if target >= 2 and not sig.is_propositional:
        name = _bound_name(depth)
        out.extend(Exists(name, f) for f in _weight_class(sig, target - 1, depth + 1)
                   if name in free_variables(f))
    return tuple(out)


@lru_cache(maxsize=None)
def _class_positions(sig, target) -> Dict[Formula, int]:
    return {f: i for i, f in enumerate(_weight_class(sig, target, 0))}


def enumerate_sentence(sig: Signature, e: int) -> Formula:
    """Return the `e`-th sentence over `sig` and its Henkin pool.

    Sentences are ordered by weight and, within a weight, by the fixed
    generation order of ``_weight_class``. The map is a deterministic
    bijection from the naturals onto normal sentences, hence a surjection
    onto all sentences up to ``normalize``.
    """
    if e < 0:
        raise ValueError('Sentence index must be non-negative')
    target = 1
    while True:
        sentences = _weight_class(sig, target, 0)
        if e < len(sentences):
            return sentences[e]
        e -= len(sentences)
        target += 1


def index_of(sig: Signature, f: Formula) -> int:
    """Inverse of ``enumerate_sentence`` up to ``normalize``."""
    if not is_sentence(f):
        raise ValueError(f'{to_text(f)} is not a sentence')
    g = normalize(f)
    target = weight(g, sig)
    offset = sum(len(_weight_class(sig, w, 0)) for w in range(1, target))
    try:
        return offset + _class_positions(sig, target)[g]
    except KeyError:
        raise UnknownSymbolError(f'{to_text(f)} is not a sentence over the signature') from None


def sentence_count(sig: Signature, max_weight: int) -> int:
    """Number of enumerated sentences of weight at most `max_weight`."""
    return sum(len(_weight_class(sig, w, 0)) for w in range(1, max_weight + 1))


# Stage schedule ----------------------------------------------------------------

def cantor_pair(x: int, y: int) -> int:
    return (x + y) * (x + y + 1) // 2 + y


def cantor_unpair(z: int) -> Tuple[int, int]:
    w = (math.isqrt(8 * z + 1) - 1) // 2
    y = z - w * (w + 1) // 2
    return w - y, y


def pair_schedule(n: int) -> Tuple[int, int]:
    """Stage `n` of the construction works on world `i` and sentence `e`.

    Unpairs `n` into (m, k) and `m` into (i, e), ignoring `k`; every pair
    (i, e) is therefore hit once for each k, i.e. infinitely often.
    """
    m, _ = cantor_unpair(n)
    return cantor_unpair(m)

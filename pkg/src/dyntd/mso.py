"""Monadic second-order logic over graphs: vertex and vertex-set quantifiers,
the ``edge`` relation, equality, membership and the two constants ``a``, ``b``.

Concrete syntax::

    formula := exists x . formula | forall x . formula
             | existsS X . formula | forallS X . formula
             | formula and formula | formula or formula | formula -> formula
             | not formula | ( formula ) | atom
    atom    := edge(t, t) | t = t | t in X

Lowercase identifiers are vertex variables, capitalised ones are set
variables, ``a`` and ``b`` are constants. Precedence is
``not > and > or > ->`` and quantifier bodies extend as far right as possible.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Union

from .errors import (
    InvalidDepth,
    MsoSyntaxError,
    SortError,
    TooLarge,
    UnassignedConstant,
    UnboundVariable,
)
from .graph import DynamicGraph, VertexId

CONSTANTS = ("a", "b")
DEFAULT_CAP = 16


# -- syntax tree -------------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    x: str
    y: str


@dataclass(frozen=True)
class Eq:
    x: str
    y: str


@dataclass(frozen=True)
class In:
    x: str
    s: str


@dataclass(frozen=True)
class Not:
    f: "Formula"


@dataclass(frozen=True)
class And:
    l: "Formula"
    r: "Formula"


@dataclass(frozen=True)
class Or:
    l: "Formula"
    r: "Formula"


@dataclass(frozen=True)
class Implies:
    l: "Formula"
    r: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ExistsS:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ForallS:
    var: str
    body: "Formula"


Formula = Union[Edge, Eq, In, Not, And, Or, Implies, Exists, Forall, ExistsS, ForallS]
_QUANT = (Exists, Forall, ExistsS, ForallS)
_BINARY = {And: "and", Or: "or", Implies: "->"}
_QNAME = {Exists: "exists", Forall: "forall", ExistsS: "existsS", ForallS: "forallS"}


def is_set_var(name: str) -> bool:
    return name[:1].isupper()


# -- printing ----------------------------------------------------------------


def to_text(f: Formula) -> str:
    """Fully parenthesised rendering; ``parse(to_text(f)) == f``."""
    if isinstance(f, Edge):
        return f"edge({f.x}, {f.y})"
    if isinstance(f, Eq):
        return f"{f.x} = {f.y}"
    if isinstance(f, In):
        return f"{f.x} in {f.s}"
    if isinstance(f, Not):
        return f"not {_operand(f.f)}"
    if type(f) in _BINARY:
        return f"({_operand(f.l)} {_BINARY[type(f)]} {_operand(f.r)})"
    return f"({_QNAME[type(f)]} {f.var} . {to_text(f.body)})"


def _operand(f: Formula) -> str:
    if isinstance(f, (Eq, In)):
        return f"({to_text(f)})"
    return to_text(f)


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(r"->|[A-Za-z_][A-Za-z0-9_]*|[().,=]")
_KEYWORDS = {"exists", "forall", "existsS", "forallS", "and", "or", "not", "in", "edge"}


def _tokenize(text: str) -> list[tuple[str, int]]:
    out = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m:
            raise MsoSyntaxError(f"unexpected character {text[pos]!r}", pos)
        out.append((m.group(0), pos))
        pos = m.end()
    out.append(("<end>", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> str:
        return self.toks[self.i][0]

    def pos(self) -> int:
        return self.toks[self.i][1]

    def take(self, expected: Optional[str] = None) -> str:
        tok = self.peek()
        if expected is not None and tok != expected:
            raise MsoSyntaxError(f"expected {expected!r}, found {tok!r}", self.pos())
        self.i += 1
        return tok

    def ident(self) -> str:
        tok = self.peek()
        if tok in _KEYWORDS or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            raise MsoSyntaxError(f"expected identifier, found {tok!r}", self.pos())
        self.i += 1
        return tok

    def formula(self) -> Formula:
        left = self.disjunction()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.formula())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.peek() == "or":
            self.take()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.unary()
        while self.peek() == "and":
            self.take()
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        if tok == "not":
            self.take()
            return Not(self.unary())
        if tok in ("exists", "forall", "existsS", "forallS"):
            self.take()
            at = self.pos()
            var = self.ident()
            if var in CONSTANTS:
                raise MsoSyntaxError("constants cannot be bound", at)
            if tok.endswith("S") and not is_set_var(var):
                raise SortError(f"{tok} needs a set variable, got {var!r}")
            if is_set_var(var):
                tok = tok.rstrip("S") + "S"  # plain exists/forall over a capitalised name
            self.take(".")
            body = self.formula()
            cls = {"exists": Exists, "forall": Forall, "existsS": ExistsS, "forallS": ForallS}[tok]
            return cls(var, body)
        if tok == "(":
            self.take()
            f = self.formula()
            self.take(")")
            return f
        return self.atom()

    def term(self) -> str:
        name = self.ident()
        if is_set_var(name):
            raise SortError(f"set variable {name!r} used as a vertex term")
        return name

    def atom(self) -> Formula:
        if self.peek() == "edge":
            self.take()
            self.take("(")
            x = self.term()
            self.take(",")
            y = self.term()
            self.take(")")
            return Edge(x, y)
        x = self.term()
        if self.peek() == "=":
            self.take()
            return Eq(x, self.term())
        if self.peek() == "in":
            self.take()
            s = self.ident()
            if not is_set_var(s):
                raise SortError(f"{s!r} is not a set variable")
            return In(x, s)
        raise MsoSyntaxError(f"expected '=' or 'in', found {self.peek()!r}", self.pos())


def parse(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    if p.peek() != "<end>":
        raise MsoSyntaxError(f"trailing input {p.peek()!r}", p.pos())
    check_bound(f)
    return f


def check_bound(f: Formula) -> None:
    """Raise UnboundVariable if anything other than a, b occurs free."""
    free = free_vars(f) - set(CONSTANTS)
    if free:
        raise UnboundVariable(f"unbound: {', '.join(sorted(free))}")


# -- structural helpers ------------------------------------------------------


def free_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, (Edge, Eq)):
        return frozenset((f.x, f.y))
    if isinstance(f, In):
        return frozenset((f.x, f.s))
    if isinstance(f, Not):
        return free_vars(f.f)
    if type(f) in _BINARY:
        return free_vars(f.l) | free_vars(f.r)
    return free_vars(f.body) - {f.var}


def constants_used(f: Formula) -> set[str]:
    return set(free_vars(f)) & set(CONSTANTS)


def quantifier_rank(f: Formula) -> int:
    if isinstance(f, (Edge, Eq, In)):
        return 0
    if isinstance(f, Not):
        return quantifier_rank(f.f)
    if type(f) in _BINARY:
        return max(quantifier_rank(f.l), quantifier_rank(f.r))
    return 1 + quantifier_rank(f.body)


def conj(*parts: Formula) -> Formula:
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def _conjuncts(f: Formula) -> list[Formula]:
    if isinstance(f, And):
        return _conjuncts(f.l) + _conjuncts(f.r)
    return [f]


# -- evaluation --------------------------------------------------------------

Env = dict
Fn = Callable[[Env, "_Ctx"], bool]


class _Ctx:
    __slots__ = ("n", "nbr", "memo", "full")

    def __init__(self, n: int, nbr: list[int]):
        self.n = n
        self.nbr = nbr
        self.full = (1 << n) - 1
        self.memo: dict = {}


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _submasks(mask: int):
    s = mask
    while True:
        yield s
        if s == 0:
            return
        s = (s - 1) & mask


class _Compiler:
    """Turns a formula into nested closures over bitmask sets.

    Quantifiers whose body starts with a membership guard only range over the
    guarded set; every quantifier node is memoised on its free variables.
    """

    def __init__(self):
        self.counter = 0

    def compile(self, f: Formula) -> Fn:
        if isinstance(f, Edge):
            x, y = f.x, f.y
            return lambda env, ctx: bool(ctx.nbr[env[x]] >> env[y] & 1)
        if isinstance(f, Eq):
            x, y = f.x, f.y
            return lambda env, ctx: env[x] == env[y]
        if isinstance(f, In):
            x, s = f.x, f.s
            return lambda env, ctx: bool(env[s] >> env[x] & 1)
        if isinstance(f, Not):
            g = self.compile(f.f)
            return lambda env, ctx: not g(env, ctx)
        if isinstance(f, And):
            l, r = self.compile(f.l), self.compile(f.r)
            return lambda env, ctx: l(env, ctx) and r(env, ctx)
        if isinstance(f, Or):
            l, r = self.compile(f.l), self.compile(f.r)
            return lambda env, ctx: l(env, ctx) or r(env, ctx)
        if isinstance(f, Implies):
            l, r = self.compile(f.l), self.compile(f.r)
            return lambda env, ctx: (not l(env, ctx)) or r(env, ctx)
        return self._memoised(f, self._quantifier(f))

    def _memoised(self, f: Formula, fn: Fn) -> Fn:
        self.counter += 1
        tag = self.counter
        fv = tuple(sorted(free_vars(f)))

        def run(env, ctx):
            key = (tag,) + tuple(env[v] for v in fv)
            got = ctx.memo.get(key)
            if got is None:
                got = fn(env, ctx)
                ctx.memo[key] = got
            return got

        return run

    def _split(self, var: str, parts: list[Formula]):
        """Find a guard conjunct restricting ``var``; return (range_fn, rest)."""
        for i, p in enumerate(parts):
            rest = parts[:i] + parts[i + 1:]
            if not is_set_var(var) and isinstance(p, In) and p.x == var and p.s != var:
                s = p.s
                return (lambda env, ctx: _bits(env[s])), rest
            if (is_set_var(var) and isinstance(p, Forall) and isinstance(p.body, Implies)
                    and p.body.l == In(p.var, var) and var not in free_vars(p.body.r)):
                y = p.var
                chi = self.compile(p.body.r)

                def rng(env, ctx, y=y, chi=chi):
                    saved = env.get(y)
                    allowed = 0
                    for i in range(ctx.n):
                        env[y] = i
                        if chi(env, ctx):
                            allowed |= 1 << i
                    env[y] = saved
                    return _submasks(allowed)

                return rng, rest
        if is_set_var(var):
            return (lambda env, ctx: _submasks(ctx.full)), parts
        return (lambda env, ctx: range(ctx.n)), parts

    def _quantifier(self, f: Formula) -> Fn:
        var = f.var
        existential = isinstance(f, (Exists, ExistsS))
        if existential:
            parts = _conjuncts(f.body)
            rng, rest = self._split(var, parts)
            body = self.compile(conj(*rest)) if rest else None
        else:
            if isinstance(f.body, Implies):
                parts = _conjuncts(f.body.l)
                rng, rest = self._split(var, parts)
                body = self.compile(Implies(conj(*rest), f.body.r) if rest else f.body.r)
            else:
                rng = self._split(var, [])[0]
                body = self.compile(f.body)

        if existential:
            def run(env, ctx):
                saved = env.get(var)
                try:
                    for val in rng(env, ctx):
                        env[var] = val
                        if body is None or body(env, ctx):
                            return True
                    return False
                finally:
                    env[var] = saved
        else:
            def run(env, ctx):
                saved = env.get(var)
                try:
                    for val in rng(env, ctx):
                        env[var] = val
                        if not body(env, ctx):
                            return False
                    return True
                finally:
                    env[var] = saved
        return run


_compiled: dict[int, tuple[Formula, Fn]] = {}


def _compile(f: Formula) -> Fn:
    hit = _compiled.get(id(f))
    if hit is not None and hit[0] is f:
        return hit[1]
    fn = _Compiler().compile(f)
    if len(_compiled) > 4096:
        _compiled.clear()
    _compiled[id(f)] = (f, fn)
    return fn


@dataclass(frozen=True)
class ConstantAssignment:
    a: Optional[VertexId] = None
    b: Optional[VertexId] = None


def evaluate(
    graph: DynamicGraph,
    f: Formula,
    consts: Optional[ConstantAssignment] = None,
    assignment: Optional[Mapping[str, object]] = None,
    cap: int = DEFAULT_CAP,
) -> bool:
    """Brute-force satisfaction. ``assignment`` binds extra free variables
    (vertex ids, or iterables of ids for set variables)."""
    ids = graph.vertices()
    if len(ids) > cap:
        raise TooLarge(f"{len(ids)} vertices exceeds evaluation cap {cap}")
    index = {v: i for i, v in enumerate(ids)}
    nbr = [0] * len(ids)
    for u, v in graph.edges():
        nbr[index[u]] |= 1 << index[v]
        nbr[index[v]] |= 1 << index[u]
    env: dict = {}
    consts = consts or ConstantAssignment()
    for name in CONSTANTS:
        val = getattr(consts, name)
        if val is not None:
            if val not in index:
                raise ValueError(f"constant {name} refers to absent vertex {val}")
            env[name] = index[val]
    for name, val in (assignment or {}).items():
        if is_set_var(name):
            env[name] = sum(1 << index[x] for x in val)
        else:
            env[name] = index[val]
    missing = free_vars(f) - set(env)
    unassigned = missing & set(CONSTANTS)
    if unassigned:
        raise UnassignedConstant(", ".join(sorted(unassigned)))
    if missing:
        raise UnboundVariable(", ".join(sorted(missing)))
    return _compile(f)(env, _Ctx(len(ids), nbr))


# -- the connectivity and tree-depth formulas --------------------------------


def _adjacent(u: str, w: str, prime: bool) -> Formula:
    e: Formula = Edge(u, w)
    if prime:
        e = Or(Or(e, And(Eq(u, "a"), Eq(w, "b"))), And(Eq(u, "b"), Eq(w, "a")))
    return e


def _connected_within(scope: Optional[str], tag: str, prime: bool) -> Formula:
    X, x, y, z, u, w = (f"X{tag}", f"x{tag}", f"y{tag}", f"z{tag}", f"u{tag}", f"w{tag}")
    if scope is None:
        return ForallS(X, Implies(
            And(Exists(x, In(x, X)), Exists(y, Not(In(y, X)))),
            Exists(u, Exists(w, conj(In(u, X), Not(In(w, X)), _adjacent(u, w, prime)))),
        ))
    return ForallS(X, Implies(
        conj(Forall(z, Implies(In(z, X), In(z, scope))),
             Exists(x, In(x, X)),
             Exists(y, And(In(y, scope), Not(In(y, X))))),
        Exists(u, And(In(u, X), Exists(w, conj(In(w, scope), Not(In(w, X)), _adjacent(u, w, prime))))),
    ))


def build_gamma() -> Formula:
    return _connected_within(None, "_g", False)


def build_gamma_prime() -> Formula:
    return _connected_within(None, "_g", True)


def _at_most_one(scope: Optional[str], tag: str) -> Formula:
    x, y = f"x{tag}", f"y{tag}"
    if scope is None:
        return Forall(x, Forall(y, Eq(x, y)))
    return Forall(x, Implies(In(x, scope), Forall(y, Implies(In(y, scope), Eq(x, y)))))


def _tau_within(d: int, scope: Optional[str], prime: bool, root: Optional[str] = None) -> Formula:
    """td of the structure (or of ``scope``) is at most ``d``.

    With ``root`` given the outer choice of top vertex is left free under that name.
    """
    if d == 1:
        if root is not None:
            x = f"x_t{d}"
            if scope is None:
                return Forall(x, Eq(x, root))
            return And(In(root, scope), Forall(x, Implies(In(x, scope), Eq(x, root))))
        return _at_most_one(scope, f"_t{d}")
    v = root or f"v_t{d}"
    C, y, x = f"C_t{d}", f"y_t{d}", f"x_t{d}"
    allowed: Formula = Not(Eq(y, v))
    if scope is not None:
        allowed = And(In(y, scope), allowed)
    inner = ForallS(C, Implies(
        conj(Forall(y, Implies(In(y, C), allowed)),
             Exists(x, In(x, C)),
             _connected_within(C, f"_t{d}", prime)),
        _tau_within(d - 1, C, prime),
    ))
    if root is not None:
        return inner if scope is None else And(In(root, scope), inner)
    if scope is None:
        return Exists(v, inner)
    return Exists(v, And(In(v, scope), inner))


def build_tau(d: int) -> Formula:
    if d < 1:
        raise InvalidDepth(d)
    return _tau_within(d, None, False)


def build_tau_prime(d: int) -> Formula:
    if d < 1:
        raise InvalidDepth(d)
    return _tau_within(d, None, True)


ROOT_VAR = "root"


def build_tau_prime_rooted(d: int) -> Formula:
    """Body of tau'_d with the outer vertex left free as ``root``."""
    if d < 1:
        raise InvalidDepth(d)
    return _tau_within(d, None, True, root=ROOT_VAR)

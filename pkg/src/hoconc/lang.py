"""User language: syntax tree, parser and printer.

Surface syntax::

    (inputs (x number) (f function))
    (main <expr>)

    expr ::= int | ident
           | (lambda (ident) expr) | (let ((ident expr)) expr)
           | (cond (expr expr) ... (else expr)) | (if expr expr expr)
           | (op expr ...) | (error) | (expr expr)
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from .sexpr import Atom, Pos, ReadError, SList, read_all


class PrimOp(enum.Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    NUM_EQ = "="
    LE = "<="
    LT = "<"
    NOT = "not"
    IS_PROCEDURE = "procedure?"
    IS_INTEGER = "integer?"

    @property
    def arity(self) -> int:
        return 1 if self in _UNARY else 2

    @property
    def is_predicate(self) -> bool:
        return self in (PrimOp.IS_PROCEDURE, PrimOp.IS_INTEGER)


_UNARY = frozenset({PrimOp.NOT, PrimOp.IS_PROCEDURE, PrimOp.IS_INTEGER})
_OPS = {op.value: op for op in PrimOp}


class Sort(enum.Enum):
    NUMBER = "number"
    FUNCTION = "function"


# --- expressions -----------------------------------------------------------


class Expr:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class IntLit(Expr):
    value: int
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class InputVar(Expr):
    name: str
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Lambda(Expr):
    param: str
    body: Expr
    pos: Pos | None = field(default=None, compare=False, repr=False)
    # lexically free Var names; closures capture exactly these
    free: frozenset = field(default=frozenset(), init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "free", frozenset(_free_vars(self.body) - {self.param}))


@dataclass(frozen=True, slots=True)
class App(Expr):
    fn: Expr
    arg: Expr
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Let(Expr):
    bound: str
    rhs: Expr
    body: Expr
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Cond(Expr):
    clauses: tuple  # of (test, body) pairs
    else_body: Expr
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Prim(Expr):
    op: PrimOp
    args: tuple
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Error(Expr):
    pos: Pos | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Program:
    inputs: tuple  # of (name, Sort)
    main: Expr

    @property
    def input_names(self) -> tuple:
        return tuple(name for name, _ in self.inputs)

    def sort_of(self, name: str) -> Sort:
        return dict(self.inputs)[name]


def _free_vars(e: Expr) -> set:
    match e:
        case Var(name):
            return {name}
        case Lambda():
            return set(e.free)
        case App(fn, arg):
            return _free_vars(fn) | _free_vars(arg)
        case Let(bound, rhs, body):
            return _free_vars(rhs) | (_free_vars(body) - {bound})
        case Cond(clauses, else_body):
            out = _free_vars(else_body)
            for test, body in clauses:
                out |= _free_vars(test) | _free_vars(body)
            return out
        case Prim(_, args):
            out = set()
            for a in args:
                out |= _free_vars(a)
            return out
    return set()


def free_inputs(e: Expr) -> frozenset:
    """Names of the InputVar nodes occurring in ``e``."""
    out = set()
    stack = [e]
    while stack:
        node = stack.pop()
        match node:
            case InputVar(name):
                out.add(name)
            case Lambda(_, body):
                stack.append(body)
            case App(fn, arg):
                stack += [fn, arg]
            case Let(_, rhs, body):
                stack += [rhs, body]
            case Cond(clauses, else_body):
                stack.append(else_body)
                for test, body in clauses:
                    stack += [test, body]
            case Prim(_, args):
                stack += list(args)
    return frozenset(out)


# --- parsing ---------------------------------------------------------------


class ParseError(Exception):
    def __init__(self, message: str, pos: Pos | None = None):
        self.message = message
        self.pos = pos
        where = f"{pos.line}:{pos.col}: " if pos else ""
        super().__init__(where + message)


class ScopeError(ParseError):
    pass


KEYWORDS = frozenset({"lambda", "let", "cond", "if", "else", "error", "inputs", "main"}) | _OPS.keys()
_INT = re.compile(r"-?\d+\Z")


def parse_program(text: str) -> Program:
    try:
        data = read_all(text)
    except ReadError as exc:
        raise ParseError(exc.message, exc.pos) from None
    if len(data) != 2:
        raise ParseError(f"expected (inputs ...) (main ...), found {len(data)} top-level forms")
    header, main = data
    inputs = _parse_inputs(header)
    if not (isinstance(main, SList) and len(main.items) == 2 and _head(main) == "main"):
        raise ParseError("expected (main <expr>)", main.pos)
    body = _parse_top(_ExprParser({name for name, _ in inputs}), main.items[1])
    return Program(tuple(inputs), body)


def parse_expr(text: str, inputs=()) -> Expr:
    """Parse a single expression; ``inputs`` names the allowed input variables."""
    try:
        data = read_all(text)
    except ReadError as exc:
        raise ParseError(exc.message, exc.pos) from None
    if len(data) != 1:
        raise ParseError("expected exactly one expression")
    return _parse_top(_ExprParser(set(inputs)), data[0])


def _parse_top(parser, node) -> Expr:
    try:
        return parser.parse(node, frozenset())
    except RecursionError:
        raise ParseError("expression nested too deeply", node.pos) from None


def _head(node) -> str | None:
    if isinstance(node, SList) and node.items and isinstance(node.items[0], Atom):
        return node.items[0].text
    return None


def _parse_inputs(node) -> list:
    if _head(node) != "inputs":
        raise ParseError("expected (inputs ...)", node.pos)
    out, seen = [], set()
    for decl in node.items[1:]:
        if not (isinstance(decl, SList) and len(decl.items) == 2 and all(isinstance(x, Atom) for x in decl.items)):
            raise ParseError("input declaration must be (name number|function)", decl.pos)
        name, sort = decl.items[0].text, decl.items[1].text
        _check_ident(name, decl.items[0].pos)
        if sort not in ("number", "function"):
            raise ParseError(f"unknown input sort {sort!r}", decl.items[1].pos)
        if name in seen:
            raise ParseError(f"duplicate input {name!r}", decl.pos)
        seen.add(name)
        out.append((name, Sort(sort)))
    return out


def _check_ident(name: str, pos: Pos) -> None:
    if name in KEYWORDS or _INT.match(name):
        raise ParseError(f"{name!r} is not a valid identifier", pos)


class _ExprParser:
    def __init__(self, inputs: set):
        self.inputs = inputs

    def _bind(self, atom, scope: frozenset) -> str:
        if not isinstance(atom, Atom):
            raise ParseError("expected an identifier", atom.pos)
        _check_ident(atom.text, atom.pos)
        if atom.text in self.inputs:
            raise ScopeError(f"binder {atom.text!r} shadows an input", atom.pos)
        return atom.text

    def parse(self, node, scope: frozenset) -> Expr:
        if isinstance(node, Atom):
            text = node.text
            if _INT.match(text):
                return IntLit(int(text), node.pos)
            if text in KEYWORDS:
                raise ParseError(f"unexpected keyword {text!r}", node.pos)
            if text in scope:
                return Var(text, node.pos)
            if text in self.inputs:
                return InputVar(text, node.pos)
            raise ScopeError(f"unbound variable {text!r}", node.pos)

        items = node.items
        if not items:
            raise ParseError("empty application", node.pos)
        head = _head(node)
        pos = node.pos
        if head == "lambda":
            if len(items) != 3 or not isinstance(items[1], SList) or len(items[1].items) != 1:
                raise ParseError("expected (lambda (x) body)", pos)
            param = self._bind(items[1].items[0], scope)
            return Lambda(param, self.parse(items[2], scope | {param}), pos)
        if head == "let":
            if (
                len(items) != 3
                or not isinstance(items[1], SList)
                or len(items[1].items) != 1
                or not isinstance(items[1].items[0], SList)
                or len(items[1].items[0].items) != 2
            ):
                raise ParseError("expected (let ((x rhs)) body)", pos)
            name_node, rhs_node = items[1].items[0].items
            name = self._bind(name_node, scope)
            rhs = self.parse(rhs_node, scope)
            return Let(name, rhs, self.parse(items[2], scope | {name}), pos)
        if head == "if":
            if len(items) != 4:
                raise ParseError("expected (if test then else)", pos)
            test, then, other = (self.parse(x, scope) for x in items[1:])
            return Cond(((test, then),), other, pos)
        if head == "cond":
            return self._cond(items[1:], scope, pos)
        if head == "error":
            if len(items) != 1:
                raise ParseError("(error) takes no arguments", pos)
            return Error(pos)
        if head in _OPS:
            op = _OPS[head]
            if len(items) - 1 != op.arity:
                raise ParseError(f"{head} expects {op.arity} argument(s), got {len(items) - 1}", pos)
            return Prim(op, tuple(self.parse(x, scope) for x in items[1:]), pos)
        if head in KEYWORDS:
            raise ParseError(f"misplaced keyword {head!r}", pos)
        if len(items) != 2:
            raise ParseError("applications take exactly one argument", pos)
        return App(self.parse(items[0], scope), self.parse(items[1], scope), pos)

    def _cond(self, clauses, scope, pos) -> Cond:
        if not clauses or _head(clauses[-1]) != "else":
            raise ParseError("cond must end with an (else e) clause", pos)
        out = []
        for clause in clauses[:-1]:
            if not isinstance(clause, SList) or len(clause.items) != 2:
                raise ParseError("cond clause must be (test body)", clause.pos)
            if _head(clause) == "else":
                raise ParseError("else must be the last cond clause", clause.pos)
            out.append((self.parse(clause.items[0], scope), self.parse(clause.items[1], scope)))
        last = clauses[-1]
        if len(last.items) != 2:
            raise ParseError("expected (else body)", last.pos)
        return Cond(tuple(out), self.parse(last.items[1], scope), pos)


# --- printing --------------------------------------------------------------


def print_expr(e: Expr) -> str:
    match e:
        case IntLit(value):
            return str(value)
        case Var(name) | InputVar(name):
            return name
        case Lambda(param, body):
            return f"(lambda ({param}) {print_expr(body)})"
        case App(fn, arg):
            return f"({print_expr(fn)} {print_expr(arg)})"
        case Let(bound, rhs, body):
            return f"(let (({bound} {print_expr(rhs)})) {print_expr(body)})"
        case Cond(clauses, else_body):
            parts = [f"({print_expr(t)} {print_expr(b)})" for t, b in clauses]
            parts.append(f"(else {print_expr(else_body)})")
            return "(cond " + " ".join(parts) + ")"
        case Prim(op, args):
            return "(" + " ".join([op.value, *map(print_expr, args)]) + ")"
        case Error():
            return "(error)"
    raise TypeError(f"not an expression: {e!r}")


def print_program(p: Program) -> str:
    decls = " ".join(f"({name} {sort.value})" for name, sort in p.inputs)
    header = f"(inputs {decls})" if decls else "(inputs)"
    return f"{header}\n(main {print_expr(p.main)})\n"

"""Reference call-by-value evaluator for the user language.

This is the oracle every reported counterexample is replayed against, so it
is kept deliberately plain: environments are dicts, the control stack is an
explicit list (deep or divergent programs exhaust fuel rather than the
Python stack).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .lang import App, Cond, Error, Expr, InputVar, IntLit, Lambda, Let, Prim, PrimOp, Program, Var
from .sexpr import Pos

DEFAULT_FUEL = 1_000_000


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Closure:
    param: str
    body: Expr
    env: dict = field(default_factory=dict, compare=False)


UserValue = Num | Closure


class BugKind(enum.Enum):
    EXPLICIT_ERROR = "error"
    STUCK = "stuck"


@dataclass(frozen=True)
class Value:
    value: object


@dataclass(frozen=True)
class Bug:
    kind: BugKind
    at: Pos | None = None
    detail: str = field(default="", compare=False)


@dataclass(frozen=True)
class FuelExhausted:
    pass


Outcome = Value | Bug | FuelExhausted


class _Stuck(Exception):
    def __init__(self, detail: str, pos: Pos | None):
        self.detail = detail
        self.pos = pos


def apply_prim(op: PrimOp, args: list, pos: Pos | None = None) -> UserValue:
    if op is PrimOp.IS_PROCEDURE:
        return Num(int(isinstance(args[0], Closure)))
    if op is PrimOp.IS_INTEGER:
        return Num(int(isinstance(args[0], Num)))
    for a in args:
        if not isinstance(a, Num):
            raise _Stuck(f"{op.value} applied to a procedure", pos)
    if op is PrimOp.NOT:
        return Num(int(args[0].value == 0))
    a, b = args[0].value, args[1].value
    if op is PrimOp.ADD:
        return Num(a + b)
    if op is PrimOp.SUB:
        return Num(a - b)
    if op is PrimOp.MUL:
        return Num(a * b)
    if op is PrimOp.NUM_EQ:
        return Num(int(a == b))
    if op is PrimOp.LE:
        return Num(int(a <= b))
    return Num(int(a < b))


# continuation frames
_ARG, _CALL, _LET, _COND, _PRIM = range(5)


def eval_expr(e: Expr, bindings: dict, fuel: int = DEFAULT_FUEL, env: dict | None = None) -> Outcome:
    """Evaluate ``e``; ``bindings`` supplies the input variables."""
    stack: list = []
    env = env or {}
    mode_eval = True
    expr = e
    value = None
    try:
        while True:
            if mode_eval:
                match expr:
                    case IntLit(n):
                        value, mode_eval = Num(n), False
                    case Var(name):
                        value, mode_eval = env[name], False
                    case InputVar(name):
                        value, mode_eval = bindings[name], False
                    case Lambda(param, body):
                        captured = {k: env[k] for k in expr.free}
                        value, mode_eval = Closure(param, body, captured), False
                    case App(fn, arg):
                        stack.append((_ARG, arg, env, expr.pos))
                        expr = fn
                    case Let(bound, rhs, body):
                        stack.append((_LET, bound, body, env))
                        expr = rhs
                    case Cond(clauses, else_body):
                        if not clauses:
                            if fuel <= 0:
                                return FuelExhausted()
                            fuel -= 1
                            expr = else_body
                        else:
                            stack.append((_COND, expr, 0, env))
                            expr = clauses[0][0]
                    case Prim(op, args):
                        stack.append((_PRIM, expr, 1, [], env))
                        expr = args[0]
                    case Error():
                        return Bug(BugKind.EXPLICIT_ERROR, expr.pos)
                    case _:
                        raise TypeError(f"not an expression: {expr!r}")
                continue

            if not stack:
                return Value(value)
            frame = stack.pop()
            tag = frame[0]
            if tag == _ARG:
                _, arg, env, pos = frame
                stack.append((_CALL, value, pos))
                expr, mode_eval = arg, True
            elif tag == _CALL:
                _, fn, pos = frame
                if not isinstance(fn, Closure):
                    raise _Stuck("application of a non-procedure", pos)
                if fuel <= 0:
                    return FuelExhausted()
                fuel -= 1
                env = dict(fn.env)
                env[fn.param] = value
                expr, mode_eval = fn.body, True
            elif tag == _LET:
                _, bound, body, saved = frame
                if fuel <= 0:
                    return FuelExhausted()
                fuel -= 1
                env = dict(saved)
                env[bound] = value
                expr, mode_eval = body, True
            elif tag == _COND:
                _, node, i, env = frame
                if not isinstance(value, Num):
                    raise _Stuck("procedure in test position", node.clauses[i][0].pos or node.pos)
                if fuel <= 0:
                    return FuelExhausted()
                fuel -= 1
                if value.value != 0:
                    expr = node.clauses[i][1]
                elif i + 1 < len(node.clauses):
                    stack.append((_COND, node, i + 1, env))
                    expr = node.clauses[i + 1][0]
                else:
                    expr = node.else_body
                mode_eval = True
            else:
                _, node, i, vals, env = frame
                vals = vals + [value]
                if i < len(node.args):
                    stack.append((_PRIM, node, i + 1, vals, env))
                    expr, mode_eval = node.args[i], True
                else:
                    if fuel <= 0:
                        return FuelExhausted()
                    fuel -= 1
                    value = apply_prim(node.op, vals, node.pos)
    except _Stuck as stuck:
        return Bug(BugKind.STUCK, stuck.pos, stuck.detail)


def eval_user(p: Program, bindings: dict, fuel: int = DEFAULT_FUEL) -> Outcome:
    missing = [name for name in p.input_names if name not in bindings]
    if missing:
        raise KeyError(f"no binding for input(s) {', '.join(missing)}")
    if fuel <= 0:
        return FuelExhausted()
    return eval_expr(p.main, bindings, fuel)


def apply_value(fn: UserValue, arg: UserValue, fuel: int = DEFAULT_FUEL) -> Outcome:
    """Apply a user value to an argument (used to compare reified inputs)."""
    if not isinstance(fn, Closure):
        return Bug(BugKind.STUCK, None, "application of a non-procedure")
    if fuel <= 0:
        return FuelExhausted()
    env = dict(fn.env)
    env[fn.param] = arg
    return eval_expr(fn.body, {}, fuel - 1, env)

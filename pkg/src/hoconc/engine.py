"""The concolic machine.

Evaluates a program under a store, following exactly one concrete path and
logging path constraints as it goes:

* every test of a user ``cond`` logs ``FirstOrder(outcome, trace)``;
* every run of a canonical dispatch logs ``Test(else-label, inspected)``
  followed by one ``Branch`` per clause tried, the last with outcome 1.

Logging happens inside the interpreter rather than through a translated
program; the observable path is the same.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .canonical import (
    CanonicalFn,
    Dispatch,
    IsProc,
    LetCall,
    ReturnConcVar,
    ReturnFn,
    ReturnVar,
    Store,
)
from .interp import Bug, BugKind, FuelExhausted, Value
from .lang import App, Cond, Error, Expr, InputVar, IntLit, Lambda, Let, Prim, PrimOp, Program, Sort, Var
from .trace import (
    FUNCTION_VALUE,
    Branch,
    FirstOrder,
    InspectedNumber,
    Test,
    TLit,
    TNeg,
    TOp,
    TVar,
    Trace,
    int_op,
    trace_eval,
)

DEFAULT_FUEL = 1_000_000


@dataclass(frozen=True, slots=True)
class Traced:
    value: int
    trace: Trace


@dataclass(frozen=True)
class UserFn:
    param: str
    body: Expr
    env: dict = field(compare=False)


@dataclass(frozen=True)
class CanonicalClosure:
    fn: CanonicalFn
    env: dict = field(compare=False)


ConcValue = Traced | UserFn | CanonicalClosure


class DynamicError(Exception):
    def __init__(self, detail: str, pos=None):
        super().__init__(detail)
        self.detail = detail
        self.pos = pos


class ImproperStore(ValueError):
    pass


def _lit(n: int) -> Traced:
    return Traced(n, TLit(n))


def prim_apply(op: PrimOp, args) -> Traced:
    """Apply a primitive to concolic values, building the result trace.

    Traces whose operands are all literals are folded to a literal.
    """
    if op is PrimOp.IS_PROCEDURE:
        return _lit(int(not isinstance(args[0], Traced)))
    if op is PrimOp.IS_INTEGER:
        return _lit(int(isinstance(args[0], Traced)))
    for a in args:
        if not isinstance(a, Traced):
            raise DynamicError(f"{op.value} applied to a procedure")
    if op is PrimOp.NOT:
        a = args[0]
        n = int(a.value == 0)
        return _lit(n) if isinstance(a.trace, TLit) else Traced(n, TNeg(a.trace))
    a, b = args
    n = int_op(op, a.value, b.value)
    if isinstance(a.trace, TLit) and isinstance(b.trace, TLit):
        return _lit(n)
    return Traced(n, TOp(op, a.trace, b.trace))


# control modes
_EVAL, _DISPATCH, _BODY, _RETURN = range(4)
# continuation frames
_ARG, _CALL, _LET, _COND, _PRIM, _CLET = range(6)


def concolic_eval(p: Program, store: Store, fuel: int = DEFAULT_FUEL, check: bool = True):
    """Run ``p`` under ``store``; return ``(outcome, path)``.

    ``outcome`` is a :class:`Value` holding a concolic value, a :class:`Bug`
    or :class:`FuelExhausted`; ``path`` is the tuple of logged constraints.
    """
    if check:
        _check_store(p, store)
    if fuel <= 0:
        return FuelExhausted(), ()
    return _Machine(store, fuel).run(p.main)


def apply_input(store: Store, name: str, arg: ConcValue, fuel: int = DEFAULT_FUEL):
    """Apply the function input ``name`` to ``arg`` (agreement testing aid)."""
    m = _Machine(store, fuel)
    return m.run_apply(CanonicalClosure(store[name], {}), arg)


def _check_store(p: Program, store: Store) -> None:
    for name, sort in p.inputs:
        if name not in store:
            raise ImproperStore(f"store does not bind input {name!r}")
        v = store[name]
        if sort is Sort.NUMBER and not isinstance(v, int):
            raise ImproperStore(f"input {name!r} is a number but the store holds a function")
        if sort is Sort.FUNCTION and not isinstance(v, CanonicalFn):
            raise ImproperStore(f"input {name!r} is a function but the store holds a number")


class _Machine:
    def __init__(self, store: Store, fuel: int):
        self.store = store
        self.numbers = store.numbers
        self.fuel = fuel
        self.path: list = []

    def _input(self, name: str) -> ConcValue:
        v = self.store[name]
        if isinstance(v, int):
            return Traced(v, TVar(name))
        return CanonicalClosure(v, {})

    def run(self, expr: Expr):
        return self._loop(_EVAL, expr, {}, [])

    def run_apply(self, fn, arg):
        mode, ctl, env = self._apply(fn, arg, None)
        return self._loop(mode, ctl, env, [])

    def _apply(self, fn, arg, pos):
        """Return the next (mode, control, env) for applying ``fn`` to ``arg``."""
        if isinstance(fn, UserFn):
            env = dict(fn.env)
            env[fn.param] = arg
            return _EVAL, fn.body, env
        if isinstance(fn, CanonicalClosure):
            env = dict(fn.env)
            env[fn.fn.param] = arg
            return _DISPATCH, fn.fn.body, env
        raise DynamicError("application of a non-procedure", pos)

    def _loop(self, mode, ctl, env, stack):
        path = self.path
        numbers = self.numbers
        value = None
        try:
            while True:
                if mode == _EVAL:
                    expr = ctl
                    match expr:
                        case IntLit(n):
                            value, mode = Traced(n, TLit(n)), _RETURN
                        case Var(name):
                            value, mode = env[name], _RETURN
                        case InputVar(name):
                            value, mode = self._input(name), _RETURN
                        case Lambda(param, body):
                            value = UserFn(param, body, {k: env[k] for k in expr.free})
                            mode = _RETURN
                        case App(fn, arg):
                            stack.append((_ARG, arg, env, expr.pos))
                            ctl = fn
                        case Let(bound, rhs, body):
                            stack.append((_LET, bound, body, env))
                            ctl = rhs
                        case Cond(clauses, else_body):
                            if not clauses:
                                if self.fuel <= 0:
                                    return FuelExhausted(), tuple(path)
                                self.fuel -= 1
                                ctl = else_body
                            else:
                                stack.append((_COND, expr, 0, env))
                                ctl = clauses[0][0]
                        case Prim(op, args):
                            stack.append((_PRIM, expr, 1, [], env))
                            ctl = args[0]
                        case Error():
                            return Bug(BugKind.EXPLICIT_ERROR, expr.pos), tuple(path)
                        case _:
                            raise TypeError(f"not an expression: {expr!r}")
                    continue

                if mode == _DISPATCH:
                    d: Dispatch = ctl
                    if self.fuel <= 0:
                        return FuelExhausted(), tuple(path)
                    self.fuel -= 1
                    v = env[d.scrutinee]
                    is_number = isinstance(v, Traced)
                    path.append(Test(d.else_label, InspectedNumber(v.value, v.trace) if is_number else FUNCTION_VALUE))
                    chosen = None
                    for clause in d.clauses:
                        if isinstance(clause.test, IsProc):
                            out = 0 if is_number else 1
                            trace = TLit(out)
                        else:
                            if not is_number:
                                raise DynamicError(f"equality test {clause.label} applied to a procedure")
                            t = clause.test.trace
                            out = int(v.value == trace_eval(t, numbers))
                            trace = TOp(PrimOp.NUM_EQ, v.trace, t)
                        path.append(Branch(clause.label, out, trace))
                        if out:
                            chosen = clause
                            break
                    if chosen is None:
                        path.append(Branch(d.else_label, 1, TLit(1)))
                        value, mode = Traced(0, TLit(0)), _RETURN
                    else:
                        ctl, mode = chosen.body, _BODY
                    continue

                if mode == _BODY:
                    body = ctl
                    if isinstance(body, ReturnVar):
                        value, mode = env[body.name], _RETURN
                    elif isinstance(body, ReturnConcVar):
                        value, mode = Traced(numbers[body.name], TVar(body.name)), _RETURN
                    elif isinstance(body, ReturnFn):
                        value, mode = CanonicalClosure(body.fn, env), _RETURN
                    else:
                        callee = env[body.callee]
                        if body.arg_is_concvar:
                            arg = Traced(numbers[body.arg], TVar(body.arg))
                        else:
                            arg = env[body.arg]
                        if self.fuel <= 0:
                            return FuelExhausted(), tuple(path)
                        self.fuel -= 1
                        stack.append((_CLET, body, env))
                        mode, ctl, env = self._apply(callee, arg, None)
                    continue

                # _RETURN
                if not stack:
                    return Value(value), tuple(path)
                frame = stack.pop()
                tag = frame[0]
                if tag == _ARG:
                    _, arg, env, pos = frame
                    stack.append((_CALL, value, pos))
                    ctl, mode = arg, _EVAL
                elif tag == _CALL:
                    _, fn, pos = frame
                    if self.fuel <= 0:
                        return FuelExhausted(), tuple(path)
                    self.fuel -= 1
                    mode, ctl, env = self._apply(fn, value, pos)
                elif tag == _LET:
                    _, bound, body, saved = frame
                    if self.fuel <= 0:
                        return FuelExhausted(), tuple(path)
                    self.fuel -= 1
                    env = dict(saved)
                    env[bound] = value
                    ctl, mode = body, _EVAL
                elif tag == _COND:
                    _, node, i, env = frame
                    if not isinstance(value, Traced):
                        raise DynamicError("procedure in test position", node.clauses[i][0].pos or node.pos)
                    if self.fuel <= 0:
                        return FuelExhausted(), tuple(path)
                    self.fuel -= 1
                    taken = int(value.value != 0)
                    path.append(FirstOrder(taken, value.trace))
                    if taken:
                        ctl = node.clauses[i][1]
                    elif i + 1 < len(node.clauses):
                        stack.append((_COND, node, i + 1, env))
                        ctl = node.clauses[i + 1][0]
                    else:
                        ctl = node.else_body
                    mode = _EVAL
                elif tag == _PRIM:
                    _, node, i, vals, env = frame
                    vals = vals + [value]
                    if i < len(node.args):
                        stack.append((_PRIM, node, i + 1, vals, env))
                        ctl, mode = node.args[i], _EVAL
                    else:
                        if self.fuel <= 0:
                            return FuelExhausted(), tuple(path)
                        self.fuel -= 1
                        try:
                            value = prim_apply(node.op, vals)
                        except DynamicError as exc:
                            exc.pos = node.pos
                            raise
                else:  # _CLET
                    _, letcall, saved = frame
                    env = dict(saved)
                    env[letcall.result] = value
                    ctl, mode = letcall.then, _DISPATCH
        except DynamicError as exc:
            return Bug(BugKind.STUCK, exc.pos, exc.detail), tuple(path)

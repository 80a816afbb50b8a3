"""Independent reference implementations used only by the tests.

``run_subst`` is a substitution-based small-step evaluator. It shares no
code with ``hoconc.interp`` beyond the AST classes, so agreement between
the two is evidence rather than tautology.
"""

from __future__ import annotations

import random

from hoconc.interp import Num
from hoconc.lang import App, Cond, Error, InputVar, IntLit, Lambda, Let, Prim, PrimOp, Program, Var


class OracleError(Exception):
    pass


class OracleStuck(Exception):
    pass


def is_value(e) -> bool:
    return isinstance(e, (IntLit, Lambda))


def subst(e, x, v):
    """Replace free ``Var(x)`` (or ``InputVar(x)``) in ``e`` by the closed value ``v``."""
    match e:
        case Var(name) | InputVar(name):
            return v if name == x else e
        case IntLit() | Error():
            return e
        case Lambda(param, body):
            return e if param == x else Lambda(param, subst(body, x, v))
        case App(fn, arg):
            return App(subst(fn, x, v), subst(arg, x, v))
        case Let(bound, rhs, body):
            return Let(bound, subst(rhs, x, v), body if bound == x else subst(body, x, v))
        case Cond(clauses, else_body):
            return Cond(tuple((subst(t, x, v), subst(b, x, v)) for t, b in clauses), subst(else_body, x, v))
        case Prim(op, args):
            return Prim(op, tuple(subst(a, x, v) for a in args))
    raise TypeError(e)


def _prim(op, vals):
    if op is PrimOp.IS_PROCEDURE:
        return int(isinstance(vals[0], Lambda))
    if op is PrimOp.IS_INTEGER:
        return int(isinstance(vals[0], IntLit))
    if not all(isinstance(a, IntLit) for a in vals):
        raise OracleStuck(op)
    ns = [a.value for a in vals]
    table = {
        PrimOp.ADD: lambda a, b: a + b,
        PrimOp.SUB: lambda a, b: a - b,
        PrimOp.MUL: lambda a, b: a * b,
        PrimOp.NUM_EQ: lambda a, b: int(a == b),
        PrimOp.LE: lambda a, b: int(a <= b),
        PrimOp.LT: lambda a, b: int(a < b),
        PrimOp.NOT: lambda a: int(a == 0),
    }
    return table[op](*ns)


def step(e):
    match e:
        case Error():
            raise OracleError()
        case App(fn, arg):
            if not is_value(fn):
                return App(step(fn), arg)
            if not is_value(arg):
                return App(fn, step(arg))
            if isinstance(fn, Lambda):
                return subst(fn.body, fn.param, arg)
            raise OracleStuck("apply number")
        case Let(bound, rhs, body):
            if is_value(rhs):
                return subst(body, bound, rhs)
            return Let(bound, step(rhs), body)
        case Cond(clauses, else_body):
            if not clauses:
                return else_body
            (test, body), rest = clauses[0], clauses[1:]
            if not is_value(test):
                return Cond(((step(test), body),) + rest, else_body)
            if isinstance(test, Lambda):
                raise OracleStuck("procedure as test")
            return body if test.value != 0 else Cond(rest, else_body)
        case Prim(op, args):
            for i, a in enumerate(args):
                if not is_value(a):
                    return Prim(op, args[:i] + (step(a),) + args[i + 1:])
            return IntLit(_prim(op, args))
    raise OracleStuck(f"no step for {e!r}")


def value_expr(v):
    """A user value as a closed expression."""
    if isinstance(v, Num):
        return IntLit(v.value)
    body = v.body
    for name, captured in v.env.items():
        if name != v.param:
            body = subst(body, name, value_expr(captured))
    return Lambda(v.param, body)


def run_subst(p: Program, bindings: dict, max_steps: int = 100_000) -> str:
    """'error', 'stuck', 'value' or 'timeout'."""
    e = p.main
    for name, v in bindings.items():
        e = subst(e, name, value_expr(v))
    try:
        for _ in range(max_steps):
            if is_value(e):
                return "value"
            e = step(e)
    except OracleError:
        return "error"
    except OracleStuck:
        return "stuck"
    except RecursionError:
        return "timeout"
    return "timeout"


# --- random programs -------------------------------------------------------


class ProgramGen:
    """Small random programs over number and function inputs."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"v{self.counter}"

    def program(self) -> str:
        r = self.rng
        nums = [n for n in ("x", "y") if r.random() < 0.7] or ["x"]
        fns = [f for f in ("f", "g") if r.random() < 0.4]
        self.fns = fns
        body = self.num(r.randint(2, 4), list(nums))
        decls = " ".join([f"({n} number)" for n in nums] + [f"({f} function)" for f in fns])
        return f"(inputs {decls})\n(main {body})"

    def num(self, depth: int, scope: list) -> str:
        r = self.rng
        if depth <= 0 or r.random() < 0.15:
            return r.choice([str(r.randint(-3, 6))] + scope)
        k = r.random()
        if k < 0.35:
            test = self.test(depth - 1, scope)
            a, b = self.branch(depth - 1, scope), self.branch(depth - 1, scope)
            return f"(if {test} {a} {b})"
        if k < 0.55:
            op = r.choice(["+", "-", "*"])
            return f"({op} {self.num(depth - 1, scope)} {self.num(depth - 1, scope)})"
        if k < 0.75 and self.fns:
            f = r.choice(self.fns)
            if r.random() < 0.5:
                return f"({f} {self.num(depth - 1, scope)})"
            v = self.fresh()
            return f"({f} (lambda ({v}) {self.num(depth - 1, scope + [v])}))"
        if k < 0.88:
            v = self.fresh()
            return f"(let (({v} {self.num(depth - 1, scope)})) {self.num(depth - 1, scope + [v])})"
        v = self.fresh()
        return f"((lambda ({v}) {self.num(depth - 1, scope + [v])}) {self.num(depth - 1, scope)})"

    def branch(self, depth, scope):
        return "(error)" if self.rng.random() < 0.3 else self.num(depth, scope)

    def test(self, depth, scope):
        r = self.rng
        op = r.choice(["=", "<", "<=", "=", "not"])
        if op == "not":
            return f"(not {self.num(depth, scope)})"
        return f"({op} {self.num(depth, scope)} {self.num(depth, scope)})"


def random_program_text(seed: int) -> str:
    return ProgramGen(random.Random(seed)).program()



def random_store(p, rng: random.Random, steps: int = 4):
    """A proper store for ``p`` reached by random structural evolution.

    Each step runs the program, picks one mutation at random and then
    scrambles the number bindings, keeping only proper results. No solver
    is involved.
    """
    from hoconc.canonical import Violation, check_proper, initial_store
    from hoconc.engine import concolic_eval
    from hoconc.evolution import enumerate_mutations

    store = initial_store(p)
    for _ in range(steps):
        _, path = concolic_eval(p, store, fuel=20_000)
        cands = enumerate_mutations(store, path)
        if not cands:
            break
        nxt = rng.choice(cands).store
        scrambled = nxt.with_numbers({k: rng.randint(-3, 6) for k in nxt.numbers})
        if not isinstance(check_proper(scrambled), Violation):
            nxt = scrambled
        store = nxt
    return store

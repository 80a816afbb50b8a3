"""SMT-LIB encoding of path constraints and a solver subprocess driver."""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
from dataclasses import dataclass, field

from .canonical import CanonicalFn, EqTrace, Store, Violation, check_proper, store_dispatches
from .lang import PrimOp
from .sexpr import ReadError, read_all, to_python
from .trace import Branch, FirstOrder, TLit, TNeg, TOp, Trace, TVar, trace_eval, trace_vars

SOLVER_ENV = "HOCONC_SOLVER"
LOGIC = "QF_NIA"


@dataclass(frozen=True)
class Query:
    declarations: tuple  # variable names, first-occurrence order
    assertions: tuple  # SMT-LIB boolean terms
    logic: str = LOGIC

    def script(self) -> str:
        lines = ["(set-option :produce-models true)", f"(set-logic {self.logic})"]
        lines += [f"(declare-const {_sym(x)} Int)" for x in self.declarations]
        lines += [f"(assert {a})" for a in self.assertions]
        lines += ["(check-sat)", "(get-model)", ""]
        return "\n".join(lines)


@dataclass(frozen=True)
class Sat:
    model: dict


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class Unknown:
    reason: str = ""


SatResult = Sat | Unsat | Unknown


class SolverSpawnError(RuntimeError):
    pass


class ProtocolError(RuntimeError):
    pass


class ImproperResult(ValueError):
    pass


# --- encoding --------------------------------------------------------------


def _sym(name: str) -> str:
    return f"|{name}|"


def _int(n: int) -> str:
    return str(n) if n >= 0 else f"(- {-n})"


_CMP = {PrimOp.NUM_EQ: "=", PrimOp.LE: "<=", PrimOp.LT: "<"}
_ARITH = {PrimOp.ADD: "+", PrimOp.SUB: "-", PrimOp.MUL: "*"}


def int_term(t: Trace) -> str:
    """SMT integer term for ``t``; comparisons select 1 or 0."""
    match t:
        case TLit(n):
            return _int(n)
        case TVar(name):
            return _sym(name)
        case TNeg(arg):
            return f"(ite {truthy(arg)} 0 1)"
        case TOp(op, left, right) if op in _ARITH:
            return f"({_ARITH[op]} {int_term(left)} {int_term(right)})"
        case TOp(op, left, right):
            return f"(ite ({_CMP[op]} {int_term(left)} {int_term(right)}) 1 0)"
    raise TypeError(t)


def truthy(t: Trace) -> str:
    """SMT boolean term for ``t != 0``."""
    match t:
        case TLit(n):
            return "true" if n != 0 else "false"
        case TNeg(arg):
            return f"(not {truthy(arg)})"
        case TOp(op, left, right) if op in _CMP:
            return f"({_CMP[op]} {int_term(left)} {int_term(right)})"
    return f"(not (= {int_term(t)} 0))"


def assertion(outcome: int, t: Trace) -> str:
    return truthy(t) if outcome else f"(not {truthy(t)})"


def encode(path, store: Store, extra=()) -> Query:
    """Encode ``path`` over ``store``.

    Asserts every first-order constraint and every branch constraint with
    its recorded outcome, then asserts that the equality tests of every
    dispatch in the store stay pairwise distinct. ``extra`` holds additional
    ``(outcome, trace)`` pairs or :class:`AnyOf` disjunctions, appended last.
    """
    decls: dict = {}
    asserts = []
    for c in path:
        if isinstance(c, (FirstOrder, Branch)):
            if isinstance(c.trace, TLit) and bool(c.trace.value) == bool(c.outcome):
                continue  # trivially true
            trace_vars(c.trace, decls)
            asserts.append(assertion(c.outcome, c.trace))
    for item in extra:
        if isinstance(item, AnyOf):
            for _, t in item.items:
                trace_vars(t, decls)
            asserts.append(item.term())
        else:
            outcome, t = item
            trace_vars(t, decls)
            asserts.append(assertion(outcome, t))
    for _, _, d in store_dispatches(store):
        traces = [c.test.trace for c in d.clauses if isinstance(c.test, EqTrace)]
        if len(traces) >= 2:
            for t in traces:
                trace_vars(t, decls)
            asserts.append("(distinct " + " ".join(int_term(t) for t in traces) + ")")
    return Query(tuple(decls), tuple(asserts))


@dataclass(frozen=True)
class AnyOf:
    """At least one of several ``(outcome, trace)`` constraints holds."""

    items: tuple

    def term(self) -> str:
        terms = [assertion(o, t) for o, t in self.items]
        if not terms:
            return "false"
        return terms[0] if len(terms) == 1 else "(or " + " ".join(terms) + ")"

    def holds(self, numbers) -> bool:
        return any(int(trace_eval(t, numbers) != 0) == o for o, t in self.items)


# --- solving ---------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    command: tuple = ()
    timeout: float = 10.0

    def resolved(self) -> tuple:
        if self.command:
            return tuple(self.command)
        override = os.environ.get(SOLVER_ENV)
        if override:
            argv = tuple(shlex.split(override))
        else:
            argv = ("z3",)
        return argv + default_flags(argv[0]) if len(argv) == 1 else argv


def default_flags(exe: str) -> tuple:
    base = os.path.basename(exe)
    if base.startswith("z3"):
        return ("-in", "-smt2")
    if base.startswith("cvc5") or base.startswith("cvc4"):
        return ("--lang=smt2",)
    if base.startswith("yices"):
        return ()
    return ("-in",)


def solver_available(cfg: SolverConfig | None = None) -> bool:
    argv = (cfg or SolverConfig()).resolved()
    return shutil.which(argv[0]) is not None


def solve(q: Query, cfg: SolverConfig | None = None) -> SatResult:
    cfg = cfg or SolverConfig()
    argv = cfg.resolved()
    try:
        proc = subprocess.run(
            argv, input=q.script(), capture_output=True, text=True, timeout=cfg.timeout
        )
    except subprocess.TimeoutExpired:
        return Unknown("timeout")
    except OSError as exc:
        raise SolverSpawnError(f"cannot run solver {argv[0]!r}: {exc}") from exc
    return parse_response(proc.stdout, q.declarations, proc.stderr)


def parse_response(text: str, declared=(), stderr: str = "") -> SatResult:
    try:
        data = [to_python(x) for x in read_all(text)]
    except ReadError as exc:
        raise ProtocolError(f"unreadable solver output: {exc}") from None
    if not data:
        raise ProtocolError(f"empty solver output{': ' + stderr.strip() if stderr.strip() else ''}")
    verdict = data[0]
    if verdict == "unsat":
        return Unsat()
    if verdict == "unknown":
        return Unknown("solver returned unknown")
    if verdict != "sat":
        raise ProtocolError(f"unexpected solver verdict {verdict!r}")
    if len(data) < 2:
        raise ProtocolError("sat without a model")
    model = parse_model(data[1])
    for x in declared:
        # solvers may omit don't-care variables
        model.setdefault(x, 0)
    return Sat(model)


def parse_model(node) -> dict:
    """Read ``((define-fun x () Int 3) ...)`` (optionally headed by ``model``)."""
    if isinstance(node, str):
        raise ProtocolError(f"expected a model, got {node!r}")
    if node and node[0] == "model":
        node = node[1:]
    out = {}
    for entry in node:
        if not (isinstance(entry, list) and len(entry) == 5 and entry[0] == "define-fun"):
            raise ProtocolError(f"unexpected model entry {entry!r}")
        _, name, params, sort, value = entry
        if params != [] or sort != "Int":
            continue
        out[name] = _model_int(value)
    return out


def _model_int(v) -> int:
    if isinstance(v, str):
        try:
            return int(v)
        except ValueError:
            raise ProtocolError(f"non-integer model value {v!r}") from None
    if len(v) == 2 and v[0] == "-":
        return -_model_int(v[1])
    raise ProtocolError(f"non-integer model value {v!r}")


def apply_model(store: Store, model) -> Store:
    """Overwrite number bindings with ``model``; reject results that break disjointness."""
    updates = {k: v for k, v in model.items() if not isinstance(store.get(k), CanonicalFn)}
    new = store.with_numbers(updates)
    res = check_proper(new)
    if isinstance(res, Violation):
        clashes = [r for r in res.reasons if r.startswith("non-disjoint")]
        if clashes:
            raise ImproperResult("; ".join(clashes))
    return new


def model_reproduces(path, store: Store, extra=()) -> list:
    """Constraints of ``path`` whose recorded outcome ``store`` fails to reproduce.

    Evaluates traces directly (independently of the SMT encoding); an empty
    list means the store is a genuine solution.
    """
    numbers = store.numbers
    bad = []
    for i, c in enumerate(path):
        if isinstance(c, (FirstOrder, Branch)):
            got = int(trace_eval(c.trace, numbers) != 0)
            if got != c.outcome:
                bad.append((i, c))
    for item in extra:
        if isinstance(item, AnyOf):
            if not item.holds(numbers):
                bad.append((None, item))
        elif int(trace_eval(item[1], numbers) != 0) != item[0]:
            bad.append((None, item))
    return bad


@dataclass
class CachingSolver:
    """Memoizes verdicts by query text; counts calls for reporting."""

    config: SolverConfig = field(default_factory=SolverConfig)
    cache: dict = field(default_factory=dict)
    calls: int = 0
    hits: int = 0

    def __call__(self, q: Query) -> SatResult:
        key = q.script()
        hit = self.cache.get(key)
        if hit is not None:
            self.hits += 1
            return hit
        self.calls += 1
        res = solve(q, self.config)
        self.cache[key] = res
        return res

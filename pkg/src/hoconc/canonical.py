"""Canonical function inputs and the input store.

A canonical function is ``(lambda (z) D)`` where the dispatch ``D`` is a
labeled conditional on the innermost bound variable::

    D    ::= (cond [l1 test1 body1] ... [l0 else 0])
    test ::= (procedure? z) | (= z <trace>)
    body ::= y | X | (lambda (z') D') | (let ((r (g a))) D'')

``X`` ranges over concolic number variables held in the store. Stores are
immutable; every edit returns a new store.
"""

from __future__ import annotations

import itertools
import threading
from collections.abc import Mapping
from dataclasses import dataclass, field

from .interp import Closure, Num
from .lang import App, Cond, IntLit, Lambda, Let, Prim, PrimOp, Var, print_expr
from .trace import Label, Trace, print_trace, trace_eval, trace_vars


@dataclass(frozen=True, slots=True)
class IsProc:
    pass


@dataclass(frozen=True, slots=True)
class EqTrace:
    trace: Trace


@dataclass(frozen=True, slots=True)
class ReturnVar:
    name: str


@dataclass(frozen=True, slots=True)
class ReturnConcVar:
    name: str


@dataclass(frozen=True, slots=True)
class ReturnFn:
    fn: CanonicalFn


@dataclass(frozen=True, slots=True)
class LetCall:
    """``(let ((result (callee arg))) then)``.

    ``arg`` names a canonical variable in scope, or a concolic number
    variable when ``arg_is_concvar`` is set.
    """

    callee: str
    arg: str
    result: str
    then: Dispatch
    arg_is_concvar: bool = False


@dataclass(frozen=True, slots=True)
class BranchClause:
    label: Label
    test: IsProc | EqTrace
    body: ReturnVar | ReturnConcVar | ReturnFn | LetCall


@dataclass(frozen=True, slots=True)
class Dispatch:
    scrutinee: str
    clauses: tuple  # of BranchClause
    else_label: Label

    @property
    def labels(self) -> tuple:
        return tuple(c.label for c in self.clauses) + (self.else_label,)

    def add_clause(self, clause: BranchClause) -> Dispatch:
        # procedure? tests stay ahead of equality tests so that a procedure
        # never reaches (= z t)
        if isinstance(clause.test, IsProc):
            return Dispatch(self.scrutinee, (clause,) + self.clauses, self.else_label)
        return Dispatch(self.scrutinee, self.clauses + (clause,), self.else_label)


@dataclass(frozen=True, slots=True)
class CanonicalFn:
    param: str
    body: Dispatch


# --- labels ----------------------------------------------------------------

_global_labels = itertools.count()
_global_lock = threading.Lock()


class LabelAllocator:
    """Hands out labels above every label already present in a store."""

    def __init__(self, start: int = 0):
        self._next = start

    @classmethod
    def for_store(cls, store: Store) -> LabelAllocator:
        ids = [lab.id for lab in store_labels(store)]
        return cls(max(ids) + 1 if ids else 0)

    def fresh(self) -> Label:
        lab = Label(self._next)
        self._next += 1
        return lab


def _global_fresh() -> Label:
    with _global_lock:
        return Label(next(_global_labels))


def default_fn(labels: LabelAllocator | None = None) -> CanonicalFn:
    """``(lambda (z) (cond [l else 0]))`` with a fresh label ``l``."""
    lab = labels.fresh() if labels is not None else _global_fresh()
    param = f"z{lab.id}"
    return CanonicalFn(param, Dispatch(param, (), lab))


def else_only(scrutinee: str, labels: LabelAllocator) -> Dispatch:
    return Dispatch(scrutinee, (), labels.fresh())


# --- the store -------------------------------------------------------------


class Store(Mapping):
    """Immutable map from concolic variable to ``int`` or :class:`CanonicalFn`."""

    __slots__ = ("_b", "_numbers", "_hash")

    def __init__(self, bindings=()):
        self._b = dict(bindings)
        for name, v in self._b.items():
            if isinstance(v, bool) or not isinstance(v, (int, CanonicalFn)):
                raise TypeError(f"store value for {name!r} must be int or CanonicalFn, got {v!r}")
        self._numbers = None
        self._hash = None

    def __getitem__(self, name):
        return self._b[name]

    def __iter__(self):
        return iter(self._b)

    def __len__(self):
        return len(self._b)

    def __eq__(self, other):
        if isinstance(other, Store):
            return self._b == other._b
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(self._b.items()))
        return self._hash

    def __repr__(self):
        return f"Store({self._b!r})"

    @property
    def numbers(self) -> dict:
        if self._numbers is None:
            self._numbers = {k: v for k, v in self._b.items() if isinstance(v, int)}
        return self._numbers

    def functions(self) -> dict:
        return {k: v for k, v in self._b.items() if isinstance(v, CanonicalFn)}

    def set(self, name: str, value) -> Store:
        b = dict(self._b)
        b[name] = value
        return Store(b)

    def with_numbers(self, updates: Mapping) -> Store:
        b = dict(self._b)
        for name, n in updates.items():
            if isinstance(b.get(name), CanonicalFn):
                raise ValueError(f"{name!r} is bound to a function")
            b[name] = n
        return Store(b)

    def fresh_var(self, taken=()) -> str:
        for i in itertools.count(1):
            name = f"X{i}"
            if name not in self._b and name not in taken:
                return name


def initial_store(program) -> Store:
    """Numbers start at 0, functions at the default canonical function."""
    from .lang import Sort

    labels = LabelAllocator()
    b = {}
    for name, sort in program.inputs:
        b[name] = 0 if sort is Sort.NUMBER else default_fn(labels)
    return Store(b)


# --- traversal -------------------------------------------------------------


def iter_dispatches(fn: CanonicalFn):
    """Yield (address, dispatch) for every dispatch inside ``fn``.

    An address is the tuple of clause indices leading from ``fn.body`` to
    the dispatch; each step enters the ReturnFn or LetCall of that clause.
    """
    stack = [((), fn.body)]
    while stack:
        addr, d = stack.pop()
        yield addr, d
        for i in reversed(range(len(d.clauses))):
            inner = _inner_dispatch(d.clauses[i].body)
            if inner is not None:
                stack.append((addr + (i,), inner))


def _inner_dispatch(body):
    if isinstance(body, ReturnFn):
        return body.fn.body
    if isinstance(body, LetCall):
        return body.then
    return None


def store_dispatches(store: Store):
    for name, v in store.items():
        if isinstance(v, CanonicalFn):
            for addr, d in iter_dispatches(v):
                yield name, addr, d


def store_labels(store: Store) -> list:
    out = []
    for _, _, d in store_dispatches(store):
        out.extend(d.labels)
    return out


@dataclass(frozen=True)
class DispatchSite:
    owner: str
    address: tuple
    dispatch: Dispatch
    # canonical variables in scope at the dispatch, outermost first
    scope: tuple
    # the subset of ``scope`` known to hold procedures
    procs: frozenset = field(default=frozenset())

    @property
    def depth(self) -> int:
        return len(self.address) + 1


class LabelNotFound(KeyError):
    pass


def find_dispatch(store: Store, label: Label) -> DispatchSite:
    """Locate the dispatch carrying ``label`` (as a clause or else label)."""
    for name, v in store.items():
        if not isinstance(v, CanonicalFn):
            continue
        stack = [((), v.body, (v.param,), frozenset())]
        while stack:
            addr, d, scope, procs = stack.pop()
            if label in d.labels:
                return DispatchSite(name, addr, d, scope, procs)
            for i, clause in enumerate(d.clauses):
                inner_procs = procs | {d.scrutinee} if isinstance(clause.test, IsProc) else procs
                body = clause.body
                if isinstance(body, ReturnFn):
                    stack.append((addr + (i,), body.fn.body, scope + (body.fn.param,), inner_procs))
                elif isinstance(body, LetCall):
                    stack.append((addr + (i,), body.then, scope + (body.result,), inner_procs))
    raise LabelNotFound(label)


def dispatch_at(fn: CanonicalFn, address: tuple) -> Dispatch:
    d = fn.body
    for i in address:
        d = _inner_dispatch(d.clauses[i].body)
    return d


def replace_dispatch(fn: CanonicalFn, address: tuple, new: Dispatch) -> CanonicalFn:
    return CanonicalFn(fn.param, _replace(fn.body, address, new))


def _replace(d: Dispatch, address: tuple, new: Dispatch) -> Dispatch:
    if not address:
        return new
    i, rest = address[0], address[1:]
    clause = d.clauses[i]
    body = clause.body
    if isinstance(body, ReturnFn):
        body = ReturnFn(CanonicalFn(body.fn.param, _replace(body.fn.body, rest, new)))
    elif isinstance(body, LetCall):
        body = LetCall(body.callee, body.arg, body.result, _replace(body.then, rest, new), body.arg_is_concvar)
    else:
        raise ValueError("address does not lead to a dispatch")
    clauses = d.clauses[:i] + (BranchClause(clause.label, clause.test, body),) + d.clauses[i + 1 :]
    return Dispatch(d.scrutinee, clauses, d.else_label)


def rewrite_dispatch(store: Store, site: DispatchSite, new: Dispatch) -> Store:
    return store.set(site.owner, replace_dispatch(store[site.owner], site.address, new))


# --- properness ------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    reasons: tuple

    def __bool__(self):
        return False


class _Ok:
    reasons = ()

    def __bool__(self):
        return True

    def __repr__(self):
        return "Ok"


Ok = _Ok()


def check_proper(store: Store):
    """Return ``Ok`` or a :class:`Violation` listing every problem found.

    Checks that concolic variables inside canonical functions are
    number-bound, that labels are unique, that the equality tests of each
    dispatch denote distinct numbers, and that every variable a body refers
    to is in scope.
    """
    reasons = []
    numbers = store.numbers
    seen = {}
    for name, v in store.items():
        if not isinstance(v, CanonicalFn):
            continue
        _check_fn(v, name, (), numbers, seen, reasons)
    return Ok if not reasons else Violation(tuple(reasons))


def _check_fn(fn, owner, scope, numbers, seen, reasons):
    scope = scope + (fn.param,)
    _check_dispatch(fn.body, owner, scope, numbers, seen, reasons)


def _check_dispatch(d, owner, scope, numbers, seen, reasons):
    if d.scrutinee != scope[-1]:
        reasons.append(f"{owner}: dispatch {d.else_label} inspects {d.scrutinee}, not the innermost binder {scope[-1]}")
    for lab in d.labels:
        if lab in seen:
            reasons.append(f"label-clash: {lab} in {owner} and {seen[lab]}")
        else:
            seen[lab] = owner
    values = {}
    for clause in d.clauses:
        test = clause.test
        if isinstance(test, EqTrace):
            unbound = [x for x in trace_vars(test.trace) if x not in numbers]
            if unbound:
                reasons.append(f"{owner}: test {clause.label} uses non-number variable(s) {', '.join(unbound)}")
                continue
            n = trace_eval(test.trace, numbers)
            if n in values:
                reasons.append(f"non-disjoint: {owner} tests {values[n]} and {clause.label} both equal {n}")
            else:
                values[n] = clause.label
        body = clause.body
        if isinstance(body, ReturnVar):
            if body.name not in scope:
                reasons.append(f"{owner}: {clause.label} returns out-of-scope {body.name}")
        elif isinstance(body, ReturnConcVar):
            if body.name not in numbers:
                reasons.append(f"{owner}: {clause.label} returns non-number variable {body.name}")
        elif isinstance(body, ReturnFn):
            _check_fn(body.fn, owner, scope, numbers, seen, reasons)
        elif isinstance(body, LetCall):
            if body.callee not in scope:
                reasons.append(f"{owner}: {clause.label} calls out-of-scope {body.callee}")
            if body.arg_is_concvar:
                if body.arg not in numbers:
                    reasons.append(f"{owner}: {clause.label} passes non-number variable {body.arg}")
            elif body.arg not in scope:
                reasons.append(f"{owner}: {clause.label} passes out-of-scope {body.arg}")
            _check_dispatch(body.then, owner, scope + (body.result,), numbers, seen, reasons)


# --- reification -----------------------------------------------------------


def reify_fn_expr(fn: CanonicalFn, numbers: Mapping) -> Lambda:
    """User-language lambda equivalent to ``fn`` under ``numbers``."""
    return Lambda(fn.param, _reify_dispatch(fn.body, numbers))


def _reify_dispatch(d: Dispatch, numbers) -> Cond:
    clauses = []
    z = Var(d.scrutinee)
    for clause in d.clauses:
        if isinstance(clause.test, IsProc):
            test = Prim(PrimOp.IS_PROCEDURE, (z,))
        else:
            test = Prim(PrimOp.NUM_EQ, (z, IntLit(trace_eval(clause.test.trace, numbers))))
        clauses.append((test, _reify_body(clause.body, numbers)))
    return Cond(tuple(clauses), IntLit(0))


def _reify_body(body, numbers):
    if isinstance(body, ReturnVar):
        return Var(body.name)
    if isinstance(body, ReturnConcVar):
        return IntLit(numbers[body.name])
    if isinstance(body, ReturnFn):
        return reify_fn_expr(body.fn, numbers)
    arg = IntLit(numbers[body.arg]) if body.arg_is_concvar else Var(body.arg)
    return Let(body.result, App(Var(body.callee), arg), _reify_dispatch(body.then, numbers))


def reify(store: Store, name: str):
    v = store[name]
    if isinstance(v, int):
        return Num(v)
    lam = reify_fn_expr(v, store.numbers)
    return Closure(lam.param, lam.body, {})


def reify_all(store: Store, names=None) -> dict:
    names = list(store) if names is None else names
    return {name: reify(store, name) for name in names}


# --- printing --------------------------------------------------------------


def print_canonical(fn: CanonicalFn) -> str:
    """Canonical syntax with labels and symbolic traces."""
    return f"(lambda ({fn.param}) {_print_dispatch(fn.body)})"


def _print_dispatch(d: Dispatch) -> str:
    parts = []
    for clause in d.clauses:
        if isinstance(clause.test, IsProc):
            test = f"(procedure? {d.scrutinee})"
        else:
            test = f"(= {d.scrutinee} {print_trace(clause.test.trace)})"
        parts.append(f"[{clause.label} {test} {_print_body(clause.body)}]")
    parts.append(f"[{d.else_label} else 0]")
    return "(cond " + " ".join(parts) + ")"


def _print_body(body) -> str:
    if isinstance(body, (ReturnVar, ReturnConcVar)):
        return body.name
    if isinstance(body, ReturnFn):
        return print_canonical(body.fn)
    return f"(let (({body.result} ({body.callee} {body.arg}))) {_print_dispatch(body.then)})"


def print_store(store: Store) -> str:
    """Structural print: numbers, then canonical functions with traces."""
    out = []
    for name, v in store.items():
        out.append(f"{name} = {v if isinstance(v, int) else print_canonical(v)}")
    return "; ".join(out)


def fingerprint(store: Store) -> str:
    """Deduplication key for the search frontier (order-insensitive)."""
    return "; ".join(
        f"{name}={v if isinstance(v, int) else print_canonical(v)}" for name, v in sorted(store.items())
    )


def print_inputs(store: Store, names) -> list:
    """``name = value`` lines in user-language syntax (for reports)."""
    lines = []
    for name in names:
        v = store[name]
        if isinstance(v, int):
            lines.append(f"{name} = {v}")
        else:
            lines.append(f"{name} = {print_expr(reify_fn_expr(v, store.numbers))}")
    return lines

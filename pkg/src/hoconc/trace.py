"""Expression traces and path constraints."""

from __future__ import annotations

from dataclasses import dataclass

from .lang import PrimOp

TRACE_OPS = (PrimOp.ADD, PrimOp.SUB, PrimOp.MUL, PrimOp.NUM_EQ, PrimOp.LE, PrimOp.LT)


class Trace:
    __slots__ = ()

    def __str__(self) -> str:
        return print_trace(self)


@dataclass(frozen=True, slots=True)
class TVar(Trace):
    name: str


@dataclass(frozen=True, slots=True)
class TLit(Trace):
    value: int


@dataclass(frozen=True, slots=True)
class TNeg(Trace):
    arg: Trace


@dataclass(frozen=True, slots=True)
class TOp(Trace):
    op: PrimOp
    left: Trace
    right: Trace

    def __post_init__(self):
        if self.op not in TRACE_OPS:
            raise ValueError(f"{self.op} cannot appear in a trace")


TRUE = TLit(1)
FALSE = TLit(0)


class UnboundTraceVar(KeyError):
    pass


def int_op(op: PrimOp, a: int, b: int) -> int:
    if op is PrimOp.ADD:
        return a + b
    if op is PrimOp.SUB:
        return a - b
    if op is PrimOp.MUL:
        return a * b
    if op is PrimOp.NUM_EQ:
        return int(a == b)
    if op is PrimOp.LE:
        return int(a <= b)
    if op is PrimOp.LT:
        return int(a < b)
    raise ValueError(op)


def trace_eval(t: Trace, numbers) -> int:
    """Value of ``t`` when each TVar takes its number from ``numbers``."""
    match t:
        case TLit(n):
            return n
        case TVar(name):
            try:
                return numbers[name]
            except KeyError:
                raise UnboundTraceVar(name) from None
        case TNeg(arg):
            return int(trace_eval(arg, numbers) == 0)
        case TOp(op, left, right):
            return int_op(op, trace_eval(left, numbers), trace_eval(right, numbers))
    raise TypeError(f"not a trace: {t!r}")


def trace_vars(t: Trace, out: dict | None = None) -> dict:
    """TVar names of ``t`` in first-occurrence order (dict used as ordered set)."""
    if out is None:
        out = {}
    stack = [t]
    while stack:
        node = stack.pop()
        match node:
            case TVar(name):
                out.setdefault(name, None)
            case TNeg(arg):
                stack.append(arg)
            case TOp(_, left, right):
                stack += [right, left]
    return out


def print_trace(t: Trace) -> str:
    match t:
        case TLit(n):
            return str(n)
        case TVar(name):
            return name
        case TNeg(arg):
            return f"(not {print_trace(arg)})"
        case TOp(op, left, right):
            return f"({op.value} {print_trace(left)} {print_trace(right)})"
    raise TypeError(f"not a trace: {t!r}")


_TRACE_OP_NAMES = {op.value: op for op in TRACE_OPS}


def parse_trace(node) -> Trace:
    """Inverse of :func:`print_trace` over ``sexpr.to_python`` data."""
    if isinstance(node, str):
        try:
            return TLit(int(node))
        except ValueError:
            return TVar(node)
    if node[0] == "not" and len(node) == 2:
        return TNeg(parse_trace(node[1]))
    return TOp(_TRACE_OP_NAMES[node[0]], parse_trace(node[1]), parse_trace(node[2]))


# --- path constraints ------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Label:
    id: int

    def __str__(self) -> str:
        return f"l{self.id}"


@dataclass(frozen=True, slots=True)
class InspectedNumber:
    value: int
    trace: Trace


@dataclass(frozen=True, slots=True)
class InspectedFunction:
    pass


FUNCTION_VALUE = InspectedFunction()


class PathConstraint:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class FirstOrder(PathConstraint):
    outcome: int
    trace: Trace

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise ValueError("first-order outcome must be 0 or 1")


@dataclass(frozen=True, slots=True)
class Test(PathConstraint):
    label: Label
    inspected: InspectedNumber | InspectedFunction

    __test__ = False  # not a pytest class


@dataclass(frozen=True, slots=True)
class Branch(PathConstraint):
    label: Label
    outcome: int
    trace: Trace

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise ValueError("branch outcome must be 0 or 1")


Path = tuple  # of PathConstraint


def constraint_to_record(c: PathConstraint) -> dict:
    """JSON-ready record for one constraint (traces as s-expressions)."""
    match c:
        case FirstOrder(outcome, trace):
            return {"kind": "first-order", "outcome": outcome, "trace": print_trace(trace)}
        case Test(label, InspectedNumber(value, trace)):
            return {"kind": "test", "label": label.id, "inspected": "number", "value": value, "trace": print_trace(trace)}
        case Test(label, InspectedFunction()):
            return {"kind": "test", "label": label.id, "inspected": "function"}
        case Branch(label, outcome, trace):
            return {"kind": "branch", "label": label.id, "outcome": outcome, "trace": print_trace(trace)}
    raise TypeError(c)


def constraint_from_record(rec: dict) -> PathConstraint:
    from .sexpr import read_all, to_python

    def tr(text):
        return parse_trace(to_python(read_all(text)[0]))

    kind = rec["kind"]
    if kind == "first-order":
        return FirstOrder(rec["outcome"], tr(rec["trace"]))
    if kind == "branch":
        return Branch(Label(rec["label"]), rec["outcome"], tr(rec["trace"]))
    if rec["inspected"] == "function":
        return Test(Label(rec["label"]), FUNCTION_VALUE)
    return Test(Label(rec["label"]), InspectedNumber(rec["value"], tr(rec["trace"])))


def print_constraint(c: PathConstraint) -> str:
    match c:
        case FirstOrder(outcome, trace):
            return f"[{outcome} {print_trace(trace)}]"
        case Test(label, InspectedNumber(value, trace)):
            return f"[test {label} {value}:{print_trace(trace)}]"
        case Test(label, InspectedFunction()):
            return f"[test {label} <procedure>]"
        case Branch(label, outcome, trace):
            return f"[branch {label} {outcome} {print_trace(trace)}]"
    raise TypeError(c)


def print_path(path) -> str:
    return " ".join(print_constraint(c) for c in path)


def check_block_shape(path) -> list:
    """Problems with the Test/Branch block structure of ``path``.

    Every Test opens a block of Branch constraints that ends with the first
    Branch whose outcome is 1. Branch constraints outside a block, or a block
    still open when another Test or FirstOrder arrives, are reported.
    """
    problems = []
    open_label = None
    for i, c in enumerate(path):
        if isinstance(c, Test):
            if open_label is not None:
                problems.append(f"{i}: test {c.label} opened inside block {open_label}")
            open_label = c.label
        elif isinstance(c, Branch):
            if open_label is None:
                problems.append(f"{i}: branch {c.label} outside a block")
            elif c.outcome == 1:
                open_label = None
        elif open_label is not None:
            problems.append(f"{i}: first-order constraint inside block {open_label}")
    if open_label is not None:
        problems.append(f"end: block {open_label} not closed")
    return problems

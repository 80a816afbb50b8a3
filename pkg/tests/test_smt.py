import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hoconc.canonical import BranchClause, CanonicalFn, Dispatch, EqTrace, ReturnVar, Store, default_fn
from hoconc.lang import PrimOp
from hoconc.smt import (
    AnyOf,
    CachingSolver,
    ImproperResult,
    ProtocolError,
    Query,
    Sat,
    SolverConfig,
    SolverSpawnError,
    Unknown,
    Unsat,
    apply_model,
    encode,
    int_term,
    model_reproduces,
    parse_response,
    solve,
    truthy,
)
from hoconc.trace import Branch, FirstOrder, Label, Test, InspectedNumber, TLit, TNeg, TOp, TVar, trace_eval

from .conftest import needs_solver

L = Label
EQ = PrimOp.NUM_EQ


def eq(a, b):
    return TOp(EQ, a, b)


def _two_clause_fn(t1, t2):
    return CanonicalFn("z", Dispatch("z", (
        BranchClause(L(1), EqTrace(t1), ReturnVar("z")),
        BranchClause(L(2), EqTrace(t2), ReturnVar("z")),
    ), L(0)))


# --- encoding --------------------------------------------------------------


def test_encode_negated_equality():
    q = encode((FirstOrder(0, eq(TVar("x"), TLit(3))),), Store({"x": 0}))
    assert q.declarations == ("x",)
    assert q.assertions == ("(not (= |x| 3))",)


def test_encode_disjointness_only():
    store = Store({"a": 0, "b": 1, "f": _two_clause_fn(TVar("a"), TVar("b"))})
    q = encode((), store)
    assert q.assertions == ("(distinct |a| |b|)",)


def test_encode_branch_equality():
    y2 = TOp(PrimOp.MUL, TVar("Y"), TLit(2))
    q = encode((Branch(L(3), 1, eq(TVar("r"), y2)),), Store({"Y": 0, "r": 0}))
    assert q.assertions == ("(= |r| (* |Y| 2))",)


def test_encode_skips_tests_and_trivial_literals():
    path = (Test(L(0), InspectedNumber(1, TVar("x"))), Branch(L(0), 1, TLit(1)), FirstOrder(0, TLit(0)))
    assert encode(path, Store({"x": 1})).assertions == ()


def test_terms():
    assert int_term(TLit(-4)) == "(- 4)"
    assert int_term(eq(TVar("x"), TLit(1))) == "(ite (= |x| 1) 1 0)"
    assert int_term(TNeg(TVar("x"))) == "(ite (not (= |x| 0)) 0 1)"
    assert truthy(TNeg(TOp(PrimOp.LT, TVar("x"), TLit(0)))) == "(not (< |x| 0))"
    assert truthy(TOp(PrimOp.ADD, TVar("x"), TLit(1))) == "(not (= (+ |x| 1) 0))"


def test_encoding_is_deterministic():
    path = (FirstOrder(1, eq(TOp(PrimOp.ADD, TVar("b"), TVar("a")), TLit(2))),)
    s1 = encode(path, Store({"a": 0, "b": 0})).script()
    s2 = encode(path, Store({"b": 5, "a": 9})).script()
    assert s1 == s2
    assert s1.index("|b|") < s1.index("declare-const |a|")


def test_anyof():
    a = AnyOf(((1, eq(TVar("x"), TLit(1))), (1, eq(TVar("x"), TLit(2)))))
    assert a.term() == "(or (= |x| 1) (= |x| 2))"
    assert a.holds({"x": 2}) and not a.holds({"x": 3})
    assert AnyOf(()).term() == "false"


# --- responses -------------------------------------------------------------


def test_parse_response_variants():
    text = "sat\n(model (define-fun x () Int (- 3)) (define-fun y () Int 4))"
    assert parse_response(text) == Sat({"x": -3, "y": 4})
    assert parse_response("sat\n((define-fun x () Int -3))") == Sat({"x": -3})
    assert parse_response("sat\n()", declared=("q",)) == Sat({"q": 0})
    assert parse_response("unsat\n(error \"model is not available\")") == Unsat()
    assert isinstance(parse_response("unknown\n"), Unknown)
    # non-Int entries (e.g. solver-internal functions) are ignored
    assert parse_response("sat\n((define-fun b () Bool true) (define-fun x () Int 1))") == Sat({"x": 1})


@pytest.mark.parametrize("text", ["", "(", "maybe", "sat", "sat\n((define-fun x () Int (/ 1 2)))", "sat\nfoo"])
def test_parse_response_rejects(text):
    with pytest.raises(ProtocolError):
        parse_response(text)


# --- models ----------------------------------------------------------------


def test_apply_model_examples():
    assert apply_model(Store({"x": 0}), {"x": 3}) == Store({"x": 3})
    s = Store({"x": 0, "y": 7})
    assert apply_model(s, {"x": 1})["y"] == 7
    f = default_fn()
    assert apply_model(Store({"f": f, "x": 0}), {"x": 2, "f": 9})["f"] == f
    clash = Store({"a": 0, "b": 1, "f": _two_clause_fn(TVar("a"), TVar("b"))})
    with pytest.raises(ImproperResult):
        apply_model(clash, {"a": 4, "b": 4})


def test_model_reproduces():
    path = (FirstOrder(1, eq(TVar("x"), TLit(3))),)
    assert model_reproduces(path, Store({"x": 3})) == []
    assert len(model_reproduces(path, Store({"x": 2}))) == 1
    extra = (AnyOf(((1, eq(TVar("x"), TLit(9))),)),)
    assert len(model_reproduces(path, Store({"x": 3}), extra)) == 1


# --- the solver process ----------------------------------------------------


@needs_solver
def test_solve_examples():
    assert solve(Query(("x",), ("(= |x| 3)",))) == Sat({"x": 3})
    assert solve(Query(("x",), ("(= |x| 3)", "(= |x| 4)"))) == Unsat()
    res = solve(Query(("x",), ("(= (* |x| |x|) 2)",)))
    assert isinstance(res, (Unsat, Unknown))


@needs_solver
def test_negative_models():
    res = solve(Query(("x",), ("(< |x| (- 5))",)))
    assert isinstance(res, Sat) and res.model["x"] < -5


@needs_solver
def test_failed_branch_blocks_first_order():
    # a branch recorded as not taken on (= X 1) and a first-order constraint
    # requiring X = 1 cannot both hold
    path = (Branch(L(1), 0, eq(TVar("X"), TLit(1))), FirstOrder(1, eq(TVar("X"), TLit(1))))
    assert solve(encode(path, Store({"X": 0}))) == Unsat()


@needs_solver
def test_distinct_is_enforced():
    store = Store({"a": 0, "b": 1, "f": _two_clause_fn(TVar("a"), TVar("b"))})
    path = (FirstOrder(1, eq(TVar("a"), TLit(5))), FirstOrder(1, eq(TVar("b"), TLit(5))))
    assert solve(encode(path, store)) == Unsat()


_leaf = st.one_of(st.integers(-6, 6).map(TLit), st.sampled_from(["x", "y", "z"]).map(TVar))
_ops = [PrimOp.ADD, PrimOp.SUB, PrimOp.MUL, PrimOp.NUM_EQ, PrimOp.LE, PrimOp.LT]
traces = st.recursive(
    _leaf,
    lambda kids: st.one_of(kids.map(TNeg), st.tuples(st.sampled_from(_ops), kids, kids).map(lambda t: TOp(*t))),
    max_leaves=6,
)


@needs_solver
@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), traces), min_size=1, max_size=4))
def test_models_reproduce_constraints(items):
    path = tuple(FirstOrder(o, t) for o, t in items)
    store = Store({"x": 0, "y": 0, "z": 0})
    res = solve(encode(path, store))
    if isinstance(res, Sat):
        solved = apply_model(store, res.model)
        for c in path:
            assert int(trace_eval(c.trace, solved.numbers) != 0) == c.outcome


def test_spawn_error():
    with pytest.raises(SolverSpawnError):
        solve(Query(("x",), ("true",)), SolverConfig(("/no/such/solver",)))


def test_timeout_is_unknown():
    cfg = SolverConfig((sys.executable, "-c", "import time; time.sleep(5)"), timeout=0.2)
    assert solve(Query((), ("true",)), cfg) == Unknown("timeout")


def test_env_override(monkeypatch):
    monkeypatch.setenv("HOCONC_SOLVER", f"{sys.executable} -c \"print('unsat')\"")
    assert SolverConfig().resolved()[0] == sys.executable
    assert solve(Query((), ("false",))) == Unsat()
    monkeypatch.setenv("HOCONC_SOLVER", "z3")
    assert SolverConfig().resolved() == ("z3", "-in", "-smt2")
    assert SolverConfig(("cvc5",)).resolved() == ("cvc5",)


def test_garbage_output_is_protocol_error():
    cfg = SolverConfig((sys.executable, "-c", "print('hello')"))
    with pytest.raises(ProtocolError):
        solve(Query((), ("true",)), cfg)


def test_caching_solver():
    cfg = SolverConfig((sys.executable, "-c", "import sys; sys.stdin.read(); print('unsat')"))
    cs = CachingSolver(cfg)
    q = Query(("x",), ("(= |x| 1)",))
    assert cs(q) == Unsat() and cs(q) == Unsat()
    assert (cs.calls, cs.hits) == (1, 1)

"""Input evolution: every legal next input after one concolic run.

Given the store ``σ`` a run used and the path ``π`` it logged, the
candidates are built from each prefix of ``π``:

* a prefix ending in a first-order constraint is negated and handed to the
  solver;
* a prefix ending in a dispatch block that fell through to ``else`` grows
  the dispatch by one clause (``procedure?`` for functions, an equality
  test against the inspected value's trace for numbers);
* a block over a number can be rewritten so that a chosen clause fires,
  again via the solver.

Each candidate carries the path it predicts the next run will start with.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .canonical import (
    BranchClause,
    Dispatch,
    EqTrace,
    IsProc,
    LabelAllocator,
    LabelNotFound,
    LetCall,
    ReturnConcVar,
    ReturnFn,
    ReturnVar,
    Store,
    default_fn,
    find_dispatch,
    rewrite_dispatch,
    store_labels,
)
from .lang import PrimOp
from .smt import AnyOf, Query, encode
from .trace import Branch, FirstOrder, InspectedNumber, Test, TLit, TOp, trace_eval, trace_vars


class Rule(enum.Enum):
    TRUNCATE_PREFIX = "TruncatePrefix"
    NEGATE_LAST_TRUE = "NegateLastTrue"
    NEGATE_LAST_FALSE = "NegateLastFalse"
    ADD_BRANCH_PROC = "AddBranchProc"
    ADD_BRANCH_EQ_ON_ELSE = "AddBranchEqOnElse"
    ADD_BRANCH_EQ_MULTI = "AddBranchEqMulti"
    RETARGET_BRANCH = "RetargetBranch"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class EvolvePolicy:
    max_depth: int = 4
    max_clauses: int = 8
    retarget_disjunction: bool = True
    fresh_value: int = 0


@dataclass(frozen=True)
class Candidate:
    store: Store
    predicted: tuple
    rule: Rule
    query: Query | None = None
    prefix_len: int = 0
    truncated: bool = False
    labels: tuple = ()
    # constraints beyond ``predicted`` that a model must satisfy
    extra: tuple = field(default=(), compare=False)

    @property
    def rules(self) -> tuple:
        return (Rule.TRUNCATE_PREFIX, self.rule) if self.truncated else (self.rule,)

    def audit(self) -> dict:
        return {
            "rule": [str(r) for r in self.rules],
            "prefix": self.prefix_len,
            "labels": [lab.id for lab in self.labels],
            "solver": self.query is not None,
        }


def _constraints(path):
    return [c for c in path if isinstance(c, (FirstOrder, Branch))]


def paths_equivalent(p1, p2) -> bool:
    """Same first-order and branch constraints, ignoring test constraints."""
    return _constraints(p1) == _constraints(p2)


def is_prefix_equivalent(predicted, actual) -> bool:
    a, b = _constraints(predicted), _constraints(actual)
    return len(a) <= len(b) and b[: len(a)] == a


# --- branch bodies ---------------------------------------------------------


def evolve_bodies(scope_vars, scope_procs, store: Store, labels: LabelAllocator | None = None,
                  allow_nested: bool = True, fresh_value: int = 0) -> list:
    """Candidate bodies for a new clause, each with the store it needs.

    Order: a fresh number variable, the default function, each variable in
    scope, then a call of each procedure in scope on each variable in scope
    or on a fresh number variable.
    """
    labels = labels or LabelAllocator.for_store(store)
    scope_vars = list(scope_vars)
    taken: set = set()

    def fresh():
        name = store.fresh_var(taken)
        taken.add(name)
        return name

    out = []
    x = fresh()
    out.append((ReturnConcVar(x), store.set(x, fresh_value)))
    if allow_nested:
        out.append((ReturnFn(default_fn(labels)), store))
    for v in scope_vars:
        out.append((ReturnVar(v), store))
    if allow_nested:
        for g in [v for v in scope_vars if v in scope_procs]:
            for a in scope_vars:
                lab = labels.fresh()
                r = f"r{lab.id}"
                out.append((LetCall(g, a, r, Dispatch(r, (), lab)), store))
            x = fresh()
            lab = labels.fresh()
            r = f"r{lab.id}"
            out.append((LetCall(g, x, r, Dispatch(r, (), lab), arg_is_concvar=True), store.set(x, fresh_value)))
    return out


# --- enumeration -----------------------------------------------------------


def _segments(path):
    """Split ``path`` into ('fo', i) and ('block', i, j) items (j inclusive)."""
    i, n = 0, len(path)
    while i < n:
        c = path[i]
        if isinstance(c, FirstOrder):
            yield ("fo", i)
            i += 1
        elif isinstance(c, Test):
            j = i + 1
            while j < n and isinstance(path[j], Branch) and path[j].outcome == 0:
                j += 1
            if j < n and isinstance(path[j], Branch):
                yield ("block", i, j)
                i = j + 1
            else:
                yield ("open", i)  # run stopped inside the block
                i = j
        else:
            i += 1


def _constant_conflict(c) -> bool:
    """True if ``c`` has no variables and its recorded outcome is false."""
    if trace_vars(c.trace):
        return False
    return int(trace_eval(c.trace, {}) != 0) != c.outcome


def enumerate_mutations(store: Store, path, policy: EvolvePolicy | None = None) -> list:
    policy = policy or EvolvePolicy()
    path = tuple(path)
    out: list = []
    for seg in _segments(path):
        if seg[0] == "fo":
            out.extend(_negate(store, path, seg[1]))
        elif seg[0] == "block":
            _, i, j = seg
            try:
                site = find_dispatch(store, path[i].label)
            except LabelNotFound:
                continue
            out.extend(_add_branch(store, path, i, j, site, policy))
            out.extend(_retarget(store, path, i, j, site, policy))
    return out


def _negate(store, path, i):
    c = path[i]
    flipped = FirstOrder(1 - c.outcome, c.trace)
    if _constant_conflict(flipped):
        return []
    predicted = path[:i] + (flipped,)
    rule = Rule.NEGATE_LAST_TRUE if flipped.outcome == 1 else Rule.NEGATE_LAST_FALSE
    return [
        Candidate(store, predicted, rule, encode(predicted, store), i + 1, i + 1 < len(path))
    ]


def _add_branch(store, path, i, j, site, policy):
    d = site.dispatch
    test = path[i]
    if path[j].label != d.else_label or len(d.clauses) >= policy.max_clauses:
        return []
    inspected = test.inspected
    labels = LabelAllocator.for_store(store)
    clause_label = labels.fresh()
    if isinstance(inspected, InspectedNumber):
        rule = Rule.ADD_BRANCH_EQ_MULTI if d.clauses else Rule.ADD_BRANCH_EQ_ON_ELSE
        new_test = EqTrace(inspected.trace)
        branch = Branch(clause_label, 1, TOp(PrimOp.NUM_EQ, inspected.trace, inspected.trace))
        procs = site.procs
    else:
        if d.clauses:
            return []
        rule = Rule.ADD_BRANCH_PROC
        new_test = IsProc()
        branch = Branch(clause_label, 1, TLit(1))
        procs = site.procs | {d.scrutinee}
    predicted = path[:j] + (branch,)
    allow_nested = site.depth < policy.max_depth
    out = []
    for body, st in evolve_bodies(site.scope, procs, store, labels, allow_nested, policy.fresh_value):
        new_d = d.add_clause(BranchClause(clause_label, new_test, body))
        new_store = rewrite_dispatch(st, site, new_d)
        touched = (d.else_label, clause_label) + _body_labels(body)
        out.append(Candidate(new_store, predicted, rule, None, j + 1, j + 1 < len(path), touched))
    return out


def _body_labels(body) -> tuple:
    if isinstance(body, ReturnFn):
        return (body.fn.body.else_label,)
    if isinstance(body, LetCall):
        return (body.then.else_label,)
    return ()


def _block_for(d: Dispatch, inspected_trace, target):
    """Branch constraints a number with ``inspected_trace`` logs when it selects ``target``.

    ``target`` is a clause index, or None for the else branch.
    """
    out = []
    for k, clause in enumerate(d.clauses):
        hit = k == target
        if isinstance(clause.test, IsProc):
            trace = TLit(0)
        else:
            trace = TOp(PrimOp.NUM_EQ, inspected_trace, clause.test.trace)
        out.append(Branch(clause.label, int(hit), trace))
        if hit:
            return tuple(out)
    out.append(Branch(d.else_label, 1, TLit(1)))
    return tuple(out)


def _retarget(store, path, i, j, site, policy):
    d = site.dispatch
    test = path[i]
    if not isinstance(test.inspected, InspectedNumber):
        return []
    eq_idx = [k for k, c in enumerate(d.clauses) if isinstance(c.test, EqTrace)]
    if not eq_idx:
        return []
    taken = next((k for k, c in enumerate(d.clauses) if c.label == path[j].label), None)
    t_v = test.inspected.trace
    prefix = path[: i + 1]
    truncated = j + 1 < len(path)
    out = []
    targets = [k for k in eq_idx if k != taken] + ([None] if taken is not None else [])
    for k in targets:
        block = _block_for(d, t_v, k)
        if any(_constant_conflict(b) for b in block):
            continue
        predicted = prefix + block
        lab = d.else_label if k is None else d.clauses[k].label
        out.append(Candidate(store, predicted, Rule.RETARGET_BRANCH, encode(predicted, store),
                             i + 1, truncated, (d.else_label, lab)))
    others = [k for k in eq_idx if k != taken]
    if policy.retarget_disjunction and len(others) >= 2:
        anyof = AnyOf(tuple((1, TOp(PrimOp.NUM_EQ, t_v, d.clauses[k].test.trace)) for k in others))
        out.append(Candidate(store, prefix, Rule.RETARGET_BRANCH, encode(prefix, store, (anyof,)),
                             i + 1, truncated, (d.else_label,), (anyof,)))
    return out


def refine_prediction(c: Candidate, store: Store) -> tuple:
    """Full predicted path for ``c`` once the solver has produced ``store``.

    A disjunctive retarget only knows which clause fires after solving; its
    block is rebuilt here from the solved numbers. Other candidates are
    returned unchanged.
    """
    if not c.extra:
        return c.predicted
    test = c.predicted[-1]
    site = find_dispatch(store, test.label)
    d = site.dispatch
    v = trace_eval(test.inspected.trace, store.numbers)
    target = None
    for k, clause in enumerate(d.clauses):
        if isinstance(clause.test, EqTrace) and trace_eval(clause.test.trace, store.numbers) == v:
            target = k
            break
    return c.predicted + _block_for(d, test.inspected.trace, target)


def all_labels(store: Store) -> set:
    return set(store_labels(store))

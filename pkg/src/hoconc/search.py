"""The concolic loop with a breadth-first frontier.

Each iteration runs the program concolically on one store. A run that
raises ``(error)`` is replayed with the concrete interpreter and reported;
otherwise every mutation of the run's path is queued. Candidates that need
the solver are solved when dequeued, so the queue order is the order
mutations were generated in, and unsatisfiable candidates cost nothing
until their turn.
"""

from __future__ import annotations

import logging
import random
import time
from collections import Counter, deque
from dataclasses import dataclass, field

from .canonical import Store, Violation, check_proper, fingerprint, initial_store, print_store, reify_all
from .engine import DEFAULT_FUEL, concolic_eval
from .evolution import Candidate, EvolvePolicy, enumerate_mutations, is_prefix_equivalent, refine_prediction
from .interp import Bug, BugKind, FuelExhausted, Value, eval_user
from .lang import Program
from .smt import CachingSolver, ImproperResult, Sat, SolverConfig, Unsat, apply_model, model_reproduces
from .trace import constraint_to_record

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchConfig:
    max_iterations: int = 10_000
    wall_clock: float = 60.0
    fuel: int = DEFAULT_FUEL
    frontier_cap: int = 200_000
    # 0: inputs and fresh variables start at 0; otherwise seeds random starts
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    policy: EvolvePolicy = field(default_factory=EvolvePolicy)
    verify_predictions: bool = False
    count_stuck_as_bug: bool = False
    check_models: bool = True
    check_properness: bool = True

    def __post_init__(self):
        for name in ("max_iterations", "fuel", "frontier_cap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.wall_clock <= 0:
            raise ValueError("wall_clock must be positive")


@dataclass
class SearchStats:
    solver_calls: int = 0
    cache_hits: int = 0
    sat: int = 0
    unsat: int = 0
    unknown: int = 0
    duplicates: int = 0
    pruned: int = 0
    improper_results: int = 0
    prediction_checks: int = 0
    prediction_violations: list = field(default_factory=list)
    model_checks: int = 0
    model_violations: list = field(default_factory=list)
    properness_checks: int = 0
    properness_violations: list = field(default_factory=list)
    rules: Counter = field(default_factory=Counter)


@dataclass
class BugFound:
    store: Store
    reified_inputs: dict
    iterations: int
    replay_confirmed: bool
    trail: tuple
    kind: BugKind = BugKind.EXPLICIT_ERROR
    replay_outcome: object = None
    stats: SearchStats = field(default_factory=SearchStats)


@dataclass
class Exhausted:
    iterations: int
    stats: SearchStats = field(default_factory=SearchStats)


@dataclass
class BudgetExceeded:
    iterations: int
    reason: str = "iterations"
    stats: SearchStats = field(default_factory=SearchStats)


Report = BugFound | Exhausted | BudgetExceeded


def verify_prediction(predicted, actual) -> bool:
    """``predicted`` is equivalent to some prefix of ``actual``."""
    return is_prefix_equivalent(predicted, actual)


@dataclass
class _Node:
    store: Store
    cand: Candidate | None
    trail: tuple


def outcome_text(outcome) -> str:
    if isinstance(outcome, Value):
        v = outcome.value
        return f"value {v.value}" if hasattr(v, "trace") else "value <procedure>"
    if isinstance(outcome, Bug):
        return f"bug {outcome.kind.value}"
    return "fuel-exhausted"


def _randomize(store: Store, rng: random.Random) -> Store:
    return store.with_numbers({k: rng.randint(-8, 8) for k in store.numbers})


def run(p: Program, cfg: SearchConfig | None = None, observer=None, solver=None) -> Report:
    """Search for inputs that make ``p`` raise ``(error)``.

    ``observer``, if given, is called with a dict for every iteration and
    for frontier pruning; ``solver`` overrides the caching solver (tests).
    """
    cfg = cfg or SearchConfig()
    stats = SearchStats()
    solver = solver or CachingSolver(cfg.solver)
    rng = random.Random(cfg.seed) if cfg.seed else None
    targets = {BugKind.EXPLICIT_ERROR} | ({BugKind.STUCK} if cfg.count_stuck_as_bug else set())

    start = initial_store(p)
    if rng is not None:
        start = _randomize(start, rng)
    frontier: deque = deque([_Node(start, None, ())])
    seen: set = set()
    iterations = 0
    deadline = time.monotonic() + cfg.wall_clock

    def emit(record):
        if observer is not None:
            observer(record)

    def audit(store):
        if cfg.check_properness:
            stats.properness_checks += 1
            proper = check_proper(store)
            if isinstance(proper, Violation):
                stats.properness_violations.append((print_store(store), proper.reasons))

    def sync_solver_stats():
        stats.solver_calls = getattr(solver, "calls", stats.solver_calls)
        stats.cache_hits = getattr(solver, "hits", stats.cache_hits)

    audit(start)
    while frontier:
        if iterations >= cfg.max_iterations:
            sync_solver_stats()
            return BudgetExceeded(iterations, "iterations", stats)
        if time.monotonic() > deadline:
            sync_solver_stats()
            return BudgetExceeded(iterations, "time", stats)

        node = frontier.popleft()
        cand = node.cand
        store = node.store
        predicted = cand.predicted if cand is not None else None
        verdict = None
        if cand is not None and cand.query is not None:
            res = solver(cand.query)
            verdict = type(res).__name__.lower()
            if not isinstance(res, Sat):
                if isinstance(res, Unsat):
                    stats.unsat += 1
                else:
                    stats.unknown += 1
                continue
            stats.sat += 1
            try:
                store = apply_model(cand.store, res.model)
            except ImproperResult as exc:
                stats.improper_results += 1
                log.warning("solver model breaks dispatch disjointness: %s", exc)
                continue
            if cfg.check_models:
                stats.model_checks += 1
                bad = model_reproduces(cand.predicted, store, cand.extra)
                if bad:
                    stats.model_violations.append((print_store(store), [str(b) for b in bad]))
            predicted = refine_prediction(cand, store)
            audit(store)

        key = fingerprint(store)
        if key in seen:
            stats.duplicates += 1
            continue
        seen.add(key)

        iterations += 1
        outcome, path = concolic_eval(p, store, cfg.fuel)
        if cand is not None:
            stats.rules.update(str(r) for r in cand.rules)
        if cfg.verify_predictions and cand is not None and cand.query is not None:
            stats.prediction_checks += 1
            if not verify_prediction(predicted, path):
                stats.prediction_violations.append(
                    (print_store(store), [constraint_to_record(c) for c in predicted],
                     [constraint_to_record(c) for c in path])
                )

        emit({
            "event": "iteration",
            "iteration": iterations,
            "store": print_store(store),
            "rule": [str(r) for r in cand.rules] if cand is not None else [],
            "solver": verdict,
            "outcome": outcome_text(outcome),
            "path": [constraint_to_record(c) for c in path],
        })

        if isinstance(outcome, Bug) and outcome.kind in targets:
            bindings = reify_all(store, p.input_names)
            replay = eval_user(p, bindings, cfg.fuel * 2 + 1000)
            confirmed = isinstance(replay, Bug) and replay.kind == outcome.kind
            sync_solver_stats()
            return BugFound(store, bindings, iterations, confirmed, node.trail, outcome.kind, replay, stats)

        if isinstance(outcome, FuelExhausted):
            log.debug("iteration %d ran out of fuel", iterations)
        policy = cfg.policy
        if rng is not None:
            policy = EvolvePolicy(policy.max_depth, policy.max_clauses, policy.retarget_disjunction,
                                  rng.randint(-8, 8))
        for child in enumerate_mutations(store, path, policy):
            if child.query is None:
                audit(child.store)
            if len(frontier) >= cfg.frontier_cap:
                frontier.popleft()
                stats.pruned += 1
                emit({"event": "prune", "iteration": iterations, "frontier": len(frontier)})
            frontier.append(_Node(child.store, child, node.trail + (tuple(str(r) for r in child.rules),)))

    sync_solver_stats()
    return Exhausted(iterations, stats)

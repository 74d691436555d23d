"""Embedded planner over the compiled add-only model.

Search is A* with an admissible max-relaxation heuristic, so returned plans
are cost-minimal (and length-minimal under unit costs). Tie-breaking is fully
deterministic: successors are generated in lexicographic action-id order and
the open list breaks equal f-values by heuristic then insertion order, making
plans reproducible for identical models.

Because the model has no delete effects, relaxed reachability coincides with
real reachability, which makes the fact-landmark test exact: a fluent not
already true initially is a landmark iff removing all actions that add it
disconnects the goal.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Iterable

from .compiler import KNOWN, Fluent, GroundedAction, Plan, PlanningModel, validate_plan

_INF = float("inf")


@dataclass(frozen=True)
class SearchStats:
    expanded: int
    generated: int
    time: float


@dataclass(frozen=True)
class SearchResult:
    status: str  # "plan" | "unreachable"
    plan: Plan | None
    stats: SearchStats

    @property
    def solved(self) -> bool:
        return self.status == "plan"


@dataclass(frozen=True)
class LandmarkGraph:
    landmarks: frozenset[Fluent]
    orderings: frozenset[tuple[Fluent, Fluent]]
    layers: dict[Fluent, int] = field(default_factory=dict)

    def topological_order(self) -> list[Fluent]:
        # first-reachable layer strictly increases along every ordering edge,
        # so sorting by (layer, name) linearises the DAG deterministically.
        return sorted(self.landmarks, key=lambda f: (self.layers.get(f, 0), f.sort_key()))


def _usable(model: PlanningModel, excluded_achievers: frozenset[Fluent]) -> list[GroundedAction]:
    return [
        a
        for a in model.usable_actions()
        if not (a.add_effects & excluded_achievers)
    ]


def relaxed_reachable(model: PlanningModel, excluded_achievers: Iterable[Fluent] = ()) -> set[Fluent]:
    """Fixpoint of fact reachability, skipping any action that adds an
    excluded fluent. Exact (not just relaxed) on this add-only model."""
    return set(reachability_layers(model, excluded_achievers))


def reachability_layers(
    model: PlanningModel, excluded_achievers: Iterable[Fluent] = ()
) -> dict[Fluent, int]:
    """First fixpoint iteration at which each fluent becomes true."""
    excluded = frozenset(excluded_achievers)
    actions = _usable(model, excluded)
    layers: dict[Fluent, int] = {f: 0 for f in model.initial_state}
    pending = list(actions)
    layer = 0
    changed = True
    while changed:
        changed = False
        layer += 1
        state = set(layers)
        applied: list[GroundedAction] = []
        remaining: list[GroundedAction] = []
        for a in pending:
            if a.positive_preconditions <= state:
                applied.append(a)
            else:
                remaining.append(a)
        for a in applied:
            for f in a.add_effects:
                if f not in layers:
                    layers[f] = layer
                    changed = True
        pending = remaining
        if applied and not changed:
            # actions fired but added nothing new; fixpoint reached
            break
    return layers


def _hmax(model: PlanningModel, state: frozenset[Fluent], actions: list[GroundedAction]) -> float:
    """Admissible max-relaxation heuristic: cost-to-reach of the most
    expensive goal fluent."""
    cost: dict[Fluent, float] = {f: 0.0 for f in state}
    changed = True
    while changed:
        changed = False
        for a in actions:
            c = 0.0
            feasible = True
            for p in a.positive_preconditions:
                pc = cost.get(p)
                if pc is None:
                    feasible = False
                    break
                c = max(c, pc)
            if not feasible:
                continue
            c += a.cost
            for f in a.add_effects:
                if cost.get(f, _INF) > c:
                    cost[f] = c
                    changed = True
    h = 0.0
    for g in model.goal:
        gc = cost.get(g)
        if gc is None:
            return _INF
        h = max(h, gc)
    return h


def plan(model: PlanningModel) -> SearchResult:
    """Find a cost-minimal action sequence achieving the goal, or report the
    goal unreachable."""
    t0 = time.perf_counter()
    actions = model.usable_actions()
    init = model.initial_state

    reach = relaxed_reachable(model)
    if not model.goal <= reach:
        return SearchResult(
            "unreachable", None, SearchStats(0, 0, time.perf_counter() - t0)
        )

    if model.goal <= init:
        return SearchResult("plan", Plan(()), SearchStats(0, 0, time.perf_counter() - t0))

    # A* over monotonically growing states.
    h0 = _hmax(model, init, actions)
    open_heap: list[tuple[float, float, int, float, frozenset[Fluent]]] = [(h0, h0, 0, 0.0, init)]
    g_best: dict[frozenset[Fluent], float] = {init: 0.0}
    parent: dict[frozenset[Fluent], tuple[frozenset[Fluent], str]] = {}
    counter = 1
    expanded = generated = 0

    while open_heap:
        _, _, _, g, state = heappop(open_heap)
        if g > g_best.get(state, _INF):
            continue  # stale entry
        if model.goal <= state:
            steps: list[str] = []
            cur = state
            while cur in parent:
                cur, aid = parent[cur]
                steps.append(aid)
            steps.reverse()
            result = Plan(tuple(steps))
            return SearchResult(
                "plan", result, SearchStats(expanded, generated, time.perf_counter() - t0)
            )
        expanded += 1
        for a in actions:
            if not a.positive_preconditions <= state:
                continue
            nxt = state | a.add_effects
            if nxt == state:
                continue
            ng = g + a.cost
            if ng >= g_best.get(nxt, _INF):
                continue
            g_best[nxt] = ng
            parent[nxt] = (state, a.action_id)
            h = _hmax(model, nxt, actions)
            heappush(open_heap, (ng + h, h, counter, ng, nxt))
            counter += 1
            generated += 1

    # goal was relaxed-reachable, so on a delete-free model search cannot
    # exhaust without finding it; kept as a safeguard.
    return SearchResult("unreachable", None, SearchStats(expanded, generated, time.perf_counter() - t0))


def extract_landmarks(model: PlanningModel) -> LandmarkGraph:
    """Fact landmarks of the goal, with a first-reachable-layer ordering.

    A known-fluent is a landmark iff it is true initially or removing all of
    its achievers makes the goal unreachable; both directions are exact here
    because the model is delete-free. Compilation-specific fluents
    (authorized / cannot_establish) are never reported.
    """
    full_layers = reachability_layers(model)
    if not model.goal <= set(full_layers):
        raise ValueError("goal is not reachable; no landmarks to extract")

    landmarks: set[Fluent] = {
        f for f in model.initial_state if f.kind == KNOWN
    }
    candidates = [
        f
        for f in sorted(full_layers, key=lambda f: f.sort_key())
        if f.kind == KNOWN and f not in model.initial_state
    ]
    layers_without: dict[Fluent, dict[Fluent, int]] = {}
    for f in candidates:
        without = reachability_layers(model, excluded_achievers=(f,))
        layers_without[f] = without
        if not model.goal <= set(without):
            landmarks.add(f)

    orderings: set[tuple[Fluent, Fluent]] = set()
    for f2 in landmarks:
        l2 = full_layers.get(f2, 0)
        if l2 == 0:
            continue  # initially true: nothing is ordered before it
        without_f2 = layers_without.get(f2)
        for f1 in landmarks:
            if f1 == f2:
                continue
            if f1 in model.initial_state:
                orderings.add((f1, f2))
                continue
            l1 = (without_f2 or {}).get(f1, _INF)
            if l1 < l2:
                orderings.add((f1, f2))

    return LandmarkGraph(
        landmarks=frozenset(landmarks),
        orderings=frozenset(orderings),
        layers={f: full_layers.get(f, 0) for f in landmarks},
    )


def blocking_fluents(model: PlanningModel) -> list[Fluent]:
    """Root-cause fluents standing between the initial state and the goal:
    unreachable facts with no usable achiever left. Used for apology
    messages when planning reports unreachable."""
    reach = relaxed_reachable(model)
    unreached_goals = [g for g in sorted(model.goal, key=lambda f: f.sort_key()) if g not in reach]
    roots: list[Fluent] = []
    seen: set[Fluent] = set()
    stack = list(unreached_goals)
    while stack:
        f = stack.pop()
        if f in seen:
            continue
        seen.add(f)
        achievers = [a for a in model.usable_actions() if f in a.add_effects]
        if not achievers:
            roots.append(f)
            continue
        found_deeper = False
        for a in achievers:
            for p in sorted(a.positive_preconditions, key=lambda f: f.sort_key()):
                if p not in reach and p not in seen:
                    stack.append(p)
                    found_deeper = True
        if not found_deeper:
            roots.append(f)
    roots.sort(key=lambda f: f.sort_key())
    return roots or unreached_goals


def landmarks_to_doc(graph: LandmarkGraph) -> dict:
    return {
        "landmarks": [str(f) for f in graph.topological_order()],
        "orderings": sorted([str(a), str(b)] for a, b in graph.orderings),
    }


__all__ = [
    "SearchResult",
    "SearchStats",
    "LandmarkGraph",
    "plan",
    "relaxed_reachable",
    "reachability_layers",
    "extract_landmarks",
    "blocking_fluents",
    "landmarks_to_doc",
    "validate_plan",
]

"""Shared fixtures, random-model generators, and independent oracles.

The oracles here are deliberately naive (breadth-first search, exhaustive
plan enumeration) and share no code with the planner under test.
"""

from __future__ import annotations

import random
from collections import deque

import pytest

from conductor import compiler
from conductor.catalog import Catalog, Ontology, load_catalog
from conductor.compiler import KNOWN, PlanningModel
from conductor.config import Config, new_session
from conductor.fixtures import banking_fixture


@pytest.fixture(scope="session")
def banking():
    return banking_fixture()


@pytest.fixture()
def banking_session():
    return new_session(Config(), "test-session")


# --------------------------------------------------------------------------
# Random catalog / model generation
# --------------------------------------------------------------------------


def random_catalog(
    rng: random.Random,
    *,
    max_elements: int = 10,
    max_skills: int = 6,
    max_pairs: int = 4,
    max_outcomes: int = 3,
    parent_prob: float = 0.25,
    sensitive_prob: float = 0.2,
    fillable_prob: float = 0.4,
    declare_internals: bool | None = None,
) -> tuple[Ontology, Catalog]:
    n_elements = rng.randint(2, max_elements)
    ids = [f"e{i}" for i in range(n_elements)]
    ontology_doc = []
    for i, el in enumerate(ids):
        entry: dict = {"id": el}
        if i > 0 and rng.random() < parent_prob:
            entry["parent"] = ids[rng.randrange(i)]  # earlier elements only: forest by construction
        if rng.random() < sensitive_prob:
            entry["sensitive"] = True
        if rng.random() < fillable_prob:
            entry["slot_fillable"] = True
        ontology_doc.append(entry)

    skills_doc = []
    n_skills = rng.randint(0, max_skills)
    for s in range(n_skills):
        pairs = []
        for p in range(rng.randint(1, max_pairs)):
            inputs = rng.sample(ids, rng.randint(0, min(3, n_elements)))
            outcomes: list[list[str]] = []
            seen = set()
            for _ in range(rng.randint(1, max_outcomes)):
                outcome = tuple(sorted(rng.sample(ids, rng.randint(1, min(3, n_elements)))))
                if outcome in seen:
                    continue
                seen.add(outcome)
                outcomes.append(list(outcome))
            pairs.append({"pair_id": f"p{p}", "inputs": inputs, "outcomes": outcomes})
        skills_doc.append(
            {
                "skill_id": f"s{s}",
                "endpoint": f"sim:s{s}",
                "description": f"simulated skill {s}",
                "retry_limit": rng.randint(1, 3),
                "pairs": pairs,
            }
        )
    if declare_internals if declare_internals is not None else rng.random() < 0.5:
        skills_doc.append(
            {
                "skill_id": "slot_fill",
                "endpoint": "builtin:slot_fill",
                "description": "asks the user",
                "retry_limit": 2,
                "internal": True,
                "pairs": [{"pair_id": "fill", "inputs": [], "outcomes": []}],
            }
        )
        skills_doc.append(
            {
                "skill_id": "authorize",
                "endpoint": "builtin:authorize",
                "description": "asks for consent",
                "retry_limit": 2,
                "internal": True,
                "pairs": [{"pair_id": "grant", "inputs": [], "outcomes": []}],
            }
        )
    return load_catalog({"schema_version": 1, "ontology": ontology_doc, "skills": skills_doc})


def random_model(
    rng: random.Random,
    *,
    max_elements: int = 10,
    max_skills: int = 6,
    goal_size: int = 2,
    unit_costs: bool = True,
    require_solvable: bool = False,
) -> PlanningModel:
    """Random compiled model with a random initial state and goal."""
    while True:
        ontology, catalog = random_catalog(
            rng, max_elements=max_elements, max_skills=max_skills
        )
        ids = sorted(ontology.elements)
        initial = rng.sample(ids, rng.randint(0, max(0, len(ids) // 2)))
        goal = rng.sample(ids, rng.randint(1, min(goal_size, len(ids))))
        model = compiler.compile(
            catalog,
            ontology,
            ltm_known=initial,
            goal=goal,
            slot_fill_cost=1 if unit_costs else 2,
        )
        if not require_solvable:
            return model
        if bfs_optimal_length(model) is not None:
            return model


# --------------------------------------------------------------------------
# Independent oracles
# --------------------------------------------------------------------------


def bfs_optimal_length(model: PlanningModel) -> int | None:
    """Breadth-first optimal plan length under unit costs; None if unsolvable."""
    start = model.initial_state
    if model.goal <= start:
        return 0
    actions = model.usable_actions()
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        state, depth = queue.popleft()
        for action in actions:
            if not action.positive_preconditions <= state:
                continue
            nxt = state | action.add_effects
            if nxt == state or nxt in seen:
                continue
            if model.goal <= nxt:
                return depth + 1
            seen.add(nxt)
            queue.append((nxt, depth + 1))
    return None


def enumerate_goal_fact_sets(model: PlanningModel, max_len: int = 8) -> list[frozenset]:
    """Known-fluent fact sets of every irredundant goal-reaching plan up to
    max_len steps (each step must add at least one new fluent, which loses
    no generality on an add-only model)."""
    actions = model.usable_actions()
    results: list[frozenset] = []

    def rec(state, depth):
        if model.goal <= state:
            results.append(frozenset(f for f in state if f.kind == KNOWN))
            return
        if depth == max_len:
            return
        for action in actions:
            if action.positive_preconditions <= state:
                nxt = state | action.add_effects
                if nxt == state:
                    continue
                rec(nxt, depth + 1)

    rec(model.initial_state, 0)
    return results


def reachable_fluent_count(model: PlanningModel) -> int:
    """Number of reachable fluents not true initially (bounds irredundant
    plan length)."""
    from conductor.planner import relaxed_reachable

    return len(relaxed_reachable(model) - model.initial_state)

"""Compile a skill catalog plus session state into a grounded planning model.

Every declared outcome set of every external skill pair becomes its own
deterministic action ("plan for the outcome you want, observe what you get").
The model is add-only: actions have no delete effects, so reached states only
grow, which keeps search, reachability, and landmark extraction exact and
cheap.

Three fluent kinds exist:

* ``known(e)``       -- element e has an established value,
* ``authorized(s)``  -- skill s may receive sensitive inputs,
* ``cannot_establish(p, e)`` -- pair p has repeatedly failed to produce e;
  held in ``static_true`` and consulted as a negative precondition.

Subsumption is handled by ancestor closure: whenever known(e) is set, known(a)
is set for every ancestor a of e, so a precondition on the general element is
satisfied by any of its specialisations. Pair identities inside fluents are
qualified as ``skill_id::pair_id`` since bare pair ids are only unique within
one skill.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

from .catalog import Catalog, Ontology, SkillSpec

KNOWN = "known"
AUTHORIZED = "authorized"
CANNOT_ESTABLISH = "cannot_establish"

BUILTIN_SLOT_FILL = "builtin:slot_fill"
BUILTIN_AUTHORIZE = "builtin:authorize"

DEFAULT_SLOT_FILL_COST = 2


@dataclass(frozen=True)
class Fluent:
    kind: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.kind}({', '.join(self.args)})"

    def sort_key(self) -> tuple[str, tuple[str, ...]]:
        return (self.kind, self.args)


def known(element: str) -> Fluent:
    return Fluent(KNOWN, (element,))


def authorized(skill_id: str) -> Fluent:
    return Fluent(AUTHORIZED, (skill_id,))


def cannot_establish(pair_key: str, element: str) -> Fluent:
    return Fluent(CANNOT_ESTABLISH, (pair_key, element))


def pair_key(skill_id: str, pair_id: str) -> str:
    return f"{skill_id}::{pair_id}"


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class GroundedAction:
    action_id: str
    skill_id: str
    pair_id: str
    outcome_index: int
    positive_preconditions: frozenset[Fluent]
    negative_static_preconditions: frozenset[Fluent]
    add_effects: frozenset[Fluent]
    cost: int = 1
    target: str | None = None  # element for slot_fill, skill for authorize

    @property
    def pair_key(self) -> str:
        return pair_key(self.skill_id, self.pair_id)


@dataclass(frozen=True)
class Plan:
    steps: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


@dataclass(frozen=True)
class PlanningModel:
    actions: dict[str, GroundedAction]
    initial_state: frozenset[Fluent]
    static_true: frozenset[Fluent]
    goal: frozenset[Fluent]
    pruned: frozenset[str] = frozenset()

    def applicable(self, action: GroundedAction, state: frozenset[Fluent]) -> bool:
        return action.positive_preconditions <= state and not (
            action.negative_static_preconditions & self.static_true
        )

    def usable_actions(self) -> list[GroundedAction]:
        """Actions not statically blocked by a learned cannot_establish fact."""
        return [
            a
            for a in sorted(self.actions.values(), key=lambda a: a.action_id)
            if not (a.negative_static_preconditions & self.static_true)
        ]

    def goal_satisfied(self, state: frozenset[Fluent]) -> bool:
        return self.goal <= state


def closure(elements: Iterable[str], ontology: Ontology) -> set[str]:
    """Elements plus all their ancestors."""
    out: set[str] = set()
    for e in elements:
        out.add(e)
        if e in ontology:
            out.update(ontology.ancestors(e))
    return out


def known_closure(elements: Iterable[str], ontology: Ontology) -> frozenset[Fluent]:
    return frozenset(known(e) for e in closure(elements, ontology))


def _slot_fill_identity(catalog: Catalog) -> tuple[str, str]:
    """(skill_id, pair_id) used for slot-fill actions and their retry fluents.

    The catalog may declare the built-in; otherwise defaults apply so the
    capability is always compiled.
    """
    spec = catalog.internal_skill(BUILTIN_SLOT_FILL)
    if spec is not None:
        pid = spec.pairs[0].pair_id if spec.pairs else "fill"
        return spec.skill_id, pid
    return "slot_fill", "fill"


def _authorize_identity(catalog: Catalog) -> tuple[str, str]:
    spec = catalog.internal_skill(BUILTIN_AUTHORIZE)
    if spec is not None:
        pid = spec.pairs[0].pair_id if spec.pairs else "grant"
        return spec.skill_id, pid
    return "authorize", "grant"


def slot_fill_action_id(element: str, catalog: Catalog) -> str:
    return f"{_slot_fill_identity(catalog)[0]}/{element}"


def authorize_action_id(skill_id: str, catalog: Catalog) -> str:
    return f"{_authorize_identity(catalog)[0]}/{skill_id}"


def compile_internal(
    catalog: Catalog,
    ontology: Ontology,
    *,
    slot_fill_cost: int = DEFAULT_SLOT_FILL_COST,
) -> dict[str, GroundedAction]:
    """Built-in slot-fill and authorization actions.

    One slot-fill action per slot-fillable element; one authorize action per
    external skill that consumes a sensitive element anywhere.
    """
    actions: dict[str, GroundedAction] = {}
    sf_skill, sf_pair = _slot_fill_identity(catalog)
    for element in ontology.slot_fillable_elements():
        aid = f"{sf_skill}/{element}"
        actions[aid] = GroundedAction(
            action_id=aid,
            skill_id=sf_skill,
            pair_id=sf_pair,
            outcome_index=0,
            positive_preconditions=frozenset(),
            negative_static_preconditions=frozenset({cannot_establish(pair_key(sf_skill, sf_pair), element)}),
            add_effects=known_closure([element], ontology),
            cost=slot_fill_cost,
            target=element,
        )

    auth_skill, auth_pair = _authorize_identity(catalog)
    for skill in sorted(catalog.external_skills(), key=lambda s: s.skill_id):
        if skill.consumes_sensitive(ontology):
            aid = f"{auth_skill}/{skill.skill_id}"
            # asking permission only once the sensitive facts exist keeps
            # authorization adjacent to the submission that needs it; this
            # never affects reachability since every consumer of
            # authorized(s) requires those known(e) facts itself.
            sensitive_inputs = {
                e
                for p in skill.pairs
                for e in p.inputs
                if e in ontology and ontology[e].sensitive
            }
            actions[aid] = GroundedAction(
                action_id=aid,
                skill_id=auth_skill,
                pair_id=auth_pair,
                outcome_index=0,
                positive_preconditions=frozenset(known(e) for e in sensitive_inputs),
                negative_static_preconditions=frozenset(
                    {cannot_establish(pair_key(auth_skill, auth_pair), skill.skill_id)}
                ),
                add_effects=frozenset({authorized(skill.skill_id)}),
                cost=1,
                target=skill.skill_id,
            )
    return actions


def _external_actions(skill: SkillSpec, ontology: Ontology) -> dict[str, GroundedAction]:
    actions: dict[str, GroundedAction] = {}
    needs_auth = skill.consumes_sensitive(ontology)
    for pair in skill.pairs:
        pkey = pair_key(skill.skill_id, pair.pair_id)
        pos: set[Fluent] = {known(e) for e in pair.inputs}
        if needs_auth and any(e in ontology and ontology[e].sensitive for e in pair.inputs):
            pos.add(authorized(skill.skill_id))
        for j, outcome in enumerate(pair.outcomes):
            aid = f"{skill.skill_id}/{pair.pair_id}/o{j}"
            actions[aid] = GroundedAction(
                action_id=aid,
                skill_id=skill.skill_id,
                pair_id=pair.pair_id,
                outcome_index=j,
                positive_preconditions=frozenset(pos),
                negative_static_preconditions=frozenset(cannot_establish(pkey, e) for e in outcome),
                add_effects=known_closure(outcome, ontology),
                cost=1,
            )
    return actions


def compile(
    catalog: Catalog,
    ontology: Ontology,
    ltm_known: Iterable[str],
    learned: Iterable[Fluent] = (),
    pruned: Iterable[str] = (),
    goal: Iterable[str] = (),
    *,
    authorized_skills: Iterable[str] = (),
    slot_fill_cost: int = DEFAULT_SLOT_FILL_COST,
) -> PlanningModel:
    """Ground the catalog against the current session state.

    ``learned`` carries cannot_establish fluents accumulated this session;
    ``pruned`` action ids are dropped from the model entirely.
    """
    goal_elements = list(goal)
    for g in goal_elements:
        if g not in ontology:
            raise CompileError(f"unknown goal element {g!r}")

    actions: dict[str, GroundedAction] = {}
    for skill in sorted(catalog.external_skills(), key=lambda s: s.skill_id):
        actions.update(_external_actions(skill, ontology))
    actions.update(compile_internal(catalog, ontology, slot_fill_cost=slot_fill_cost))

    pruned_set = frozenset(pruned)
    for aid in pruned_set:
        actions.pop(aid, None)

    init: set[Fluent] = set(known_closure(ltm_known, ontology))
    init.update(authorized(s) for s in authorized_skills)

    return PlanningModel(
        actions=actions,
        initial_state=frozenset(init),
        static_true=frozenset(learned),
        goal=frozenset(known(g) for g in goal_elements),
        pruned=pruned_set,
    )


def determinization_count(catalog: Catalog, ontology: Ontology) -> int:
    """Expected action count: one per declared outcome, per slot-fillable
    element, and per sensitive-consuming external skill."""
    n = sum(len(pair.outcomes) for s in catalog.external_skills() for pair in s.pairs)
    n += len(ontology.slot_fillable_elements())
    n += sum(1 for s in catalog.external_skills() if s.consumes_sensitive(ontology))
    return n


def validate_plan(model: PlanningModel, plan: Plan | Iterable[str]) -> bool:
    """Simulate the plan from the initial state; true iff every step applies
    and the goal holds at the end."""
    state = set(model.initial_state)
    steps = plan.steps if isinstance(plan, Plan) else tuple(plan)
    for aid in steps:
        if aid not in model.actions:
            raise KeyError(f"unknown action {aid!r}")
        action = model.actions[aid]
        if not action.positive_preconditions <= state:
            return False
        if action.negative_static_preconditions & model.static_true:
            return False
        state.update(action.add_effects)
    return model.goal <= state


def prune_action(model: PlanningModel, action_id: str) -> PlanningModel:
    if action_id not in model.actions:
        raise KeyError(f"unknown action {action_id!r}")
    actions = dict(model.actions)
    del actions[action_id]
    return replace(model, actions=actions, pruned=model.pruned | {action_id})


# --------------------------------------------------------------------------
# Dumps
# --------------------------------------------------------------------------


def model_to_doc(model: PlanningModel) -> dict:
    return {
        "initial_state": sorted(str(f) for f in model.initial_state),
        "static_true": sorted(str(f) for f in model.static_true),
        "goal": sorted(str(f) for f in model.goal),
        "pruned": sorted(model.pruned),
        "actions": [
            {
                "action_id": a.action_id,
                "skill_id": a.skill_id,
                "pair_id": a.pair_id,
                "outcome_index": a.outcome_index,
                "cost": a.cost,
                "preconditions": sorted(str(f) for f in a.positive_preconditions),
                "not_cannot_establish": sorted(str(f) for f in a.negative_static_preconditions),
                "add_effects": sorted(str(f) for f in a.add_effects),
            }
            for a in sorted(model.actions.values(), key=lambda a: a.action_id)
        ],
    }


def _pddl_atom(f: Fluent) -> str:
    return f"({f.kind} {' '.join(_pddl_name(a) for a in f.args)})"


def _pddl_name(name: str) -> str:
    out = name.replace("::", "--").replace("/", "-").replace("_", "-")
    return out.lower()


def model_to_pddl(model: PlanningModel, domain_name: str = "assistant") -> tuple[str, str]:
    """Grounded PDDL (domain, problem) for cross-checking with external planners."""
    elements: set[str] = set()
    pairs: set[str] = set()
    skills: set[str] = set()

    def scan(f: Fluent) -> None:
        if f.kind == KNOWN:
            elements.add(f.args[0])
        elif f.kind == AUTHORIZED:
            skills.add(f.args[0])
        else:
            pairs.add(f.args[0])
            elements.add(f.args[1])

    for f in model.initial_state | model.goal | model.static_true:
        scan(f)
    for a in model.actions.values():
        for f in a.positive_preconditions | a.negative_static_preconditions | a.add_effects:
            scan(f)

    lines = [
        f"(define (domain {domain_name})",
        "  (:requirements :strips :typing :negative-preconditions :action-costs)",
        "  (:types element pair skill - object)",
        "  (:predicates (known ?e - element)",
        "               (authorized ?s - skill)",
        "               (cannot-establish ?p - pair ?e - element))",
        "  (:functions (total-cost) - number)",
    ]
    for a in sorted(model.actions.values(), key=lambda a: a.action_id):
        pre = sorted(_pddl_atom(f) for f in a.positive_preconditions)
        pre += sorted(
            f"(not (cannot-establish {_pddl_name(f.args[0])} {_pddl_name(f.args[1])}))"
            for f in a.negative_static_preconditions
        )
        eff = sorted(_pddl_atom(f) for f in a.add_effects)
        eff.append(f"(increase (total-cost) {a.cost})")
        lines.append(f"  (:action {_pddl_name(a.action_id)}")
        lines.append("    :parameters ()")
        lines.append(f"    :precondition (and {' '.join(pre) if pre else '()'})")
        lines.append(f"    :effect (and {' '.join(eff)}))")
    lines.append(")")
    domain = "\n".join(lines)

    objs = [f"    {' '.join(sorted(_pddl_name(e) for e in elements))} - element"] if elements else []
    if pairs:
        objs.append(f"    {' '.join(sorted(_pddl_name(p) for p in pairs))} - pair")
    if skills:
        objs.append(f"    {' '.join(sorted(_pddl_name(s) for s in skills))} - skill")
    init = sorted(_pddl_atom(f) for f in model.initial_state)
    init += sorted(
        f"(cannot-establish {_pddl_name(f.args[0])} {_pddl_name(f.args[1])})" for f in model.static_true
    )
    init.append("(= (total-cost) 0)")
    plines = [
        f"(define (problem {domain_name}-turn)",
        f"  (:domain {domain_name})",
        "  (:objects",
        *objs,
        "  )",
        "  (:init " + " ".join(init) + ")",
        "  (:goal (and " + " ".join(sorted(_pddl_atom(f) for f in model.goal)) + "))",
        "  (:metric minimize (total-cost))",
        ")",
    ]
    return domain, "\n".join(plines)

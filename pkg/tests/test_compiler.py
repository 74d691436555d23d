import random

import pytest
from hypothesis import given, settings, strategies as st

from conductor import compiler
from conductor.catalog import load_catalog
from conductor.compiler import (
    Plan,
    authorized,
    cannot_establish,
    compile,
    compile_internal,
    determinization_count,
    known,
    model_to_doc,
    model_to_pddl,
    pair_key,
    prune_action,
    validate_plan,
)

from conftest import random_catalog


def test_db_retrieval_two_pairs_two_actions(banking):
    model = compile(banking.catalog, banking.ontology, ltm_known=(), goal=["bank_record"])
    db_actions = [a for a in model.actions.values() if a.skill_id == "db_retrieve"]
    assert len(db_actions) == 2
    assert {a.pair_id for a in db_actions} == {"by_email", "by_account"}


def test_loan_pair_three_outcomes_three_actions(banking):
    model = compile(banking.catalog, banking.ontology, ltm_known=(), goal=["loan_decision"])
    loan_actions = sorted(a.action_id for a in model.actions.values() if a.skill_id == "loan_submit")
    assert loan_actions == ["loan_submit/apply/o0", "loan_submit/apply/o1", "loan_submit/apply/o2"]


def test_empty_catalog_zero_external_actions():
    ontology, catalog = load_catalog(
        {"schema_version": 1, "ontology": [{"id": "x", "slot_fillable": True}], "skills": []}
    )
    model = compile(catalog, ontology, ltm_known=(), goal=["x"])
    external = [a for a in model.actions.values() if a.skill_id not in ("slot_fill", "authorize")]
    assert external == []
    assert "slot_fill/x" in model.actions  # the built-in capability still exists


def test_internal_slot_fill_one_action_per_fillable(banking):
    actions = compile_internal(banking.catalog, banking.ontology)
    slot = sorted(a.target for a in actions.values() if a.skill_id == "slot_fill")
    assert slot == ["email", "id_document", "name", "salary"]


def test_internal_authorize_for_sensitive_consumers(banking):
    actions = compile_internal(banking.catalog, banking.ontology)
    auth = sorted(a.target for a in actions.values() if a.skill_id == "authorize")
    assert auth == ["credit_card_submit", "loan_submit"]
    model = compile(banking.catalog, banking.ontology, ltm_known=(), goal=["loan_decision"])
    loan = model.actions["loan_submit/apply/o0"]
    assert authorized("loan_submit") in loan.positive_preconditions


def test_no_sensitive_elements_no_authorize_actions():
    ontology, catalog = load_catalog(
        {
            "schema_version": 1,
            "ontology": [{"id": "a", "slot_fillable": True}, {"id": "b"}],
            "skills": [
                {
                    "skill_id": "s",
                    "endpoint": "sim:s",
                    "description": "d",
                    "retry_limit": 1,
                    "pairs": [{"pair_id": "p", "inputs": ["a"], "outcomes": [["b"]]}],
                }
            ],
        }
    )
    actions = compile_internal(catalog, ontology)
    assert all(a.skill_id != "authorize" for a in actions.values())


def test_goal_fluents_and_initial_state(banking):
    model = compile(
        banking.catalog, banking.ontology, ltm_known=["email"], goal=["loan_decision"]
    )
    assert model.goal == frozenset({known("loan_decision")})
    assert known("email") in model.initial_state


def test_initial_state_ancestor_closure(banking):
    model = compile(
        banking.catalog, banking.ontology, ltm_known=["rejected_status"], goal=["loan_decision"]
    )
    assert known("loan_decision") in model.initial_state


def test_effect_ancestor_closure(banking):
    model = compile(banking.catalog, banking.ontology, ltm_known=(), goal=["loan_decision"])
    action = model.actions["loan_submit/apply/o1"]
    assert known("rejected_status") in action.add_effects
    assert known("loan_decision") in action.add_effects


def test_unknown_goal_element_rejected(banking):
    with pytest.raises(compiler.CompileError):
        compile(banking.catalog, banking.ontology, ltm_known=(), goal=["fax_number"])


def test_learned_lands_in_static_true(banking):
    fluent = cannot_establish(pair_key("db_retrieve", "by_email"), "bank_record")
    model = compile(
        banking.catalog, banking.ontology, ltm_known=(), learned=[fluent], goal=["bank_record"]
    )
    assert fluent in model.static_true
    blocked = model.actions["db_retrieve/by_email/o0"]
    assert not model.applicable(blocked, model.initial_state | blocked.positive_preconditions)


def test_negative_static_preconditions_per_outcome_element(banking):
    model = compile(banking.catalog, banking.ontology, ltm_known=(), goal=["bank_record"])
    action = model.actions["db_retrieve/by_email/o0"]
    pkey = pair_key("db_retrieve", "by_email")
    skill = banking.catalog.skills["db_retrieve"]
    expected = {cannot_establish(pkey, e) for e in skill.pair("by_email").outcomes[0]}
    assert action.negative_static_preconditions == expected


# -- validate_plan -----------------------------------------------------------


def test_validate_empty_plan_goal_in_init(banking):
    model = compile(banking.catalog, banking.ontology, ltm_known=["email"], goal=["email"])
    assert validate_plan(model, Plan(())) is True


def test_validate_two_step_fixture_plan(banking):
    model = compile(banking.catalog, banking.ontology, ltm_known=(), goal=["bank_record"])
    assert validate_plan(model, ["slot_fill/email", "db_retrieve/by_email/o0"]) is True
    assert validate_plan(model, ["db_retrieve/by_email/o0"]) is False  # email unknown


def test_validate_plan_blocked_by_cannot_establish(banking):
    fluent = cannot_establish(pair_key("db_retrieve", "by_email"), "bank_record")
    model = compile(
        banking.catalog, banking.ontology, ltm_known=(), learned=[fluent], goal=["bank_record"]
    )
    assert validate_plan(model, ["slot_fill/email", "db_retrieve/by_email/o0"]) is False


def test_validate_plan_unknown_action(banking):
    model = compile(banking.catalog, banking.ontology, ltm_known=(), goal=["bank_record"])
    with pytest.raises(KeyError):
        validate_plan(model, ["nope/a/o0"])


# -- prune -------------------------------------------------------------------


def test_prune_removes_and_records(banking):
    model = compile(banking.catalog, banking.ontology, ltm_known=(), goal=["bank_record"])
    pruned = prune_action(model, "db_retrieve/by_email/o0")
    assert "db_retrieve/by_email/o0" not in pruned.actions
    assert "db_retrieve/by_email/o0" in pruned.pruned
    with pytest.raises(KeyError):
        prune_action(model, "db_retrieve/by_email/o0")
        prune_action(pruned, "db_retrieve/by_email/o0")


def test_prune_sole_achiever_makes_goal_unreachable(banking):
    from conductor.planner import plan

    model = compile(banking.catalog, banking.ontology, ltm_known=["name"], goal=["cc_decision"])
    for aid in ("credit_card_submit/apply/o0", "credit_card_submit/apply/o1"):
        model = prune_action(model, aid)
    assert plan(model).status == "unreachable"


def test_prune_unrelated_action_plan_unchanged(banking):
    from conductor.planner import plan

    model = compile(banking.catalog, banking.ontology, ltm_known=["email"], goal=["bank_record"])
    before = plan(model).plan.steps
    model2 = prune_action(model, "ocr/scan/o0")
    assert plan(model2).plan.steps == before


# -- invariants over random catalogs ----------------------------------------


@given(st.integers(min_value=0, max_value=100_000))
@settings(max_examples=60, deadline=None)
def test_determinization_count_law(seed):
    rng = random.Random(seed)
    ontology, catalog = random_catalog(rng, max_skills=8, max_pairs=4, max_outcomes=3)
    model = compile(catalog, ontology, ltm_known=(), goal=[])
    assert len(model.actions) == determinization_count(catalog, ontology)


@given(st.integers(min_value=0, max_value=100_000))
@settings(max_examples=40, deadline=None)
def test_monotone_state_growth_and_ancestor_closure(seed):
    rng = random.Random(seed)
    ontology, catalog = random_catalog(rng)
    ids = sorted(ontology.elements)
    init = rng.sample(ids, rng.randint(0, len(ids) // 2))
    model = compile(catalog, ontology, ltm_known=init, goal=[])
    state = set(model.initial_state)
    for action in model.usable_actions():
        if action.positive_preconditions <= state:
            new_state = state | set(action.add_effects)
            assert state <= new_state  # add-only
            state = new_state
    for fluent in state:
        if fluent.kind == compiler.KNOWN:
            for ancestor in ontology.ancestors(fluent.args[0]):
                assert known(ancestor) in state


@given(st.integers(min_value=0, max_value=100_000))
@settings(max_examples=40, deadline=None)
def test_cannot_establish_is_antimonotone(seed):
    rng = random.Random(seed)
    ontology, catalog = random_catalog(rng)
    ids = sorted(ontology.elements)
    model = compile(catalog, ontology, ltm_known=(), goal=[])
    usable_before = {a.action_id for a in model.usable_actions()}
    some_action = sorted(model.actions.values(), key=lambda a: a.action_id)
    extra = set()
    for action in some_action[: len(some_action) // 2]:
        for neg in action.negative_static_preconditions:
            extra.add(neg)
    model2 = compile(catalog, ontology, ltm_known=(), learned=extra, goal=[])
    usable_after = {a.action_id for a in model2.usable_actions()}
    assert usable_after <= usable_before


def test_model_doc_and_pddl_render(banking):
    model = compile(banking.catalog, banking.ontology, ltm_known=["email"], goal=["loan_decision"])
    doc = model_to_doc(model)
    assert doc["goal"] == ["known(loan_decision)"]
    assert any(a["action_id"] == "loan_submit/apply/o0" for a in doc["actions"])
    domain, problem = model_to_pddl(model)
    assert "(define (domain assistant)" in domain
    assert "(:action loan-submit-apply-o0" in domain
    assert "(known email)" in problem
    assert "(:goal (and (known loan-decision)))" in problem

from conductor.catalog import load_catalog
from conductor.compiler import cannot_establish, pair_key
from conductor.config import Config, new_session
from conductor.goals import Event
from conductor.memory import Provenance
from conductor.orchestrator import (
    Session,
    SessionSettings,
    authorization_gate,
    handle_event,
    s3_orchestrate,
    s3_select,
)
from conductor.skills import InvocationResult, ScriptedSkill, SlotFillRuntime


def turn(session, text):
    return handle_event(session, Event(text=text))


def test_loan_request_on_empty_memory_asks_first_item(banking_session):
    out = turn(banking_session, "I want a loan")
    assert out.asked is not None
    assert out.asked.ask_kind == "slot_fill"
    assert out.asked.target == "email"
    assert any("email" in m for m in out.messages)


def test_goal_already_satisfied_no_skill_calls(banking_session):
    session = banking_session
    session.ltm.put_fact("account_balance", "42.00", Provenance.seed())
    out = turn(session, "what is my balance?")
    assert out.achieved == ["account_balance"]
    assert len(session.history) == 0
    assert any("42.00" in m for m in out.messages)


def test_digression_answers_and_resumes(banking_session):
    session = banking_session
    turn(session, "I want a loan")
    turn(session, "ada@bank.com")
    out = turn(session, "what is my account balance?")
    joined = " ".join(out.messages)
    assert "switching to account balance" in joined
    assert "1,250.00" in joined
    assert "Back to loan decision" in joined
    assert out.asked is not None and out.asked.ask_kind == "authorize"


def test_divergent_outcome_writes_facts_and_bumps_counters(banking_session):
    session = banking_session
    turn(session, "I want a loan")
    turn(session, "ada@bank.com")
    out = turn(session, "yes")
    # desired approved (o0), scripted rejection (o1): fact still lands
    assert session.ltm.value_of("rejected_status") is not None
    key = (pair_key("loan_submit", "apply"), "approved_status")
    assert session.retry_counters[key] == 1
    assert out.achieved == ["loan_decision"]
    loan_recs = [r for r in session.history if r.skill_id == "loan_submit"]
    assert [r.success for r in loan_recs] == [False]


def test_success_path_single_record(banking_session):
    session = banking_session
    turn(session, "show me my bank record")
    turn(session, "ada@bank.com")
    db_recs = [r for r in session.history if r.skill_id == "db_retrieve"]
    assert len(db_recs) == 1 and db_recs[0].success
    assert db_recs[0].desired_outcome_index == 0
    assert db_recs[0].inputs_consumed == frozenset({"email"})


def test_counter_crossing_limit_freezes_and_reroutes(banking_session):
    session = banking_session
    turn(session, "what is my balance?")
    out = turn(session, "ghost@nowhere.io")
    limit = session.catalog.skills["db_retrieve"].retry_limit
    key = (pair_key("db_retrieve", "by_email"), "account_balance")
    assert session.retry_counters[key] == limit
    assert cannot_establish(pair_key("db_retrieve", "by_email"), "account_balance") in session.learned
    # all future plans exclude the blocked action and reroute via slot fill
    steps = session.plan_snapshots[-1]["steps"]
    assert "db_retrieve/by_email/o0" not in steps
    assert steps[0] == "slot_fill/id_document"
    assert out.asked.target == "id_document"


def test_learned_persists_across_goals(banking_session):
    session = banking_session
    turn(session, "what is my balance?")
    turn(session, "ghost@nowhere.io")
    turn(session, "stop")
    turn(session, "show me my bank record")
    steps = session.plan_snapshots[-1]["steps"]
    assert "db_retrieve/by_email/o0" not in steps


def test_slot_fill_unparseable_replies_trigger_cannot_establish(banking_session):
    session = banking_session
    turn(session, "what is my balance?")
    first = turn(session, "this is not an email at all")
    assert first.asked is not None and first.asked.target == "email"  # re-asked once
    second = turn(session, "still garbage with no at sign")
    assert cannot_establish(pair_key("slot_fill", "fill"), "email") in session.learned
    # rerouted through the document path
    assert second.asked is not None and second.asked.target == "id_document"


def test_invalid_invocation_prunes_action():
    ontology, catalog = load_catalog(
        {
            "schema_version": 1,
            "ontology": [{"id": "x", "slot_fillable": True}],
            "skills": [],
        }
    )
    # the model believes x is fillable; the runtime refuses: invalid, prune
    session = Session(
        "prune-test",
        ontology,
        catalog,
        {"slot_fill": SlotFillRuntime(ontology, fillable=set())},
        [{"pattern": "x", "intent": "goal", "args": {"elements": ["x"]}}],
    )
    out = turn(session, "get x")
    assert "slot_fill/x" in session.pruned
    assert any(r.invalid_invocation for r in session.history)
    assert any("cannot achieve" in m for m in out.messages)
    assert len(session.goal_stack.entries) == 0


def test_max_replans_cap_gives_up():
    ontology, catalog = load_catalog(
        {
            "schema_version": 1,
            "ontology": [{"id": "want"}, {"id": "got"}],
            "skills": [
                {
                    "skill_id": "flaky",
                    "endpoint": "sim:flaky",
                    "description": "never gives what you want",
                    "retry_limit": 99,
                    "pairs": [{"pair_id": "p", "inputs": [], "outcomes": [["want"], ["got"]]}],
                }
            ],
        }
    )
    runtime = ScriptedSkill("flaky", lambda pair, inputs: InvocationResult.outcome(1, {"got": "x"}))
    session = Session(
        "cap-test",
        ontology,
        catalog,
        {"flaky": runtime},
        [{"pattern": "want", "intent": "goal", "args": {"elements": ["want"]}}],
        settings=SessionSettings(max_replans=5),
    )
    out = turn(session, "I want want")
    assert any("giving up" in m for m in out.messages)
    assert len([r for r in session.history if r.skill_id == "flaky"]) <= 5
    assert session.goal_stack.entries == []


def test_resume_order_across_nested_digressions(banking_session):
    session = banking_session
    session.ltm.put_fact("account_balance", "7.00", Provenance.seed())
    turn(session, "I want a loan")  # asks email, stays active
    turn(session, "I also want a credit card")  # digression 1, asks email again
    out = turn(session, "what is my balance?")  # digression 2, instantly satisfied
    joined = " ".join(out.messages)
    assert "Back to credit card decision" in joined
    out = turn(session, "stop")  # stop credit card goal
    assert "Back to loan decision" in " ".join(out.messages)
    statuses = [e.status for e in session.goal_stack.finished]
    assert statuses == ["completed", "stopped"]


def test_explanation_intents_do_not_touch_goal_stack(banking_session):
    session = banking_session
    turn(session, "I want a loan")
    depth = len(session.goal_stack.entries)
    finished = len(session.goal_stack.finished)
    out = turn(session, "why did you need my email?")
    assert len(session.goal_stack.entries) == depth
    assert len(session.goal_stack.finished) == finished
    # pending question is re-asked after the explanation
    assert out.asked is not None and out.asked.target == "email"


def test_unknown_utterance_fallback(banking_session):
    out = turn(banking_session, "blorp")
    assert out.messages, "every processed event produces a message"
    assert "not sure" in out.messages[0]


def test_denied_authorization_blocks_goal(banking_session):
    session = banking_session
    turn(session, "I want a loan")
    turn(session, "grace@bank.com")
    out = turn(session, "no")
    joined = " ".join(out.messages)
    assert "cannot achieve loan decision" in joined
    assert cannot_establish(pair_key("authorize", "grant"), "loan_submit") in session.learned
    # a later attempt is immediately unreachable, no new prompts
    out = turn(session, "let me try that loan again")
    assert "cannot achieve" in " ".join(out.messages)


def test_authorization_asked_once_per_session(banking_session):
    session = banking_session
    turn(session, "I want a loan")
    turn(session, "grace@bank.com")
    turn(session, "yes")
    prompts_before = [r for r in session.history if r.skill_id == "authorize"]
    assert len(prompts_before) == 1
    out = turn(session, "now a credit card please")
    # credit_card_submit needs its own consent; loan_submit must not re-prompt
    assert out.asked is not None and out.asked.target == "credit_card_submit"
    turn(session, "yes")
    auth_records = [r for r in session.history if r.skill_id == "authorize"]
    assert len(auth_records) == 2
    assert {r.action_id for r in auth_records} == {
        "authorize/loan_submit",
        "authorize/credit_card_submit",
    }


def test_skill_provenance_facts_point_at_producing_records(banking_session):
    session = banking_session
    for text in ("I want a loan", "ada@bank.com", "yes"):
        turn(session, text)
    for fact in session.ltm.facts.values():
        if fact.provenance.kind == "skill":
            record = session.history.records[fact.provenance.record_seq]
            assert fact.element in record.actual_outcome


def test_goal_extension_prompts_after_completion(banking_session):
    session = banking_session
    turn(session, "I want a loan")
    turn(session, "ada@bank.com")
    out = turn(session, "yes")
    assert any("credit card as well" in m for m in out.messages)
    # the suggestion is just a prompt: nothing was pushed
    assert session.goal_stack.entries == []


def test_goal_extension_not_fired_for_other_goals(banking_session):
    session = banking_session
    session.ltm.put_fact("account_balance", "1.00", Provenance.seed())
    out = turn(session, "what is my balance?")
    assert not any("credit card as well" in m for m in out.messages)


# -- authorization gate ----------------------------------------------------------


def test_gate_requires_authorize_for_sensitive(banking_session):
    session = banking_session
    model = session.compile_model(["loan_decision"])
    action = model.actions["loan_submit/apply/o0"]
    assert authorization_gate(session, action) == "authorize/loan_submit"


def test_gate_allows_after_grant(banking_session):
    session = banking_session
    session.authorized.add("loan_submit")
    model = session.compile_model(["loan_decision"])
    action = model.actions["loan_submit/apply/o0"]
    assert authorization_gate(session, action) == "allow"


def test_gate_allows_non_sensitive(banking_session):
    session = banking_session
    model = session.compile_model(["bank_record"])
    assert authorization_gate(session, model.actions["ocr/scan/o0"]) == "allow"
    assert authorization_gate(session, model.actions["db_retrieve/by_email/o0"]) == "allow"


# -- S3 baseline -------------------------------------------------------------------


def test_s3_select_examples():
    assert s3_select({"a": 0.9, "b": 0.4}, 0.5, 1) == ["a"]
    assert s3_select({"a": 0.4, "b": 0.3}, 0.5, 2) == []
    assert s3_select({"a": 0.9, "b": 0.8}, 0.5, 2) == ["a", "b"]


def test_s3_mode_executes_top_preview():
    session = new_session(Config(mode="s3"), "s3")
    out = handle_event(session, Event(text="I want a loan please"))
    assert any("loan_submit" in m for m in out.messages)
    assert not any("db_retrieve" in m for m in out.messages)


def test_s3_no_confident_skill_fallback():
    session = new_session(Config(mode="s3"), "s3")
    out = handle_event(session, Event(text="zzz nothing relevant"))
    assert any("No skill is confident" in m for m in out.messages)


def test_s3_runs_skill_when_inputs_known():
    session = new_session(Config(mode="s3"), "s3")
    session.ltm.put_fact("email", "ada@bank.com", Provenance.user())
    out = handle_event(session, Event(text="check my account balance"))
    assert any("account_balance" in m or "1,250.00" in m for m in out.messages)
    assert session.ltm.value_of("account_balance") == "1,250.00"


def test_s3_custom_stages():
    session = new_session(Config(mode="s3"), "s3")
    calls = []
    s3_orchestrate(
        session,
        Event(text="loan and balance"),
        scorer=lambda p: p / 2,
        selector=lambda scores: [s for s, v in sorted(scores.items()) if v > 0.3],
        sequencer=lambda skills: list(reversed(calls.extend(skills) or skills)),
    )
    # loan 0.9/2 and db 0.7/2 clear the custom threshold; sequencer reversed them
    assert calls == ["db_retrieve", "loan_submit"]

import hashlib
import json

import httpx
import pytest

from conductor.goals import Event
from conductor.skills import (
    ASK_AUTHORIZE,
    ASK_SLOT,
    STATUS_FAILED,
    STATUS_INVALID,
    STATUS_NEEDS_USER,
    STATUS_OUTCOME,
    InvocationContext,
    WebhookRuntime,
)
from conductor.stubserver import create_stub_app


def ctx(banking, skill_id, pair_id=None, target=None, desired=0):
    skill = banking.catalog.skills.get(skill_id)
    pair = None
    if skill is not None and pair_id is not None:
        pair = skill.pair(pair_id)
    return InvocationContext(
        skill=skill, pair=pair, desired_outcome_index=desired, ontology=banking.ontology, target=target
    )


# -- built-ins -----------------------------------------------------------------


def test_slot_fill_asks_for_fillable_element(banking):
    runtime = banking.runtimes["slot_fill"]
    result = runtime.execute({}, "fill", ctx(banking, "slot_fill", "fill", target="email"))
    assert result.status == STATUS_NEEDS_USER
    assert result.ask_kind == ASK_SLOT
    assert result.target == "email"
    assert "email" in result.prompt


def test_slot_fill_rejects_non_fillable(banking):
    runtime = banking.runtimes["slot_fill"]
    result = runtime.execute({}, "fill", ctx(banking, "slot_fill", "fill", target="bank_record"))
    assert result.status == STATUS_INVALID


def test_slot_fill_validators(banking):
    runtime = banking.runtimes["slot_fill"]
    assert runtime.accepts("email", "a@b.c")
    assert not runtime.accepts("email", "not an email")
    assert runtime.accepts("name", "Ada Lovelace")
    assert not runtime.accepts("name", "   ")


def test_authorize_prompts_with_sensitive_elements(banking):
    runtime = banking.runtimes["authorize"]
    result = runtime.execute({}, "grant", ctx(banking, "authorize", "grant", target="loan_submit"))
    assert result.status == STATUS_NEEDS_USER
    assert result.ask_kind == ASK_AUTHORIZE
    assert result.target == "loan_submit"
    assert "credit score" in result.prompt and "salary" in result.prompt


def test_authorize_unknown_skill_invalid(banking):
    runtime = banking.runtimes["authorize"]
    result = runtime.execute({}, "grant", ctx(banking, "authorize", "grant", target="nope"))
    assert result.status == STATUS_INVALID


# -- scripted fixtures ----------------------------------------------------------


def test_db_retrieve_returns_record_with_credit_score(banking):
    runtime = banking.runtimes["db_retrieve"]
    result = runtime.execute(
        {"email": "ada@bank.com"}, "by_email", ctx(banking, "db_retrieve", "by_email")
    )
    assert result.status == STATUS_OUTCOME
    assert result.outputs["credit_score"] == "580"
    declared = banking.catalog.skills["db_retrieve"].pair("by_email").outcomes[0]
    assert frozenset(result.outputs) == declared


def test_ocr_extracts_or_fails_per_script(banking):
    runtime = banking.runtimes["ocr"]
    good = runtime.execute({"id_document": "statement.png"}, "scan", ctx(banking, "ocr", "scan"))
    assert good.status == STATUS_OUTCOME
    assert good.outputs == {"name": "Ada Lovelace", "account_number": "9921"}
    bad = runtime.execute({"id_document": "doodle.png"}, "scan", ctx(banking, "ocr", "scan"))
    assert bad.status == STATUS_FAILED


def test_loan_outcomes_keyed_on_score(banking):
    runtime = banking.runtimes["loan_submit"]
    rejected = runtime.execute(
        {"name": "A", "salary": "1", "credit_score": "580"}, "apply", ctx(banking, "loan_submit", "apply")
    )
    approved = runtime.execute(
        {"name": "A", "salary": "1", "credit_score": "760"}, "apply", ctx(banking, "loan_submit", "apply")
    )
    unknown = runtime.execute(
        {"name": "A", "salary": "1", "credit_score": ""}, "apply", ctx(banking, "loan_submit", "apply")
    )
    assert (rejected.outcome_index, approved.outcome_index, unknown.outcome_index) == (1, 0, 2)


def test_scripted_outputs_match_declared_outcome_sets(banking):
    for skill_id, pair_id, inputs in [
        ("loan_submit", "apply", {"name": "A", "salary": "1", "credit_score": "700"}),
        ("credit_card_submit", "apply", {"name": "A", "credit_score": "700"}),
        ("ocr", "scan", {"id_document": "passport.jpg"}),
        ("db_retrieve", "by_account", {"account_number": "9921"}),
    ]:
        runtime = banking.runtimes[skill_id]
        result = runtime.execute(inputs, pair_id, ctx(banking, skill_id, pair_id))
        declared = banking.catalog.skills[skill_id].pair(pair_id).outcomes[result.outcome_index]
        assert frozenset(result.outputs) == declared


def test_fixture_determinism(banking):
    runtime = banking.runtimes["db_retrieve"]
    a = runtime.execute({"email": "grace@bank.com"}, "by_email", ctx(banking, "db_retrieve", "by_email"))
    b = runtime.execute({"email": "grace@bank.com"}, "by_email", ctx(banking, "db_retrieve", "by_email"))
    assert a == b


def test_preview_is_side_effect_free(banking_session):
    session = banking_session
    session.ltm.put_fact("email", "ada@bank.com", __import__("conductor.memory", fromlist=["Provenance"]).Provenance.user())

    def state_hash():
        doc = {
            "ltm": session.ltm.to_doc(),
            "history": [r.to_doc() for r in session.history],
            "counters": sorted(session.retry_counters.items()),
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()

    before = state_hash()
    event = Event(text="I want a loan and my balance")
    for runtime in session.runtimes.values():
        runtime.preview(event)
    assert state_hash() == before


def test_explain_weights_in_unit_interval(banking):
    for skill_id in ("loan_submit", "credit_card_submit", "db_retrieve", "ocr"):
        runtime = banking.runtimes[skill_id]
        for element in banking.ontology.elements:
            for _, weight in runtime.explain(element) or []:
                assert 0.0 <= weight <= 1.0


# -- webhook runtime -------------------------------------------------------------


@pytest.fixture()
def stub_client():
    from fastapi.testclient import TestClient

    with TestClient(create_stub_app()) as client:
        yield client


def test_webhook_outcome_against_stub(banking, stub_client):
    runtime = WebhookRuntime("loan_submit", "/skills/loan_submit", client=stub_client)
    result = runtime.execute(
        {"name": "Grace Hopper", "salary": "98000", "credit_score": "760"},
        "apply",
        ctx(banking, "loan_submit", "apply"),
    )
    assert result.status == STATUS_OUTCOME
    assert result.outcome_index == 0
    assert result.outputs == {"approved_status": "loan approved"}
    assert runtime.explain("approved_status")  # cached from the reply


def test_webhook_failure_against_stub(banking, stub_client):
    runtime = WebhookRuntime("db_retrieve", "/skills/db_retrieve", client=stub_client)
    result = runtime.execute({"email": "ghost@x"}, "by_email", ctx(banking, "db_retrieve", "by_email"))
    assert result.status == STATUS_FAILED
    assert "no record" in result.message


def _mock_client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler), base_url="http://mock")


def test_webhook_undeclared_element_is_invalid(banking):
    def handler(request):
        return httpx.Response(
            200,
            json={"status": "outcome", "outcome_index": 0, "outputs": {"weird": "1"}},
        )

    runtime = WebhookRuntime("ocr", "/x", client=_mock_client(handler))
    result = runtime.execute({"id_document": "d"}, "scan", ctx(banking, "ocr", "scan"))
    assert result.status == STATUS_INVALID


def test_webhook_outcome_index_inferred_from_outputs(banking):
    def handler(request):
        return httpx.Response(
            200,
            json={"status": "outcome", "outputs": {"rejected_status": "no"}},
        )

    runtime = WebhookRuntime("loan_submit", "/x", client=_mock_client(handler))
    result = runtime.execute({}, "apply", ctx(banking, "loan_submit", "apply"))
    assert result.status == STATUS_OUTCOME
    assert result.outcome_index == 1


def test_webhook_timeout_is_failure(banking):
    def handler(request):
        raise httpx.ConnectTimeout("boom")

    runtime = WebhookRuntime("ocr", "/x", client=_mock_client(handler), timeout=0.01)
    result = runtime.execute({"id_document": "d"}, "scan", ctx(banking, "ocr", "scan"))
    assert result.status == STATUS_FAILED
    assert "timed out" in result.message


def test_webhook_request_body_shape(banking):
    captured = {}

    def handler(request):
        captured.update(json.loads(request.content))
        return httpx.Response(200, json={"status": "failed", "message": "nope"})

    runtime = WebhookRuntime("ocr", "/x", client=_mock_client(handler))
    runtime.execute({"id_document": "d"}, "scan", ctx(banking, "ocr", "scan"))
    assert captured == {
        "schema_version": 1,
        "skill_id": "ocr",
        "pair_id": "scan",
        "inputs": {"id_document": "d"},
    }

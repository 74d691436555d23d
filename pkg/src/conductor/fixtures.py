"""Banking demo domain: catalog, ontology, scripted skills, intent rules.

A small retail-banking assistant used throughout the test suite and the
bundled scenarios. Six skills: loan and credit card application submission,
OCR over a document reference, database retrieval (by email or account
number), plus the two built-ins (slot filling and authorization). All
external skills are simulated in-process and fully deterministic: outcomes
are keyed on input values only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .catalog import Catalog, Ontology, load_catalog
from .skills import (
    AuthorizeRuntime,
    InvocationResult,
    ScriptedSkill,
    SkillRuntime,
    SlotFillRuntime,
)

CATALOG_DOC = {
    "schema_version": 1,
    "ontology": [
        {"id": "email", "slot_fillable": True, "display_name": "email address"},
        {"id": "account_number", "display_name": "account number"},
        {"id": "name", "slot_fillable": True, "display_name": "full name"},
        {"id": "id_document", "slot_fillable": True, "display_name": "ID document reference"},
        {"id": "salary", "sensitive": True, "slot_fillable": True, "display_name": "salary"},
        {"id": "credit_score", "sensitive": True, "display_name": "credit score"},
        {"id": "bank_record", "display_name": "bank record"},
        {"id": "account_balance", "display_name": "account balance"},
        {"id": "loan_decision", "display_name": "loan decision"},
        {"id": "approved_status", "parent": "loan_decision", "display_name": "approved loan"},
        {"id": "rejected_status", "parent": "loan_decision", "display_name": "rejected loan"},
        {"id": "needs_check_status", "parent": "loan_decision", "display_name": "loan pending manual review"},
        {"id": "cc_decision", "display_name": "credit card decision"},
        {"id": "cc_approved", "parent": "cc_decision", "display_name": "approved credit card"},
        {"id": "cc_rejected", "parent": "cc_decision", "display_name": "rejected credit card"},
    ],
    "skills": [
        {
            "skill_id": "loan_submit",
            "endpoint": "sim:loan_service",
            "description": "submits a loan application to the lending service",
            "retry_limit": 2,
            "pairs": [
                {
                    "pair_id": "apply",
                    "inputs": ["name", "salary", "credit_score"],
                    "outcomes": [["approved_status"], ["rejected_status"], ["needs_check_status"]],
                }
            ],
        },
        {
            "skill_id": "credit_card_submit",
            "endpoint": "sim:card_service",
            "description": "submits a credit card application",
            "retry_limit": 2,
            "pairs": [
                {
                    "pair_id": "apply",
                    "inputs": ["name", "credit_score"],
                    "outcomes": [["cc_approved"], ["cc_rejected"]],
                }
            ],
        },
        {
            "skill_id": "ocr",
            "endpoint": "sim:ocr",
            "description": "extracts fields from a document image",
            "retry_limit": 2,
            "pairs": [
                {
                    "pair_id": "scan",
                    "inputs": ["id_document"],
                    "outcomes": [["name", "account_number"]],
                }
            ],
        },
        {
            "skill_id": "db_retrieve",
            "endpoint": "sim:bank_db",
            "description": "retrieves customer records from the bank database",
            "retry_limit": 2,
            "pairs": [
                {
                    "pair_id": "by_email",
                    "inputs": ["email"],
                    "outcomes": [
                        [
                            "bank_record",
                            "name",
                            "account_number",
                            "credit_score",
                            "salary",
                            "account_balance",
                        ]
                    ],
                },
                {
                    "pair_id": "by_account",
                    "inputs": ["account_number"],
                    "outcomes": [
                        ["bank_record", "name", "credit_score", "salary", "account_balance"]
                    ],
                },
            ],
        },
        {
            "skill_id": "slot_fill",
            "endpoint": "builtin:slot_fill",
            "description": "asks you directly for a piece of information",
            "retry_limit": 2,
            "internal": True,
            "pairs": [{"pair_id": "fill", "inputs": [], "outcomes": []}],
        },
        {
            "skill_id": "authorize",
            "endpoint": "builtin:authorize",
            "description": "confirms that you authorize sharing sensitive information",
            "retry_limit": 2,
            "internal": True,
            "pairs": [{"pair_id": "grant", "inputs": [], "outcomes": []}],
        },
    ],
    "agent_groups": {
        "banking": [
            "loan_submit",
            "credit_card_submit",
            "ocr",
            "db_retrieve",
            "slot_fill",
            "authorize",
        ]
    },
}

# Customer table keyed by email and by account number. Ada's credit score is
# below the loan threshold on purpose: the demo conversation ends in a
# rejection that the explanation chain traces back to the score.
CUSTOMERS = {
    "ada@bank.com": {
        "name": "Ada Lovelace",
        "account_number": "9921",
        "bank_record": "savings account #9921",
        "credit_score": "580",
        "salary": "52000",
        "account_balance": "1,250.00",
    },
    "grace@bank.com": {
        "name": "Grace Hopper",
        "account_number": "3014",
        "bank_record": "checking account #3014",
        "credit_score": "760",
        "salary": "98000",
        "account_balance": "8,600.00",
    },
}
ACCOUNTS = {c["account_number"]: c for c in CUSTOMERS.values()}

DOCUMENTS = {
    "statement.png": {"name": "Ada Lovelace", "account_number": "9921"},
    "passport.jpg": {"name": "Grace Hopper", "account_number": "3014"},
}

LOAN_SCORE_THRESHOLD = 650
CARD_SCORE_THRESHOLD = 600


def _loan_handler(pair_id, inputs):
    score = inputs.get("credit_score", "")
    if not score.isdigit():
        return InvocationResult.outcome(2, {"needs_check_status": "application queued for manual review"})
    if int(score) >= LOAN_SCORE_THRESHOLD:
        return InvocationResult.outcome(0, {"approved_status": "loan approved"})
    return InvocationResult.outcome(1, {"rejected_status": "loan rejected: credit score below threshold"})


def _card_handler(pair_id, inputs):
    score = inputs.get("credit_score", "")
    if score.isdigit() and int(score) >= CARD_SCORE_THRESHOLD:
        return InvocationResult.outcome(0, {"cc_approved": "credit card approved"})
    return InvocationResult.outcome(1, {"cc_rejected": "credit card rejected"})


def _db_handler(pair_id, inputs):
    if pair_id == "by_email":
        record = CUSTOMERS.get(inputs.get("email", ""))
        if record is None:
            return InvocationResult.failed("no record found for that email address")
        return InvocationResult.outcome(0, dict(record))
    if pair_id == "by_account":
        record = ACCOUNTS.get(inputs.get("account_number", ""))
        if record is None:
            return InvocationResult.failed("no record found for that account number")
        outputs = {k: v for k, v in record.items() if k != "account_number"}
        return InvocationResult.outcome(0, outputs)
    return InvocationResult.invalid(f"db_retrieve has no pair {pair_id!r}")


def _ocr_handler(pair_id, inputs):
    doc = DOCUMENTS.get(inputs.get("id_document", ""))
    if doc is None:
        return InvocationResult.failed("could not read that document")
    return InvocationResult.outcome(0, dict(doc))


SLOT_PROMPTS = {
    "email": "What is your email address?",
    "name": "What is your full name?",
    "id_document": "Please give me a reference to an ID document I can scan.",
    "salary": "What is your yearly salary?",
}

SLOT_VALIDATORS = {
    "email": r"@",
    "salary": r"\d",
}

# Fired when a matching goal completes; the classic upsell follow-up.
GOAL_EXTENSIONS = [
    {
        "on_complete": ["loan_decision"],
        "prompt": "Would you like to apply for a credit card as well?",
    }
]

INTENT_RULES = [
    {"pattern": r"\b(stop|cancel|never mind|forget it)\b", "intent": "stop"},
    {"pattern": r"\b(summar|what did you do|what happened)\w*", "intent": "summary"},
    {
        "pattern": r"why (?:was|is) my (?:loan|application|credit card)\b.*",
        "intent": "chain",
        "args": {"element": "loan_decision"},
    },
    {
        "pattern": r"\bwhy\b.*?\bmy ([a-z_ ]+?)\??$",
        "intent": "why",
        "args": {"element": "$1"},
    },
    {
        "pattern": r"\bhow did you\b.*?\b(?:my|the) ([a-z_ ]+?)\??$",
        "intent": "how",
        "args": {"element": "$1"},
    },
    {"pattern": r"\bloan\b", "intent": "goal", "args": {"elements": ["loan_decision"]}},
    {"pattern": r"\bcredit card\b", "intent": "goal", "args": {"elements": ["cc_decision"]}},
    {"pattern": r"\bbalance\b", "intent": "goal", "args": {"elements": ["account_balance"]}},
    {"pattern": r"\b(bank )?record\b", "intent": "goal", "args": {"elements": ["bank_record"]}},
]


@dataclass
class Fixture:
    ontology: Ontology
    catalog: Catalog
    runtimes: dict[str, SkillRuntime]
    intent_rules: list[dict] = field(default_factory=list)
    goal_extensions: list[dict] = field(default_factory=list)


def banking_fixture() -> Fixture:
    """Catalog, ontology, and deterministic in-process runtimes for the
    banking demo domain."""
    ontology, catalog = load_catalog(CATALOG_DOC)
    runtimes: dict[str, SkillRuntime] = {
        "loan_submit": ScriptedSkill(
            "loan_submit",
            _loan_handler,
            preview_keywords={"loan": 0.9},
            explain_weights={
                "approved_status": [("credit_score", 0.9), ("salary", 0.35), ("name", 0.05)],
                "rejected_status": [("credit_score", 0.9), ("salary", 0.35), ("name", 0.05)],
                "needs_check_status": [("credit_score", 0.6), ("salary", 0.6), ("name", 0.05)],
            },
        ),
        "credit_card_submit": ScriptedSkill(
            "credit_card_submit",
            _card_handler,
            preview_keywords={"credit card": 0.85, "card": 0.4},
            explain_weights={
                "cc_approved": [("credit_score", 0.8), ("name", 0.1)],
                "cc_rejected": [("credit_score", 0.8), ("name", 0.1)],
            },
        ),
        "ocr": ScriptedSkill(
            "ocr",
            _ocr_handler,
            preview_keywords={"document": 0.6, "scan": 0.6},
            explain_weights={
                "name": [("id_document", 1.0)],
                "account_number": [("id_document", 1.0)],
            },
        ),
        "db_retrieve": ScriptedSkill(
            "db_retrieve",
            _db_handler,
            preview_keywords={"balance": 0.7, "record": 0.7, "account": 0.5},
            explain_weights={
                out: [("account_number", 1.0), ("email", 1.0)]
                for out in (
                    "bank_record",
                    "name",
                    "credit_score",
                    "salary",
                    "account_balance",
                    "account_number",
                )
            },
        ),
        "slot_fill": SlotFillRuntime(ontology, prompts=SLOT_PROMPTS, validators=SLOT_VALIDATORS),
        "authorize": AuthorizeRuntime(ontology, catalog.skills),
    }
    return Fixture(
        ontology=ontology,
        catalog=catalog,
        runtimes=runtimes,
        intent_rules=list(INTENT_RULES),
        goal_extensions=list(GOAL_EXTENSIONS),
    )

"""Skill runtimes: the execute/preview/explain contract and its built-ins.

A runtime's ``execute`` resolves one grounded action at execution time. It
either yields exactly one of the pair's declared outcome sets (with values),
fails, flags the invocation as invalid (the specification promised something
the skill cannot do), or suspends by asking the user something. ``preview``
estimates usefulness for an event without side effects; ``explain``
attributes an output element to weighted input elements and is optional.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import httpx

from .catalog import IoPair, Ontology, SkillSpec
from .goals import Event

SCHEMA_VERSION = 1

STATUS_OUTCOME = "outcome"
STATUS_FAILED = "failed"
STATUS_INVALID = "invalid_invocation"
STATUS_NEEDS_USER = "needs_user"

ASK_SLOT = "slot_fill"
ASK_AUTHORIZE = "authorize"


@dataclass(frozen=True)
class InvocationResult:
    status: str
    outcome_index: int | None = None
    outputs: dict[str, str] = field(default_factory=dict)
    message: str | None = None
    prompt: str | None = None
    ask_kind: str | None = None  # slot_fill | authorize when status == needs_user
    target: str | None = None  # element (slot fill) or skill id (authorize)
    attributions: tuple[tuple[str, float], ...] | None = None

    @classmethod
    def outcome(cls, index: int, outputs: Mapping[str, str], message: str | None = None,
                attributions: tuple[tuple[str, float], ...] | None = None) -> "InvocationResult":
        return cls(STATUS_OUTCOME, outcome_index=index, outputs=dict(outputs), message=message,
                   attributions=attributions)

    @classmethod
    def failed(cls, message: str | None = None) -> "InvocationResult":
        return cls(STATUS_FAILED, message=message)

    @classmethod
    def invalid(cls, message: str | None = None) -> "InvocationResult":
        return cls(STATUS_INVALID, message=message)

    @classmethod
    def needs_user(cls, prompt: str, ask_kind: str, target: str) -> "InvocationResult":
        return cls(STATUS_NEEDS_USER, prompt=prompt, ask_kind=ask_kind, target=target)


@dataclass(frozen=True)
class InvocationContext:
    skill: SkillSpec
    pair: IoPair | None
    desired_outcome_index: int
    ontology: Ontology
    target: str | None = None  # set for slot-fill / authorize actions


class SkillRuntime:
    """Base contract. Subclasses override execute; preview/explain optional."""

    def execute(self, inputs: Mapping[str, str], pair_id: str, context: InvocationContext) -> InvocationResult:
        raise NotImplementedError

    def preview(self, event: Event) -> float | None:
        return None

    def explain(self, element: str) -> list[tuple[str, float]] | None:
        return None


class SlotFillRuntime(SkillRuntime):
    """Asks the user for an element's value.

    Which elements can actually be filled is an implementation detail of this
    runtime, not part of the planning model; a mismatch surfaces as an
    invalid invocation and the action gets pruned.
    """

    def __init__(
        self,
        ontology: Ontology,
        fillable: set[str] | None = None,
        prompts: Mapping[str, str] | None = None,
        validators: Mapping[str, str] | None = None,
    ):
        self._ontology = ontology
        self._fillable = fillable
        self._prompts = dict(prompts or {})
        import re

        self._validators = {k: re.compile(v) for k, v in (validators or {}).items()}

    def can_fill(self, element: str) -> bool:
        if self._fillable is not None:
            return element in self._fillable
        return element in self._ontology and self._ontology[element].slot_fillable

    def prompt_for(self, element: str) -> str:
        if element in self._prompts:
            return self._prompts[element]
        return f"What is your {self._ontology.display(element)}?"

    def accepts(self, element: str, value: str) -> bool:
        pattern = self._validators.get(element)
        if pattern is None:
            return bool(value.strip())
        return pattern.search(value) is not None

    def execute(self, inputs, pair_id, context):
        element = context.target
        if element is None or not self.can_fill(element):
            return InvocationResult.invalid(
                f"cannot ask the user for {element!r}; it is not slot-fillable"
            )
        return InvocationResult.needs_user(self.prompt_for(element), ASK_SLOT, element)


class AuthorizeRuntime(SkillRuntime):
    """Asks the user to authorize sending sensitive inputs to a skill."""

    def __init__(self, ontology: Ontology, catalog_skills: Mapping[str, SkillSpec]):
        self._ontology = ontology
        self._skills = catalog_skills

    def prompt_for(self, skill_id: str) -> str:
        skill = self._skills.get(skill_id)
        sensitive = sorted(
            {
                self._ontology.display(e)
                for p in (skill.pairs if skill else ())
                for e in p.inputs
                if e in self._ontology and self._ontology[e].sensitive
            }
        )
        what = " and ".join(sensitive) if sensitive else "sensitive information"
        desc = f" ({skill.description})" if skill else ""
        return (
            f"I need to share your {what} with {skill_id}{desc}. Do you authorize this? (yes/no)"
        )

    def execute(self, inputs, pair_id, context):
        skill_id = context.target
        if skill_id is None or skill_id not in self._skills:
            return InvocationResult.invalid(f"unknown skill {skill_id!r} to authorize")
        return InvocationResult.needs_user(self.prompt_for(skill_id), ASK_AUTHORIZE, skill_id)


class WebhookRuntime(SkillRuntime):
    """Invokes an external skill over HTTP.

    Request body: ``{schema_version, skill_id, pair_id, inputs}``. Response:
    ``{status, outcome_index?, outputs?, message?, explain?}``. Transport
    errors and timeouts count as failures (and against the retry limit);
    replies that do not match a declared outcome set are invalid invocations.
    """

    def __init__(self, skill_id: str, endpoint: str, *, timeout: float = 10.0,
                 client: httpx.Client | None = None):
        self.skill_id = skill_id
        self.endpoint = endpoint
        self.timeout = timeout
        self._client = client
        self._attributions: dict[str, list[tuple[str, float]]] = {}

    def _post(self, body: dict[str, Any]) -> httpx.Response:
        if self._client is not None:
            return self._client.post(self.endpoint, json=body, timeout=self.timeout)
        with httpx.Client() as client:
            return client.post(self.endpoint, json=body, timeout=self.timeout)

    def execute(self, inputs, pair_id, context):
        body = {
            "schema_version": SCHEMA_VERSION,
            "skill_id": self.skill_id,
            "pair_id": pair_id,
            "inputs": dict(inputs),
        }
        try:
            response = self._post(body)
            response.raise_for_status()
            payload = response.json()
        except httpx.TimeoutException:
            return InvocationResult.failed(f"{self.skill_id} timed out after {self.timeout}s")
        except (httpx.HTTPError, ValueError) as exc:
            return InvocationResult.failed(f"{self.skill_id} transport error: {exc}")

        status = payload.get("status")
        message = payload.get("message")
        if status == STATUS_FAILED:
            return InvocationResult.failed(message)
        if status == STATUS_INVALID:
            return InvocationResult.invalid(message)
        if status != STATUS_OUTCOME:
            return InvocationResult.invalid(f"{self.skill_id} returned unknown status {status!r}")

        outputs = {str(k): str(v) for k, v in dict(payload.get("outputs", {})).items()}
        produced = frozenset(outputs)
        pair = context.pair
        if pair is None:
            return InvocationResult.invalid(f"{self.skill_id} has no declared pair {pair_id!r}")
        index = payload.get("outcome_index")
        if index is None:
            matches = [j for j, o in enumerate(pair.outcomes) if o == produced]
            if len(matches) != 1:
                return InvocationResult.invalid(
                    f"{self.skill_id} reply does not match exactly one declared outcome set"
                )
            index = matches[0]
        if not isinstance(index, int) or not 0 <= index < len(pair.outcomes):
            return InvocationResult.invalid(f"{self.skill_id} returned bad outcome_index {index!r}")
        if produced != pair.outcomes[index]:
            return InvocationResult.invalid(
                f"{self.skill_id} returned elements {sorted(produced)} "
                f"instead of declared outcome {sorted(pair.outcomes[index])}"
            )
        attributions = None
        if isinstance(payload.get("explain"), list):
            pairs = [
                (str(e["element"]), float(e["weight"]))
                for e in payload["explain"]
                if isinstance(e, Mapping) and "element" in e and "weight" in e
            ]
            attributions = tuple(pairs)
            for out_el in produced:
                self._attributions[out_el] = list(pairs)
        return InvocationResult.outcome(index, outputs, message, attributions)

    def explain(self, element):
        cached = self._attributions.get(element)
        return list(cached) if cached else None


class ScriptedSkill(SkillRuntime):
    """Deterministic in-process skill driven by a handler function.

    The handler receives ``(pair_id, inputs)`` and returns an
    InvocationResult; preview confidence comes from keyword matching and
    explain from a static weight table.
    """

    def __init__(
        self,
        skill_id: str,
        handler: Callable[[str, Mapping[str, str]], InvocationResult],
        *,
        preview_keywords: Mapping[str, float] | None = None,
        explain_weights: Mapping[str, list[tuple[str, float]]] | None = None,
    ):
        self.skill_id = skill_id
        self._handler = handler
        self._preview_keywords = dict(preview_keywords or {})
        self._explain_weights = {k: list(v) for k, v in (explain_weights or {}).items()}

    def execute(self, inputs, pair_id, context):
        return self._handler(pair_id, inputs)

    def preview(self, event):
        if not self._preview_keywords:
            return None
        text = (event.text or "").lower()
        best = 0.0
        for kw, conf in self._preview_keywords.items():
            if kw in text:
                best = max(best, conf)
        return best

    def explain(self, element):
        weights = self._explain_weights.get(element)
        return list(weights) if weights else None

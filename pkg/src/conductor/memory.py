"""Session-scoped fact store and append-only execution history.

The fact store (long-term memory) maps ontology elements to opaque string
values; the planner only ever reasons about *which* elements are known, so
values are never interpreted here. The history is the audit substrate for
learning and for the what/how/why explanation machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

from .catalog import Ontology, UnknownElementError

PROVENANCE_USER = "user"
PROVENANCE_SKILL = "skill"
PROVENANCE_SEED = "seed"


@dataclass(frozen=True)
class Provenance:
    kind: str  # user | skill | seed
    record_seq: int | None = None  # set when kind == skill

    @classmethod
    def user(cls) -> "Provenance":
        return cls(PROVENANCE_USER)

    @classmethod
    def seed(cls) -> "Provenance":
        return cls(PROVENANCE_SEED)

    @classmethod
    def skill(cls, record_seq: int) -> "Provenance":
        return cls(PROVENANCE_SKILL, record_seq)

    def to_doc(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind}
        if self.record_seq is not None:
            d["record_seq"] = self.record_seq
        return d


@dataclass(frozen=True)
class Fact:
    element: str
    value: str
    provenance: Provenance


class LongTermMemory:
    """Element -> Fact map; at most one fact per element, last writer wins."""

    def __init__(self, ontology: Ontology, seed_facts: Iterable[Fact] = ()):
        self._ontology = ontology
        self.facts: dict[str, Fact] = {}
        for f in seed_facts:
            self.put_fact(f.element, f.value, f.provenance)

    def put_fact(self, element: str, value: str, provenance: Provenance) -> Fact:
        if element not in self._ontology:
            raise UnknownElementError(element)
        fact = Fact(element, value, provenance)
        self.facts[element] = fact
        return fact

    def get(self, element: str) -> Fact | None:
        return self.facts.get(element)

    def known_set(self) -> set[str]:
        return set(self.facts)

    def value_of(self, element: str) -> str | None:
        fact = self.facts.get(element)
        return None if fact is None else fact.value

    def __contains__(self, element: str) -> bool:
        return element in self.facts

    def __len__(self) -> int:
        return len(self.facts)

    def to_doc(self) -> list[dict[str, Any]]:
        return [
            {"element": f.element, "value": f.value, "provenance": f.provenance.to_doc()}
            for f in sorted(self.facts.values(), key=lambda f: f.element)
        ]


@dataclass(frozen=True)
class ExecutionRecord:
    """One skill invocation: what it consumed, what we wanted, what happened.

    ``actual_outcome`` is empty on failure; when non-empty it must equal one
    of the pair's declared outcome sets unless ``invalid_invocation`` is set.
    """

    seq: int
    skill_id: str
    pair_id: str
    action_id: str
    inputs_consumed: frozenset[str]
    desired_outcome_index: int
    actual_outcome: frozenset[str]
    success: bool
    timestamp: float
    invalid_invocation: bool = False

    def to_doc(self, *, include_timestamp: bool = True) -> dict[str, Any]:
        d: dict[str, Any] = {
            "seq": self.seq,
            "skill_id": self.skill_id,
            "pair_id": self.pair_id,
            "action_id": self.action_id,
            "inputs_consumed": sorted(self.inputs_consumed),
            "desired_outcome_index": self.desired_outcome_index,
            "actual_outcome": sorted(self.actual_outcome),
            "success": self.success,
            "invalid_invocation": self.invalid_invocation,
        }
        if include_timestamp:
            d["timestamp"] = self.timestamp
        return d


class SequenceError(ValueError):
    """Record sequence numbers must increase by exactly one."""


@dataclass
class History:
    records: list[ExecutionRecord] = field(default_factory=list)

    def append_record(self, record: ExecutionRecord) -> None:
        expected = self.records[-1].seq + 1 if self.records else 0
        if record.seq != expected:
            raise SequenceError(f"expected seq {expected}, got {record.seq}")
        self.records.append(record)

    def next_seq(self) -> int:
        return self.records[-1].seq + 1 if self.records else 0

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def last_establishing(self, element: str) -> ExecutionRecord | None:
        """Most recent record whose actual outcome contains the element."""
        for rec in reversed(self.records):
            if element in rec.actual_outcome:
                return rec
        return None

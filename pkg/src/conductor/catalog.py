"""Skill catalog and shared ontology.

The catalog is the declarative description of everything the assistant can
do: each skill lists its operational modes as input-set / outcome-sets pairs,
and every element named by a skill must resolve in a shared ontology of
information items. The ontology carries a subsumption hierarchy (a forest)
plus the per-element flags the compiler cares about: whether an element is
sensitive and whether it can be slot-filled from the user.

Both structures are immutable after load and safe to share across sessions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import yaml

SCHEMA_VERSION = 1


class CatalogError(Exception):
    """Raised when a catalog document cannot be parsed into a Catalog."""

    def __init__(self, message: str, *, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message)


class UnknownElementError(KeyError):
    """An element id does not resolve in the ontology."""


@dataclass(frozen=True)
class ElementType:
    """One information item in the shared vocabulary."""

    id: str
    parent: str | None = None
    sensitive: bool = False
    slot_fillable: bool = False
    display_name: str = ""

    def __post_init__(self):
        if not self.display_name:
            object.__setattr__(self, "display_name", self.id.replace("_", " "))


class Ontology:
    """Element vocabulary with a forest-shaped subsumption hierarchy."""

    def __init__(self, elements: Iterable[ElementType]):
        self.elements: dict[str, ElementType] = {}
        for el in elements:
            if el.id in self.elements:
                raise CatalogError(f"duplicate ontology element {el.id!r}")
            self.elements[el.id] = el

    def __contains__(self, element_id: str) -> bool:
        return element_id in self.elements

    def __getitem__(self, element_id: str) -> ElementType:
        try:
            return self.elements[element_id]
        except KeyError:
            raise UnknownElementError(element_id) from None

    def ancestors(self, element_id: str) -> list[str]:
        """Proper ancestors of an element, nearest first. Cycle-safe."""
        out: list[str] = []
        seen = {element_id}
        cur = self[element_id].parent
        while cur is not None and cur not in seen and cur in self.elements:
            out.append(cur)
            seen.add(cur)
            cur = self.elements[cur].parent
        return out

    def subsumes(self, general: str, specific: str) -> bool:
        """True iff ``general`` equals ``specific`` or is one of its ancestors."""
        if general not in self.elements:
            raise UnknownElementError(general)
        if specific not in self.elements:
            raise UnknownElementError(specific)
        return general == specific or general in self.ancestors(specific)

    def slot_fillable_elements(self) -> list[str]:
        return sorted(e.id for e in self.elements.values() if e.slot_fillable)

    def display(self, element_id: str) -> str:
        if element_id in self.elements:
            return self.elements[element_id].display_name
        return element_id.replace("_", " ")

    def to_document(self) -> list[dict[str, Any]]:
        docs = []
        for el in sorted(self.elements.values(), key=lambda e: e.id):
            d: dict[str, Any] = {"id": el.id, "display_name": el.display_name}
            if el.parent is not None:
                d["parent"] = el.parent
            if el.sensitive:
                d["sensitive"] = True
            if el.slot_fillable:
                d["slot_fillable"] = True
            docs.append(d)
        return docs


@dataclass(frozen=True)
class IoPair:
    """One operational mode of a skill: an input set and its possible outcome sets."""

    pair_id: str
    inputs: frozenset[str]
    outcomes: tuple[frozenset[str], ...]


@dataclass(frozen=True)
class SkillSpec:
    skill_id: str
    endpoint: str
    description: str
    retry_limit: int
    pairs: tuple[IoPair, ...] = ()
    internal: bool = False

    def pair(self, pair_id: str) -> IoPair:
        for p in self.pairs:
            if p.pair_id == pair_id:
                return p
        raise KeyError(f"{self.skill_id} has no pair {pair_id!r}")

    def consumes_sensitive(self, ontology: Ontology) -> bool:
        return any(
            e in ontology and ontology[e].sensitive
            for p in self.pairs
            for e in p.inputs
        )


@dataclass(frozen=True)
class Catalog:
    skills: dict[str, SkillSpec] = field(default_factory=dict)
    agent_groups: dict[str, list[str]] = field(default_factory=dict)

    def external_skills(self) -> list[SkillSpec]:
        return [s for s in self.skills.values() if not s.internal]

    def internal_skill(self, builtin_tag: str) -> SkillSpec | None:
        """Find the internal skill declared for a built-in endpoint tag."""
        for s in self.skills.values():
            if s.internal and s.endpoint == builtin_tag:
                return s
        return None


@dataclass(frozen=True)
class Issue:
    """One validation finding. Issues are data, not failures."""

    code: str
    message: str
    skill_id: str | None = None
    pair_id: str | None = None
    element: str | None = None


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_REQUIRED_SKILL_FIELDS = ("skill_id", "endpoint", "description", "retry_limit", "pairs")


def _load_document(doc: str | Mapping[str, Any]) -> Mapping[str, Any]:
    if isinstance(doc, Mapping):
        return doc
    text = doc
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CatalogError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    else:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise CatalogError(
                f"invalid YAML: {getattr(exc, 'problem', exc)}",
                line=None if mark is None else mark.line + 1,
                column=None if mark is None else mark.column + 1,
            ) from exc
    if not isinstance(data, Mapping):
        raise CatalogError("catalog document must be a mapping")
    return data


def parse_ontology(doc: str | Mapping[str, Any]) -> Ontology:
    """Parse the ``ontology`` section of a catalog document."""
    data = _load_document(doc)
    raw = data.get("ontology", [])
    if not isinstance(raw, list):
        raise CatalogError("'ontology' must be a list of element entries")
    elements = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, Mapping) or "id" not in entry:
            raise CatalogError(f"ontology entry #{i} missing required field 'id'")
        elements.append(
            ElementType(
                id=str(entry["id"]),
                parent=None if entry.get("parent") is None else str(entry["parent"]),
                sensitive=bool(entry.get("sensitive", False)),
                slot_fillable=bool(entry.get("slot_fillable", False)),
                display_name=str(entry.get("display_name", "")),
            )
        )
    return Ontology(elements)


def parse_catalog(doc: str | Mapping[str, Any]) -> Catalog:
    """Parse the ``skills`` section of a catalog document into a Catalog.

    Shape problems (missing required fields, duplicate skill ids, malformed
    pairs) raise CatalogError; cross-references against the ontology are the
    job of :func:`validate`.
    """
    data = _load_document(doc)
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise CatalogError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    raw_skills = data.get("skills", [])
    if not isinstance(raw_skills, list):
        raise CatalogError("'skills' must be a list of skill entries")

    skills: dict[str, SkillSpec] = {}
    for i, entry in enumerate(raw_skills):
        if not isinstance(entry, Mapping):
            raise CatalogError(f"skill entry #{i} is not a mapping")
        missing = [f for f in _REQUIRED_SKILL_FIELDS if f not in entry]
        if missing:
            raise CatalogError(f"skill entry #{i} missing required field(s): {', '.join(missing)}")
        skill_id = str(entry["skill_id"])
        if skill_id in skills:
            raise CatalogError(f"duplicate skill_id {skill_id!r}")
        raw_pairs = entry["pairs"]
        if not isinstance(raw_pairs, list):
            raise CatalogError(f"skill {skill_id!r}: 'pairs' must be a list")
        pairs = []
        for j, p in enumerate(raw_pairs):
            if not isinstance(p, Mapping) or "pair_id" not in p:
                raise CatalogError(f"skill {skill_id!r}: pair #{j} missing 'pair_id'")
            outcomes = tuple(frozenset(map(str, o)) for o in p.get("outcomes", []))
            pairs.append(
                IoPair(
                    pair_id=str(p["pair_id"]),
                    inputs=frozenset(map(str, p.get("inputs", []))),
                    outcomes=outcomes,
                )
            )
        try:
            retry_limit = int(entry["retry_limit"])
        except (TypeError, ValueError):
            raise CatalogError(f"skill {skill_id!r}: retry_limit must be an integer") from None
        skills[skill_id] = SkillSpec(
            skill_id=skill_id,
            endpoint=str(entry["endpoint"]),
            description=str(entry["description"]),
            retry_limit=retry_limit,
            pairs=tuple(pairs),
            internal=bool(entry.get("internal", False)),
        )

    groups_raw = data.get("agent_groups", {})
    groups = {str(k): [str(s) for s in v] for k, v in dict(groups_raw).items()}
    return Catalog(skills=skills, agent_groups=groups)


def load_catalog(doc: str | Mapping[str, Any]) -> tuple[Ontology, Catalog]:
    """Parse a full catalog document (ontology + skills) in one step."""
    data = _load_document(doc)
    return parse_ontology(data), parse_catalog(data)


def to_document(ontology: Ontology, catalog: Catalog) -> dict[str, Any]:
    """Serialize back to the catalog file shape. Round-trips through parse."""
    skills = []
    for s in sorted(catalog.skills.values(), key=lambda s: s.skill_id):
        skills.append(
            {
                "skill_id": s.skill_id,
                "endpoint": s.endpoint,
                "description": s.description,
                "retry_limit": s.retry_limit,
                "internal": s.internal,
                "pairs": [
                    {
                        "pair_id": p.pair_id,
                        "inputs": sorted(p.inputs),
                        "outcomes": [sorted(o) for o in p.outcomes],
                    }
                    for p in s.pairs
                ],
            }
        )
    doc: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "ontology": ontology.to_document(),
        "skills": skills,
    }
    if catalog.agent_groups:
        doc["agent_groups"] = {k: list(v) for k, v in sorted(catalog.agent_groups.items())}
    return doc


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------


def _forest_cycles(ontology: Ontology) -> list[str]:
    """Element ids that sit on a parent-link cycle."""
    on_cycle: list[str] = []
    for start in ontology.elements:
        seen = []
        cur: str | None = start
        while cur is not None and cur in ontology.elements:
            if cur in seen:
                if start == cur:
                    on_cycle.append(start)
                break
            seen.append(cur)
            cur = ontology.elements[cur].parent
    return on_cycle


def validate(catalog: Catalog, ontology: Ontology) -> list[Issue]:
    """Check every cross-reference and type invariant; one Issue per violation."""
    issues: list[Issue] = []

    for el in sorted(ontology.elements.values(), key=lambda e: e.id):
        if el.parent is not None and el.parent not in ontology:
            issues.append(
                Issue("unknown-parent", f"element {el.id!r} references unknown parent {el.parent!r}", element=el.id)
            )
    for el_id in sorted(_forest_cycles(ontology)):
        issues.append(Issue("parent-cycle", f"element {el_id!r} is on a parent cycle", element=el_id))

    for skill in sorted(catalog.skills.values(), key=lambda s: s.skill_id):
        if skill.retry_limit < 1:
            issues.append(
                Issue("bad-retry-limit", f"skill {skill.skill_id!r} retry_limit must be >= 1", skill_id=skill.skill_id)
            )
        seen_pairs: set[str] = set()
        for pair in skill.pairs:
            if pair.pair_id in seen_pairs:
                issues.append(
                    Issue(
                        "duplicate-pair",
                        f"skill {skill.skill_id!r} repeats pair {pair.pair_id!r}",
                        skill_id=skill.skill_id,
                        pair_id=pair.pair_id,
                    )
                )
            seen_pairs.add(pair.pair_id)
            if skill.internal:
                # Built-in skills may use compilation keywords instead of
                # ontology elements; their pairs are not cross-checked.
                continue
            if not pair.outcomes:
                issues.append(
                    Issue(
                        "no-outcomes",
                        f"skill {skill.skill_id!r} pair {pair.pair_id!r} declares no outcome sets",
                        skill_id=skill.skill_id,
                        pair_id=pair.pair_id,
                    )
                )
            if len(set(pair.outcomes)) != len(pair.outcomes):
                issues.append(
                    Issue(
                        "duplicate-outcome",
                        f"skill {skill.skill_id!r} pair {pair.pair_id!r} repeats an outcome set",
                        skill_id=skill.skill_id,
                        pair_id=pair.pair_id,
                    )
                )
            for k, outcome in enumerate(pair.outcomes):
                if not outcome:
                    issues.append(
                        Issue(
                            "empty-outcome",
                            f"skill {skill.skill_id!r} pair {pair.pair_id!r} outcome #{k} is empty",
                            skill_id=skill.skill_id,
                            pair_id=pair.pair_id,
                        )
                    )
            for el in sorted(pair.inputs | frozenset().union(*pair.outcomes) if pair.outcomes else pair.inputs):
                if el not in ontology:
                    issues.append(
                        Issue(
                            "unknown-element",
                            f"skill {skill.skill_id!r} pair {pair.pair_id!r} references unknown element {el!r}",
                            skill_id=skill.skill_id,
                            pair_id=pair.pair_id,
                            element=el,
                        )
                    )

    for group, members in sorted(catalog.agent_groups.items()):
        for m in members:
            if m not in catalog.skills:
                issues.append(Issue("unknown-skill", f"agent group {group!r} lists unknown skill {m!r}", skill_id=m))

    return issues


def subsumes(ontology: Ontology, general: str, specific: str) -> bool:
    return ontology.subsumes(general, specific)

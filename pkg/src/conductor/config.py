"""Runtime configuration: catalog source, intent rules, orchestration knobs."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .catalog import Catalog, Ontology, load_catalog, to_document
from .compiler import BUILTIN_AUTHORIZE, BUILTIN_SLOT_FILL
from .orchestrator import Session, SessionSettings
from .skills import AuthorizeRuntime, SkillRuntime, SlotFillRuntime, WebhookRuntime

BUILTIN_BANKING = "builtin:banking"


@dataclass
class Config:
    catalog: str = BUILTIN_BANKING  # path to a catalog document, or builtin tag
    intent_rules: Any = BUILTIN_BANKING  # list of rule dicts, path, or builtin tag
    mode: str = "planner"
    max_replans: int = 25
    slot_fill_cost: int = 2
    s3_delta: float = 0.5
    s3_k: int = 1
    seed: int = 0
    webhook_timeout: float = 10.0
    log_dir: str = "sessions"
    goal_extensions: Any = None  # None: take the catalog bundle's defaults

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Config":
        known = {f for f in cls.__dataclass_fields__}  # type: ignore[attr-defined]
        s3 = data.pop("s3", None) or {}
        flat = {k: v for k, v in data.items() if k in known}
        if "delta" in s3:
            flat["s3_delta"] = float(s3["delta"])
        if "k" in s3:
            flat["s3_k"] = int(s3["k"])
        return cls(**flat)

    @classmethod
    def from_file(cls, path: str | Path) -> "Config":
        text = Path(path).read_text(encoding="utf-8")
        data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ValueError(f"config file {path} must contain a mapping")
        return cls.from_dict(data)

    def to_doc(self) -> dict[str, Any]:
        return asdict(self)

    def settings(self) -> SessionSettings:
        return SessionSettings(
            mode=self.mode,
            max_replans=self.max_replans,
            slot_fill_cost=self.slot_fill_cost,
            s3_delta=self.s3_delta,
            s3_k=self.s3_k,
        )


@dataclass
class RuntimeBundle:
    ontology: Ontology
    catalog: Catalog
    runtimes: dict[str, SkillRuntime]
    intent_rules: list[dict] = field(default_factory=list)
    goal_extensions: list[dict] = field(default_factory=list)
    fingerprint: str = ""


def build_bundle(config: Config) -> RuntimeBundle:
    """Resolve the config into a live ontology + catalog + skill runtimes."""
    if config.catalog == BUILTIN_BANKING:
        from .fixtures import banking_fixture

        fx = banking_fixture()
        ontology, catalog, runtimes = fx.ontology, fx.catalog, dict(fx.runtimes)
        rules = fx.intent_rules
        extensions = fx.goal_extensions
    else:
        text = Path(config.catalog).read_text(encoding="utf-8")
        ontology, catalog = load_catalog(text)
        runtimes = {}
        for skill in catalog.skills.values():
            if skill.endpoint == BUILTIN_SLOT_FILL:
                runtimes[skill.skill_id] = SlotFillRuntime(ontology)
            elif skill.endpoint == BUILTIN_AUTHORIZE:
                runtimes[skill.skill_id] = AuthorizeRuntime(ontology, catalog.skills)
            elif skill.endpoint.startswith(("http://", "https://")):
                runtimes[skill.skill_id] = WebhookRuntime(
                    skill.skill_id, skill.endpoint, timeout=config.webhook_timeout
                )
        rules = []
        extensions = []

    if config.intent_rules == BUILTIN_BANKING:
        if config.catalog != BUILTIN_BANKING:
            from .fixtures import INTENT_RULES

            rules = list(INTENT_RULES)
    elif isinstance(config.intent_rules, (str, Path)):
        data = yaml.safe_load(Path(config.intent_rules).read_text(encoding="utf-8"))
        rules = list(data or [])
    else:
        rules = list(config.intent_rules or [])

    if config.goal_extensions is not None:
        extensions = list(config.goal_extensions)

    fingerprint = hashlib.sha256(
        json.dumps(
            {"catalog": to_document(ontology, catalog), "rules": rules, "extensions": extensions},
            sort_keys=True,
        ).encode()
    ).hexdigest()
    return RuntimeBundle(
        ontology=ontology,
        catalog=catalog,
        runtimes=runtimes,
        intent_rules=rules,
        goal_extensions=extensions,
        fingerprint=fingerprint,
    )


def new_session(config: Config, session_id: str, bundle: RuntimeBundle | None = None) -> Session:
    bundle = bundle or build_bundle(config)
    return Session(
        session_id,
        bundle.ontology,
        bundle.catalog,
        bundle.runtimes,
        bundle.intent_rules,
        settings=config.settings(),
        goal_extensions=bundle.goal_extensions,
    )

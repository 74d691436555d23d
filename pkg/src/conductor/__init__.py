"""conductor: goal-directed orchestration of declarative skill catalogs.

A skill catalog plus a shared ontology compiles into a small add-only
planning model; an embedded planner composes skill sequences toward goals
derived from conversation; execution feedback (failures, undesired outcomes,
invalid invocations) refines the model on the fly; and landmarks plus goal
regression answer what/how/why questions about what happened.
"""

from .catalog import (
    Catalog,
    CatalogError,
    ElementType,
    IoPair,
    Issue,
    Ontology,
    SkillSpec,
    load_catalog,
    parse_catalog,
    parse_ontology,
    subsumes,
    validate,
)
from .compiler import (
    Fluent,
    GroundedAction,
    Plan,
    PlanningModel,
    compile,
    compile_internal,
    determinization_count,
    prune_action,
    validate_plan,
)
from .config import Config, build_bundle, new_session
from .goals import Event, GoalStack, Intent, IntentRule, derive_goal
from .memory import ExecutionRecord, Fact, History, LongTermMemory, Provenance
from .orchestrator import Session, TurnOutput, handle_event, s3_orchestrate, s3_select
from .planner import SearchResult, extract_landmarks, plan, relaxed_reachable
from .skills import InvocationResult, SkillRuntime, WebhookRuntime

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "CatalogError",
    "Config",
    "ElementType",
    "Event",
    "ExecutionRecord",
    "Fact",
    "Fluent",
    "GoalStack",
    "GroundedAction",
    "History",
    "Intent",
    "IntentRule",
    "InvocationResult",
    "IoPair",
    "Issue",
    "LongTermMemory",
    "Ontology",
    "Plan",
    "PlanningModel",
    "Provenance",
    "SearchResult",
    "Session",
    "SkillRuntime",
    "SkillSpec",
    "TurnOutput",
    "WebhookRuntime",
    "build_bundle",
    "compile",
    "compile_internal",
    "derive_goal",
    "determinization_count",
    "extract_landmarks",
    "handle_event",
    "load_catalog",
    "new_session",
    "parse_catalog",
    "parse_ontology",
    "plan",
    "prune_action",
    "relaxed_reachable",
    "s3_orchestrate",
    "s3_select",
    "subsumes",
    "validate",
    "validate_plan",
]

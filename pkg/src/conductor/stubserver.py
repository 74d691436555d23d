"""Bundled stub server exposing the banking fixture skills over HTTP.

Implements the webhook contract (request {schema_version, skill_id, pair_id,
inputs}; response {status, outcome_index?, outputs?, message?, explain?}) so
webhook-based catalogs can be exercised end to end without real services.
Run directly with ``python -m conductor.stubserver``.
"""

from __future__ import annotations

from fastapi import FastAPI

from .fixtures import banking_fixture
from .skills import ScriptedSkill, InvocationContext


def create_stub_app() -> FastAPI:
    fx = banking_fixture()
    app = FastAPI(title="conductor-stub-skills")

    @app.post("/skills/{skill_id}")
    async def invoke(skill_id: str, body: dict):
        runtime = fx.runtimes.get(skill_id)
        if not isinstance(runtime, ScriptedSkill):
            return {"status": "invalid_invocation", "message": f"no stub skill {skill_id!r}"}
        pair_id = body.get("pair_id", "")
        inputs = dict(body.get("inputs", {}))
        skill = fx.catalog.skills.get(skill_id)
        pair = None
        if skill is not None:
            try:
                pair = skill.pair(pair_id)
            except KeyError:
                return {"status": "invalid_invocation", "message": f"no pair {pair_id!r}"}
        context = InvocationContext(
            skill=skill, pair=pair, desired_outcome_index=0, ontology=fx.ontology
        )
        result = runtime.execute(inputs, pair_id, context)
        doc: dict = {"status": result.status}
        if result.message:
            doc["message"] = result.message
        if result.status == "outcome":
            doc["outcome_index"] = result.outcome_index
            doc["outputs"] = dict(result.outputs)
            explain = []
            for element in sorted(result.outputs):
                for source, weight in runtime.explain(element) or []:
                    explain.append({"element": source, "weight": weight})
            if explain:
                doc["explain"] = explain
        return doc

    return app


def main() -> None:
    import uvicorn

    uvicorn.run(create_stub_app(), host="127.0.0.1", port=8099)


if __name__ == "__main__":
    main()

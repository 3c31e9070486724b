"""HTTP JSON API over the validation store.

Endpoints (all timestamps ISO-8601 UTC):
  POST /api/batches        annotation JSONL upload (posts resolved from the
                           server corpus, or inlined per line as "post")
  GET  /api/queue/next     ?annotator=ID -> queue item or {"empty": true}
  POST /api/decisions      decision JSON -> final annotation JSON
  GET  /api/stats          ?baseline=SECONDS
  GET  /api/export         final annotations as JSONL
  GET  /api/frames         frame registry with definitions for UI tooltips
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from typing import Optional

from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse

from ..corpus import Corpus, annotation_from_dict, annotation_to_dict, post_from_dict
from ..errors import (FramekitError, InvalidDecision, NotLeasedToYou,
                      UnknownItem, UnresolvedPost)
from ..frames import REGISTRY, parse_frame, prompt_tag_of
from .store import QueueItem, ValidationDecision, ValidationStore


def _iso(epoch_seconds: float) -> str:
    return datetime.fromtimestamp(epoch_seconds, tz=timezone.utc).isoformat()


def _item_json(item: QueueItem, clock_now: float) -> dict:
    labels = item.proposed.labels
    remaining = (item.lease_expiry or clock_now) - clock_now
    return {
        "item_id": item.item_id,
        "post": {
            "id": item.post.id,
            "text": item.post.text,
            "created_at": item.post.created_at,
        },
        "proposed": {
            "filtered": labels.filtered,
            "frames": sorted(prompt_tag_of(f) for f in labels.frames),
            "rationales": {
                prompt_tag_of(f): r for f, r in item.proposed.rationales.items()
            },
        },
        "lease_expiry": _iso(datetime.now(timezone.utc).timestamp() + max(remaining, 0)),
    }


def create_app(store: ValidationStore, corpus: Corpus) -> FastAPI:
    app = FastAPI(title="frame validation service")

    @app.exception_handler(FramekitError)
    async def handle_domain_error(request: Request, exc: FramekitError):
        status = 400
        if isinstance(exc, NotLeasedToYou):
            status = 409
        elif isinstance(exc, (UnknownItem, UnresolvedPost)):
            status = 404
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__, "detail": str(exc)})

    @app.post("/api/batches")
    async def upload_batch(request: Request):
        body = (await request.body()).decode("utf-8")
        annotations = []
        for line in body.splitlines():
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "post" in rec:  # inline post allows self-contained uploads
                post = post_from_dict(rec.pop("post"))
                if post.id not in corpus:
                    corpus.add_post(post)
            annotations.append(annotation_from_dict(rec))
        count = store.enqueue(annotations, corpus)
        return {"enqueued": count}

    @app.get("/api/queue/next")
    def queue_next(annotator: str = Query(...)):
        item = store.lease_next(annotator)
        if item is None:
            return JSONResponse(status_code=200, content={"empty": True})
        return _item_json(item, store.clock())

    @app.post("/api/decisions")
    async def submit_decision(request: Request):
        body = await request.json()
        try:
            decision = ValidationDecision(
                item_id=body["item_id"],
                annotator_id=body["annotator"],
                kept=frozenset(parse_frame(t) for t in body.get("kept", [])),
                added=frozenset(parse_frame(t) for t in body.get("added", [])),
                filtered=bool(body.get("filtered", False)),
                elapsed_seconds=float(body["elapsed_seconds"]),
            )
        except KeyError as exc:
            raise InvalidDecision(f"missing field {exc.args[0]!r}") from exc
        final = store.submit_decision(decision)
        return annotation_to_dict(final)

    @app.get("/api/stats")
    def stats(baseline: Optional[float] = Query(default=None)):
        s = store.stats(baseline_mean_seconds=baseline)
        return {
            "items_total": s.items_total,
            "items_done": s.items_done,
            "items_filtered": s.items_filtered,
            "elapsed_mean": s.elapsed_mean,
            "elapsed_sd": s.elapsed_sd,
            "per_frame": {
                prompt_tag_of(f): counts for f, counts in s.per_frame.items()
            },
            "speedup_vs_baseline": s.speedup_vs_baseline,
        }

    @app.get("/api/export")
    def export() -> Response:
        lines = [
            json.dumps(annotation_to_dict(a), ensure_ascii=False)
            for a in store.final_annotations()
        ]
        return PlainTextResponse("\n".join(lines) + ("\n" if lines else ""))

    @app.get("/api/frames")
    def frames():
        return [
            {
                "id": info.frame.value,
                "tag": info.prompt_tag,
                "name": info.canonical_name,
                "theme": info.theme.value,
                "definition": info.definition,
            }
            for info in REGISTRY.values()
        ]

    return app

"""Two-stage batch annotation with retries, checkpointing and a raw log.

Posts failing the relevance filter get one request; relevant posts get a
second, frames-stage request. Output order always matches corpus order.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ..corpus import (Annotation, Annotator, AnnotatorKind, Corpus, Post,
                      annotation_from_dict, annotation_to_dict)
from ..errors import FramekitError
from ..frames import FILTERED_LABELS, make_labelset
from .client import ChatClient, LLMClientConfig
from .prompts import (PromptTemplate, Stage, build_prompt,
                      parse_filter_response, parse_frames_response)


def _digest(messages) -> str:
    return hashlib.sha256(
        json.dumps(messages, sort_keys=True).encode("utf-8")
    ).hexdigest()[:16]


class _Journal:
    """Serialized, flushed-on-write JSONL appender shared by the checkpoint
    and the raw-response log."""

    def __init__(self, path: Optional[Path]):
        self.path = path
        self._lock = threading.Lock()
        self._fh = open(path, "a", encoding="utf-8") if path else None

    def append(self, record: dict) -> None:
        if self._fh is None:
            return
        with self._lock:
            self._fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()


def load_checkpoint(path: str | Path) -> Dict[str, Annotation]:
    """Completed post id -> final annotation, replayed from a checkpoint."""
    completed: Dict[str, Annotation] = {}
    path = Path(path)
    if not path.exists():
        return completed
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("event") == "done":
                completed[rec["post_id"]] = annotation_from_dict(rec["annotation"])
    return completed


@dataclass
class _PostOutcome:
    annotation: Optional[Annotation] = None
    error: Optional[str] = None


def annotate_two_stage(
    corpus: Corpus,
    client: ChatClient,
    config: LLMClientConfig,
    filter_template: PromptTemplate,
    frames_template: PromptTemplate,
    annotator_id: str = "llm",
    checkpoint_path: Optional[str | Path] = None,
    log_path: Optional[str | Path] = None,
    sleep=time.sleep,
) -> Tuple[List[Annotation], List[Tuple[str, str]]]:
    """Annotate every post; per-post failures are recorded, not raised.

    Returns (annotations in corpus order, failures as (post_id, error)).
    """
    completed = load_checkpoint(checkpoint_path) if checkpoint_path else {}
    checkpoint = _Journal(Path(checkpoint_path) if checkpoint_path else None)
    raw_log = _Journal(Path(log_path) if log_path else None)

    def call_with_retries(post: Post, stage: Stage, template: PromptTemplate) -> str:
        messages = build_prompt(template, post)
        digest = _digest(messages)
        last_error: Exception | None = None
        for attempt in range(config.max_retries + 1):
            try:
                raw = client.complete(messages)
                raw_log.append({"post_id": post.id, "stage": stage.value,
                                "request_digest": digest, "raw": raw})
                return raw
            except Exception as exc:  # transport errors are retryable
                last_error = exc
                raw_log.append({"post_id": post.id, "stage": stage.value,
                                "request_digest": digest, "error": str(exc)})
                if attempt < config.max_retries and config.backoff_seconds:
                    idx = min(attempt, len(config.backoff_seconds) - 1)
                    sleep(config.backoff_seconds[idx])
        raise last_error  # type: ignore[misc]

    def annotate_one(post: Post) -> _PostOutcome:
        try:
            raw = call_with_retries(post, Stage.FILTER, filter_template)
            relevant, _ = parse_filter_response(raw)
            if not relevant:
                labels, rationales = FILTERED_LABELS, {}
            else:
                raw2 = call_with_retries(post, Stage.FRAMES, frames_template)
                parsed = parse_frames_response(raw2)
                labels = make_labelset({f for f, _ in parsed}, filtered=False)
                rationales = {f: reason for f, reason in parsed if reason}
            annotation = Annotation(
                post_id=post.id,
                annotator=Annotator(annotator_id, AnnotatorKind.LLM),
                labels=labels,
                rationales=rationales,
                created_at=int(time.time()),
            )
            checkpoint.append({"event": "done", "post_id": post.id,
                               "annotation": annotation_to_dict(annotation)})
            return _PostOutcome(annotation=annotation)
        except FramekitError as exc:
            return _PostOutcome(error=str(exc))
        except Exception as exc:
            return _PostOutcome(error=str(exc))

    pending = [p for p in corpus if p.id not in completed]
    outcomes: Dict[str, _PostOutcome] = {}
    if config.max_concurrent > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=config.max_concurrent) as pool:
            for post, outcome in zip(pending, pool.map(annotate_one, pending)):
                outcomes[post.id] = outcome
    else:
        for post in pending:
            outcomes[post.id] = annotate_one(post)

    checkpoint.close()
    raw_log.close()

    annotations: List[Annotation] = []
    failures: List[Tuple[str, str]] = []
    for post in corpus:
        if post.id in completed:
            annotations.append(completed[post.id])
            continue
        outcome = outcomes[post.id]
        if outcome.annotation is not None:
            annotations.append(outcome.annotation)
        else:
            failures.append((post.id, outcome.error or "unknown error"))
    return annotations, failures

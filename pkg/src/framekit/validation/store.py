"""Validation queue: leasing, keep/drop/add decisions, timing stats.

State transitions are guarded by a single lock; every durable event is
appended to a JSONL log and flushed before the call returns, so replaying
the log reconstructs stats and export output exactly.
"""

from __future__ import annotations

import json
import statistics
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional

from ..corpus import (Annotation, Annotator, AnnotatorKind, Corpus, Post,
                      annotation_from_dict, annotation_to_dict, post_from_dict,
                      post_to_dict, write_annotations_jsonl)
from ..errors import (InvalidDecision, NotLeasedToYou, UnknownItem,
                      UnresolvedPost)
from ..frames import ALL_FRAMES, FILTERED_LABELS, Frame, make_labelset

DEFAULT_LEASE_TTL = 15 * 60.0


class QueueState(Enum):
    PENDING = "pending"
    LEASED = "leased"
    DONE = "done"


@dataclass
class QueueItem:
    item_id: str
    post: Post
    proposed: Annotation
    state: QueueState = QueueState.PENDING
    lease_annotator: Optional[str] = None
    lease_expiry: Optional[float] = None
    final: Optional[Annotation] = None


@dataclass(frozen=True)
class ValidationDecision:
    item_id: str
    annotator_id: str
    kept: FrozenSet[Frame]
    added: FrozenSet[Frame]
    filtered: bool
    elapsed_seconds: float

    def __post_init__(self):
        if self.elapsed_seconds <= 0:
            raise InvalidDecision("elapsed_seconds must be positive")
        if self.filtered and (self.kept or self.added):
            raise InvalidDecision("a filtered decision cannot keep or add frames")
        if not self.filtered and not (self.kept or self.added):
            raise InvalidDecision("a non-filtered decision needs at least one frame")
        if self.kept & self.added:
            raise InvalidDecision("kept and added must be disjoint")


@dataclass
class ValidationStats:
    items_total: int
    items_done: int
    items_filtered: int
    elapsed_mean: Optional[float]
    elapsed_sd: Optional[float]
    per_frame: Dict[Frame, Dict[str, int]]
    speedup_vs_baseline: Optional[float] = None


class ValidationStore:
    def __init__(
        self,
        log_path: Optional[str | Path] = None,
        lease_ttl: float = DEFAULT_LEASE_TTL,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.lease_ttl = lease_ttl
        self.clock = clock
        self._lock = threading.Lock()
        self._items: Dict[str, QueueItem] = {}
        self._order: List[str] = []
        self._log_path = Path(log_path) if log_path else None
        self._log_fh = None
        if self._log_path is not None:
            if self._log_path.exists():
                self._replay(self._log_path)
            self._log_fh = open(self._log_path, "a", encoding="utf-8")

    # -- persistence --------------------------------------------------------

    def _append(self, record: dict) -> None:
        if self._log_fh is None:
            return
        self._log_fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        self._log_fh.flush()

    def _replay(self, path: Path) -> None:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if rec["event"] == "enqueue":
                    item = QueueItem(
                        item_id=rec["item_id"],
                        post=post_from_dict(rec["post"]),
                        proposed=annotation_from_dict(rec["proposed"]),
                    )
                    if item.item_id not in self._items:
                        self._items[item.item_id] = item
                        self._order.append(item.item_id)
                elif rec["event"] == "submit":
                    item = self._items[rec["item_id"]]
                    item.state = QueueState.DONE
                    item.final = annotation_from_dict(rec["final"])
                    item.lease_annotator = None
                    item.lease_expiry = None

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None

    # -- queue operations ----------------------------------------------------

    def enqueue(self, annotations: Iterable[Annotation], corpus: Corpus) -> int:
        """One pending item per annotation, keyed by post id; idempotent."""
        added = 0
        with self._lock:
            for ann in annotations:
                if ann.post_id not in corpus:
                    raise UnresolvedPost(ann.post_id)
                if ann.post_id in self._items:
                    continue
                item = QueueItem(ann.post_id, corpus.get(ann.post_id), ann)
                self._items[item.item_id] = item
                self._order.append(item.item_id)
                self._append({
                    "event": "enqueue",
                    "item_id": item.item_id,
                    "post": post_to_dict(item.post),
                    "proposed": annotation_to_dict(ann),
                })
                added += 1
        return added

    def _expire_leases(self, now: float) -> None:
        for item in self._items.values():
            if item.state is QueueState.LEASED and item.lease_expiry is not None \
                    and item.lease_expiry <= now:
                item.state = QueueState.PENDING
                item.lease_annotator = None
                item.lease_expiry = None

    def lease_next(self, annotator_id: str) -> Optional[QueueItem]:
        """Atomically lease one pending item; a re-calling annotator gets its
        currently leased item back. Returns None when drained."""
        with self._lock:
            now = self.clock()
            self._expire_leases(now)
            for item_id in self._order:
                item = self._items[item_id]
                if item.state is QueueState.LEASED and item.lease_annotator == annotator_id:
                    return item
            for item_id in self._order:
                item = self._items[item_id]
                if item.state is QueueState.PENDING:
                    item.state = QueueState.LEASED
                    item.lease_annotator = annotator_id
                    item.lease_expiry = now + self.lease_ttl
                    return item
            return None

    def submit_decision(self, decision: ValidationDecision) -> Annotation:
        """Finalize one item; persisted before acknowledgment and idempotent
        per (item_id, annotator)."""
        with self._lock:
            item = self._items.get(decision.item_id)
            if item is None:
                raise UnknownItem(decision.item_id)
            if item.state is QueueState.DONE:
                assert item.final is not None
                if item.final.annotator.id == decision.annotator_id:
                    return item.final
                raise NotLeasedToYou(
                    f"item {decision.item_id!r} already completed by another annotator"
                )
            now = self.clock()
            self._expire_leases(now)
            if item.state is not QueueState.LEASED or item.lease_annotator != decision.annotator_id:
                raise NotLeasedToYou(
                    f"item {decision.item_id!r} is not leased to {decision.annotator_id!r}"
                )
            proposed_frames = item.proposed.labels.frames
            if not decision.kept <= proposed_frames:
                raise InvalidDecision("kept frames must be a subset of the proposal")
            if decision.added & proposed_frames:
                raise InvalidDecision("added frames must be disjoint from the proposal")

            if decision.filtered:
                labels = FILTERED_LABELS
                rationales: Dict[Frame, str] = {}
            else:
                labels = make_labelset(decision.kept | decision.added, filtered=False)
                rationales = {
                    f: r for f, r in item.proposed.rationales.items()
                    if f in decision.kept
                }
            final = Annotation(
                post_id=item.post.id,
                annotator=Annotator(decision.annotator_id, AnnotatorKind.EXPERT_LLM),
                labels=labels,
                rationales=rationales,
                elapsed_seconds=decision.elapsed_seconds,
                created_at=int(time.time()),
            )
            self._append({
                "event": "submit",
                "item_id": item.item_id,
                "decision": {
                    "annotator_id": decision.annotator_id,
                    "kept": sorted(f.value for f in decision.kept),
                    "added": sorted(f.value for f in decision.added),
                    "filtered": decision.filtered,
                    "elapsed_seconds": decision.elapsed_seconds,
                },
                "final": annotation_to_dict(final),
            })
            item.state = QueueState.DONE
            item.final = final
            item.lease_annotator = None
            item.lease_expiry = None
            return final

    # -- reporting -----------------------------------------------------------

    def stats(self, baseline_mean_seconds: Optional[float] = None) -> ValidationStats:
        with self._lock:
            done = [i for i in self._items.values() if i.state is QueueState.DONE]
            elapsed = [
                i.final.elapsed_seconds for i in done
                if i.final is not None and i.final.elapsed_seconds is not None
            ]
            per_frame = {
                f: {"proposed_count": 0, "kept_count": 0, "added_count": 0}
                for f in ALL_FRAMES
            }
            for item in self._items.values():
                for f in item.proposed.labels.frames:
                    per_frame[f]["proposed_count"] += 1
            for item in done:
                assert item.final is not None
                for f in item.final.labels.frames:
                    if f in item.proposed.labels.frames:
                        per_frame[f]["kept_count"] += 1
                    else:
                        per_frame[f]["added_count"] += 1
            mean = sum(elapsed) / len(elapsed) if elapsed else None
            sd = (statistics.stdev(elapsed) if len(elapsed) > 1
                  else (0.0 if elapsed else None))
            speedup = None
            if baseline_mean_seconds is not None and mean:
                speedup = baseline_mean_seconds / mean
            return ValidationStats(
                items_total=len(self._items),
                items_done=len(done),
                items_filtered=sum(
                    1 for i in done if i.final is not None and i.final.labels.filtered
                ),
                elapsed_mean=mean,
                elapsed_sd=sd,
                per_frame=per_frame,
                speedup_vs_baseline=speedup,
            )

    def final_annotations(self) -> List[Annotation]:
        """All Done finals, stable order by item_id."""
        with self._lock:
            done = [
                i.final for i in self._items.values()
                if i.state is QueueState.DONE and i.final is not None
            ]
        return sorted(done, key=lambda a: a.post_id)

    def export_final(self, path: str | Path) -> int:
        finals = self.final_annotations()
        write_annotations_jsonl(finals, path)
        return len(finals)

"""Posts, annotations and corpus containers plus their JSONL serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional

from .errors import DuplicateId, RecordInvalid
from .frames import Frame, LabelSet, make_labelset


class AnnotatorKind(Enum):
    EXPERT = "expert"
    LLM = "llm"
    EXPERT_LLM = "expert+llm"
    MODEL = "model"


@dataclass(frozen=True)
class Post:
    id: str
    text: str
    created_at: int  # UTC seconds
    author_hash: Optional[str] = None
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.text:
            raise ValueError("post text must be non-empty")
        if self.created_at < 0:
            raise ValueError("created_at must be >= 0")

    def with_meta(self, key: str, value: str) -> "Post":
        meta = dict(self.meta)
        meta[key] = value
        return Post(self.id, self.text, self.created_at, self.author_hash, meta)

    def with_text(self, text: str) -> "Post":
        return Post(self.id, text, self.created_at, self.author_hash, self.meta)


@dataclass(frozen=True)
class Annotator:
    id: str
    kind: AnnotatorKind


@dataclass(frozen=True)
class Annotation:
    post_id: str
    annotator: Annotator
    labels: LabelSet
    rationales: Mapping[Frame, str] = field(default_factory=dict)
    elapsed_seconds: Optional[float] = None
    created_at: int = 0

    def __post_init__(self):
        if not set(self.rationales) <= set(self.labels.frames):
            raise ValueError("rationale keys must be a subset of the labeled frames")
        if self.elapsed_seconds is not None and self.elapsed_seconds < 0:
            raise ValueError("elapsed_seconds must be >= 0")


class Corpus:
    """Ordered collection of posts with an id index and attached annotations."""

    def __init__(self, posts: Iterable[Post] = (), annotations: Iterable[Annotation] = ()):
        self.posts: List[Post] = []
        self.index: Dict[str, int] = {}
        self.annotations: List[Annotation] = []
        for post in posts:
            self.add_post(post)
        for ann in annotations:
            self.add_annotation(ann)

    def add_post(self, post: Post) -> None:
        if post.id in self.index:
            raise DuplicateId(post.id)
        self.index[post.id] = len(self.posts)
        self.posts.append(post)

    def add_annotation(self, annotation: Annotation) -> None:
        if annotation.post_id not in self.index:
            raise KeyError(f"annotation references unknown post {annotation.post_id!r}")
        self.annotations.append(annotation)

    def get(self, post_id: str) -> Post:
        return self.posts[self.index[post_id]]

    def __len__(self) -> int:
        return len(self.posts)

    def __iter__(self) -> Iterator[Post]:
        return iter(self.posts)

    def __contains__(self, post_id: str) -> bool:
        return post_id in self.index

    def ids(self) -> List[str]:
        return [p.id for p in self.posts]

    def subset(self, ids: Iterable[str]) -> "Corpus":
        """New corpus with the given posts (original order) and their annotations."""
        wanted = set(ids)
        sub = Corpus(p for p in self.posts if p.id in wanted)
        for ann in self.annotations:
            if ann.post_id in wanted:
                sub.add_annotation(ann)
        return sub

    def annotations_for(self, post_id: str) -> List[Annotation]:
        return [a for a in self.annotations if a.post_id == post_id]


# ---------------------------------------------------------------------------
# JSONL serialization


def post_to_dict(post: Post) -> dict:
    rec: dict = {"id": post.id, "text": post.text, "created_at": post.created_at}
    if post.author_hash is not None:
        rec["author_hash"] = post.author_hash
    if post.meta:
        rec["meta"] = dict(post.meta)
    return rec


def post_from_dict(rec: dict, line_no: int = 0) -> Post:
    for key, typ in (("id", str), ("text", str), ("created_at", int)):
        if key not in rec:
            raise RecordInvalid(line_no, f"missing field {key!r}")
        if not isinstance(rec[key], typ) or isinstance(rec[key], bool):
            raise RecordInvalid(line_no, f"field {key!r} has wrong type")
    author = rec.get("author_hash")
    if author is not None and not isinstance(author, str):
        raise RecordInvalid(line_no, "field 'author_hash' has wrong type")
    meta = rec.get("meta", {})
    if not isinstance(meta, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in meta.items()
    ):
        raise RecordInvalid(line_no, "field 'meta' must map strings to strings")
    try:
        return Post(rec["id"], rec["text"], rec["created_at"], author, meta)
    except ValueError as exc:
        raise RecordInvalid(line_no, str(exc)) from exc


def write_corpus_jsonl(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for post in corpus:
            fh.write(json.dumps(post_to_dict(post), ensure_ascii=False) + "\n")


def annotation_to_dict(ann: Annotation) -> dict:
    rec: dict = {
        "post_id": ann.post_id,
        "annotator": {"id": ann.annotator.id, "kind": ann.annotator.kind.value},
        "labels": {
            "filtered": ann.labels.filtered,
            "frames": sorted(f.value for f in ann.labels.frames),
        },
        "created_at": ann.created_at,
    }
    if ann.rationales:
        rec["rationales"] = {f.value: r for f, r in ann.rationales.items()}
    if ann.elapsed_seconds is not None:
        rec["elapsed_seconds"] = ann.elapsed_seconds
    return rec


def annotation_from_dict(rec: dict) -> Annotation:
    labels = make_labelset(
        {Frame(v) for v in rec["labels"].get("frames", [])},
        filtered=rec["labels"].get("filtered", False),
    )
    rationales = {Frame(k): v for k, v in rec.get("rationales", {}).items()}
    return Annotation(
        post_id=rec["post_id"],
        annotator=Annotator(rec["annotator"]["id"], AnnotatorKind(rec["annotator"]["kind"])),
        labels=labels,
        rationales=rationales,
        elapsed_seconds=rec.get("elapsed_seconds"),
        created_at=rec.get("created_at", 0),
    )


def write_annotations_jsonl(annotations: Iterable[Annotation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(json.dumps(annotation_to_dict(ann), ensure_ascii=False) + "\n")


def read_annotations_jsonl(path: str | Path) -> List[Annotation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(annotation_from_dict(json.loads(line)))
    return out

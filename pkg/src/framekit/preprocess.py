"""Corpus ingestion, text cleaning, deduplication, filtering and splits."""

from __future__ import annotations

import json
import math
import random
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple

from .corpus import AnnotatorKind, Corpus, post_from_dict, write_corpus_jsonl
from .errors import EmptyKeyword, InsufficientEligible, RecordInvalid

_MENTION_RE = re.compile(r"@\w+")
_WS_RE = re.compile(r"\s+")

# Code point ranges treated as emoji for the colon-name replacement.
_EMOJI_RANGES = (
    (0x1F000, 0x1FAFF),  # pictographs, emoticons, transport, supplemental
    (0x2600, 0x27BF),    # misc symbols, dingbats
    (0x2B00, 0x2BFF),    # misc symbols and arrows (stars, etc.)
)
# Invisible emoji plumbing removed outright.
_EMOJI_MODIFIERS = {0xFE0E, 0xFE0F, 0x200D}


def _is_emoji(cp: int) -> bool:
    return any(lo <= cp <= hi for lo, hi in _EMOJI_RANGES)


def _emoji_token(ch: str) -> str:
    name = unicodedata.name(ch, "")
    if not name:
        return ""
    return ":" + name.lower().replace(" ", "_") + ":"


def clean_text(text: str) -> str:
    """Anonymize @-handles, replace emoji with :unicode_name: tokens and
    normalize whitespace. Idempotent."""
    text = _MENTION_RE.sub("@mention", text)
    out = []
    for ch in text:
        cp = ord(ch)
        if cp in _EMOJI_MODIFIERS:
            continue
        if _is_emoji(cp):
            token = _emoji_token(ch)
            if token:
                out.append(" " + token + " ")
            continue
        out.append(ch)
    return _WS_RE.sub(" ", "".join(out)).strip()


def ingest_jsonl(path: str | Path) -> Corpus:
    """Read a posts JSONL file in file order. Raises RecordInvalid on
    malformed lines and DuplicateId on repeated ids."""
    corpus = Corpus()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordInvalid(line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(rec, dict):
                raise RecordInvalid(line_no, "record is not an object")
            corpus.add_post(post_from_dict(rec, line_no))
    return corpus


def clean_corpus(corpus: Corpus) -> Corpus:
    """clean_text applied per post, order preserved."""
    out = Corpus(p.with_text(clean_text(p.text)) for p in corpus)
    for ann in corpus.annotations:
        out.add_annotation(ann)
    return out


def dedup(corpus: Corpus) -> Tuple[Corpus, int]:
    """Keep the first occurrence of each cleaned-text string (stable order).

    Returns the deduplicated corpus and the number of removed posts.
    """
    seen = set()
    keep = []
    for post in corpus:
        key = clean_text(post.text)
        if key not in seen:
            seen.add(key)
            keep.append(post.id)
    return corpus.subset(keep), len(corpus) - len(keep)


def keyword_filter(corpus: Corpus, keyword: str) -> Corpus:
    """Retain posts whose lowercased text contains the lowercased keyword."""
    if not keyword:
        raise EmptyKeyword("keyword must be non-empty")
    needle = keyword.lower()
    return corpus.subset(p.id for p in corpus if needle in p.text.lower())


def language_filter(corpus: Corpus, predicate: Optional[Callable[[str], bool]] = None) -> Corpus:
    """Pluggable language gate; the default predicate accepts everything."""
    if predicate is None:
        return corpus
    return corpus.subset(p.id for p in corpus if predicate(p.text))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    val_fraction: float
    test_fraction: float
    seed: int = 0
    test_source_restriction: Optional[AnnotatorKind] = None
    restricted_test_count: int = 0
    pinned_test_ids: frozenset[str] = frozenset()

    def __post_init__(self):
        fracs = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f < 0 or f > 1 for f in fracs):
            raise ValueError("fractions must lie in [0, 1]")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError("fractions must sum to 1")
        if self.restricted_test_count < 0:
            raise ValueError("restricted_test_count must be >= 0")
        if self.restricted_test_count and self.test_source_restriction is None:
            raise ValueError("restricted_test_count requires a test_source_restriction")


def split(corpus: Corpus, spec: SplitSpec) -> Tuple[Corpus, Corpus, Corpus]:
    """Deterministic train/val/test partition.

    Pinned ids and restriction-qualifying draws fill the test set first; the
    remainder is shuffled by a seeded PRNG and partitioned by the fractions
    (train = floor, val = floor, test gets the rest).
    """
    unknown = spec.pinned_test_ids - set(corpus.index)
    if unknown:
        raise ValueError(f"pinned ids not in corpus: {sorted(unknown)[:5]}")

    rng = random.Random(spec.seed)
    test_ids = [p.id for p in corpus if p.id in spec.pinned_test_ids]

    if spec.test_source_restriction is not None and spec.restricted_test_count:
        qualified = {
            a.post_id for a in corpus.annotations
            if a.annotator.kind == spec.test_source_restriction
        }
        eligible = [p.id for p in corpus
                    if p.id in qualified and p.id not in spec.pinned_test_ids]
        if len(eligible) < spec.restricted_test_count:
            raise InsufficientEligible(
                f"need {spec.restricted_test_count} qualifying posts, "
                f"have {len(eligible)}"
            )
        test_ids.extend(rng.sample(eligible, spec.restricted_test_count))

    in_test = set(test_ids)
    remainder = [p.id for p in corpus if p.id not in in_test]
    rng.shuffle(remainder)
    n = len(remainder)
    n_train = math.floor(spec.train_fraction * n)
    n_val = math.floor(spec.val_fraction * n)
    train_ids = remainder[:n_train]
    val_ids = remainder[n_train:n_train + n_val]
    test_ids.extend(remainder[n_train + n_val:])

    return corpus.subset(train_ids), corpus.subset(val_ids), corpus.subset(test_ids)


def write_split(corpus: Corpus, spec: SplitSpec, outdir: str | Path) -> dict:
    """Write train/val/test corpus files plus a manifest recording the spec,
    seed and member ids. Returns the manifest dict."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    train, val, test = split(corpus, spec)
    parts = {"train": train, "val": val, "test": test}
    for name, part in parts.items():
        write_corpus_jsonl(part, outdir / f"{name}.jsonl")
    manifest = {
        "seed": spec.seed,
        "spec": {
            "train_fraction": spec.train_fraction,
            "val_fraction": spec.val_fraction,
            "test_fraction": spec.test_fraction,
            "test_source_restriction": (
                spec.test_source_restriction.value
                if spec.test_source_restriction else None
            ),
            "restricted_test_count": spec.restricted_test_count,
            "pinned_test_ids": sorted(spec.pinned_test_ids),
        },
        "members": {name: part.ids() for name, part in parts.items()},
    }
    with open(outdir / "split_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest

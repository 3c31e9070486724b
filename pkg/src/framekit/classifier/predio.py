"""Predictions file interop: `post_id<TAB>labels` where labels is "0"
(filtered) or a comma-separated list of canonical frame names."""

from __future__ import annotations

from pathlib import Path
from typing import List, Union

from ..corpus import Annotation, Annotator, AnnotatorKind, Corpus
from ..errors import UnknownFrame, UnknownLabel, UnresolvedPost
from ..frames import LabelSet
from .model import ClassifierModel, predict_batch


def export_predictions(
    corpus: Corpus, labelsets: List[LabelSet], path: Union[str, Path]
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for post, labels in zip(corpus, labelsets):
            fh.write(f"{post.id}\t{labels.serialize()}\n")


def bulk_predict(model: ClassifierModel, corpus: Corpus, path: Union[str, Path]) -> None:
    export_predictions(corpus, predict_batch(model, corpus), path)


def import_predictions(
    path: Union[str, Path], corpus: Corpus, annotator_id: str = "model"
) -> List[Annotation]:
    annotator = Annotator(annotator_id, AnnotatorKind.MODEL)
    annotations: List[Annotation] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise UnknownLabel(line_no, line)
            post_id, label_text = parts
            if post_id not in corpus:
                exc = UnresolvedPost(post_id)
                exc.line_no = line_no  # type: ignore[attr-defined]
                raise exc
            try:
                labels = LabelSet.parse(label_text)
            except UnknownFrame as err:
                raise UnknownLabel(line_no, err.tag) from err
            annotations.append(Annotation(post_id, annotator, labels))
    return annotations

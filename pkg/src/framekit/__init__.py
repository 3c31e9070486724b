"""Toolkit for multi-label framing analysis of social media corpora:
preprocessing, two-stage LLM annotation, expert validation, a linear
classifier and corpus statistics."""

__version__ = "0.1.0"

from .corpus import Annotation, Annotator, AnnotatorKind, Corpus, Post
from .errors import FramekitError
from .frames import (ALL_FRAMES, FILTERED_LABELS, Frame, LabelSet, Theme,
                     canonical_name_of, make_labelset, parse_frame,
                     prompt_tag_of, theme_of)

__all__ = [
    "__version__",
    "Annotation", "Annotator", "AnnotatorKind", "Corpus", "Post",
    "FramekitError",
    "ALL_FRAMES", "FILTERED_LABELS", "Frame", "LabelSet", "Theme",
    "canonical_name_of", "make_labelset", "parse_frame", "prompt_tag_of",
    "theme_of",
]

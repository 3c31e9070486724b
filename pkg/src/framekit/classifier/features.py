"""Bag-of-words feature extraction: unigrams + bigrams, tf-idf weighting."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
from scipy import sparse

from ..corpus import Corpus
from ..errors import EmptyCorpus

# Word-like runs (apostrophes kept inside words) or :emoji_name: tokens.
_TOKEN_RE = re.compile(r":[a-z0-9_]+:|[a-z0-9]+(?:'[a-z0-9]+)*")


def unigrams(text: str) -> List[str]:
    return _TOKEN_RE.findall(text.lower())


def tokenize(text: str) -> List[str]:
    """Unigrams followed by adjacent-pair bigrams joined by underscores."""
    grams = unigrams(text)
    return grams + [f"{a}_{b}" for a, b in zip(grams, grams[1:])]


@dataclass(frozen=True)
class FeatureConfig:
    min_df: int = 1
    max_features: Optional[int] = None


@dataclass
class FeatureModel:
    vocabulary: Dict[str, int]  # token -> dense index
    idf: np.ndarray             # idf per index, ln((1+N)/(1+df)) + 1
    config: FeatureConfig


def fit_features(corpus: Corpus, config: FeatureConfig = FeatureConfig()) -> FeatureModel:
    """Vocabulary of tokens with df >= min_df, truncated to max_features by
    (df descending, token ascending)."""
    if len(corpus) == 0:
        raise EmptyCorpus("cannot fit features on an empty corpus")
    df: Dict[str, int] = {}
    for post in corpus:
        for token in set(tokenize(post.text)):
            df[token] = df.get(token, 0) + 1
    kept = [(token, count) for token, count in df.items() if count >= config.min_df]
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    if config.max_features is not None:
        kept = kept[: config.max_features]
    vocabulary = {token: i for i, (token, _) in enumerate(kept)}
    n_docs = len(corpus)
    idf = np.array(
        [math.log((1 + n_docs) / (1 + count)) + 1.0 for _, count in kept],
        dtype=np.float64,
    )
    return FeatureModel(vocabulary=vocabulary, idf=idf, config=config)


def vectorize(model: FeatureModel, texts: List[str]) -> sparse.csr_matrix:
    """L2-normalized tf-idf rows, one per text."""
    indptr = [0]
    indices: List[int] = []
    data: List[float] = []
    for text in texts:
        counts: Dict[int, int] = {}
        for token in tokenize(text):
            idx = model.vocabulary.get(token)
            if idx is not None:
                counts[idx] = counts.get(idx, 0) + 1
        row_indices = sorted(counts)
        row = [counts[i] * model.idf[i] for i in row_indices]
        norm = math.sqrt(sum(v * v for v in row))
        if norm > 0:
            row = [v / norm for v in row]
        indices.extend(row_indices)
        data.extend(row)
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64),
         np.array(indptr, dtype=np.int64)),
        shape=(len(texts), len(model.vocabulary)),
    )

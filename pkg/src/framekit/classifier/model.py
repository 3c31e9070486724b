"""Deterministic one-vs-rest logistic classifier over tf-idf features.

Ten independent heads (nine frames plus the relevance filter), full-batch
gradient descent from zero weights, early stopping on validation loss.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import sparse

from ..agreement import FILTERED_LABEL, Label, PRFReport, prf_against_reference
from ..corpus import Corpus, Post
from ..errors import EmptySplit, LabelMismatch
from ..frames import ALL_FRAMES, FILTERED_LABELS, Frame, LabelSet, make_labelset
from .features import FeatureConfig, FeatureModel, fit_features, vectorize

HEADS: Tuple[Label, ...] = tuple(ALL_FRAMES) + (FILTERED_LABEL,)
N_HEADS = len(HEADS)
_FILTER_HEAD = N_HEADS - 1


@dataclass(frozen=True)
class TrainConfig:
    l2_lambda: float = 1e-4
    learning_rate: float = 1.0
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0
    threshold: float = 0.5
    features: FeatureConfig = field(default_factory=FeatureConfig)

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")


@dataclass
class ClassifierModel:
    feature_model: FeatureModel
    weights: np.ndarray  # (V, N_HEADS)
    biases: np.ndarray   # (N_HEADS,)
    threshold: float
    trained_config: TrainConfig


@dataclass
class TrainReport:
    train_losses: List[float]
    val_losses: List[float]
    stopped_epoch: int
    val_report: Optional[PRFReport]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def loss_and_grad(
    weights: np.ndarray,
    biases: np.ndarray,
    x: sparse.csr_matrix,
    y: np.ndarray,
    l2_lambda: float,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Regularized mean binary cross-entropy over all (sample, head) pairs
    and its analytic gradient."""
    n, k = y.shape
    probs = _sigmoid(x @ weights + biases)
    eps = 1e-12
    bce = -(y * np.log(probs + eps) + (1 - y) * np.log(1 - probs + eps))
    loss = bce.mean() + l2_lambda * float((weights * weights).sum())
    diff = (probs - y) / (n * k)
    grad_w = (x.T @ diff) + 2.0 * l2_lambda * weights
    grad_b = diff.sum(axis=0)
    return float(loss), np.asarray(grad_w), grad_b


def _gold_labels(corpus: Corpus) -> Dict[str, LabelSet]:
    by_post: Dict[str, List[LabelSet]] = {}
    for ann in corpus.annotations:
        by_post.setdefault(ann.post_id, []).append(ann.labels)
    gold = {}
    for post in corpus:
        labels = by_post.get(post.id, [])
        if len(labels) != 1:
            raise LabelMismatch(
                f"post {post.id!r} has {len(labels)} gold label sets (need exactly 1)"
            )
        gold[post.id] = labels[0]
    return gold


def _label_matrix(corpus: Corpus, gold: Dict[str, LabelSet]) -> np.ndarray:
    y = np.zeros((len(corpus), N_HEADS), dtype=np.float64)
    for i, post in enumerate(corpus):
        labels = gold[post.id]
        if labels.filtered:
            y[i, _FILTER_HEAD] = 1.0
        else:
            for j, frame in enumerate(ALL_FRAMES):
                if frame in labels.frames:
                    y[i, j] = 1.0
    return y


def train(
    train_corpus: Corpus, val_corpus: Corpus, config: TrainConfig = TrainConfig()
) -> Tuple[ClassifierModel, TrainReport]:
    if len(train_corpus) == 0 or len(val_corpus) == 0:
        raise EmptySplit("train and val splits must be non-empty")
    train_gold = _gold_labels(train_corpus)
    val_gold = _gold_labels(val_corpus)

    feature_model = fit_features(train_corpus, config.features)
    x_train = vectorize(feature_model, [p.text for p in train_corpus])
    x_val = vectorize(feature_model, [p.text for p in val_corpus])
    y_train = _label_matrix(train_corpus, train_gold)
    y_val = _label_matrix(val_corpus, val_gold)

    # Zero init: the per-head logistic loss is convex, so the optimum does
    # not depend on initialization and the run is fully deterministic.
    v = len(feature_model.vocabulary)
    weights = np.zeros((v, N_HEADS), dtype=np.float64)
    biases = np.zeros(N_HEADS, dtype=np.float64)

    train_losses: List[float] = []
    val_losses: List[float] = []
    best_val = np.inf
    best_weights = weights.copy()
    best_biases = biases.copy()
    since_best = 0
    stopped_epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        loss, grad_w, grad_b = loss_and_grad(
            weights, biases, x_train, y_train, config.l2_lambda
        )
        weights = weights - config.learning_rate * grad_w
        biases = biases - config.learning_rate * grad_b
        train_losses.append(loss)
        val_loss, _, _ = loss_and_grad(
            weights, biases, x_val, y_val, config.l2_lambda
        )
        val_losses.append(val_loss)
        stopped_epoch = epoch
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_weights = weights.copy()
            best_biases = biases.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break

    model = ClassifierModel(
        feature_model=feature_model,
        weights=best_weights,
        biases=best_biases,
        threshold=config.threshold,
        trained_config=config,
    )
    val_report = evaluate(model, val_corpus)
    report = TrainReport(train_losses, val_losses, stopped_epoch, val_report)
    return model, report


def _probabilities(model: ClassifierModel, texts: List[str]) -> np.ndarray:
    x = vectorize(model.feature_model, texts)
    return _sigmoid(x @ model.weights + model.biases)


def predict(model: ClassifierModel, post: Post) -> Tuple[LabelSet, Dict[Label, float]]:
    probs_row = _probabilities(model, [post.text])[0]
    probs = {head: float(probs_row[i]) for i, head in enumerate(HEADS)}
    return _decide(probs_row, model.threshold), probs


def _decide(probs_row: np.ndarray, threshold: float) -> LabelSet:
    frame_probs = probs_row[:_FILTER_HEAD]
    p_filtered = probs_row[_FILTER_HEAD]
    if p_filtered >= threshold and p_filtered > frame_probs.max():
        return FILTERED_LABELS
    chosen = {ALL_FRAMES[i] for i in range(len(ALL_FRAMES)) if frame_probs[i] >= threshold}
    if not chosen:
        # Mirror the prompting contract: at least one frame must be selected.
        chosen = {ALL_FRAMES[int(frame_probs.argmax())]}
    return make_labelset(chosen, filtered=False)


def predict_batch(model: ClassifierModel, corpus: Corpus) -> List[LabelSet]:
    probs = _probabilities(model, [p.text for p in corpus])
    return [_decide(probs[i], model.threshold) for i in range(len(corpus))]


def evaluate(model: ClassifierModel, test_corpus: Corpus) -> PRFReport:
    if len(test_corpus) == 0:
        raise EmptySplit("test split must be non-empty")
    gold = _gold_labels(test_corpus)
    predictions = {
        post.id: labels
        for post, labels in zip(test_corpus, predict_batch(model, test_corpus))
    }
    return prf_against_reference(predictions, gold)


# ---------------------------------------------------------------------------
# Model file round-trip (versioned JSON container)

FORMAT_VERSION = 1


def save_model(model: ClassifierModel, path: Union[str, Path]) -> None:
    tokens = sorted(model.feature_model.vocabulary, key=model.feature_model.vocabulary.get)
    payload = {
        "format_version": FORMAT_VERSION,
        "config": {
            "l2_lambda": model.trained_config.l2_lambda,
            "learning_rate": model.trained_config.learning_rate,
            "max_epochs": model.trained_config.max_epochs,
            "patience": model.trained_config.patience,
            "seed": model.trained_config.seed,
            "min_df": model.trained_config.features.min_df,
            "max_features": model.trained_config.features.max_features,
        },
        "vocabulary": tokens,
        "idf": model.feature_model.idf.tolist(),
        "weights": model.weights.tolist(),
        "biases": model.biases.tolist(),
        "threshold": model.threshold,
        "heads": [h.value if isinstance(h, Frame) else h for h in HEADS],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_model(path: Union[str, Path]) -> ClassifierModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format: {payload.get('format_version')}")
    cfg = payload["config"]
    config = TrainConfig(
        l2_lambda=cfg["l2_lambda"],
        learning_rate=cfg["learning_rate"],
        max_epochs=cfg["max_epochs"],
        patience=cfg["patience"],
        seed=cfg["seed"],
        threshold=payload["threshold"],
        features=FeatureConfig(min_df=cfg["min_df"], max_features=cfg["max_features"]),
    )
    feature_model = FeatureModel(
        vocabulary={token: i for i, token in enumerate(payload["vocabulary"])},
        idf=np.array(payload["idf"], dtype=np.float64),
        config=config.features,
    )
    return ClassifierModel(
        feature_model=feature_model,
        weights=np.array(payload["weights"], dtype=np.float64),
        biases=np.array(payload["biases"], dtype=np.float64),
        threshold=payload["threshold"],
        trained_config=config,
    )

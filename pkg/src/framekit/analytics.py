"""Corpus statistics: weighted log-odds with an informed Dirichlet prior,
n-gram counting, state segmentation, proportion/co-occurrence matrices,
time series, OLS regression, t-tests and subset significance."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .classifier.features import unigrams
from .corpus import Annotation, Corpus, Post
from .errors import (DegeneratePool, DegenerateX, EmptyGroup, EmptyPrior,
                     EmptyTermList, InvalidN, LengthMismatch, NonPositiveAlpha,
                     ScoreOutOfRange, TooFewSamples, UnresolvedPost,
                     ZeroVariance)
from .frames import ALL_FRAMES, Frame, LabelSet, canonical_name_of

Z_SIGNIFICANT = 1.96


# ---------------------------------------------------------------------------
# n-gram counting

@dataclass
class NgramCounts:
    counts: Dict[str, int]
    total_tokens: int
    n: int
    stopwords: frozenset = frozenset()


def ngram_counts(corpus: Corpus, n: int, stopwords: Iterable[str] = ()) -> NgramCounts:
    """Counts aggregated over all posts; stopwords are removed before bigram
    formation, so bigrams span the remaining adjacency."""
    if n not in (1, 2):
        raise InvalidN(f"n must be 1 or 2, got {n}")
    stop = frozenset(w.lower() for w in stopwords)
    counts: Dict[str, int] = {}
    total = 0
    for post in corpus:
        tokens = [t for t in unigrams(post.text) if t not in stop]
        grams = tokens if n == 1 else [f"{a}_{b}" for a, b in zip(tokens, tokens[1:])]
        for gram in grams:
            counts[gram] = counts.get(gram, 0) + 1
            total += 1
    return NgramCounts(counts=counts, total_tokens=total, n=n, stopwords=stop)


# ---------------------------------------------------------------------------
# Weighted log-odds (informed Dirichlet prior)

@dataclass(frozen=True)
class LogOddsResult:
    term: str
    y_i: int
    y_j: int
    alpha_w: float
    delta: float
    variance: float
    z: float

    @property
    def significant(self) -> bool:
        return abs(self.z) >= Z_SIGNIFICANT


def weighted_log_odds(
    counts_i: NgramCounts,
    counts_j: NgramCounts,
    prior: Optional[NgramCounts] = None,
    alpha_total: float = 500.0,
    epsilon: float = 0.5,
) -> List[LogOddsResult]:
    """Per-term log-odds difference between two groups with Dirichlet
    smoothing from a background prior (default: the union of both groups).

    Results are sorted by z descending.
    """
    if alpha_total <= 0:
        raise NonPositiveAlpha("alpha_total must be positive")
    vocab = sorted(set(counts_i.counts) | set(counts_j.counts))
    if prior is None:
        merged = {
            t: counts_i.counts.get(t, 0) + counts_j.counts.get(t, 0) for t in vocab
        }
        prior = NgramCounts(merged, sum(merged.values()), counts_i.n)
    if not prior.counts:
        raise EmptyPrior("prior has no terms")

    prior_mass = sum(prior.counts.get(t, 0) + epsilon for t in vocab)
    alpha = {
        t: alpha_total * (prior.counts.get(t, 0) + epsilon) / prior_mass for t in vocab
    }
    alpha0 = sum(alpha.values())
    n_i = counts_i.total_tokens
    n_j = counts_j.total_tokens

    results = []
    for term in vocab:
        y_i = counts_i.counts.get(term, 0)
        y_j = counts_j.counts.get(term, 0)
        a = alpha[term]
        delta = (
            math.log((y_i + a) / (n_i + alpha0 - y_i - a))
            - math.log((y_j + a) / (n_j + alpha0 - y_j - a))
        )
        variance = 1.0 / (y_i + a) + 1.0 / (y_j + a)
        z = delta / math.sqrt(variance)
        results.append(LogOddsResult(term, y_i, y_j, a, delta, variance, z))
    results.sort(key=lambda r: (-r.z, r.term))
    return results


# ---------------------------------------------------------------------------
# State segmentation (gazetteer matcher)

DEFAULT_GAZETTEER: Dict[str, Dict[str, List[str]]] = {
    "CA": {"names": ["california"], "codes": ["CA"]},
    "NY": {"names": ["new york"], "codes": ["NY"]},
    "TX": {"names": ["texas"], "codes": ["TX"]},
    "WA": {"names": ["washington"], "codes": ["WA"]},
    "OR": {"names": ["oregon"], "codes": ["OR"]},
    "FL": {"names": ["florida"], "codes": ["FL"]},
    "IL": {"names": ["illinois"], "codes": ["IL"]},
    "CO": {"names": ["colorado"], "codes": ["CO"]},
    "AZ": {"names": ["arizona"], "codes": ["AZ"]},
    "DC": {"names": ["washington dc", "district of columbia"], "codes": ["DC"]},
}


def _case_tokens(text: str) -> List[str]:
    out = []
    word = []
    for ch in text:
        if ch.isalnum():
            word.append(ch)
        elif word:
            out.append("".join(word))
            word = []
    if word:
        out.append("".join(word))
    return out


def state_segment(
    corpus: Corpus, gazetteer: Optional[Mapping[str, Dict[str, List[str]]]] = None
) -> Dict[str, Corpus]:
    """Bucket posts by mentioned state. Full names match case-insensitively
    on token sequences; 2-letter codes only as standalone UPPERCASE tokens
    (so lowercase "or"/"in" never match). A post may land in several buckets."""
    gaz = gazetteer if gazetteer is not None else DEFAULT_GAZETTEER
    name_seqs: List[Tuple[Tuple[str, ...], str]] = []
    code_map: Dict[str, str] = {}
    for state, entry in gaz.items():
        for name in entry.get("names", []):
            name_seqs.append((tuple(name.lower().split()), state))
        for code in entry.get("codes", []):
            code_map[code] = state

    buckets: Dict[str, List[str]] = {state: [] for state in gaz}
    for post in corpus:
        tokens = _case_tokens(post.text)
        lowered = [t.lower() for t in tokens]
        hit = set()
        for token in tokens:
            if token in code_map and token.isupper():
                hit.add(code_map[token])
        for seq, state in name_seqs:
            k = len(seq)
            if any(tuple(lowered[i:i + k]) == seq for i in range(len(lowered) - k + 1)):
                hit.add(state)
        for state in hit:
            buckets[state].append(post.id)
    return {state: corpus.subset(ids) for state, ids in buckets.items()}


# ---------------------------------------------------------------------------
# Proportion / co-occurrence matrices

class Normalization(Enum):
    ROW = "row"
    COLUMN = "column"
    NONE = "none"


@dataclass
class ProportionMatrix:
    row_labels: List[str]
    col_labels: List[str]
    counts: List[List[int]]
    values: List[List[float]]
    normalization: Normalization


def _normalize(counts: List[List[int]], mode: Normalization) -> List[List[float]]:
    values = [[float(c) for c in row] for row in counts]
    if mode is Normalization.ROW:
        for row in values:
            total = sum(row)
            if total > 0:
                for j in range(len(row)):
                    row[j] /= total
    elif mode is Normalization.COLUMN:
        if values:
            for j in range(len(values[0])):
                total = sum(row[j] for row in values)
                if total > 0:
                    for row in values:
                        row[j] /= total
    return values


def labels_by_post(annotations: Iterable[Annotation]) -> Dict[str, LabelSet]:
    """First annotation per post wins (callers pass one source at a time)."""
    result: Dict[str, LabelSet] = {}
    for ann in annotations:
        result.setdefault(ann.post_id, ann.labels)
    return result


def frame_proportions(
    groups: Mapping[str, Corpus],
    annotations: Iterable[Annotation],
    normalization: Normalization = Normalization.NONE,
) -> ProportionMatrix:
    """cell(group, frame) = posts in the group labeled with the frame."""
    labels = labels_by_post(annotations)
    row_labels = list(groups)
    counts = []
    for group in row_labels:
        row = []
        for frame in ALL_FRAMES:
            row.append(sum(
                1 for post in groups[group]
                if post.id in labels and frame in labels[post.id].frames
            ))
        counts.append(row)
    return ProportionMatrix(
        row_labels=row_labels,
        col_labels=[canonical_name_of(f) for f in ALL_FRAMES],
        counts=counts,
        values=_normalize(counts, normalization),
        normalization=normalization,
    )


def frame_cooccurrence(
    corpus: Corpus,
    annotations: Iterable[Annotation],
    normalization: Normalization = Normalization.NONE,
) -> ProportionMatrix:
    """cell(f1, f2) = posts labeled with both frames."""
    labels = labels_by_post(annotations)
    counts = []
    for f1 in ALL_FRAMES:
        row = []
        for f2 in ALL_FRAMES:
            row.append(sum(
                1 for post in corpus
                if post.id in labels
                and f1 in labels[post.id].frames and f2 in labels[post.id].frames
            ))
        counts.append(row)
    names = [canonical_name_of(f) for f in ALL_FRAMES]
    return ProportionMatrix(names, list(names), counts,
                            _normalize(counts, normalization), normalization)


def cooccurrence(
    corpus: Corpus,
    terms_a: Sequence[str],
    terms_b: Sequence[str],
    normalization: Normalization = Normalization.NONE,
) -> ProportionMatrix:
    """cell(a, b) = posts containing both terms (case-insensitive substring)."""
    if not terms_a or not terms_b:
        raise EmptyTermList("both term lists must be non-empty")
    texts = [p.text.lower() for p in corpus]
    counts = []
    for a in terms_a:
        needle_a = a.lower()
        row = []
        for b in terms_b:
            needle_b = b.lower()
            row.append(sum(1 for t in texts if needle_a in t and needle_b in t))
        counts.append(row)
    return ProportionMatrix(list(terms_a), list(terms_b), counts,
                            _normalize(counts, normalization), normalization)


# ---------------------------------------------------------------------------
# Time series

class Granularity(Enum):
    MONTH = "month"
    DAY = "day"


def time_series(
    corpus: Corpus,
    annotations: Iterable[Annotation],
    granularity: Granularity = Granularity.MONTH,
) -> Dict[str, Dict[Frame, int]]:
    """Bucket (UTC "YYYY-MM" or "YYYY-MM-DD") -> frame -> post count.
    A post increments every frame it carries; filtered posts contribute
    nothing."""
    labels = labels_by_post(annotations)
    series: Dict[str, Dict[Frame, int]] = {}
    fmt = "%Y-%m" if granularity is Granularity.MONTH else "%Y-%m-%d"
    for post in corpus:
        label = labels.get(post.id)
        if label is None or label.filtered:
            continue
        bucket = datetime.fromtimestamp(post.created_at, tz=timezone.utc).strftime(fmt)
        per_frame = series.setdefault(bucket, {})
        for frame in label.frames:
            per_frame[frame] = per_frame.get(frame, 0) + 1
    return series


# ---------------------------------------------------------------------------
# Regression, t-tests, proportion tests

@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    residual_stderr: float
    n: int


def ols_fit(x: Sequence[float], y: Sequence[float]) -> RegressionFit:
    if len(x) != len(y):
        raise LengthMismatch(f"|x|={len(x)} but |y|={len(y)}")
    n = len(x)
    if n < 2:
        raise TooFewSamples("need at least two points")
    x_bar = sum(x) / n
    y_bar = sum(y) / n
    sxx = sum((xi - x_bar) ** 2 for xi in x)
    if sxx == 0:
        raise DegenerateX("x is constant")
    sxy = sum((xi - x_bar) * (yi - y_bar) for xi, yi in zip(x, y))
    slope = sxy / sxx
    intercept = y_bar - slope * x_bar
    ss_res = sum((yi - (intercept + slope * xi)) ** 2 for xi, yi in zip(x, y))
    ss_tot = sum((yi - y_bar) ** 2 for yi in y)
    if ss_tot == 0:
        r_squared = 1.0 if ss_res <= 1e-300 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    residual_stderr = math.sqrt(ss_res / (n - 2)) if n > 2 else 0.0
    slope_stderr = residual_stderr / math.sqrt(sxx)
    return RegressionFit(slope, intercept, r_squared, slope_stderr, residual_stderr, n)


class TTestVariant(Enum):
    STUDENT = "student"
    WELCH = "welch"


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p_two_sided: float
    variant: TTestVariant


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz)."""
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) via the regularized incomplete beta function."""
    if t == 0:
        return 1.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def t_test(
    a: Sequence[float], b: Sequence[float],
    variant: TTestVariant = TTestVariant.WELCH,
) -> TTestResult:
    n1, n2 = len(a), len(b)
    if n1 < 2 or n2 < 2:
        raise TooFewSamples("both samples need at least two values")
    mean1 = sum(a) / n1
    mean2 = sum(b) / n2
    var1 = sum((v - mean1) ** 2 for v in a) / (n1 - 1)
    var2 = sum((v - mean2) ** 2 for v in b) / (n2 - 1)
    if var1 == 0 and var2 == 0:
        if mean1 != mean2:
            raise ZeroVariance("both samples are constant with unequal means")
        df = float(n1 + n2 - 2) if variant is TTestVariant.STUDENT else float(
            min(n1, n2) - 1)
        return TTestResult(0.0, df, 1.0, variant)
    if variant is TTestVariant.STUDENT:
        df = float(n1 + n2 - 2)
        pooled = ((n1 - 1) * var1 + (n2 - 1) * var2) / df
        se = math.sqrt(pooled * (1.0 / n1 + 1.0 / n2))
    else:
        se_sq = var1 / n1 + var2 / n2
        se = math.sqrt(se_sq)
        df = se_sq ** 2 / (
            (var1 / n1) ** 2 / (n1 - 1) + (var2 / n2) ** 2 / (n2 - 1)
        )
    t = (mean1 - mean2) / se
    return TTestResult(t, df, student_t_sf_two_sided(t, df), variant)


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@dataclass(frozen=True)
class TwoProportionResult:
    p1: float
    p2: float
    z: float
    p_two_sided: float


def subset_frame_significance(
    subset: Corpus,
    complement: Corpus,
    annotations: Iterable[Annotation],
    frame: Frame,
) -> TwoProportionResult:
    """Two-proportion z-test on the share of posts carrying the frame."""
    if len(subset) == 0 or len(complement) == 0:
        raise EmptyGroup("both groups must be non-empty")
    labels = labels_by_post(annotations)

    def share(corpus: Corpus) -> Tuple[int, int]:
        hits = sum(
            1 for post in corpus
            if post.id in labels and frame in labels[post.id].frames
        )
        return hits, len(corpus)

    k1, n1 = share(subset)
    k2, n2 = share(complement)
    p1, p2 = k1 / n1, k2 / n2
    pooled = (k1 + k2) / (n1 + n2)
    if pooled in (0.0, 1.0):
        if p1 == p2:
            return TwoProportionResult(p1, p2, 0.0, 1.0)
        raise DegeneratePool("pooled proportion is degenerate with unequal shares")
    z = (p1 - p2) / math.sqrt(pooled * (1 - pooled) * (1.0 / n1 + 1.0 / n2))
    p_two = 2.0 * (1.0 - normal_cdf(abs(z)))
    return TwoProportionResult(p1, p2, z, p_two)


# ---------------------------------------------------------------------------
# Imported scores

def attach_scores(corpus: Corpus, scores_path: str | Path) -> Corpus:
    """Read a TSV (post_id, score_name, value in [0,1]) into post meta."""
    updates: Dict[str, Dict[str, str]] = {}
    with open(scores_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            post_id, score_name, value_text = line.split("\t")
            if post_id not in corpus:
                raise UnresolvedPost(post_id)
            value = float(value_text)
            if not 0.0 <= value <= 1.0:
                raise ScoreOutOfRange(f"{score_name}={value} for post {post_id!r}")
            updates.setdefault(post_id, {})[score_name] = value_text
    out = Corpus()
    for post in corpus:
        for name, value_text in updates.get(post.id, {}).items():
            post = post.with_meta(name, value_text)
        out.add_post(post)
    for ann in corpus.annotations:
        out.add_annotation(ann)
    return out


def scores_by_frame(
    corpus: Corpus,
    annotations: Iterable[Annotation],
    frame: Frame,
    score_name: str,
) -> Tuple[List[float], List[float]]:
    """Score samples for posts labeled with / without the frame (scored,
    non-filtered posts only)."""
    labels = labels_by_post(annotations)
    with_frame: List[float] = []
    without: List[float] = []
    for post in corpus:
        if score_name not in post.meta or post.id not in labels:
            continue
        label = labels[post.id]
        if label.filtered:
            continue
        value = float(post.meta[score_name])
        (with_frame if frame in label.frames else without).append(value)
    return with_frame, without


# ---------------------------------------------------------------------------
# CSV exports

def export_log_odds_csv(results: Sequence[LogOddsResult], path: str | Path,
                        alpha_total: Optional[float] = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["term", "y_i", "y_j", "alpha_w", "delta", "variance",
                         "z", "significant"])
        for r in results:
            writer.writerow([r.term, r.y_i, r.y_j, f"{r.alpha_w:.10g}",
                             f"{r.delta:.10g}", f"{r.variance:.10g}",
                             f"{r.z:.10g}", str(r.significant).lower()])


def export_matrix_csv(matrix: ProportionMatrix, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + matrix.col_labels)
        # full precision so normalization invariants survive a round trip
        for label, row in zip(matrix.row_labels, matrix.values):
            writer.writerow([label] + [repr(v) for v in row])


def export_time_series_csv(
    series: Mapping[str, Mapping[Frame, int]], path: str | Path
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bucket", "frame", "count"])
        for bucket in sorted(series):
            per_frame = series[bucket]
            for frame in ALL_FRAMES:
                if frame in per_frame:
                    writer.writerow([bucket, canonical_name_of(frame),
                                     per_frame[frame]])

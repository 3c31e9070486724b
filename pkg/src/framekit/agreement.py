"""Inter-annotator agreement (per-frame binary Fleiss' kappa) and
reference-based multi-label precision/recall/F1 reporting."""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

from .errors import DegenerateKappa, IncompleteMatrix, ItemSetMismatch, TooFewRaters
from .frames import ALL_FRAMES, Frame, LabelSet, canonical_name_of

# The relevance filter is scored as one additional binary label.
FILTERED_LABEL = "Filtered"
Label = Union[Frame, str]
ALL_LABELS: Tuple[Label, ...] = tuple(ALL_FRAMES) + (FILTERED_LABEL,)


def label_name(label: Label) -> str:
    return canonical_name_of(label) if isinstance(label, Frame) else label


def _has_label(labels: LabelSet, label: Label) -> bool:
    if label == FILTERED_LABEL:
        return labels.filtered
    return label in labels.frames


@dataclass
class RatingMatrix:
    """Complete design: every rater labeled every item."""

    item_ids: List[str]
    raters: List[str]
    cells: Mapping[Tuple[str, str], LabelSet]  # (item_id, rater) -> labels

    def __post_init__(self):
        for item in self.item_ids:
            for rater in self.raters:
                if (item, rater) not in self.cells:
                    raise IncompleteMatrix(f"missing cell ({item!r}, {rater!r})")

    def column(self, rater: str) -> Dict[str, LabelSet]:
        return {item: self.cells[(item, rater)] for item in self.item_ids}


def fleiss_kappa_binary(matrix: RatingMatrix, frame: Frame) -> float:
    """Fleiss' kappa treating presence of `frame` as a binary category."""
    return _fleiss_kappa_label(matrix, frame)


def _fleiss_kappa_label(matrix: RatingMatrix, label: Label) -> float:
    n_raters = len(matrix.raters)
    if n_raters < 2:
        raise TooFewRaters("fleiss kappa needs at least two raters")
    if not matrix.item_ids:
        raise IncompleteMatrix("empty rating matrix")

    per_item_agreement = []
    positives = 0
    for item in matrix.item_ids:
        n_pos = sum(
            _has_label(matrix.cells[(item, rater)], label) for rater in matrix.raters
        )
        positives += n_pos
        n_neg = n_raters - n_pos
        per_item_agreement.append(
            (n_pos * n_pos + n_neg * n_neg - n_raters) / (n_raters * (n_raters - 1))
        )
    p_bar = sum(per_item_agreement) / len(matrix.item_ids)
    total = len(matrix.item_ids) * n_raters
    p_pos = positives / total
    p_e = p_pos * p_pos + (1 - p_pos) * (1 - p_pos)
    if p_e >= 1.0:
        if p_bar >= 1.0:
            return 1.0
        raise DegenerateKappa("chance agreement is 1 but observed agreement is not")
    return (p_bar - p_e) / (1 - p_e)


@dataclass(frozen=True)
class PRF:
    p: float
    r: float
    f1: float


@dataclass
class PRFReport:
    per_label: Dict[Label, PRF]
    support: Dict[Label, int]  # reference-positive item count per label
    micro: PRF                 # pooled over nine frames + Filtered
    macro: PRF                 # unweighted mean over nine frames + Filtered
    micro_frames: PRF          # pooled over the nine frames only
    macro_frames: PRF          # unweighted mean over the nine frames only


def _prf_from_counts(tp: int, fp: int, fn: int) -> PRF:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f1)


def prf_against_reference(
    system: Mapping[str, LabelSet], reference: Mapping[str, LabelSet]
) -> PRFReport:
    """Per-label P/R/F1 of `system` against `reference` over the same items,
    with Filtered scored as a tenth binary label."""
    if set(system) != set(reference):
        raise ItemSetMismatch("system and reference must cover the same items")
    counts: Dict[Label, List[int]] = {label: [0, 0, 0] for label in ALL_LABELS}
    support: Dict[Label, int] = {label: 0 for label in ALL_LABELS}
    for item, sys_labels in system.items():
        ref_labels = reference[item]
        for label in ALL_LABELS:
            in_sys = _has_label(sys_labels, label)
            in_ref = _has_label(ref_labels, label)
            if in_ref:
                support[label] += 1
            if in_sys and in_ref:
                counts[label][0] += 1
            elif in_sys:
                counts[label][1] += 1
            elif in_ref:
                counts[label][2] += 1

    per_label = {label: _prf_from_counts(*counts[label]) for label in ALL_LABELS}

    def pooled(labels: Tuple[Label, ...]) -> PRF:
        tp = sum(counts[l][0] for l in labels)
        fp = sum(counts[l][1] for l in labels)
        fn = sum(counts[l][2] for l in labels)
        return _prf_from_counts(tp, fp, fn)

    def averaged(labels: Tuple[Label, ...]) -> PRF:
        return PRF(
            sum(per_label[l].p for l in labels) / len(labels),
            sum(per_label[l].r for l in labels) / len(labels),
            sum(per_label[l].f1 for l in labels) / len(labels),
        )

    return PRFReport(
        per_label=per_label,
        support=support,
        micro=pooled(ALL_LABELS),
        macro=averaged(ALL_LABELS),
        micro_frames=pooled(ALL_FRAMES),
        macro_frames=averaged(ALL_FRAMES),
    )


@dataclass(frozen=True)
class AggStats:
    p_mean: float
    p_sd: float
    r_mean: float
    r_sd: float
    f1_mean: float
    f1_sd: float


@dataclass
class AgreementReport:
    per_frame: Dict[Label, AggStats]
    micro: AggStats
    macro: AggStats
    micro_frames: AggStats
    macro_frames: AggStats
    fleiss_kappa_per_frame: Dict[Frame, float] = field(default_factory=dict)
    fleiss_kappa_macro: float = 0.0


def _mean_sd(values: List[float]) -> Tuple[float, float]:
    mean = sum(values) / len(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, sd


def _aggregate(prfs: List[PRF]) -> AggStats:
    p_mean, p_sd = _mean_sd([s.p for s in prfs])
    r_mean, r_sd = _mean_sd([s.r for s in prfs])
    f_mean, f_sd = _mean_sd([s.f1 for s in prfs])
    return AggStats(p_mean, p_sd, r_mean, r_sd, f_mean, f_sd)


def cross_annotator_report(
    matrix: RatingMatrix, subject: Optional[str] = None
) -> AgreementReport:
    """Each-annotator-as-reference scoring.

    With a `subject` rater, it is scored against every other rater as
    reference; without, every rater's labels are averaged against each
    reference in turn. Mean and sample sd are taken across references.
    """
    if len(matrix.raters) < 2:
        raise TooFewRaters("need at least two raters")
    if subject is not None and subject not in matrix.raters:
        raise KeyError(f"subject {subject!r} not in matrix")

    # One PRFReport-shaped sample per reference rater.
    samples: List[PRFReport] = []
    if subject is not None:
        sys_col = matrix.column(subject)
        for ref in matrix.raters:
            if ref == subject:
                continue
            samples.append(prf_against_reference(sys_col, matrix.column(ref)))
    else:
        for ref in matrix.raters:
            ref_col = matrix.column(ref)
            others = [
                prf_against_reference(matrix.column(r), ref_col)
                for r in matrix.raters if r != ref
            ]
            samples.append(_mean_report(others))

    per_frame = {
        label: _aggregate([s.per_label[label] for s in samples]) for label in ALL_LABELS
    }
    kappas = {frame: _fleiss_kappa_label(matrix, frame) for frame in ALL_FRAMES}
    return AgreementReport(
        per_frame=per_frame,
        micro=_aggregate([s.micro for s in samples]),
        macro=_aggregate([s.macro for s in samples]),
        micro_frames=_aggregate([s.micro_frames for s in samples]),
        macro_frames=_aggregate([s.macro_frames for s in samples]),
        fleiss_kappa_per_frame=kappas,
        fleiss_kappa_macro=sum(kappas.values()) / len(kappas),
    )


def _mean_report(reports: List[PRFReport]) -> PRFReport:
    """Unweighted mean of PRF reports (metric-wise), used for the
    experts-vs-each-other column."""

    def mean_prf(prfs: List[PRF]) -> PRF:
        return PRF(
            sum(s.p for s in prfs) / len(prfs),
            sum(s.r for s in prfs) / len(prfs),
            sum(s.f1 for s in prfs) / len(prfs),
        )

    return PRFReport(
        per_label={
            label: mean_prf([r.per_label[label] for r in reports]) for label in ALL_LABELS
        },
        support={
            label: reports[0].support[label] for label in ALL_LABELS
        },
        micro=mean_prf([r.micro for r in reports]),
        macro=mean_prf([r.macro for r in reports]),
        micro_frames=mean_prf([r.micro_frames for r in reports]),
        macro_frames=mean_prf([r.macro_frames for r in reports]),
    )


def export_report_csv(report: AgreementReport, path: str | Path) -> None:
    """CSV layout: one row per frame plus Filtered, micro and macro rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["label", "p_mean", "p_sd", "r_mean", "r_sd", "f1_mean", "f1_sd", "kappa"]
        )
        for label in ALL_LABELS:
            stats = report.per_frame[label]
            kappa = (
                f"{report.fleiss_kappa_per_frame[label]:.6f}"
                if isinstance(label, Frame) and label in report.fleiss_kappa_per_frame
                else ""
            )
            writer.writerow(
                [label_name(label),
                 f"{stats.p_mean:.6f}", f"{stats.p_sd:.6f}",
                 f"{stats.r_mean:.6f}", f"{stats.r_sd:.6f}",
                 f"{stats.f1_mean:.6f}", f"{stats.f1_sd:.6f}", kappa]
            )
        for name, stats in (("micro", report.micro), ("macro", report.macro)):
            writer.writerow(
                [name,
                 f"{stats.p_mean:.6f}", f"{stats.p_sd:.6f}",
                 f"{stats.r_mean:.6f}", f"{stats.r_sd:.6f}",
                 f"{stats.f1_mean:.6f}", f"{stats.f1_sd:.6f}",
                 f"{report.fleiss_kappa_macro:.6f}" if name == "macro" else ""]
            )

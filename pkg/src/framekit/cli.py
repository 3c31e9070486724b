"""Command line entry point wiring the pipeline stages together.

Every command writes a run manifest (config digest, input digests, library
versions) beside its outputs. Exit codes: 0 success, 1 operational error,
2 usage error. Secrets (the LLM bearer token) come only from environment
variables.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

import click

from . import __version__
from .agreement import RatingMatrix, cross_annotator_report, export_report_csv
from .analytics import (Granularity, Normalization, TTestVariant,
                        attach_scores, cooccurrence, export_log_odds_csv,
                        export_matrix_csv, export_time_series_csv,
                        frame_cooccurrence, frame_proportions, ngram_counts,
                        scores_by_frame, state_segment, subset_frame_significance,
                        t_test, time_series, weighted_log_odds)
from .corpus import (AnnotatorKind, Corpus, read_annotations_jsonl,
                     write_annotations_jsonl)
from .errors import FramekitError
from .frames import Frame, parse_frame
from .llm import (HTTPChatClient, LLMClientConfig, annotate_two_stage,
                  default_filter_template, default_frames_template)
from .manifest import write_manifest
from .preprocess import (SplitSpec, clean_corpus, dedup, ingest_jsonl,
                         keyword_filter, write_split)
from .validation import ValidationStore, create_app


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _operational(fn):
    """Map domain and I/O failures to exit code 1 with a stderr message."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (FramekitError, OSError, ValueError, KeyError) as exc:
            raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc

    return wrapper


def _pick(flag, config: dict, key: str, default):
    """Flag value if given, else config file value, else the default."""
    if flag is not None:
        return flag
    return config.get(key, default)


def _load_corpus(path: str, annotations: Optional[str] = None) -> Corpus:
    corpus = ingest_jsonl(path)
    if annotations:
        for ann in read_annotations_jsonl(annotations):
            if ann.post_id in corpus:
                corpus.add_annotation(ann)
    return corpus


@click.group()
@click.version_option(__version__)
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON config file; flags override its values.")
@click.pass_context
def main(ctx, config_path):
    """Framing-analysis pipeline: preprocess, annotate, validate, train,
    predict and analyze."""
    ctx.obj = _load_config(config_path)


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--outdir", required=True, type=click.Path())
@click.option("--keyword", default=None, help="Retain posts containing this keyword.")
@click.option("--annotations", "annotations_path", default=None,
              type=click.Path(exists=True),
              help="Annotations JSONL used for the test-source restriction.")
@click.option("--train-frac", type=float, default=None)
@click.option("--val-frac", type=float, default=None)
@click.option("--test-frac", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--restrict-kind", default=None,
              type=click.Choice([k.value for k in AnnotatorKind]))
@click.option("--restrict-count", type=int, default=None)
@click.option("--pinned-ids", "pinned_path", default=None,
              type=click.Path(exists=True),
              help="File with one post id per line, forced into the test set.")
@click.pass_obj
@_operational
def preprocess(config, input_path, outdir, keyword, annotations_path,
               train_frac, val_frac, test_frac, seed, restrict_kind,
               restrict_count, pinned_path):
    """Ingest, clean, dedup, keyword-filter and split a posts JSONL file."""
    section = config.get("preprocess", {})
    keyword = _pick(keyword, section, "keyword", None)
    spec = SplitSpec(
        train_fraction=_pick(train_frac, section, "train_fraction", 0.8),
        val_fraction=_pick(val_frac, section, "val_fraction", 0.1),
        test_fraction=_pick(test_frac, section, "test_fraction", 0.1),
        seed=_pick(seed, section, "seed", 0),
        test_source_restriction=(
            AnnotatorKind(_pick(restrict_kind, section, "restrict_kind", None))
            if _pick(restrict_kind, section, "restrict_kind", None) else None
        ),
        restricted_test_count=_pick(restrict_count, section, "restrict_count", 0),
        pinned_test_ids=frozenset(
            Path(pinned_path).read_text(encoding="utf-8").split()
        ) if pinned_path else frozenset(),
    )

    corpus = _load_corpus(input_path, annotations_path)
    corpus = clean_corpus(corpus)
    corpus, removed = dedup(corpus)
    if keyword:
        corpus = keyword_filter(corpus, keyword)
    outdir_p = Path(outdir)
    outdir_p.mkdir(parents=True, exist_ok=True)
    manifest = write_split(corpus, spec, outdir_p)
    write_manifest(outdir_p / "run_manifest.json", "preprocess",
                   {"keyword": keyword, "spec": manifest["spec"],
                    "seed": spec.seed},
                   [input_path] + ([annotations_path] if annotations_path else []))
    sizes = {name: len(ids) for name, ids in manifest["members"].items()}
    click.echo(f"removed {removed} duplicates; split sizes: {sizes}")


@main.command("annotate-llm")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--endpoint", default=None)
@click.option("--model", default=None)
@click.option("--max-concurrent", type=int, default=None)
@click.option("--checkpoint", "checkpoint_path", default=None, type=click.Path())
@click.option("--log", "log_path", default=None, type=click.Path())
@click.pass_obj
@_operational
def annotate_llm(config, input_path, out_path, endpoint, model,
                 max_concurrent, checkpoint_path, log_path):
    """Two-stage LLM annotation (relevance filter, then frames)."""
    section = config.get("llm", {})
    client_config = LLMClientConfig(
        endpoint=_pick(endpoint, section, "endpoint",
                       LLMClientConfig.endpoint),
        model=_pick(model, section, "model", LLMClientConfig.model),
        max_concurrent=_pick(max_concurrent, section, "max_concurrent", 4),
    )
    corpus = _load_corpus(input_path)
    client = HTTPChatClient(client_config)
    try:
        annotations, failures = annotate_two_stage(
            corpus, client, client_config,
            default_filter_template(), default_frames_template(),
            checkpoint_path=checkpoint_path, log_path=log_path,
        )
    finally:
        client.close()
    write_annotations_jsonl(annotations, out_path)
    write_manifest(Path(out_path).with_suffix(".manifest.json"), "annotate-llm",
                   {"endpoint": client_config.endpoint,
                    "model": client_config.model},
                   [input_path])
    for post_id, error in failures:
        click.echo(f"failed {post_id}: {error}", err=True)
    click.echo(f"annotated {len(annotations)} posts, {len(failures)} failures")
    if failures:
        sys.exit(1)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--event-log", "event_log", default=None, type=click.Path())
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--lease-ttl", type=float, default=None)
@click.pass_obj
@_operational
def serve(config, corpus_path, event_log, host, port, lease_ttl):
    """Run the validation queue HTTP service."""
    import uvicorn

    section = config.get("service", {})
    store = ValidationStore(
        log_path=_pick(event_log, section, "event_log", None),
        lease_ttl=_pick(lease_ttl, section, "lease_ttl", 900.0),
    )
    app = create_app(store, _load_corpus(corpus_path))
    uvicorn.run(app,
                host=_pick(host, section, "host", "127.0.0.1"),
                port=_pick(port, section, "port", 8321))


@main.command()
@click.option("--train", "train_path", required=True, type=click.Path(exists=True))
@click.option("--val", "val_path", required=True, type=click.Path(exists=True))
@click.option("--annotations", "annotations_path", required=True,
              type=click.Path(exists=True))
@click.option("--model-out", required=True, type=click.Path())
@click.option("--max-epochs", type=int, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--l2-lambda", type=float, default=None)
@click.option("--min-df", type=int, default=None)
@click.option("--max-features", type=int, default=None)
@click.pass_obj
@_operational
def train(config, train_path, val_path, annotations_path, model_out,
          max_epochs, learning_rate, l2_lambda, min_df, max_features):
    """Train the tf-idf logistic classifier on gold annotations."""
    from .classifier import FeatureConfig, TrainConfig, save_model
    from .classifier import train as train_model

    section = config.get("classifier", {})
    train_config = TrainConfig(
        l2_lambda=_pick(l2_lambda, section, "l2_lambda", 1e-4),
        learning_rate=_pick(learning_rate, section, "learning_rate", 1.0),
        max_epochs=_pick(max_epochs, section, "max_epochs", 200),
        features=FeatureConfig(
            min_df=_pick(min_df, section, "min_df", 1),
            max_features=_pick(max_features, section, "max_features", None),
        ),
    )
    train_corpus = _load_corpus(train_path, annotations_path)
    val_corpus = _load_corpus(val_path, annotations_path)
    model, report = train_model(train_corpus, val_corpus, train_config)
    save_model(model, model_out)
    write_manifest(Path(model_out).with_suffix(".manifest.json"), "train",
                   {"l2_lambda": train_config.l2_lambda,
                    "learning_rate": train_config.learning_rate,
                    "max_epochs": train_config.max_epochs,
                    "min_df": train_config.features.min_df,
                    "max_features": train_config.features.max_features},
                   [train_path, val_path, annotations_path])
    macro = report.val_report.macro if report.val_report else None
    click.echo(f"stopped at epoch {report.stopped_epoch}; "
               f"val macro F1 {macro.f1:.4f}" if macro else "trained")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@_operational
def predict(model_path, input_path, out_path):
    """Write a predictions TSV (post_id, labels) for a corpus."""
    from .classifier import load_model
    from .classifier.predio import bulk_predict

    model = load_model(model_path)
    corpus = _load_corpus(input_path)
    bulk_predict(model, corpus, out_path)
    write_manifest(Path(out_path).with_suffix(".manifest.json"), "predict",
                   {"model": str(model_path)}, [model_path, input_path])
    click.echo(f"wrote {len(corpus)} predictions")


@main.command("import-predictions")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--annotator-id", default="model")
@_operational
def import_predictions_cmd(input_path, corpus_path, out_path, annotator_id):
    """Convert a predictions TSV into annotations JSONL."""
    from .classifier.predio import import_predictions

    corpus = _load_corpus(corpus_path)
    annotations = import_predictions(input_path, corpus, annotator_id)
    write_annotations_jsonl(annotations, out_path)
    write_manifest(Path(out_path).with_suffix(".manifest.json"),
                   "import-predictions", {"annotator_id": annotator_id},
                   [input_path, corpus_path])
    click.echo(f"imported {len(annotations)} predictions")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--annotations", "annotation_paths", required=True, multiple=True,
              type=click.Path(exists=True))
@click.option("--subject", default=None,
              help="Score this annotator against the others as references.")
@click.option("--out", "out_path", required=True, type=click.Path())
@_operational
def agreement(corpus_path, annotation_paths, subject, out_path):
    """Cross-annotator P/R/F1 and Fleiss' kappa over shared items."""
    corpus = _load_corpus(corpus_path)
    cells: Dict[tuple, object] = {}
    by_rater: Dict[str, set] = {}
    for path in annotation_paths:
        for ann in read_annotations_jsonl(path):
            if ann.post_id not in corpus:
                continue
            cells[(ann.post_id, ann.annotator.id)] = ann.labels
            by_rater.setdefault(ann.annotator.id, set()).add(ann.post_id)
    raters = sorted(by_rater)
    shared = set.intersection(*by_rater.values()) if by_rater else set()
    items = [p.id for p in corpus if p.id in shared]
    matrix = RatingMatrix(
        item_ids=items, raters=raters,
        cells={k: v for k, v in cells.items() if k[0] in shared},
    )
    report = cross_annotator_report(matrix, subject=subject)
    export_report_csv(report, out_path)
    write_manifest(Path(out_path).with_suffix(".manifest.json"), "agreement",
                   {"subject": subject, "raters": raters,
                    "items": len(items)},
                   [corpus_path, *annotation_paths])
    click.echo(f"{len(items)} shared items, {len(raters)} raters; "
               f"macro kappa {report.fleiss_kappa_macro:.4f}")


# ---------------------------------------------------------------------------
# analyze subcommands

@main.group()
def analyze():
    """Corpus statistics exports."""


def _norm_option(fn):
    return click.option(
        "--normalize", type=click.Choice(["row", "column", "none"]),
        default="none")(fn)


def _frame_option(fn):
    return click.option("--frame", "frame_tag", required=True,
                        help="Frame prompt tag or short name.")(fn)


@analyze.command("log-odds")
@click.option("--corpus-a", required=True, type=click.Path(exists=True))
@click.option("--corpus-b", required=True, type=click.Path(exists=True))
@click.option("--ngram", "n", type=click.Choice(["1", "2"]), default="1")
@click.option("--alpha-total", type=float, default=None)
@click.option("--stopwords", "stopwords_path", default=None,
              type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_obj
@_operational
def analyze_log_odds(config, corpus_a, corpus_b, n, alpha_total,
                     stopwords_path, out_path):
    """Weighted log-odds comparison of two corpora."""
    section = config.get("analytics", {})
    alpha = _pick(alpha_total, section, "alpha_total", 500.0)
    stopwords: List[str] = []
    if stopwords_path:
        stopwords = Path(stopwords_path).read_text(encoding="utf-8").split()
    counts_a = ngram_counts(_load_corpus(corpus_a), int(n), stopwords)
    counts_b = ngram_counts(_load_corpus(corpus_b), int(n), stopwords)
    results = weighted_log_odds(counts_a, counts_b, alpha_total=alpha)
    export_log_odds_csv(results, out_path)
    write_manifest(Path(out_path).with_suffix(".manifest.json"),
                   "analyze log-odds",
                   {"n": int(n), "alpha_total": alpha,
                    "stopwords": stopwords_path},
                   [corpus_a, corpus_b])
    click.echo(f"wrote {len(results)} terms")


@analyze.command("states")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@_operational
def analyze_states(corpus_path, out_path):
    """Bucket posts by mentioned US state (long CSV: state, post_id)."""
    import csv as _csv

    buckets = state_segment(_load_corpus(corpus_path))
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["state", "post_id"])
        for state in sorted(buckets):
            for post in buckets[state]:
                writer.writerow([state, post.id])
    write_manifest(Path(out_path).with_suffix(".manifest.json"),
                   "analyze states", {}, [corpus_path])
    total = sum(len(b) for b in buckets.values())
    click.echo(f"{total} state mentions across {len(buckets)} states")


@analyze.command("proportions")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--annotations", "annotations_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@_norm_option
@_operational
def analyze_proportions(corpus_path, annotations_path, out_path, normalize):
    """Frame share per state bucket (matrix CSV)."""
    corpus = _load_corpus(corpus_path)
    annotations = read_annotations_jsonl(annotations_path)
    matrix = frame_proportions(state_segment(corpus), annotations,
                               Normalization(normalize))
    export_matrix_csv(matrix, out_path)
    write_manifest(Path(out_path).with_suffix(".manifest.json"),
                   "analyze proportions", {"normalize": normalize},
                   [corpus_path, annotations_path])
    click.echo(f"{len(matrix.row_labels)}x{len(matrix.col_labels)} matrix")


@analyze.command("cooccur")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--annotations", "annotations_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@_norm_option
@_operational
def analyze_cooccur(corpus_path, annotations_path, out_path, normalize):
    """Frame-by-frame co-occurrence matrix CSV."""
    corpus = _load_corpus(corpus_path)
    annotations = read_annotations_jsonl(annotations_path)
    matrix = frame_cooccurrence(corpus, annotations, Normalization(normalize))
    export_matrix_csv(matrix, out_path)
    write_manifest(Path(out_path).with_suffix(".manifest.json"),
                   "analyze cooccur", {"normalize": normalize},
                   [corpus_path, annotations_path])
    click.echo("wrote co-occurrence matrix")


@analyze.command("timeseries")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--annotations", "annotations_path", required=True,
              type=click.Path(exists=True))
@click.option("--granularity", type=click.Choice(["month", "day"]),
              default="month")
@click.option("--out", "out_path", required=True, type=click.Path())
@_operational
def analyze_timeseries(corpus_path, annotations_path, granularity, out_path):
    """Frame counts over time (long CSV: bucket, frame, count)."""
    corpus = _load_corpus(corpus_path)
    annotations = read_annotations_jsonl(annotations_path)
    series = time_series(corpus, annotations, Granularity(granularity))
    export_time_series_csv(series, out_path)
    write_manifest(Path(out_path).with_suffix(".manifest.json"),
                   "analyze timeseries", {"granularity": granularity},
                   [corpus_path, annotations_path])
    click.echo(f"wrote {len(series)} time buckets")


@analyze.command("regress")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="CSV with header x,y.")
@click.option("--out", "out_path", required=True, type=click.Path())
@_operational
def analyze_regress(input_path, out_path):
    """Simple OLS fit of a two-column CSV."""
    import csv as _csv

    from .analytics import ols_fit

    xs: List[float] = []
    ys: List[float] = []
    with open(input_path, newline="", encoding="utf-8") as fh:
        for row in _csv.DictReader(fh):
            xs.append(float(row["x"]))
            ys.append(float(row["y"]))
    fit = ols_fit(xs, ys)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["slope", "intercept", "r_squared", "slope_stderr",
                         "residual_stderr", "n"])
        writer.writerow([f"{fit.slope:.10g}", f"{fit.intercept:.10g}",
                         f"{fit.r_squared:.10g}", f"{fit.slope_stderr:.10g}",
                         f"{fit.residual_stderr:.10g}", fit.n])
    write_manifest(Path(out_path).with_suffix(".manifest.json"),
                   "analyze regress", {}, [input_path])
    click.echo(f"slope {fit.slope:.6g}, R^2 {fit.r_squared:.6g}")


@analyze.command("ttest")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--annotations", "annotations_path", required=True,
              type=click.Path(exists=True))
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
@click.option("--score-name", required=True)
@click.option("--variant", type=click.Choice(["student", "welch"]),
              default="welch")
@click.option("--out", "out_path", required=True, type=click.Path())
@_frame_option
@_operational
def analyze_ttest(corpus_path, annotations_path, scores_path, score_name,
                  variant, out_path, frame_tag):
    """Compare an imported score between posts with and without a frame."""
    import csv as _csv

    frame = parse_frame(frame_tag)
    corpus = attach_scores(_load_corpus(corpus_path), scores_path)
    annotations = read_annotations_jsonl(annotations_path)
    with_frame, without = scores_by_frame(corpus, annotations, frame, score_name)
    result = t_test(with_frame, without, TTestVariant(variant))
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["frame", "score", "variant", "n_with", "n_without",
                         "t", "df", "p_two_sided"])
        writer.writerow([frame.value, score_name, variant,
                         len(with_frame), len(without),
                         f"{result.t:.10g}", f"{result.df:.10g}",
                         f"{result.p_two_sided:.10g}"])
    write_manifest(Path(out_path).with_suffix(".manifest.json"),
                   "analyze ttest",
                   {"frame": frame.value, "score": score_name,
                    "variant": variant},
                   [corpus_path, annotations_path, scores_path])
    click.echo(f"t {result.t:.4g}, p {result.p_two_sided:.4g}")


@analyze.command("subset-sig")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--annotations", "annotations_path", required=True,
              type=click.Path(exists=True))
@click.option("--keyword", required=True,
              help="Subset = posts containing the keyword; complement = rest.")
@click.option("--out", "out_path", required=True, type=click.Path())
@_frame_option
@_operational
def analyze_subset_sig(corpus_path, annotations_path, keyword, out_path,
                       frame_tag):
    """Two-proportion z-test: frame share inside vs outside a keyword subset."""
    import csv as _csv

    frame = parse_frame(frame_tag)
    corpus = _load_corpus(corpus_path)
    annotations = read_annotations_jsonl(annotations_path)
    subset = keyword_filter(corpus, keyword)
    in_subset = set(subset.index)
    complement = corpus.subset(p.id for p in corpus if p.id not in in_subset)
    result = subset_frame_significance(subset, complement, annotations, frame)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["frame", "keyword", "p_subset", "p_complement",
                         "z", "p_two_sided"])
        writer.writerow([frame.value, keyword,
                         f"{result.p1:.10g}", f"{result.p2:.10g}",
                         f"{result.z:.10g}", f"{result.p_two_sided:.10g}"])
    write_manifest(Path(out_path).with_suffix(".manifest.json"),
                   "analyze subset-sig",
                   {"frame": frame.value, "keyword": keyword},
                   [corpus_path, annotations_path])
    click.echo(f"z {result.z:.4g}, p {result.p_two_sided:.4g}")


if __name__ == "__main__":
    main()

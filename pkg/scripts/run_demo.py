"""End-to-end demo on a synthetic corpus with a scripted in-process LLM.

Runs preprocess, two-stage annotation, validation (an automatic expert that
trusts the gold labels), classifier training and a couple of analytics
exports into a scratch directory, printing one summary line per stage.
"""

import argparse
import random
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
from make_synthetic_corpus import build  # noqa: E402

from framekit.classifier import TrainConfig, evaluate, save_model, train
from framekit.classifier.predio import bulk_predict
from framekit.analytics import ngram_counts, weighted_log_odds
from framekit.corpus import AnnotatorKind
from framekit.frames import ALL_FRAMES, parse_frame, prompt_tag_of
from framekit.llm import (LLMClientConfig, annotate_two_stage,
                          default_filter_template, default_frames_template)
from framekit.preprocess import SplitSpec, clean_corpus, dedup, split
from framekit.validation import ValidationDecision, ValidationStore


class ScriptedClient:
    """Deterministic stand-in for a chat endpoint, keyed on marker words."""

    def complete(self, messages):
        system, user = messages[0]["content"], messages[1]["content"]
        if "2 different labels" in system:
            if "offtopic" in user:
                return "<other> because unrelated chatter"
            return "<attitude_towards_homelessness> because on topic"
        frames = [f for f in ALL_FRAMES if f"kw{f.value.lower()}" in user]
        frames = frames or [parse_frame("public_critique")]
        return "\n".join(f"<{prompt_tag_of(f)}> because marker present"
                         for f in frames)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--outdir", default=None)
    args = parser.parse_args()

    outdir = Path(args.outdir or tempfile.mkdtemp(prefix="framekit-demo-"))
    outdir.mkdir(parents=True, exist_ok=True)

    corpus = build(args.n, args.seed, offtopic_share=0.2)
    corpus = clean_corpus(corpus)
    corpus, removed = dedup(corpus)
    train_c, val_c, test_c = split(
        corpus, SplitSpec(0.8, 0.1, 0.1, seed=args.seed))
    print(f"preprocess: {len(corpus)} posts ({removed} duplicates removed), "
          f"split {len(train_c)}/{len(val_c)}/{len(test_c)}")

    config = LLMClientConfig(max_concurrent=1, backoff_seconds=(0.0,))
    proposals, failures = annotate_two_stage(
        val_c, ScriptedClient(), config,
        default_filter_template(), default_frames_template())
    print(f"annotate: {len(proposals)} proposals, {len(failures)} failures")

    gold = {a.post_id: a.labels for a in corpus.annotations}
    store = ValidationStore()
    store.enqueue(proposals, corpus)
    rng = random.Random(args.seed)
    while (item := store.lease_next("expert")) is not None:
        proposed = item.proposed.labels
        if gold[item.item_id].filtered:
            decision = ValidationDecision(item.item_id, "expert", frozenset(),
                                          frozenset(), True,
                                          rng.uniform(10, 40))
        else:
            keep = frozenset(proposed.frames & gold[item.item_id].frames)
            add = frozenset(gold[item.item_id].frames - proposed.frames)
            decision = ValidationDecision(item.item_id, "expert", keep, add,
                                          False, rng.uniform(10, 40))
        store.submit_decision(decision)
    stats = store.stats(baseline_mean_seconds=187.49)
    print(f"validate: {stats.items_done} done, mean {stats.elapsed_mean:.1f}s, "
          f"speedup vs baseline {stats.speedup_vs_baseline:.2f}x")

    model, report = train(train_c, val_c,
                          TrainConfig(learning_rate=40.0, max_epochs=200))
    test_report = evaluate(model, test_c)
    save_model(model, outdir / "model.json")
    bulk_predict(model, test_c, outdir / "predictions.tsv")
    print(f"classifier: stopped at epoch {report.stopped_epoch}, "
          f"test macro F1 {test_report.macro.f1:.3f}")

    half = corpus.ids()[: len(corpus) // 2]
    rest = corpus.ids()[len(corpus) // 2:]
    lo = weighted_log_odds(
        ngram_counts(corpus.subset(half), 1),
        ngram_counts(corpus.subset(rest), 1))
    top = ", ".join(r.term for r in lo[:3])
    print(f"analytics: {len(lo)} scored terms, top {top}")
    print(f"artifacts in {outdir}")


if __name__ == "__main__":
    main()

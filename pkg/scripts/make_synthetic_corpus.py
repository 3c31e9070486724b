"""Generate a synthetic posts JSONL file for exercising the pipeline.

Each on-topic post carries one to three frame marker keywords; a configurable
share of posts is off-topic chatter. A matching gold annotations file can be
emitted alongside for training and analysis runs.
"""

import argparse
import json
import random

from framekit.corpus import (Annotation, Annotator, AnnotatorKind, Corpus,
                             Post, write_annotations_jsonl,
                             write_corpus_jsonl)
from framekit.frames import ALL_FRAMES, FILTERED_LABELS, make_labelset

STATES = ["california", "texas", "new york", "florida", "oregon"]


def build(n: int, seed: int, offtopic_share: float) -> Corpus:
    rng = random.Random(seed)
    keywords = {f"kw{frame.value.lower()}": frame for frame in ALL_FRAMES}
    names = list(keywords)
    corpus = Corpus()
    gold = Annotator("gold", AnnotatorKind.EXPERT)
    for i in range(n):
        created = 1_600_000_000 + rng.randrange(0, 500) * 86_400
        if rng.random() < offtopic_share:
            text = f"offtopic chatter number {i}"
            labels = FILTERED_LABELS
        else:
            chosen = rng.sample(names, rng.randint(1, 3))
            text = "homeless topic " + " ".join(chosen) + f" item {i}"
            if rng.random() < 0.3:
                text += " in " + rng.choice(STATES)
            labels = make_labelset({keywords[kw] for kw in chosen}, False)
        post = Post(f"p{i}", text, created)
        corpus.add_post(post)
        corpus.add_annotation(Annotation(post.id, gold, labels))
    return corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--offtopic-share", type=float, default=0.2)
    parser.add_argument("--out", required=True, help="posts JSONL path")
    parser.add_argument("--gold-out", default=None,
                        help="optional gold annotations JSONL path")
    args = parser.parse_args()

    corpus = build(args.n, args.seed, args.offtopic_share)
    write_corpus_jsonl(corpus, args.out)
    if args.gold_out:
        write_annotations_jsonl(corpus.annotations, args.gold_out)
    print(f"wrote {len(corpus)} posts to {args.out}")


if __name__ == "__main__":
    main()

import random
from typing import Dict, List, Optional, Sequence, Tuple

import pytest

from framekit.corpus import Annotation, Annotator, AnnotatorKind, Corpus, Post
from framekit.frames import (ALL_FRAMES, FILTERED_LABELS, Frame, LabelSet,
                             make_labelset, prompt_tag_of)


def make_post(post_id: str, text: str, created_at: int = 1_600_000_000) -> Post:
    return Post(id=post_id, text=text, created_at=created_at)


def make_corpus(texts: Sequence[str], start_at: int = 1_600_000_000) -> Corpus:
    return Corpus(
        make_post(f"p{i}", text, start_at + i * 3600) for i, text in enumerate(texts)
    )


def random_labelset(rng: random.Random, p_filtered: float = 0.15) -> LabelSet:
    if rng.random() < p_filtered:
        return FILTERED_LABELS
    k = rng.randint(1, 3)
    return make_labelset(rng.sample(ALL_FRAMES, k), filtered=False)


def annotate(post_id: str, labels: LabelSet, annotator_id: str = "a1",
             kind: AnnotatorKind = AnnotatorKind.EXPERT,
             elapsed: Optional[float] = None) -> Annotation:
    return Annotation(post_id=post_id, annotator=Annotator(annotator_id, kind),
                      labels=labels, elapsed_seconds=elapsed)


# Distinct marker token per head keeps the fixture linearly separable.
HEAD_TOKENS: Dict[object, str] = {
    **{frame: f"marker{frame.value.lower()}" for frame in ALL_FRAMES},
    "Filtered": "markerfiltered",
}


@pytest.fixture
def separable_corpus() -> Corpus:
    """40 posts, 4 per head, each class carried by its own token."""
    corpus = Corpus()
    annotator = Annotator("gold", AnnotatorKind.EXPERT)
    i = 0
    for head, token in HEAD_TOKENS.items():
        for rep in range(4):
            post = make_post(f"s{i}", f"{token} {token} common filler {rep}")
            corpus.add_post(post)
            if head == "Filtered":
                labels = FILTERED_LABELS
            else:
                labels = make_labelset({head}, filtered=False)
            corpus.add_annotation(Annotation(post.id, annotator, labels))
            i += 1
    return corpus


# ---------------------------------------------------------------------------
# Mock chat client: deterministic keyword-driven responses

FRAME_KEYWORDS: Dict[str, Frame] = {
    f"kw{frame.value.lower()}": frame for frame in ALL_FRAMES
}


class MockChatClient:
    """Reads sentinel keywords out of the post text embedded in the user
    message. Posts containing "offtopic" fail the relevance filter."""

    def __init__(self, fail_first_for: Sequence[str] = ()):
        self.calls: List[Tuple[str, str]] = []  # (stage, text)
        self._fail_pending = set(fail_first_for)

    def complete(self, messages) -> str:
        system = messages[0]["content"]
        user = messages[1]["content"]
        stage = "filter" if "2 different labels" in system else "frames"
        self.calls.append((stage, user))
        for needle in list(self._fail_pending):
            if needle in user:
                self._fail_pending.discard(needle)
                raise ConnectionError("injected transport failure")
        if stage == "filter":
            if "offtopic" in user:
                return "<other> because not about the issue"
            return "<attitude_towards_homelessness> because on topic"
        frames = [f for kw, f in FRAME_KEYWORDS.items() if kw in user]
        if not frames:
            frames = [Frame.SOC_CRIT]
        return "\n".join(
            f"<{prompt_tag_of(f)}> because mentions {prompt_tag_of(f)}"
            for f in frames
        )


def gold_labels_for(text: str) -> LabelSet:
    """The labels the mock client would assign, derived from the text."""
    if "offtopic" in text:
        return FILTERED_LABELS
    frames = {f for kw, f in FRAME_KEYWORDS.items() if kw in text}
    return make_labelset(frames or {Frame.SOC_CRIT}, filtered=False)


def gold_annotations(corpus: Corpus, annotator_id: str = "gold",
                     kind: AnnotatorKind = AnnotatorKind.EXPERT):
    annotator = Annotator(annotator_id, kind)
    return [Annotation(p.id, annotator, gold_labels_for(p.text)) for p in corpus]


class MockLLMServer:
    """Tiny OpenAI-style chat endpoint backed by MockChatClient logic."""

    def __init__(self):
        import http.server
        import json as _json
        import threading

        client = MockChatClient()

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers["Content-Length"])
                body = _json.loads(self.rfile.read(length))
                content = client.complete(body["messages"])
                payload = _json.dumps(
                    {"choices": [{"message": {"content": content}}]}
                ).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self._server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()
        self.endpoint = (
            f"http://127.0.0.1:{self._server.server_address[1]}/v1/chat/completions"
        )

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def mock_llm_server():
    server = MockLLMServer()
    yield server
    server.close()


def synthetic_posts(n: int, seed: int = 0, offtopic_share: float = 0.2) -> Corpus:
    """Corpus whose texts carry the sentinel keywords the mock client reads."""
    rng = random.Random(seed)
    keywords = list(FRAME_KEYWORDS)
    corpus = Corpus()
    for i in range(n):
        if rng.random() < offtopic_share:
            text = f"offtopic chatter number {i}"
        else:
            chosen = rng.sample(keywords, rng.randint(1, 3))
            text = "homeless topic " + " ".join(chosen) + f" item {i}"
        corpus.add_post(
            make_post(f"n{i}", text, 1_600_000_000 + rng.randrange(0, 400) * 86_400)
        )
    return corpus

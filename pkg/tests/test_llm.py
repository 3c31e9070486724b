import random

import pytest

from framekit.errors import MissingPlaceholder, ParseError, WrongStage
from framekit.frames import ALL_FRAMES, Frame, prompt_tag_of
from framekit.llm import (LLMClientConfig, PromptTemplate, Stage,
                          annotate_two_stage, apply_guideline_edit,
                          build_prompt, default_filter_template,
                          default_frames_template, parse_filter_response,
                          parse_frames_response, render_frames_response)

from conftest import MockChatClient, make_corpus, make_post, synthetic_posts


def test_build_prompt_inserts_post_verbatim():
    template = default_filter_template()
    post = make_post("x", 'some "quoted" text')
    messages = build_prompt(template, post)
    assert messages[0]["role"] == "system"
    assert 'some "quoted" text' in messages[1]["content"]


def test_template_requires_placeholder():
    with pytest.raises(MissingPlaceholder):
        PromptTemplate(Stage.FILTER,
                       default_filter_template().system_text, "no slot here")


def test_parse_filter_both_tags():
    relevant, reason = parse_filter_response(
        "<attitude_towards_homelessness> because it criticizes policy")
    assert relevant and reason == "it criticizes policy"
    relevant, reason = parse_filter_response("<other> because spam")
    assert not relevant and reason == "spam"


def test_parse_filter_tolerates_bare_tag_and_case():
    relevant, _ = parse_filter_response("Other because nothing relevant")
    assert not relevant
    with pytest.raises(ParseError):
        parse_filter_response("Other because x", strict=True)
    with pytest.raises(ParseError):
        parse_filter_response("no recognizable content")


def _perturb(rng: random.Random, tag: str) -> str:
    style = rng.randrange(3)
    if style == 0:
        tag = tag.upper()
    elif style == 1:
        tag = tag.capitalize()
    return f"<{tag}>" if rng.random() < 0.7 else tag


def test_frames_round_trip_500_randomized_subsets():
    rng = random.Random(99)
    for _ in range(500):
        chosen = rng.sample(ALL_FRAMES, rng.randint(1, 9))
        lines = []
        for frame in chosen:
            lines.append(f"- {_perturb(rng, prompt_tag_of(frame))} because "
                         f"reason for {frame.value}")
            if rng.random() < 0.2:  # duplicate keeps the first reason
                lines.append(f"{_perturb(rng, prompt_tag_of(frame))} because dup")
        parsed = parse_frames_response("\n".join(lines))
        assert [f for f, _ in parsed] == chosen
        for frame, reason in parsed:
            assert reason == f"reason for {frame.value}"


def test_render_then_parse_exact():
    labels = [(Frame.NIMBY, "local pushback"), (Frame.GOV_CRIT, "blames city hall")]
    raw = render_frames_response(labels)
    assert parse_frames_response(raw) == labels


def test_parse_frames_strict_requires_brackets_and_reason():
    raw = render_frames_response([(Frame.NIMBY, "x")])
    assert parse_frames_response(raw, strict=True) == [(Frame.NIMBY, "x")]
    with pytest.raises(ParseError):
        parse_frames_response("not_in_my_backyard because y", strict=True)
    with pytest.raises(ParseError):
        parse_frames_response("<not_in_my_backyard>", strict=True)


def test_bare_other_word_is_not_a_tag():
    raw = "<attitude_towards_homelessness> because among other things policy"
    relevant, _ = parse_filter_response(raw)
    assert relevant


# ---------------------------------------------------------------------------
# guideline edits

def test_guideline_edit_appends_and_bumps_version():
    template = default_frames_template()
    edited = apply_guideline_edit(template, Frame.MEDIA_PORT,
                                  "Includes documentary footage.", note="r3")
    assert edited.version == template.version + 1
    assert len(edited.edit_log) == 1
    assert edited.edit_log[0].frame is Frame.MEDIA_PORT
    # append-only: original text survives as a prefix of the edited block
    assert template.system_text.count("Includes documentary footage.") == 0
    assert edited.system_text.count("Includes documentary footage.") == 1
    # every original character is still present in order
    idx = edited.system_text.find("Includes documentary footage.")
    reconstructed = edited.system_text[:idx - 1] + edited.system_text[
        idx + len("Includes documentary footage."):]
    assert reconstructed == template.system_text


def test_guideline_edit_lands_in_the_right_block():
    template = default_frames_template()
    edited = apply_guideline_edit(template, Frame.NIMBY, "ADDED_SENTINEL")
    text = edited.system_text
    nimby_start = text.find("- <not_in_my_backyard>:")
    next_block = text.find("\n\n", nimby_start)
    assert nimby_start < text.find("ADDED_SENTINEL") < next_block


def test_guideline_edit_rejects_filter_stage():
    with pytest.raises(WrongStage):
        apply_guideline_edit(default_filter_template(), Frame.NIMBY, "x")


# ---------------------------------------------------------------------------
# batch annotation

CONFIG = LLMClientConfig(max_retries=2, backoff_seconds=(0.0,), max_concurrent=2)


def test_two_stage_request_counts():
    corpus = make_corpus(["offtopic rambling", "kwnimby development protest"])
    client = MockChatClient()
    annotations, failures = annotate_two_stage(
        corpus, client, CONFIG,
        default_filter_template(), default_frames_template())
    assert not failures
    by_id = {a.post_id: a for a in annotations}
    assert by_id["p0"].labels.filtered
    assert by_id["p1"].labels.frames == frozenset({Frame.NIMBY})
    stages = [s for s, _ in client.calls]
    assert stages.count("filter") == 2
    assert stages.count("frames") == 1  # only the relevant post


def test_rationales_come_from_because_clauses():
    corpus = make_corpus(["kwgovcrit kwsolnint text"])
    client = MockChatClient()
    annotations, _ = annotate_two_stage(
        corpus, client, CONFIG,
        default_filter_template(), default_frames_template())
    ann = annotations[0]
    assert ann.labels.frames == frozenset({Frame.GOV_CRIT, Frame.SOLN_INT})
    assert ann.rationales[Frame.GOV_CRIT] == "mentions government_critique"


def test_transport_failures_are_retried(tmp_path):
    corpus = make_corpus(["kwnimby flaky post"])
    client = MockChatClient(fail_first_for=["flaky"])
    sleeps = []
    annotations, failures = annotate_two_stage(
        corpus, client, CONFIG,
        default_filter_template(), default_frames_template(),
        log_path=tmp_path / "raw.jsonl", sleep=sleeps.append)
    assert not failures
    assert annotations[0].labels.frames == frozenset({Frame.NIMBY})
    assert sleeps == [0.0]
    raw_lines = (tmp_path / "raw.jsonl").read_text().splitlines()
    assert any('"error"' in line for line in raw_lines)


def test_exhausted_retries_become_failures():
    corpus = make_corpus(["always broken"])

    class DeadClient:
        def complete(self, messages):
            raise ConnectionError("down")

    config = LLMClientConfig(max_retries=1, backoff_seconds=(0.0,))
    annotations, failures = annotate_two_stage(
        corpus, DeadClient(), config,
        default_filter_template(), default_frames_template(),
        sleep=lambda s: None)
    assert annotations == []
    assert failures == [("p0", "down")]


def test_checkpoint_restart_skips_completed_posts(tmp_path):
    corpus = synthetic_posts(12, seed=4)
    checkpoint = tmp_path / "checkpoint.jsonl"
    first = MockChatClient()
    annotations1, failures1 = annotate_two_stage(
        corpus, first, CONFIG,
        default_filter_template(), default_frames_template(),
        checkpoint_path=checkpoint)
    assert not failures1 and len(annotations1) == 12

    second = MockChatClient()
    annotations2, failures2 = annotate_two_stage(
        corpus, second, CONFIG,
        default_filter_template(), default_frames_template(),
        checkpoint_path=checkpoint)
    assert not failures2
    assert second.calls == []  # everything replayed from the checkpoint
    assert [(a.post_id, a.labels) for a in annotations2] == \
        [(a.post_id, a.labels) for a in annotations1]

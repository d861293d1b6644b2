import copy

import pytest
from hypothesis import given, settings, strategies as st

from faultconsult.consult import Strategy, run_consultation
from faultconsult.errors import JudgeUnparseable, ScoreOutOfRange
from faultconsult.judge import (
    FORMAT_REMINDER,
    GOLD_LINE_PREFIX,
    JudgeScores,
    build_judge_prompt,
    judge_transcript,
    parse_judge_response,
    render_transcript,
    scripted_judge,
)
from faultconsult.llm import Role

WELL_FORMED = "CONTEXT: 0.80\nCONFIDENCE: 0.85\nACTIONABILITY: 0.80"


class TestParseJudgeResponse:
    def test_well_formed(self):
        scores, warnings = parse_judge_response(WELL_FORMED)
        assert scores == JudgeScores(context=0.8, fault_confidence=0.85, actionability=0.8)
        assert warnings == []

    def test_surrounding_prose_is_tolerated(self):
        text = "Here are my scores.\n" + WELL_FORMED + "\nHope that helps!"
        scores, _ = parse_judge_response(text)
        assert scores.context == 0.8

    def test_out_of_range_clamps_with_warning(self):
        text = "CONTEXT: 1.40\nCONFIDENCE: 0.85\nACTIONABILITY: -0.10"
        scores, warnings = parse_judge_response(text)
        assert scores.context == 1.0
        assert scores.actionability == 0.0
        assert warnings == ["JudgeScoreClamped:CONTEXT", "JudgeScoreClamped:ACTIONABILITY"]

    @pytest.mark.parametrize(
        "text",
        [
            "CONFIDENCE: 0.85\nACTIONABILITY: 0.80",
            "CONTEXT: 0.80\nACTIONABILITY: 0.80",
            "CONTEXT: 0.80\nCONFIDENCE: 0.85",
            "context: 0.80\nconfidence: 0.85\nactionability: 0.80",  # tokens are case-sensitive
            "",
            "I refuse to answer in that format.",
        ],
    )
    def test_missing_line_raises(self, text):
        with pytest.raises(JudgeUnparseable):
            parse_judge_response(text)

    def test_extra_decimals_round_half_up(self):
        scores, _ = parse_judge_response("CONTEXT: 0.12345\nCONFIDENCE: 0.99995\nACTIONABILITY: 0.5")
        assert scores.context == 0.1235
        assert scores.fault_confidence == 1.0
        assert scores.actionability == 0.5

    @given(st.text(max_size=200))
    @settings(max_examples=200)
    def test_total_or_raises_cleanly(self, text):
        try:
            scores, _ = parse_judge_response(text)
        except JudgeUnparseable:
            return
        for v in (scores.context, scores.fault_confidence, scores.actionability):
            assert 0.0 <= v <= 1.0


class TestJudgeScores:
    def test_validate_accepts_bounds(self):
        JudgeScores(0.0, 1.0, 0.5).validate()

    def test_validate_rejects_out_of_range(self):
        with pytest.raises(ScoreOutOfRange):
            JudgeScores(1.1, 0.5, 0.5).validate()
        with pytest.raises(ScoreOutOfRange):
            JudgeScores(0.5, 0.5, -0.1).validate()


@pytest.fixture()
def transcript(one_per_class, oracle_backend):
    t, _ = run_consultation(one_per_class[1], Strategy.MULTI_ROUND, oracle_backend)
    return t


class TestJudgePrompt:
    def test_gold_label_line_present(self, transcript, one_per_class):
        prompt = build_judge_prompt(transcript, one_per_class[1].gold_label)
        assert f"{GOLD_LINE_PREFIX}{one_per_class[1].gold_label.value}" in prompt

    def test_transcript_embedded_byte_for_byte(self, transcript, one_per_class):
        prompt = build_judge_prompt(transcript, one_per_class[1].gold_label)
        assert render_transcript(transcript) in prompt

    def test_gold_label_never_shown_to_consulted_model(self, transcript):
        # the leak check the docstring promises: no consultation message may
        # contain the judge's gold-assertion line
        for message in transcript.messages:
            assert GOLD_LINE_PREFIX not in message.content

    def test_render_transcript_role_prefixes(self, transcript):
        text = render_transcript(transcript)
        assert text.startswith("[user]\n")
        assert "\n\n[assistant]\n" in text


class SequenceBackend:
    """Returns scripted responses in order; records every request."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        return self.responses.pop(0)


class TestJudgeTranscript:
    def test_happy_path(self, transcript, one_per_class):
        backend = scripted_judge(0.8, 0.85, 0.8)
        scores = judge_transcript(transcript, one_per_class[1].gold_label, backend)
        assert scores == JudgeScores(0.8, 0.85, 0.8)

    def test_retry_carries_reminder_then_succeeds(self, transcript, one_per_class):
        backend = SequenceBackend(["not scores", WELL_FORMED])
        scores = judge_transcript(transcript, one_per_class[1].gold_label, backend)
        assert scores.fault_confidence == 0.85
        assert len(backend.requests) == 2
        retry = backend.requests[1].messages
        assert retry[-2].role is Role.ASSISTANT and retry[-2].content == "not scores"
        assert retry[-1].content == FORMAT_REMINDER

    def test_exactly_two_retries_then_unparseable(self, transcript, one_per_class):
        backend = SequenceBackend(["bad", "still bad", "nope"])
        with pytest.raises(JudgeUnparseable):
            judge_transcript(transcript, one_per_class[1].gold_label, backend)
        assert len(backend.requests) == 3
        assert not backend.responses

    def test_judging_does_not_mutate_transcript(self, transcript, one_per_class):
        snapshot = copy.deepcopy(transcript)
        judge_transcript(transcript, one_per_class[1].gold_label, scripted_judge(0.9, 0.9, 0.9))
        assert transcript == snapshot


def test_scripted_judge_rejects_invalid_scores():
    with pytest.raises(ScoreOutOfRange):
        scripted_judge(1.5, 0.5, 0.5)

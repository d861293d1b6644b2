import hashlib
import json
import struct
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from faultconsult.domain import FaultLabel
from faultconsult.errors import (
    ApiError,
    ConfigError,
    EmptyCompletion,
    InvalidRequest,
    IoError,
    ParseError,
    ReplayMiss,
    TransportError,
    UnknownPhaseMarker,
)
from faultconsult.llm import (
    CassetteBackend,
    CassetteMode,
    ChatMessage,
    ChatRequest,
    HttpBackend,
    OracleBackend,
    Role,
    fingerprint,
)

GOLDEN_FINGERPRINT = "877588d0b89b7b3b0cbbd31129bd7c055642da94ab77077bdfe251c28c5a0f34"


def user(text):
    return ChatMessage(Role.USER, text)


def request(*messages, model="gpt-4", temperature=0.0):
    return ChatRequest(model=model, messages=tuple(messages), temperature=temperature)


class TestChatRequestValidation:
    def test_valid(self):
        request(user("hi")).validate()

    @pytest.mark.parametrize(
        "req",
        [
            request(user("hi"), model=""),
            request(),
            request(user("hi"), temperature=-0.1),
            request(user("hi"), temperature=2.1),
            request(ChatMessage(Role.ASSISTANT, "hi")),
            request(user("a"), ChatMessage(Role.ASSISTANT, "b"), ChatMessage(Role.ASSISTANT, "c")),
            request(user("")),
        ],
    )
    def test_invalid(self, req):
        with pytest.raises(InvalidRequest):
            req.validate()


class TestFingerprint:
    def test_golden_value(self):
        assert fingerprint(request(user("hello"))) == GOLDEN_FINGERPRINT

    def test_matches_length_prefixed_recomputation(self):
        req = request(user("a"), ChatMessage(Role.ASSISTANT, "b"), user("c"), temperature=0.5)
        h = hashlib.sha256()
        for part in ("chat-request:v1", "gpt-4", repr(0.5), "user", "a", "assistant", "b", "user", "c"):
            raw = part.encode("utf-8")
            h.update(struct.pack(">Q", len(raw)))
            h.update(raw)
        assert fingerprint(req) == h.hexdigest()

    def test_sensitive_to_every_field(self):
        base = fingerprint(request(user("hello")))
        assert fingerprint(request(user("hello"), model="gpt-3")) != base
        assert fingerprint(request(user("hello"), temperature=1.0)) != base
        assert fingerprint(request(user("hello!"))) != base
        assert fingerprint(request(ChatMessage(Role.SYSTEM, "hello"))) != base

    def test_message_order_matters(self):
        a = fingerprint(request(user("one"), ChatMessage(Role.ASSISTANT, "two"), user("three")))
        b = fingerprint(request(user("three"), ChatMessage(Role.ASSISTANT, "two"), user("one")))
        assert a != b

    def test_length_prefix_blocks_boundary_shifts(self):
        a = fingerprint(request(user("ab"), ChatMessage(Role.ASSISTANT, "c"), user("x")))
        b = fingerprint(request(user("a"), ChatMessage(Role.ASSISTANT, "bc"), user("x")))
        assert a != b


# ---------------------------------------------------------------------------
# HTTP backend against a scripted local server
# ---------------------------------------------------------------------------

def completion(text):
    return {"choices": [{"message": {"content": text}}]}


class StubApi:
    """Local HTTP server that pops one scripted (status, payload) per POST."""

    def __init__(self, script):
        self.script = list(script)
        self.requests = []
        owner = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", "0"))
                owner.requests.append(
                    {
                        "path": self.path,
                        "auth": self.headers.get("Authorization"),
                        "body": json.loads(self.rfile.read(length) or b"{}"),
                    }
                )
                status, payload = owner.script.pop(0)
                data = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    @property
    def url(self):
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub_api():
    servers = []

    def make(script):
        api = StubApi(script)
        servers.append(api)
        return api

    yield make
    for api in servers:
        api.close()


def backend_for(api, sleeps=None, rng=lambda: 0.5):
    return HttpBackend(api.url, "sekrit", sleep=(sleeps.append if sleeps is not None else lambda s: None), rng=rng)


class TestHttpBackend:
    def test_success_sends_openai_shape(self, stub_api):
        api = stub_api([(200, completion("all good"))])
        out = backend_for(api).complete(request(user("hi"), temperature=0.25))
        assert out == "all good"
        assert len(api.requests) == 1
        sent = api.requests[0]
        assert sent["path"] == "/chat/completions"
        assert sent["auth"] == "Bearer sekrit"
        assert sent["body"] == {
            "model": "gpt-4",
            "messages": [{"role": "user", "content": "hi"}],
            "temperature": 0.25,
        }

    def test_retries_429_then_succeeds(self, stub_api):
        api = stub_api([(429, {}), (200, completion("ok"))])
        sleeps = []
        assert backend_for(api, sleeps).complete(request(user("hi"))) == "ok"
        assert len(api.requests) == 2
        assert sleeps == [0.5]  # rng 0.5 means zero jitter

    def test_retries_5xx_until_exhausted(self, stub_api):
        api = stub_api([(500, {}), (502, {}), (503, {}), (500, {})])
        sleeps = []
        with pytest.raises(TransportError):
            backend_for(api, sleeps).complete(request(user("hi")))
        assert len(api.requests) == 4
        assert sleeps == [0.5, 1.0, 2.0]

    def test_jitter_bounds(self, stub_api):
        for rng, factor in ((lambda: 0.0, 0.8), (lambda: 1.0, 1.2)):
            api = stub_api([(500, {})] * 4)
            sleeps = []
            with pytest.raises(TransportError):
                backend_for(api, sleeps, rng=rng).complete(request(user("hi")))
            assert sleeps == pytest.approx([0.5 * factor, 1.0 * factor, 2.0 * factor])

    def test_client_error_is_terminal(self, stub_api):
        api = stub_api([(403, {"error": "nope"})])
        with pytest.raises(ApiError) as info:
            backend_for(api).complete(request(user("hi")))
        assert info.value.status == 403
        assert len(api.requests) == 1

    def test_malformed_payload(self, stub_api):
        api = stub_api([(200, {"choices": []})])
        with pytest.raises(ApiError):
            backend_for(api).complete(request(user("hi")))

    def test_empty_content(self, stub_api):
        api = stub_api([(200, completion(""))])
        with pytest.raises(EmptyCompletion):
            backend_for(api).complete(request(user("hi")))

    def test_connection_failure_retries_then_gives_up(self, stub_api):
        api = stub_api([])
        url = api.url
        api.close()  # nothing listens on the port any more
        sleeps = []
        with pytest.raises(TransportError):
            HttpBackend(url, "k", sleep=sleeps.append).complete(request(user("hi")))
        assert len(sleeps) == 3

    def test_from_env(self, stub_api):
        api = stub_api([(200, completion("hi there"))])
        env = {"FAULTCONSULT_BASE_URL": api.url, "FAULTCONSULT_API_KEY": "k"}
        assert HttpBackend.from_env(env).complete(request(user("hi"))) == "hi there"
        with pytest.raises(ConfigError):
            HttpBackend.from_env({"FAULTCONSULT_API_KEY": "k"})
        with pytest.raises(ConfigError):
            HttpBackend.from_env({"FAULTCONSULT_BASE_URL": api.url})


# ---------------------------------------------------------------------------
# cassettes
# ---------------------------------------------------------------------------

class CountingBackend:
    def __init__(self, reply="scripted reply"):
        self.calls = 0
        self.reply = reply

    def complete(self, req):
        self.calls += 1
        return self.reply


class TestCassette:
    def test_record_requires_inner(self, tmp_path):
        with pytest.raises(ConfigError):
            CassetteBackend(tmp_path / "c.jsonl", CassetteMode.RECORD)

    def test_replay_requires_file(self, tmp_path):
        with pytest.raises(IoError):
            CassetteBackend(tmp_path / "absent.jsonl", CassetteMode.REPLAY)

    def test_record_then_replay(self, tmp_path):
        path = tmp_path / "c.jsonl"
        inner = CountingBackend()
        rec = CassetteBackend(path, CassetteMode.RECORD, inner)
        req = request(user("hi"))
        assert rec.complete(req) == "scripted reply"

        lines = path.read_text().splitlines()
        assert len(lines) == 1
        entry = json.loads(lines[0])
        assert entry == {"fingerprint": fingerprint(req), "response": "scripted reply"}

        replay = CassetteBackend(path, CassetteMode.REPLAY)
        assert replay.complete(req) == "scripted reply"
        with pytest.raises(ReplayMiss) as info:
            replay.complete(request(user("something new")))
        assert info.value.fingerprint == fingerprint(request(user("something new")))

    def test_record_is_write_through_cache(self, tmp_path):
        inner = CountingBackend()
        rec = CassetteBackend(tmp_path / "c.jsonl", CassetteMode.RECORD, inner)
        req = request(user("hi"))
        rec.complete(req)
        rec.complete(req)
        assert inner.calls == 1
        assert len((tmp_path / "c.jsonl").read_text().splitlines()) == 1

    def test_existing_entries_short_circuit_recording(self, tmp_path):
        path = tmp_path / "c.jsonl"
        req = request(user("hi"))
        path.write_text(json.dumps({"fingerprint": fingerprint(req), "response": "from tape"}) + "\n")
        inner = CountingBackend()
        rec = CassetteBackend(path, CassetteMode.RECORD, inner)
        assert rec.complete(req) == "from tape"
        assert inner.calls == 0

    def test_duplicate_fingerprint_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        line = json.dumps({"fingerprint": "abc", "response": "x"})
        path.write_text(line + "\n" + line + "\n")
        with pytest.raises(ParseError) as info:
            CassetteBackend(path, CassetteMode.REPLAY)
        assert info.value.line == 2

    def test_bad_line_reports_lineno(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"fingerprint": "abc", "response": "x"}\nnot json\n')
        with pytest.raises(ParseError) as info:
            CassetteBackend(path, CassetteMode.REPLAY)
        assert info.value.line == 2


# ---------------------------------------------------------------------------
# oracle backend
# ---------------------------------------------------------------------------

class TestOracleBackend:
    def prompt(self, phase, machine="m-0000", block=None):
        text = f"<!--phase:{phase}-->\n<!--machine:{machine}-->\ndo the thing"
        if block is not None:
            text += f"\n---BEGIN DATA SUMMARY---\n{block}\n---END DATA SUMMARY---\n"
        return request(user(text))

    def test_summary_phase_echoes_block(self, oracle_backend):
        out = oracle_backend.complete(self.prompt("summary", block="mean: 42"))
        assert out.startswith("Key patterns restated")
        assert "mean: 42" in out

    def test_analysis_phase_emits_fault_line(self, one_per_class, oracle_backend):
        machine = one_per_class[1]  # misalignment slot
        out = oracle_backend.complete(self.prompt("analysis", machine=machine.machine_id))
        assert f"FAULT: {machine.gold_label.value} | CONFIDENCE: 0.95" in out

    def test_action_phase_numbered_steps(self, oracle_backend):
        out = oracle_backend.complete(self.prompt("action"))
        assert out.splitlines()[0].startswith("1. ")

    def test_single_phase_combines_everything(self, oracle_backend):
        out = oracle_backend.complete(self.prompt("single"))
        assert "FAULT: " in out and "1. " in out

    def test_single_cot_narrates(self, oracle_backend):
        out = oracle_backend.complete(self.prompt("single_cot"))
        assert out.startswith("Working through the evidence step by step:")

    def test_missing_phase_marker(self, oracle_backend):
        with pytest.raises(UnknownPhaseMarker):
            oracle_backend.complete(request(user("<!--machine:m-0000-->\nno phase here")))

    def test_unknown_machine(self, oracle_backend):
        with pytest.raises(UnknownPhaseMarker):
            oracle_backend.complete(self.prompt("analysis", machine="m-9999"))

    def test_for_dataset_uses_oracle_labels(self, one_per_class):
        backend = OracleBackend.for_dataset(one_per_class)
        for machine in one_per_class:
            out = backend.complete(self.prompt("analysis", machine=machine.machine_id))
            assert f"FAULT: {machine.gold_label.value}" in out

    def test_machine_marker_found_in_earlier_turns(self, oracle_backend):
        req = request(
            user("<!--machine:m-0000-->\n<!--phase:summary-->\nsummarize"),
            ChatMessage(Role.ASSISTANT, "summary text"),
            user("<!--phase:analysis-->\nnow analyze"),
        )
        out = oracle_backend.complete(req)
        assert "FAULT: " in out


def test_fault_label_enum_unused_guard():
    # oracle scripts cover every generatable class
    from faultconsult.llm import _ACTIONS, _RATIONALE

    for label in (FaultLabel.NORMAL, FaultLabel.MISALIGNMENT, FaultLabel.BEARING_WEAR, FaultLabel.OVERHEATING):
        assert label in _RATIONALE and label in _ACTIONS

"""Command-line entry point.

Exit codes are a stable contract: 0 success, 1 usage error, 2 data error,
3 backend error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..consult import ConsultConfig, Phase, Strategy, run_consultation
from ..domain import MachineRecord
from ..errors import BackendError, ConfigError, FaultConsultError, UnknownMachine
from ..evalreport import (
    EvalConfig,
    Format,
    Layout,
    evaluate_dataset,
    records_to_jsonl,
    render_report,
    report_from_dict,
    report_to_dict,
)
from ..ingest import load_dataset, load_manifest
from ..judge import scripted_judge
from ..llm import (
    DEFAULT_MODEL,
    ENV_MODEL,
    CassetteBackend,
    CassetteMode,
    ChatBackend,
    HttpBackend,
    OracleBackend,
)
from ..synthgen import SynthConfig, generate_dataset, write_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="faultconsult", description="Machine fault consultation toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synthgen", help="generate a synthetic dataset on disk")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-per-class", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("consult", help="run one consultation session")
    p.add_argument("--manifest", required=True)
    p.add_argument("--machine", required=True)
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="multi_round")
    p.add_argument("--backend", choices=["oracle", "scripted", "http"], default="oracle")
    p.add_argument("--cassette", help="cassette file (replay source, or recording target)")
    p.add_argument(
        "--note",
        action="append",
        default=[],
        help="operator note; first applies before analysis, second before action",
    )
    p.add_argument("--model", default=None)

    p = sub.add_parser("evaluate", help="evaluate strategies over a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--strategies", required=True, help="comma-separated strategy names")
    p.add_argument("--backend", choices=["oracle", "scripted", "http"], default="oracle")
    p.add_argument("--judge", choices=["scripted", "http"], default="scripted")
    p.add_argument("--judge-scores", default="0.8,0.85,0.8", help="scripted judge scores c,f,a")
    p.add_argument("--cassette")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--records", help="records JSONL path (default: <out>.records.jsonl)")
    p.add_argument("--model", default=None)

    p = sub.add_parser("report", help="render a stored report")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--layout", choices=[l.value for l in Layout], default="full")
    p.add_argument("--format", choices=[f.value for f in Format], default="markdown")

    p = sub.add_parser("serve", help="serve the HTTP API for the console")
    p.add_argument("--addr", default="127.0.0.1:8765")
    p.add_argument("--manifest", required=True)
    p.add_argument("--cassette", help="optional replay cassette exposed as backend 'scripted'")

    return parser


def _load_machines(manifest_path: str) -> list[MachineRecord]:
    return load_dataset(load_manifest(manifest_path))


def _build_backend(
    kind: str, machines: Sequence[MachineRecord], cassette: Optional[str]
) -> ChatBackend:
    if kind == "oracle":
        backend: ChatBackend = OracleBackend.for_dataset(machines)
        if cassette:
            backend = CassetteBackend(cassette, CassetteMode.RECORD, inner=backend)
        return backend
    if kind == "scripted":
        if not cassette:
            raise ConfigError("--backend scripted requires --cassette")
        return CassetteBackend(cassette, CassetteMode.REPLAY)
    backend = HttpBackend.from_env()
    if cassette:
        backend = CassetteBackend(cassette, CassetteMode.RECORD, inner=backend)
    return backend


def _model(args) -> str:
    import os

    return args.model or os.environ.get(ENV_MODEL) or DEFAULT_MODEL


def _cmd_synthgen(args) -> int:
    config = SynthConfig(seed=args.seed, n_per_class=args.n_per_class)
    records = generate_dataset(config)
    manifest = write_dataset(records, args.out)
    print(f"wrote {len(records)} machines under {args.out}")
    print(str(Path(args.out) / "manifest.json"))
    return EXIT_OK


def _cmd_consult(args) -> int:
    machines = _load_machines(args.manifest)
    by_id = {m.machine_id: m for m in machines}
    machine = by_id.get(args.machine)
    if machine is None:
        raise UnknownMachine(f"no machine {args.machine!r} in {args.manifest}")
    strategy = Strategy(args.strategy)
    if len(args.note) > 2:
        raise ConfigError("at most 2 notes: one before analysis, one before action")
    notes = {}
    if args.note:
        notes[Phase.ANALYSIS] = args.note[0]
    if len(args.note) > 1:
        notes[Phase.ACTION] = args.note[1]
    backend = _build_backend(args.backend, machines, args.cassette)
    transcript, result = run_consultation(
        machine, strategy, backend, ConsultConfig(model=_model(args)), notes=notes
    )
    payload = {
        "session_id": transcript.session_id,
        "machine_id": transcript.machine_id,
        "strategy": transcript.strategy.value,
        "phases": [p.phase.value for p in transcript.phases],
        "label": result.label.value,
        "confidence": result.confidence,
        "actions": list(result.actions),
        "parse_warnings": list(result.parse_warnings),
        "error": result.error,
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def _parse_judge_scores(raw: str) -> tuple[float, float, float]:
    parts = raw.split(",")
    if len(parts) != 3:
        raise ConfigError("--judge-scores needs exactly 3 comma-separated values")
    try:
        c, f, a = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"bad --judge-scores {raw!r}") from None
    return c, f, a


def _cmd_evaluate(args) -> int:
    machines = _load_machines(args.manifest)
    try:
        strategies = [Strategy(t.strip()) for t in args.strategies.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --strategies: {exc}") from None
    backend = _build_backend(args.backend, machines, args.cassette)
    if args.judge == "scripted":
        judge = scripted_judge(*_parse_judge_scores(args.judge_scores))
    else:
        judge = HttpBackend.from_env()
    config = EvalConfig(model=_model(args), judge_model=_model(args), workers=args.workers)
    report, records = evaluate_dataset(machines, strategies, backend, judge, config)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n", "utf-8")
    records_path = Path(args.records) if args.records else out.with_suffix(out.suffix + ".records.jsonl")
    records_path.write_text(records_to_jsonl(records), "utf-8")

    for s in report.strategies:
        judge_part = ""
        if s.mean_judge:
            judge_part = (
                f"  judge {s.mean_judge.context:.2f}/{s.mean_judge.fault_confidence:.2f}"
                f"/{s.mean_judge.actionability:.2f}"
            )
        print(
            f"{s.name}: acc {s.acc_overall:.1f}% (macro {s.macro_average}%),"
            f" n={s.n}, errors={s.errors}{judge_part}"
        )
    print(f"report: {out}")
    print(f"records: {records_path}")
    return EXIT_OK


def _cmd_report(args) -> int:
    path = Path(args.in_path)
    try:
        doc = json.loads(path.read_text("utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read report {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"report {path} is not valid JSON: {exc}") from exc
    report = report_from_dict(doc)
    sys.stdout.write(render_report(report, args.layout, args.format))
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    from .sessions import SessionStore

    host, _, port_text = args.addr.rpartition(":")
    if not host or not port_text.isdigit():
        raise ConfigError(f"--addr must look like host:port, got {args.addr!r}")
    machines = _load_machines(args.manifest)
    backends: dict[str, ChatBackend] = {"oracle": OracleBackend.for_dataset(machines)}
    if args.cassette:
        backends["scripted"] = CassetteBackend(args.cassette, CassetteMode.REPLAY)
    try:
        backends["http"] = HttpBackend.from_env()
    except ConfigError:
        pass  # env not configured; serve without a live backend
    store = SessionStore(machines, backends)
    app = create_app(store)
    print(f"serving {len(machines)} machines on http://{host}:{port_text}")
    uvicorn.run(app, host=host, port=int(port_text), log_level="warning")
    return EXIT_OK


_COMMANDS = {
    "synthgen": _cmd_synthgen,
    "consult": _cmd_consult,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
    "serve": _cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except BackendError as exc:
        print(f"backend error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except FaultConsultError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Batch evaluation and report rendering.

Every (machine, strategy) pair is consulted exactly once on a bounded worker
pool; per-record failures become errored records instead of aborting the
batch. Aggregation folds over records sorted by (strategy, machine_id), so
results are independent of execution order, and all display rounding is
half-up (integer percent for accuracies, two decimals for judge scores).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from hashlib import sha256
from io import StringIO
from typing import Iterable, Mapping, Optional, Sequence

import csv

from .consult import ConsultConfig, Strategy, run_consultation
from .domain import FAULT_CLASSES, FaultLabel, MachineRecord
from .errors import (
    ConfigError,
    EmptyInput,
    FaultConsultError,
    MissingStrategy,
    ParseError,
    UnknownVersion,
)
from .judge import JudgeScores, judge_transcript
from .llm import DEFAULT_MODEL, ChatBackend

REPORT_VERSION = 1


@dataclass(frozen=True)
class EvalConfig:
    model: str = DEFAULT_MODEL
    judge_model: str = DEFAULT_MODEL
    temperature: float = 0.0
    workers: int = 4
    timestamp: Optional[str] = None  # injectable so reports can be byte-stable


@dataclass(frozen=True)
class EvalRecord:
    machine_id: str
    strategy: Strategy
    predicted: FaultLabel
    gold: FaultLabel
    correct: bool
    self_confidence: float
    judge: Optional[JudgeScores]
    error: Optional[str]


@dataclass(frozen=True)
class StrategyReport:
    name: str
    n: int
    errors: int
    correct: int
    acc_overall: float
    acc_by_fault: Mapping[FaultLabel, float]
    macro_average: int
    mean_judge: Optional[JudgeScores]


@dataclass(frozen=True)
class EvalReport:
    strategies: tuple[StrategyReport, ...]
    metadata: Mapping[str, str]
    report_version: int = REPORT_VERSION


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def macro_average(percentages: Iterable[float]) -> int:
    """Unweighted mean of per-fault percentages, half-up to integer percent."""
    vals = [Decimal(str(p)) for p in percentages]
    if not vals:
        raise EmptyInput("macro average needs at least one percentage")
    mean = sum(vals) / len(vals)
    return int(mean.quantize(Decimal("1"), rounding=ROUND_HALF_UP))


def compute_accuracy(records: Sequence[EvalRecord]) -> tuple[float, dict[FaultLabel, float], int]:
    """(overall percentage, per-fault percentages over the three fault
    classes, macro average). Errored records count as incorrect."""
    if not records:
        raise EmptyInput("no records to aggregate")
    acc_overall = 100.0 * sum(r.correct for r in records) / len(records)
    acc_by_fault: dict[FaultLabel, float] = {}
    for cls in FAULT_CLASSES:
        subset = [r for r in records if r.gold is cls]
        if subset:
            acc_by_fault[cls] = 100.0 * sum(r.correct for r in subset) / len(subset)
    macro = macro_average(acc_by_fault.values()) if acc_by_fault else 0
    return acc_overall, acc_by_fault, macro


def _mean_judge(records: Sequence[EvalRecord]) -> Optional[JudgeScores]:
    judged = [r.judge for r in records if r.judge is not None]
    if not judged:
        return None
    n = len(judged)
    return JudgeScores(
        context=sum(j.context for j in judged) / n,
        fault_confidence=sum(j.fault_confidence for j in judged) / n,
        actionability=sum(j.actionability for j in judged) / n,
    )


def summarize_records(name: str, records: Sequence[EvalRecord]) -> StrategyReport:
    acc_overall, acc_by_fault, macro = compute_accuracy(records)
    return StrategyReport(
        name=name,
        n=len(records),
        errors=sum(r.error is not None for r in records),
        correct=sum(r.correct for r in records),
        acc_overall=acc_overall,
        acc_by_fault=acc_by_fault,
        macro_average=macro,
        mean_judge=_mean_judge(records),
    )


def _dataset_digest(machines: Sequence[MachineRecord]) -> str:
    h = sha256()
    for m in sorted(machines, key=lambda m: m.machine_id):
        assert m.gold_label is not None
        h.update(f"{m.machine_id}:{m.gold_label.value}\n".encode("utf-8"))
    return h.hexdigest()[:16]


def _config_digest(strategies: Sequence[Strategy], config: EvalConfig) -> str:
    key = "|".join(
        [s.value for s in strategies] + [config.model, config.judge_model, repr(config.temperature)]
    )
    return sha256(key.encode("utf-8")).hexdigest()[:16]


def _evaluate_pair(
    machine: MachineRecord,
    strategy: Strategy,
    backend: ChatBackend,
    judge_backend: ChatBackend,
    config: EvalConfig,
) -> EvalRecord:
    gold = machine.gold_label
    assert gold is not None
    try:
        transcript, result = run_consultation(
            machine, strategy, backend, ConsultConfig(config.model, config.temperature)
        )
        scores = judge_transcript(
            transcript, gold, judge_backend, model=config.judge_model, temperature=config.temperature
        )
    except FaultConsultError as exc:
        return EvalRecord(
            machine_id=machine.machine_id,
            strategy=strategy,
            predicted=FaultLabel.UNKNOWN,
            gold=gold,
            correct=False,
            self_confidence=0.0,
            judge=None,
            error=exc.code,
        )
    return EvalRecord(
        machine_id=machine.machine_id,
        strategy=strategy,
        predicted=result.label,
        gold=gold,
        correct=result.label is gold,
        self_confidence=result.confidence,
        judge=scores,
        error=result.error,
    )


def evaluate_dataset(
    machines: Sequence[MachineRecord],
    strategies: Sequence[Strategy],
    backend: ChatBackend,
    judge_backend: ChatBackend,
    config: EvalConfig = EvalConfig(),
) -> tuple[EvalReport, list[EvalRecord]]:
    if not machines:
        raise ConfigError("dataset is empty")
    if not strategies:
        raise ConfigError("no strategies requested")
    if len(set(strategies)) != len(strategies):
        raise ConfigError("duplicate strategy requested")
    for m in machines:
        if m.gold_label is None:
            raise ConfigError(f"machine {m.machine_id!r} has no gold label")
    if config.workers < 1:
        raise ConfigError("workers must be at least 1")

    tasks = [(machine, strategy) for strategy in strategies for machine in machines]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        records = list(
            pool.map(lambda t: _evaluate_pair(t[0], t[1], backend, judge_backend, config), tasks)
        )
    records.sort(key=lambda r: (r.strategy.value, r.machine_id))

    reports = tuple(
        summarize_records(s.value, [r for r in records if r.strategy is s]) for s in strategies
    )
    metadata = {
        "dataset_digest": _dataset_digest(machines),
        "config_digest": _config_digest(strategies, config),
        "timestamp": config.timestamp
        or datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }
    return EvalReport(strategies=reports, metadata=metadata), records


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _judge_to_dict(j: Optional[JudgeScores]):
    if j is None:
        return None
    return {"context": j.context, "fault_confidence": j.fault_confidence, "actionability": j.actionability}

def _judge_from_dict(obj) -> Optional[JudgeScores]:
    if obj is None:
        return None
    return JudgeScores(
        context=obj["context"],
        fault_confidence=obj["fault_confidence"],
        actionability=obj["actionability"],
    )


def report_to_dict(report: EvalReport) -> dict:
    return {
        "report_version": report.report_version,
        "metadata": dict(report.metadata),
        "strategies": [
            {
                "name": s.name,
                "n": s.n,
                "errors": s.errors,
                "correct": s.correct,
                "acc_overall": s.acc_overall,
                "acc_by_fault": {label.value: pct for label, pct in s.acc_by_fault.items()},
                "macro_average": s.macro_average,
                "mean_judge": _judge_to_dict(s.mean_judge),
            }
            for s in report.strategies
        ],
    }


def report_from_dict(doc: dict) -> EvalReport:
    try:
        version = doc["report_version"]
        if version != REPORT_VERSION:
            raise UnknownVersion(f"unsupported report version {version}")
        strategies = tuple(
            StrategyReport(
                name=s["name"],
                n=s["n"],
                errors=s["errors"],
                correct=s["correct"],
                acc_overall=s["acc_overall"],
                acc_by_fault={FaultLabel(k): v for k, v in s["acc_by_fault"].items()},
                macro_average=s["macro_average"],
                mean_judge=_judge_from_dict(s.get("mean_judge")),
            )
            for s in doc["strategies"]
        )
        return EvalReport(strategies=strategies, metadata=dict(doc["metadata"]), report_version=version)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed report document: {exc}") from exc


def records_to_jsonl(records: Sequence[EvalRecord]) -> str:
    lines = []
    for r in records:
        lines.append(
            json.dumps(
                {
                    "machine_id": r.machine_id,
                    "strategy": r.strategy.value,
                    "predicted": r.predicted.value,
                    "gold": r.gold.value,
                    "correct": r.correct,
                    "self_confidence": r.self_confidence,
                    "judge": _judge_to_dict(r.judge),
                    "error": r.error,
                }
            )
        )
    return "".join(line + "\n" for line in lines)


def records_from_jsonl(text: str) -> list[EvalRecord]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            records.append(
                EvalRecord(
                    machine_id=obj["machine_id"],
                    strategy=Strategy(obj["strategy"]),
                    predicted=FaultLabel(obj["predicted"]),
                    gold=FaultLabel(obj["gold"]),
                    correct=obj["correct"],
                    self_confidence=obj["self_confidence"],
                    judge=_judge_from_dict(obj.get("judge")),
                    error=obj.get("error"),
                )
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"bad record line: {exc}", line=lineno) from exc
    return records


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

class Layout(Enum):
    TABLE1 = "table1"
    TABLE2 = "table2"
    FULL = "full"


class Format(Enum):
    MARKDOWN = "markdown"
    CSV = "csv"
    JSON = "json"


TABLE1_HEADER = ("Model", "Accuracy (ACC)", "Context", "Confidence", "Actionability")
TABLE2_ROW_LABELS = {
    FaultLabel.MISALIGNMENT: "Misalignment",
    FaultLabel.BEARING_WEAR: "Bearing Wear",
    FaultLabel.OVERHEATING: "Overheating",
}
TOTAL_AVERAGE_LABEL = "Total Average"


def _pct(value: float) -> str:
    return str(int(Decimal(str(value)).quantize(Decimal("1"), rounding=ROUND_HALF_UP))) + "%"


def _two_dec(value: float) -> str:
    return str(Decimal(str(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _table1_cells(report: EvalReport) -> list[tuple[str, ...]]:
    rows = []
    for s in report.strategies:
        if s.mean_judge is None:
            judge_cells = ("-", "-", "-")
        else:
            judge_cells = (
                _two_dec(s.mean_judge.context),
                _two_dec(s.mean_judge.fault_confidence),
                _two_dec(s.mean_judge.actionability),
            )
        rows.append((s.name, _pct(s.acc_overall)) + judge_cells)
    return rows


def _table2_cells(report: EvalReport) -> tuple[tuple[str, ...], list[tuple[str, ...]]]:
    header = ("Fault Type",) + tuple(s.name for s in report.strategies)
    rows = []
    for cls in FAULT_CLASSES:
        cells = [TABLE2_ROW_LABELS[cls]]
        for s in report.strategies:
            pct = s.acc_by_fault.get(cls)
            cells.append("-" if pct is None else _pct(pct))
        rows.append(tuple(cells))
    rows.append(
        (TOTAL_AVERAGE_LABEL,) + tuple(str(s.macro_average) + "%" for s in report.strategies)
    )
    return header, rows


def _markdown_table(header: tuple[str, ...], rows: list[tuple[str, ...]]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join("---" for _ in header) + " |",
    ]
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return "\n".join(lines) + "\n"


def _csv_table(header: tuple[str, ...], rows: list[tuple[str, ...]]) -> str:
    buf = StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def render_report(report: EvalReport, layout, format) -> str:
    """Render to text; byte-deterministic for equal report content."""
    layout = Layout(layout) if not isinstance(layout, Layout) else layout
    format = Format(format) if not isinstance(format, Format) else format
    if not report.strategies:
        raise MissingStrategy("report contains no strategies")

    if layout is Layout.TABLE1:
        rows = _table1_cells(report)
        if format is Format.MARKDOWN:
            return _markdown_table(TABLE1_HEADER, rows)
        if format is Format.CSV:
            return _csv_table(TABLE1_HEADER, rows)
        return _json_text(
            {
                "report_version": report.report_version,
                "layout": "table1",
                "rows": [dict(zip(("model", "accuracy", "context", "confidence", "actionability"), r)) for r in rows],
            }
        )

    if layout is Layout.TABLE2:
        header, rows = _table2_cells(report)
        if format is Format.MARKDOWN:
            return _markdown_table(header, rows)
        if format is Format.CSV:
            return _csv_table(header, rows)
        return _json_text(
            {
                "report_version": report.report_version,
                "layout": "table2",
                "columns": list(header[1:]),
                "rows": [
                    {"fault_type": r[0], "by_model": dict(zip(header[1:], r[1:]))} for r in rows
                ],
            }
        )

    # full layout
    if format is Format.JSON:
        return _json_text(report_to_dict(report))
    header2, rows2 = _table2_cells(report)
    if format is Format.CSV:
        counts_header = ("Strategy", "n", "errors", "correct")
        counts_rows = [(s.name, str(s.n), str(s.errors), str(s.correct)) for s in report.strategies]
        return (
            _csv_table(TABLE1_HEADER, _table1_cells(report))
            + "\n"
            + _csv_table(header2, rows2)
            + "\n"
            + _csv_table(counts_header, counts_rows)
        )
    meta = report.metadata
    parts = [
        "# Evaluation report",
        "",
        f"- generated: {meta.get('timestamp', '-')}",
        f"- dataset digest: {meta.get('dataset_digest', '-')}",
        f"- config digest: {meta.get('config_digest', '-')}",
        "",
        "## Accuracy and judge means",
        "",
        _markdown_table(TABLE1_HEADER, _table1_cells(report)).rstrip("\n"),
        "",
        "## Accuracy by fault type",
        "",
        _markdown_table(header2, rows2).rstrip("\n"),
        "",
        "## Session counts",
        "",
        _markdown_table(
            ("Strategy", "n", "errors", "correct"),
            [(s.name, str(s.n), str(s.errors), str(s.correct)) for s in report.strategies],
        ).rstrip("\n"),
    ]
    return "\n".join(parts) + "\n"

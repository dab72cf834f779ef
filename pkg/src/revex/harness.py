"""Evaluation arithmetic: report merging, tool combinations and precision/recall/F1."""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from itertools import combinations
from pathlib import Path

from revex.reports import WarningReport, dedupe

DEFAULT_TOOLS = ("Oyente", "Mythril", "Securify1", "Securify2", "Smartian", "Sailfish", "Slither", "EThor")
DEFAULT_SIZES = (2, 4, 6, 8)


def percent(value: Fraction | None) -> str | None:
    """``value`` as a percentage with one decimal, ties rounded away from zero."""
    if value is None:
        return None
    exact = Decimal(value.numerator * 100) / Decimal(value.denominator)
    return str(exact.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _ratio(num: int, den: int) -> Fraction | None:
    return Fraction(num, den) if den else None


@dataclass(frozen=True)
class Metrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    unknown: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn, self.unknown) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def precision(self) -> Fraction | None:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> Fraction | None:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> Fraction | None:
        p, r = self.precision, self.recall
        if p is None or r is None or p + r == 0:
            return None
        return 2 * p * r / (p + r)

    @property
    def reported(self) -> int:
        return self.tp + self.fp

    def to_json(self) -> dict:
        out: dict = {k: getattr(self, k) for k in ("tp", "fp", "fn", "tn", "unknown")}
        for name in ("precision", "recall", "f1"):
            value = getattr(self, name)
            out[name] = percent(value)
            out[f"{name}_undefined"] = value is None
        return out


def load_truth(path: str | Path) -> dict[str, bool]:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: truth file must map contract ids to booleans")
    out = {}
    for cid, label in doc.items():
        if isinstance(label, Mapping):
            label = label.get("vulnerable")
        if not isinstance(label, bool):
            raise ValueError(f"{path}: label for {cid!r} is not a boolean")
        out[cid] = label
    return out


def _tally(flagged: set[str], unknown: set[str], truth: Mapping[str, bool]) -> Metrics:
    tp = sum(1 for c, v in truth.items() if v and c in flagged)
    fp = sum(1 for c, v in truth.items() if not v and c in flagged)
    fn = sum(1 for c, v in truth.items() if v and c not in flagged)
    tn = len(truth) - tp - fp - fn
    return Metrics(tp, fp, fn, tn, len(unknown - flagged))


def score(verdicts: Iterable, truth: Mapping[str, bool]) -> Metrics:
    """Contract-level metrics: a contract counts as flagged once any of its warnings is confirmed."""
    confirmed: set[str] = set()
    unknown: set[str] = set()
    for v in verdicts:
        if v.contract_id not in truth:
            raise KeyError(f"verdict for unlabeled contract {v.contract_id!r}")
        if v.outcome == "confirmed":
            confirmed.add(v.contract_id)
        elif v.outcome == "unknown":
            unknown.add(v.contract_id)
    return _tally(confirmed, unknown, truth)


def score_reports(reports: Iterable[WarningReport], truth: Mapping[str, bool]) -> Metrics:
    """Metrics of the upstream tools themselves: every warned contract counts as flagged."""
    warned = set()
    for r in reports:
        for w in r.warnings:
            if w.contract_id not in truth:
                raise KeyError(f"warning for unlabeled contract {w.contract_id!r}")
            warned.add(w.contract_id)
    return _tally(warned, set(), truth)


def merge_reports(reports: Sequence[WarningReport], combo: Iterable[str]) -> WarningReport:
    """Union of the warnings of every tool in ``combo``."""
    combo = sorted(set(combo))
    present = {r.tool_name for r in reports}
    for tool in combo:
        if tool not in present:
            raise KeyError(f"no report from tool {tool!r}")
    chosen = [r for r in reports if r.tool_name in combo]
    warnings = dedupe(sorted(w for r in chosen for w in r.warnings))
    contracts = {w.contract_id for w in warnings} | {r.contract_id for r in chosen}
    cid = contracts.pop() if len(contracts) == 1 else "*"
    return WarningReport("+".join(combo), cid, warnings)


def enumerate_combos(tools: Sequence[str] = DEFAULT_TOOLS, sizes: Iterable[int] = DEFAULT_SIZES) -> list[tuple[str, ...]]:
    if len(set(tools)) != len(tools):
        dupes = sorted({t for t in tools if list(tools).count(t) > 1})
        raise ValueError(f"duplicate tool names: {', '.join(dupes)}")
    if len(tools) != 8:
        raise ValueError(f"expected 8 tools, got {len(tools)}")
    ordered = sorted(tools)
    out = []
    for k in sorted(set(sizes)):
        if not 1 <= k <= len(tools):
            raise ValueError(f"combination size {k} out of range")
        out.extend(combinations(ordered, k))
    return out


def format_table(rows: Sequence[tuple[str, Metrics]]) -> str:
    """Aligned text table, one row per labelled metrics record."""
    head = ("name", "TP", "FP", "FN", "TN", "unk", "P%", "R%", "F1%")
    body = [
        (name, str(m.tp), str(m.fp), str(m.fn), str(m.tn), str(m.unknown),
         percent(m.precision) or "-", percent(m.recall) or "-", percent(m.f1) or "-")
        for name, m in rows
    ]
    widths = [max(len(r[i]) for r in [head, *body]) for i in range(len(head))]

    def line(row):
        return "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))

    return "\n".join(line(r) for r in [head, *body]) + "\n"


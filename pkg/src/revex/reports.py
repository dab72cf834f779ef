"""Upstream warning reports and contract bundles."""

from __future__ import annotations

import json
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from revex.evm import AssemblyError, Cfg, CodeSizeError, Instruction, assemble, build_cfg, disassemble, parse_hex
from revex.hashing import keccak256
from revex.slots import SlotRef

_SELECTOR_RE = re.compile(r"^0x[0-9a-fA-F]{8}$")
_ADDRESS_RE = re.compile(r"^0x[0-9a-fA-F]{40}$")


class ReportSchemaError(ValueError):
    pass


class LoadError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Warning:
    contract_id: str
    selector: int
    pc_hint: int | None = field(default=None, compare=False)
    kind: str = field(default="reentrancy", compare=False)

    @property
    def key(self) -> tuple[str, int]:
        return (self.contract_id, self.selector)

    def to_json(self) -> dict:
        out = {"selector": format_selector(self.selector), "kind": self.kind}
        if self.pc_hint is not None:
            out["pc"] = self.pc_hint
        return out


@dataclass(frozen=True)
class WarningReport:
    tool_name: str
    contract_id: str
    warnings: tuple[Warning, ...] = ()

    def selectors(self, contract_id: str | None = None) -> list[int]:
        return [w.selector for w in self.warnings if contract_id is None or w.contract_id == contract_id]

    def to_json(self) -> dict:
        return {
            "tool_name": self.tool_name,
            "contract_id": self.contract_id,
            "warnings": [
                {**w.to_json(), **({"contract_id": w.contract_id} if w.contract_id != self.contract_id else {})}
                for w in self.warnings
            ],
        }


def format_selector(sel: int) -> str:
    return f"0x{sel:08x}"


def dedupe(warnings: Iterable[Warning]) -> tuple[Warning, ...]:
    seen: dict[tuple[str, int], Warning] = {}
    for w in warnings:
        seen.setdefault(w.key, w)
    return tuple(seen.values())


def parse_report(doc: Mapping) -> WarningReport:
    if not isinstance(doc, Mapping):
        raise ReportSchemaError("report must be an object")
    tool = doc.get("tool_name")
    cid = doc.get("contract_id")
    if not isinstance(tool, str) or not tool:
        raise ReportSchemaError("missing tool_name")
    if not isinstance(cid, str) or not cid:
        raise ReportSchemaError("missing contract_id")
    raw = doc.get("warnings", [])
    if not isinstance(raw, list):
        raise ReportSchemaError("warnings must be a list")
    out = []
    for i, w in enumerate(raw):
        if not isinstance(w, Mapping):
            raise ReportSchemaError(f"warning {i} is not an object")
        sel = w.get("selector")
        if not isinstance(sel, str) or not _SELECTOR_RE.match(sel):
            raise ReportSchemaError(f"warning {i}: selector must be 4 bytes as 0x########, got {sel!r}")
        pc = w.get("pc")
        if pc is not None and (not isinstance(pc, int) or isinstance(pc, bool) or pc < 0):
            raise ReportSchemaError(f"warning {i}: pc must be a non-negative integer")
        kind = w.get("kind", "reentrancy")
        if not isinstance(kind, str):
            raise ReportSchemaError(f"warning {i}: kind must be a string")
        wcid = w.get("contract_id", cid)
        out.append(Warning(wcid, int(sel, 16), pc, kind))
    return WarningReport(tool, cid, dedupe(out))


def ingest_report(path: str | Path, bundles: Mapping[str, ContractBundle] | None = None) -> WarningReport:
    """Read one report document; validate selectors against ``bundles`` when given."""
    reports = ingest_reports(path, bundles)
    if len(reports) != 1:
        raise ReportSchemaError(f"{path}: expected one report document, found {len(reports)}")
    return reports[0]


def ingest_reports(path: str | Path, bundles: Mapping[str, ContractBundle] | None = None) -> list[WarningReport]:
    """Read a file holding one report document or a list of them."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ReportSchemaError(f"{path}: not valid JSON ({e})") from None
    docs = doc if isinstance(doc, list) else [doc]
    reports = [parse_report(d) for d in docs]
    if bundles is not None:
        for r in reports:
            validate_report(r, bundles)
    return reports


def validate_report(report: WarningReport, bundles: Mapping[str, ContractBundle]) -> None:
    for w in report.warnings:
        if w.contract_id not in bundles:
            raise ReportSchemaError(f"{report.tool_name}: unknown contract {w.contract_id!r}")
        entries = bundles[w.contract_id].cfg.function_entries
        if w.selector not in entries:
            raise ReportSchemaError(
                f"{report.tool_name}: selector {format_selector(w.selector)} is not a function of {w.contract_id}"
            )


@dataclass(frozen=True)
class DeclaredFunction:
    selector: int
    name: str
    state_vars: tuple[SlotRef, ...] = ()


@dataclass(frozen=True)
class ContractBundle:
    contract_id: str
    code: bytes
    address: int
    declared_functions: tuple[DeclaredFunction, ...] | None = None
    deployer: int | None = None
    initial_storage: tuple[tuple[int, int], ...] = ()

    @cached_property
    def instructions(self) -> list[Instruction]:
        return disassemble(self.code)

    @cached_property
    def by_pc(self) -> dict[int, Instruction]:
        return {i.pc: i for i in self.instructions}

    @cached_property
    def cfg(self) -> Cfg:
        return build_cfg(self.instructions)

    def function_name(self, sel: int) -> str:
        for f in self.declared_functions or ():
            if f.selector == sel:
                return f.name
        return format_selector(sel)


def default_address(contract_id: str) -> int:
    return int.from_bytes(keccak256(contract_id.encode())[-20:], "big")


def _int(value, what: str) -> int:
    if isinstance(value, bool):
        raise ValueError(f"{what}: expected integer")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        return int(value, 16) if value[:2].lower() == "0x" else int(value)
    raise ValueError(f"{what}: expected integer or hex string")


def parse_metadata(contract_id: str, meta: Mapping) -> dict:
    out: dict = {}
    if "address" in meta:
        addr = meta["address"]
        if not isinstance(addr, str) or not _ADDRESS_RE.match(addr):
            raise ValueError(f"address must be 0x followed by 40 hex digits, got {addr!r}")
        out["address"] = int(addr, 16)
    if "functions" in meta:
        funcs = []
        for f in meta["functions"]:
            sel = f.get("selector")
            if not isinstance(sel, str) or not _SELECTOR_RE.match(sel):
                raise ValueError(f"function selector must be 0x########, got {sel!r}")
            svars = tuple(SlotRef.from_json(v) for v in f.get("state_vars", []))
            funcs.append(DeclaredFunction(int(sel, 16), str(f.get("name", sel)), svars))
        out["declared_functions"] = tuple(funcs)
    if "deployer" in meta:
        out["deployer"] = _int(meta["deployer"], "deployer")
    if "storage" in meta:
        out["initial_storage"] = tuple(
            sorted((_int(k, "storage slot"), _int(v, "storage value")) for k, v in meta["storage"].items())
        )
    return out


def load_bundle(directory: str | Path) -> dict[str, ContractBundle]:
    """Load every ``<id>.hex`` / ``<id>.asm`` (plus optional ``<id>.json``) in a directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise LoadError(f"{directory}: not a directory")
    bundles: dict[str, ContractBundle] = {}
    by_address: dict[int, str] = {}
    for path in sorted(directory.iterdir()):
        if path.suffix not in (".hex", ".asm") or not path.is_file():
            continue
        cid = path.stem
        if cid in bundles:
            raise LoadError(f"{path}: contract {cid!r} defined twice")
        try:
            text = path.read_text()
            code = parse_hex(text) if path.suffix == ".hex" else assemble(text)
            disassemble(code)
        except (ValueError, AssemblyError, CodeSizeError) as e:
            raise LoadError(f"{path}: {e}") from None
        meta_path = path.with_suffix(".json")
        fields: dict = {}
        if meta_path.exists():
            try:
                fields = parse_metadata(cid, json.loads(meta_path.read_text()))
            except (ValueError, TypeError, AttributeError) as e:
                raise LoadError(f"{meta_path}: {e}") from None
        fields.setdefault("address", default_address(cid))
        addr = fields["address"]
        if addr in by_address:
            raise LoadError(f"{path}: address {addr:#042x} already used by {by_address[addr]!r}")
        by_address[addr] = cid
        bundles[cid] = ContractBundle(cid, code, **fields)
        try:
            bundles[cid].cfg
        except ValueError as e:
            raise LoadError(f"{path}: {e}") from None
    return bundles

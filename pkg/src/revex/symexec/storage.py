"""Global storage partitioned by contract, addressed through GOT keys."""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from revex.symexec.terms import MASK, SymWord


@dataclass(frozen=True)
class GotKey:
    """Location ``contract_id@slot`` in the global store."""

    contract_id: str
    slot: SymWord

    def __str__(self) -> str:
        from revex.symexec.terms import render

        return f"{self.contract_id}@{render(self.slot)}"


def canonical_slot(slot: SymWord) -> SymWord:
    # constructors already fold constants and order commutative operands
    return slot & MASK if isinstance(slot, int) else slot


class UnknownContract(KeyError):
    pass


class GlobalStore:
    """Persistent map ``contract_id -> {slot -> word}``.

    Writes return a new store; forks can share one instance safely.
    """

    __slots__ = ("_parts", "_contracts")

    def __init__(self, contracts: Iterable[str], parts: Mapping[str, Mapping] | None = None):
        self._contracts = frozenset(contracts)
        self._parts: dict[str, dict] = {c: dict(p) for c, p in (parts or {}).items()}

    @property
    def contracts(self) -> frozenset[str]:
        return self._contracts

    def _check(self, contract_id: str) -> None:
        if contract_id not in self._contracts:
            raise UnknownContract(contract_id)

    def read(self, key: GotKey) -> SymWord:
        self._check(key.contract_id)
        return self._parts.get(key.contract_id, {}).get(canonical_slot(key.slot), 0)

    def write(self, key: GotKey, word: SymWord) -> GlobalStore:
        self._check(key.contract_id)
        new = GlobalStore.__new__(GlobalStore)
        new._contracts = self._contracts
        new._parts = dict(self._parts)
        part = dict(self._parts.get(key.contract_id, {}))
        part[canonical_slot(key.slot)] = word
        new._parts[key.contract_id] = part
        return new

    def partition(self, contract_id: str) -> dict:
        self._check(contract_id)
        return dict(self._parts.get(contract_id, {}))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GlobalStore):
            return NotImplemented
        mine = {c: {k: v for k, v in p.items() if v != 0} for c, p in self._parts.items()}
        theirs = {c: {k: v for k, v in p.items() if v != 0} for c, p in other._parts.items()}
        return {c: p for c, p in mine.items() if p} == {c: p for c, p in theirs.items() if p}

    def __repr__(self) -> str:
        return f"GlobalStore({self._parts!r})"


def got_read(store: GlobalStore, key: GotKey) -> SymWord:
    return store.read(key)


def got_write(store: GlobalStore, key: GotKey, word: SymWord) -> GlobalStore:
    return store.write(key, word)

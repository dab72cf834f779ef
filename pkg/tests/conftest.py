from pathlib import Path

import pytest

from revex.evm import assemble
from revex.reports import ContractBundle, load_bundle

CORPUS = Path(__file__).resolve().parents[1] / "src" / "revex" / "corpus"


def make_bundle(cid: str, source: str, address: int, **kw) -> ContractBundle:
    return ContractBundle(cid, assemble(source), address, **kw)


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture(scope="session")
def bundles():
    return load_bundle(CORPUS / "contracts")


def corpus_warnings(bundles):
    from revex.reports import dedupe, ingest_reports

    reports = [r for p in sorted((CORPUS / "reports").glob("*.json")) for r in ingest_reports(p, bundles)]
    return dedupe(sorted(w for r in reports for w in r.warnings))


EXPECTED = {
    ("bank", "withdraw"): "confirmed",
    ("bank", "deposit"): "refuted",
    ("bitcash", "getTokenBal"): "refuted",
    ("cei_bank", "withdraw"): "refuted",
    ("collect1", "Collect"): "confirmed",
    ("collect2", "Collect"): "confirmed",
    ("collect3", "Collect"): "confirmed",
    ("log1", "AddMessage"): "refuted",
    ("mutex_bank", "withdraw"): "refuted",
    ("owner_wallet", "execute"): "refuted",
    ("static_reader", "getTokenBal"): "refuted",
}


def named(bundles, verdicts):
    return {(v.contract_id, bundles[v.contract_id].function_name(v.selector)): v for v in verdicts}


@pytest.fixture(scope="session")
def corpus_verdicts(bundles):
    """Verdicts for every corpus warning, with and without pruning."""
    from revex.verifier import VerifyConfig, verify

    ws = corpus_warnings(bundles)
    return {
        prune: named(bundles, verify(bundles, ws, VerifyConfig(timeout=60, prune=prune)))
        for prune in (True, False)
    }

import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# shared build caches keep cargo invocations incremental across the suite
os.environ.setdefault("RUSTPORT_TARGET_DIR", str(Path.home() / ".cache" / "rustport-target"))
os.environ.setdefault("RUSTPORT_PROBE_DIR", str(Path.home() / ".cache" / "rustport-probes"))

CORPUS_DIR = Path(__file__).parent / "corpus"
FIXTURES_DIR = Path(__file__).parent / "fixtures"


def corpus_path(name: str) -> Path:
    return CORPUS_DIR / name


def store_path(name: str) -> Path:
    return FIXTURES_DIR / "snapshots" / f"{name}.jsonl"


@pytest.fixture(scope="session")
def ledger_project():
    from rustport.fragments import parse_project

    return parse_project(corpus_path("ledger"))


@pytest.fixture(scope="session")
def ledger_graph(ledger_project):
    from rustport.depgraph import build_dependency_graph

    return build_dependency_graph(ledger_project)


@pytest.fixture(scope="session")
def ledger_snapshots():
    from rustport.snapshots import load_store

    return load_store(store_path("ledger"))


@pytest.fixture(scope="session")
def ledger_translations(ledger_project, ledger_graph):
    """Fallback translations of the whole ledger corpus, translated once."""
    from rustport.backend import Backend
    from rustport.depgraph import schedule_fragments
    from rustport.fallback import FallbackProvider
    from rustport.fragments import interface_methods
    from rustport.rules import GadgetRegistry
    from rustport.runlog import RunLog
    from rustport.translate import TranslateContext, translate_fragment

    ctx = TranslateContext(
        backend=Backend(FallbackProvider(ledger_project)),
        graph=ledger_graph,
        project=ledger_project,
        interface_sigs=interface_methods(ledger_project),
        registry=GadgetRegistry(),
        runlog=RunLog(),
    )
    translations = {}
    for group in schedule_fragments(ledger_project, ledger_graph):
        for frag in group:
            translations[frag.id] = translate_fragment(frag, ctx, translations)
    return ctx, translations


@pytest.fixture(scope="session")
def cargo():
    from rustport.assembler import cargo_available

    if not cargo_available():
        pytest.skip("cargo is not on PATH")
    return True

from __future__ import annotations

from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
SAMPLE_CORPUS = Path(__file__).parent.parent / "corpora" / "eternagram-sample" / "corpus.json"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def sample_corpus_path() -> Path:
    return SAMPLE_CORPUS


def pytest_runtest_logreport(report):
    """Print one PASS/FAIL line per acceptance criterion, survives capture."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    verdict = "PASS" if report.passed else "FAIL"
    print(f"\nACCEPTANCE {name}: {verdict}", flush=True)

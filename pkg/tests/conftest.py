"""Shared fixtures: a small trained annotator over the toy corpus."""

from __future__ import annotations

import dataclasses

import pytest

from seal.classify import ClassifierConfig, build_training_set, train_forest
from seal.pipeline import Annotator
from seal.toydata import generate_toy_corpus
from seal.train import ExtractorConfig, StaticSource, train_extractor


@dataclasses.dataclass(frozen=True)
class ToyBundle:
    annotator: Annotator
    docs: list
    table: object
    dev_f1: float


# ---------------------------------------------------------------------------
# Acceptance reporting: tests in test_acceptance.py record one verdict per
# criterion, and the terminal summary prints them whether or not output
# capture is active.
# ---------------------------------------------------------------------------

_acceptance_lines: list[str] = []


class AcceptanceRecorder:
    def ok(self, criterion: str, detail: str = "") -> None:
        self._line("PASS", criterion, detail)

    def fail(self, criterion: str, detail: str = "") -> None:
        self._line("FAIL", criterion, detail)
        pytest.fail(f"{criterion}: {detail}" if detail else criterion)

    def check(self, criterion: str, passed: bool, detail: str = "") -> None:
        if passed:
            self.ok(criterion, detail)
        else:
            self.fail(criterion, detail)

    def skip(self, criterion: str, reason: str) -> None:
        self._line("SKIP", criterion, reason)
        pytest.skip(reason)

    @staticmethod
    def _line(status: str, criterion: str, detail: str) -> None:
        line = f"{status:4s} {criterion}"
        if detail:
            line += f" [{detail}]"
        _acceptance_lines.append(line)


@pytest.fixture
def acceptance() -> AcceptanceRecorder:
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter) -> None:
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in _acceptance_lines:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def toy_bundle() -> ToyBundle:
    """Train a small extractor + forest once for pipeline/service tests."""
    docs, table = generate_toy_corpus(90, seed=3, dim=12)
    train, dev = docs[:70], docs[70:]
    config = ExtractorConfig(
        layer_output_sizes=(16, 8),
        learning_rate=1e-2,
        max_epochs=22,
        patience=22,
        batch_size=8,
        seed=42,
    )
    model, _ = train_extractor(train, dev, StaticSource(table), config)
    x, y = build_training_set(train, table)
    forest = train_forest(
        x, y, ClassifierConfig(n_trees=25, seed=7, features_per_split=6)
    )
    annotator = Annotator(model=model, forest=forest, extract_table=table)
    return ToyBundle(
        annotator=annotator, docs=docs, table=table, dev_f1=model.best_dev_f1
    )

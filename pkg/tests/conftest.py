from __future__ import annotations

import pytest

# Tests marked @pytest.mark.criterion("...") each certify one headline
# behavior; the summary prints one PASS/FAIL line per criterion.
_criteria: dict[str, bool] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): headline behavior this test certifies"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and report.when == "call":
        name = str(marker.args[0])
        _criteria[name] = report.passed and _criteria.get(name, True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    terminalreporter.section("criteria")
    for name, ok in _criteria.items():
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}")

from helpers import kb_row, write_jsonl
from lexqa.config import AppConfig
from lexqa.embedding import EmbedderRef, IndexingStrategy
from lexqa.gateway import Gateway, ModelRef
from lexqa.kb import load_kb
from lexqa.orchestrator import EngineConfig

SEED_ROWS = [
    kb_row(
        0,
        "合同无效的情形有哪些",
        "根据《民法典》第一百四十四条，无民事行为能力人实施的民事法律行为无效。依据第一百五十三条，违反法律、行政法规的强制性规定的民事法律行为无效。",
        "《民法典》第一百四十四条",
    ),
    kb_row(
        1,
        "劳动合同试用期最长多久",
        "根据《劳动合同法》第十九条，劳动合同期限三年以上固定期限和无固定期限的劳动合同，试用期不得超过六个月。",
        "《劳动合同法》第十九条",
    ),
    kb_row(
        2,
        "公司注册资本有什么要求",
        "根据《公司法》第二十六条，有限责任公司的注册资本为在公司登记机关登记的全体股东认缴的出资额。",
        "《公司法》第二十六条",
    ),
]


@pytest.fixture
def local_embedder() -> EmbedderRef:
    return EmbedderRef.local()


@pytest.fixture
def seed_kb(tmp_path):
    path = write_jsonl(tmp_path / "kb.jsonl", SEED_ROWS, header_comment="seed knowledge base")
    return load_kb(path)


@pytest.fixture
def mock_models():
    return {
        "rag": ModelRef.mock("rag-model"),
        "m1": ModelRef.mock("m1"),
        "m2": ModelRef.mock("m2"),
        "m3": ModelRef.mock("m3"),
        "judge": ModelRef.mock("judge"),
    }


@pytest.fixture
def engine_config(local_embedder, mock_models) -> EngineConfig:
    return EngineConfig(
        embedder=local_embedder,
        strategy=IndexingStrategy.QUESTION_ONLY,
        rag_model=mock_models["rag"],
        ensemble_models=[mock_models["m1"], mock_models["m2"], mock_models["m3"]],
        selector_model=mock_models["judge"],
    )


@pytest.fixture
def gateway() -> Gateway:
    return Gateway()


@pytest.fixture
def app_config(tmp_path, engine_config) -> AppConfig:
    write_jsonl(tmp_path / "kb.jsonl", SEED_ROWS, header_comment="seed knowledge base")
    return AppConfig(
        engine=engine_config,
        kb_path=tmp_path / "kb.jsonl",
        queue_path=tmp_path / "queue.jsonl",
        audit_path=tmp_path / "audit.jsonl",
        cache_path=tmp_path / "index.bin",
        trace_path=tmp_path / "traces.jsonl",
        eval_cache_dir=tmp_path / "eval_cache",
    )

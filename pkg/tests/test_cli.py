import json
import socket
import subprocess
import sys
import time
from pathlib import Path

import httpx
import pytest
from click.testing import CliRunner

from conftest import SEED_ROWS
from helpers import (
    ScriptBuilder,
    script_promotable_miss,
    script_rag_hit,
    scripted_models,
    write_config_dir,
    write_jsonl,
)
from lexqa.cli import main
from lexqa.embedding import EmbedderRef
from lexqa.kb import load_kb
from lexqa.retrieval import load_index_cache

QUERY_HIT = "合同无效的情形有哪些"
QUERY_MISS = "abcdefg hijk"
PROMOTABLE_ANSWER = "根据《公司法》第三十三条，股东有权查阅会计账簿。"


def _scripted_models():
    return scripted_models()


def _write_config(tmp_path: Path, models, **overrides) -> Path:
    return write_config_dir(tmp_path, models, SEED_ROWS, **overrides)


def _script_rag_hit(tmp_path: Path, models, reply="依据《民法典》，该合同无效。"):
    script_rag_hit(models, QUERY_HIT, load_kb(tmp_path / "kb.jsonl"), reply)


def _script_promotable_miss(models):
    script_promotable_miss(models, QUERY_MISS, PROMOTABLE_ANSWER)


@pytest.fixture
def runner():
    return CliRunner()


class TestKbBuild:
    def test_builds_cache(self, runner, tmp_path):
        write_jsonl(tmp_path / "kb.jsonl", SEED_ROWS)
        out = tmp_path / "index.bin"
        result = runner.invoke(
            main, ["kb", "build", "--kb", str(tmp_path / "kb.jsonl"), "--strategy", "q", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert "3 rows" in result.stdout
        assert "fingerprint:" in result.stdout
        index = load_index_cache(out, EmbedderRef.local().fingerprint)
        assert len(index) == 3

    def test_rebuild_is_byte_identical(self, runner, tmp_path):
        write_jsonl(tmp_path / "kb.jsonl", SEED_ROWS)
        args = ["kb", "build", "--kb", str(tmp_path / "kb.jsonl"), "--out", str(tmp_path / "a.bin")]
        assert runner.invoke(main, args).exit_code == 0
        first = (tmp_path / "a.bin").read_bytes()
        args[-1] = str(tmp_path / "b.bin")
        assert runner.invoke(main, args).exit_code == 0
        assert (tmp_path / "b.bin").read_bytes() == first

    def test_bad_kb_line_exits_1_with_json_error(self, runner, tmp_path):
        (tmp_path / "kb.jsonl").write_text('{"id": 0}\n', encoding="utf-8")
        result = runner.invoke(
            main, ["kb", "build", "--kb", str(tmp_path / "kb.jsonl"), "--out", str(tmp_path / "x.bin")]
        )
        assert result.exit_code == 1
        err = json.loads(result.stderr)
        assert {"code", "message", "detail"} <= err.keys()

    def test_unknown_strategy_exits_1(self, runner, tmp_path):
        write_jsonl(tmp_path / "kb.jsonl", SEED_ROWS)
        result = runner.invoke(
            main,
            ["kb", "build", "--kb", str(tmp_path / "kb.jsonl"), "--strategy", "zz", "--out", str(tmp_path / "x.bin")],
        )
        assert result.exit_code == 1
        assert json.loads(result.stderr)["code"] == "config_error"


class TestQuery:
    def test_human_output_on_hit(self, runner, tmp_path):
        models = _scripted_models()
        _write_config(tmp_path, models)  # writes kb.jsonl first
        _script_rag_hit(tmp_path, models)
        config = _write_config(tmp_path, models)
        result = runner.invoke(main, ["query", "--config", str(config), QUERY_HIT])
        assert result.exit_code == 0, result.output
        assert "path: rag" in result.stdout
        assert "best_score: 1.0000" in result.stdout
        assert "answer: 依据《民法典》，该合同无效。" in result.stdout

    def test_json_output_includes_trace(self, runner, tmp_path):
        models = _scripted_models()
        _write_config(tmp_path, models)
        _script_rag_hit(tmp_path, models)
        config = _write_config(tmp_path, models)
        result = runner.invoke(main, ["query", "--config", str(config), "--json", QUERY_HIT])
        assert result.exit_code == 0, result.output
        body = json.loads(result.stdout)
        assert body["path"] == "rag"
        assert body["enqueued_item_id"] is None
        assert any(step["step"] == "route" for step in body["trace"])
        # the trace was persisted under the printed id
        traces = (tmp_path / "traces.jsonl").read_text(encoding="utf-8")
        assert body["trace_id"] in traces

    def test_enqueue_message_on_promotable_miss(self, runner, tmp_path):
        models = _scripted_models()
        _script_promotable_miss(models)
        config = _write_config(tmp_path, models)
        result = runner.invoke(main, ["query", "--config", str(config), QUERY_MISS])
        assert result.exit_code == 0, result.output
        assert "path: ensemble" in result.stdout
        assert "enqueued for review as item 0" in result.stdout

    def test_provider_outage_exits_2(self, runner, tmp_path):
        models = _scripted_models()
        config = _write_config(
            tmp_path,
            models,
            rag_model={"id": "dead", "endpoint": "http://127.0.0.1:9", "model_name": "x", "timeout_s": 0.5},
            ensemble_models=[
                {"id": "dead2", "endpoint": "http://127.0.0.1:9", "model_name": "x", "timeout_s": 0.5}
            ],
        )
        result = runner.invoke(main, ["query", "--config", str(config), QUERY_HIT])
        assert result.exit_code == 2
        assert json.loads(result.stderr)["code"] == "all_providers_failed"

    def test_empty_question_exits_1(self, runner, tmp_path):
        config = _write_config(tmp_path, _scripted_models())
        result = runner.invoke(main, ["query", "--config", str(config), "   "])
        assert result.exit_code == 1
        assert json.loads(result.stderr)["code"] == "empty_text"


class TestEval:
    def _dataset(self, tmp_path: Path) -> Path:
        rows = [
            {"question": f"问题{i % 5}", "answer": f"参考答案{i % 5}引用《民法典》第{i % 5}条"}
            for i in range(10)
        ]
        return write_jsonl(tmp_path / "dataset.jsonl", rows)

    def _script_baseline(self, models, pairs):
        builder = ScriptBuilder()
        for question, reference in pairs:
            builder.baseline_reply(models["rag"], question, reference)
            builder.eval_judge(models["judge"], question, reference, reference, (1, 1, 1, 1, 1))

    def test_writes_report_and_summary(self, runner, tmp_path):
        from lexqa.evaluation import load_dataset, split_dataset

        dataset = self._dataset(tmp_path)
        pairs = load_dataset(dataset)
        _, validation = split_dataset(pairs, seed=0)[0]
        models = _scripted_models()
        self._script_baseline(models, [(p.question, p.reference_answer) for p in validation])
        config = _write_config(tmp_path, models)
        out = tmp_path / "report.json"
        result = runner.invoke(
            main,
            ["eval", "--config", str(config), "--dataset", str(dataset), "--variant", "baseline",
             "--fold", "0", "--seed", "0", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert "baseline" in result.stdout
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["variant"] == "baseline"
        assert report["fold"] == 0
        assert report["mean"]["f1"] == pytest.approx(1.0)

    def test_same_seed_reports_are_byte_identical(self, runner, tmp_path):
        from lexqa.evaluation import load_dataset, split_dataset

        dataset = self._dataset(tmp_path)
        pairs = load_dataset(dataset)
        _, validation = split_dataset(pairs, seed=0)[0]
        models = _scripted_models()
        self._script_baseline(models, [(p.question, p.reference_answer) for p in validation])
        config = _write_config(tmp_path, models)
        args = ["eval", "--config", str(config), "--dataset", str(dataset), "--variant", "baseline",
                "--fold", "0", "--seed", "0", "--out", str(tmp_path / "r1.json")]
        assert runner.invoke(main, args).exit_code == 0
        args[-1] = str(tmp_path / "r2.json")
        assert runner.invoke(main, args).exit_code == 0
        assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()

    def test_fold_out_of_range_rejected(self, runner, tmp_path):
        dataset = self._dataset(tmp_path)
        config = _write_config(tmp_path, _scripted_models())
        result = runner.invoke(
            main,
            ["eval", "--config", str(config), "--dataset", str(dataset), "--variant", "baseline",
             "--fold", "3", "--seed", "0", "--out", str(tmp_path / "r.json")],
        )
        assert result.exit_code != 0

    def test_tiny_dataset_exits_1(self, runner, tmp_path):
        rows = [{"question": f"问{i}", "answer": f"答{i}"} for i in range(4)]
        dataset = write_jsonl(tmp_path / "tiny.jsonl", rows)
        config = _write_config(tmp_path, _scripted_models())
        result = runner.invoke(
            main,
            ["eval", "--config", str(config), "--dataset", str(dataset), "--variant", "baseline",
             "--fold", "0", "--seed", "0", "--out", str(tmp_path / "r.json")],
        )
        assert result.exit_code == 1
        assert json.loads(result.stderr)["code"] == "dataset_too_small"


class TestReview:
    def _config_with_pending(self, runner, tmp_path) -> Path:
        models = _scripted_models()
        _script_promotable_miss(models)
        config = _write_config(tmp_path, models)
        result = runner.invoke(main, ["query", "--config", str(config), QUERY_MISS])
        assert result.exit_code == 0, result.output
        return config

    def test_list_table_and_json(self, runner, tmp_path):
        config = self._config_with_pending(runner, tmp_path)
        table = runner.invoke(main, ["review", "list", "--config", str(config)])
        assert table.exit_code == 0
        assert QUERY_MISS in table.stdout
        assert "0.950" in table.stdout
        as_json = runner.invoke(main, ["review", "list", "--config", str(config), "--json"])
        items = json.loads(as_json.stdout)
        assert len(items) == 1
        assert items[0]["item_id"] == 0
        assert items[0]["source"]["winner_model"] == "m1"

    def test_list_empty(self, runner, tmp_path):
        config = _write_config(tmp_path, _scripted_models())
        result = runner.invoke(main, ["review", "list", "--config", str(config)])
        assert result.exit_code == 0
        assert "no pending items" in result.stdout

    def test_approve_reports_new_entry(self, runner, tmp_path):
        config = self._config_with_pending(runner, tmp_path)
        result = runner.invoke(main, ["review", "approve", "--config", str(config), "--reviewer", "rev-cli", "0"])
        assert result.exit_code == 0, result.output
        assert "approved item 0 -> kb entry 3" in result.stdout
        assert len(load_kb(tmp_path / "kb.jsonl")) == 4
        after = runner.invoke(main, ["review", "list", "--config", str(config)])
        assert "no pending items" in after.stdout

    def test_reject_requires_reason(self, runner, tmp_path):
        config = self._config_with_pending(runner, tmp_path)
        result = runner.invoke(main, ["review", "reject", "--config", str(config), "0"])
        assert result.exit_code == 1
        assert json.loads(result.stderr)["code"] == "invalid_decision"
        # still pending
        assert QUERY_MISS in runner.invoke(main, ["review", "list", "--config", str(config)]).stdout

    def test_reject_with_reason(self, runner, tmp_path):
        config = self._config_with_pending(runner, tmp_path)
        result = runner.invoke(
            main, ["review", "reject", "--config", str(config), "--reason", "引用有误", "0"]
        )
        assert result.exit_code == 0, result.output
        assert "rejected item 0" in result.stdout
        assert len(load_kb(tmp_path / "kb.jsonl")) == 3

    def test_unknown_item_exits_1(self, runner, tmp_path):
        config = _write_config(tmp_path, _scripted_models())
        result = runner.invoke(main, ["review", "approve", "--config", str(config), "7"])
        assert result.exit_code == 1
        assert json.loads(result.stderr)["code"] == "item_not_found"


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def test_serve_answers_health_checks(tmp_path):
    models = _scripted_models()
    port = _free_port()
    config = _write_config(tmp_path, models, listen={"host": "127.0.0.1", "port": port})
    proc = subprocess.Popen(
        [sys.executable, "-m", "lexqa.cli", "serve", "--config", str(config)],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.PIPE,
    )
    try:
        deadline = time.monotonic() + 15
        body = None
        while time.monotonic() < deadline:
            if proc.poll() is not None:
                pytest.fail(f"server exited early: {proc.stderr.read().decode()}")
            try:
                body = httpx.get(f"http://127.0.0.1:{port}/v1/healthz", timeout=1.0).json()
                break
            except httpx.HTTPError:
                time.sleep(0.1)
        assert body is not None, "server never came up"
        assert body["status"] == "ok"
        assert body["kb_entries"] == 3
        hits = httpx.post(
            f"http://127.0.0.1:{port}/v1/kb/search", json={"question": QUERY_HIT, "k": 1}, timeout=5.0
        ).json()["hits"]
        assert hits[0]["question"] == QUERY_HIT
    finally:
        proc.terminate()
        proc.wait(timeout=10)

"""Evaluation: character-level metrics, an LLM judge metric, dataset
folding, and a runner that scores a system variant over one fold.

Metric conventions: every text is treated as a sequence of Unicode code
points, degenerate cases (empty strings, zero denominators) score 0
instead of raising, and reports carry no timestamps so the same inputs
always produce byte-identical report files.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, NamedTuple

from lexqa.embedding import embed_text, entry_text
from lexqa.errors import (
    AllProvidersFailed,
    DatasetTooSmall,
    EngineError,
    InvalidBeta,
    MalformedRecord,
    SelectorFailure,
)
from lexqa.gateway import Gateway, ModelRef
from lexqa.kb import KbCollection, KbEntry
from lexqa.orchestrator import (
    EngineConfig,
    build_baseline_prompt,
    build_rag_prompt,
    postprocess,
    route,
)
from lexqa.records import read_records
from lexqa.retrieval import (
    VectorIndex,
    build_index,
    load_index_cache,
    save_index_cache,
    search,
)
from lexqa.selection import WeightVector, final_score, parse_judge_reply
from lexqa.templates import Prompt, TemplateSet, default_templates, render

DEFAULT_BETA = 1.2
FOLD_COUNT = 3
_BLOCKS = 5  # five 20% blocks; folds validate on blocks 0..2, train on the rest


class EvalVariant(str, Enum):
    BASELINE = "baseline"
    RAG = "rag"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class QaPair:
    question: str
    reference_answer: str
    cause: str = ""
    candidate_answer: str | None = None


class F1Triple(NamedTuple):
    precision: float
    recall: float
    f1: float


class RougeL(NamedTuple):
    r: float
    p: float
    f: float


def char_f1(pred: str, ref: str) -> F1Triple:
    """Bag-of-characters F1: TP is the multiset overlap of the two texts."""
    tp = sum((Counter(pred) & Counter(ref)).values())
    precision = tp / len(pred) if pred else 0.0
    recall = tp / len(ref) if ref else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return F1Triple(precision, recall, f1)


def lcs_length(x: str, y: str) -> int:
    if not x or not y:
        return 0
    prev = [0] * (len(y) + 1)
    for cx in x:
        cur = [0]
        for j, cy in enumerate(y, start=1):
            cur.append(prev[j - 1] + 1 if cx == cy else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[len(y)]


def rouge_l(pred: str, ref: str, beta: float = DEFAULT_BETA) -> RougeL:
    """LCS recall against the reference, precision against the prediction,
    and their beta-weighted combination (beta > 1 biases toward recall)."""
    if beta <= 0:
        raise InvalidBeta(f"beta must be > 0: {beta}")
    lcs = lcs_length(ref, pred)
    r = lcs / len(ref) if ref else 0.0
    p = lcs / len(pred) if pred else 0.0
    denom = r + beta * beta * p
    f = (1 + beta * beta) * r * p / denom if denom else 0.0
    return RougeL(r, p, f)


def build_eval_judge_prompt(
    question: str,
    reference: str,
    candidate: str,
    templates: TemplateSet | None = None,
) -> Prompt:
    """Reference-aware judge prompt (the selection-time judge never sees one)."""
    templates = templates or default_templates()
    return Prompt(
        system=templates.text("eval_judge_system.txt"),
        user=render(
            templates.text("eval_judge_user.txt"),
            query=question,
            reference=reference,
            candidate=candidate,
        ),
    )


def judge_metric(
    pred: str,
    ref: str,
    question: str,
    judge: ModelRef,
    weights: WeightVector | None = None,
    gateway: Gateway | None = None,
    templates: TemplateSet | None = None,
) -> float:
    """Score `pred` against `ref` with one judge call; one retry on a bad reply."""
    weights = weights or WeightVector()
    gateway = gateway or Gateway()
    prompt = build_eval_judge_prompt(question, ref, pred, templates)
    last_reason = "no attempt"
    for _ in range(2):
        reply = gateway.generate(prompt, judge)
        if not reply.ok:
            last_reason = f"judge call failed: {reply.error.kind}"
            continue
        try:
            scores, _ = parse_judge_reply(reply.text)
        except ValueError as exc:
            last_reason = str(exc)
            continue
        return final_score(scores, weights)
    raise SelectorFailure(f"judge failed twice: {last_reason}")


def load_dataset(path: str | Path) -> list[QaPair]:
    """Read QA pairs from a line-delimited record file (keys: question,
    answer, cause, candidate_answer)."""
    pairs: list[QaPair] = []
    for lineno, obj in read_records(path):
        question = obj.get("question")
        answer = obj.get("answer")
        if not isinstance(question, str) or not question.strip():
            raise MalformedRecord(lineno, "question must be non-empty text")
        if not isinstance(answer, str) or not answer.strip():
            raise MalformedRecord(lineno, "answer must be non-empty text")
        candidate = obj.get("candidate_answer")
        if candidate is not None and not isinstance(candidate, str):
            raise MalformedRecord(lineno, "candidate_answer must be text")
        pairs.append(
            QaPair(
                question=question,
                reference_answer=answer,
                cause=str(obj.get("cause", "")),
                candidate_answer=candidate,
            )
        )
    return pairs


def split_dataset(pairs: list[QaPair], seed: int) -> list[tuple[list[QaPair], list[QaPair]]]:
    """Three (train, validation) folds from a seeded shuffle.

    The shuffled dataset is cut into five equal-share blocks; fold i
    validates on block i and trains on the other four, giving an 8:2
    split per fold with pairwise-disjoint validation sets.
    """
    n = len(pairs)
    if n < _BLOCKS:
        raise DatasetTooSmall(f"need at least {_BLOCKS} pairs, got {n}")
    indices = list(range(n))
    random.Random(seed).shuffle(indices)
    bounds = [n * i // _BLOCKS for i in range(_BLOCKS + 1)]
    folds: list[tuple[list[QaPair], list[QaPair]]] = []
    for i in range(FOLD_COUNT):
        val_idx = indices[bounds[i] : bounds[i + 1]]
        val_set = set(val_idx)
        train_idx = [j for j in indices if j not in val_set]
        folds.append(([pairs[j] for j in train_idx], [pairs[j] for j in val_idx]))
    return folds


@dataclass(frozen=True)
class MetricTriple:
    f1: float
    rouge_l: float
    judge: float


@dataclass
class ExampleResult:
    question: str
    reference: str
    answer: str | None = None
    path: str | None = None
    metrics: MetricTriple | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.metrics is None


@dataclass
class EvalReport:
    variant: str
    strategy: str
    models: dict[str, Any]
    fold: int
    seed: int
    split_scheme: str
    beta: float
    example_count: int
    failed_count: int
    per_example: list[ExampleResult]
    mean: MetricTriple

    def scored_count(self) -> int:
        return self.example_count - self.failed_count


_SPLIT_SCHEME = "seeded shuffle into five equal blocks; fold i validates on block i"


def _mean_metrics(results: list[ExampleResult]) -> MetricTriple:
    scored = [r.metrics for r in results if r.metrics is not None]
    if not scored:
        return MetricTriple(0.0, 0.0, 0.0)
    n = len(scored)
    return MetricTriple(
        f1=sum(m.f1 for m in scored) / n,
        rouge_l=sum(m.rouge_l for m in scored) / n,
        judge=sum(m.judge for m in scored) / n,
    )


def _train_collection(train: list[QaPair]) -> KbCollection:
    collection = KbCollection()
    for i, pair in enumerate(train):
        entry = KbEntry(
            id=i,
            question=pair.question,
            answer=pair.reference_answer,
            cause=pair.cause,
            candidate_answer=pair.candidate_answer,
        )
        collection.entries.append(entry)
        collection.by_id[entry.id] = entry
    return collection


def _fold_cache_key(collection: KbCollection, config: EngineConfig) -> str:
    hasher = hashlib.sha256()
    for entry in collection.entries:
        hasher.update(entry_text(entry, config.strategy).encode("utf-8"))
        hasher.update(b"\x1e")
    hasher.update(f"{config.strategy.value}|{config.embedder.fingerprint}".encode())
    return hasher.hexdigest()[:16]


def _fold_index(
    collection: KbCollection, config: EngineConfig, cache_dir: Path | None
) -> VectorIndex:
    """Build the fold's index, or reload it from the cache directory."""
    if cache_dir is None:
        return build_index(collection, config.strategy, config.embedder)
    cache_dir.mkdir(parents=True, exist_ok=True)
    cache_path = cache_dir / f"fold-{_fold_cache_key(collection, config)}.idx"
    if cache_path.exists():
        return load_index_cache(cache_path, expected_fingerprint=config.embedder.fingerprint)
    index = build_index(collection, config.strategy, config.embedder)
    save_index_cache(index, cache_path)
    return index


def _answer_baseline(
    query: str, config: EngineConfig, gateway: Gateway
) -> tuple[str, str]:
    prompt = build_baseline_prompt(query, config.template_set)
    result = gateway.generate(prompt, config.rag_model)
    if not result.ok:
        raise AllProvidersFailed(f"{result.error.kind}: {result.error.message}")
    return postprocess(result.text, config.max_answer_chars), "baseline"


def _answer_rag_only(
    query: str,
    index: VectorIndex,
    collection: KbCollection,
    config: EngineConfig,
    gateway: Gateway,
) -> tuple[str, str]:
    """Threshold routing with the single RAG model on both branches."""
    query_vec = embed_text(query, config.embedder)
    hits = search(index, query_vec, config.top_k)
    if hits and hits[0].score >= config.threshold:
        prompt = build_rag_prompt(query, hits, collection, config.template_set)
        path = "rag"
    else:
        prompt = build_baseline_prompt(query, config.template_set)
        path = "baseline"
    result = gateway.generate(prompt, config.rag_model)
    if not result.ok:
        raise AllProvidersFailed(f"{result.error.kind}: {result.error.message}")
    return postprocess(result.text, config.max_answer_chars), path


def run_eval(
    variant: EvalVariant,
    pairs: list[QaPair],
    fold: int,
    seed: int,
    config: EngineConfig,
    gateway: Gateway | None = None,
    judge_model: ModelRef | None = None,
    beta: float = DEFAULT_BETA,
    cache_dir: Path | None = None,
) -> EvalReport:
    """Answer every validation pair with the chosen system variant and
    score it with all three metrics. A provider or judge failure marks
    that example failed; failed examples are excluded from the means but
    stay in the report with their error."""
    if not 0 <= fold < FOLD_COUNT:
        raise ValueError(f"fold must be in [0,{FOLD_COUNT}): {fold}")
    gateway = gateway or Gateway()
    judge_model = judge_model or config.selector_model
    train, validation = split_dataset(pairs, seed)[fold]

    collection = _train_collection(train)
    index: VectorIndex | None = None
    if variant is not EvalVariant.BASELINE:
        index = _fold_index(collection, config, cache_dir)

    results: list[ExampleResult] = []
    for pair in validation:
        result = ExampleResult(question=pair.question, reference=pair.reference_answer)
        results.append(result)
        try:
            if variant is EvalVariant.BASELINE:
                answer, path = _answer_baseline(pair.question, config, gateway)
            elif variant is EvalVariant.RAG:
                answer, path = _answer_rag_only(pair.question, index, collection, config, gateway)
            else:
                outcome = route(pair.question, index, collection, config, gateway)
                answer, path = outcome.text, outcome.path_name
            result.answer, result.path = answer, path
            judge = judge_metric(
                answer,
                pair.reference_answer,
                pair.question,
                judge_model,
                weights=config.judge_weights,
                gateway=gateway,
                templates=config.template_set,
            )
            result.metrics = MetricTriple(
                f1=char_f1(answer, pair.reference_answer).f1,
                rouge_l=rouge_l(answer, pair.reference_answer, beta).f,
                judge=judge,
            )
        except EngineError as exc:
            result.error = f"{exc.code}: {exc}"

    failed = sum(1 for r in results if r.failed)
    return EvalReport(
        variant=variant.value,
        strategy=config.strategy.value,
        models={
            "rag_model": config.rag_model.id,
            "ensemble_models": [m.id for m in config.ensemble_models],
            "selector_model": config.selector_model.id,
            "judge_model": judge_model.id,
        },
        fold=fold,
        seed=seed,
        split_scheme=_SPLIT_SCHEME,
        beta=beta,
        example_count=len(results),
        failed_count=failed,
        per_example=results,
        mean=_mean_metrics(results),
    )


def report_to_dict(report: EvalReport) -> dict[str, Any]:
    return {
        "variant": report.variant,
        "strategy": report.strategy,
        "models": report.models,
        "fold": report.fold,
        "seed": report.seed,
        "split_scheme": report.split_scheme,
        "beta": report.beta,
        "example_count": report.example_count,
        "failed_count": report.failed_count,
        "mean": {"f1": report.mean.f1, "rouge_l": report.mean.rouge_l, "judge": report.mean.judge},
        "per_example": [
            {
                "question": r.question,
                "reference": r.reference,
                "answer": r.answer,
                "path": r.path,
                "metrics": None
                if r.metrics is None
                else {"f1": r.metrics.f1, "rouge_l": r.metrics.rouge_l, "judge": r.metrics.judge},
                "error": r.error,
            }
            for r in report.per_example
        ],
    }


def report_to_json(report: EvalReport) -> str:
    """Canonical serialization: sorted keys, no volatile fields, so equal
    reports are byte-identical."""
    return json.dumps(report_to_dict(report), ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def write_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(report_to_json(report), encoding="utf-8")


def render_summary(report: EvalReport) -> str:
    """Plain-text table row for human diffing across variants."""
    header = f"{'variant':<10} {'fold':>4} {'n':>4} {'failed':>6} {'F1':>8} {'ROUGE-L':>8} {'Judge':>8}"
    row = (
        f"{report.variant:<10} {report.fold:>4} {report.example_count:>4} "
        f"{report.failed_count:>6} {report.mean.f1:>8.4f} {report.mean.rouge_l:>8.4f} "
        f"{report.mean.judge:>8.4f}"
    )
    return header + "\n" + row

"""Query answering state machine.

embed query -> search KB -> threshold route -> RAG generation or ensemble
fallback -> post-process -> answer with a full step-by-step trace. The
trace is append-only and records every executed step, including the
threshold and best retrieval score behind the routing decision, so any
answer can be audited after the fact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from lexqa.embedding import EmbedderRef, IndexingStrategy, embed_text
from lexqa.errors import (
    EmptyText,
    EngineError,
    EmbeddingFailure,
    FingerprintMismatch,
    UnresolvableHit,
)
from lexqa.gateway import Gateway, ModelRef, prompt_key
from lexqa.kb import KbCollection, KbEntry
from lexqa.retrieval import RetrievalHit, VectorIndex, search
from lexqa.selection import (
    ScoredCandidate,
    WeightVector,
    judge_candidates,
    select_best,
)
from lexqa.templates import Prompt, TemplateSet, default_templates, render

SENTENCE_ENDINGS = "。！？.!?"
_FENCE_RE = re.compile(r"```.*?```", re.DOTALL)


@dataclass
class EngineConfig:
    embedder: EmbedderRef
    strategy: IndexingStrategy
    rag_model: ModelRef
    ensemble_models: list[ModelRef]
    selector_model: ModelRef
    judge_weights: WeightVector = field(default_factory=WeightVector)
    threshold: float = 0.6
    top_k: int = 3
    max_answer_chars: int = 280
    enqueue_threshold: float = 0.90
    templates: TemplateSet | None = None

    def validate(self) -> None:
        if not self.ensemble_models:
            raise ValueError("ensemble_models must be non-empty")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0,1]: {self.threshold}")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.max_answer_chars < 1:
            raise ValueError("max_answer_chars must be >= 1")
        self.judge_weights.validate()

    @property
    def template_set(self) -> TemplateSet:
        return self.templates or default_templates()


@dataclass(frozen=True)
class RagPath:
    hits: list[RetrievalHit]


@dataclass(frozen=True)
class EnsemblePath:
    candidates: list[ScoredCandidate]
    winner_model: str


@dataclass
class AnswerOutcome:
    text: str
    path: RagPath | EnsemblePath
    trace: list[dict[str, Any]]

    @property
    def path_name(self) -> str:
        return "rag" if isinstance(self.path, RagPath) else "ensemble"

    def best_score(self) -> float | None:
        for step in self.trace:
            if step["step"] == "route":
                return step["best_score"]
        return None

    def winner(self) -> ScoredCandidate | None:
        if isinstance(self.path, EnsemblePath):
            for cand in self.path.candidates:
                if cand.candidate.model_id == self.path.winner_model:
                    return cand
        return None


def postprocess(raw: str, max_chars: int) -> str:
    """Normalize a generated answer.

    1. strip fenced code blocks (``` ... ``` spans, non-greedy, multi-line)
    2. collapse every whitespace run to one space and trim the ends
    3. enforce the length cap: cut at the last sentence-ending punctuation
       at or before max_chars, or hard-cut when there is none
    """
    text = _FENCE_RE.sub("", raw)
    text = re.sub(r"\s+", " ", text).strip()
    if len(text) > max_chars:
        cut = text[:max_chars]
        boundary = max((cut.rfind(ch) for ch in SENTENCE_ENDINGS), default=-1)
        text = (cut[: boundary + 1] if boundary >= 0 else cut).rstrip()
    return text


def build_baseline_prompt(query: str, templates: TemplateSet | None = None) -> Prompt:
    """Fixed formal-style instruction; the user part is the bare query."""
    templates = templates or default_templates()
    return Prompt(
        system=templates.text("baseline_system.txt"),
        user=render(templates.text("baseline_user.txt"), query=query),
    )


def build_rag_prompt(
    query: str,
    hits: list[RetrievalHit],
    collection: KbCollection,
    templates: TemplateSet | None = None,
) -> Prompt:
    """Grounded prompt: query plus each retrieved entry, in hit (score) order."""
    templates = templates or default_templates()
    if not hits:
        raise ValueError("hits must be non-empty")
    blocks = []
    for hit in hits:
        entry = collection.get(hit.entry_id)
        if entry is None:
            raise UnresolvableHit(f"entry {hit.entry_id} not in collection")
        blocks.append(
            render(
                templates.text("rag_entry.txt"),
                question=entry.question,
                answer=entry.answer,
                cause=entry.cause,
            )
        )
    user = render(templates.text("rag_user.txt"), query=query, entries="\n".join(blocks))
    return Prompt(system=templates.text("rag_system.txt"), user=user)


def _resolve_hits(hits: list[RetrievalHit], collection: KbCollection) -> list[KbEntry]:
    return [e for e in (collection.get(h.entry_id) for h in hits) if e is not None]


def route(
    query: str,
    index: VectorIndex,
    collection: KbCollection,
    config: EngineConfig,
    gateway: Gateway,
) -> AnswerOutcome:
    """Answer one query, recording every step in the trace.

    The best retrieval score decides the path: >= threshold goes to RAG
    over the top-k entries, below (or an empty index) falls back to the
    ensemble. A RAG generation failure also falls through to the ensemble;
    that recovery is an engine extension and is flagged in the trace.
    """
    if not query.strip():
        raise EmptyText("query must be non-empty")
    if index.embedder_fingerprint != config.embedder.fingerprint:
        raise FingerprintMismatch(index.embedder_fingerprint, config.embedder.fingerprint)
    trace: list[dict[str, Any]] = []
    templates = config.template_set

    try:
        query_vec = embed_text(query, config.embedder)
    except EmptyText:
        raise
    except EngineError as exc:
        raise EmbeddingFailure(str(exc)) from exc
    trace.append({"step": "embed", "fingerprint": config.embedder.fingerprint, "dim": config.embedder.dim})

    hits = search(index, query_vec, config.top_k)
    trace.append(
        {
            "step": "search",
            "k": config.top_k,
            "hits": [{"entry_id": h.entry_id, "score": h.score} for h in hits],
            "note": None if hits else "no hits",
        }
    )

    best = hits[0].score if hits else None
    take_rag = best is not None and best >= config.threshold
    trace.append(
        {
            "step": "route",
            "threshold": config.threshold,
            "best_score": best,
            "path": "rag" if take_rag else "ensemble",
        }
    )

    context: list[KbEntry] | None = None
    if take_rag:
        prompt = build_rag_prompt(query, hits, collection, templates)
        result = gateway.generate(prompt, config.rag_model)
        trace.append(
            {
                "step": "generate",
                "mode": "rag",
                "model_id": result.model_id,
                "prompt_sha": prompt_key(prompt),
                "ok": result.ok,
                "raw_text": result.text,
                "error": result.error.kind if result.error else None,
            }
        )
        if result.ok:
            text = postprocess(result.text, config.max_answer_chars)
            trace.append(_postprocess_step(text, config.max_answer_chars))
            return AnswerOutcome(text=text, path=RagPath(hits=hits), trace=trace)
        # engine extension, not part of the published routing rule
        trace.append({"step": "rag_fallthrough", "reason": f"rag generation failed: {result.error.kind}"})
        context = _resolve_hits(hits, collection)

    prompt = build_baseline_prompt(query, templates)
    results = gateway.generate_parallel(prompt, config.ensemble_models)
    trace.append(
        {
            "step": "generate",
            "mode": "ensemble",
            "prompt_sha": prompt_key(prompt),
            "results": [
                {"model_id": r.model_id, "ok": r.ok, "raw_text": r.text, "error": r.error.kind if r.error else None}
                for r in results
            ],
        }
    )

    notes: list[str] = []
    scored = judge_candidates(
        query,
        results,
        config.selector_model,
        config.judge_weights,
        gateway=gateway,
        context=context,
        templates=templates,
        notes=notes,
    )
    winner = select_best(scored, model_order=[m.id for m in config.ensemble_models])
    trace.append(
        {
            "step": "selection",
            "scores": [
                {"model_id": s.candidate.model_id, "final": s.final, "dimensions": list(s.scores.as_tuple())}
                for s in scored
            ],
            "winner_model": winner.candidate.model_id,
            "notes": notes,
        }
    )

    text = postprocess(winner.candidate.text or "", config.max_answer_chars)
    trace.append(_postprocess_step(text, config.max_answer_chars))
    return AnswerOutcome(
        text=text,
        path=EnsemblePath(candidates=scored, winner_model=winner.candidate.model_id),
        trace=trace,
    )


def _postprocess_step(text: str, max_chars: int) -> dict[str, Any]:
    return {"step": "postprocess", "max_chars": max_chars, "chars": len(text), "empty": not text}

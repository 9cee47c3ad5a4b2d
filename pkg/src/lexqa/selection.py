"""Judge-based candidate scoring and weighted winner election.

Each candidate answer is scored independently on five dimensions
(correctness, legality, completeness, clarity, faithfulness), each in
[0,1]; the final score is the weighted sum. Correctness and legality carry
the highest weights, reflecting what matters most in judicial use.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from lexqa.errors import EmptyCandidateList, InvalidWeights, SelectorFailure
from lexqa.gateway import Gateway, GenerationResult, ModelRef
from lexqa.kb import KbEntry
from lexqa.templates import Prompt, TemplateSet, default_templates, render

DIMENSIONS = ("correctness", "legality", "completeness", "clarity", "faithfulness")
DEFAULT_WEIGHTS = (0.25, 0.25, 0.20, 0.15, 0.15)
_WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class JudgeScores:
    correctness: float
    legality: float
    completeness: float
    clarity: float
    faithfulness: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.correctness, self.legality, self.completeness, self.clarity, self.faithfulness)

    def validate(self) -> None:
        for name, value in zip(DIMENSIONS, self.as_tuple()):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} out of range: {value}")


@dataclass(frozen=True)
class WeightVector:
    w: tuple[float, float, float, float, float] = DEFAULT_WEIGHTS

    def validate(self) -> None:
        if len(self.w) != 5 or any(wi < 0 for wi in self.w):
            raise InvalidWeights(f"weights must be five non-negative reals: {self.w}")
        if abs(sum(self.w) - 1.0) > _WEIGHT_TOL:
            raise InvalidWeights(f"weights must sum to 1, got {sum(self.w)}")


@dataclass(frozen=True)
class ScoredCandidate:
    candidate: GenerationResult
    scores: JudgeScores
    final: float


def final_score(scores: JudgeScores, weights: WeightVector) -> float:
    """Weighted sum of the five dimension scores; in [0,1] for valid inputs."""
    weights.validate()
    return float(sum(w * s for w, s in zip(weights.w, scores.as_tuple())))


def build_judge_prompt(
    question: str,
    candidate_text: str,
    context: list[KbEntry] | None = None,
    templates: TemplateSet | None = None,
) -> Prompt:
    """The selector's view: question + one candidate (+ retrieved context when present)."""
    templates = templates or default_templates()
    entries = ""
    if context:
        blocks = [
            render(templates.text("rag_entry.txt"), question=e.question, answer=e.answer, cause=e.cause)
            for e in context
        ]
        entries = "\nRetrieved context:\n" + "\n".join(blocks)
    user = render(
        templates.text("selector_user.txt"),
        query=question,
        candidate=candidate_text,
        entries=entries,
    )
    return Prompt(system=templates.text("selector_system.txt"), user=user)


def parse_judge_reply(text: str) -> tuple[JudgeScores, list[str]]:
    """Parse the judge's structured reply; returns scores plus warnings.

    The reply must contain a JSON object with the five named numeric fields.
    Out-of-range values are clamped to [0,1] with a warning (the judge prompt
    mandates 0-1 but the model's native scale is not enforceable).
    """
    match = re.search(r"\{.*\}", text, flags=re.DOTALL)
    if not match:
        raise ValueError("no JSON object in judge reply")
    obj = json.loads(match.group(0))
    if not isinstance(obj, dict):
        raise ValueError("judge reply is not an object")
    values = []
    warnings = []
    for name in DIMENSIONS:
        if name not in obj:
            raise ValueError(f"missing dimension {name!r}")
        value = obj[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"dimension {name!r} is not numeric")
        value = float(value)
        if value < 0.0 or value > 1.0:
            warnings.append(f"{name} out of range ({value}); clamped")
            value = min(1.0, max(0.0, value))
        values.append(value)
    return JudgeScores(*values), warnings


def judge_candidates(
    question: str,
    candidates: list[GenerationResult],
    judge: ModelRef,
    weights: WeightVector,
    gateway: Gateway | None = None,
    context: list[KbEntry] | None = None,
    templates: TemplateSet | None = None,
    notes: list[str] | None = None,
) -> list[ScoredCandidate]:
    """Score every successful candidate independently.

    Error-bearing candidates are skipped. A judge reply that fails to parse
    is retried once; a second failure excludes that candidate (noted in
    `notes` when provided). Zero scored candidates is a SelectorFailure.
    """
    gateway = gateway or Gateway()
    scored: list[ScoredCandidate] = []
    for cand in candidates:
        if cand.text is None:
            continue
        prompt = build_judge_prompt(question, cand.text, context=context, templates=templates)
        scores = None
        for attempt in (1, 2):
            reply = gateway.generate(prompt, judge)
            if reply.text is None:
                if notes is not None:
                    notes.append(f"judge call failed for {cand.model_id} (attempt {attempt}): {reply.error.kind}")
                continue
            try:
                scores, warnings = parse_judge_reply(reply.text)
            except (ValueError, json.JSONDecodeError):
                if notes is not None:
                    notes.append(f"unparseable judge reply for {cand.model_id} (attempt {attempt})")
                continue
            for w in warnings:
                if notes is not None:
                    notes.append(f"judge reply for {cand.model_id}: {w}")
            break
        if scores is None:
            if notes is not None:
                notes.append(f"candidate from {cand.model_id} excluded after retry")
            continue
        scored.append(ScoredCandidate(candidate=cand, scores=scores, final=final_score(scores, weights)))
    if not scored:
        raise SelectorFailure("no candidate could be scored")
    return scored


def select_best(
    scored: list[ScoredCandidate], model_order: list[str] | None = None
) -> ScoredCandidate:
    """Argmax of final score; ties broken by model order, then by text.

    `model_order` defaults to list position, which equals the configured
    ensemble order when the list came from judge_candidates.
    """
    if not scored:
        raise EmptyCandidateList("no scored candidates")

    def rank(pos_item: tuple[int, ScoredCandidate]):
        pos, item = pos_item
        if model_order is not None and item.candidate.model_id in model_order:
            order = model_order.index(item.candidate.model_id)
        else:
            order = pos
        return (-item.final, order, item.candidate.text or "")

    return min(enumerate(scored), key=rank)[1]

"""Configuration file loading.

A single JSON document supplies everything the service and CLI need:
file locations, routing knobs, provider wiring, judge weights, and the
listen address. Relative paths are resolved against the directory that
contains the config file, so a config directory is relocatable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from lexqa.embedding import LOCAL_DIM, EmbedderRef, IndexingStrategy
from lexqa.errors import ConfigError, InvalidWeights
from lexqa.gateway import DEFAULT_TEMPERATURE, DEFAULT_TIMEOUT_S, ModelRef
from lexqa.orchestrator import EngineConfig
from lexqa.selection import WeightVector
from lexqa.templates import TemplateSet

STRATEGY_ALIASES = {
    "q": IndexingStrategy.QUESTION_ONLY,
    "qa": IndexingStrategy.QUESTION_PLUS_ANSWER,
    "qc": IndexingStrategy.QUESTION_PLUS_CANDIDATE,
}


def parse_strategy(value: str) -> IndexingStrategy:
    if value in STRATEGY_ALIASES:
        return STRATEGY_ALIASES[value]
    try:
        return IndexingStrategy(value)
    except ValueError:
        raise ConfigError(f"unknown strategy {value!r}") from None


@dataclass
class AppConfig:
    engine: EngineConfig
    kb_path: Path
    queue_path: Path
    audit_path: Path
    cache_path: Path | None = None
    trace_path: Path | None = None
    eval_cache_dir: Path | None = None
    listen_host: str = "127.0.0.1"
    listen_port: int = 8080


def _require(obj: dict[str, Any], key: str, where: str) -> Any:
    if key not in obj:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return obj[key]


def _load_script(path: Path) -> dict[str, str]:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read script file {path}: {exc}") from exc
    if not isinstance(raw, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
    ):
        raise ConfigError(f"script file {path} must map prompt keys to replies")
    return raw


def _model_from_dict(obj: Any, where: str, base: Path) -> ModelRef:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    model_id = str(_require(obj, "id", where))
    kind = str(obj.get("kind", "remote"))
    if kind == "mock":
        script: dict[str, str] = {}
        if "script_path" in obj:
            script = _load_script(base / str(obj["script_path"]))
        return ModelRef.mock(model_id, script=script)
    if kind == "remote":
        return ModelRef.remote(
            model_id,
            endpoint=str(_require(obj, "endpoint", where)),
            model_name=str(_require(obj, "model_name", where)),
            api_key_env=str(obj.get("api_key_env", "")),
            timeout_s=float(obj.get("timeout_s", DEFAULT_TIMEOUT_S)),
            temperature=float(obj.get("temperature", DEFAULT_TEMPERATURE)),
        )
    raise ConfigError(f"{where}: unknown model kind {kind!r}")


def _embedder_from_dict(obj: Any) -> EmbedderRef:
    if obj is None:
        return EmbedderRef.local()
    if not isinstance(obj, dict):
        raise ConfigError("embedder must be an object")
    kind = str(obj.get("kind", "local"))
    if kind == "local":
        return EmbedderRef.local(dim=int(obj.get("dim", LOCAL_DIM)))
    if kind == "remote":
        return EmbedderRef.remote(
            endpoint=str(_require(obj, "endpoint", "embedder")),
            model_name=str(_require(obj, "model_name", "embedder")),
            dim=int(_require(obj, "dim", "embedder")),
            api_key_env=str(obj.get("api_key_env", "")),
            timeout_s=float(obj.get("timeout_s", DEFAULT_TIMEOUT_S)),
        )
    raise ConfigError(f"unknown embedder kind {kind!r}")


def load_config(path: str | Path) -> AppConfig:
    """Parse and validate a config file; raises ConfigError with the offending key."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    base = path.parent

    def resolve(key: str, required: bool = False) -> Path | None:
        if key not in raw or raw[key] is None:
            if required:
                raise ConfigError(f"missing required key {key!r}")
            return None
        return base / str(raw[key])

    weights = WeightVector()
    if "judge_weights" in raw:
        values = raw["judge_weights"]
        if not isinstance(values, list):
            raise ConfigError("judge_weights must be a list of five numbers")
        weights = WeightVector(tuple(float(v) for v in values))

    templates = None
    templates_dir = resolve("templates_dir")
    if templates_dir is not None:
        templates = TemplateSet(templates_dir)

    ensemble_raw = _require(raw, "ensemble_models", "config")
    if not isinstance(ensemble_raw, list) or not ensemble_raw:
        raise ConfigError("ensemble_models must be a non-empty list")

    engine = EngineConfig(
        embedder=_embedder_from_dict(raw.get("embedder")),
        strategy=parse_strategy(str(raw.get("strategy", "question_only"))),
        rag_model=_model_from_dict(_require(raw, "rag_model", "config"), "rag_model", base),
        ensemble_models=[
            _model_from_dict(m, f"ensemble_models[{i}]", base) for i, m in enumerate(ensemble_raw)
        ],
        selector_model=_model_from_dict(
            _require(raw, "selector_model", "config"), "selector_model", base
        ),
        judge_weights=weights,
        threshold=float(raw.get("threshold", 0.6)),
        top_k=int(raw.get("top_k", 3)),
        max_answer_chars=int(raw.get("max_answer_chars", 280)),
        enqueue_threshold=float(raw.get("enqueue_threshold", 0.90)),
        templates=templates,
    )
    try:
        engine.validate()
    except (ValueError, InvalidWeights) as exc:
        raise ConfigError(str(exc)) from exc

    listen = raw.get("listen", {})
    if not isinstance(listen, dict):
        raise ConfigError("listen must be an object with host and port")

    return AppConfig(
        engine=engine,
        kb_path=resolve("kb_path", required=True),
        queue_path=resolve("queue_path", required=True),
        audit_path=resolve("audit_path", required=True),
        cache_path=resolve("cache_path"),
        trace_path=resolve("trace_path"),
        eval_cache_dir=resolve("eval_cache_dir"),
        listen_host=str(listen.get("host", "127.0.0.1")),
        listen_port=int(listen.get("port", 8080)),
    )

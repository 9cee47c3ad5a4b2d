"""Prompt templates: configuration-editable text files with placeholder substitution.

Defaults ship with the package; a deployment can override any of them by
pointing the config's templates_dir at a directory containing files with
the same names. Placeholders use {{name}} syntax and are replaced literally
(no escaping, no logic).
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

TEMPLATE_NAMES = (
    "rag_system.txt",
    "rag_user.txt",
    "rag_entry.txt",
    "baseline_system.txt",
    "baseline_user.txt",
    "selector_system.txt",
    "selector_user.txt",
    "eval_judge_system.txt",
    "eval_judge_user.txt",
)


@dataclass(frozen=True)
class Prompt:
    """A rendered prompt: system instructions plus the user message."""

    system: str
    user: str


def render(template: str, **values: str) -> str:
    out = template
    for name, value in values.items():
        out = out.replace("{{" + name + "}}", value)
    return out


class TemplateSet:
    """All prompt templates for one engine configuration."""

    def __init__(self, override_dir: str | Path | None = None):
        self._texts: dict[str, str] = {}
        override = Path(override_dir) if override_dir else None
        for name in TEMPLATE_NAMES:
            if override is not None and (override / name).exists():
                raw = (override / name).read_text(encoding="utf-8")
            else:
                raw = resources.files("lexqa.templates").joinpath(name).read_text(encoding="utf-8")
            # the file-final newline is an editor convention, not prompt text
            self._texts[name] = raw[:-1] if raw.endswith("\n") else raw

    def text(self, name: str) -> str:
        return self._texts[name]


_default: TemplateSet | None = None


def default_templates() -> TemplateSet:
    global _default
    if _default is None:
        _default = TemplateSet()
    return _default

"""Prompt templates for attribute and scene-graph generation."""

from __future__ import annotations

from collections.abc import Sequence
from functools import lru_cache
from importlib import resources

from ..core import Language


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files("codemie.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8").rstrip("\n")


def build_attribute_prompt(text: str, etype: str, attrs: Sequence[str], language: Language | str = Language.EN) -> str:
    """Instantiate the attribute-generation prompt for one entity type.

    Types without attributes (OTHER/MISC) must be skipped by the caller.
    """
    if not attrs:
        raise ValueError(f"entity type {etype!r} has no attributes to generate")
    lang = Language(language)
    template = load_template(f"attribute_{lang.value.lower()}")
    return template.format(text=text, etype=etype, attributes=", ".join(attrs))


def build_scene_graph_prompt(language: Language | str = Language.EN) -> str:
    return load_template(f"scene_graph_{Language(language).value.lower()}")

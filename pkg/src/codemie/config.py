"""Run configuration, loaded from YAML. API keys are never read from here."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .core import Language
from .knowledge.pipeline import GenerationSettings
from .parser import DEFAULT_HALLUCINATION_KINDS, DeviationKind

_SECRET_KEYS = {"api_key", "apikey", "token", "secret", "password"}


@dataclass(frozen=True)
class Config:
    endpoint: str = "http://localhost:8000/v1/chat/completions"
    text_model: str = "qwen3-max"
    vision_model: str = "qwen3-vl-235b"
    temperature: float = 0.7
    max_tokens: int = 2048
    max_concurrency: int = 4
    cache_dir: str = ".codemie-cache"
    language: Language = Language.EN
    hallucination_kinds: frozenset[DeviationKind] = field(default=DEFAULT_HALLUCINATION_KINDS)
    grounding_threshold: float = 0.5
    seed: int = 0
    vary_seed: bool = True
    strict: bool = False
    max_images: int = 32

    def __post_init__(self):
        object.__setattr__(self, "language", Language(self.language))
        object.__setattr__(
            self, "hallucination_kinds", frozenset(DeviationKind(k) for k in self.hallucination_kinds)
        )
        if not 0 < self.grounding_threshold < 1:
            raise ValueError("grounding_threshold must be in (0, 1)")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.max_images < 1:
            raise ValueError("max_images must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> Config:
        secrets = _SECRET_KEYS & {k.lower() for k in data}
        if secrets:
            raise ValueError(f"secrets do not belong in config files ({', '.join(sorted(secrets))}); use CODEMIE_API_KEY")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path | None) -> Config:
        if path is None:
            return cls()
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a mapping")
        return cls.from_dict(data)

    def with_seed(self, seed: int | None) -> Config:
        return self if seed is None else replace(self, seed=seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["language"] = self.language.value
        d["hallucination_kinds"] = sorted(k.value for k in self.hallucination_kinds)
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def generation(self) -> GenerationSettings:
        return GenerationSettings(
            text_model=self.text_model,
            vision_model=self.vision_model,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            seed=self.seed,
            vary_seed=self.vary_seed,
            max_concurrency=self.max_concurrency,
        )

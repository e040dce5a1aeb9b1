"""
Synthetic corpus and decoder simulation settings
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from app.models.treebank import UPOS_TAGS


class OutcomeSpec(BaseModel):
    """
    How a source dependent is realised in the target

    kind "o2o" places an aligned target word with the given relation and POS, optionally
    below an unaligned intermediate word attached with relation `via`. kind "null" leaves
    the source word unaligned. kind "other" aligns it to two target words.
    """
    kind: Literal["o2o", "null", "other"] = "o2o"
    deprel: Optional[str] = None
    upos: Optional[str] = None
    via: Optional[str] = None
    probability: float = Field(..., ge=0)


class PatternSpec(BaseModel):
    """A dependent of the root verb: its relation, POS, sampling weight and outcomes"""
    deprel: str
    upos: str
    weight: float = Field(..., ge=0)
    outcomes: List[OutcomeSpec] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _check(self) -> "PatternSpec":
        if self.upos not in UPOS_TAGS:
            raise ValueError(f"unknown UPOS {self.upos}")
        if sum(outcome.probability for outcome in self.outcomes) <= 0:
            raise ValueError(f"outcome probabilities of {self.deprel}~{self.upos} cannot be normalised")
        return self

    def outcome_probabilities(self) -> List[float]:
        total = sum(outcome.probability for outcome in self.outcomes)
        return [outcome.probability / total for outcome in self.outcomes]


class GeneratorSpec(BaseModel):
    """Parameters of a synthetic parallel treebank"""
    sentences: int = Field(..., ge=0)
    seed: int = Field(default=0, ge=0)
    patterns: List[PatternSpec] = Field(..., min_length=1)
    min_dependents: int = Field(default=1, ge=1)
    max_dependents: int = Field(default=3, ge=1)
    function_word_rate: float = Field(default=0.0, ge=0, le=1)

    @model_validator(mode="after")
    def _check(self) -> "GeneratorSpec":
        if self.max_dependents < self.min_dependents:
            raise ValueError("max_dependents is below min_dependents")
        if sum(pattern.weight for pattern in self.patterns) <= 0:
            raise ValueError("pattern weights cannot be normalised")
        return self

    def pattern_probabilities(self) -> List[float]:
        total = sum(pattern.weight for pattern in self.patterns)
        return [pattern.weight / total for pattern in self.patterns]


class DecoderBias(BaseModel):
    """How a simulated decoder picks outcomes from the reference conditional"""
    mode: Literal["faithful_sample", "argmax", "temperature", "top_p"] = "faithful_sample"
    temperature: float = Field(default=1.0, gt=0)
    top_p: float = Field(default=0.95, gt=0, le=1)
    seed: int = Field(default=0, ge=0)

    @property
    def name(self) -> str:
        if self.mode == "temperature":
            return f"temperature({self.temperature:g})"
        if self.mode == "top_p":
            return f"top_p({self.top_p:g})"
        return self.mode

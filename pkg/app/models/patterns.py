"""
Translation pattern records
Keys use tilde notation: "root~VERB~nsubj+xcomp", "VERB~nsubj~NOUN", "NOUN~nsubj|obj~NOUN"
"""

from enum import Enum
from typing import Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

LEAF = "leaf"
LONG_PATH = "long"
NULL_KEY = "NULL"
OTHER_KEY = "OTHER"


class PatternType(str, Enum):
    WORD = "word"
    ARC = "arc"


class WordPattern(BaseModel):
    """Parent relation, POS and the sorted multiset of child relations of one word"""
    model_config = ConfigDict(frozen=True)

    parent_deprel: str
    upos: str
    child_deprels: Tuple[str, ...] = ()

    @field_validator("child_deprels")
    @classmethod
    def _sort_children(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        return tuple(sorted(value))

    @property
    def key(self) -> str:
        children = "+".join(self.child_deprels) or LEAF
        return f"{self.parent_deprel}~{self.upos}~{children}"


class ArcPattern(BaseModel):
    """A source dependency arc: head POS, relation, tail POS"""
    model_config = ConfigDict(frozen=True)

    head_upos: str
    deprel: str
    tail_upos: str

    @property
    def key(self) -> str:
        return f"{self.head_upos}~{self.deprel}~{self.tail_upos}"


class TargetPathPattern(BaseModel):
    """
    Undirected target-tree path between the words aligned to an arc's head and tail

    The label sequence is stored as the smaller of itself and its reverse, so a path
    read from either end gets the same key. head_upos and tail_upos keep their roles.
    """
    model_config = ConfigDict(frozen=True)

    head_upos: str
    path: Tuple[str, ...] = Field(..., min_length=1)
    tail_upos: str

    @field_validator("path")
    @classmethod
    def _orient_path(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        return min(tuple(value), tuple(reversed(value)))

    @property
    def key(self) -> str:
        return f"{self.head_upos}~{'|'.join(self.path)}~{self.tail_upos}"

    def reversed(self) -> "TargetPathPattern":
        """The same path read from the tail end"""
        return TargetPathPattern(head_upos=self.tail_upos, path=tuple(reversed(self.path)), tail_upos=self.head_upos)

    def canonical_key(self) -> str:
        """Key with the endpoint roles dropped too; used for target inventories"""
        return min(self.key, self.reversed().key)

    def bucketed_key(self, long_path_threshold: Optional[int]) -> str:
        if long_path_threshold is not None and len(self.path) > long_path_threshold:
            return f"{self.head_upos}~{LONG_PATH}~{self.tail_upos}"
        return self.key

    @classmethod
    def from_key(cls, key: str) -> "TargetPathPattern":
        head, path, tail = key.split("~")
        return cls(head_upos=head, path=tuple(path.split("|")), tail_upos=tail)


SourcePattern = Union[WordPattern, ArcPattern]
TargetPattern = Union[WordPattern, TargetPathPattern]


class Outcome(str, Enum):
    CONVERGENT = "convergent"
    DIVERGENT = "divergent"
    NULL = "null"
    OTHER = "other"


class PatternOccurrence(BaseModel):
    """One source pattern instance and what it became in the target"""
    sentence_id: str
    ordinal: int = 0
    pattern_type: PatternType
    source_pattern: SourcePattern
    outcome: Outcome
    target_pattern: Optional[TargetPattern] = None
    source_indices: Tuple[int, ...]

    @property
    def source_key(self) -> str:
        return self.source_pattern.key

    @property
    def target_key(self) -> str:
        """Target pattern key, empty for NULL and OTHER outcomes"""
        return self.target_pattern.key if self.target_pattern is not None else ""

    def outcome_key(self, long_path_threshold: Optional[int] = None) -> str:
        """Key of the outcome inside a conditional distribution"""
        if self.outcome is Outcome.NULL:
            return NULL_KEY
        if self.outcome is Outcome.OTHER:
            return OTHER_KEY
        if isinstance(self.target_pattern, TargetPathPattern):
            return self.target_pattern.bucketed_key(long_path_threshold)
        return self.target_key

"""
Alignment records and the corpus-level alignment tally
"""

from enum import Enum
from typing import Dict, FrozenSet, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.treebank import DepTree


class AlignmentLink(BaseModel):
    """A source-target token link, 1-based on both sides"""
    model_config = ConfigDict(frozen=True)

    src: int = Field(..., ge=1)
    tgt: int = Field(..., ge=1)


class AlignmentCategory(str, Enum):
    O2O = "o2o"
    SRC2NULL = "src2null"
    NULL2TGT = "null2tgt"
    OTHER = "other"


class AlignedSentencePair(BaseModel):
    """Source and target trees of one sentence pair with their links and content masks"""
    ordinal: int = Field(..., ge=0)
    source: DepTree
    target: DepTree
    links: FrozenSet[AlignmentLink]
    src_content: FrozenSet[int]
    tgt_content: FrozenSet[int]

    @model_validator(mode="after")
    def _check_indices(self) -> "AlignedSentencePair":
        src_len, tgt_len = len(self.source), len(self.target)
        for link in self.links:
            if link.src > src_len or link.tgt > tgt_len:
                raise ValueError(f"link {link.src}-{link.tgt} outside sentence lengths ({src_len}, {tgt_len})")
        if any(i < 1 or i > src_len for i in self.src_content):
            raise ValueError("source content index outside the sentence")
        if any(i < 1 or i > tgt_len for i in self.tgt_content):
            raise ValueError("target content index outside the sentence")
        return self

    @property
    def sentence_id(self) -> str:
        return self.source.sentence_id


class CategoryMaps(BaseModel):
    """Alignment category of every content word on both sides"""
    source: Dict[int, AlignmentCategory]
    target: Dict[int, AlignmentCategory]
    content_links: FrozenSet[AlignmentLink]
    o2o: Dict[int, int] = Field(default_factory=dict)

    def o2o_target(self, src_index: int) -> Optional[int]:
        """Target word linked to an O2O source word"""
        return self.o2o.get(src_index)


def _empty_categories() -> Dict[str, int]:
    return {category.value: 0 for category in AlignmentCategory}


class AlignmentTally(BaseModel):
    """Mergeable corpus counts behind the category and content-word reports"""
    sentences: int = 0
    source_tokens: int = 0
    target_tokens: int = 0
    source_content: int = 0
    target_content: int = 0
    links: int = 0
    surviving_links: int = 0
    source_categories: Dict[str, int] = Field(default_factory=_empty_categories)
    target_categories: Dict[str, int] = Field(default_factory=_empty_categories)

    def add(self, pair: AlignedSentencePair, maps: CategoryMaps) -> None:
        self.sentences += 1
        self.source_tokens += len(pair.source)
        self.target_tokens += len(pair.target)
        self.source_content += len(pair.src_content)
        self.target_content += len(pair.tgt_content)
        self.links += len(pair.links)
        self.surviving_links += len(maps.content_links)
        for category in maps.source.values():
            self.source_categories[category.value] += 1
        for category in maps.target.values():
            self.target_categories[category.value] += 1

    def merge(self, other: "AlignmentTally") -> "AlignmentTally":
        """Entrywise sum; associative and commutative"""
        return AlignmentTally(
            sentences=self.sentences + other.sentences,
            source_tokens=self.source_tokens + other.source_tokens,
            target_tokens=self.target_tokens + other.target_tokens,
            source_content=self.source_content + other.source_content,
            target_content=self.target_content + other.target_content,
            links=self.links + other.links,
            surviving_links=self.surviving_links + other.surviving_links,
            source_categories={
                key: self.source_categories[key] + other.source_categories[key] for key in self.source_categories
            },
            target_categories={
                key: self.target_categories[key] + other.target_categories[key] for key in self.target_categories
            },
        )


class CategoryDistribution(BaseModel):
    """Category percentages relative to the number of source content words"""
    o2o: float
    src2null: float
    other: float
    null2tgt: float


class ContentWordStats(BaseModel):
    """Content-word and surviving-alignment counts; percentages are None on an empty corpus"""
    source_tokens: int
    source_content: int
    source_content_pct: Optional[float] = None
    target_tokens: int
    target_content: int
    target_content_pct: Optional[float] = None
    links: int
    surviving_links: int
    surviving_links_pct: Optional[float] = None

"""
Conditional pattern distribution: counts of target outcomes per source pattern
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from app.exceptions import PatternTypeError
from app.models.patterns import NULL_KEY, OTHER_KEY, PatternType

SENTINEL_KEYS = frozenset({NULL_KEY, OTHER_KEY})


class ConditionalPatternDistribution(BaseModel):
    """
    Outcome counts keyed by source pattern

    An outcome key equal to its source key is the convergent outcome. NULL and
    OTHER keys appear only in distributions built over all four outcome categories.
    """
    pattern_type: Optional[PatternType] = None
    scope: str = "o2o"
    counts: Dict[str, Dict[str, int]] = Field(default_factory=dict)

    def add(self, source_key: str, outcome_key: str, n: int = 1) -> None:
        outcomes = self.counts.setdefault(source_key, {})
        outcomes[outcome_key] = outcomes.get(outcome_key, 0) + n

    def merge(self, other: "ConditionalPatternDistribution") -> "ConditionalPatternDistribution":
        """Entrywise sum of two distributions of the same type and scope"""
        if self.pattern_type and other.pattern_type and self.pattern_type != other.pattern_type:
            raise PatternTypeError(f"Cannot merge {self.pattern_type.value} and {other.pattern_type.value} distributions")
        merged = ConditionalPatternDistribution(
            pattern_type=self.pattern_type or other.pattern_type,
            scope=self.scope,
            counts={source: dict(outcomes) for source, outcomes in self.counts.items()},
        )
        for source, outcomes in other.counts.items():
            for outcome, n in outcomes.items():
                merged.add(source, outcome, n)
        return merged

    def patterns(self) -> List[str]:
        return sorted(self.counts)

    def outcomes(self, source_key: str) -> Dict[str, int]:
        return self.counts.get(source_key, {})

    def pattern_total(self, source_key: str) -> int:
        return sum(self.counts.get(source_key, {}).values())

    def totals(self) -> Dict[str, int]:
        return {source: sum(outcomes.values()) for source, outcomes in self.counts.items()}

    @property
    def total(self) -> int:
        return sum(sum(outcomes.values()) for outcomes in self.counts.values())

    def conditional(self, source_key: str) -> Dict[str, float]:
        """Pr(q | p) over the observed outcomes of p"""
        outcomes = self.counts.get(source_key, {})
        total = sum(outcomes.values())
        if total == 0:
            return {}
        return {outcome: n / total for outcome, n in outcomes.items()}

    def convergent_count(self, source_key: str) -> int:
        return self.counts.get(source_key, {}).get(source_key, 0)

    def o2o_total(self, source_key: str) -> int:
        return sum(n for outcome, n in self.counts.get(source_key, {}).items() if outcome not in SENTINEL_KEYS)

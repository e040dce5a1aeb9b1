from typing import List, Optional

from pydantic import BaseModel, Field, model_validator


class OutcomeBreakdown(BaseModel):
    """Four-way outcome percentages of one source pattern"""
    pattern: str
    total: int
    o2o_conv: float
    o2o_div: float
    null: float
    others: float


class FrequencyBin(BaseModel):
    """One log10-frequency bin of per-pattern distances"""
    lower: float
    upper: float
    count: int
    mean: Optional[float] = None
    half_width: Optional[float] = None
    degenerate: bool = False


class BinnedSeries(BaseModel):
    frequency_source: str
    bins: List[FrequencyBin]


class PatternComparison(BaseModel):
    """Per-pattern difference between corpus A and corpus B"""
    pattern: str
    freq: int
    freq_b: int
    diversity_a: float
    diversity_b: Optional[float] = None
    diversity_rel_diff: Optional[float] = None
    convergence_a: Optional[float] = None
    convergence_b: Optional[float] = None
    convergence_abs_diff: Optional[float] = None
    wd: float


class QuadraticFit(BaseModel):
    a: float
    b: float
    c: float
    vertex: Optional[float] = None


class DensityCurve(BaseModel):
    """Sampled kernel density; point_mass is set instead of a curve for constant input"""
    x: List[float] = Field(default_factory=list)
    y: List[float] = Field(default_factory=list)
    bandwidth: Optional[float] = None
    point_mass: Optional[float] = None


class PatternInventory(BaseModel):
    distinct_source: int
    distinct_target: int


class AggregateSummary(BaseModel):
    """Corpus-level diversity and convergence of one pattern type"""
    occurrences: int
    patterns: int
    diversity: Optional[float] = None
    convergence_rate: Optional[float] = None
    divergence_rate: Optional[float] = None
    distinct_source: int
    distinct_target: int


class PatternProfile(BaseModel):
    pattern: str
    freq: int
    diversity: float
    convergence_rate: Optional[float] = None


class DivergenceGroupSpec(BaseModel):
    """Control and experiment sentences for one source pattern p and divergent target q"""
    source_pattern: str
    target_pattern: str
    control_ids: List[str]
    experiment_ids: List[str]

    @model_validator(mode="after")
    def _check_groups(self) -> "DivergenceGroupSpec":
        if self.source_pattern == self.target_pattern:
            raise ValueError("source and target pattern must differ")
        if set(self.control_ids) & set(self.experiment_ids):
            raise ValueError("control and experiment groups overlap")
        return self


class GroupQualityReport(BaseModel):
    spec: DivergenceGroupSpec
    metric: str
    control_score: float
    experiment_score: float
    delta: float
    control_size: int
    experiment_size: int

    @model_validator(mode="after")
    def _check_delta(self) -> "GroupQualityReport":
        if abs(self.delta - (self.experiment_score - self.control_score)) > 1e-9:
            raise ValueError("delta must equal experiment score minus control score")
        return self


class GroupRejection(BaseModel):
    source_pattern: str
    target_pattern: str
    control_size: int
    experiment_size: int
    reason: str


class CorrelationRow(BaseModel):
    """Correlation of one predictor with the quality deltas of one metric"""
    metric: str
    predictor: str
    n: int
    pearson_r: Optional[float] = None
    pearson_p: Optional[float] = None
    kendall_tau: Optional[float] = None
    kendall_p: Optional[float] = None
    note: str = ""


class DecoderSummary(BaseModel):
    decoder: str
    diversity: float
    convergence_rate: float

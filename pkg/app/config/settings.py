import hashlib
import json
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Literal, Optional

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from app.exceptions import UsageError

DEFAULT_CONTENT_DEPRELS = Path(__file__).parent / "content_deprels.txt"

# Fields that change analysis results. Paths, output location and parallelism do not.
ANALYSIS_FIELDS = (
    "patterns",
    "entropy_base",
    "min_pattern_freq",
    "min_group_size",
    "min_control_occurrences",
    "keep_fraction",
    "keep_lowest",
    "bin_width",
    "bin_edges",
    "frequency_source",
    "convergence_denominator",
    "strip_subtypes",
    "strict",
    "validate_upos",
    "include_all_children",
    "long_path_threshold",
    "metric",
    "bleu_tokenize",
    "bleu_smoothing",
    "arc_groups",
    "simulate",
    "temperature",
    "top_p",
    "seed",
)


class Settings(BaseSettings):
    """Run configuration read from a key=value config file and CLI flags"""

    model_config = SettingsConfigDict(
        env_file=None,
        case_sensitive=False,
        extra="ignore",
        populate_by_name=True,
    )

    # Corpus inputs
    src: Optional[Path] = Field(default=None, alias="SRC")
    tgt: Optional[Path] = Field(default=None, alias="TGT")
    align: Optional[Path] = Field(default=None, alias="ALIGN")
    other_src: Optional[Path] = Field(default=None, alias="OTHER_SRC")
    other_tgt: Optional[Path] = Field(default=None, alias="OTHER_TGT")
    other_align: Optional[Path] = Field(default=None, alias="OTHER_ALIGN")
    content_deprels: Optional[Path] = Field(default=None, alias="CONTENT_DEPRELS")

    # Quality inputs
    mt: Optional[Path] = Field(default=None, alias="MT")
    refs: Optional[Path] = Field(default=None, alias="REFS")
    scores: Optional[Path] = Field(default=None, alias="SCORES")
    filter_scores: Optional[Path] = Field(default=None, alias="FILTER_SCORES")
    train_src: Optional[Path] = Field(default=None, alias="TRAIN_SRC")
    train_tgt: Optional[Path] = Field(default=None, alias="TRAIN_TGT")
    train_align: Optional[Path] = Field(default=None, alias="TRAIN_ALIGN")

    # Parsing
    strip_subtypes: bool = Field(default=True, alias="STRIP_SUBTYPES")
    strict: bool = Field(default=False, alias="STRICT")
    validate_upos: bool = Field(default=True, alias="VALIDATE_UPOS")

    # Pattern extraction
    patterns: Literal["word", "arc", "both"] = Field(default="both", alias="PATTERNS")
    include_all_children: bool = Field(default=False, alias="INCLUDE_ALL_CHILDREN")
    long_path_threshold: Optional[int] = Field(default=None, gt=0, alias="LONG_PATH_THRESHOLD")

    # Metrics
    entropy_base: float = Field(default=2.0, gt=0, alias="ENTROPY_BASE")
    min_pattern_freq: int = Field(default=1000, gt=0, alias="MIN_PATTERN_FREQ")
    convergence_denominator: Literal["o2o", "all"] = Field(default="o2o", alias="CONVERGENCE_DENOMINATOR")
    bin_width: float = Field(default=0.5, gt=0, alias="BIN_WIDTH")
    bin_edges: Optional[List[float]] = Field(default=None, alias="BIN_EDGES")
    frequency_source: Literal["ht", "pooled"] = Field(default="ht", alias="FREQUENCY_SOURCE")

    # Quality study
    min_group_size: int = Field(default=100, gt=0, alias="MIN_GROUP_SIZE")
    min_control_occurrences: int = Field(default=1, gt=0, alias="MIN_CONTROL_OCCURRENCES")
    keep_fraction: float = Field(default=1.0, alias="KEEP_FRACTION")
    keep_lowest: bool = Field(default=True, alias="KEEP_LOWEST")
    metric: Literal["bleu", "external"] = Field(default="bleu", alias="METRIC")
    bleu_tokenize: Literal["none", "13a"] = Field(default="none", alias="BLEU_TOKENIZE")
    bleu_smoothing: bool = Field(default=False, alias="BLEU_SMOOTHING")
    arc_groups: bool = Field(default=False, alias="ARC_GROUPS")

    # Decoder simulation
    simulate: Optional[Literal["faithful_sample", "argmax", "temperature", "top_p"]] = Field(
        default=None, alias="SIMULATE"
    )
    temperature: float = Field(default=1.0, gt=0, alias="TEMPERATURE")
    top_p: float = Field(default=0.95, alias="TOP_P")

    # Run
    out: Path = Field(default=Path("reports"), alias="OUT")
    seed: int = Field(default=0, alias="SEED")
    workers: int = Field(default=1, gt=0, alias="WORKERS")
    shard_size: int = Field(default=2000, gt=0, alias="SHARD_SIZE")
    log_level: str = Field(default="INFO", alias="LOG_LEVEL")

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ):
        # Flags first, then the config file. The process environment is never read.
        return (init_settings, dotenv_settings)

    @field_validator("keep_fraction")
    @classmethod
    def _check_keep_fraction(cls, value: float) -> float:
        if not 0.0 < value <= 1.0:
            raise ValueError("keep_fraction must lie in (0, 1]")
        return value

    @field_validator("top_p")
    @classmethod
    def _check_top_p(cls, value: float) -> float:
        if not 0.0 < value <= 1.0:
            raise ValueError("top_p must lie in (0, 1]")
        return value

    @field_validator("entropy_base")
    @classmethod
    def _check_entropy_base(cls, value: float) -> float:
        if value == 1.0:
            raise ValueError("entropy_base must differ from 1")
        return value

    @field_validator("bin_edges")
    @classmethod
    def _check_bin_edges(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None:
            if len(value) < 2:
                raise ValueError("bin_edges needs at least two edges")
            if any(b <= a for a, b in zip(value, value[1:])):
                raise ValueError("bin_edges must be strictly increasing")
        return value

    @field_validator("log_level")
    @classmethod
    def _check_log_level(cls, value: str) -> str:
        level = value.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level {value}")
        return level

    @model_validator(mode="after")
    def _check_paired_paths(self) -> "Settings":
        groups = {
            "train": (self.train_src, self.train_tgt, self.train_align),
            "other": (self.other_src, self.other_tgt, self.other_align),
        }
        for name, paths in groups.items():
            if any(p is not None for p in paths) and any(p is None for p in paths):
                raise ValueError(f"{name}_src, {name}_tgt and {name}_align must be given together")
        return self

    def content_deprels_path(self) -> Path:
        """Path of the content-dependency label file in effect"""
        return self.content_deprels or DEFAULT_CONTENT_DEPRELS

    def pattern_types(self) -> List[str]:
        """Pattern types selected by the `patterns` key, in report order"""
        if self.patterns == "both":
            return ["word", "arc"]
        return [self.patterns]

    def config_hash(self, content_deprels: FrozenSet[str]) -> str:
        """
        Hash of every setting that influences analysis results

        Args:
            content_deprels: The content-dependency label set in effect

        Returns:
            Hex SHA-256 digest
        """
        payload: Dict[str, Any] = self.model_dump(include=set(ANALYSIS_FIELDS))
        payload["content_deprels"] = sorted(content_deprels)
        canonical = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_settings(config_path: Optional[Path] = None, **overrides: Any) -> Settings:
    """
    Build settings from an optional config file plus flag overrides

    Args:
        config_path: key=value config file; keys are the setting names, any case
        **overrides: Values given on the command line; None means "not given"

    Returns:
        Validated Settings
    """
    if config_path is not None and not Path(config_path).is_file():
        raise UsageError(f"Config file not found: {config_path}")
    given = {key: value for key, value in overrides.items() if value is not None}
    return Settings(_env_file=config_path, **given)

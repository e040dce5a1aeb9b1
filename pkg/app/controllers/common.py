"""
Shared controller plumbing
Error-to-exit-code mapping, input checks and the corpus job every command builds
"""

import functools
import logging
from argparse import Namespace
from pathlib import Path
from typing import Callable, FrozenSet, Optional

from pydantic import ValidationError

from app.config.settings import Settings
from app.exceptions import EXIT_OK, EXIT_USAGE, MorphDivError, UsageError
from app.models.patterns import PatternOccurrence
from app.models.treebank import ParseOptions
from app.services.alignment_service import alignment_service
from app.services.corpus_service import CorpusAnalysis, CorpusPaths, ShardJob, ShardResult, corpus_service
from app.services.quality_service import quality_service

# Configure logging
logger = logging.getLogger(__name__)

OCCURRENCE_COLUMNS = ["sentence_id", "pattern_type", "source_pattern", "outcome", "target_pattern"]

Command = Callable[[Settings, Namespace], None]


def command(func: Command) -> Callable[[Settings, Namespace], int]:
    """Run a command and turn its errors into an exit code"""
    @functools.wraps(func)
    def wrapper(settings: Settings, args: Optional[Namespace] = None) -> int:
        try:
            func(settings, args or Namespace())
            return EXIT_OK
        except MorphDivError as e:
            logger.error(f"{func.__name__}: {str(e)}")
            return e.exit_code
        except ValidationError as e:
            logger.error(f"{func.__name__}: invalid value: {str(e)}")
            return EXIT_USAGE
        except OSError as e:
            logger.error(f"{func.__name__}: {str(e)}")
            return EXIT_USAGE
    return wrapper


def require_files(settings: Settings, *fields: str) -> None:
    """Fail with a usage error when a required input is unset or missing"""
    for field in fields:
        path = getattr(settings, field)
        if path is None:
            raise UsageError(f"--{field.replace('_', '-')} is required")
        if not Path(path).is_file():
            raise UsageError(f"Input file not found: {path}")


def corpus_paths(settings: Settings, prefix: str = "") -> CorpusPaths:
    """Source, target and alignment paths; prefix "other_" or "train_" picks another corpus"""
    fields = [f"{prefix}src", f"{prefix}tgt", f"{prefix}align"]
    require_files(settings, *fields)
    return CorpusPaths(**{name: getattr(settings, field) for name, field in zip(("src", "tgt", "align"), fields)})


def load_content_deprels(settings: Settings) -> FrozenSet[str]:
    return alignment_service.load_content_deprels(settings.content_deprels_path())


def shard_job(settings: Settings, content_deprels: FrozenSet[str], filtered: bool = True, **extra) -> ShardJob:
    """
    The job every shard worker runs for this configuration

    Args:
        settings: Run settings
        content_deprels: Content-dependency labels
        filtered: Apply score-based filtering when filter_scores is set
        **extra: ShardJob overrides

    Returns:
        ShardJob
    """
    job = ShardJob(
        options=ParseOptions(
            strip_subtypes=settings.strip_subtypes,
            strict=settings.strict,
            validate_upos=settings.validate_upos,
        ),
        content_deprels=content_deprels,
        pattern_types=settings.pattern_types(),
        include_all_children=settings.include_all_children,
        long_path_threshold=settings.long_path_threshold,
        **extra,
    )
    if filtered and settings.filter_scores is not None:
        require_files(settings, "filter_scores", "src")
        scores = quality_service.ingest_external_scores(settings.filter_scores)
        # Ties at the cut go to the earlier sentence of the corpus
        ordered_ids = corpus_service.sentence_ids(Path(settings.src))
        kept = quality_service.filter_by_score(ordered_ids, scores, settings.keep_fraction, settings.keep_lowest)
        logger.info(f"Score filter keeps {len(kept)} of {len(ordered_ids)} sentences")
        job = job.model_copy(update={"scored_ids": frozenset(scores), "keep_ids": frozenset(kept)})
    return job


def analyze(settings: Settings, paths: CorpusPaths, job: ShardJob,
            sink: Optional[Callable[[ShardResult], None]] = None) -> CorpusAnalysis:
    return corpus_service.analyze(paths, job, shard_size=settings.shard_size, workers=settings.workers, sink=sink)


def occurrence_row(occurrence: PatternOccurrence) -> list:
    """Dump row; target_pattern is empty for NULL and OTHER outcomes"""
    return [
        occurrence.sentence_id,
        occurrence.pattern_type.value,
        occurrence.source_key,
        occurrence.outcome.value,
        occurrence.target_key,
    ]

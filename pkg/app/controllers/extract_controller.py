"""
Extract Controller for morphdiv
Dumps every pattern occurrence of a corpus, one TSV per pattern type
"""

import logging
from argparse import Namespace
from contextlib import ExitStack

from app.config.settings import Settings
from app.controllers.common import (
    OCCURRENCE_COLUMNS,
    analyze,
    command,
    corpus_paths,
    load_content_deprels,
    occurrence_row,
    shard_job,
)
from app.services.corpus_service import ShardResult
from app.services.report_service import TsvWriter

# Configure logging
logger = logging.getLogger(__name__)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("extract", parents=parents, help="Write pattern occurrences as TSV")
    parser.set_defaults(handler=run_extract)


@command
def run_extract(settings: Settings, args: Namespace) -> None:
    """Write occurrences.<type>.tsv in corpus order, streaming shard by shard"""
    paths = corpus_paths(settings)
    content = load_content_deprels(settings)
    config_hash = settings.config_hash(content)
    job = shard_job(settings, content, collect_occurrences=True)
    settings.out.mkdir(parents=True, exist_ok=True)

    with ExitStack() as stack:
        writers = {}
        for pattern_type in job.pattern_types:
            handle = stack.enter_context(
                open(settings.out / f"occurrences.{pattern_type}.tsv", "w", encoding="utf-8", newline="")
            )
            writers[pattern_type] = TsvWriter(handle, OCCURRENCE_COLUMNS, config_hash)

        def sink(result: ShardResult) -> None:
            for pattern_type, occurrences in result.occurrences.items():
                for occurrence in occurrences:
                    writers[pattern_type].write(occurrence_row(occurrence))

        analysis = analyze(settings, paths, job, sink=sink)

    for pattern_type, writer in writers.items():
        logger.info(f"Wrote {writer.rows} {pattern_type} occurrences from {analysis.kept} sentences")

"""
Stats Controller for morphdiv
Aggregate diversity, convergence and alignment statistics of one corpus
"""

import logging
from argparse import Namespace
from typing import Any, Dict

from app.config.settings import Settings
from app.controllers.common import analyze, command, corpus_paths, load_content_deprels, shard_job
from app.exceptions import StatisticsError
from app.services.alignment_service import alignment_service
from app.services.corpus_service import CorpusAnalysis
from app.services.report_service import report_service
from app.services.stats_service import stats_service

# Configure logging
logger = logging.getLogger(__name__)

PATTERN_COLUMNS = ["pattern", "freq", "diversity", "convergence_rate", "o2o_conv", "o2o_div", "null", "others"]


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("stats", parents=parents, help="Diversity and convergence of one corpus")
    parser.set_defaults(handler=run_stats)


def corpus_summary(analysis: CorpusAnalysis, settings: Settings) -> Dict[str, Any]:
    """The summary block shared by stats and compare"""
    summary: Dict[str, Any] = {
        "sentences": analysis.sentences,
        "kept_sentences": analysis.kept,
        "repaired_trees": analysis.repaired,
        "content_words": alignment_service.content_word_stats(analysis.tally),
    }
    try:
        summary["alignment_categories"] = alignment_service.category_distribution(analysis.tally)
    except StatisticsError as e:
        logger.warning(f"No alignment categories: {str(e)}")
        summary["alignment_categories"] = None
    for pattern_type in settings.pattern_types():
        summary[pattern_type] = {
            scope: stats_service.aggregate_summary(analysis.distribution(pattern_type, scope),
                                                   settings.entropy_base, denominator=scope)
            for scope in ("o2o", "all")
        }
    return summary


@command
def run_stats(settings: Settings, args: Namespace) -> None:
    """Write summary.json and patterns.<type>.tsv"""
    paths = corpus_paths(settings)
    content = load_content_deprels(settings)
    config_hash = settings.config_hash(content)
    analysis = analyze(settings, paths, shard_job(settings, content))

    report_service.write_json(settings.out / "summary.json", corpus_summary(analysis, settings), config_hash)

    for pattern_type in settings.pattern_types():
        scoped = analysis.distribution(pattern_type, settings.convergence_denominator)
        everything = analysis.distribution(pattern_type, "all")
        rows = []
        for profile in stats_service.pattern_profile(scoped, log_base=settings.entropy_base,
                                                     denominator=settings.convergence_denominator):
            breakdown = stats_service.outcome_breakdown(everything, profile.pattern)
            rows.append({**profile.model_dump(), **breakdown.model_dump(exclude={"pattern", "total"})})
        report_service.write_tsv(settings.out / f"patterns.{pattern_type}.tsv", PATTERN_COLUMNS, rows, config_hash)
        logger.info(f"{pattern_type}: {len(rows)} source patterns")

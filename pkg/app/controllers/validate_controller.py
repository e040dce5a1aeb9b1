"""
Validate Controller for morphdiv
Checks every tree and alignment line of a corpus and reports violations
"""

import logging
from argparse import Namespace
from collections import Counter

from app.config.settings import Settings
from app.controllers.common import analyze, command, corpus_paths, load_content_deprels, shard_job
from app.services.report_service import report_service

# Configure logging
logger = logging.getLogger(__name__)

VIOLATION_COLUMNS = ["sentence_id", "index", "rule", "detail"]


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("validate", parents=parents, help="Check trees and alignments for violations")
    parser.set_defaults(handler=run_validate)


@command
def run_validate(settings: Settings, args: Namespace) -> None:
    """
    Validate a parallel corpus

    Writes validation.tsv (one row per violation) and validation.json (counts per rule).
    Structural problems become violations; a sentence-count mismatch between the three
    files is a data error.
    """
    paths = corpus_paths(settings)
    content = load_content_deprels(settings)
    config_hash = settings.config_hash(content)
    analysis = analyze(settings, paths, shard_job(settings, content, filtered=False, validate_only=True))

    out = settings.out
    report_service.write_tsv(out / "validation.tsv", VIOLATION_COLUMNS, analysis.violations, config_hash)
    by_rule = Counter(violation.rule for violation in analysis.violations)
    report_service.write_json(out / "validation.json", {
        "sentences": analysis.sentences,
        "violations": len(analysis.violations),
        "by_rule": dict(sorted(by_rule.items())),
    }, config_hash)

    if analysis.violations:
        logger.warning(f"Found {len(analysis.violations)} violations in {analysis.sentences} sentences")
    else:
        logger.info(f"No violations in {analysis.sentences} sentences")

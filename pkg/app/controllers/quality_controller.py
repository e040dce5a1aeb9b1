"""
Quality Controller for morphdiv
Scores control and experiment groups for every observed divergence and relates
the quality deltas to training-corpus frequencies
"""

import logging
from argparse import Namespace
from collections import Counter
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from app.config.settings import Settings
from app.controllers.common import analyze, command, corpus_paths, load_content_deprels, require_files, shard_job
from app.exceptions import DataFormatError, GroupRejected, StatisticsError
from app.models.patterns import PatternOccurrence
from app.models.schemas import GroupQualityReport, GroupRejection
from app.services.corpus_service import ShardResult
from app.services.quality_service import quality_service
from app.services.report_service import report_service
from app.services.stats_service import stats_service

# Configure logging
logger = logging.getLogger(__name__)

GROUP_COLUMNS = [
    "pattern_type", "source_pattern", "target_pattern", "metric",
    "control_size", "experiment_size", "control_score", "experiment_score", "delta",
]
REJECTED_COLUMNS = ["pattern_type", "source_pattern", "target_pattern", "control_size", "experiment_size", "reason"]
KDE_COLUMNS = ["x", "density"]
CORRELATION_COLUMNS = ["pattern_type", "metric", "predictor", "n", "pearson_r", "pearson_p", "kendall_tau",
                       "kendall_p", "note"]


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser("quality", parents=parents, help="Quality deltas of divergence groups")
    parser.set_defaults(handler=run_quality)


def read_segments(path: Path, sentence_ids: List[str], label: str) -> Dict[str, str]:
    """One segment per line, paired with the corpus sentences by ordinal"""
    with open(path, encoding="utf-8") as handle:
        lines = [line.rstrip("\n") for line in handle]
    if len(lines) != len(sentence_ids):
        raise DataFormatError(
            f"{label} file {path} has {len(lines)} lines but the corpus has {len(sentence_ids)} sentences",
            line=min(len(lines), len(sentence_ids)) + 1,
        )
    return dict(zip(sentence_ids, lines))


def metrics_for(settings: Settings) -> List[str]:
    if settings.metric == "external":
        require_files(settings, "scores")
        return ["external"]
    require_files(settings, "mt", "refs")
    return ["bleu", "external"] if settings.scores is not None else ["bleu"]


@command
def run_quality(settings: Settings, args: Namespace) -> None:
    """Write groups.tsv, rejected.tsv, kde.<metric>.tsv, correlations.tsv and quality.json"""
    paths = corpus_paths(settings)
    metrics = metrics_for(settings)
    content = load_content_deprels(settings)
    config_hash = settings.config_hash(content)
    pattern_types = ["word", "arc"] if settings.arc_groups else ["word"]
    job = shard_job(settings, content, collect_occurrences=True, collect_ids=True)
    job = job.model_copy(update={"pattern_types": pattern_types})

    occurrences: Dict[str, List[PatternOccurrence]] = {t: [] for t in pattern_types}

    def sink(result: ShardResult) -> None:
        for pattern_type, found in result.occurrences.items():
            occurrences[pattern_type].extend(found)

    analysis = analyze(settings, paths, job, sink=sink)
    duplicates = [sid for sid, n in Counter(analysis.sentence_ids).items() if n > 1]
    if duplicates:
        raise DataFormatError("Sentence ids must be unique for quality groups", sentence=duplicates[0])

    mt_outputs = read_segments(settings.mt, analysis.sentence_ids, "MT") if settings.mt else {}
    references = read_segments(settings.refs, analysis.sentence_ids, "Reference") if settings.refs else {}
    scores = quality_service.ingest_external_scores(settings.scores) if settings.scores else None

    reports: Dict[str, List[GroupQualityReport]] = {t: [] for t in pattern_types}
    rejections: List[Dict[str, Any]] = []
    for pattern_type in pattern_types:
        index = quality_service.index_occurrences(occurrences[pattern_type])
        for source_pattern, target_pattern in quality_service.candidate_divergences(index):
            try:
                spec = quality_service.build_groups(index, source_pattern, target_pattern,
                                                    settings.min_group_size, settings.min_control_occurrences)
            except GroupRejected as e:
                logger.debug(str(e))
                rejections.append({"pattern_type": pattern_type, **GroupRejection(
                    source_pattern=e.source_pattern, target_pattern=e.target_pattern,
                    control_size=e.control_size, experiment_size=e.experiment_size, reason=e.reason,
                ).model_dump()})
                continue
            for metric in metrics:
                reports[pattern_type].append(quality_service.score_groups(
                    spec, mt_outputs, references, metric, scores, settings.bleu_smoothing, settings.bleu_tokenize,
                ))
    if rejections:
        logger.warning(f"Rejected {len(rejections)} divergences below {settings.min_group_size} sentences per group")

    out = settings.out
    group_rows = [
        {"pattern_type": pattern_type, "source_pattern": r.spec.source_pattern,
         "target_pattern": r.spec.target_pattern, **r.model_dump(exclude={"spec"})}
        for pattern_type in pattern_types for r in reports[pattern_type]
    ]
    report_service.write_tsv(out / "groups.tsv", GROUP_COLUMNS, group_rows, config_hash)
    report_service.write_tsv(out / "rejected.tsv", REJECTED_COLUMNS, rejections, config_hash)

    payload: Dict[str, Any] = {
        "sentences": analysis.sentences,
        "kept_sentences": analysis.kept,
        "accepted_groups": len(group_rows) // len(metrics),
        "rejected_groups": len(rejections),
        "metrics": {},
    }
    for metric in metrics:
        deltas = [row["delta"] for row in group_rows if row["metric"] == metric]
        block: Dict[str, Any] = {
            "groups": len(deltas),
            "mean_delta": float(np.mean(deltas)) if deltas else None,
            "negative_share": float(np.mean([d < 0 for d in deltas])) if deltas else None,
        }
        try:
            curve = stats_service.kde(deltas)
            block["bandwidth"] = curve.bandwidth
            block["point_mass"] = curve.point_mass
            report_service.write_tsv(out / f"kde.{metric}.tsv", KDE_COLUMNS, zip(curve.x, curve.y), config_hash)
        except StatisticsError as e:
            logger.warning(f"No density for {metric}: {str(e)}")
        payload["metrics"][metric] = block

    if settings.train_src is not None:
        training = analyze(settings, corpus_paths(settings, "train_"),
                           shard_job(settings, content, filtered=False).model_copy(update={"pattern_types": pattern_types}))
        rows = []
        for pattern_type in pattern_types:
            for row in quality_service.frequency_correlates(reports[pattern_type],
                                                            training.distribution(pattern_type, "o2o")):
                rows.append({"pattern_type": pattern_type, **row.model_dump()})
        report_service.write_tsv(out / "correlations.tsv", CORRELATION_COLUMNS, rows, config_hash)

    report_service.write_json(out / "quality.json", payload, config_hash)
    logger.info(f"Scored {payload['accepted_groups']} divergence groups")

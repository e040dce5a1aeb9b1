"""
Compare Controller for morphdiv
Per-pattern and aggregate differences between a reference corpus and a second corpus
or a simulated decoder
"""

import logging
from argparse import Namespace
from typing import Any, Dict

import numpy as np

from app.config.settings import Settings
from app.controllers.common import analyze, command, corpus_paths, load_content_deprels, shard_job
from app.exceptions import StatisticsError, UsageError
from app.models.distribution import ConditionalPatternDistribution
from app.models.synthetic import DecoderBias
from app.services.report_service import report_service
from app.services.stats_service import stats_service
from app.services.synthcorpus_service import synthcorpus_service

# Configure logging
logger = logging.getLogger(__name__)

COMPARE_COLUMNS = [
    "pattern", "freq", "freq_b", "diversity_a", "diversity_b", "diversity_rel_diff",
    "convergence_a", "convergence_b", "convergence_abs_diff", "wd",
]
BIN_COLUMNS = ["lower", "upper", "count", "mean", "half_width", "degenerate"]
SCOPES = ("o2o", "all")


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "compare", parents=parents,
        help="Compare corpus A with corpus B (--other-*) or with a simulated decoder (--simulate)",
    )
    parser.set_defaults(handler=run_compare)


def second_distributions(settings: Settings, content, reference) -> Dict[str, ConditionalPatternDistribution]:
    """Distributions of corpus B keyed "<type>:<scope>", read from disk or simulated from corpus A"""
    if settings.other_src is not None:
        other = analyze(settings, corpus_paths(settings, "other_"), shard_job(settings, content))
        return {f"{t}:{s}": other.distribution(t, s) for t in settings.pattern_types() for s in SCOPES}
    if settings.simulate is not None:
        bias = DecoderBias(mode=settings.simulate, temperature=settings.temperature,
                           top_p=settings.top_p, seed=settings.seed)
        logger.info(f"Simulating corpus B with decoder {bias.name}")
        return {
            f"{t}:{s}": synthcorpus_service.simulate_decoder(reference.distribution(t, s), bias)
            for t in settings.pattern_types() for s in SCOPES
        }
    raise UsageError("compare needs --other-src/--other-tgt/--other-align or --simulate")


def aggregate_delta(dist_a: ConditionalPatternDistribution, dist_b: ConditionalPatternDistribution,
                    settings: Settings) -> Dict[str, Any]:
    denominator = settings.convergence_denominator
    a = stats_service.aggregate_summary(dist_a, settings.entropy_base, denominator)
    b = stats_service.aggregate_summary(dist_b, settings.entropy_base, denominator)
    return {
        "a": a,
        "b": b,
        "diversity_change_pct": stats_service.relative_change(a.diversity, b.diversity),
        "convergence_change_pct": stats_service.relative_change(a.convergence_rate, b.convergence_rate),
    }


@command
def run_compare(settings: Settings, args: Namespace) -> None:
    """Write compare.<type>.tsv, wd_bins.<type>.tsv and compare.json"""
    content = load_content_deprels(settings)
    config_hash = settings.config_hash(content)
    reference = analyze(settings, corpus_paths(settings), shard_job(settings, content))
    others = second_distributions(settings, content, reference)
    denominator = settings.convergence_denominator

    payload: Dict[str, Any] = {"corpus_b": "other" if settings.other_src is not None else settings.simulate}
    for pattern_type in settings.pattern_types():
        dist_a = reference.distribution(pattern_type, denominator)
        dist_b = others[f"{pattern_type}:{denominator}"]
        records = stats_service.compare_corpora(dist_a, dist_b, settings.min_pattern_freq,
                                                settings.entropy_base, denominator)
        report_service.write_tsv(settings.out / f"compare.{pattern_type}.tsv", COMPARE_COLUMNS, records, config_hash)

        binned = stats_service.bin_wd_by_frequency(
            reference.distribution(pattern_type, "o2o"), others[f"{pattern_type}:o2o"],
            settings.bin_width, settings.bin_edges, settings.frequency_source,
        )
        report_service.write_tsv(settings.out / f"wd_bins.{pattern_type}.tsv", BIN_COLUMNS, binned.bins, config_hash)

        block: Dict[str, Any] = {"compared_patterns": len(records), "frequency_source": binned.frequency_source}
        if dist_a.total and dist_b.total:
            block.update(aggregate_delta(dist_a, dist_b, settings))
        else:
            logger.warning(f"{pattern_type}: one corpus has no occurrences; skipping aggregates")

        deltas = [(r.convergence_a, r.convergence_abs_diff) for r in records if r.convergence_abs_diff is not None]
        block["mean_wd"] = float(np.mean([r.wd for r in records])) if records else None
        block["mean_convergence_delta"] = float(np.mean([d for _, d in deltas])) if deltas else None
        try:
            block["convergence_delta_fit"] = stats_service.quadratic_fit([x for x, _ in deltas], [d for _, d in deltas])
        except StatisticsError as e:
            logger.warning(f"{pattern_type}: no quadratic fit: {str(e)}")
            block["convergence_delta_fit"] = None
        payload[pattern_type] = block
        logger.info(f"{pattern_type}: compared {len(records)} patterns with at least {settings.min_pattern_freq} occurrences")

    report_service.write_json(settings.out / "compare.json", payload, config_hash)

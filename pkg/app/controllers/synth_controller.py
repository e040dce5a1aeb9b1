"""
Synth Controller for morphdiv
Generates synthetic parallel treebanks and simulates biased decoders
"""

import logging
from argparse import Namespace
from pathlib import Path
from typing import Any, Dict, List

from app.config.settings import Settings
from app.controllers.common import analyze, command, corpus_paths, load_content_deprels, shard_job
from app.exceptions import StatisticsError, UsageError
from app.models.distribution import ConditionalPatternDistribution
from app.models.synthetic import DecoderBias, GeneratorSpec
from app.services.report_service import report_service
from app.services.stats_service import stats_service
from app.services.synthcorpus_service import synthcorpus_service

# Configure logging
logger = logging.getLogger(__name__)

DECODER_COLUMNS = ["pattern_type", "decoder", "diversity", "convergence_rate"]
DELTA_COLUMNS = ["pattern_type", "pattern", "ht_convergence", "mt_convergence", "delta"]
DECODER_MODES = ("faithful_sample", "argmax", "temperature", "top_p")


def register(subparsers, parents) -> None:
    generate = subparsers.add_parser("generate", parents=parents, help="Write a synthetic parallel treebank")
    generate.add_argument("--spec", type=str, required=True, help="Generator spec JSON (docs/generator_spec.md)")
    generate.set_defaults(handler=run_generate)

    simulate = subparsers.add_parser(
        "simulate", parents=parents,
        help="Decoder summaries and convergence deltas, from a corpus (--src...) or a synthetic rate sweep",
    )
    simulate.set_defaults(handler=run_simulate)


def load_generator_spec(path: Path) -> GeneratorSpec:
    if not path.is_file():
        raise UsageError(f"Generator spec not found: {path}")
    return GeneratorSpec.model_validate_json(path.read_text(encoding="utf-8"))


@command
def run_generate(settings: Settings, args: Namespace) -> None:
    """Write source.conllu, target.conllu and align.txt into the output directory"""
    spec = load_generator_spec(Path(args.spec))
    written = synthcorpus_service.write_parallel_corpus(spec, settings.out, workers=settings.workers)
    for name, path in sorted(written.items()):
        logger.info(f"{name}: {path}")


def reference_distributions(settings: Settings, content) -> Dict[str, ConditionalPatternDistribution]:
    """Per-type reference distributions from the configured corpus, or the synthetic sweep"""
    if settings.src is None:
        logger.info("No corpus given; simulating on the synthetic convergence-rate sweep")
        return {"word": synthcorpus_service.sweep_distribution()}
    analysis = analyze(settings, corpus_paths(settings), shard_job(settings, content))
    return {t: analysis.distribution(t, "o2o") for t in settings.pattern_types()}


@command
def run_simulate(settings: Settings, args: Namespace) -> None:
    """Write decoders.tsv, convergence_delta.tsv and simulate.json"""
    content = load_content_deprels(settings)
    config_hash = settings.config_hash(content)
    references = reference_distributions(settings, content)
    biases = [
        DecoderBias(mode=mode, temperature=settings.temperature, top_p=settings.top_p, seed=settings.seed)
        for mode in DECODER_MODES
    ]
    delta_bias = DecoderBias(mode=settings.simulate or "argmax", temperature=settings.temperature,
                             top_p=settings.top_p, seed=settings.seed)

    decoder_rows: List[Dict[str, Any]] = []
    delta_rows: List[Dict[str, Any]] = []
    payload: Dict[str, Any] = {"delta_decoder": delta_bias.name}
    for pattern_type, ht in references.items():
        if ht.total == 0:
            logger.warning(f"{pattern_type}: no o2o occurrences to simulate")
            continue
        for row in synthcorpus_service.compare_decoders(ht, biases, settings.entropy_base):
            decoder_rows.append({"pattern_type": pattern_type, **row.model_dump()})

        mt = synthcorpus_service.simulate_decoder(ht, delta_bias)
        xs, ys = [], []
        for pattern in ht.patterns():
            ht_rate = stats_service.convergence_rate(ht, pattern)
            mt_rate = stats_service.convergence_rate(mt, pattern)
            delta_rows.append({"pattern_type": pattern_type, "pattern": pattern, "ht_convergence": ht_rate,
                               "mt_convergence": mt_rate, "delta": mt_rate - ht_rate})
            xs.append(ht_rate)
            ys.append(mt_rate - ht_rate)
        try:
            payload[pattern_type] = {"convergence_delta_fit": stats_service.quadratic_fit(xs, ys)}
        except StatisticsError as e:
            logger.warning(f"{pattern_type}: no quadratic fit: {str(e)}")
            payload[pattern_type] = {"convergence_delta_fit": None}

    out = settings.out
    report_service.write_tsv(out / "decoders.tsv", DECODER_COLUMNS, decoder_rows, config_hash)
    report_service.write_tsv(out / "convergence_delta.tsv", DELTA_COLUMNS, delta_rows, config_hash)
    report_service.write_json(out / "simulate.json", payload, config_hash)

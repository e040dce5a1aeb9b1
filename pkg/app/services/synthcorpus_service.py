"""
Synthetic Corpus Service for morphdiv
Generates parallel treebanks with planted outcome distributions and
simulates decoders over conditional pattern distributions
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from app.models.distribution import ConditionalPatternDistribution
from app.models.patterns import PatternType
from app.models.schemas import DecoderSummary
from app.models.synthetic import DecoderBias, GeneratorSpec, OutcomeSpec
from app.models.treebank import DepTree, Token
from app.services.stats_service import stats_service
from app.services.treebank_service import treebank_service

# Configure logging
logger = logging.getLogger(__name__)

BLOCK_SIZE = 1000
VIA_UPOS = "NOUN"
SPLIT_DEPREL = "flat"
DRIFT_KEY = "DRIFT~drift~DRIFT"

SentenceTriple = Tuple[DepTree, DepTree, str]


class SyntheticCorpus(BaseModel):
    source: str
    target: str
    alignments: str


class SynthCorpusService:
    """Service for synthetic corpora and decoder simulation"""

    def iter_sentences(self, spec: GeneratorSpec, start: int = 0, stop: Optional[int] = None) -> Iterator[SentenceTriple]:
        """
        Generate sentence pairs with ordinals in [start, stop)

        Every block of BLOCK_SIZE sentences draws from its own generator seeded
        with (seed, block), so any split of the range gives the same sentences.

        Args:
            spec: Generator settings
            start: First ordinal
            stop: End ordinal, defaults to spec.sentences

        Yields:
            (source tree, target tree, Pharaoh line)
        """
        stop = spec.sentences if stop is None else min(stop, spec.sentences)
        if start >= stop:
            return
        pattern_probs = spec.pattern_probabilities()
        outcome_probs = [pattern.outcome_probabilities() for pattern in spec.patterns]
        for block in range(start // BLOCK_SIZE, (stop - 1) // BLOCK_SIZE + 1):
            rng = np.random.default_rng([spec.seed, block])
            first = block * BLOCK_SIZE
            for ordinal in range(first, min(first + BLOCK_SIZE, stop)):
                triple = self._sentence(spec, rng, ordinal, pattern_probs, outcome_probs)
                if ordinal >= start:
                    yield triple

    def gen_parallel_corpus(self, spec: GeneratorSpec) -> SyntheticCorpus:
        """Generate the whole corpus in memory as CoNLL-U and Pharaoh text"""
        return self._render(spec, 0, spec.sentences)

    def write_parallel_corpus(self, spec: GeneratorSpec, out_dir: Path, workers: int = 1) -> Dict[str, Path]:
        """
        Generate the corpus into source.conllu, target.conllu and align.txt

        Args:
            spec: Generator settings
            out_dir: Output directory
            workers: Worker processes; output does not depend on this

        Returns:
            Paths of the written files
        """
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "src": out_dir / "source.conllu",
            "tgt": out_dir / "target.conllu",
            "align": out_dir / "align.txt",
        }
        ranges = [
            (spec, start, min(start + 10 * BLOCK_SIZE, spec.sentences))
            for start in range(0, spec.sentences, 10 * BLOCK_SIZE)
        ]
        with open(paths["src"], "w", encoding="utf-8") as src, \
                open(paths["tgt"], "w", encoding="utf-8") as tgt, \
                open(paths["align"], "w", encoding="utf-8") as align:
            if workers > 1:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    chunks = pool.map(_render_range, ranges)
                    self._write_chunks(chunks, src, tgt, align)
            else:
                self._write_chunks(map(_render_range, ranges), src, tgt, align)
        logger.info(f"Generated {spec.sentences} sentence pairs into {out_dir}")
        return paths

    def simulate_decoder(self, ht_dist: ConditionalPatternDistribution, bias: DecoderBias) -> ConditionalPatternDistribution:
        """
        Re-draw every pattern's outcomes the way a decoder with the given bias would

        Each pattern keeps its reference total. faithful_sample draws from the reference
        conditional, argmax always emits the modal outcome (ties to the smaller key),
        temperature sharpens or flattens the conditional before drawing, top_p draws from
        the smallest set of most likely outcomes holding at least p of the mass.

        Args:
            ht_dist: Reference distribution
            bias: Decoder settings

        Returns:
            Simulated distribution with the same patterns and totals
        """
        rng = np.random.default_rng(bias.seed)
        mt = ConditionalPatternDistribution(pattern_type=ht_dist.pattern_type, scope=ht_dist.scope)
        for pattern in ht_dist.patterns():
            outcomes = sorted(ht_dist.outcomes(pattern).items())
            total = sum(n for _, n in outcomes)
            if total == 0:
                continue
            keys = [key for key, _ in outcomes]
            probs = np.array([n for _, n in outcomes], dtype=float) / total

            if bias.mode == "argmax":
                mode_index = max(range(len(keys)), key=lambda i: (outcomes[i][1], -i))
                mt.add(pattern, keys[mode_index], total)
                continue
            if bias.mode == "temperature":
                scaled = np.exp(np.log(probs) / bias.temperature)
                probs = scaled / scaled.sum()
            elif bias.mode == "top_p":
                probs = self._nucleus(keys, probs, bias.top_p)
            draws = rng.multinomial(total, probs)
            for key, n in zip(keys, draws):
                if n:
                    mt.add(pattern, key, int(n))
        return mt

    def compare_decoders(self, ht_dist: ConditionalPatternDistribution, biases: Sequence[DecoderBias],
                         log_base: float = 2.0) -> List[DecoderSummary]:
        """Aggregate diversity and convergence of the reference and of each simulated decoder"""
        rows = [DecoderSummary(
            decoder="ht",
            diversity=stats_service.aggregate_diversity(ht_dist, log_base),
            convergence_rate=stats_service.convergence_rate(ht_dist),
        )]
        for bias in biases:
            mt = self.simulate_decoder(ht_dist, bias)
            rows.append(DecoderSummary(
                decoder=bias.name,
                diversity=stats_service.aggregate_diversity(mt, log_base),
                convergence_rate=stats_service.convergence_rate(mt),
            ))
        return rows

    def sweep_distribution(self, rates: Optional[Sequence[float]] = None, fractions: Optional[Sequence[float]] = None,
                           total: int = 10000, minor_outcomes: int = 10) -> ConditionalPatternDistribution:
        """
        Reference distribution whose patterns span a grid of convergence rates

        A pattern with rate r and fraction f sends r of its mass to the convergent
        outcome, f(1 - r) to one main divergent outcome and spreads the rest over
        `minor_outcomes` minor divergent outcomes.

        Args:
            rates: Convergence rates, default 0.05 ... 0.95 in steps of 0.05
            fractions: Main-divergent fractions, default 0.1 ... 0.9
            total: Occurrences per pattern
            minor_outcomes: Number of minor divergent outcomes

        Returns:
            Word-based distribution
        """
        rates = np.linspace(0.05, 0.95, 19) if rates is None else np.asarray(rates, dtype=float)
        fractions = np.linspace(0.1, 0.9, 9) if fractions is None else np.asarray(fractions, dtype=float)
        dist = ConditionalPatternDistribution(pattern_type=PatternType.WORD, scope="o2o")
        for i, rate in enumerate(rates):
            for j, fraction in enumerate(fractions):
                pattern = f"r{i:02d}f{j:02d}~NOUN~leaf"
                convergent = int(round(rate * total))
                main = int(round(fraction * (1.0 - rate) * total))
                rest = total - convergent - main
                dist.add(pattern, pattern, convergent)
                if main:
                    dist.add(pattern, "main~NOUN~leaf", main)
                share, extra = divmod(rest, minor_outcomes)
                for m in range(minor_outcomes):
                    n = share + (1 if m < extra else 0)
                    if n:
                        dist.add(pattern, f"minor{m:02d}~NOUN~leaf", n)
        return dist

    def plant_frequency_drift(self, ht_dist: ConditionalPatternDistribution, strength: float = 1.0,
                              resolution: int = 1_000_000) -> ConditionalPatternDistribution:
        """
        Distribution that drifts from the reference more for rare patterns

        Pattern p with reference frequency n moves delta = min(1, strength / (1 + log10 n))
        of its mass to a fresh outcome, so its unit-cost distance from the reference is delta.

        Args:
            ht_dist: Reference distribution
            strength: Drift scale
            resolution: Occurrences per pattern in the output; frequencies are read from the reference

        Returns:
            Drifted distribution
        """
        drifted = ConditionalPatternDistribution(pattern_type=ht_dist.pattern_type, scope=ht_dist.scope)
        for pattern in ht_dist.patterns():
            n = ht_dist.pattern_total(pattern)
            if n == 0:
                continue
            delta = min(1.0, strength / (1.0 + math.log10(n)))
            kept = 0
            for outcome, count in sorted(ht_dist.outcomes(pattern).items()):
                scaled = int(round((1.0 - delta) * count / n * resolution))
                if scaled:
                    drifted.add(pattern, outcome, scaled)
                    kept += scaled
            if resolution - kept > 0:
                drifted.add(pattern, DRIFT_KEY, resolution - kept)
        return drifted

    def _render(self, spec: GeneratorSpec, start: int, stop: int) -> SyntheticCorpus:
        sources, targets, lines = [], [], []
        for source, target, line in self.iter_sentences(spec, start, stop):
            sources.append(source)
            targets.append(target)
            lines.append(line + "\n")
        return SyntheticCorpus(
            source=treebank_service.serialize_conllu(sources),
            target=treebank_service.serialize_conllu(targets),
            alignments="".join(lines),
        )

    @staticmethod
    def _write_chunks(chunks, src, tgt, align) -> None:
        for chunk in chunks:
            src.write(chunk.source)
            tgt.write(chunk.target)
            align.write(chunk.alignments)

    @staticmethod
    def _nucleus(keys: List[str], probs: np.ndarray, top_p: float) -> np.ndarray:
        order = sorted(range(len(keys)), key=lambda i: (-probs[i], keys[i]))
        kept = np.zeros_like(probs)
        cumulative = 0.0
        for i in order:
            kept[i] = probs[i]
            cumulative += probs[i]
            if cumulative >= top_p - 1e-12:
                break
        return kept / kept.sum()

    def _sentence(self, spec: GeneratorSpec, rng: np.random.Generator, ordinal: int,
                  pattern_probs: List[float], outcome_probs: List[List[float]]) -> SentenceTriple:
        sentence_id = f"syn{ordinal}"
        n_dependents = int(rng.integers(spec.min_dependents, spec.max_dependents + 1))
        choices = rng.choice(len(spec.patterns), size=n_dependents, p=pattern_probs)

        source: List[Token] = [Token(index=1, form="v", upos="VERB", head=0, deprel="root")]
        target: List[Token] = [Token(index=1, form="V", upos="VERB", head=0, deprel="root")]
        links: List[Tuple[int, int]] = [(1, 1)]

        def add(tokens: List[Token], form: str, upos: str, head: int, deprel: str) -> int:
            tokens.append(Token(index=len(tokens) + 1, form=form, upos=upos, head=head, deprel=deprel))
            return len(tokens)

        for choice in choices:
            pattern = spec.patterns[int(choice)]
            outcome: OutcomeSpec = pattern.outcomes[int(rng.choice(len(pattern.outcomes), p=outcome_probs[int(choice)]))]
            with_determiner = bool(rng.random() < spec.function_word_rate)

            src_index = add(source, f"s{int(choice)}", pattern.upos, 1, pattern.deprel)
            if with_determiner:
                src_det = add(source, "the", "DET", src_index, "det")

            if outcome.kind == "null":
                continue
            deprel = outcome.deprel or pattern.deprel
            upos = outcome.upos or pattern.upos
            head = 1
            if outcome.via:
                head = add(target, "via", VIA_UPOS, 1, outcome.via)
            tgt_index = add(target, f"t{int(choice)}", upos, head, deprel)
            links.append((src_index, tgt_index))
            if with_determiner:
                links.append((src_det, add(target, "le", "DET", tgt_index, "det")))
            if outcome.kind == "other":
                links.append((src_index, add(target, f"t{int(choice)}b", upos, tgt_index, SPLIT_DEPREL)))

        if rng.random() < spec.function_word_rate:
            links.append((add(source, ".", "PUNCT", 1, "punct"), add(target, ".", "PUNCT", 1, "punct")))

        metadata = {"sent_id": sentence_id}
        line = " ".join(f"{s - 1}-{t - 1}" for s, t in sorted(links))
        return (
            DepTree(sentence_id=sentence_id, tokens=source, metadata=dict(metadata)),
            DepTree(sentence_id=sentence_id, tokens=target, metadata=dict(metadata)),
            line,
        )


def _render_range(job: Tuple[GeneratorSpec, int, int]) -> SyntheticCorpus:
    spec, start, stop = job
    return synthcorpus_service._render(spec, start, stop)


# Global synthetic corpus service instance
synthcorpus_service = SynthCorpusService()

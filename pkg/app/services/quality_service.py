"""
Quality Service for morphdiv
Control/experiment groups per divergence, corpus BLEU, external scores,
frequency correlates and score-based corpus filtering
"""

import logging
import math
import re
from collections import Counter
from pathlib import Path
from typing import Callable, Dict, IO, Iterable, List, Mapping, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np

from app.exceptions import DataFormatError, GroupRejected, StatisticsError, UsageError
from app.models.distribution import ConditionalPatternDistribution
from app.models.patterns import Outcome, PatternOccurrence
from app.models.schemas import CorrelationRow, DivergenceGroupSpec, GroupQualityReport
from app.services.stats_service import stats_service

# Configure logging
logger = logging.getLogger(__name__)

MAX_ORDER = 4
PREDICTORS = ("abs_freq", "rel_freq", "log_abs", "log_rel")

T = TypeVar("T")
Segment = Union[str, Sequence[str]]
OccurrenceIndex = Dict[str, List[PatternOccurrence]]

# 13a rules as in mteval-v13a
_TOKENIZE_13A = (
    (re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])"), r" \1 "),
    (re.compile(r"([^0-9])([\.,])"), r"\1 \2 "),
    (re.compile(r"([\.,])([^0-9])"), r" \1 \2"),
    (re.compile(r"([0-9])(-)"), r"\1 \2 "),
)


class QualityService:
    """Service relating divergences to translation quality"""

    def index_occurrences(self, occurrences: Iterable[PatternOccurrence]) -> OccurrenceIndex:
        """Group occurrences by sentence id, keeping corpus order"""
        index: OccurrenceIndex = {}
        for occurrence in occurrences:
            index.setdefault(occurrence.sentence_id, []).append(occurrence)
        return index

    def candidate_divergences(self, index: OccurrenceIndex) -> List[Tuple[str, str]]:
        """Every (p, q) seen as a divergent outcome, sorted"""
        pairs = set()
        for occurrences in index.values():
            for occurrence in occurrences:
                if occurrence.outcome is Outcome.DIVERGENT:
                    pairs.add((occurrence.source_key, occurrence.target_key))
        return sorted(pairs)

    def build_groups(self, index: OccurrenceIndex, source_pattern: str, target_pattern: str,
                     min_size: int = 100, min_control_occurrences: int = 1) -> DivergenceGroupSpec:
        """
        Control and experiment sentences for the divergence p -> q

        Control sentences translate every occurrence of p convergently. Experiment
        sentences translate exactly one occurrence of p into q and the rest convergently.
        A NULL or OTHER outcome for p keeps a sentence out of both groups.

        Args:
            index: Occurrences grouped by sentence id
            source_pattern: Key of p
            target_pattern: Key of q
            min_size: Minimum size of each group
            min_control_occurrences: Minimum number of p occurrences in a control sentence

        Returns:
            DivergenceGroupSpec

        Raises:
            GroupRejected: When either group is smaller than min_size
        """
        if source_pattern == target_pattern:
            raise UsageError("A divergence needs a target pattern different from its source pattern")
        control, experiment = [], []
        for sentence_id, occurrences in index.items():
            outcomes = [o for o in occurrences if o.source_key == source_pattern]
            if not outcomes:
                continue
            convergent = sum(1 for o in outcomes if o.outcome is Outcome.CONVERGENT)
            if convergent == len(outcomes):
                if convergent >= min_control_occurrences:
                    control.append(sentence_id)
                continue
            divergent = [o for o in outcomes if o.outcome is Outcome.DIVERGENT]
            if (len(divergent) == 1 and divergent[0].target_key == target_pattern
                    and convergent == len(outcomes) - 1):
                experiment.append(sentence_id)

        if len(control) < min_size or len(experiment) < min_size:
            raise GroupRejected(source_pattern, target_pattern, len(control), len(experiment), min_size)
        return DivergenceGroupSpec(
            source_pattern=source_pattern,
            target_pattern=target_pattern,
            control_ids=control,
            experiment_ids=experiment,
        )

    @staticmethod
    def tokenize_13a(text: str) -> str:
        """mteval 13a tokenisation"""
        line = text.replace("<skipped>", "").replace("-\n", "").replace("\n", " ")
        if "&" in line:
            line = line.replace("&quot;", '"').replace("&amp;", "&").replace("&lt;", "<").replace("&gt;", ">")
        line = f" {line} "
        for pattern, replacement in _TOKENIZE_13A:
            line = pattern.sub(replacement, line)
        return " ".join(line.split())

    def corpus_bleu(self, hypotheses: Sequence[Segment], references: Sequence[Segment],
                    smoothing: bool = False, tokenize: str = "none") -> float:
        """
        Corpus BLEU with one reference per segment

        Args:
            hypotheses: Segments as strings or token lists
            references: Segments aligned with hypotheses
            smoothing: Exponential smoothing of zero-match orders
            tokenize: "none" splits on whitespace, "13a" applies the mteval tokenizer first

        Returns:
            Score in [0, 100]
        """
        if len(hypotheses) != len(references):
            raise StatisticsError(f"{len(hypotheses)} hypotheses but {len(references)} references")
        if not hypotheses:
            raise StatisticsError("BLEU of an empty corpus")

        matches = [0] * MAX_ORDER
        totals = [0] * MAX_ORDER
        hyp_length = ref_length = 0
        for hypothesis, reference in zip(hypotheses, references):
            hyp_tokens = self._tokens(hypothesis, tokenize)
            ref_tokens = self._tokens(reference, tokenize)
            hyp_length += len(hyp_tokens)
            ref_length += len(ref_tokens)
            for n in range(1, MAX_ORDER + 1):
                hyp_ngrams = self._ngrams(hyp_tokens, n)
                ref_ngrams = self._ngrams(ref_tokens, n)
                matches[n - 1] += sum(min(count, ref_ngrams[gram]) for gram, count in hyp_ngrams.items())
                totals[n - 1] += max(0, len(hyp_tokens) - n + 1)

        if hyp_length == 0:
            raise StatisticsError("All hypotheses are empty")

        log_precision = 0.0
        smooth = 1.0
        for n in range(MAX_ORDER):
            if matches[n] > 0:
                log_precision += math.log(matches[n] / totals[n])
            elif smoothing:
                smooth *= 2.0
                log_precision += math.log(1.0 / (smooth * max(totals[n], 1)))
            else:
                return 0.0
        brevity = math.exp(min(0.0, 1.0 - ref_length / hyp_length))
        return 100.0 * brevity * math.exp(log_precision / MAX_ORDER)

    def score_groups(self, spec: DivergenceGroupSpec, mt_outputs: Mapping[str, str],
                     references: Mapping[str, str], metric: str = "bleu",
                     scores: Optional[Mapping[str, float]] = None, smoothing: bool = False,
                     tokenize: str = "none") -> GroupQualityReport:
        """
        Score control and experiment groups separately

        Args:
            spec: Group definition
            mt_outputs: Sentence id -> MT output
            references: Sentence id -> reference
            metric: "bleu", or "external" for the mean of per-sentence scores
            scores: Sentence id -> external score
            smoothing: BLEU smoothing flag
            tokenize: BLEU tokenisation

        Returns:
            GroupQualityReport with delta = experiment - control
        """
        def group_score(ids: List[str]) -> float:
            if metric == "bleu":
                missing = [i for i in ids if i not in mt_outputs or i not in references]
                if missing:
                    raise DataFormatError(f"No MT output or reference for sentence {missing[0]}", sentence=missing[0])
                return self.corpus_bleu(
                    [mt_outputs[i] for i in ids], [references[i] for i in ids], smoothing, tokenize
                )
            if metric == "external":
                if scores is None:
                    raise UsageError("The external metric needs a score file")
                missing = [i for i in ids if i not in scores]
                if missing:
                    raise DataFormatError(f"No external score for sentence {missing[0]}", sentence=missing[0])
                return float(np.mean([scores[i] for i in ids]))
            raise UsageError(f"Unknown metric {metric!r}")

        control = group_score(spec.control_ids)
        experiment = group_score(spec.experiment_ids)
        return GroupQualityReport(
            spec=spec,
            metric=metric,
            control_score=control,
            experiment_score=experiment,
            delta=experiment - control,
            control_size=len(spec.control_ids),
            experiment_size=len(spec.experiment_ids),
        )

    def ingest_external_scores(self, source: Union[str, Path, IO[str]]) -> Dict[str, float]:
        """
        Read a (sentence_id, score) TSV; a header line is allowed

        Args:
            source: Path or open text stream

        Returns:
            Sentence id -> score
        """
        if isinstance(source, (str, Path)):
            with open(source, encoding="utf-8") as handle:
                return self._read_scores(handle)
        return self._read_scores(source)

    def frequency_correlates(self, reports: Sequence[GroupQualityReport],
                             training_dist: ConditionalPatternDistribution) -> List[CorrelationRow]:
        """
        Correlate quality deltas with training-corpus frequencies of each divergence

        Predictors: abs_freq = count(p -> q); rel_freq = count(p -> q) / count(p -> p);
        and the natural logs of both.

        Args:
            reports: Group reports, possibly for several metrics
            training_dist: Word-based distribution of the training corpus

        Returns:
            One row per metric and predictor with Pearson and Kendall statistics
        """
        rows = []
        for metric in sorted({report.metric for report in reports}):
            selected = [report for report in reports if report.metric == metric]
            for predictor in PREDICTORS:
                xs, ys, skipped = [], [], 0
                for report in selected:
                    value = self._predictor(report, training_dist, predictor)
                    if value is None:
                        skipped += 1
                        continue
                    xs.append(value)
                    ys.append(report.delta)
                if skipped:
                    logger.warning(f"{metric}/{predictor}: skipped {skipped} divergences with no convergent count")
                rows.append(self._correlation_row(metric, predictor, xs, ys, skipped))
        return rows

    def filter_by_score(self, items: Sequence[T], scores: Mapping[str, float], keep_fraction: float,
                        keep_lowest: bool = True, key: Callable[[T], str] = str) -> List[T]:
        """
        Keep the best-scoring fraction of items

        Args:
            items: Items in ordinal order
            scores: Score per item key
            keep_fraction: Fraction in (0, 1]; floor(keep_fraction * n) items are kept
            keep_lowest: Keep the lowest scores (distances) instead of the highest
            key: Maps an item to its score key

        Returns:
            Retained items in their original order; ties go to the earlier item
        """
        if not 0.0 < keep_fraction <= 1.0:
            raise UsageError("keep_fraction must lie in (0, 1]")
        values = []
        for item in items:
            item_key = key(item)
            if item_key not in scores:
                raise DataFormatError(f"No filter score for {item_key}", sentence=item_key)
            values.append(scores[item_key])
        keep = math.floor(keep_fraction * len(values))
        order = sorted(range(len(values)), key=lambda i: (values[i] if keep_lowest else -values[i], i))
        kept = sorted(order[:keep])
        return [items[i] for i in kept]

    @staticmethod
    def _tokens(segment: Segment, tokenize: str) -> List[str]:
        if not isinstance(segment, str):
            return list(segment)
        if tokenize == "13a":
            segment = QualityService.tokenize_13a(segment)
        elif tokenize != "none":
            raise UsageError(f"Unknown tokenizer {tokenize!r}")
        return segment.split()

    @staticmethod
    def _ngrams(tokens: List[str], n: int) -> Counter:
        return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))

    @staticmethod
    def _read_scores(handle: IO[str]) -> Dict[str, float]:
        scores: Dict[str, float] = {}
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 2:
                raise DataFormatError(f"Expected 2 tab-separated fields, found {len(fields)}", line=line_number)
            sentence_id, raw_score = fields[0].strip(), fields[1].strip()
            try:
                score = float(raw_score)
            except ValueError:
                if line_number == 1 and not scores:
                    continue  # header
                raise DataFormatError(f"Score {raw_score!r} is not a number", line=line_number)
            if sentence_id in scores:
                raise DataFormatError(f"Duplicate score for sentence {sentence_id}", line=line_number)
            scores[sentence_id] = score
        return scores

    @staticmethod
    def _predictor(report: GroupQualityReport, dist: ConditionalPatternDistribution, predictor: str) -> Optional[float]:
        p, q = report.spec.source_pattern, report.spec.target_pattern
        divergent = dist.outcomes(p).get(q, 0)
        if divergent == 0:
            raise StatisticsError(f"Divergence {p} -> {q} does not occur in the training distribution")
        if predictor == "abs_freq":
            return float(divergent)
        if predictor == "log_abs":
            return math.log(divergent)
        convergent = dist.convergent_count(p)
        if convergent == 0:
            return None
        ratio = divergent / convergent
        return ratio if predictor == "rel_freq" else math.log(ratio)

    @staticmethod
    def _correlation_row(metric: str, predictor: str, xs: List[float], ys: List[float], skipped: int) -> CorrelationRow:
        row = CorrelationRow(metric=metric, predictor=predictor, n=len(xs))
        notes = [f"skipped {skipped}"] if skipped else []
        try:
            row.pearson_r, row.pearson_p = stats_service.pearson(xs, ys)
        except StatisticsError as e:
            notes.append(f"pearson: {str(e)}")
        try:
            row.kendall_tau, row.kendall_p = stats_service.kendall_tau(xs, ys)
        except StatisticsError as e:
            notes.append(f"kendall: {str(e)}")
        row.note = "; ".join(notes)
        return row


# Global quality service instance
quality_service = QualityService()

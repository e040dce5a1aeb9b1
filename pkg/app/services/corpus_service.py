"""
Corpus Service for morphdiv
Streams parallel corpora in shards, analyses shards in worker processes
and merges the results in ordinal order
"""

import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from itertools import zip_longest
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterator, List, Optional

from conllu.parser import parse_comment_line
from pydantic import BaseModel, Field

from app.exceptions import DataFormatError, MorphDivError
from app.models.alignment import AlignmentTally
from app.models.distribution import ConditionalPatternDistribution
from app.models.patterns import PatternOccurrence, PatternType
from app.models.treebank import ParseOptions, Violation
from app.services.alignment_service import alignment_service
from app.services.pattern_service import PatternService
from app.services.treebank_service import treebank_service

# Configure logging
logger = logging.getLogger(__name__)

SCOPES = ("o2o", "all")


class CorpusPaths(BaseModel):
    src: Path
    tgt: Path
    align: Path


class Shard(BaseModel):
    """A run of consecutive sentence pairs, still as raw text"""
    start: int
    first_line: int
    src_text: str
    tgt_text: str
    align_lines: List[str]


class ShardJob(BaseModel):
    """What every shard worker does with its sentences"""
    options: ParseOptions = Field(default_factory=ParseOptions)
    content_deprels: FrozenSet[str]
    pattern_types: List[str] = Field(default_factory=lambda: ["word", "arc"])
    include_all_children: bool = False
    long_path_threshold: Optional[int] = None
    collect_occurrences: bool = False
    collect_ids: bool = False
    validate_only: bool = False
    scored_ids: Optional[FrozenSet[str]] = None
    keep_ids: Optional[FrozenSet[str]] = None


class ShardResult(BaseModel):
    start: int
    sentences: int = 0
    kept: int = 0
    repaired: int = 0
    tally: AlignmentTally = Field(default_factory=AlignmentTally)
    distributions: Dict[str, ConditionalPatternDistribution] = Field(default_factory=dict)
    occurrences: Dict[str, List[PatternOccurrence]] = Field(default_factory=dict)
    sentence_ids: List[str] = Field(default_factory=list)
    violations: List[Violation] = Field(default_factory=list)


class CorpusAnalysis(BaseModel):
    """Merged result over all shards"""
    sentences: int = 0
    kept: int = 0
    repaired: int = 0
    tally: AlignmentTally = Field(default_factory=AlignmentTally)
    distributions: Dict[str, ConditionalPatternDistribution] = Field(default_factory=dict)
    sentence_ids: List[str] = Field(default_factory=list)
    violations: List[Violation] = Field(default_factory=list)

    def distribution(self, pattern_type: str, scope: str = "o2o") -> ConditionalPatternDistribution:
        key = _distribution_key(pattern_type, scope)
        if key not in self.distributions:
            return ConditionalPatternDistribution(pattern_type=PatternType(pattern_type), scope=scope)
        return self.distributions[key]

    def absorb(self, result: ShardResult) -> None:
        self.sentences += result.sentences
        self.kept += result.kept
        self.repaired += result.repaired
        self.tally = self.tally.merge(result.tally)
        for key, dist in result.distributions.items():
            self.distributions[key] = self.distributions[key].merge(dist) if key in self.distributions else dist
        self.sentence_ids.extend(result.sentence_ids)
        self.violations.extend(result.violations)


class CorpusService:
    """Service for shard-parallel corpus analysis"""

    def iter_shards(self, paths: CorpusPaths, shard_size: int) -> Iterator[Shard]:
        """
        Pair source blocks, target blocks and alignment lines by ordinal

        Args:
            paths: Source CoNLL-U, target CoNLL-U and Pharaoh files
            shard_size: Sentence pairs per shard

        Yields:
            Shards in corpus order

        Raises:
            DataFormatError: When the three files hold different numbers of sentences
        """
        with open(paths.src, encoding="utf-8") as src, \
                open(paths.tgt, encoding="utf-8") as tgt, \
                open(paths.align, encoding="utf-8") as align:
            src_blocks = treebank_service.iter_sentence_blocks(src)
            tgt_blocks = treebank_service.iter_sentence_blocks(tgt)
            start = 0
            src_buffer: List[str] = []
            tgt_buffer: List[str] = []
            align_buffer: List[str] = []
            for ordinal, (src_block, tgt_block, align_line) in enumerate(zip_longest(src_blocks, tgt_blocks, align)):
                if src_block is None or tgt_block is None or align_line is None:
                    raise DataFormatError(
                        f"Corpus files disagree on sentence count: at ordinal {ordinal} "
                        f"source {'ended' if src_block is None else 'continues'}, "
                        f"target {'ended' if tgt_block is None else 'continues'}, "
                        f"alignments {'ended' if align_line is None else 'continue'}",
                        sentence=str(ordinal),
                        line=ordinal + 1,
                    )
                src_buffer.append(src_block)
                tgt_buffer.append(tgt_block)
                align_buffer.append(align_line.rstrip("\n"))
                if len(align_buffer) == shard_size:
                    yield Shard(start=start, first_line=start + 1, src_text="".join(src_buffer),
                                tgt_text="".join(tgt_buffer), align_lines=align_buffer)
                    start += len(align_buffer)
                    src_buffer, tgt_buffer, align_buffer = [], [], []
            if align_buffer:
                yield Shard(start=start, first_line=start + 1, src_text="".join(src_buffer),
                            tgt_text="".join(tgt_buffer), align_lines=align_buffer)

    def sentence_ids(self, path: Path) -> List[str]:
        """Sentence ids of a CoNLL-U file in ordinal order, read from comments only"""
        ids = []
        with open(path, encoding="utf-8") as handle:
            for ordinal, block in enumerate(treebank_service.iter_sentence_blocks(handle)):
                sentence_id = None
                for line in block.splitlines():
                    if not line.startswith("#"):
                        break
                    for key, value in parse_comment_line(line):
                        if key == "sent_id":
                            sentence_id = value
                ids.append(sentence_id or str(ordinal))
        return ids

    def analyze(self, paths: CorpusPaths, job: ShardJob, shard_size: int = 2000, workers: int = 1,
                sink: Optional[Callable[[ShardResult], None]] = None) -> CorpusAnalysis:
        """
        Run a job over a corpus and merge the shard results in order

        Args:
            paths: Corpus files
            job: Shard job
            shard_size: Sentence pairs per shard
            workers: Worker processes; 1 runs in-process
            sink: Receives each shard result in corpus order, e.g. to stream occurrences to disk

        Returns:
            CorpusAnalysis
        """
        analysis = CorpusAnalysis()
        for result in self._ordered_results(self.iter_shards(paths, shard_size), job, workers):
            if sink is not None:
                sink(result)
            result.occurrences = {}
            analysis.absorb(result)
            logger.debug(f"Merged shard starting at sentence {result.start}")
        logger.info(f"Analysed {analysis.sentences} sentence pairs from {paths.src.name}")
        return analysis

    def _ordered_results(self, shards: Iterator[Shard], job: ShardJob, workers: int) -> Iterator[ShardResult]:
        if workers <= 1:
            for shard in shards:
                yield run_shard(shard, job)
            return
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(job,)) as pool:
            pending = deque()
            for shard in shards:
                pending.append(pool.submit(_run_worker_shard, shard))
                if len(pending) >= 2 * workers:
                    yield pending.popleft().result()
            while pending:
                yield pending.popleft().result()


def run_shard(shard: Shard, job: ShardJob) -> ShardResult:
    """Parse and analyse one shard"""
    options = job.options
    if job.validate_only:
        options = options.model_copy(update={"check_structure": False, "validate_upos": False})
    sources = treebank_service.parse_conllu(shard.src_text, options, start_ordinal=shard.start)
    targets = treebank_service.parse_conllu(shard.tgt_text, options, start_ordinal=shard.start)
    result = ShardResult(start=shard.start, sentences=len(sources))
    if job.validate_only:
        _validate(shard, sources, targets, job, result)
        return result

    extractor = PatternService(include_all_children=job.include_all_children)
    for scope in SCOPES:
        for pattern_type in job.pattern_types:
            result.distributions[_distribution_key(pattern_type, scope)] = ConditionalPatternDistribution(
                pattern_type=PatternType(pattern_type), scope=scope
            )
    if job.collect_occurrences:
        result.occurrences = {pattern_type: [] for pattern_type in job.pattern_types}

    for offset, (source, target, line) in enumerate(zip(sources, targets, shard.align_lines)):
        ordinal = shard.start + offset
        result.repaired += len(source.warnings) + len(target.warnings)
        if job.collect_ids:
            result.sentence_ids.append(source.sentence_id)
        if job.keep_ids is not None:
            if job.scored_ids is not None and source.sentence_id not in job.scored_ids:
                raise DataFormatError("No filter score for sentence", sentence=source.sentence_id)
            if source.sentence_id not in job.keep_ids:
                continue
        pair = alignment_service.build_pair(ordinal, source, target, line, job.content_deprels,
                                            line_number=ordinal + 1)
        maps = alignment_service.categorize_alignments(pair)
        result.tally.add(pair, maps)
        result.kept += 1
        occurrences = extractor.extract(pair, job.pattern_types)
        for pattern_type, found in occurrences.items():
            for scope in SCOPES:
                dist = result.distributions[_distribution_key(pattern_type, scope)]
                for occurrence in found:
                    if scope == "o2o" and occurrence.outcome.value in ("null", "other"):
                        continue
                    dist.add(occurrence.source_key, occurrence.outcome_key(job.long_path_threshold))
            if job.collect_occurrences:
                result.occurrences[pattern_type].extend(found)
    return result


def _validate(shard: Shard, sources, targets, job: ShardJob, result: ShardResult) -> None:
    for offset, (source, target, line) in enumerate(zip(sources, targets, shard.align_lines)):
        for tree in (source, target):
            result.violations.extend(treebank_service.validate_tree(tree, job.options.validate_upos))
        try:
            alignment_service.parse_pharaoh(line, len(source), len(target), sentence=source.sentence_id,
                                            line_number=shard.start + offset + 1)
        except MorphDivError as e:
            result.violations.append(Violation(sentence_id=source.sentence_id, rule="alignment", detail=str(e)))


def _distribution_key(pattern_type: str, scope: str) -> str:
    return f"{pattern_type}:{scope}"


_worker_job: Optional[ShardJob] = None


def _init_worker(job: ShardJob) -> None:
    global _worker_job
    _worker_job = job


def _run_worker_shard(shard: Shard) -> ShardResult:
    return run_shard(shard, _worker_job)


# Global corpus service instance
corpus_service = CorpusService()

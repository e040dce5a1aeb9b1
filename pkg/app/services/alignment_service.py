"""
Alignment Service for morphdiv
Pharaoh parsing, content-word masks and per-word alignment categories
"""

import logging
import re
from collections import Counter
from pathlib import Path
from typing import FrozenSet, Iterable, Optional, Union

from app.config.settings import DEFAULT_CONTENT_DEPRELS
from app.exceptions import AlignmentFormatError, StatisticsError, UsageError
from app.models.alignment import (
    AlignedSentencePair,
    AlignmentCategory,
    AlignmentLink,
    AlignmentTally,
    CategoryDistribution,
    CategoryMaps,
    ContentWordStats,
)
from app.models.treebank import DepTree
from app.services.treebank_service import treebank_service

# Configure logging
logger = logging.getLogger(__name__)

PAIR_PATTERN = re.compile(r"^(\d+)-(\d+)$")

Corpus = Union[AlignmentTally, Iterable[AlignedSentencePair]]


class AlignmentService:
    """Service for alignment parsing and categorisation"""

    def parse_pharaoh(self, line: str, src_len: int, tgt_len: int,
                      sentence: Optional[str] = None, line_number: Optional[int] = None) -> FrozenSet[AlignmentLink]:
        """
        Parse one line of 0-based "i-j" pairs

        Args:
            line: Whitespace-separated pairs
            src_len: Source sentence length
            tgt_len: Target sentence length
            sentence: Sentence id for error messages
            line_number: 1-based line number for error messages

        Returns:
            1-based links with duplicates collapsed
        """
        links = set()
        for item in line.split():
            match = PAIR_PATTERN.match(item)
            if not match:
                raise AlignmentFormatError(f"Malformed alignment pair {item!r}", sentence=sentence, line=line_number)
            i, j = int(match.group(1)), int(match.group(2))
            if i >= src_len or j >= tgt_len:
                raise AlignmentFormatError(
                    f"Alignment pair {item} out of range for lengths ({src_len}, {tgt_len})",
                    sentence=sentence,
                    line=line_number,
                )
            links.add(AlignmentLink(src=i + 1, tgt=j + 1))
        return frozenset(links)

    def load_content_deprels(self, path: Optional[Union[str, Path]] = None) -> FrozenSet[str]:
        """
        Read the content-dependency label file

        Args:
            path: Newline-separated labels; '#' starts a comment. Defaults to the packaged set.

        Returns:
            Label set
        """
        path = Path(path) if path is not None else DEFAULT_CONTENT_DEPRELS
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise UsageError(f"Cannot read content-deprel file {path}: {str(e)}")
        labels = set()
        for line in text.splitlines():
            label = line.split("#", 1)[0].strip()
            if label:
                labels.add(label)
        if not labels:
            raise UsageError(f"Content-deprel file {path} lists no labels")
        return frozenset(labels)

    def content_words(self, tree: DepTree, content_deprels: FrozenSet[str]) -> FrozenSet[int]:
        """Indices of tokens whose base deprel is a content relation"""
        return frozenset(
            token.index
            for token in tree.tokens
            if treebank_service.strip_deprel_subtype(token.deprel) in content_deprels
        )

    def build_pair(self, ordinal: int, source: DepTree, target: DepTree, align_line: str,
                   content_deprels: FrozenSet[str], line_number: Optional[int] = None) -> AlignedSentencePair:
        """Combine two trees and their alignment line into a pair with content masks"""
        links = self.parse_pharaoh(
            align_line, len(source), len(target), sentence=source.sentence_id, line_number=line_number
        )
        return AlignedSentencePair(
            ordinal=ordinal,
            source=source,
            target=target,
            links=links,
            src_content=self.content_words(source, content_deprels),
            tgt_content=self.content_words(target, content_deprels),
        )

    def categorize_alignments(self, pair: AlignedSentencePair) -> CategoryMaps:
        """
        Assign an alignment category to every content word

        Links touching a non-content word are dropped first. A word is O2O when it has
        exactly one link and the word on the other end also has exactly one link.

        Args:
            pair: Aligned sentence pair with content masks

        Returns:
            Source and target category maps plus the surviving links
        """
        kept = frozenset(
            link for link in pair.links
            if link.src in pair.src_content and link.tgt in pair.tgt_content
        )
        src_degree = Counter(link.src for link in kept)
        tgt_degree = Counter(link.tgt for link in kept)

        o2o = {
            link.src: link.tgt
            for link in kept
            if src_degree[link.src] == 1 and tgt_degree[link.tgt] == 1
        }
        o2o_targets = set(o2o.values())

        source = {}
        for index in sorted(pair.src_content):
            if src_degree[index] == 0:
                source[index] = AlignmentCategory.SRC2NULL
            elif index in o2o:
                source[index] = AlignmentCategory.O2O
            else:
                source[index] = AlignmentCategory.OTHER

        target = {}
        for index in sorted(pair.tgt_content):
            if tgt_degree[index] == 0:
                target[index] = AlignmentCategory.NULL2TGT
            elif index in o2o_targets:
                target[index] = AlignmentCategory.O2O
            else:
                target[index] = AlignmentCategory.OTHER

        return CategoryMaps(source=source, target=target, content_links=kept, o2o=o2o)

    def tally(self, pairs: Iterable[AlignedSentencePair]) -> AlignmentTally:
        """Accumulate alignment counts over pairs"""
        result = AlignmentTally()
        for pair in pairs:
            result.add(pair, self.categorize_alignments(pair))
        return result

    def category_distribution(self, corpus: Corpus) -> CategoryDistribution:
        """
        Category percentages over a corpus

        o2o, src2null and other partition the source content words and sum to 100.
        null2tgt counts unaligned target content words against the same denominator.

        Args:
            corpus: Aligned pairs or an already merged tally

        Returns:
            Percentages
        """
        counts = self._as_tally(corpus)
        denominator = counts.source_content
        if denominator == 0:
            raise StatisticsError("Corpus has no source content words")
        src = counts.source_categories
        return CategoryDistribution(
            o2o=100.0 * src[AlignmentCategory.O2O.value] / denominator,
            src2null=100.0 * src[AlignmentCategory.SRC2NULL.value] / denominator,
            other=100.0 * src[AlignmentCategory.OTHER.value] / denominator,
            null2tgt=100.0 * counts.target_categories[AlignmentCategory.NULL2TGT.value] / denominator,
        )

    def content_word_stats(self, corpus: Corpus) -> ContentWordStats:
        """Content-word shares of each side and the share of links surviving the content filter"""
        counts = self._as_tally(corpus)

        def pct(part: int, whole: int) -> Optional[float]:
            return 100.0 * part / whole if whole else None

        return ContentWordStats(
            source_tokens=counts.source_tokens,
            source_content=counts.source_content,
            source_content_pct=pct(counts.source_content, counts.source_tokens),
            target_tokens=counts.target_tokens,
            target_content=counts.target_content,
            target_content_pct=pct(counts.target_content, counts.target_tokens),
            links=counts.links,
            surviving_links=counts.surviving_links,
            surviving_links_pct=pct(counts.surviving_links, counts.links),
        )

    def _as_tally(self, corpus: Corpus) -> AlignmentTally:
        if isinstance(corpus, AlignmentTally):
            return corpus
        return self.tally(corpus)


# Global alignment service instance
alignment_service = AlignmentService()

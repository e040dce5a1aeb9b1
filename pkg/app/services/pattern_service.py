"""
Pattern Service for morphdiv
Extracts word-based and arc-based patterns from aligned sentence pairs
"""

import logging
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

import networkx as nx

from app.exceptions import PatternTypeError, StatisticsError
from app.models.alignment import AlignedSentencePair, AlignmentCategory, CategoryMaps
from app.models.patterns import (
    ArcPattern,
    Outcome,
    PatternOccurrence,
    PatternType,
    SourcePattern,
    TargetPathPattern,
    TargetPattern,
    WordPattern,
)
from app.models.schemas import OutcomeBreakdown
from app.models.treebank import DepTree
from app.services.alignment_service import alignment_service

# Configure logging
logger = logging.getLogger(__name__)


class PatternService:
    """Service for pattern extraction and convergence decisions"""

    def __init__(self, include_all_children: bool = False):
        self.include_all_children = include_all_children

    def word_pattern(self, tree: DepTree, index: int, content: FrozenSet[int],
                     include_all_children: Optional[bool] = None) -> WordPattern:
        """
        Word pattern of one token

        Args:
            tree: Tree holding the token
            index: Token index
            content: Content-word indices of the tree
            include_all_children: Also list function-word children

        Returns:
            WordPattern
        """
        if include_all_children is None:
            include_all_children = self.include_all_children
        token = tree.token(index)
        children = tuple(
            tree.token(child).deprel
            for child in tree.children.get(index, [])
            if include_all_children or child in content
        )
        return WordPattern(parent_deprel=token.deprel, upos=token.upos, child_deprels=children)

    def dependency_graph(self, tree: DepTree) -> nx.Graph:
        """Undirected graph of a tree; each edge carries the relation of its lower word"""
        graph = nx.Graph()
        graph.add_nodes_from(token.index for token in tree.tokens)
        graph.add_edges_from(
            (token.index, token.head, {"deprel": token.deprel}) for token in tree.tokens if token.head != 0
        )
        return graph

    def target_path(self, tree: DepTree, head: int, tail: int, graph: Optional[nx.Graph] = None) -> Tuple[str, ...]:
        """
        Relation labels on the undirected tree path from head to tail

        Args:
            tree: Target tree
            head: Index of the word aligned to the source head
            tail: Index of the word aligned to the source tail
            graph: Dependency graph of the tree, when already built

        Returns:
            Path labels, head side first
        """
        graph = graph if graph is not None else self.dependency_graph(tree)
        try:
            nodes = nx.shortest_path(graph, source=head, target=tail)
        except nx.NetworkXNoPath:
            raise StatisticsError(f"Tokens {head} and {tail} are not connected in sentence {tree.sentence_id}")
        return tuple(graph.edges[u, v]["deprel"] for u, v in zip(nodes, nodes[1:]))

    def extract_word_patterns(self, pair: AlignedSentencePair,
                              maps: Optional[CategoryMaps] = None) -> List[PatternOccurrence]:
        """
        One occurrence per source content word, in index order

        Args:
            pair: Aligned sentence pair
            maps: Precomputed alignment categories

        Returns:
            Word-based occurrences
        """
        maps = maps or alignment_service.categorize_alignments(pair)
        occurrences = []
        for index in sorted(pair.src_content):
            source_pattern = self.word_pattern(pair.source, index, pair.src_content)
            category = maps.source[index]
            target_pattern = None
            if category is AlignmentCategory.O2O:
                target_index = maps.o2o_target(index)
                target_pattern = self.word_pattern(pair.target, target_index, pair.tgt_content)
                outcome = Outcome.CONVERGENT if self.is_convergent(source_pattern, target_pattern) else Outcome.DIVERGENT
            elif category is AlignmentCategory.SRC2NULL:
                outcome = Outcome.NULL
            else:
                outcome = Outcome.OTHER
            occurrences.append(PatternOccurrence(
                sentence_id=pair.sentence_id,
                ordinal=pair.ordinal,
                pattern_type=PatternType.WORD,
                source_pattern=source_pattern,
                outcome=outcome,
                target_pattern=target_pattern,
                source_indices=(index,),
            ))
        return occurrences

    def extract_arc_patterns(self, pair: AlignedSentencePair,
                             maps: Optional[CategoryMaps] = None) -> List[PatternOccurrence]:
        """
        One occurrence per source arc joining two content words, ordered by tail index

        Args:
            pair: Aligned sentence pair
            maps: Precomputed alignment categories

        Returns:
            Arc-based occurrences
        """
        maps = maps or alignment_service.categorize_alignments(pair)
        graph = None
        occurrences = []
        for tail in sorted(pair.src_content):
            tail_token = pair.source.token(tail)
            head = tail_token.head
            if head == 0 or head not in pair.src_content:
                continue
            head_token = pair.source.token(head)
            source_pattern = ArcPattern(head_upos=head_token.upos, deprel=tail_token.deprel, tail_upos=tail_token.upos)

            categories = (maps.source[head], maps.source[tail])
            target_pattern = None
            if AlignmentCategory.SRC2NULL in categories:
                outcome = Outcome.NULL
            elif categories != (AlignmentCategory.O2O, AlignmentCategory.O2O):
                outcome = Outcome.OTHER
            else:
                target_head = maps.o2o_target(head)
                target_tail = maps.o2o_target(tail)
                if graph is None:
                    graph = self.dependency_graph(pair.target)
                target_pattern = TargetPathPattern(
                    head_upos=pair.target.token(target_head).upos,
                    path=self.target_path(pair.target, target_head, target_tail, graph),
                    tail_upos=pair.target.token(target_tail).upos,
                )
                outcome = Outcome.CONVERGENT if self.is_convergent(source_pattern, target_pattern) else Outcome.DIVERGENT
            occurrences.append(PatternOccurrence(
                sentence_id=pair.sentence_id,
                ordinal=pair.ordinal,
                pattern_type=PatternType.ARC,
                source_pattern=source_pattern,
                outcome=outcome,
                target_pattern=target_pattern,
                source_indices=(head, tail),
            ))
        return occurrences

    def extract(self, pair: AlignedSentencePair, pattern_types: Iterable[str]) -> Dict[str, List[PatternOccurrence]]:
        """Occurrences of every requested pattern type, sharing one categorisation"""
        maps = alignment_service.categorize_alignments(pair)
        result = {}
        for pattern_type in pattern_types:
            if pattern_type == PatternType.WORD.value:
                result[pattern_type] = self.extract_word_patterns(pair, maps)
            elif pattern_type == PatternType.ARC.value:
                result[pattern_type] = self.extract_arc_patterns(pair, maps)
            else:
                raise PatternTypeError(f"Unknown pattern type {pattern_type!r}")
        return result

    @staticmethod
    def is_convergent(source_pattern: SourcePattern, target_pattern: TargetPattern) -> bool:
        """
        Whether the target keeps the source structure

        Word patterns converge when the triples are equal. Arc patterns converge
        when the target path is a single arc with the source relation and POS pair.
        """
        if isinstance(source_pattern, WordPattern) and isinstance(target_pattern, WordPattern):
            return source_pattern == target_pattern
        if isinstance(source_pattern, ArcPattern) and isinstance(target_pattern, TargetPathPattern):
            return (
                len(target_pattern.path) == 1
                and target_pattern.path[0] == source_pattern.deprel
                and target_pattern.head_upos == source_pattern.head_upos
                and target_pattern.tail_upos == source_pattern.tail_upos
            )
        raise PatternTypeError(
            f"Cannot compare {type(source_pattern).__name__} with {type(target_pattern).__name__}"
        )

    def per_pattern_outcome_breakdown(self, occurrences: Iterable[PatternOccurrence],
                                      source_pattern: Union[str, SourcePattern]) -> OutcomeBreakdown:
        """
        Four-way outcome percentages for one source pattern

        Args:
            occurrences: Corpus-wide occurrences
            source_pattern: Pattern or its key

        Returns:
            Percentages of o2o:conv, o2o:div, null and other, summing to 100
        """
        key = source_pattern if isinstance(source_pattern, str) else source_pattern.key
        counts = {outcome: 0 for outcome in Outcome}
        for occurrence in occurrences:
            if occurrence.source_key == key:
                counts[occurrence.outcome] += 1
        total = sum(counts.values())
        if total == 0:
            raise StatisticsError(f"Pattern {key} was never observed")
        return OutcomeBreakdown(
            pattern=key,
            total=total,
            o2o_conv=100.0 * counts[Outcome.CONVERGENT] / total,
            o2o_div=100.0 * counts[Outcome.DIVERGENT] / total,
            null=100.0 * counts[Outcome.NULL] / total,
            others=100.0 * counts[Outcome.OTHER] / total,
        )


# Global pattern service instance
pattern_service = PatternService()

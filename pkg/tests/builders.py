"""
Small constructors for hand-made trees, pairs and occurrences
"""

from pathlib import Path
from typing import FrozenSet, List, Optional, Sequence, Tuple

from app.models.alignment import AlignedSentencePair
from app.models.patterns import LEAF, Outcome, PatternOccurrence, PatternType, WordPattern
from app.models.treebank import DepTree, Token
from app.services.alignment_service import alignment_service

Row = Tuple[str, str, int, str]


def tree(sentence_id: str, rows: Sequence[Row]) -> DepTree:
    """rows: (form, upos, head, deprel), indexed from 1"""
    return DepTree(
        sentence_id=sentence_id,
        tokens=[
            Token(index=i, form=form, upos=upos, head=head, deprel=deprel)
            for i, (form, upos, head, deprel) in enumerate(rows, start=1)
        ],
        metadata={"sent_id": sentence_id},
    )


def pair(source: DepTree, target: DepTree, align: str, content: FrozenSet[str], ordinal: int = 0) -> AlignedSentencePair:
    return alignment_service.build_pair(ordinal, source, target, align, content)


def word_pattern(key: str) -> WordPattern:
    parent, upos, children = key.split("~")
    return WordPattern(
        parent_deprel=parent,
        upos=upos,
        child_deprels=() if children == LEAF else tuple(children.split("+")),
    )


def occurrence(sentence_id: str, source_key: str, outcome: str, target_key: Optional[str] = None) -> PatternOccurrence:
    outcome = Outcome(outcome)
    target = None
    if outcome is Outcome.CONVERGENT:
        target = word_pattern(source_key)
    elif outcome is Outcome.DIVERGENT:
        target = word_pattern(target_key)
    return PatternOccurrence(
        sentence_id=sentence_id,
        pattern_type=PatternType.WORD,
        source_pattern=word_pattern(source_key),
        outcome=outcome,
        target_pattern=target,
        source_indices=(1,),
    )


GOLDEN = Path(__file__).parent / "data" / "golden"
GOLDEN_IDS = [f"g{i:02d}" for i in range(1, 13)] + ["12"] + [f"g{i:02d}" for i in range(14, 21)]


def golden_rows(pattern_type: str) -> List[List[str]]:
    """Expected occurrence rows of the golden corpus, header dropped"""
    lines = (GOLDEN / f"occurrences.{pattern_type}.tsv").read_text(encoding="utf-8").splitlines()
    return [line.split("\t") for line in lines[1:]]

"""
Dependency tree records
One DepTree per CoNLL-U sentence block, tokens indexed from 1
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field, PrivateAttr

UPOS_TAGS = frozenset({
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
})


class Token(BaseModel):
    """A single syntactic word; columns we do not analyse are carried through verbatim"""
    index: int = Field(..., ge=1)
    form: str
    upos: str
    head: int = Field(..., ge=0)
    deprel: str
    lemma: str = "_"
    xpos: str = "_"
    feats: str = "_"
    deps: str = "_"
    misc: str = "_"


class DepTree(BaseModel):
    """A parsed sentence"""
    sentence_id: str
    tokens: List[Token]
    metadata: Dict[str, Optional[str]] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    _children: Optional[Dict[int, List[int]]] = PrivateAttr(default=None)

    def __len__(self) -> int:
        return len(self.tokens)

    def token(self, index: int) -> Token:
        return self.tokens[index - 1]

    @property
    def root_index(self) -> Optional[int]:
        for token in self.tokens:
            if token.head == 0:
                return token.index
        return None

    @property
    def children(self) -> Dict[int, List[int]]:
        """Dependents of every token (0 stands for the virtual root), in index order"""
        if self._children is not None:
            return self._children
        adjacency: Dict[int, List[int]] = {0: []}
        for token in self.tokens:
            adjacency[token.index] = []
        for token in self.tokens:
            adjacency.setdefault(token.head, []).append(token.index)
        self._children = adjacency
        return adjacency

    def depth_first(self) -> List[int]:
        """Token indices in pre-order from the root"""
        order: List[int] = []
        stack = list(reversed(self.children.get(0, [])))
        while stack:
            node = stack.pop()
            order.append(node)
            stack.extend(reversed(self.children.get(node, [])))
        return order


class Violation(BaseModel):
    """One broken tree or alignment invariant"""
    sentence_id: Optional[str] = None
    index: Optional[int] = None
    rule: str
    detail: str = ""


class ParseOptions(BaseModel):
    """Switches for CoNLL-U ingestion"""
    strip_subtypes: bool = True
    strict: bool = False
    validate_upos: bool = True
    check_structure: bool = True

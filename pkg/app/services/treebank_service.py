"""
Treebank Service for morphdiv
Reads, validates and writes CoNLL-U dependency corpora
"""

import io
import logging
from typing import IO, Dict, Iterable, Iterator, List, Optional, Union

import conllu
from conllu.exceptions import ParseException

from app.exceptions import DataFormatError, TreeStructureError
from app.models.treebank import UPOS_TAGS, DepTree, ParseOptions, Token, Violation

# Configure logging
logger = logging.getLogger(__name__)

FIELDS = ["id", "form", "lemma", "upos", "xpos", "feats", "head", "deprel", "deps", "misc"]


def _checked_id(line: List[str], i: int) -> str:
    # conllu drops columns past the tenth and stops early on short rows
    if len(line) != len(FIELDS):
        raise ParseException(f"Expected {len(FIELDS)} columns, found {len(line)} on token {line[0]!r}")
    return line[i]


# Keep every column as raw text; ids such as "1-2" and "3.1" are filtered by us, not split by conllu.
FIELD_PARSERS = {field: (lambda line, i: line[i]) for field in FIELDS}
FIELD_PARSERS["id"] = _checked_id

ROOT_REPAIR_DEPREL = "dep"


class TreebankService:
    """Service for CoNLL-U ingestion and tree validation"""

    @staticmethod
    def strip_deprel_subtype(deprel: str) -> str:
        """Drop the language-specific subtype: "aux:pass" -> "aux" """
        return deprel.split(":", 1)[0]

    def iter_conllu(
        self,
        stream: Union[IO[str], IO[bytes], str, bytes],
        options: Optional[ParseOptions] = None,
        start_ordinal: int = 0,
    ) -> Iterator[DepTree]:
        """
        Lazily parse a CoNLL-U stream

        Args:
            stream: UTF-8 text or bytes, or a file object yielding either
            options: Subtype stripping, strictness and UPOS checking
            start_ordinal: Ordinal of the first sentence, used when a sentence has no sent_id

        Yields:
            One DepTree per sentence block, in stream order
        """
        options = options or ParseOptions()
        ordinal = start_ordinal
        try:
            text_stream = self._as_text(stream)
            for sentence in conllu.parse_incr(text_stream, fields=FIELDS, field_parsers=FIELD_PARSERS):
                yield self._build_tree(sentence, ordinal, options)
                ordinal += 1
        except ParseException as e:
            raise DataFormatError(f"Malformed CoNLL-U input: {str(e)}", sentence=str(ordinal))
        except UnicodeDecodeError as e:
            raise DataFormatError(f"Input is not valid UTF-8: {str(e)}", sentence=str(ordinal))

    def parse_conllu(
        self,
        stream: Union[IO[str], IO[bytes], str, bytes],
        options: Optional[ParseOptions] = None,
        start_ordinal: int = 0,
    ) -> List[DepTree]:
        """Parse a whole CoNLL-U stream into trees"""
        return list(self.iter_conllu(stream, options, start_ordinal))

    def iter_sentence_blocks(self, stream: IO[str]) -> Iterator[str]:
        """
        Split a CoNLL-U text stream at blank lines without parsing it

        Args:
            stream: Text stream

        Yields:
            Raw sentence blocks, each terminated by a blank line
        """
        lines: List[str] = []
        for line in stream:
            if line.strip():
                lines.append(line if line.endswith("\n") else line + "\n")
            elif lines:
                yield "".join(lines) + "\n"
                lines = []
        if lines:
            yield "".join(lines) + "\n"

    def serialize_conllu(self, trees: Iterable[DepTree]) -> str:
        """
        Write trees back as CoNLL-U text

        Args:
            trees: Trees to serialize

        Returns:
            CoNLL-U text with comments, 10 columns per token and blank-line separators
        """
        blocks = []
        for tree in trees:
            tokens = [
                conllu.models.Token({
                    "id": str(token.index),
                    "form": token.form,
                    "lemma": token.lemma,
                    "upos": token.upos,
                    "xpos": token.xpos,
                    "feats": token.feats,
                    "head": str(token.head),
                    "deprel": token.deprel,
                    "deps": token.deps,
                    "misc": token.misc,
                })
                for token in tree.tokens
            ]
            metadata = conllu.models.Metadata(tree.metadata)
            blocks.append(conllu.models.TokenList(tokens, metadata=metadata).serialize())
        return "".join(blocks)

    def validate_tree(self, tree: DepTree, validate_upos: bool = True) -> List[Violation]:
        """
        Check every DepTree invariant without raising

        Args:
            tree: Tree to check
            validate_upos: Also check UPOS tags against the UD inventory

        Returns:
            Violations; empty when the tree is well formed
        """
        violations: List[Violation] = []
        size = len(tree.tokens)

        def violation(index: Optional[int], rule: str, detail: str = "") -> None:
            violations.append(Violation(sentence_id=tree.sentence_id, index=index, rule=rule, detail=detail))

        for position, token in enumerate(tree.tokens, start=1):
            if token.index != position:
                violation(token.index, "index sequence", f"expected {position}")
            if validate_upos and token.upos not in UPOS_TAGS:
                violation(token.index, "unknown upos", token.upos)
            if token.head > size:
                violation(token.index, "head out of range", f"head {token.head} in a {size}-token sentence")

        roots = [token.index for token in tree.tokens if token.head == 0]
        if not roots:
            violation(None, "no root")
        for extra in roots[1:]:
            violation(extra, "multiple roots", f"first root is {roots[0]}")

        heads = {token.index: token.head for token in tree.tokens}
        for index in self._cycle_members(heads):
            violation(index, "cycle")

        reachable = len(tree.depth_first())
        if not violations and reachable != size:
            violation(None, "children", f"{reachable} of {size} tokens reachable from the root")
        return violations

    @staticmethod
    def _as_text(stream: Union[IO[str], IO[bytes], str, bytes]) -> IO[str]:
        if isinstance(stream, bytes):
            return io.StringIO(stream.decode("utf-8"))
        if isinstance(stream, str):
            return io.StringIO(stream)
        if isinstance(stream, (io.BufferedIOBase, io.RawIOBase)):
            return io.TextIOWrapper(stream, encoding="utf-8")
        return stream

    @staticmethod
    def _cycle_members(heads: Dict[int, int]) -> List[int]:
        """Indices that sit on a head cycle (self-loops included)"""
        state: Dict[int, int] = {}  # 1 = on current walk, 2 = reaches the root
        members = set()
        for start in heads:
            walk = []
            node = start
            while node in heads and state.get(node) is None:
                state[node] = 1
                walk.append(node)
                node = heads[node]
            if node in heads and state.get(node) == 1:
                cycle_start = walk.index(node)
                members.update(walk[cycle_start:])
            for visited in walk:
                state[visited] = 2
        return sorted(members)

    def _build_tree(self, sentence: conllu.models.TokenList, ordinal: int, options: ParseOptions) -> DepTree:
        metadata = dict(sentence.metadata)
        sentence_id = metadata.get("sent_id") or str(ordinal)

        tokens: List[Token] = []
        for raw in sentence:
            token_id = raw.get("id", "")
            if "-" in token_id or "." in token_id:
                continue
            try:
                index = int(token_id)
            except ValueError:
                raise DataFormatError(f"Non-integer token id {token_id!r}", sentence=sentence_id)
            if index != len(tokens) + 1:
                raise DataFormatError(
                    f"Token id {index} breaks the sequence, expected {len(tokens) + 1}", sentence=sentence_id
                )
            try:
                head = int(raw["head"])
            except ValueError:
                raise DataFormatError(f"Non-integer head {raw['head']!r} on token {index}", sentence=sentence_id)
            if head < 0:
                raise DataFormatError(f"Negative head {head} on token {index}", sentence=sentence_id)
            upos = raw["upos"]
            if options.validate_upos and upos not in UPOS_TAGS:
                raise DataFormatError(f"Unknown UPOS {upos!r} on token {index}", sentence=sentence_id)
            deprel = raw["deprel"]
            if options.strip_subtypes:
                deprel = self.strip_deprel_subtype(deprel)
            tokens.append(Token(
                index=index,
                form=raw["form"],
                upos=upos,
                head=head,
                deprel=deprel,
                lemma=raw["lemma"],
                xpos=raw["xpos"],
                feats=raw["feats"],
                deps=raw["deps"],
                misc=raw["misc"],
            ))

        if not tokens:
            raise DataFormatError("Sentence block has no tokens", sentence=sentence_id)

        tree = DepTree(sentence_id=sentence_id, tokens=tokens, metadata=metadata)
        if options.check_structure:
            self._check_structure(tree, options)
        return tree

    def _check_structure(self, tree: DepTree, options: ParseOptions) -> None:
        size = len(tree.tokens)
        heads = {}
        for token in tree.tokens:
            if token.head > size:
                raise TreeStructureError(
                    f"Head {token.head} of token {token.index} is out of range", sentence=tree.sentence_id
                )
            if token.head == token.index:
                raise TreeStructureError(f"Cycle detected: token {token.index} heads itself", sentence=tree.sentence_id)
            heads[token.index] = token.head

        on_cycle = self._cycle_members(heads)
        if on_cycle:
            raise TreeStructureError(f"Cycle detected through tokens {on_cycle}", sentence=tree.sentence_id)

        roots = [token.index for token in tree.tokens if token.head == 0]
        if len(roots) > 1:
            if options.strict:
                raise TreeStructureError(f"Multiple roots {roots}", sentence=tree.sentence_id)
            first = roots[0]
            for extra in roots[1:]:
                token = tree.token(extra)
                token.head = first
                token.deprel = ROOT_REPAIR_DEPREL
            message = f"reattached extra roots {roots[1:]} to token {first}"
            tree.warnings.append(message)
            logger.warning(f"Sentence {tree.sentence_id}: {message}")


# Global treebank service instance
treebank_service = TreebankService()

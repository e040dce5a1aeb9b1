import pytest

from app.exceptions import DataFormatError, TreeStructureError
from app.models.treebank import ParseOptions
from app.services.treebank_service import treebank_service
from tests.builders import tree


def conllu(*rows: str, sent_id: str = "s1") -> str:
    lines = [f"# sent_id = {sent_id}"] + ["\t".join(row.split()) for row in rows]
    return "\n".join(lines) + "\n\n"


class TestParsing:
    def test_golden_corpus(self, golden_paths):
        sources = treebank_service.parse_conllu(golden_paths.src.read_text(encoding="utf-8"))
        targets = treebank_service.parse_conllu(golden_paths.tgt.read_bytes())
        assert len(sources) == len(targets) == 20
        assert sum(len(t) for t in sources) == 78
        assert sum(len(t) for t in targets) == 100

    def test_subtypes_are_stripped(self, golden_paths):
        first = treebank_service.parse_conllu(golden_paths.src.read_text(encoding="utf-8"))[0]
        assert first.sentence_id == "g01"
        assert first.token(1).deprel == "nsubj"
        assert first.token(2).deprel == "aux"

    def test_subtypes_can_be_kept(self, golden_paths):
        options = ParseOptions(strip_subtypes=False)
        first = treebank_service.parse_conllu(golden_paths.src.read_text(encoding="utf-8"), options)[0]
        assert first.token(1).deprel == "nsubj:pass"

    def test_empty_nodes_and_multiword_tokens_are_skipped(self, golden_paths):
        sources = treebank_service.parse_conllu(golden_paths.src.read_text(encoding="utf-8"))
        targets = treebank_service.parse_conllu(golden_paths.tgt.read_text(encoding="utf-8"))
        g12_source = next(t for t in sources if t.sentence_id == "g12")
        g12_target = next(t for t in targets if t.sentence_id == "g12")
        assert [t.form for t in g12_source.tokens] == ["He", "went", "to", "the", "market"]
        assert [t.form for t in g12_target.tokens] == ["Il", "est", "allé", "à", "le", "marché"]

    def test_missing_sent_id_falls_back_to_ordinal(self, golden_paths):
        sources = treebank_service.parse_conllu(golden_paths.src.read_text(encoding="utf-8"))
        assert sources[12].sentence_id == "12"
        shifted = treebank_service.parse_conllu(golden_paths.src.read_text(encoding="utf-8"), start_ordinal=100)
        assert shifted[12].sentence_id == "112"

    def test_iter_is_lazy(self):
        text = conllu("1 a _ NOUN _ _ 0 root _ _") + conllu("1 b _ NOUN _ _ 5 root _ _", sent_id="bad")
        trees = treebank_service.iter_conllu(text)
        assert next(trees).sentence_id == "s1"
        with pytest.raises(TreeStructureError, match="out of range"):
            next(trees)

    def test_short_row_is_rejected(self):
        with pytest.raises(DataFormatError, match="Expected 10 columns, found 8"):
            treebank_service.parse_conllu(conllu("1 a _ NOUN _ _ 0 root"))

    def test_extra_column_is_rejected(self):
        with pytest.raises(DataFormatError, match="Expected 10 columns, found 11"):
            treebank_service.parse_conllu(conllu("1 a _ NOUN _ _ 0 root _ _ EXTRA"))

    def test_non_integer_head(self):
        with pytest.raises(DataFormatError, match="Non-integer head"):
            treebank_service.parse_conllu(conllu("1 a _ NOUN _ _ x root _ _"))

    def test_broken_id_sequence(self):
        with pytest.raises(DataFormatError, match="breaks the sequence"):
            treebank_service.parse_conllu(conllu("1 a _ NOUN _ _ 0 root _ _", "3 b _ NOUN _ _ 1 nmod _ _"))

    def test_unknown_upos(self):
        text = conllu("1 a _ NOUNISH _ _ 0 root _ _")
        with pytest.raises(DataFormatError, match="Unknown UPOS"):
            treebank_service.parse_conllu(text)
        parsed = treebank_service.parse_conllu(text, ParseOptions(validate_upos=False))
        assert parsed[0].token(1).upos == "NOUNISH"

    def test_invalid_utf8(self):
        with pytest.raises(DataFormatError):
            treebank_service.parse_conllu(b"# sent_id = s1\n1\t\xff\t_\tNOUN\t_\t_\t0\troot\t_\t_\n\n")


class TestStructure:
    def test_cycle(self):
        text = conllu("1 a _ NOUN _ _ 2 nsubj _ _", "2 b _ NOUN _ _ 1 obj _ _", "3 c _ VERB _ _ 0 root _ _")
        with pytest.raises(TreeStructureError, match="Cycle"):
            treebank_service.parse_conllu(text)

    def test_self_loop(self):
        with pytest.raises(TreeStructureError, match="heads itself"):
            treebank_service.parse_conllu(conllu("1 a _ VERB _ _ 0 root _ _", "2 b _ NOUN _ _ 2 obj _ _"))

    def test_head_out_of_range(self):
        with pytest.raises(TreeStructureError, match="out of range"):
            treebank_service.parse_conllu(conllu("1 a _ VERB _ _ 0 root _ _", "2 b _ NOUN _ _ 7 obj _ _"))

    def test_extra_roots_are_reattached(self):
        text = conllu("1 a _ VERB _ _ 0 root _ _", "2 b _ VERB _ _ 0 root _ _", "3 c _ NOUN _ _ 2 obj _ _")
        repaired = treebank_service.parse_conllu(text)[0]
        assert repaired.token(2).head == 1
        assert repaired.token(2).deprel == "dep"
        assert len(repaired.warnings) == 1
        assert repaired.depth_first() == [1, 2, 3]

    def test_extra_roots_fail_in_strict_mode(self):
        text = conllu("1 a _ VERB _ _ 0 root _ _", "2 b _ VERB _ _ 0 root _ _")
        with pytest.raises(TreeStructureError, match="Multiple roots"):
            treebank_service.parse_conllu(text, ParseOptions(strict=True))


class TestValidation:
    def test_well_formed_tree(self):
        assert treebank_service.validate_tree(tree("s", [("a", "VERB", 0, "root"), ("b", "NOUN", 1, "obj")])) == []

    def test_violations_are_collected(self):
        broken = tree("s", [
            ("a", "VERB", 0, "root"),
            ("b", "NOUN", 3, "obj"),
            ("c", "NOUN", 2, "nmod"),
            ("d", "VERB", 0, "root"),
            ("e", "BLAH", 1, "dep"),
        ])
        rules = [(v.index, v.rule) for v in treebank_service.validate_tree(broken)]
        assert (5, "unknown upos") in rules
        assert (4, "multiple roots") in rules
        assert (2, "cycle") in rules and (3, "cycle") in rules
        assert treebank_service.validate_tree(broken, validate_upos=False) != []

    def test_missing_root(self):
        rootless = tree("s", [("a", "NOUN", 2, "nmod"), ("b", "NOUN", 1, "nmod")])
        rules = {v.rule for v in treebank_service.validate_tree(rootless)}
        assert rules == {"no root", "cycle"}


def test_serialize_then_parse_keeps_tokens(golden_paths):
    original = treebank_service.parse_conllu(golden_paths.tgt.read_text(encoding="utf-8"))
    reparsed = treebank_service.parse_conllu(treebank_service.serialize_conllu(original))
    assert [t.sentence_id for t in reparsed] == [t.sentence_id for t in original]
    assert [t.model_dump()["tokens"] for t in reparsed] == [t.model_dump()["tokens"] for t in original]


def test_sentence_blocks(golden_paths):
    with open(golden_paths.src, encoding="utf-8") as handle:
        blocks = list(treebank_service.iter_sentence_blocks(handle))
    assert len(blocks) == 20
    assert all(block.endswith("\n\n") for block in blocks)

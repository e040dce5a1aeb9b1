import io
import math
from collections import Counter

import numpy as np
import pytest
from nltk.translate.bleu_score import corpus_bleu as nltk_corpus_bleu
from scipy import stats

from app.exceptions import DataFormatError, GroupRejected, StatisticsError, UsageError
from app.models.distribution import ConditionalPatternDistribution
from app.models.schemas import DivergenceGroupSpec, GroupQualityReport
from app.services.quality_service import quality_service
from tests.builders import occurrence

P = "obj~NOUN~leaf"
Q = "obl~NOUN~leaf"
Q2 = "nmod~NOUN~leaf"


@pytest.fixture
def index():
    return quality_service.index_occurrences([
        occurrence("s1", P, "convergent"),
        occurrence("s2", P, "convergent"),
        occurrence("s2", P, "convergent"),
        occurrence("s3", P, "divergent", Q),
        occurrence("s4", P, "divergent", Q),
        occurrence("s4", P, "convergent"),
        occurrence("s5", P, "divergent", Q),
        occurrence("s5", P, "divergent", Q),
        occurrence("s6", P, "divergent", Q2),
        occurrence("s7", P, "convergent"),
        occurrence("s7", P, "null"),
        occurrence("s8", "nsubj~PRON~leaf", "convergent"),
        occurrence("s9", P, "divergent", Q),
        occurrence("s9", P, "other"),
    ])


def report(source, target, delta, metric="external") -> GroupQualityReport:
    spec = DivergenceGroupSpec(source_pattern=source, target_pattern=target, control_ids=["c"], experiment_ids=["e"])
    return GroupQualityReport(spec=spec, metric=metric, control_score=0.0, experiment_score=delta, delta=delta,
                              control_size=1, experiment_size=1)


class TestGroups:
    def test_candidates(self, index):
        assert quality_service.candidate_divergences(index) == [(P, Q2), (P, Q)]

    def test_control_and_experiment(self, index):
        spec = quality_service.build_groups(index, P, Q, min_size=2)
        assert spec.control_ids == ["s1", "s2"]
        assert spec.experiment_ids == ["s3", "s4"]

    def test_other_divergence(self, index):
        spec = quality_service.build_groups(index, P, Q2, min_size=1)
        assert spec.experiment_ids == ["s6"]

    def test_min_control_occurrences(self, index):
        spec = quality_service.build_groups(index, P, Q, min_size=1, min_control_occurrences=2)
        assert spec.control_ids == ["s2"]

    def test_rejection(self, index):
        with pytest.raises(GroupRejected) as caught:
            quality_service.build_groups(index, P, Q, min_size=3)
        assert (caught.value.control_size, caught.value.experiment_size) == (2, 2)
        assert caught.value.reason == "control 2 < 3; experiment 2 < 3"
        assert caught.value.exit_code == 2

    def test_same_pattern(self, index):
        with pytest.raises(UsageError):
            quality_service.build_groups(index, P, P, min_size=1)

    def test_golden_groups(self, golden_occurrences):
        golden_index = quality_service.index_occurrences(golden_occurrences["word"])
        spec = quality_service.build_groups(golden_index, "root~VERB~nsubj+xcomp", "root~VERB~nsubj+obl+xcomp", 1)
        assert spec.control_ids == ["g08", "g11"]
        assert spec.experiment_ids == ["g01"]


class TestBleu:
    HYPOTHESES = [
        "the cat sat on the mat today",
        "a quick brown fox jumps over the lazy dog",
        "we will meet again next week in the city",
    ]
    REFERENCES = [
        "the cat sat on the red mat today",
        "the quick brown fox jumped over the lazy dog",
        "we meet again next week in the old city",
    ]

    def test_matches_nltk(self):
        expected = nltk_corpus_bleu([[r.split()] for r in self.REFERENCES], [h.split() for h in self.HYPOTHESES])
        assert quality_service.corpus_bleu(self.HYPOTHESES, self.REFERENCES) == pytest.approx(100 * expected, rel=1e-9)

    def test_token_lists(self):
        tokens = [h.split() for h in self.HYPOTHESES]
        assert quality_service.corpus_bleu(tokens, [r.split() for r in self.REFERENCES]) == pytest.approx(
            quality_service.corpus_bleu(self.HYPOTHESES, self.REFERENCES)
        )

    def test_identity(self):
        assert quality_service.corpus_bleu(self.REFERENCES, self.REFERENCES) == pytest.approx(100.0)

    def test_missing_order(self):
        assert quality_service.corpus_bleu(["a b c d"], ["a b c e"]) == 0.0

    def test_smoothing(self):
        expected = 100 * math.exp((math.log(3 / 4) + math.log(2 / 3) + math.log(1 / 2) + math.log(1 / 2)) / 4)
        assert quality_service.corpus_bleu(["a b c d"], ["a b c e"], smoothing=True) == pytest.approx(expected)

    def test_brevity_penalty(self):
        score = quality_service.corpus_bleu(["a b c d"], ["a b c d e f g h"])
        assert score == pytest.approx(100 * math.exp(1 - 8 / 4))

    def test_bad_input(self):
        with pytest.raises(StatisticsError):
            quality_service.corpus_bleu(["a"], ["a", "b"])
        with pytest.raises(StatisticsError):
            quality_service.corpus_bleu([], [])
        with pytest.raises(UsageError):
            quality_service.corpus_bleu(["a b"], ["a b"], tokenize="intl")

    def test_13a_tokenizer(self):
        assert quality_service.tokenize_13a("Hello, world.") == "Hello , world ."
        assert quality_service.tokenize_13a("It costs 3.5 dollars.") == "It costs 3.5 dollars ."
        assert quality_service.tokenize_13a("a&amp;b") == "a & b"
        assert quality_service.corpus_bleu(["Hello, big world."], ["Hello , big world ."], tokenize="13a") == \
            pytest.approx(100.0)


class TestScoring:
    SPEC = DivergenceGroupSpec(source_pattern=P, target_pattern=Q, control_ids=["s1", "s2"], experiment_ids=["s3", "s4"])

    def test_external_mean(self):
        scores = {"s1": 0.5, "s2": 0.7, "s3": 0.2, "s4": 0.4}
        result = quality_service.score_groups(self.SPEC, {}, {}, "external", scores)
        assert result.control_score == pytest.approx(0.6)
        assert result.experiment_score == pytest.approx(0.3)
        assert result.delta == pytest.approx(-0.3)
        assert (result.control_size, result.experiment_size) == (2, 2)

    def test_bleu_per_group(self):
        segment = "one two three four five"
        mt = {"s1": segment, "s2": segment, "s3": "one two three four six", "s4": segment}
        refs = {sid: segment for sid in mt}
        result = quality_service.score_groups(self.SPEC, mt, refs, "bleu")
        assert result.control_score == pytest.approx(100.0)
        assert result.delta < 0
        assert result.delta == pytest.approx(result.experiment_score - result.control_score)

    def test_missing_inputs(self):
        with pytest.raises(DataFormatError):
            quality_service.score_groups(self.SPEC, {"s1": "a"}, {"s1": "a"}, "bleu")
        with pytest.raises(DataFormatError):
            quality_service.score_groups(self.SPEC, {}, {}, "external", {"s1": 1.0})
        with pytest.raises(UsageError):
            quality_service.score_groups(self.SPEC, {}, {}, "external")
        with pytest.raises(UsageError):
            quality_service.score_groups(self.SPEC, {}, {}, "chrf", {})


class TestExternalScores:
    def test_header_and_blank_lines(self):
        scores = quality_service.ingest_external_scores(io.StringIO("sentence_id\tscore\ns1\t0.5\n\ns2\t1e-3\n"))
        assert scores == {"s1": 0.5, "s2": 0.001}

    def test_from_path(self, tmp_path):
        path = tmp_path / "scores.tsv"
        path.write_text("s1\t2\n", encoding="utf-8")
        assert quality_service.ingest_external_scores(path) == {"s1": 2.0}

    @pytest.mark.parametrize("text", [
        "s1\t0.5\ns1\t0.7\n",
        "s1\t0.5\ns2\thigh\n",
        "s1\t0.5\textra\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(DataFormatError):
            quality_service.ingest_external_scores(io.StringIO(text))


class TestFilter:
    ITEMS = ["a", "b", "c", "d", "e"]
    SCORES = {"a": 5.0, "b": 1.0, "c": 3.0, "d": 1.0, "e": 9.0}

    def test_keep_lowest(self):
        assert quality_service.filter_by_score(self.ITEMS, self.SCORES, 0.4) == ["b", "d"]

    def test_keep_highest(self):
        assert quality_service.filter_by_score(self.ITEMS, self.SCORES, 0.6, keep_lowest=False) == ["a", "c", "e"]

    def test_ties_go_to_the_earlier_item(self):
        assert quality_service.filter_by_score(self.ITEMS, self.SCORES, 0.2) == ["b"]

    def test_fractions(self):
        assert quality_service.filter_by_score(self.ITEMS, self.SCORES, 1.0) == self.ITEMS
        assert quality_service.filter_by_score(self.ITEMS, self.SCORES, 0.1) == []
        with pytest.raises(UsageError):
            quality_service.filter_by_score(self.ITEMS, self.SCORES, 0.0)
        with pytest.raises(UsageError):
            quality_service.filter_by_score(self.ITEMS, self.SCORES, 1.5)

    def test_key_function(self):
        items = [{"id": k} for k in self.ITEMS]
        kept = quality_service.filter_by_score(items, self.SCORES, 0.4, key=lambda item: item["id"])
        assert kept == [{"id": "b"}, {"id": "d"}]

    def test_missing_score(self):
        with pytest.raises(DataFormatError):
            quality_service.filter_by_score(self.ITEMS + ["f"], self.SCORES, 0.5)


class TestFrequencyCorrelates:
    @pytest.fixture
    def training(self):
        dist = ConditionalPatternDistribution()
        dist.add(P, P, 10)
        for target, n in (("q1~X~leaf", 1), ("q2~X~leaf", 5), ("q3~X~leaf", 20), ("q4~X~leaf", 40)):
            dist.add(P, target, n)
        dist.add("iobj~PRON~leaf", "obl~PRON~leaf", 3)
        return dist

    DELTAS = [-0.1, -0.3, -0.2, -0.6]

    def reports(self):
        return [report(P, f"q{i + 1}~X~leaf", delta) for i, delta in enumerate(self.DELTAS)]

    def test_predictors(self, training):
        rows = {row.predictor: row for row in quality_service.frequency_correlates(self.reports(), training)}
        assert set(rows) == {"abs_freq", "rel_freq", "log_abs", "log_rel"}
        r, p_value = stats.pearsonr([1, 5, 20, 40], self.DELTAS)
        assert rows["abs_freq"].pearson_r == pytest.approx(r)
        assert rows["abs_freq"].pearson_p == pytest.approx(p_value)
        r_log, _ = stats.pearsonr([math.log(0.1), math.log(0.5), math.log(2.0), math.log(4.0)], self.DELTAS)
        assert rows["log_rel"].pearson_r == pytest.approx(r_log)
        assert rows["rel_freq"].kendall_tau == pytest.approx(rows["abs_freq"].kendall_tau)
        assert all(row.n == 4 and row.note == "" for row in rows.values())

    def test_no_convergent_count(self, training):
        reports = self.reports() + [report("iobj~PRON~leaf", "obl~PRON~leaf", 0.4)]
        rows = {row.predictor: row for row in quality_service.frequency_correlates(reports, training)}
        assert rows["abs_freq"].n == 5
        assert rows["rel_freq"].n == 4
        assert rows["rel_freq"].note == "skipped 1"

    def test_metrics_are_separate(self, training):
        reports = self.reports() + [report(P, "q1~X~leaf", 1.0, metric="bleu")]
        rows = quality_service.frequency_correlates(reports, training)
        bleu = [row for row in rows if row.metric == "bleu"]
        assert len(rows) == 8
        assert all(row.n == 1 and row.pearson_r is None for row in bleu)

    def test_unseen_divergence(self, training):
        with pytest.raises(StatisticsError):
            quality_service.frequency_correlates([report(P, "q9~X~leaf", 0.1)], training)


def random_segments(seed: int, count: int = 100):
    """Hypothesis and reference segments sharing most of their words"""
    rng = np.random.default_rng(seed)
    vocabulary = [f"w{i}" for i in range(40)]
    hypotheses, references = [], []
    for _ in range(count):
        reference = list(rng.choice(vocabulary, size=int(rng.integers(6, 16))))
        hypothesis = [str(rng.choice(vocabulary)) if rng.random() < 0.2 else word for word in reference]
        if rng.random() < 0.3:
            hypothesis = hypothesis[:-1]
        hypotheses.append(" ".join(map(str, hypothesis)))
        references.append(" ".join(map(str, reference)))
    return hypotheses, references


class TestBleuCorpus:
    def test_hundred_segments_match_nltk(self):
        hypotheses, references = random_segments(17)
        expected = nltk_corpus_bleu([[r.split()] for r in references], [h.split() for h in hypotheses])
        assert 0.0 < expected < 1.0
        assert quality_service.corpus_bleu(hypotheses, references) == pytest.approx(100 * expected, rel=1e-9)

    def test_segment_order_does_not_matter(self):
        hypotheses, references = random_segments(23)
        baseline = quality_service.corpus_bleu(hypotheses, references)
        rng = np.random.default_rng(4)
        for _ in range(5):
            order = rng.permutation(len(hypotheses))
            shuffled = quality_service.corpus_bleu([hypotheses[i] for i in order], [references[i] for i in order])
            assert shuffled == pytest.approx(baseline, rel=1e-12)


def expected_groups(index, source, target):
    """Control and experiment membership from outcome counts per sentence"""
    control, experiment = [], []
    for sentence_id, occurrences in index.items():
        outcomes = Counter((o.outcome.value, o.target_key if o.outcome.value == "divergent" else "")
                           for o in occurrences if o.source_key == source)
        total = sum(outcomes.values())
        if total and outcomes[("convergent", "")] == total:
            control.append(sentence_id)
        elif total and outcomes[("divergent", target)] == 1 and outcomes[("convergent", "")] == total - 1:
            experiment.append(sentence_id)
    return control, experiment


class TestGroupAudit:
    def test_membership_on_a_synthetic_corpus(self):
        rng = np.random.default_rng(31)
        outcomes = [("convergent", None)] * 6 + [("divergent", Q), ("divergent", Q2), ("null", None), ("other", None)]
        found = []
        for s in range(400):
            for _ in range(int(rng.integers(0, 5))):
                source = P if rng.random() < 0.8 else "nsubj~PRON~leaf"
                outcome, target = outcomes[int(rng.integers(len(outcomes)))]
                found.append(occurrence(f"s{s:03d}", source, outcome, target))
        index = quality_service.index_occurrences(found)
        control, experiment = expected_groups(index, P, Q)
        assert control and experiment

        spec = quality_service.build_groups(index, P, Q, min_size=1)
        assert spec.control_ids == control
        assert spec.experiment_ids == experiment
        assert not set(spec.control_ids) & set(spec.experiment_ids)

        for sentence_id in spec.experiment_ids:
            kinds = [o.outcome.value for o in index[sentence_id] if o.source_key == P]
            assert kinds.count("divergent") == 1
            assert "null" not in kinds and "other" not in kinds

import math
import os
import time

import pytest
from pydantic import ValidationError

from app.models.distribution import ConditionalPatternDistribution
from app.models.synthetic import DecoderBias, GeneratorSpec, OutcomeSpec, PatternSpec
from app.services.alignment_service import alignment_service
from app.services.corpus_service import CorpusPaths, ShardJob, corpus_service
from app.services.stats_service import stats_service
from app.services.synthcorpus_service import synthcorpus_service
from app.services.treebank_service import treebank_service


def generator_spec(sentences: int = 1500, seed: int = 3) -> GeneratorSpec:
    return GeneratorSpec(
        sentences=sentences,
        seed=seed,
        min_dependents=1,
        max_dependents=3,
        function_word_rate=0.3,
        patterns=[
            PatternSpec(deprel="obj", upos="NOUN", weight=2, outcomes=[
                OutcomeSpec(probability=0.7),
                OutcomeSpec(deprel="obl", probability=0.3),
            ]),
            PatternSpec(deprel="nsubj", upos="PRON", weight=1, outcomes=[
                OutcomeSpec(probability=0.8),
                OutcomeSpec(kind="null", probability=0.1),
                OutcomeSpec(kind="other", probability=0.1),
            ]),
            PatternSpec(deprel="advmod", upos="ADV", weight=1, outcomes=[
                OutcomeSpec(probability=0.5),
                OutcomeSpec(via="obl", upos="NOUN", deprel="nmod", probability=0.5),
            ]),
        ],
    )


def reference() -> ConditionalPatternDistribution:
    dist = ConditionalPatternDistribution()
    for source, outcomes in {"p": {"p": 6, "q": 3, "r": 1}, "s": {"s": 2, "t": 8}}.items():
        for outcome, n in outcomes.items():
            dist.add(source, outcome, n)
    return dist


def analyse(directory, workers=1, shard_size=2000):
    paths = CorpusPaths(src=directory / "source.conllu", tgt=directory / "target.conllu", align=directory / "align.txt")
    job = ShardJob(content_deprels=alignment_service.load_content_deprels())
    return corpus_service.analyze(paths, job, shard_size=shard_size, workers=workers)


class TestGenerator:
    def test_same_seed_same_corpus(self):
        assert synthcorpus_service.gen_parallel_corpus(generator_spec(300)) == \
            synthcorpus_service.gen_parallel_corpus(generator_spec(300))
        assert synthcorpus_service.gen_parallel_corpus(generator_spec(300)) != \
            synthcorpus_service.gen_parallel_corpus(generator_spec(300, seed=4))

    def test_ranges_do_not_change_sentences(self):
        spec = generator_spec(2500)

        def dump(triples):
            return [(s.model_dump(), t.model_dump(), line) for s, t, line in triples]

        whole = dump(synthcorpus_service.iter_sentences(spec, 0, 2500))
        split = dump(synthcorpus_service.iter_sentences(spec, 0, 700)) + \
            dump(synthcorpus_service.iter_sentences(spec, 700, 2500))
        assert split == whole

    def test_output_is_valid(self, tmp_path):
        paths = synthcorpus_service.write_parallel_corpus(generator_spec(200), tmp_path)
        sources = treebank_service.parse_conllu(paths["src"].read_text(encoding="utf-8"))
        targets = treebank_service.parse_conllu(paths["tgt"].read_text(encoding="utf-8"))
        lines = paths["align"].read_text(encoding="utf-8").splitlines()
        assert len(sources) == len(targets) == len(lines) == 200
        assert sources[0].sentence_id == "syn0"
        for source, target, line in zip(sources, targets, lines):
            assert treebank_service.validate_tree(source) == []
            assert treebank_service.validate_tree(target) == []
            alignment_service.parse_pharaoh(line, len(source), len(target))

    def test_workers_do_not_change_output(self, tmp_path):
        one = synthcorpus_service.write_parallel_corpus(generator_spec(1200), tmp_path / "one", workers=1)
        two = synthcorpus_service.write_parallel_corpus(generator_spec(1200), tmp_path / "two", workers=2)
        for name in ("src", "tgt", "align"):
            assert one[name].read_bytes() == two[name].read_bytes()

    def test_planted_outcomes_are_recovered(self, tmp_path):
        synthcorpus_service.write_parallel_corpus(generator_spec(1500), tmp_path)
        analysis = analyse(tmp_path)
        words = analysis.distribution("word", "o2o")
        assert stats_service.convergence_rate(words, "obj~NOUN~leaf") == pytest.approx(0.7, abs=0.05)
        assert stats_service.convergence_rate(words, "nsubj~PRON~leaf") == 1.0
        breakdown = stats_service.outcome_breakdown(analysis.distribution("word", "all"), "nsubj~PRON~leaf")
        assert breakdown.null == pytest.approx(10.0, abs=4.0)
        assert breakdown.others == pytest.approx(10.0, abs=4.0)
        arcs = analysis.distribution("arc", "o2o")
        assert arcs.outcomes("VERB~advmod~ADV").keys() == {"VERB~advmod~ADV", "VERB~nmod|obl~NOUN"}

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            GeneratorSpec(sentences=1, min_dependents=3, max_dependents=2,
                          patterns=[PatternSpec(deprel="obj", upos="NOUN", weight=1,
                                                outcomes=[OutcomeSpec(probability=1)])])
        with pytest.raises(ValidationError):
            PatternSpec(deprel="obj", upos="NOUNS", weight=1, outcomes=[OutcomeSpec(probability=1)])
        with pytest.raises(ValidationError):
            PatternSpec(deprel="obj", upos="NOUN", weight=1, outcomes=[OutcomeSpec(probability=0)])


class TestDecoders:
    def test_argmax(self):
        mt = synthcorpus_service.simulate_decoder(reference(), DecoderBias(mode="argmax"))
        assert mt.counts == {"p": {"p": 10}, "s": {"t": 10}}
        assert stats_service.aggregate_diversity(mt) == 0.0

    def test_argmax_ties_go_to_the_smaller_key(self):
        dist = ConditionalPatternDistribution()
        dist.add("p", "z", 5)
        dist.add("p", "a", 5)
        assert synthcorpus_service.simulate_decoder(dist, DecoderBias(mode="argmax")).counts == {"p": {"a": 10}}

    def test_faithful_sample(self):
        ht = reference()
        mt = synthcorpus_service.simulate_decoder(ht, DecoderBias(seed=5))
        assert mt.totals() == ht.totals()
        assert set(mt.outcomes("p")) <= {"p", "q", "r"}
        assert mt == synthcorpus_service.simulate_decoder(ht, DecoderBias(seed=5))

    def test_cold_temperature_acts_like_argmax(self):
        mt = synthcorpus_service.simulate_decoder(reference(), DecoderBias(mode="temperature", temperature=0.05))
        assert mt.counts == {"p": {"p": 10}, "s": {"t": 10}}

    def test_top_p(self):
        narrow = synthcorpus_service.simulate_decoder(reference(), DecoderBias(mode="top_p", top_p=0.5))
        assert narrow.counts == {"p": {"p": 10}, "s": {"t": 10}}
        wider = synthcorpus_service.simulate_decoder(reference(), DecoderBias(mode="top_p", top_p=0.85, seed=2))
        assert set(wider.outcomes("p")) <= {"p", "q"}

    def test_compare_decoders(self):
        biases = [DecoderBias(mode="faithful_sample"), DecoderBias(mode="argmax"),
                  DecoderBias(mode="temperature", temperature=2.0), DecoderBias(mode="top_p", top_p=0.9)]
        rows = synthcorpus_service.compare_decoders(reference(), biases)
        assert [row.decoder for row in rows] == ["ht", "faithful_sample", "argmax", "temperature(2)", "top_p(0.9)"]
        assert rows[0].convergence_rate == pytest.approx(8 / 20)
        assert rows[2].diversity == 0.0
        assert rows[2].convergence_rate == pytest.approx(0.5)

    def test_argmax_raises_convergence_of_mostly_convergent_patterns(self):
        ht = synthcorpus_service.sweep_distribution()
        mt = synthcorpus_service.simulate_decoder(ht, DecoderBias(mode="argmax"))
        for pattern in ht.patterns():
            if stats_service.convergence_rate(ht, pattern) >= 0.5:
                assert stats_service.convergence_rate(mt, pattern) == 1.0
        assert stats_service.aggregate_diversity(mt) < stats_service.aggregate_diversity(ht)

    def test_argmax_delta_curve_peaks_mid_range(self):
        ht = synthcorpus_service.sweep_distribution()
        mt = synthcorpus_service.simulate_decoder(ht, DecoderBias(mode="argmax"))
        xs = [stats_service.convergence_rate(ht, p) for p in ht.patterns()]
        ys = [stats_service.convergence_rate(mt, p) - x for p, x in zip(ht.patterns(), xs)]
        fit = stats_service.quadratic_fit(xs, ys)
        assert fit.a < 0
        assert 0.4 < fit.vertex < 0.7


class TestSweep:
    def test_grid(self):
        dist = synthcorpus_service.sweep_distribution()
        assert len(dist.patterns()) == 19 * 9
        assert set(dist.totals().values()) == {10000}
        rates = sorted({round(stats_service.convergence_rate(dist, p), 6) for p in dist.patterns()})
        assert rates[0] == pytest.approx(0.05)
        assert rates[-1] == pytest.approx(0.95)

    def test_custom_grid(self):
        dist = synthcorpus_service.sweep_distribution(rates=[0.5], fractions=[1.0], total=100)
        assert dist.counts == {"r00f00~NOUN~leaf": {"r00f00~NOUN~leaf": 50, "main~NOUN~leaf": 50}}


class TestDrift:
    @pytest.fixture
    def reference_by_frequency(self):
        dist = ConditionalPatternDistribution()
        for i in range(60):
            n = int(round(10 ** (1 + 3.5 * i / 59)))
            pattern = f"p{i:02d}~NOUN~leaf"
            dist.add(pattern, pattern, n - n // 3)
            dist.add(pattern, "obl~NOUN~leaf", n // 3)
        return dist

    def test_distance_follows_frequency(self, reference_by_frequency):
        drifted = synthcorpus_service.plant_frequency_drift(reference_by_frequency)
        for pattern in reference_by_frequency.patterns():
            expected = min(1.0, 1.0 / (1.0 + math.log10(reference_by_frequency.pattern_total(pattern))))
            distance = stats_service.pattern_wasserstein(reference_by_frequency, drifted, pattern)
            assert distance == pytest.approx(expected, abs=1e-5)

    def test_binned_means_fall_with_frequency(self, reference_by_frequency):
        drifted = synthcorpus_service.plant_frequency_drift(reference_by_frequency)
        binned = stats_service.bin_wd_by_frequency(reference_by_frequency, drifted, bin_width=0.5)
        means = [b.mean for b in binned.bins if b.count]
        assert len(means) >= 5
        assert all(later < earlier for earlier, later in zip(means, means[1:]))


@pytest.mark.slow
def test_large_corpus_is_stable_across_workers(tmp_path):
    spec = generator_spec(20000, seed=11)
    synthcorpus_service.write_parallel_corpus(spec, tmp_path, workers=2)
    serial = analyse(tmp_path, workers=1, shard_size=3000)
    parallel = analyse(tmp_path, workers=3, shard_size=700)
    assert serial.model_dump() == parallel.model_dump()

    words = serial.distribution("word", "o2o")
    assert stats_service.convergence_rate(words, "obj~NOUN~leaf") == pytest.approx(0.7, abs=0.02)
    mt = synthcorpus_service.simulate_decoder(words, DecoderBias(mode="argmax"))
    assert stats_service.convergence_rate(mt, "obj~NOUN~leaf") == 1.0
    rows = synthcorpus_service.compare_decoders(words, [DecoderBias(), DecoderBias(mode="argmax")])
    assert rows[2].diversity < rows[1].diversity


@pytest.mark.slow
def test_argmax_decoder_direction_on_a_large_corpus(tmp_path):
    spec = GeneratorSpec(
        sentences=100_000,
        seed=7,
        min_dependents=1,
        max_dependents=2,
        function_word_rate=0.3,
        patterns=[
            PatternSpec(deprel="obj", upos="NOUN", weight=2, outcomes=[
                OutcomeSpec(probability=0.9),
                OutcomeSpec(deprel="obl", probability=0.1),
            ]),
            PatternSpec(deprel="nsubj", upos="PRON", weight=2, outcomes=[
                OutcomeSpec(probability=0.9),
                OutcomeSpec(kind="null", probability=0.05),
                OutcomeSpec(kind="other", probability=0.05),
            ]),
            PatternSpec(deprel="advmod", upos="ADV", weight=1, outcomes=[
                OutcomeSpec(probability=0.9),
                OutcomeSpec(via="obl", upos="NOUN", deprel="nmod", probability=0.1),
            ]),
        ],
    )
    synthcorpus_service.write_parallel_corpus(spec, tmp_path, workers=4)
    analysis = analyse(tmp_path, workers=4, shard_size=5000)

    for pattern_type in ("word", "arc"):
        ht = analysis.distribution(pattern_type, "o2o")
        ht_row, faithful, argmax = synthcorpus_service.compare_decoders(
            ht, [DecoderBias(seed=1), DecoderBias(mode="argmax")]
        )
        assert argmax.diversity < ht_row.diversity
        assert argmax.convergence_rate > ht_row.convergence_rate

        variance = sum(
            ht.pattern_total(p) * r * (1 - r)
            for p in ht.patterns()
            for r in [stats_service.convergence_rate(ht, p)]
        )
        sigma = math.sqrt(variance) / ht.total
        assert abs(faithful.convergence_rate - ht_row.convergence_rate) <= 3 * sigma
        assert faithful.diversity == pytest.approx(ht_row.diversity, abs=0.01)


@pytest.mark.slow
def test_million_token_throughput(tmp_path):
    spec = generator_spec(125_000, seed=13).model_copy(update={"min_dependents": 4, "max_dependents": 8})
    synthcorpus_service.write_parallel_corpus(spec, tmp_path, workers=4)
    with open(tmp_path / "source.conllu", encoding="utf-8") as handle:
        tokens = sum(1 for line in handle if line.strip() and not line.startswith("#"))
    assert tokens >= 1_000_000

    started = time.perf_counter()
    analysis = analyse(tmp_path, workers=min(8, os.cpu_count() or 1), shard_size=5000)
    elapsed = time.perf_counter() - started
    words = analysis.distribution("word", "o2o")
    stats_service.aggregate_summary(words)
    stats_service.aggregate_summary(analysis.distribution("arc", "o2o"))

    assert analysis.sentences == 125_000
    assert elapsed < 300, f"{tokens} tokens took {elapsed:.0f}s"

from pathlib import Path
from typing import Dict, List

import pytest

from app.models.patterns import PatternOccurrence
from app.services.alignment_service import alignment_service
from app.services.corpus_service import CorpusPaths, ShardJob, corpus_service
from app.services.treebank_service import treebank_service

GOLDEN = Path(__file__).parent / "data" / "golden"


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture(scope="session")
def content_deprels():
    return alignment_service.load_content_deprels()


@pytest.fixture(scope="session")
def golden_paths() -> CorpusPaths:
    return CorpusPaths(src=GOLDEN / "source.conllu", tgt=GOLDEN / "target.conllu", align=GOLDEN / "align.txt")


@pytest.fixture(scope="session")
def golden_pairs(golden_paths, content_deprels):
    """Every golden sentence pair, built without the shard machinery"""
    sources = treebank_service.parse_conllu(golden_paths.src.read_text(encoding="utf-8"))
    targets = treebank_service.parse_conllu(golden_paths.tgt.read_text(encoding="utf-8"))
    lines = golden_paths.align.read_text(encoding="utf-8").split("\n")
    return [
        alignment_service.build_pair(ordinal, source, target, line, content_deprels)
        for ordinal, (source, target, line) in enumerate(zip(sources, targets, lines))
    ]


@pytest.fixture(scope="session")
def golden_run(golden_paths, content_deprels):
    """Analysis of the golden corpus plus every occurrence, by pattern type"""
    occurrences: Dict[str, List[PatternOccurrence]] = {"word": [], "arc": []}

    def sink(result):
        for pattern_type, found in result.occurrences.items():
            occurrences[pattern_type].extend(found)

    job = ShardJob(content_deprels=content_deprels, collect_occurrences=True, collect_ids=True)
    analysis = corpus_service.analyze(golden_paths, job, shard_size=4, sink=sink)
    return analysis, occurrences


@pytest.fixture
def golden_analysis(golden_run):
    return golden_run[0]


@pytest.fixture
def golden_occurrences(golden_run):
    return golden_run[1]

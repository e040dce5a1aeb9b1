import io
import json

import pytest

from app.exceptions import DataFormatError, UsageError
from app.models.patterns import Outcome
from app.models.schemas import FrequencyBin
from app.services.report_service import TsvWriter, format_cell, report_service


class TestCells:
    @pytest.mark.parametrize("value, text", [
        (None, "NA"),
        (True, "true"),
        (3, "3"),
        (0.1 + 0.2, "0.3"),
        (1 / 3, "0.333333333333"),
        (Outcome.NULL, "null"),
        ("obj~NOUN~leaf", "obj~NOUN~leaf"),
    ])
    def test_format(self, value, text):
        assert format_cell(value) == text


class TestTsv:
    def test_writer_streams_models_dicts_and_sequences(self):
        handle = io.StringIO()
        writer = TsvWriter(handle, ["lower", "upper", "count", "mean"], "abc123")
        writer.write(FrequencyBin(lower=1.0, upper=1.5, count=0))
        writer.write({"lower": 1.5, "upper": 2.0, "count": 2, "mean": 0.25})
        writer.write([2.0, 2.5, 1, 0.5])
        assert writer.rows == 3
        assert handle.getvalue() == (
            "# config_hash: abc123\n"
            "lower\tupper\tcount\tmean\n"
            "1\t1.5\t0\tNA\n"
            "1.5\t2\t2\t0.25\n"
            "2\t2.5\t1\t0.5\n"
        )

    def test_write_then_read(self, tmp_path):
        path = report_service.write_tsv(tmp_path / "out" / "bins.tsv", ["pattern", "wd"],
                                        [["obj~NOUN~leaf", 0.5], ["nsubj~PRON~leaf", None]], "f00d")
        table = report_service.read_tsv(path)
        assert table.config_hash == "f00d"
        assert table.columns == ["pattern", "wd"]
        assert table.column("pattern") == ["obj~NOUN~leaf", "nsubj~PRON~leaf"]
        assert table.floats("wd") == [0.5, None]

    def test_read_without_hash_line(self, tmp_path):
        path = tmp_path / "plain.tsv"
        path.write_text("x\ty\n1\t2\n", encoding="utf-8")
        table = report_service.read_tsv(path)
        assert table.config_hash is None
        assert table.floats("y") == [2.0]

    def test_unknown_column(self, tmp_path):
        path = report_service.write_tsv(tmp_path / "r.tsv", ["a"], [[1]], "h")
        with pytest.raises(UsageError, match="available: a"):
            report_service.read_tsv(path).column("b")

    def test_non_numeric_column(self, tmp_path):
        path = report_service.write_tsv(tmp_path / "r.tsv", ["a"], [["x"]], "h")
        with pytest.raises(DataFormatError):
            report_service.read_tsv(path).floats("a")

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "r.tsv"
        path.write_text("# config_hash: h\na\tb\n1\t2\n3\n", encoding="utf-8")
        with pytest.raises(DataFormatError) as caught:
            report_service.read_tsv(path)
        assert caught.value.line == 4

    def test_missing_and_empty_files(self, tmp_path):
        with pytest.raises(UsageError):
            report_service.read_tsv(tmp_path / "absent.tsv")
        empty = tmp_path / "empty.tsv"
        empty.write_text("", encoding="utf-8")
        with pytest.raises(DataFormatError):
            report_service.read_tsv(empty)


class TestJson:
    def test_sorted_keys_and_hash(self, tmp_path):
        path = report_service.write_json(tmp_path / "summary.json",
                                         {"zeta": 1, "bin": FrequencyBin(lower=0, upper=1, count=0)}, "h1")
        text = path.read_text(encoding="utf-8")
        document = json.loads(text)
        assert document["config_hash"] == "h1"
        assert document["bin"]["mean"] is None
        assert list(document) == ["bin", "config_hash", "zeta"]
        assert text.endswith("}\n")

    def test_nan_is_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            report_service.write_json(tmp_path / "bad.json", {"value": float("nan")}, "h")

"""
Report Service for morphdiv
Writes and reads the TSV and JSON report files every command emits
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, IO, Iterable, List, Optional, Sequence

from pydantic import BaseModel

from app.exceptions import DataFormatError, UsageError

# Configure logging
logger = logging.getLogger(__name__)

HASH_PREFIX = "# config_hash: "
MISSING = "NA"


class TsvTable(BaseModel):
    config_hash: Optional[str] = None
    columns: List[str]
    rows: List[Dict[str, str]]

    def column(self, name: str) -> List[str]:
        if name not in self.columns:
            raise UsageError(f"Column {name!r} not in report; available: {', '.join(self.columns)}")
        return [row[name] for row in self.rows]

    def floats(self, name: str) -> List[Optional[float]]:
        """Numeric column; NA cells become None"""
        values = []
        for cell in self.column(name):
            if cell == MISSING:
                values.append(None)
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise DataFormatError(f"Column {name!r} holds non-numeric value {cell!r}")
        return values


class TsvWriter:
    """Streams rows to a TSV report; the header goes out on construction"""

    def __init__(self, handle: IO[str], columns: Sequence[str], config_hash: str):
        self.columns = list(columns)
        handle.write(f"{HASH_PREFIX}{config_hash}\n")
        self._writer = csv.writer(handle, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_NONE,
                                  escapechar="\\")
        self._writer.writerow(self.columns)
        self.rows = 0

    def write(self, row: Any) -> None:
        if isinstance(row, BaseModel):
            row = row.model_dump()
        if isinstance(row, dict):
            row = [row.get(column) for column in self.columns]
        self._writer.writerow([format_cell(value) for value in row])
        self.rows += 1


class ReportService:
    """Service for report emission"""

    def write_tsv(self, path: Path, columns: Sequence[str], rows: Iterable[Any], config_hash: str) -> Path:
        """
        Write a TSV report

        Args:
            path: Output file
            columns: Header row
            rows: pydantic models, dicts keyed by column, or sequences in column order
            config_hash: Hash written on the first line

        Returns:
            The written path
        """
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = TsvWriter(handle, columns, config_hash)
            for row in rows:
                writer.write(row)
        logger.info(f"Wrote {writer.rows} rows to {path}")
        return path

    def write_json(self, path: Path, payload: Dict[str, Any], config_hash: str) -> Path:
        """Write a JSON report with sorted keys and the config hash"""
        path.parent.mkdir(parents=True, exist_ok=True)
        document = {"config_hash": config_hash, **_plain(payload)}
        with open(path, "w", encoding="utf-8", newline="") as handle:
            json.dump(document, handle, indent=2, sort_keys=True, allow_nan=False)
            handle.write("\n")
        logger.info(f"Wrote {path}")
        return path

    def read_tsv(self, path: Path) -> TsvTable:
        """
        Read a TSV report written by write_tsv

        Args:
            path: Report file

        Returns:
            TsvTable with string cells
        """
        if not Path(path).is_file():
            raise UsageError(f"Report file not found: {path}")
        with open(path, encoding="utf-8", newline="") as handle:
            first = handle.readline()
            config_hash = None
            if first.startswith(HASH_PREFIX):
                config_hash = first[len(HASH_PREFIX):].strip()
            else:
                handle.seek(0)
            reader = csv.reader(handle, delimiter="\t", quoting=csv.QUOTE_NONE, escapechar="\\")
            try:
                columns = next(reader)
            except StopIteration:
                raise DataFormatError(f"Report {path} has no header row")
            rows = []
            for number, cells in enumerate(reader, start=3 if config_hash else 2):
                if len(cells) != len(columns):
                    raise DataFormatError(f"Expected {len(columns)} cells, found {len(cells)}", line=number)
                rows.append(dict(zip(columns, cells)))
        return TsvTable(config_hash=config_hash, columns=columns, rows=rows)


def format_cell(value: Any) -> str:
    if value is None:
        return MISSING
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def _plain(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


# Global report service instance
report_service = ReportService()

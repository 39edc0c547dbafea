"""Trace files: ``#`` header lines, then one CSV row per transaction record.

Header keys are ``version``, ``seed``, ``config_sha256`` and ``config``
(canonical JSON of the run configuration, used by ``replay``).  Floats are
written with ``repr`` so reading and rewriting a trace reproduces it byte
for byte.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

from .market_minimal import TRACE_COLUMNS, TransactionRecord

FORMAT_VERSION = "1"
MAGIC = "# cgsmarket trace"
HEADER_KEYS = ("version", "seed", "config_sha256", "config")

ROUND_COLUMNS = ("tick", "ensemble_id", "round", "offer_price", "acceptance_rate", "n_fills")
FUNDAMENTAL_COLUMNS = ("tick", "object", "value")
VALUATION_COLUMNS = ("tick", "agent", "object", "value", "meaning")
EDGE_COLUMNS = ("tick", "kind", "id_a", "id_b")
POSITION_COLUMNS = ("tick", "id", "x", "y")


class TraceError(Exception):
    """Unreadable or malformed trace."""


@dataclass
class Trace:
    header: dict[str, str]
    records: list[TransactionRecord] = field(default_factory=list)

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(MAGIC + "\n")
        for key in HEADER_KEYS:
            buf.write(f"# {key}={self.header[key]}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.records:
            w.writerow(r.to_row())
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


def loads(text: str) -> Trace:
    lines = text.split("\n")
    if not lines or lines[0] != MAGIC:
        raise TraceError("missing trace header")
    header: dict[str, str] = {}
    i = 1
    while i < len(lines) and lines[i].startswith("# "):
        key, sep, value = lines[i][2:].partition("=")
        if not sep:
            raise TraceError(f"bad header line {i + 1}: {lines[i]!r}")
        header[key] = value
        i += 1
    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise TraceError(f"header lacks {missing}")
    if header["version"] != FORMAT_VERSION:
        raise TraceError(f"unsupported trace version {header['version']!r}")
    rows = list(csv.reader(io.StringIO("\n".join(lines[i:]))))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise TraceError("missing or wrong column header")
    records = []
    last_tick = None
    for n, row in enumerate(rows[1:], start=i + 2):
        try:
            rec = TransactionRecord.from_row(row)
        except ValueError as exc:
            raise TraceError(f"line {n}: {exc}") from None
        if last_tick is not None and rec.tick < last_tick:
            raise TraceError(f"line {n}: tick goes backwards")
        last_tick = rec.tick
        records.append(rec)
    return Trace(header, records)


def read_trace(path) -> Trace:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise TraceError(f"cannot read {path}: {exc}") from None
    return loads(text)


def write_table(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def read_table(path, columns) -> list[list[str]]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise TraceError(f"cannot read {path}: {exc}") from None
    if not rows or tuple(rows[0]) != tuple(columns):
        raise TraceError(f"{path}: wrong column header")
    return rows[1:]

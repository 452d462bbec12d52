"""CSV report rows: fixed header, 17 significant digits, lossless parse-back."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

HEADER = ("experiment", "x", "t", "mc", "ci_lo", "ci_hi", "asym", "ratio", "n", "seed", "flags")
FLAGS = ("ok", "pre-asymptotic", "zero-hits", "assumption-violated")
FLAG_SEP = ";"


@dataclass(frozen=True)
class ReportRow:
    """One experiment cell.  ``None`` marks a column that does not apply to the experiment kind."""

    experiment: str
    x: Optional[float]
    t: Optional[float]
    mc: Optional[float]
    ci_lo: Optional[float]
    ci_hi: Optional[float]
    asym: Optional[float]
    ratio: Optional[float]
    n: int
    seed: int
    flags: Tuple[str, ...] = ("ok",)

    def __post_init__(self):
        flags = tuple(self.flags) or ("ok",)
        bad = [f for f in flags if f not in FLAGS]
        if bad:
            raise ValueError(f"unknown flags {bad}; allowed: {FLAGS}")
        if "ok" in flags and len(flags) > 1:
            flags = tuple(f for f in flags if f != "ok")
        object.__setattr__(self, "flags", tuple(dict.fromkeys(flags)))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def _parse_float(s: str) -> Optional[float]:
    return None if s == "" else float(s)


def format_row(row: ReportRow) -> List[str]:
    reals = (row.x, row.t, row.mc, row.ci_lo, row.ci_hi, row.asym, row.ratio)
    return ([row.experiment] + [_fmt(None if v is None else float(v)) for v in reals]
            + [str(int(row.n)), str(int(row.seed)), FLAG_SEP.join(row.flags)])


def parse_row(cells: List[str]) -> ReportRow:
    if len(cells) != len(HEADER):
        raise ValueError(f"expected {len(HEADER)} columns, got {len(cells)}")
    name, *reals, n, seed, flags = cells
    return ReportRow(name, *(_parse_float(c) for c in reals), int(n), int(seed), tuple(flags.split(FLAG_SEP)))


def to_csv(rows: Iterable[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow(format_row(r))
    return buf.getvalue()


def from_csv(text: str) -> List[ReportRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != HEADER:
        raise ValueError(f"unexpected header {header}")
    return [parse_row(r) for r in reader]


def write_csv(path: str | Path, rows: Iterable[ReportRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(rows))
    return path


def read_csv(path: str | Path) -> List[ReportRow]:
    return from_csv(Path(path).read_text(encoding="utf-8"))

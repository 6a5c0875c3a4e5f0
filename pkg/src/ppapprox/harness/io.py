"""Result rows, CSV/JSON output and the pattern file format."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..metrics import PointPattern

__all__ = [
    "ResultRow",
    "BASE_COLUMNS",
    "TERM_ORDER",
    "format_real",
    "to_jsonable",
    "rows_to_csv",
    "write_results",
    "read_csv",
    "write_pattern",
    "read_pattern",
]

BASE_COLUMNS = (
    "experiment_id", "T", "replicate", "theorem", "m", "h", "total", "clamped", "empirical", "mc_se", "seed", "note",
)

TERM_ORDER = (
    "discretization_d1",
    "discretization_d2_dir",
    "strong_neighborhood",
    "orderliness_cells",
    "orderliness_sections",
    "mixing",
    "mixing_orderliness",
    "poisson_shift",
    "regularity",
    "coupling",
    "count_tail",
    "dbw_part",
    "sd",
    "bias",
)


@dataclass
class ResultRow:
    """One line of experiment output.

    ``terms`` holds labelled bound contributions, ``extra`` any further
    diagnostics.  ``wall_time`` is kept out of the CSV so that the CSV is
    reproducible byte for byte.
    """

    experiment_id: str
    T: float
    theorem: str
    total: float | None = None
    terms: dict = field(default_factory=dict)
    empirical: float | None = None
    mc_se: float | None = None
    seed: int = 0
    replicate: int = 0
    m: int | None = None
    h: float | None = None
    note: str = ""
    extra: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def clamped(self) -> float | None:
        return None if self.total is None else min(self.total, 1.0)

    def sort_key(self):
        return (self.T, self.replicate)

    def as_json(self) -> dict:
        d = asdict(self)
        d["clamped"] = self.clamped
        return to_jsonable(d)


def to_jsonable(x):
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def format_real(x) -> str:
    """17 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _columns(rows) -> tuple[list[str], list[str]]:
    present = set().union(*(r.terms.keys() for r in rows)) if rows else set()
    terms = [t for t in TERM_ORDER if t in present] + sorted(present - set(TERM_ORDER))
    extras = sorted(set().union(*(r.extra.keys() for r in rows))) if rows else []
    return terms, extras


def rows_to_csv(rows) -> str:
    rows = sorted(rows, key=ResultRow.sort_key)
    terms, extras = _columns(rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(BASE_COLUMNS) + [f"term:{t}" for t in terms] + [f"extra:{e}" for e in extras])
    for r in rows:
        base = [
            r.experiment_id, format_real(r.T), str(r.replicate), r.theorem,
            "" if r.m is None else str(int(r.m)), format_real(r.h), format_real(r.total), format_real(r.clamped),
            format_real(r.empirical), format_real(r.mc_se), str(int(r.seed)), r.note,
        ]
        writer.writerow(base + [format_real(r.terms.get(t)) for t in terms] + [format_real(r.extra.get(e)) for e in extras])
    return buf.getvalue()


def write_results(rows, summary: dict, out_dir, stem: str = "results") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}.json"
    rows = sorted(rows, key=ResultRow.sort_key)
    csv_path.write_text(rows_to_csv(rows))
    payload = dict(summary)
    payload["rows"] = [r.as_json() for r in rows]
    json_path.write_text(json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_pattern(pattern: PointPattern, path, d1_dims: int, d2_dims: int, T: float, w: float) -> Path:
    """One point per line, preceded by a header with ``D1 D2 T w``."""
    path = Path(path)
    lines = [f"# D1={d1_dims} D2={d2_dims} T={format_real(T)} w={format_real(w)}"]
    lines += [" ".join(format_real(c) for c in p) for p in pattern.points]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_pattern(path) -> tuple[PointPattern, dict]:
    """Inverse of :func:`write_pattern`; returns the pattern and the header fields."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError(f"{path}: missing header line '# D1=.. D2=.. T=.. w=..'")
    header = {}
    for item in text[0][1:].split():
        key, _, val = item.partition("=")
        header[key] = val
    try:
        meta = {"D1": int(header["D1"]), "D2": int(header["D2"]), "T": float(header["T"]), "w": float(header["w"])}
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed header: {text[0]!r}") from exc
    dim = meta["D1"] + meta["D2"]
    rows = [line.split() for line in text[1:] if line.strip() and not line.startswith("#")]
    if any(len(r) != dim for r in rows):
        raise ValueError(f"{path}: every point needs {dim} coordinates")
    pts = np.array(rows, dtype=float) if rows else np.zeros((0, dim))
    return PointPattern(pts, dim), meta

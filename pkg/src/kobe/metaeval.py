"""System-level meta-evaluation: Pearson correlation of metric scores with human DA.

Correlations are always kept signed. Reporting absolute values hides metrics
whose direction flips between language pairs, so every report carries an
explicit ``sign_negative`` flag instead.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .errors import ConfigError, DataError, UndefinedCorrelationError

MISSING_MARKERS = frozenset({"", "-", "--", "n/a", "na", "nan", "none", "null"})


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Signed product-moment correlation, computed with mean-subtracted sums."""
    n = len(x)
    if n != len(y):
        raise ValueError(f"length mismatch: {n} vs {len(y)}")
    if n < 2:
        raise UndefinedCorrelationError("correlation needs at least two points")
    mean_x = math.fsum(x) / n
    mean_y = math.fsum(y) / n
    dx = [v - mean_x for v in x]
    dy = [v - mean_y for v in y]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant vector")
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class SystemScores:
    system: str
    scores: Mapping[str, float]
    human_da: float | None


@dataclass(frozen=True)
class SystemScoreTable:
    language_pair: str
    rows: tuple[SystemScores, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        names = [r.system for r in self.rows]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"{self.language_pair}: duplicate systems {dupes}")

    @property
    def metric_names(self) -> list[str]:
        seen = {}
        for row in self.rows:
            for name in row.scores:
                seen.setdefault(name, None)
        return list(seen)

    def with_metric(self, metric_name: str, scores: Mapping[str, float]) -> SystemScoreTable:
        """Copy of the table with ``metric_name`` set from a system->score mapping.

        Systems absent from the table are ignored; table rows without a score
        get none for this metric.
        """
        rows = []
        for row in self.rows:
            merged = {k: v for k, v in row.scores.items() if k != metric_name}
            if row.system in scores:
                merged[metric_name] = float(scores[row.system])
            rows.append(replace(row, scores=merged))
        return replace(self, rows=tuple(rows))


@dataclass(frozen=True)
class CorrelationReport:
    language_pair: str
    metric_name: str
    r: float
    n_systems: int
    sign_negative: bool
    n_dropped: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def correlate_systems(table: SystemScoreTable, metric_name: str) -> CorrelationReport:
    xs, ys = [], []
    dropped = 0
    # sorted so the floating-point sums do not depend on row order
    for row in sorted(table.rows, key=lambda r: r.system):
        score = row.scores.get(metric_name)
        if score is None or row.human_da is None:
            dropped += 1
            continue
        xs.append(score)
        ys.append(row.human_da)
    if len(xs) < 2:
        raise UndefinedCorrelationError(
            f"{table.language_pair}: metric {metric_name!r} has {len(xs)} usable systems, need at least 2"
        )
    try:
        r = pearson(xs, ys)
    except UndefinedCorrelationError as exc:
        raise UndefinedCorrelationError(f"{table.language_pair}: metric {metric_name!r}: {exc}") from None
    return CorrelationReport(table.language_pair, metric_name, r, len(xs), r < 0, dropped)


def reproduce_baselines(table: SystemScoreTable, metric_names: Iterable[str]) -> list[CorrelationReport]:
    known = set(table.metric_names)
    names = list(metric_names)
    for name in names:
        if name not in known:
            raise ConfigError(f"{table.language_pair}: unknown metric column {name!r}")
    return [correlate_systems(table, name) for name in names]


@dataclass(frozen=True)
class CsvColumns:
    """Header names in the scores CSV. Unlisted columns are metric columns."""

    language_pair: str = "LP"
    system: str = "SYSTEM"
    human: str = "HUMAN"
    ignore: tuple[str, ...] = ("DATA",)

    @classmethod
    def from_dict(cls, data: Mapping) -> CsvColumns:
        unknown = set(data) - {"language_pair", "system", "human", "ignore"}
        if unknown:
            raise ConfigError(f"unknown scores-CSV column-map fields: {sorted(unknown)}")
        data = dict(data)
        if "ignore" in data:
            data["ignore"] = tuple(data["ignore"])
        return cls(**data)


# tried in order when the configured default header is absent
_HUMAN_FALLBACKS = ("HUMAN", "DA", "Human", "human", "z", "Z")


def _parse_float(value: str, where: str) -> float | None:
    text = value.strip()
    if text.lower() in MISSING_MARKERS:
        return None
    try:
        number = float(text)
    except ValueError:
        raise DataError(f"{where}: not a number: {value!r}") from None
    return None if math.isnan(number) else number


def read_scores_csv(
    source: str | os.PathLike | io.TextIOBase,
    columns: CsvColumns | None = None,
    delimiter: str = ",",
) -> dict[str, SystemScoreTable]:
    """Read a system-level scores CSV into one table per language pair."""
    cols = columns or CsvColumns()
    if hasattr(source, "read"):
        text = source.read()
        name = getattr(source, "name", "<scores>")
    else:
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8-sig")
        except OSError as exc:
            raise ConfigError(f"cannot read scores CSV {path}: {exc.strerror}") from exc
        name = str(path)

    reader = csv.DictReader(io.StringIO(text), delimiter=delimiter)
    header = [h.strip() for h in (reader.fieldnames or [])]
    reader.fieldnames = header
    if not header:
        raise DataError(f"{name}: empty scores CSV")
    if len(set(header)) != len(header):
        raise DataError(f"{name}: duplicate column names in header {header}")
    human = cols.human
    if human not in header and columns is None:
        human = next((h for h in _HUMAN_FALLBACKS if h in header), human)
    for required in (cols.language_pair, cols.system, human):
        if required not in header:
            raise ConfigError(f"{name}: missing column {required!r} (header: {header})")
    reserved = {cols.language_pair, cols.system, human, *cols.ignore}
    metric_cols = [h for h in header if h not in reserved]

    grouped: dict[str, list[SystemScores]] = {}
    for lineno, record in enumerate(reader, start=2):
        where = f"{name}:{lineno}"
        if None in record:
            raise DataError(f"{where}: more fields than header columns")
        lp = (record[cols.language_pair] or "").strip()
        system = (record[cols.system] or "").strip()
        if not lp or not system:
            raise DataError(f"{where}: empty language pair or system")
        scores = {}
        for metric in metric_cols:
            value = _parse_float(record[metric] or "", f"{where} [{metric}]")
            if value is not None:
                scores[metric] = value
        da = _parse_float(record[human] or "", f"{where} [{human}]")
        grouped.setdefault(lp, []).append(SystemScores(system, scores, da))
    return {lp: SystemScoreTable(lp, rows) for lp, rows in sorted(grouped.items())}


def reports_to_json(reports: Sequence[CorrelationReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, ensure_ascii=False) + "\n"


def reports_to_markdown(
    reports: Sequence[CorrelationReport],
    pairs: Sequence[str] | None = None,
    metrics: Sequence[str] | None = None,
    with_mean: bool = False,
    digits: int = 3,
) -> str:
    """Metrics as rows, language pairs as columns, ``--`` where no correlation exists."""
    table: dict[tuple[str, str], float] = {(r.metric_name, r.language_pair): r.r for r in reports}
    if pairs is None:
        pairs = sorted({r.language_pair for r in reports})
    if metrics is None:
        metrics = list(dict.fromkeys(r.metric_name for r in reports))
    header = ["metric", *pairs] + (["mean"] if with_mean else [])
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] * len(header)) + "|"]
    for metric in metrics:
        cells = [metric]
        values = []
        for lp in pairs:
            r = table.get((metric, lp))
            cells.append("--" if r is None else f"{r:.{digits}f}")
            if r is not None:
                values.append(r)
        if with_mean:
            complete = len(values) == len(pairs) and values
            cells.append(f"{math.fsum(values) / len(values):.{digits}f}" if complete else "--")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def mean_correlation(reports: Sequence[CorrelationReport]) -> float:
    if not reports:
        raise ValueError("no correlations to average")
    return math.fsum(r.r for r in reports) / len(reports)

"""Corpus entity statistics, per-category match breakdowns and histograms."""

from __future__ import annotations

import json
import os
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .annotations import CorpusBundle, SentenceAnnotation
from .errors import ConfigError
from .scoring import MentionFilter, Mode, pivot_side, clipped_matches, entity_bag

OTHER = "other"


@dataclass(frozen=True)
class CorpusStatsRow:
    language_pair: str
    sentence_count: int
    source_sentences_with_entities: int
    source_entity_total: int
    reference_entity_total: int | None
    source_distinct_entities: int
    reference_distinct_entities: int | None
    common_distinct_entities: int | None

    def to_dict(self) -> dict:
        return asdict(self)


STAT_LABELS = {
    "sentence_count": "sentence count",
    "source_sentences_with_entities": "source sentences with entities",
    "source_entity_total": "source entities count",
    "reference_entity_total": "reference entities count",
    "source_distinct_entities": "source distinct entities count",
    "reference_distinct_entities": "reference distinct entities count",
    "common_distinct_entities": "common distinct entities count",
}


def _side_counts(sentences: Iterable[SentenceAnnotation]) -> tuple[int, int, set[str]]:
    with_entities = total = 0
    distinct: set[str] = set()
    for sent in sentences:
        if sent.mentions:
            with_entities += 1
        total += len(sent.mentions)
        distinct.update(m.entity_id for m in sent.mentions)
    return with_entities, total, distinct


def corpus_stats(bundle: CorpusBundle) -> CorpusStatsRow:
    src_with, src_total, src_distinct = _side_counts(bundle.source)
    if bundle.reference is None:
        ref_total = ref_distinct_n = common = None
    else:
        _, ref_total, ref_distinct = _side_counts(bundle.reference)
        ref_distinct_n = len(ref_distinct)
        common = len(src_distinct & ref_distinct)
    return CorpusStatsRow(
        language_pair=str(bundle.language_pair),
        sentence_count=bundle.n,
        source_sentences_with_entities=src_with,
        source_entity_total=src_total,
        reference_entity_total=ref_total,
        source_distinct_entities=len(src_distinct),
        reference_distinct_entities=ref_distinct_n,
        common_distinct_entities=common,
    )


def stats_to_tsv(rows: Sequence[CorpusStatsRow]) -> str:
    """Transposed like the appendix tables: one line per statistic, one column per pair."""
    header = ["statistic"] + [r.language_pair for r in rows]
    lines = ["\t".join(header)]
    for name, label in STAT_LABELS.items():
        values = [getattr(r, name) for r in rows]
        lines.append("\t".join([label] + ["" if v is None else str(v) for v in values]))
    return "\n".join(lines) + "\n"


def stats_to_markdown(rows: Sequence[CorpusStatsRow]) -> str:
    header = [""] + [r.language_pair for r in rows]
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] * len(header)) + "|"]
    for name, label in STAT_LABELS.items():
        values = ["--" if getattr(r, name) is None else str(getattr(r, name)) for r in rows]
        lines.append("| " + " | ".join([label] + values) + " |")
    return "\n".join(lines) + "\n"


def entities_per_sentence_histogram(annotations: Iterable[SentenceAnnotation]) -> dict[int, int]:
    counts = Counter(len(a.mentions) for a in annotations)
    return dict(sorted(counts.items()))


def histogram_to_csv(histogram: Mapping[int, int]) -> str:
    lines = ["entities,sentences"]
    lines.extend(f"{k},{v}" for k, v in sorted(histogram.items()))
    return "\n".join(lines) + "\n"


def load_category_map(path: str | os.PathLike) -> dict[str, str]:
    """Read ``entity_id<TAB>category`` rows."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise ConfigError(f"cannot read category map {path}: {exc.strerror}") from exc
    mapping = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2 or not cols[0].strip() or not cols[1].strip():
            raise ConfigError(f"{path}:{lineno}: expected entity_id<TAB>category")
        mapping[cols[0].strip()] = cols[1].strip()
    return mapping


def category_map_from_annotations(bundle: CorpusBundle) -> dict[str, str]:
    """Entity categories as recorded on mentions, first occurrence wins."""
    mapping: dict[str, str] = {}
    sides = [bundle.source] + ([bundle.reference] if bundle.reference else []) + [s.sentences for s in bundle.systems]
    for side in sides:
        for sent in side:
            for m in sent.mentions:
                if m.category is not None:
                    mapping.setdefault(m.entity_id, m.category)
    return mapping


@dataclass(frozen=True)
class CategoryRow:
    category: str
    system: str
    source_count: int
    candidate_count: int
    match_count: int


@dataclass(frozen=True)
class CategoryBreakdown:
    language_pair: str
    rows: tuple[CategoryRow, ...]

    def categories(self) -> list[str]:
        return sorted({r.category for r in self.rows})

    def for_system(self, system: str) -> list[CategoryRow]:
        return [r for r in self.rows if r.system == system]

    def to_tsv(self) -> str:
        names = [f.name for f in fields(CategoryRow)]
        lines = ["\t".join(["language_pair"] + names)]
        for row in self.rows:
            lines.append("\t".join([self.language_pair] + [str(getattr(row, n)) for n in names]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        data = {"language_pair": self.language_pair, "rows": [asdict(r) for r in self.rows]}
        return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def category_breakdown(
    bundle: CorpusBundle,
    system_names: Sequence[str] | None,
    category_map: Mapping[str, str],
    mode: Mode | str = Mode.SOURCE,
    filter: MentionFilter | None = None,
    default_category: str = OTHER,
) -> CategoryBreakdown:
    """Pivot, candidate and clipped match counts per entity category and system.

    Every entity falls in exactly one category, so per-category matches sum to
    the system's corpus match total under the same mode and filter.
    """
    mode = Mode.parse(mode)
    pivot = pivot_side(bundle, mode)
    names = sorted(system_names if system_names is not None else bundle.system_names)

    def cat(entity_id):
        return category_map.get(entity_id, default_category)

    pivot_bags = [entity_bag(s) for s in pivot]
    pivot_counts: Counter = Counter()
    for bag in pivot_bags:
        for eid, c in bag.items():
            pivot_counts[cat(eid)] += c

    rows = []
    for name in names:
        cand_counts: Counter = Counter()
        matches: Counter = Counter()
        for pivot_bag, cand_sent in zip(pivot_bags, bundle.system(name).sentences):
            cand_bag = entity_bag(cand_sent, filter)
            for eid, c in cand_bag.items():
                cand_counts[cat(eid)] += c
            for eid, c in clipped_matches(pivot_bag, cand_bag).items():
                matches[cat(eid)] += c
        for category in sorted(set(pivot_counts) | set(cand_counts)):
            rows.append(CategoryRow(category, name, pivot_counts[category], cand_counts[category], matches[category]))
    return CategoryBreakdown(str(bundle.language_pair), tuple(rows))

"""Knowledge-based MT evaluation score: clipped entity recall with a count penalty.

For a test set of sentence pairs, each side is reduced to a multiset of KB
entity ids. Matches per sentence are clipped by the pivot (source or reference)
counts, summed over the corpus, and divided once by the pivot total::

    recall = sum_i |matches(E(pivot_i), E(cand_i))| / sum_i |E(pivot_i)|
    ECP    = 1                   if c < 2s
             exp(1 - c / (2s))   otherwise
    KoBE   = ECP * recall

``c`` is the corpus candidate entity total and ``s`` the pivot total. Counts are
kept as exact integers; each ratio is one float division.
"""

from __future__ import annotations

import enum
import json
import math
from collections import Counter
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import astuple, dataclass, fields

from .annotations import CorpusBundle, EntityMention, SentenceAnnotation
from .errors import ConfigError, DataError, UndefinedScoreError

MentionFilter = Callable[[EntityMention], bool]


class Mode(str, enum.Enum):
    SOURCE = "source-pivot"
    REFERENCE = "reference-pivot"

    @classmethod
    def parse(cls, value) -> Mode:
        if isinstance(value, Mode):
            return value
        aliases = {"source": cls.SOURCE, "reference": cls.REFERENCE}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ConfigError(f"unknown scoring mode {value!r}") from None


class EcpPolicy(str, enum.Enum):
    """Which candidate count feeds the entity count penalty."""

    FILTERED = "filtered"
    UNFILTERED = "unfiltered"

    @classmethod
    def parse(cls, value) -> EcpPolicy:
        try:
            return cls(value)
        except ValueError:
            raise ConfigError(f"unknown ECP policy {value!r}") from None


class EntityBag:
    """Immutable multiset of entity ids."""

    __slots__ = ("_counts", "_total")

    def __init__(self, counts: Mapping[str, int] | None = None):
        items = dict(counts or {})
        for key, value in items.items():
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"bag count for {key!r} must be a positive integer, got {value!r}")
        self._counts = items
        self._total = sum(items.values())

    @classmethod
    def from_ids(cls, ids: Iterable[str]) -> EntityBag:
        return cls(Counter(ids))

    @property
    def counts(self) -> Mapping[str, int]:
        return dict(self._counts)

    def get(self, entity_id: str) -> int:
        return self._counts.get(entity_id, 0)

    def total(self) -> int:
        return self._total

    def items(self):
        return self._counts.items()

    def __len__(self) -> int:
        return len(self._counts)

    def __contains__(self, entity_id) -> bool:
        return entity_id in self._counts

    def __eq__(self, other) -> bool:
        if not isinstance(other, EntityBag):
            return NotImplemented
        return self._counts == other._counts

    def __hash__(self):
        return hash(frozenset(self._counts.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{k!r}: {v}" for k, v in sorted(self._counts.items()))
        return f"EntityBag({{{inner}}})"


def entity_bag(annotation: SentenceAnnotation | Iterable[EntityMention], filter: MentionFilter | None = None) -> EntityBag:
    mentions = annotation.mentions if isinstance(annotation, SentenceAnnotation) else annotation
    if filter is None:
        return EntityBag.from_ids(m.entity_id for m in mentions)
    return EntityBag.from_ids(m.entity_id for m in mentions if filter(m))


def clipped_matches(source_bag: EntityBag, candidate_bag: EntityBag) -> dict[str, int]:
    """Per-entity clipped match counts, only ids with at least one match."""
    out = {}
    for entity_id, count in source_bag.items():
        matched = min(count, candidate_bag.get(entity_id))
        if matched:
            out[entity_id] = matched
    return out


def match_count(source_bag: EntityBag, candidate_bag: EntityBag) -> int:
    small, large = (source_bag, candidate_bag) if len(source_bag) <= len(candidate_bag) else (candidate_bag, source_bag)
    return sum(min(count, large.get(entity_id)) for entity_id, count in small.items())


def _ratio(numerator: int, denominator: int, what: str) -> float:
    if denominator <= 0:
        raise UndefinedScoreError(f"{what} is undefined: zero total in denominator")
    return numerator / denominator


def corpus_recall(pairs: Iterable[tuple[EntityBag, EntityBag]]) -> float:
    matched = pivot = 0
    for source_bag, candidate_bag in pairs:
        matched += match_count(source_bag, candidate_bag)
        pivot += source_bag.total()
    return _ratio(matched, pivot, "recall")


def corpus_precision(pairs: Iterable[tuple[EntityBag, EntityBag]]) -> float:
    matched = produced = 0
    for source_bag, candidate_bag in pairs:
        matched += match_count(source_bag, candidate_bag)
        produced += candidate_bag.total()
    return _ratio(matched, produced, "precision")


def entity_count_penalty(c: int, s: int) -> float:
    if s <= 0:
        raise UndefinedScoreError("entity count penalty is undefined for zero pivot entities")
    if c < 0:
        raise ValueError(f"candidate entity count must be non-negative, got {c}")
    if c < 2 * s:
        return 1.0
    return math.exp(1 - c / (2 * s))


@dataclass(frozen=True)
class SentenceContribution:
    sentence_index: int
    matches: int
    pivot_entities: int
    candidate_entities: int


@dataclass(frozen=True)
class ScoreReport:
    language_pair: str
    system: str
    mode: str
    recall: float
    precision: float
    ecp: float
    kobe: float
    source_entity_total: int
    candidate_entity_total: int
    match_total: int
    sentences_scored: int
    sentences_without_source_entities: int
    unfiltered_candidate_entity_total: int
    ecp_policy: str = EcpPolicy.FILTERED.value

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        return dict(zip(self.field_names(), astuple(self)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    def to_tsv_row(self) -> str:
        return "\t".join(_tsv_value(v) for v in astuple(self))

    @classmethod
    def tsv_header(cls) -> str:
        return "\t".join(cls.field_names())

    @classmethod
    def from_dict(cls, data: Mapping) -> ScoreReport:
        kwargs = {}
        for f in fields(cls):
            if f.name not in data:
                if f.name == "ecp_policy":
                    continue
                raise DataError(f"score record missing field {f.name!r}")
            value = data[f.name]
            if f.type == "int":
                value = int(value)
            elif f.type == "float":
                value = float(value)
            else:
                value = str(value)
            kwargs[f.name] = value
        return cls(**kwargs)


def _tsv_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def pivot_side(bundle: CorpusBundle, mode: Mode) -> Sequence[SentenceAnnotation]:
    if mode is Mode.REFERENCE:
        if bundle.reference is None:
            raise DataError(f"{bundle.language_pair}: reference-pivot mode needs reference annotations")
        return bundle.reference
    return bundle.source


def sentence_contributions(
    bundle: CorpusBundle,
    system_name: str,
    mode: Mode | str = Mode.SOURCE,
    filter: MentionFilter | None = None,
) -> list[SentenceContribution]:
    """Per-sentence integer counts behind the corpus score (no per-sentence penalty)."""
    mode = Mode.parse(mode)
    pivot = pivot_side(bundle, mode)
    candidate = bundle.system(system_name).sentences
    out = []
    for pivot_sent, cand_sent in zip(pivot, candidate):
        pivot_bag = entity_bag(pivot_sent)
        cand_bag = entity_bag(cand_sent, filter)
        out.append(
            SentenceContribution(
                pivot_sent.sentence_index,
                match_count(pivot_bag, cand_bag),
                pivot_bag.total(),
                cand_bag.total(),
            )
        )
    return out


def kobe_score(
    bundle: CorpusBundle,
    system_name: str,
    mode: Mode | str = Mode.SOURCE,
    filter: MentionFilter | None = None,
    ecp_policy: EcpPolicy | str = EcpPolicy.FILTERED,
) -> ScoreReport:
    """Score one system of a bundle.

    The pivot side is never filtered. ``filter`` drops candidate mentions before
    matching; with the default ``filtered`` ECP policy the penalty sees the same
    filtered candidate total, with ``unfiltered`` it sees the raw total.
    """
    mode = Mode.parse(mode)
    ecp_policy = EcpPolicy.parse(ecp_policy)
    candidate = bundle.system(system_name).sentences
    pivot = pivot_side(bundle, mode)

    matched = pivot_total = cand_total = raw_cand_total = 0
    empty_pivot = 0
    for pivot_sent, cand_sent in zip(pivot, candidate):
        pivot_bag = entity_bag(pivot_sent)
        cand_bag = entity_bag(cand_sent, filter)
        matched += match_count(pivot_bag, cand_bag)
        pivot_total += pivot_bag.total()
        cand_total += cand_bag.total()
        raw_cand_total += len(cand_sent.mentions)
        if not pivot_bag.total():
            empty_pivot += 1

    if pivot_total == 0:
        raise UndefinedScoreError(
            f"{bundle.language_pair}: no {'reference' if mode is Mode.REFERENCE else 'source'} "
            "entities, recall is undefined"
        )
    recall = matched / pivot_total
    # no candidate entities means nothing was matched; report 0 rather than fail the system
    precision = matched / cand_total if cand_total else 0.0
    ecp_c = cand_total if ecp_policy is EcpPolicy.FILTERED else raw_cand_total
    ecp = entity_count_penalty(ecp_c, pivot_total)
    return ScoreReport(
        language_pair=str(bundle.language_pair),
        system=system_name,
        mode=mode.value,
        recall=recall,
        precision=precision,
        ecp=ecp,
        kobe=ecp * recall,
        source_entity_total=pivot_total,
        candidate_entity_total=cand_total,
        match_total=matched,
        sentences_scored=len(pivot),
        sentences_without_source_entities=empty_pivot,
        unfiltered_candidate_entity_total=raw_cand_total,
        ecp_policy=ecp_policy.value,
    )


def score_bundle(
    bundle: CorpusBundle,
    mode: Mode | str = Mode.SOURCE,
    filter: MentionFilter | None = None,
    ecp_policy: EcpPolicy | str = EcpPolicy.FILTERED,
    system_names: Sequence[str] | None = None,
) -> list[ScoreReport]:
    names = sorted(system_names if system_names is not None else bundle.system_names)
    return [kobe_score(bundle, name, mode, filter, ecp_policy) for name in names]

"""Gazetteer entity linker and target-language mention filter.

The gazetteer linker is a deterministic stand-in for a real entity-linking
service: greedy longest match, left to right, non-overlapping, over a
normalized copy of the text. Offsets are reported against the original text.

Language identification is not done here. Mention language tags come either
from the annotation's ``lang`` field or from an external tag file.
"""

from __future__ import annotations

import enum
import functools
import json
import logging
import os
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .annotations import EntityMention, SentenceAnnotation
from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)


def _normalize_with_offsets(text: str, casefold: bool, collapse_whitespace: bool) -> tuple[str, list[int]]:
    """Normalized text plus, for each normalized char, its index in ``text``."""
    chars: list[str] = []
    origin: list[int] = []
    in_space = False
    for i, ch in enumerate(text):
        if collapse_whitespace and ch.isspace():
            if not in_space:
                chars.append(" ")
                origin.append(i)
            in_space = True
            continue
        in_space = False
        piece = ch.casefold() if casefold else ch
        for p in piece:
            chars.append(p)
            origin.append(i)
    return "".join(chars), origin


def normalize_surface(surface: str, casefold: bool = True, collapse_whitespace: bool = True) -> str:
    norm, _ = _normalize_with_offsets(surface, casefold, collapse_whitespace)
    return norm.strip() if collapse_whitespace else norm


@dataclass(frozen=True)
class Gazetteer:
    """Surface form to entity id table.

    Surface forms mapping to more than one entity are dropped and listed in
    ``ambiguous``. ``lang`` is stamped on every produced mention when set.
    """

    entries: Mapping[str, str]
    categories: Mapping[str, str] = field(default_factory=dict)
    casefold: bool = True
    collapse_whitespace: bool = True
    word_boundaries: bool = True
    lang: str | None = None
    ambiguous: frozenset = frozenset()

    def __post_init__(self):
        normalized: dict[str, str] = {}
        for surface, entity_id in self.entries.items():
            key = normalize_surface(surface, self.casefold, self.collapse_whitespace)
            if not key:
                raise ValueError(f"surface form {surface!r} is empty after normalization")
            if normalized.get(key, entity_id) != entity_id:
                raise ValueError(f"surface form {key!r} maps to more than one entity")
            normalized[key] = entity_id
        object.__setattr__(self, "entries", normalized)
        object.__setattr__(self, "categories", dict(self.categories))
        object.__setattr__(self, "_lengths", sorted({len(s) for s in normalized}, reverse=True))

    @classmethod
    def build(
        cls,
        rows: Iterable[tuple[str, str] | tuple[str, str, str | None]],
        casefold: bool = True,
        collapse_whitespace: bool = True,
        word_boundaries: bool = True,
        lang: str | None = None,
    ) -> Gazetteer:
        entries: dict[str, str] = {}
        categories: dict[str, str] = {}
        ambiguous: set[str] = set()
        for row in rows:
            surface, entity_id = row[0], row[1]
            category = row[2] if len(row) > 2 else None
            if not entity_id:
                raise ValueError(f"empty entity id for surface form {surface!r}")
            key = normalize_surface(surface, casefold, collapse_whitespace)
            if not key:
                raise ValueError(f"surface form {surface!r} is empty after normalization")
            if category:
                categories.setdefault(entity_id, category)
            if key in ambiguous:
                continue
            if key in entries and entries[key] != entity_id:
                ambiguous.add(key)
                del entries[key]
                continue
            entries[key] = entity_id
        if ambiguous:
            logger.warning("dropped %d ambiguous gazetteer surface forms", len(ambiguous))
        return cls(entries, categories, casefold, collapse_whitespace, word_boundaries, lang, frozenset(ambiguous))

    def normalize(self, text: str) -> tuple[str, list[int]]:
        return _normalize_with_offsets(text, self.casefold, self.collapse_whitespace)


def load_gazetteer(path: str | os.PathLike, **options) -> Gazetteer:
    """Read ``surface<TAB>entity_id[<TAB>category]`` rows. Blank lines are skipped."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise ConfigError(f"cannot read gazetteer {path}: {exc.strerror}") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) < 2 or len(cols) > 3:
            raise ConfigError(f"{path}:{lineno}: expected 2 or 3 tab-separated columns")
        rows.append(tuple(c.strip() for c in cols))
    try:
        return Gazetteer.build(rows, **options)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def gazetteer_link(text: str, gazetteer: Gazetteer) -> list[EntityMention]:
    norm, origin = gazetteer.normalize(text)
    entries = gazetteer.entries
    lengths = gazetteer._lengths
    mentions = []
    i = 0
    size = len(norm)
    while i < size:
        if gazetteer.word_boundaries and i > 0 and _is_word_char(norm[i - 1]) and _is_word_char(norm[i]):
            i += 1
            continue
        hit = None
        for length in lengths:
            j = i + length
            if j > size:
                continue
            entity_id = entries.get(norm[i:j])
            if entity_id is None:
                continue
            if gazetteer.word_boundaries and j < size and _is_word_char(norm[j - 1]) and _is_word_char(norm[j]):
                continue
            hit = (j, entity_id)
            break
        if hit is None:
            i += 1
            continue
        j, entity_id = hit
        mentions.append(
            EntityMention(
                entity_id,
                origin[i],
                origin[j - 1] + 1,
                category=gazetteer.categories.get(entity_id),
                mention_lang=gazetteer.lang,
            )
        )
        i = j
    return mentions


def annotate_corpus(texts: Sequence[str], gazetteer: Gazetteer, jobs: int = 1) -> list[SentenceAnnotation]:
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            linked = list(pool.map(lambda t: gazetteer_link(t, gazetteer), texts))
    else:
        linked = [gazetteer_link(t, gazetteer) for t in texts]
    return [SentenceAnnotation(i, mentions) for i, mentions in enumerate(linked)]


class TagSource(str, enum.Enum):
    ANNOTATION_FIELD = "annotation-field"
    ALWAYS_PASS = "always-pass"
    EXTERNAL_TAG_FILE = "external-tag-file"


@dataclass(frozen=True)
class LanguageFilterSpec:
    target_lang: str
    source: TagSource = TagSource.ALWAYS_PASS
    require_tags: bool = False
    tag_file: str | os.PathLike | None = None

    def __post_init__(self):
        object.__setattr__(self, "source", TagSource(self.source))

    def predicate(self):
        """Per-mention predicate reading ``mention_lang``.

        For external tag files, attach the tags first with :func:`attach_tags`.
        """
        if self.source is TagSource.ALWAYS_PASS:
            return None
        target, require = self.target_lang, self.require_tags

        def keep(mention: EntityMention) -> bool:
            if mention.mention_lang is None:
                return not require
            return mention.mention_lang == target

        return keep


@functools.lru_cache(maxsize=32)
def _read_tag_file(path: str, mtime: float) -> tuple[tuple[str, ...], ...]:
    tags = []
    with open(path, encoding="utf-8-sig") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                raise DataError(f"{path}:{lineno}: blank line in tag file")
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON: {exc.msg}") from exc
            if not isinstance(row, list) or not all(isinstance(t, str) or t is None for t in row):
                raise DataError(f"{path}:{lineno}: expected an array of language codes")
            tags.append(tuple(row))
    return tuple(tags)


def load_tag_file(path: str | os.PathLike) -> tuple[tuple[str, ...], ...]:
    """One array of language codes per sentence, aligned with mention order."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"language tag file {path} does not exist")
    return _read_tag_file(str(path.resolve()), path.stat().st_mtime)


def _apply_tags(mentions: Sequence[EntityMention], tags: Sequence[str | None], sentence_index) -> list[EntityMention]:
    if len(tags) != len(mentions):
        raise DataError(
            f"sentence {sentence_index}: {len(tags)} language tags for {len(mentions)} mentions"
        )
    return [replace(m, mention_lang=t) for m, t in zip(mentions, tags)]


def attach_tags(sentences: Sequence[SentenceAnnotation], tags: Sequence[Sequence[str | None]]) -> list[SentenceAnnotation]:
    if len(tags) != len(sentences):
        raise DataError(f"tag file has {len(tags)} rows for {len(sentences)} sentences")
    return [
        SentenceAnnotation(s.sentence_index, _apply_tags(s.mentions, t, s.sentence_index))
        for s, t in zip(sentences, tags)
    ]


def filter_mentions(
    mentions: Sequence[EntityMention],
    spec: LanguageFilterSpec,
    sentence_index: int | None = None,
) -> list[EntityMention]:
    """Keep mentions in the target language, preserving order.

    With an external tag file, ``sentence_index`` selects the tag row.
    """
    if spec.source is TagSource.ALWAYS_PASS:
        return list(mentions)
    if spec.source is TagSource.EXTERNAL_TAG_FILE:
        if spec.tag_file is None:
            raise ConfigError("external-tag-file filter needs a tag file")
        rows = load_tag_file(spec.tag_file)
        if sentence_index is None:
            raise ConfigError("external-tag-file filter needs the sentence index")
        if not 0 <= sentence_index < len(rows):
            raise DataError(f"tag file {spec.tag_file} has no row for sentence {sentence_index}")
        mentions = _apply_tags(mentions, rows[sentence_index], sentence_index)
    keep = spec.predicate()
    return [m for m in mentions if keep(m)]

"""Entity-linking annotation data model, file parser and corpus loader.

Annotation files are UTF-8 and come in two encodings, both accepted:

* JSON lines, one sentence record per line::

    {"mentions": [{"id": "/m/02j71", "start": 0, "end": 5}]}

* a single JSON array of such records.

Offsets count Unicode code points, ``end`` is exclusive. A sentence record may
also be a bare array of mention objects. Key names are configurable through
:class:`KeyMap` for files that use a different schema.

A corpus directory looks like::

    <root>/<src>-<tgt>/source.jsonl
    <root>/<src>-<tgt>/reference.jsonl        (optional)
    <root>/<src>-<tgt>/systems/<name>.jsonl
"""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AlignmentError, AnnotationParseError, ConfigError, DataError, SpanError

ANNOTATION_SUFFIXES = (".jsonl", ".json")


@dataclass(frozen=True, order=True)
class LanguagePair:
    source: str
    target: str

    @classmethod
    def parse(cls, value: str | LanguagePair) -> LanguagePair:
        if isinstance(value, LanguagePair):
            return value
        parts = value.strip().split("-")
        if len(parts) != 2 or not all(parts):
            raise ConfigError(f"invalid language pair {value!r}, expected e.g. 'de-en'")
        return cls(parts[0], parts[1])

    def __str__(self) -> str:
        return f"{self.source}-{self.target}"


@dataclass(frozen=True)
class EntityMention:
    """One grounded span. Construction is permissive; see :func:`validate`."""

    entity_id: str
    start: int
    end: int
    category: str | None = None
    mention_lang: str | None = None


def _sorted_mentions(mentions: Iterable[EntityMention]) -> tuple[EntityMention, ...]:
    # stable: ties on start keep file order
    return tuple(sorted(mentions, key=lambda m: m.start))


@dataclass(frozen=True)
class SentenceAnnotation:
    sentence_index: int
    mentions: tuple[EntityMention, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mentions", _sorted_mentions(self.mentions))

    def __len__(self) -> int:
        return len(self.mentions)


@dataclass(frozen=True)
class SystemSubmission:
    system_name: str
    language_pair: LanguagePair
    sentences: tuple[SentenceAnnotation, ...]

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))


@dataclass(frozen=True)
class CorpusBundle:
    language_pair: LanguagePair
    source: tuple[SentenceAnnotation, ...]
    reference: tuple[SentenceAnnotation, ...] | None = None
    systems: tuple[SystemSubmission, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(self.source))
        if self.reference is not None:
            object.__setattr__(self, "reference", tuple(self.reference))
        object.__setattr__(self, "systems", tuple(self.systems))

        n = len(self.source)
        if n == 0:
            raise DataError(f"{self.language_pair}: source annotations are empty")
        if self.reference is not None and len(self.reference) != n:
            raise AlignmentError(
                f"{self.language_pair}: reference has {len(self.reference)} sentences, "
                f"source has {n}",
                system="reference",
            )
        seen = set()
        for sub in self.systems:
            if sub.system_name in seen:
                raise DataError(f"{self.language_pair}: duplicate system name {sub.system_name!r}")
            seen.add(sub.system_name)
            if len(sub.sentences) != n:
                raise AlignmentError(
                    f"{self.language_pair}: system {sub.system_name!r} has "
                    f"{len(sub.sentences)} sentences, source has {n}",
                    system=sub.system_name,
                )

    @property
    def n(self) -> int:
        return len(self.source)

    @property
    def system_names(self) -> list[str]:
        return [s.system_name for s in self.systems]

    def system(self, name: str) -> SystemSubmission:
        for sub in self.systems:
            if sub.system_name == name:
                return sub
        raise DataError(f"{self.language_pair}: unknown system {name!r}")


@dataclass(frozen=True)
class KeyMap:
    """Field names used in annotation files.

    ``mentions=None`` means each sentence record is itself the mention array.
    """

    mentions: str | None = "mentions"
    id: str = "id"
    start: str = "start"
    end: str = "end"
    category: str = "category"
    lang: str = "lang"

    @classmethod
    def from_dict(cls, data: Mapping) -> KeyMap:
        unknown = set(data) - {"mentions", "id", "start", "end", "category", "lang"}
        if unknown:
            raise ConfigError(f"unknown annotation key-map fields: {sorted(unknown)}")
        return cls(**data)


DEFAULT_KEYMAP = KeyMap()


def _is_offset(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _parse_mention(obj, keys: KeyMap, sentence_index, mention_index, line, source) -> EntityMention:
    def fail(msg):
        raise AnnotationParseError(
            f"sentence {sentence_index}, mention {mention_index}: {msg}", line=line, source=source
        )

    if not isinstance(obj, dict):
        fail(f"expected an object, got {type(obj).__name__}")
    for key in (keys.id, keys.start, keys.end):
        if key not in obj:
            fail(f"missing field {key!r}")
    entity_id = obj[keys.id]
    if isinstance(entity_id, (int, float)) and not isinstance(entity_id, bool):
        entity_id = str(entity_id)
    if not isinstance(entity_id, str) or not entity_id:
        fail("entity id must be a non-empty string")
    start, end = obj[keys.start], obj[keys.end]
    if not (_is_offset(start) and _is_offset(end)):
        fail("start and end must be integers")
    if start < 0 or end < 0:
        raise SpanError(f"negative offset [{start}, {end})", sentence_index, mention_index, line, source)
    if start >= end:
        kind = "degenerate" if start == end else "inverted"
        raise SpanError(f"{kind} span [{start}, {end})", sentence_index, mention_index, line, source)
    category = obj.get(keys.category)
    lang = obj.get(keys.lang)
    return EntityMention(
        entity_id,
        start,
        end,
        category=None if category is None else str(category),
        mention_lang=None if lang is None else str(lang),
    )


def _parse_sentence(record, keys: KeyMap, index: int, line, source) -> SentenceAnnotation:
    if isinstance(record, list):
        raw = record
    elif isinstance(record, dict) and keys.mentions is not None:
        raw = record.get(keys.mentions, [])
        if raw is None:
            raw = []
        if not isinstance(raw, list):
            raise AnnotationParseError(
                f"sentence {index}: {keys.mentions!r} must be an array", line=line, source=source
            )
    else:
        raise AnnotationParseError(
            f"sentence {index}: expected a sentence record, got {type(record).__name__}",
            line=line,
            source=source,
        )
    mentions = [_parse_mention(m, keys, index, j, line, source) for j, m in enumerate(raw)]
    return SentenceAnnotation(index, mentions)


def _looks_like_mention(obj, keys: KeyMap) -> bool:
    return isinstance(obj, dict) and keys.id in obj and (keys.mentions is None or keys.mentions not in obj)


def parse_annotation_file(
    content: bytes | str,
    keymap: KeyMap | None = None,
    source: str | os.PathLike | None = None,
    blank_line_is_empty: bool = False,
) -> list[SentenceAnnotation]:
    """Parse annotation file content into sentence annotations in file order.

    Blank lines in JSON-lines content are an error unless ``blank_line_is_empty``
    is set, in which case each counts as a sentence without mentions.
    """
    keys = keymap or DEFAULT_KEYMAP
    if isinstance(content, bytes):
        try:
            text = content.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise AnnotationParseError(f"not valid UTF-8: {exc}", source=source) from exc
    else:
        text = content.lstrip("\ufeff")

    stripped = text.strip()
    if not stripped:
        return []

    if stripped.startswith("["):
        try:
            doc = json.loads(stripped)
        except json.JSONDecodeError:
            doc = None  # several lines, each an array: JSON lines
        # a lone line holding one sentence's mention array is not a sentence array
        if isinstance(doc, list) and not (doc and all(_looks_like_mention(m, keys) for m in doc)):
            return [_parse_sentence(rec, keys, i, None, source) for i, rec in enumerate(doc)]

    lines = text.split("\n")
    if lines and lines[-1].strip() == "":
        lines.pop()
    result = []
    for lineno, raw_line in enumerate(lines, start=1):
        if not raw_line.strip():
            if blank_line_is_empty:
                result.append(SentenceAnnotation(len(result)))
                continue
            raise AnnotationParseError("blank line", line=lineno, source=source)
        try:
            record = json.loads(raw_line)
        except json.JSONDecodeError as exc:
            raise AnnotationParseError(f"malformed JSON: {exc.msg}", line=lineno, source=source) from exc
        result.append(_parse_sentence(record, keys, len(result), lineno, source))
    return result


def mention_to_dict(mention: EntityMention, keymap: KeyMap | None = None) -> dict:
    keys = keymap or DEFAULT_KEYMAP
    out = {keys.id: mention.entity_id, keys.start: mention.start, keys.end: mention.end}
    if mention.category is not None:
        out[keys.category] = mention.category
    if mention.mention_lang is not None:
        out[keys.lang] = mention.mention_lang
    return out


def dump_annotations(annotations: Iterable[SentenceAnnotation], keymap: KeyMap | None = None) -> str:
    """Serialize to canonical JSON lines; parses back to an equal structure."""
    keys = keymap or DEFAULT_KEYMAP
    lines = []
    for ann in annotations:
        mentions = [mention_to_dict(m, keys) for m in ann.mentions]
        record = mentions if keys.mentions is None else {keys.mentions: mentions}
        lines.append(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
    return "".join(line + "\n" for line in lines)


def load_annotation_file(path: str | os.PathLike, keymap: KeyMap | None = None, **kwargs) -> list[SentenceAnnotation]:
    path = Path(path)
    try:
        content = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_annotation_file(content, keymap, source=path, **kwargs)


def _find_annotation_file(directory: Path, stem: str) -> Path | None:
    for suffix in ANNOTATION_SUFFIXES:
        candidate = directory / (stem + suffix)
        if candidate.is_file():
            return candidate
    return None


def discover_pairs(root: str | os.PathLike) -> list[LanguagePair]:
    """Language pairs under ``root`` that have a source annotation file."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"corpus root {root} is not a directory")
    pairs = []
    for child in root.iterdir():
        if not child.is_dir() or _find_annotation_file(child, "source") is None:
            continue
        try:
            pairs.append(LanguagePair.parse(child.name))
        except ConfigError:
            continue
    return sorted(pairs, key=str)


def system_files(pair_dir: Path) -> list[tuple[str, Path]]:
    systems_dir = pair_dir / "systems"
    if not systems_dir.is_dir():
        return []
    found: dict[str, Path] = {}
    for path in systems_dir.iterdir():
        if not path.is_file() or path.suffix not in ANNOTATION_SUFFIXES:
            continue
        name = path.stem
        if name in found:
            raise DataError(f"two annotation files for system {name!r} in {systems_dir}")
        found[name] = path
    return sorted(found.items())


def load_corpus(
    root: str | os.PathLike,
    language_pair: str | LanguagePair,
    keymap: KeyMap | None = None,
    jobs: int = 1,
    blank_line_is_empty: bool = False,
) -> CorpusBundle:
    pair = LanguagePair.parse(language_pair)
    pair_dir = Path(root) / str(pair)
    if not pair_dir.is_dir():
        raise DataError(f"no directory for language pair {pair} under {root}")
    source_path = _find_annotation_file(pair_dir, "source")
    if source_path is None:
        raise DataError(f"missing source annotations in {pair_dir}")
    reference_path = _find_annotation_file(pair_dir, "reference")
    systems = system_files(pair_dir)

    paths = [source_path] + ([reference_path] if reference_path else []) + [p for _, p in systems]

    def load(path):
        return load_annotation_file(path, keymap, blank_line_is_empty=blank_line_is_empty)

    if jobs > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            loaded = list(pool.map(load, paths))
    else:
        loaded = [load(p) for p in paths]

    source = loaded.pop(0)
    reference = loaded.pop(0) if reference_path else None
    n = len(source)
    submissions = []
    for (name, path), sentences in zip(systems, loaded):
        if len(sentences) != n:
            raise AlignmentError(
                f"{pair}: system {name!r} ({path}) has {len(sentences)} sentences, source has {n}",
                system=name,
            )
        submissions.append(SystemSubmission(name, pair, sentences))
    return CorpusBundle(pair, source, reference, submissions)


@dataclass(frozen=True)
class ValidationIssue:
    side: str
    sentence_index: int
    mention_index: int | None
    kind: str
    severity: str
    message: str = ""


@dataclass(frozen=True)
class SideSummary:
    side: str
    sentences: int
    sentences_with_entities: int
    mention_total: int

    @property
    def sentences_without_entities(self) -> int:
        return self.sentences - self.sentences_with_entities


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)
    sides: list[SideSummary] = field(default_factory=list)

    @property
    def errors(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "warning"]

    def side(self, name: str) -> SideSummary:
        for s in self.sides:
            if s.side == name:
                return s
        raise KeyError(name)


def _check_side(side: str, sentences: Sequence[SentenceAnnotation], issues: list) -> SideSummary:
    with_entities = 0
    total = 0
    for sent in sentences:
        if sent.mentions:
            with_entities += 1
        total += len(sent.mentions)
        max_end = None
        for j, m in enumerate(sent.mentions):
            idx = sent.sentence_index
            if not m.entity_id:
                issues.append(ValidationIssue(side, idx, j, "empty entity id", "error"))
            if m.start < 0 or m.end < 0:
                issues.append(ValidationIssue(side, idx, j, "negative offset", "error", f"[{m.start}, {m.end})"))
            if m.start == m.end:
                issues.append(ValidationIssue(side, idx, j, "degenerate span", "error", f"[{m.start}, {m.end})"))
            elif m.start > m.end:
                issues.append(ValidationIssue(side, idx, j, "inverted span", "error", f"[{m.start}, {m.end})"))
            if max_end is not None and m.start < max_end:
                issues.append(ValidationIssue(side, idx, j, "overlapping span", "warning", f"[{m.start}, {m.end})"))
            max_end = m.end if max_end is None else max(max_end, m.end)
    return SideSummary(side, len(sentences), with_entities, total)


def validate(bundle: CorpusBundle) -> ValidationReport:
    """Report span problems and per-side mention counts. Never raises."""
    report = ValidationReport()
    report.sides.append(_check_side("source", bundle.source, report.issues))
    if bundle.reference is not None:
        report.sides.append(_check_side("reference", bundle.reference, report.issues))
    for sub in bundle.systems:
        report.sides.append(_check_side(f"system:{sub.system_name}", sub.sentences, report.issues))
    return report

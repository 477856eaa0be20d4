import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import PAIR, bundle, write_corpus
from kobe.annotations import (
    CorpusBundle,
    EntityMention,
    KeyMap,
    LanguagePair,
    SentenceAnnotation,
    SystemSubmission,
    discover_pairs,
    dump_annotations,
    load_corpus,
    parse_annotation_file,
    validate,
)
from kobe.errors import AlignmentError, AnnotationParseError, ConfigError, DataError, SpanError


def test_single_mention_line():
    [ann] = parse_annotation_file(b'{"mentions":[{"id":"/m/02j71","start":0,"end":5}]}\n')
    assert ann.sentence_index == 0
    assert ann.mentions == (EntityMention("/m/02j71", 0, 5),)


def test_empty_mentions_line():
    [ann] = parse_annotation_file('{"mentions":[]}')
    assert ann.mentions == ()


def test_json_array_form_matches_jsonl_form():
    records = [
        {"mentions": [{"id": "A", "start": 3, "end": 4}, {"id": "B", "start": 0, "end": 2}]},
        {"mentions": []},
    ]
    as_lines = "\n".join(json.dumps(r) for r in records) + "\n"
    as_array = json.dumps(records, indent=2)
    assert parse_annotation_file(as_lines) == parse_annotation_file(as_array)


def test_mentions_resorted_and_optional_fields():
    text = '{"mentions":[{"id":"B","start":6,"end":9,"lang":"en"},{"id":"A","start":0,"end":2,"category":"Place","extra":1}]}'
    [ann] = parse_annotation_file(text)
    assert [m.entity_id for m in ann.mentions] == ["A", "B"]
    assert ann.mentions[0].category == "Place"
    assert ann.mentions[1].mention_lang == "en"


def test_sentence_index_follows_position():
    content = "\n".join('{"mentions":[]}' for _ in range(7))
    assert [a.sentence_index for a in parse_annotation_file(content)] == list(range(7))


def test_bare_mention_array_lines():
    content = '[{"id":"A","start":0,"end":1}]\n[]\n[{"id":"B","start":2,"end":3},{"id":"C","start":4,"end":5}]\n'
    anns = parse_annotation_file(content)
    assert [len(a) for a in anns] == [1, 0, 2]


def test_single_bare_mention_array_line_is_one_sentence():
    anns = parse_annotation_file('[{"id":"A","start":0,"end":1},{"id":"B","start":2,"end":3}]\n')
    assert len(anns) == 1 and len(anns[0]) == 2


def test_malformed_json_reports_line_number():
    content = '{"mentions":[]}\n{"mentions":[}\n'
    with pytest.raises(AnnotationParseError) as info:
        parse_annotation_file(content, source="x.jsonl")
    assert info.value.line == 2
    assert "line 2" in str(info.value)


@pytest.mark.parametrize(
    "mention, kind",
    [
        ({"id": "A", "start": -1, "end": 2}, "negative"),
        ({"id": "A", "start": 5, "end": 2}, "inverted"),
        ({"id": "A", "start": 3, "end": 3}, "degenerate"),
    ],
)
def test_bad_spans_raise_with_location(mention, kind):
    content = '{"mentions":[]}\n' + json.dumps({"mentions": [{"id": "Z", "start": 0, "end": 1}, mention]})
    with pytest.raises(SpanError) as info:
        parse_annotation_file(content)
    assert info.value.sentence_index == 1
    assert info.value.mention_index == 1
    assert kind in str(info.value)


def test_missing_id_is_parse_error():
    with pytest.raises(AnnotationParseError):
        parse_annotation_file('{"mentions":[{"start":0,"end":1}]}')


def test_blank_line_policy():
    content = '{"mentions":[]}\n\n{"mentions":[]}\n'
    with pytest.raises(AnnotationParseError):
        parse_annotation_file(content)
    assert len(parse_annotation_file(content, blank_line_is_empty=True)) == 3


def test_keymap_for_alternative_schema():
    keys = KeyMap(mentions="entities", id="mid", start="begin", end="stop")
    content = '{"entities":[{"mid":"/m/1","begin":2,"stop":4}]}'
    [ann] = parse_annotation_file(content, keys)
    assert ann.mentions == (EntityMention("/m/1", 2, 4),)
    assert parse_annotation_file(dump_annotations([ann], keys), keys) == [ann]


def test_keymap_rejects_unknown_fields():
    with pytest.raises(ConfigError):
        KeyMap.from_dict({"identifier": "x"})


def test_utf8_bom_and_bytes():
    content = '\ufeff{"mentions":[{"id":"Ä","start":0,"end":1}]}'.encode("utf-8")
    [ann] = parse_annotation_file(content)
    assert ann.mentions[0].entity_id == "Ä"


mention_st = st.builds(
    lambda e, s, length, cat, lang: EntityMention(e, s, s + length, cat, lang),
    st.text(min_size=1, max_size=6),
    st.integers(0, 200),
    st.integers(1, 20),
    st.none() | st.sampled_from(["Person", "Place", "Организация"]),
    st.none() | st.sampled_from(["en", "ru", "zh"]),
)


@settings(max_examples=200)
@given(st.lists(st.lists(mention_st, max_size=6), max_size=8))
def test_roundtrip(mention_lists):
    anns = [SentenceAnnotation(i, ms) for i, ms in enumerate(mention_lists)]
    text = dump_annotations(anns)
    assert parse_annotation_file(text) == anns
    assert dump_annotations(parse_annotation_file(text)) == text


def test_language_pair_parse():
    assert LanguagePair.parse("de-en") == LanguagePair("de", "en")
    assert str(LanguagePair.parse(" ru-en ")) == "ru-en"
    with pytest.raises(ConfigError):
        LanguagePair.parse("deen")


def test_load_corpus(tmp_path):
    b = bundle([["A"], ["B", "B"], []], {"zeta": [["A"], [], []], "alpha": [[], ["B"], ["C"]]}, [["A"], [], ["C"]])
    write_corpus(tmp_path, b)
    loaded = load_corpus(tmp_path, "de-en")
    assert loaded.n == 3
    assert loaded.system_names == ["alpha", "zeta"]
    assert loaded.reference == b.reference
    assert loaded.system("zeta").sentences == b.system("zeta").sentences
    assert load_corpus(tmp_path, "de-en", jobs=4) == loaded
    assert discover_pairs(tmp_path) == [PAIR]


def test_load_corpus_without_reference_or_systems(tmp_path):
    (tmp_path / "en-kk").mkdir()
    (tmp_path / "en-kk" / "source.jsonl").write_text('{"mentions":[]}\n')
    loaded = load_corpus(tmp_path, "en-kk")
    assert loaded.reference is None and loaded.systems == ()


def test_load_corpus_alignment_error_names_system(tmp_path):
    b = bundle([["A"], ["B"], ["C"]], {"good": [[], [], []]})
    pair_dir = write_corpus(tmp_path, b)
    (pair_dir / "systems" / "short.jsonl").write_text('{"mentions":[]}\n{"mentions":[]}\n')
    with pytest.raises(AlignmentError) as info:
        load_corpus(tmp_path, "de-en")
    assert info.value.system == "short"
    assert "short" in str(info.value)


def test_load_corpus_missing_source(tmp_path):
    (tmp_path / "de-en" / "systems").mkdir(parents=True)
    with pytest.raises(DataError, match="missing source"):
        load_corpus(tmp_path, "de-en")


def test_bundle_invariants():
    src = [SentenceAnnotation(0)]
    with pytest.raises(DataError):
        CorpusBundle(PAIR, [])
    sub = SystemSubmission("s", PAIR, [SentenceAnnotation(0)])
    with pytest.raises(DataError, match="duplicate"):
        CorpusBundle(PAIR, src, None, [sub, sub])
    with pytest.raises(AlignmentError):
        CorpusBundle(PAIR, src, [SentenceAnnotation(0), SentenceAnnotation(1)])


def test_validate_clean_bundle_has_no_issues():
    b = bundle([["A", "B"], []], {"s": [["A"], ["C"]]}, [["A"], ["B"]])
    report = validate(b)
    assert report.issues == []
    assert report.side("source").mention_total == 2
    assert report.side("source").sentences_without_entities == 1
    assert report.side("system:s").sentences_with_entities == 2


def test_validate_flags_degenerate_and_overlap():
    bad = SentenceAnnotation(0, [EntityMention("A", 2, 2), EntityMention("B", 0, 5), EntityMention("C", 3, 6)])
    b = CorpusBundle(PAIR, [bad])
    report = validate(b)
    kinds = sorted(i.kind for i in report.issues)
    assert "degenerate span" in kinds
    assert "overlapping span" in kinds
    assert {i.kind for i in report.warnings} == {"overlapping span"}
    # input untouched
    assert b.source[0] is bad

"""Link raw sentences with a toy gazetteer, then compare source and output.

The language filter shows why an untranslated (copied) output earns nothing.
"""

from kobe import (
    CorpusBundle,
    Gazetteer,
    LanguageFilterSpec,
    LanguagePair,
    SystemSubmission,
    TagSource,
    annotate_corpus,
    kobe_score,
)

rows = [
    ("Angela Merkel", "/m/merkel"),
    ("Merkel", "/m/merkel"),
    ("Berlin", "/m/berlin"),
    ("New York", "/m/nyc"),
    ("York", "/m/york"),
    ("Europäische Union", "/m/eu"),
    ("European Union", "/m/eu"),
]
de_gaz = Gazetteer.build(rows, lang="de")
en_gaz = Gazetteer.build(rows, lang="en")

source_text = [
    "Angela Merkel reiste am Montag nach New York.",
    "Die Europäische Union tagt in Berlin.",
    "Es regnete.",
]
good_mt = [
    "Angela Merkel travelled to New York on Monday.",
    "The European Union meets in Berlin.",
    "It rained.",
]

source = annotate_corpus(source_text, de_gaz)
for text, ann in zip(source_text, source):
    spans = [(text[m.start : m.end], m.entity_id) for m in ann.mentions]
    print(spans)

pair = LanguagePair("de", "en")
bundle = CorpusBundle(
    pair,
    source,
    systems=[
        SystemSubmission("good", pair, annotate_corpus(good_mt, en_gaz)),
        # the "translation" is the German source copied verbatim
        SystemSubmission("copy", pair, annotate_corpus(source_text, de_gaz)),
    ],
)

only_english = LanguageFilterSpec("en", TagSource.ANNOTATION_FIELD).predicate()
for name in bundle.system_names:
    plain = kobe_score(bundle, name)
    filtered = kobe_score(bundle, name, filter=only_english)
    print(f"{name}: unfiltered kobe={plain.kobe:.3f}  english-only kobe={filtered.kobe:.3f}")

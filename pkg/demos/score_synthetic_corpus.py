"""Score three made-up systems against a tiny hand-built source side.

Run with ``python demos/score_synthetic_corpus.py``.
"""

from kobe import (
    CorpusBundle,
    EntityMention,
    LanguagePair,
    SentenceAnnotation,
    SystemSubmission,
    kobe_score,
)

pair = LanguagePair("de", "en")


def sentences(id_lists):
    # one character per mention is enough; offsets only matter for validation
    return [
        SentenceAnnotation(i, [EntityMention(e, 2 * k, 2 * k + 1) for k, e in enumerate(ids)])
        for i, ids in enumerate(id_lists)
    ]


source = sentences([["/m/merkel", "/m/berlin"], ["/m/eu"], [], ["/m/merkel"]])

systems = {
    # keeps every entity
    "faithful": [["/m/merkel", "/m/berlin"], ["/m/eu"], [], ["/m/merkel"]],
    # drops half of them
    "lossy": [["/m/merkel"], [], [], ["/m/merkel"]],
    # finds everything but also sprays extra entities, so ECP kicks in
    "verbose": [["/m/merkel", "/m/berlin"] + ["/m/nyc"] * 5, ["/m/eu", "/m/un"], ["/m/nyc"], ["/m/merkel"]],
}

bundle = CorpusBundle(
    pair,
    source,
    systems=[SystemSubmission(name, pair, sentences(ids)) for name, ids in systems.items()],
)
print(f"{bundle.n} sentences, systems: {bundle.system_names}")

for name in bundle.system_names:
    r = kobe_score(bundle, name)
    print(
        f"{name:9s} matches={r.match_total}/{r.source_entity_total} "
        f"candidates={r.candidate_entity_total:2d} recall={r.recall:.3f} ecp={r.ecp:.3f} kobe={r.kobe:.3f}"
    )

# The third sentence has no source entities; it still counts in the totals.
r = kobe_score(bundle, "verbose")
print("sentences without source entities:", r.sentences_without_source_entities)
print(r.to_json())

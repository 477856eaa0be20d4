"""Corpus statistics, an entities-per-sentence histogram and a category breakdown."""

import random

from kobe import (
    CorpusBundle,
    EntityMention,
    LanguagePair,
    SentenceAnnotation,
    SystemSubmission,
    category_breakdown,
    corpus_stats,
    entities_per_sentence_histogram,
    histogram_to_csv,
    stats_to_markdown,
)

rng = random.Random(3)
pair = LanguagePair("en", "kk")
categories = {f"E{i}": ("person", "place", "organization")[i % 3] for i in range(40)}


def side(keep=1.0, extra=0):
    out = []
    for i, ids in enumerate(base):
        kept = [e for e in ids if rng.random() < keep] + [f"E{rng.randrange(40)}" for _ in range(extra)]
        out.append(SentenceAnnotation(i, [EntityMention(e, 3 * k, 3 * k + 2) for k, e in enumerate(kept)]))
    return out


base = [[f"E{rng.randrange(40)}" for _ in range(rng.choice([0, 1, 2, 2, 3, 5]))] for _ in range(200)]
bundle = CorpusBundle(
    pair,
    side(),
    reference=side(keep=0.6),
    systems=[
        SystemSubmission("strong", pair, side(keep=0.9)),
        SystemSubmission("weak", pair, side(keep=0.4, extra=1)),
    ],
)

print(stats_to_markdown([corpus_stats(bundle)]))

hist = entities_per_sentence_histogram(bundle.source)
print(histogram_to_csv(hist))
width = max(hist.values())
for k in sorted(hist):
    print(f"{k:2d} | {'#' * round(40 * hist[k] / width)}")
print()

breakdown = category_breakdown(bundle, None, categories)
print(breakdown.to_tsv())

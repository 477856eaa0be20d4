"""System-level correlation with human scores on a simulated shared task.

Systems get a latent quality; entity recall and a noisy "BLEU" both follow it.
Signs are kept, so a metric that points the wrong way shows up as negative.
"""

import random

from kobe import (
    CorpusBundle,
    EntityMention,
    LanguagePair,
    SentenceAnnotation,
    SystemScores,
    SystemScoreTable,
    SystemSubmission,
    correlate_systems,
    kobe_score,
    reports_to_markdown,
)

rng = random.Random(7)
pair = LanguagePair("ru", "en")
n_sentences, n_systems = 400, 8


def annotate(id_lists):
    return [
        SentenceAnnotation(i, [EntityMention(e, k, k + 1) for k, e in enumerate(ids)])
        for i, ids in enumerate(id_lists)
    ]


source_ids = [[f"Q{rng.randrange(300)}" for _ in range(rng.randint(0, 5))] for _ in range(n_sentences)]
quality = {f"sys{k}": rng.uniform(0.3, 0.95) for k in range(n_systems)}

submissions = []
for name, q in quality.items():
    out = [[e for e in ids if rng.random() < q] for ids in source_ids]
    submissions.append(SystemSubmission(name, pair, annotate(out)))
bundle = CorpusBundle(pair, annotate(source_ids), systems=submissions)

rows = []
for name, q in quality.items():
    human = 2.0 * q - 1.2 + rng.gauss(0, 0.08)
    bleu = 40 * q + rng.gauss(0, 4)
    length_ratio = -q + rng.gauss(0, 0.2)  # a metric oriented the wrong way
    rows.append(SystemScores(name, {"BLEU": bleu, "LR": length_ratio}, human))
table = SystemScoreTable(str(pair), rows)

kobe = {name: kobe_score(bundle, name).kobe for name in bundle.system_names}
table = table.with_metric("KoBE", kobe)

reports = [correlate_systems(table, m) for m in ("KoBE", "BLEU", "LR")]
for r in reports:
    print(f"{r.metric_name:5s} r={r.r:+.3f} over {r.n_systems} systems, negative={r.sign_negative}")
print()
print(reports_to_markdown(reports))

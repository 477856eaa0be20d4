"""Entity-based reference-less machine translation evaluation."""

from .annotations import (
    CorpusBundle,
    EntityMention,
    KeyMap,
    LanguagePair,
    SentenceAnnotation,
    SystemSubmission,
    dump_annotations,
    load_annotation_file,
    load_corpus,
    parse_annotation_file,
    validate,
)
from .errors import (
    AlignmentError,
    AnnotationParseError,
    ConfigError,
    DataError,
    KobeError,
    SpanError,
    UndefinedCorrelationError,
    UndefinedScoreError,
)
from .linker import Gazetteer, LanguageFilterSpec, TagSource, annotate_corpus, filter_mentions, gazetteer_link, load_gazetteer
from .metaeval import (
    CorrelationReport,
    SystemScores,
    SystemScoreTable,
    correlate_systems,
    pearson,
    read_scores_csv,
    reports_to_markdown,
    reproduce_baselines,
)
from .reports import category_breakdown, corpus_stats, entities_per_sentence_histogram, histogram_to_csv, stats_to_markdown
from .scoring import (
    EcpPolicy,
    EntityBag,
    Mode,
    ScoreReport,
    corpus_precision,
    corpus_recall,
    entity_bag,
    entity_count_penalty,
    kobe_score,
    match_count,
    score_bundle,
)

__version__ = "0.1.0"

"""Command line entry point: ``kobe {link,score,correlate,stats,report,validate}``.

Exit codes: 0 success, 1 configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .annotations import (
    CorpusBundle,
    KeyMap,
    LanguagePair,
    SystemSubmission,
    discover_pairs,
    dump_annotations,
    load_corpus,
    validate,
)
from .errors import ConfigError, DataError, UndefinedCorrelationError
from .linker import LanguageFilterSpec, TagSource, annotate_corpus, attach_tags, load_gazetteer, load_tag_file
from .metaeval import (
    CorrelationReport,
    CsvColumns,
    correlate_systems,
    read_scores_csv,
    reports_to_json,
    reports_to_markdown,
)
from .reports import (
    category_breakdown,
    category_map_from_annotations,
    corpus_stats,
    entities_per_sentence_histogram,
    histogram_to_csv,
    load_category_map,
    stats_to_markdown,
    stats_to_tsv,
)
from .scoring import EcpPolicy, Mode, ScoreReport, kobe_score

logger = logging.getLogger("kobe")

DATA_ROOT_ENV = "KOBE_DATA_ROOT"
SCHEMA_ENV = "KOBE_SCHEMA"
METRIC_NAMES = {Mode.SOURCE: "KoBE", Mode.REFERENCE: "KoBE-ref"}
FILTER_CHOICES = ("always-pass", "annotation-field", "annotation-field:required", "external-tag-file")


@dataclass
class RunConfig:
    command: str
    root: Path | None = None
    pairs: list[LanguagePair] = field(default_factory=list)
    mode: Mode = Mode.SOURCE
    filter: str = "always-pass"
    output_format: str = "json"
    ecp_policy: EcpPolicy = EcpPolicy.FILTERED
    jobs: int = 1
    keymap: KeyMap = field(default_factory=KeyMap)
    csv_columns: CsvColumns | None = None
    blank_line_is_empty: bool = False


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def load_schema(path: str | os.PathLike | None) -> dict:
    """JSON file with optional ``annotations``, ``scores_csv`` and ``blank_line_is_empty`` keys."""
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read schema file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"schema file {path}: malformed JSON: {exc.msg}") from exc
    unknown = set(data) - {"annotations", "scores_csv", "blank_line_is_empty"}
    if unknown:
        raise ConfigError(f"schema file {path}: unknown keys {sorted(unknown)}")
    return data


def _parse_pairs(values) -> list[LanguagePair]:
    pairs = []
    for value in values or []:
        pairs.extend(LanguagePair.parse(v) for v in value.split(",") if v.strip())
    return sorted(set(pairs), key=str)


def build_config(args) -> RunConfig:
    schema = load_schema(getattr(args, "schema", None) or os.environ.get(SCHEMA_ENV))
    config = RunConfig(command=args.command)
    root = getattr(args, "root", None)
    if root is None and args.command in ("score", "stats", "report", "validate"):
        root = os.environ.get(DATA_ROOT_ENV)
    config.root = Path(root) if root else None
    config.pairs = _parse_pairs(getattr(args, "pair", None))
    if hasattr(args, "mode"):
        config.mode = Mode.parse(args.mode)
    if hasattr(args, "filter"):
        config.filter = args.filter
    if hasattr(args, "ecp_policy"):
        config.ecp_policy = EcpPolicy.parse(args.ecp_policy)
    config.output_format = getattr(args, "format", None) or config.output_format
    config.jobs = max(1, getattr(args, "jobs", 1) or 1)
    if "annotations" in schema:
        config.keymap = KeyMap.from_dict(schema["annotations"])
    if "scores_csv" in schema:
        config.csv_columns = CsvColumns.from_dict(schema["scores_csv"])
    config.blank_line_is_empty = bool(schema.get("blank_line_is_empty", False))
    if config.command in ("score", "stats", "report", "validate") and config.root is None:
        raise ConfigError(f"no corpus root: pass --root or set {DATA_ROOT_ENV}")
    return config


def _resolve_pairs(config: RunConfig) -> list[LanguagePair]:
    if config.pairs:
        return config.pairs
    pairs = discover_pairs(config.root)
    if not pairs:
        raise DataError(f"no language pairs found under {config.root}")
    return pairs


def _load(config: RunConfig, pair: LanguagePair) -> CorpusBundle:
    return load_corpus(config.root, pair, config.keymap, jobs=config.jobs, blank_line_is_empty=config.blank_line_is_empty)


def _map(config: RunConfig, fn, items):
    items = list(items)
    if config.jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _filter_spec(config: RunConfig, pair: LanguagePair, system: str) -> LanguageFilterSpec:
    if config.filter == "always-pass":
        return LanguageFilterSpec(pair.target, TagSource.ALWAYS_PASS)
    if config.filter.startswith("annotation-field"):
        return LanguageFilterSpec(pair.target, TagSource.ANNOTATION_FIELD, require_tags=config.filter.endswith(":required"))
    if config.filter == "external-tag-file":
        tag_file = config.root / str(pair) / "tags" / f"{system}.jsonl"
        return LanguageFilterSpec(pair.target, TagSource.EXTERNAL_TAG_FILE, tag_file=tag_file)
    raise ConfigError(f"unknown filter {config.filter!r}, expected one of {', '.join(FILTER_CHOICES)}")


def _prepare(config: RunConfig, bundle: CorpusBundle, system: str):
    """Bundle with tags attached when needed, plus the candidate predicate."""
    spec = _filter_spec(config, bundle.language_pair, system)
    if spec.source is TagSource.EXTERNAL_TAG_FILE:
        sub = bundle.system(system)
        tagged = attach_tags(sub.sentences, load_tag_file(spec.tag_file))
        systems = [s if s.system_name != system else SystemSubmission(system, sub.language_pair, tagged) for s in bundle.systems]
        bundle = CorpusBundle(bundle.language_pair, bundle.source, bundle.reference, systems)
        spec = LanguageFilterSpec(spec.target_lang, TagSource.ANNOTATION_FIELD, require_tags=True)
    return bundle, spec.predicate()


def score_pairs(config: RunConfig) -> list[ScoreReport]:
    def score_pair(pair):
        bundle = _load(config, pair)

        def score_system(name):
            prepared, predicate = _prepare(config, bundle, name)
            return kobe_score(prepared, name, config.mode, predicate, config.ecp_policy)

        return _map(config, score_system, sorted(bundle.system_names))

    reports = []
    for batch in _map(config, score_pair, _resolve_pairs(config)):
        reports.extend(batch)
    return reports


def format_scores(reports: list[ScoreReport], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([r.to_dict() for r in reports], indent=2, ensure_ascii=False) + "\n"
    if fmt == "tsv":
        return "".join(line + "\n" for line in [ScoreReport.tsv_header()] + [r.to_tsv_row() for r in reports])
    cols = ["language_pair", "system", "kobe", "recall", "precision", "ecp", "match_total", "source_entity_total", "candidate_entity_total"]
    lines = ["| " + " | ".join(cols) + " |", "|" + "|".join(["---"] * len(cols)) + "|"]
    for r in reports:
        d = r.to_dict()
        cells = [f"{d[c]:.4f}" if isinstance(d[c], float) else str(d[c]) for c in cols]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def read_score_reports(path: str | os.PathLike) -> list[ScoreReport]:
    """Parse the JSON or TSV output of ``score``."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read score file {path}: {exc.strerror}") from exc
    if text.lstrip().startswith("["):
        try:
            records = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed JSON: {exc.msg}") from exc
    else:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            return []
        header = lines[0].split("\t")
        records = [dict(zip(header, ln.split("\t"))) for ln in lines[1:]]
    try:
        return [ScoreReport.from_dict(r) for r in records]
    except (ValueError, TypeError) as exc:
        raise DataError(f"{path}: bad score record: {exc}") from exc


def correlate_scores(
    tables, kobe_reports: list[ScoreReport], metrics: list[str], pairs: list[str] | None
) -> list[CorrelationReport]:
    """Correlations for KoBE scores (if any) and named CSV metrics, pair by pair."""
    kobe_by_pair: dict[str, dict[str, dict[str, float]]] = {}
    for rep in kobe_reports:
        name = METRIC_NAMES[Mode.parse(rep.mode)]
        kobe_by_pair.setdefault(rep.language_pair, {}).setdefault(name, {})[rep.system] = rep.kobe
    if pairs is None:
        pairs = sorted(kobe_by_pair) if kobe_by_pair else sorted(tables)
    out = []
    for lp in pairs:
        if lp not in tables:
            raise DataError(f"language pair {lp} not in scores CSV")
        table = tables[lp]
        for metric_name, scores in sorted(kobe_by_pair.get(lp, {}).items()):
            table = table.with_metric(metric_name, scores)
            out.append(correlate_systems(table, metric_name))
        for metric in metrics:
            usable = [r for r in table.rows if metric in r.scores and r.human_da is not None]
            if len(usable) < 2:
                continue  # metric did not take part in this pair
            out.append(correlate_systems(table, metric))
    return out


def cmd_link(args, config: RunConfig) -> str | None:
    gazetteer = load_gazetteer(args.gazetteer, casefold=not args.no_casefold, lang=args.lang)
    outputs = []
    for text_path in args.texts:
        try:
            text = Path(text_path).read_text(encoding="utf-8-sig")
        except OSError as exc:
            raise ConfigError(f"cannot read {text_path}: {exc.strerror}") from exc
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        lines = [ln.rstrip("\r") for ln in lines]
        outputs.append((Path(text_path), dump_annotations(annotate_corpus(lines, gazetteer, jobs=config.jobs), config.keymap)))
    if args.out is None:
        if len(outputs) != 1:
            raise ConfigError("--out DIR is required when linking more than one file")
        return outputs[0][1]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path, content in outputs:
        (out_dir / (path.stem + ".jsonl")).write_text(content, encoding="utf-8")
    return None


def cmd_score(args, config: RunConfig) -> str:
    return format_scores(score_pairs(config), config.output_format)


def cmd_correlate(args, config: RunConfig) -> str:
    tables = read_scores_csv(args.scores_csv, config.csv_columns, delimiter=args.delimiter)
    kobe_reports: list[ScoreReport] = []
    for path in args.score_files:
        kobe_reports.extend(read_score_reports(path))
    if config.root is not None and not args.score_files:
        kobe_reports = score_pairs(config)
    if not kobe_reports and not args.metric:
        raise ConfigError("nothing to correlate: give score files, --root, or --metric")
    pairs = [str(p) for p in config.pairs] or None
    for metric in args.metric:
        if not any(metric in t.metric_names for t in tables.values()):
            raise ConfigError(f"unknown metric column {metric!r} in {args.scores_csv}")
    reports = correlate_scores(tables, kobe_reports, args.metric, pairs)
    if config.output_format == "json":
        return reports_to_json(reports)
    if config.output_format == "tsv":
        lines = ["language_pair\tmetric\tr\tn_systems\tsign_negative\tn_dropped"]
        lines += [f"{r.language_pair}\t{r.metric_name}\t{r.r!r}\t{r.n_systems}\t{r.sign_negative}\t{r.n_dropped}" for r in reports]
        return "\n".join(lines) + "\n"
    return reports_to_markdown(reports, pairs=pairs, with_mean=args.mean)


def cmd_stats(args, config: RunConfig) -> str:
    bundles = _map(config, lambda p: _load(config, p), _resolve_pairs(config))
    rows = [corpus_stats(b) for b in bundles]
    histograms = {str(b.language_pair): entities_per_sentence_histogram(b.source) for b in bundles}
    if args.histogram_dir:
        hist_dir = Path(args.histogram_dir)
        hist_dir.mkdir(parents=True, exist_ok=True)
        for lp, hist in histograms.items():
            (hist_dir / f"{lp}.source.csv").write_text(histogram_to_csv(hist), encoding="utf-8")
    if config.output_format == "json":
        data = [
            {**row.to_dict(), "source_histogram": {str(k): v for k, v in histograms[row.language_pair].items()}}
            for row in rows
        ]
        return json.dumps(data, indent=2, ensure_ascii=False) + "\n"
    if config.output_format == "tsv":
        return stats_to_tsv(rows)
    return stats_to_markdown(rows)


def cmd_report(args, config: RunConfig) -> str:
    parts = []
    for pair in _resolve_pairs(config):
        bundle = _load(config, pair)
        category_map = load_category_map(args.category_map) if args.category_map else category_map_from_annotations(bundle)
        if config.filter == "external-tag-file":
            raise ConfigError("report does not support external-tag-file filtering")
        _, predicate = _prepare(config, bundle, "")
        parts.append(category_breakdown(bundle, None, category_map, config.mode, predicate))
    if config.output_format == "json":
        return json.dumps([json.loads(p.to_json()) for p in parts], indent=2, ensure_ascii=False) + "\n"
    out = [parts[0].to_tsv()] + [p.to_tsv().split("\n", 1)[1] for p in parts[1:]] if parts else [""]
    return "".join(out)


def cmd_validate(args, config: RunConfig) -> str:
    result = []
    for pair in _resolve_pairs(config):
        report = validate(_load(config, pair))
        result.append(
            {
                "language_pair": str(pair),
                "sides": [
                    {**vars(s), "sentences_without_entities": s.sentences_without_entities} for s in report.sides
                ],
                "issues": [vars(i) for i in report.issues],
            }
        )
    return json.dumps(result, indent=2, ensure_ascii=False) + "\n"


COMMANDS = {
    "link": cmd_link,
    "score": cmd_score,
    "correlate": cmd_correlate,
    "stats": cmd_stats,
    "report": cmd_report,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kobe", description="Entity-based reference-less MT evaluation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, formats=("json", "tsv", "markdown"), default="json", corpus=True):
        if corpus:
            p.add_argument("--root", help=f"corpus root (default ${DATA_ROOT_ENV})")
            p.add_argument("--pair", action="append", help="language pair, repeatable or comma-separated")
            p.add_argument("--schema", help=f"JSON key-mapping file (default ${SCHEMA_ENV})")
        p.add_argument("--format", choices=formats, default=default)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", help="output file (default stdout)")

    def scoring_opts(p):
        p.add_argument("--mode", choices=["source-pivot", "reference-pivot", "source", "reference"], default="source-pivot")
        p.add_argument("--filter", choices=FILTER_CHOICES, default="always-pass")
        p.add_argument("--ecp-policy", choices=["filtered", "unfiltered"], default="filtered")

    p = sub.add_parser("link", help="annotate raw text files with a gazetteer")
    p.add_argument("--gazetteer", required=True)
    p.add_argument("--lang", help="language tag stamped on every mention")
    p.add_argument("--no-casefold", action="store_true")
    p.add_argument("--schema", help="JSON key-mapping file")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="output directory (default stdout, single input only)")
    p.add_argument("texts", nargs="+")

    p = sub.add_parser("score", help="score every system of the requested pairs")
    common(p, default="tsv")
    scoring_opts(p)

    p = sub.add_parser("correlate", help="Pearson correlation with human DA scores")
    common(p, default="markdown")
    scoring_opts(p)
    p.add_argument("--scores-csv", required=True)
    p.add_argument("--delimiter", default=",")
    p.add_argument("--metric", action="append", default=[], help="CSV metric column to correlate, repeatable")
    p.add_argument("--mean", action="store_true", help="add a mean column to markdown output")
    p.add_argument("score_files", nargs="*", help="output of `kobe score` (json or tsv)")

    p = sub.add_parser("stats", help="corpus entity statistics and histograms")
    common(p, default="tsv")
    p.add_argument("--histogram-dir", help="write <pair>.source.csv histograms here")

    p = sub.add_parser("report", help="per-category match breakdown")
    common(p, formats=("json", "tsv"), default="tsv")
    scoring_opts(p)
    p.add_argument("--category-map", help="entity_id<TAB>category file (default: mention categories)")

    p = sub.add_parser("validate", help="check annotation spans and counts")
    common(p, formats=("json",))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        config = build_config(args)
        output = COMMANDS[args.command](args, config)
        if output is not None:
            if args.out:
                Path(args.out).write_text(output, encoding="utf-8")
            else:
                sys.stdout.write(output)
    except ConfigError as exc:
        print(f"kobe: configuration error: {exc}", file=sys.stderr)
        return 1
    except (DataError, UndefinedCorrelationError) as exc:
        print(f"kobe: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"kobe: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

import json
import math
import subprocess
import sys

import pytest

from builders import bundle, dumps_tags, random_bundle, write_corpus, write_scores_csv
from kobe.annotations import LanguagePair, parse_annotation_file
from kobe.cli import main, read_score_reports
from kobe.metaeval import pearson

DE_EN = {
    "source": [["A", "A"], ["B"]],
    "reference": [["A"], ["B", "E"]],
    "systems": {
        "good": [["A", "A"], ["B"]],
        "spammy": [["A"] + ["C"] * 6, ["B", "D"]],
        "weak": [["A"], []],
    },
}
# hand-computed: (match, s, c, recall, ecp)
EXPECTED = {
    "good": (3, 3, 3, 1.0, 1.0),
    "spammy": (2, 3, 9, 2 / 3, math.exp(-0.5)),
    "weak": (1, 3, 1, 1 / 3, 1.0),
}
DA = {"good": 0.4, "spammy": -0.1, "weak": -0.3}
BLEU = {"good": 31.0, "spammy": 18.5, "weak": 12.0}


@pytest.fixture
def corpus(tmp_path):
    root = tmp_path / "data"
    write_corpus(root, bundle(DE_EN["source"], DE_EN["systems"], DE_EN["reference"]))
    b = random_bundle(11, n=20, n_systems=4)
    ru = type(b)(LanguagePair("ru", "en"), b.source, b.reference, [type(s)(s.system_name, LanguagePair("ru", "en"), s.sentences) for s in b.systems])
    write_corpus(root, ru)
    rows = [("de-en", name, {"BLEU": BLEU[name]}, DA[name]) for name in DE_EN["systems"]]
    rows += [("ru-en", f"sys{k}", {"BLEU": 10.0 + k * k}, 0.1 * k - 0.15) for k in range(4)]
    rows.append(("ru-en", "unscored", {"BLEU": 5.0}, None))
    write_scores_csv(tmp_path / "scores.csv", rows, ["BLEU"])
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_score_matches_hand_computed_reports(corpus, capsys):
    code, out, _ = run(capsys, "score", "--root", corpus / "data", "--pair", "de-en", "--format", "json")
    assert code == 0
    reports = json.loads(out)
    assert [r["system"] for r in reports] == ["good", "spammy", "weak"]
    for r in reports:
        match, s, c, recall, ecp = EXPECTED[r["system"]]
        assert (r["match_total"], r["source_entity_total"], r["candidate_entity_total"]) == (match, s, c)
        assert r["recall"] == recall
        assert r["ecp"] == pytest.approx(ecp, abs=1e-15)
        assert r["kobe"] == r["ecp"] * r["recall"]


def test_score_orders_by_pair_then_system(corpus, capsys):
    code, out, _ = run(capsys, "score", "--root", corpus / "data")
    assert code == 0
    lines = out.splitlines()
    keys = [tuple(line.split("\t")[:2]) for line in lines[1:]]
    assert keys == sorted(keys)
    assert {k[0] for k in keys} == {"de-en", "ru-en"}


def test_score_root_from_environment(corpus, capsys, monkeypatch):
    monkeypatch.setenv("KOBE_DATA_ROOT", str(corpus / "data"))
    code, out, _ = run(capsys, "score", "--pair", "de-en", "--format", "markdown")
    assert code == 0 and "| de-en | spammy |" in out


def test_reference_pivot_mode(corpus, capsys):
    code, out, _ = run(capsys, "score", "--root", corpus / "data", "--pair", "de-en", "--mode", "reference-pivot", "--format", "json")
    good = next(r for r in json.loads(out) if r["system"] == "good")
    assert good["mode"] == "reference-pivot"
    assert good["source_entity_total"] == 3 and good["match_total"] == 2


def test_score_then_correlate_equals_fused(corpus, capsys):
    data, csv = corpus / "data", corpus / "scores.csv"
    scores_file = corpus / "kobe.tsv"
    assert run(capsys, "score", "--root", data, "--out", scores_file)[0] == 0
    code, staged, _ = run(capsys, "correlate", "--scores-csv", csv, "--format", "json", scores_file)
    assert code == 0
    code, fused, _ = run(capsys, "correlate", "--scores-csv", csv, "--root", data, "--format", "json")
    assert code == 0
    assert staged == fused
    de = next(r for r in json.loads(fused) if r["language_pair"] == "de-en")
    kobe = {n: e[3] * e[4] for n, e in EXPECTED.items()}
    names = sorted(DA)
    assert de["r"] == pytest.approx(pearson([kobe[n] for n in names], [DA[n] for n in names]), abs=1e-15)
    assert de["metric_name"] == "KoBE"


def test_correlate_json_scores_and_baseline(corpus, capsys):
    scores_file = corpus / "kobe.json"
    run(capsys, "score", "--root", corpus / "data", "--format", "json", "--out", scores_file)
    assert len(read_score_reports(scores_file)) == 7
    code, out, _ = run(capsys, "correlate", "--scores-csv", corpus / "scores.csv", "--metric", "BLEU", "--mean", scores_file)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "| metric | de-en | ru-en | mean |"
    assert lines[2].startswith("| KoBE |") and lines[3].startswith("| BLEU |")
    names = sorted(DA)
    expected_bleu = pearson([BLEU[n] for n in names], [DA[n] for n in names])
    assert f"{expected_bleu:.3f}" in lines[3]


def test_correlate_baseline_only(corpus, capsys):
    code, out, _ = run(capsys, "correlate", "--scores-csv", corpus / "scores.csv", "--metric", "BLEU", "--format", "json")
    assert code == 0
    reps = json.loads(out)
    ru = next(r for r in reps if r["language_pair"] == "ru-en")
    assert ru["n_systems"] == 4 and ru["n_dropped"] == 1


def test_correlate_constant_metric_is_clean_error(tmp_path, capsys):
    csv = tmp_path / "flat.csv"
    write_scores_csv(csv, [("de-en", f"s{k}", {"FLAT": 1.0}, 0.1 * k) for k in range(3)], ["FLAT"])
    code, out, err = run(capsys, "correlate", "--scores-csv", csv, "--metric", "FLAT")
    assert code == 2
    assert "FLAT" in err and out == ""


def test_correlate_unknown_metric_is_config_error(corpus, capsys):
    code, _, err = run(capsys, "correlate", "--scores-csv", corpus / "scores.csv", "--metric", "METEOR")
    assert code == 1 and "METEOR" in err


def test_stats_command(corpus, capsys):
    code, out, _ = run(capsys, "stats", "--root", corpus / "data", "--pair", "de-en", "--format", "json", "--histogram-dir", corpus / "hist")
    assert code == 0
    [row] = json.loads(out)
    assert row["source_entity_total"] == 3
    assert row["reference_entity_total"] == 3
    assert row["common_distinct_entities"] == 2
    assert row["source_histogram"] == {"1": 1, "2": 1}
    assert (corpus / "hist" / "de-en.source.csv").read_text() == "entities,sentences\n1,1\n2,1\n"


def test_stats_empty_mention_corpus(tmp_path, capsys):
    write_corpus(tmp_path, bundle([[], [], []], {"s": [[], [], []]}, [[], [], []]))
    code, out, _ = run(capsys, "stats", "--root", tmp_path, "--format", "json")
    [row] = json.loads(out)
    assert code == 0
    assert all(row[k] == 0 for k in row if k.endswith(("entity_total", "entities", "with_entities")))


def test_report_command(corpus, tmp_path, capsys):
    cmap = tmp_path / "cats.tsv"
    cmap.write_text("A\tperson\nB\tplace\n")
    code, out, _ = run(capsys, "report", "--root", corpus / "data", "--pair", "de-en", "--category-map", cmap)
    assert code == 0
    rows = [line.split("\t") for line in out.splitlines()[1:]]
    spammy = {r[1]: r for r in rows if r[2] == "spammy"}
    assert spammy["person"][3:] == ["2", "1", "1"]
    assert spammy["other"][3:] == ["0", "7", "0"]


def test_validate_command(corpus, capsys):
    code, out, _ = run(capsys, "validate", "--root", corpus / "data", "--pair", "de-en")
    assert code == 0
    [res] = json.loads(out)
    assert res["issues"] == []
    assert res["sides"][0]["mention_total"] == 3


def test_link_roundtrip_and_idempotent(tmp_path, capsys):
    gaz = tmp_path / "gaz.tsv"
    gaz.write_text("Berlin\t/m/berlin\tPlace\nAngela Merkel\t/m/merkel\tPerson\nMerkel\t/m/merkel\n", encoding="utf-8")
    texts = tmp_path / "demo.en"
    sentences = [f"Sentence {i} mentions Angela Merkel in Berlin." if i % 2 else f"Plain sentence {i}." for i in range(10)]
    texts.write_text("\n".join(sentences) + "\n", encoding="utf-8")
    out_dir = tmp_path / "ann"
    assert run(capsys, "link", "--gazetteer", gaz, "--out", out_dir, texts)[0] == 0
    first = (out_dir / "demo.jsonl").read_bytes()
    anns = parse_annotation_file(first)
    assert len(anns) == 10
    assert sum(len(a) for a in anns) == 10
    assert run(capsys, "link", "--gazetteer", gaz, "--out", out_dir, "--jobs", "8", texts)[0] == 0
    assert (out_dir / "demo.jsonl").read_bytes() == first
    code, stdout, _ = run(capsys, "link", "--gazetteer", gaz, texts)
    assert stdout.encode() == first


def test_external_tag_file_filter(tmp_path, capsys):
    root = tmp_path / "data"
    pair_dir = write_corpus(root, bundle([["A", "B"]], {"s": [["A", "B", "X"]]}))
    (pair_dir / "tags").mkdir()
    (pair_dir / "tags" / "s.jsonl").write_text(dumps_tags([["de", "en", "en"]]))
    code, out, _ = run(capsys, "score", "--root", root, "--filter", "external-tag-file", "--format", "json")
    assert code == 0
    [rep] = json.loads(out)
    assert rep["candidate_entity_total"] == 2 and rep["match_total"] == 1
    assert rep["unfiltered_candidate_entity_total"] == 3


def test_missing_tag_file_is_config_error(corpus, capsys):
    code, _, err = run(capsys, "score", "--root", corpus / "data", "--pair", "de-en", "--filter", "external-tag-file")
    assert code == 1 and "tag file" in err


def test_schema_keymap(tmp_path, capsys):
    root = tmp_path / "data"
    pair = root / "de-en"
    (pair / "systems").mkdir(parents=True)
    (pair / "source.jsonl").write_text('{"entities":[{"mid":"A","b":0,"e":1}]}\n')
    (pair / "systems" / "x.jsonl").write_text('{"entities":[{"mid":"A","b":3,"e":4}]}\n')
    schema = tmp_path / "schema.json"
    schema.write_text(json.dumps({"annotations": {"mentions": "entities", "id": "mid", "start": "b", "end": "e"}}))
    assert run(capsys, "score", "--root", root)[0] == 2
    code, out, _ = run(capsys, "score", "--root", root, "--schema", schema, "--format", "json")
    assert code == 0 and json.loads(out)[0]["kobe"] == 1.0


def test_exit_codes(corpus, capsys):
    # data error: misaligned system
    (corpus / "data" / "de-en" / "systems" / "short.jsonl").write_text('{"mentions":[]}\n')
    code, _, err = run(capsys, "score", "--root", corpus / "data", "--pair", "de-en")
    assert code == 2 and "short" in err
    # configuration errors
    assert run(capsys, "score", "--root", corpus / "data", "--pair", "deen")[0] == 1
    assert run(capsys, "score", "--root", corpus / "data", "--bogus")[0] == 1
    assert run(capsys, "correlate", "--scores-csv", corpus / "missing.csv", "--metric", "BLEU")[0] == 1


def test_no_root_is_config_error(capsys, monkeypatch):
    monkeypatch.delenv("KOBE_DATA_ROOT", raising=False)
    assert run(capsys, "stats")[0] == 1


def test_module_entry_point(corpus):
    proc = subprocess.run(
        [sys.executable, "-m", "kobe", "score", "--root", str(corpus / "data"), "--pair", "xx-yy"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 2
    assert "xx-yy" in proc.stderr

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from codeprune import cli
from codeprune.attention import TokenAttentionDict
from codeprune.lexparse import read_cache

from conftest import JAVA_CORPUS, PYTHON_CORPUS, synthetic_exports, write_jsonl


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """parse -> exports -> build-dict on the Java fixture corpus."""
    root = tmp_path_factory.mktemp("cli")
    cache = root / "cache.jsonl"
    assert cli.main(["parse", "--input", str(JAVA_CORPUS), "--output", str(cache), "--jobs", "1",
                     "--report", str(root / "parse")]) == 0
    snippets = list(read_cache(cache))
    rows = [r.to_dict() for r in synthetic_exports(snippets)]
    # one record as a raw (layers, heads, n, n) stack
    n = len(rows[1]["tokens"])
    a = np.random.default_rng(0).random((2, 2, n, n))
    rows[1] = {"id": rows[1]["id"], "tokens": rows[1]["tokens"], "tensor": (a / a.sum(-1, keepdims=True)).tolist()}
    exports = write_jsonl(root / "exports.jsonl", rows)
    d = root / "dict.json"
    assert cli.main(["build-dict", "--input", str(exports), "--cache", str(cache), "--output", str(d),
                     "--min-count", "2", "--jobs", "1"]) == 0
    return {"root": root, "cache": cache, "exports": exports, "dict": d,
            "table": root / "dict.categories.json", "snippets": snippets}


def _prune(p, out, *extra):
    argv = ["prune", "--input", str(p["cache"]), "--output", str(out), "--dict", str(p["dict"]),
            "--relative-length", "0.6", *extra]
    return cli.main(argv)


def test_parse_outputs(pipeline, capsys):
    assert len(pipeline["snippets"]) == 28
    assert (pipeline["root"] / "parse" / "category_histogram.tsv").exists()
    assert (pipeline["root"] / "parse" / "category_histogram.png").stat().st_size > 0


def test_parse_strict_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text(JAVA_CORPUS.read_text().splitlines()[0] + "\n{not json\n")
    assert cli.main(["parse", "--input", str(bad), "--output", str(tmp_path / "c.jsonl"), "--strict", "--jobs", "1"]) == 2
    assert ":2:" in capsys.readouterr().err
    assert cli.main(["parse", "--input", str(bad), "--output", str(tmp_path / "c.jsonl"), "--jobs", "1"]) == 0


def test_parse_language_filter_and_no_delex(tmp_path):
    mixed = tmp_path / "mixed.jsonl"
    mixed.write_text(JAVA_CORPUS.read_text() + PYTHON_CORPUS.read_text())
    out = tmp_path / "py.jsonl"
    assert cli.main(["parse", "--input", str(mixed), "--output", str(out), "--language", "python",
                     "--no-delex", "--jobs", "1"]) == 0
    sns = list(read_cache(out))
    assert len(sns) == 15 and all(s.language.value == "python" for s in sns)
    assert any(t.kind.value == "StringLiteral" and t.text != "string" for s in sns for t in s.tokens)


def test_build_dict_outputs(pipeline):
    d = TokenAttentionDict.load(pipeline["dict"])
    assert d.metadata["language"] == "java"
    table = json.loads(pipeline["table"].read_text())
    assert table["metadata"]["min_count"] == 2 and table["categories"]


def test_build_dict_mismatch_names_record(pipeline, tmp_path, capsys):
    rows = [json.loads(line) for line in pipeline["exports"].read_text().splitlines()]
    rows[3]["tokens"][2] = "WRONG"
    bad = write_jsonl(tmp_path / "bad.jsonl", rows)
    rc = cli.main(["build-dict", "--input", str(bad), "--cache", str(pipeline["cache"]),
                   "--output", str(tmp_path / "d.json"), "--jobs", "1"])
    assert rc == 2
    assert rows[3]["id"] in capsys.readouterr().err


def test_build_dict_sharded_equals_serial(pipeline, tmp_path):
    out = tmp_path / "d8.json"
    assert cli.main(["build-dict", "--input", str(pipeline["exports"]), "--cache", str(pipeline["cache"]),
                     "--output", str(out), "--jobs", "4"]) == 0
    a, b = TokenAttentionDict.load(pipeline["dict"]), TokenAttentionDict.load(out)
    assert a.counts == b.counts
    assert all(abs(a.mean(t) - b.mean(t)) <= 1e-9 for t in a.counts)


def test_prune_dropout_byte_identical(pipeline, tmp_path):
    for k in (1, 2):
        assert _prune(pipeline, tmp_path / f"d{k}.jsonl", "--strategy", "dropout", "--seed", "7", "--jobs", "1") == 0
    assert (tmp_path / "d1.jsonl").read_bytes() == (tmp_path / "d2.jsonl").read_bytes()


@pytest.mark.parametrize("strategy", ["dropout", "frequency", "attention"])
def test_prune_jobs_invariant(pipeline, tmp_path, strategy):
    assert _prune(pipeline, tmp_path / "j1.jsonl", "--strategy", strategy, "--jobs", "1") == 0
    assert _prune(pipeline, tmp_path / "j8.jsonl", "--strategy", strategy, "--jobs", "8") == 0
    assert (tmp_path / "j1.jsonl").read_bytes() == (tmp_path / "j8.jsonl").read_bytes()


def test_prune_output_records(pipeline, tmp_path):
    out = tmp_path / "p.jsonl"
    assert _prune(pipeline, out, "--jobs", "1", "--summary", str(tmp_path / "s.json")) == 0
    recs = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["id"] for r in recs] == [s.id for s in pipeline["snippets"]]
    for r in recs:
        assert len(r["kept"]) <= max(1, (r["n_tokens"] * 6) // 10)
        assert r["kept"] == sorted(set(r["kept"]))
    summary = json.loads((tmp_path / "s.json").read_text())
    assert summary["config"]["strategy"] == "attention" and summary["records"] == 28


def test_prune_config_errors(pipeline, tmp_path, capsys):
    base = ["prune", "--input", str(pipeline["cache"]), "--output", str(tmp_path / "x.jsonl")]
    assert cli.main(base + ["--strategy", "frequency", "--relative-length", "0.5"]) == 2
    assert cli.main(base + ["--strategy", "dropout"]) == 2
    assert cli.main(base + ["--strategy", "dropout", "--relative-length", "0.5", "--target-length", "4"]) == 2
    missing_out = tmp_path / "never.jsonl"
    assert cli.main(["prune", "--input", str(tmp_path / "none"), "--output", str(missing_out), "--strategy", "dropout",
                     "--relative-length", "0.5"]) == 2
    assert "no such file" in capsys.readouterr().err
    assert not missing_out.exists()


def test_prune_category_source(pipeline, tmp_path):
    out = tmp_path / "c.jsonl"
    assert _prune(pipeline, out, "--category-table", str(pipeline["table"]), "--attention-source", "category",
                  "--protect-delimiters", "--jobs", "1") == 0
    assert out.read_text().count("\n") == 28


def test_env_mirrors_flags(pipeline, tmp_path, monkeypatch):
    assert _prune(pipeline, tmp_path / "flag.jsonl", "--strategy", "dropout", "--seed", "3", "--jobs", "1") == 0
    monkeypatch.setenv("CODEPRUNE_STRATEGY", "dropout")
    monkeypatch.setenv("CODEPRUNE_SEED", "3")
    monkeypatch.setenv("CODEPRUNE_JOBS", "1")
    assert _prune(pipeline, tmp_path / "env.jsonl") == 0
    assert (tmp_path / "flag.jsonl").read_bytes() == (tmp_path / "env.jsonl").read_bytes()
    # flags win over the environment
    assert _prune(pipeline, tmp_path / "win.jsonl", "--seed", "4") == 0
    assert (tmp_path / "win.jsonl").read_bytes() != (tmp_path / "env.jsonl").read_bytes()


def test_stats_reports(pipeline, tmp_path, capsys):
    pruned = tmp_path / "p.jsonl"
    assert _prune(pipeline, pruned, "--jobs", "1") == 0
    rep = tmp_path / "rep"
    assert cli.main(["stats", "--dict", str(pipeline["dict"]), "--category-table", str(pipeline["table"]),
                     "--pruned", str(pruned), "--cache", str(pipeline["cache"]), "--output", str(rep),
                     "--min-count", "2", "--top", "5"]) == 0
    out = capsys.readouterr().out
    assert "# top 5 tokens" in out and "RL (macro)" in out
    for name in ("token_ranking", "category_attention", "retention"):
        assert (rep / f"{name}.tsv").exists() and (rep / f"{name}.png").exists()
    with (rep / "token_ranking.tsv").open() as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))
    means = [float(r["mean"]) for r in rows]
    assert means == sorted(means, reverse=True) and all(int(r["count"]) >= 2 for r in rows)


def test_stats_pruned_needs_cache(pipeline, tmp_path):
    assert cli.main(["stats", "--dict", str(pipeline["dict"]), "--pruned", str(tmp_path / "p")]) == 2


def test_classify_stats(pipeline, tmp_path, capsys):
    assert cli.main(["classify-stats", "--input", str(pipeline["cache"]), "--output", str(tmp_path), "--no-figures"]) == 0
    assert capsys.readouterr().out.startswith("category\tstatements\tshare")
    assert (tmp_path / "category_histogram.tsv").exists() and not (tmp_path / "category_histogram.png").exists()


def test_sweep_monotone(pipeline, tmp_path):
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--input", str(pipeline["cache"]), "--output", str(out), "--dict", str(pipeline["dict"]),
                     "--statement-only", "--token-only", "--jobs", "1"]) == 0
    with (out / "sweep_counts.tsv").open() as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))
    by_key: dict = {}
    for r in rows:
        by_key.setdefault((r["id"], r["mode"]), []).append((float(r["ratio"]), int(r["kept"])))
    for series in by_key.values():
        kept = [k for _, k in sorted(series)]
        assert kept == sorted(kept)
    assert (out / "sweep.png").exists()


def test_sweep_ablation_needs_attention(pipeline, tmp_path):
    assert cli.main(["sweep", "--input", str(pipeline["cache"]), "--output", str(tmp_path), "--strategy", "dropout",
                     "--statement-only"]) == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "codeprune.cli", "parse", "--input", str(tmp_path / "missing.jsonl"),
                           "--output", str(tmp_path / "o.jsonl")], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "codeprune: error:" in proc.stderr
    assert not (tmp_path / "o.jsonl").exists()
    proc = subprocess.run([sys.executable, "-m", "codeprune.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "build-dict" in proc.stdout

import csv

from codeprune import report
from codeprune.lexparse import Category


def test_write_tsv_formats(tmp_path):
    p = report.write_tsv(tmp_path / "sub" / "t.tsv", ["category", "value", "n"],
                         [(Category.RETURN, 1 / 3, 4), ("x\ty", 2.0, 0)])
    with p.open() as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    assert rows == [["category", "value", "n"], ["Return", "0.333333", "4"], ["x\ty", "2", "0"]]


def test_figures_written(tmp_path):
    hist = {Category.RETURN: 5, Category.IF_CONDITION: 3}
    paths = [
        report.plot_category_histogram(hist, tmp_path / "h.png"),
        report.plot_category_attention([(Category.RETURN, 0.02, 5), (Category.FOR, 0.01, 3)], tmp_path / "a.png"),
        report.plot_token_ranking([("a", 0.3, 9), ("b", 0.2, 9), ("c", 0.1, 9)], tmp_path / "r.png", top=2),
        report.plot_sweep([{"mode": "full", "ratio": r, "micro_rl": r * 0.98} for r in (0.3, 0.6, 0.9)], tmp_path / "s.png"),
        report.plot_retention({Category.RETURN: 1.0, Category.CATCH: 0.2}, tmp_path / "k.png"),
    ]
    for p in paths:
        assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

import json

import pytest

from codeprune.lexparse import Category, parse_snippet
from codeprune.metrics import RunSummary, SummaryError, relative_length, summarize_run
from codeprune.pruning import PruneConfig, PruneResult, prune


@pytest.mark.parametrize("before, after, want", [(100, 60, 0.6), (118, 60, 60 / 118), (7, 7, 1.0)])
def test_relative_length(before, after, want):
    assert relative_length(before, after) == want


def test_relative_length_examples():
    assert round(relative_length(118, 60), 4) == 0.5085


@pytest.mark.parametrize("before, after", [(0, 0), (5, 6), (5, -1)])
def test_relative_length_invalid(before, after):
    with pytest.raises(ValueError):
        relative_length(before, after)


def _snippet(sid, n):
    return parse_snippet(sid, " ".join(f"a{i} = {i} ;" for i in range(n // 4)), "java")


def test_summary_mean():
    a, b = _snippet("a", 40), _snippet("b", 40)
    results = [PruneResult("a", 40, tuple(range(20))), PruneResult("b", 40, tuple(range(28)))]
    s = summarize_run(results, {"a": a, "b": b}, "dropout")
    assert s.macro_rl == pytest.approx(0.6, abs=1e-15)
    assert s.micro_rl == 48 / 80
    assert s.tokens_before == 80 and s.tokens_after == 48


def test_macro_and_micro_differ():
    a, b = _snippet("a", 8), _snippet("b", 40)
    s = summarize_run([PruneResult("a", 8, (0, 1, 2, 3)), PruneResult("b", 40, tuple(range(10)))], {"a": a, "b": b})
    assert s.macro_rl == pytest.approx((0.5 + 0.25) / 2)
    assert s.micro_rl == 14 / 48


def test_unknown_id():
    with pytest.raises(SummaryError, match="ghost"):
        summarize_run([PruneResult("ghost", 3, (0,))], {})


def test_length_mismatch():
    sn = _snippet("a", 8)
    with pytest.raises(SummaryError):
        summarize_run([PruneResult("a", 9, (0,))], {"a": sn})


def test_empty_stream():
    assert summarize_run([], {}).records == 0
    assert summarize_run([], {}).macro_rl is None
    with pytest.raises(SummaryError):
        summarize_run([], {}, strict=True)


def test_retention_from_selection():
    sn = parse_snippet("r", "int f() { int x = 1; return x; }", "java")
    # statements: signature, declaration, return
    r = PruneResult("r", len(sn), (0, 1, 2, 3, 4, 10, 11, 12, 13), selected_statements=(0, 2))
    s = summarize_run([r], {"r": sn})
    assert s.retention(Category.METHOD_SIGNATURE) == 1.0
    assert s.retention(Category.VARIABLE_DECLARATION) == 0.0
    assert s.retention(Category.RETURN) == 1.0
    assert s.retention(Category.CATCH) is None


def test_retention_from_kept_tokens():
    sn = parse_snippet("r", "int f() { int x = 1; return x; }", "java")
    s = summarize_run([PruneResult("r", len(sn), (0, 7))], {"r": sn})
    assert s.retention(Category.VARIABLE_DECLARATION) == 1.0
    assert s.categories[Category.VARIABLE_DECLARATION].full == 0
    assert s.retention(Category.RETURN) == 0.0


def test_merge_equals_single_pass(java_snippets, java_dict):
    cfg = PruneConfig("attention", relative_length=0.5, token_dict=java_dict)
    results = [prune(sn, cfg) for sn in java_snippets]
    by_id = {sn.id: sn for sn in java_snippets}
    whole = summarize_run(results, by_id)
    merged = summarize_run(results[:11], by_id).merge(summarize_run(results[11:], by_id))
    a, b = merged.to_json(), whole.to_json()
    # per-record RL is a float sum; only its summation order differs
    assert a.pop("macro_rl") == pytest.approx(b.pop("macro_rl"), abs=1e-12)
    assert a == b


def test_json_and_table(java_snippets, java_dict):
    cfg = PruneConfig("frequency", relative_length=0.6, token_dict=java_dict)
    s = summarize_run((prune(sn, cfg) for sn in java_snippets), {sn.id: sn for sn in java_snippets}, "frequency")
    blob = json.loads(json.dumps(s.to_json()))
    assert blob["records"] == len(java_snippets)
    assert blob["categories"]["MethodSignature"]["selected"] is None
    assert "RL (macro)" in s.table()
    assert isinstance(RunSummary().table(), str)


def test_kept_index_out_of_range():
    sn = _snippet("a", 8)
    with pytest.raises(SummaryError, match="out of range"):
        summarize_run([PruneResult("a", 8, (0, 8))], {"a": sn})

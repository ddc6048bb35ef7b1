"""codeprune command line.

Subcommands::

    parse           corpus JSONL -> parsed-snippet cache (+ category histogram)
    build-dict      attention exports + cache -> token dictionary, category table
    classify-stats  category histogram of a cache
    prune           cache -> pruned JSONL and a run summary
    stats           ranked token/category attention, optional run summary
    sweep           relative-length sweep, optionally with the two ablations

Every flag can also come from an environment variable named
``CODEPRUNE_`` + the flag in upper case with dashes as underscores
(``--relative-length`` -> ``CODEPRUNE_RELATIVE_LENGTH``).  Flags win.

Exit codes: 0 success, 2 bad input or usage, 3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import os
import sys
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Iterator

from codeprune import report
from codeprune.attention import (
    CategoryAttentionTable,
    TokenAttentionDict,
    build_category_table,
    build_token_dict,
    load_exports,
)
from codeprune.corpus import CorpusRecord, load_corpus
from codeprune.lexparse import CONTROL_FLOW_CATEGORIES, Category, LexError, parse_snippet, read_cache, snippet_to_dict
from codeprune.metrics import RunSummary
from codeprune.pruning import Mode, PruneConfig, Strategy, prune, result_from_dict, result_to_dict

log = logging.getLogger("codeprune")

ENV_PREFIX = "CODEPRUNE_"
EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTERNAL = 3

DEFAULT_SWEEP = (0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3)
BATCH = 2048


class InputError(Exception):
    """Bad user input: reported without a traceback, exit code 2."""


# ---------------------------------------------------------------------------
# parallel map with per-process state

_STATE: dict = {}


def _init_worker(state: dict) -> None:
    _STATE.clear()
    _STATE.update(state)


def _pmap(fn: Callable, items: Iterable, jobs: int, state: dict | None = None) -> Iterator:
    """Ordered map; ``jobs > 1`` fans batches out over worker processes."""
    state = state or {}
    if jobs <= 1:
        _init_worker(state)
        yield from map(fn, items)
        return
    it = iter(items)
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(state,)) as ex:
        while batch := list(itertools.islice(it, BATCH)):
            yield from ex.map(fn, batch, chunksize=max(1, len(batch) // (4 * jobs)))


def _default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# parse

def _parse_one(rec: CorpusRecord):
    try:
        sn = parse_snippet(rec.id, rec.code, rec.language, delex=not _STATE.get("raw"))
    except LexError as e:
        return rec.id, None, str(e)
    if not sn.tokens:
        return rec.id, None, "no tokens"
    return rec.id, snippet_to_dict(sn), None


def cmd_parse(args) -> int:
    if not Path(args.input).is_file():
        raise InputError(f"{args.input}: no such file")
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    hist: Counter = Counter()
    n = 0
    records = load_corpus(args.input, args.language, strict=args.strict)
    with out.open("w", encoding="utf-8") as fh:
        for rid, obj, err in _pmap(_parse_one, records, args.jobs, {"raw": args.no_delex}):
            if err:
                if args.strict:
                    raise InputError(f"record {rid}: {err}")
                log.warning("record %s skipped: %s", rid, err)
                continue
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")
            n += 1
            hist.update(Category(c) for _, _, c in obj["statements"])
    _print_histogram(hist)
    log.info("wrote %d snippets to %s", n, out)
    if args.report:
        _histogram_report(hist, Path(args.report), args.no_figures)
    return EXIT_OK


def _print_histogram(hist: Counter) -> None:
    total = sum(hist.values())
    print("category\tstatements\tshare")
    for cat, c in sorted(hist.items(), key=lambda kv: (-kv[1], kv[0].value)):
        print(f"{cat.value}\t{c}\t{c / total:.4f}")
    print(f"total\t{total}\t1.0000" if total else "total\t0\t-")


def _histogram_report(hist: Counter, outdir: Path, no_figures: bool) -> None:
    rows = sorted(hist.items(), key=lambda kv: (-kv[1], kv[0].value))
    report.write_tsv(outdir / "category_histogram.tsv", ["category", "statements"], rows)
    if not no_figures and hist:
        report.plot_category_histogram(hist, outdir / "category_histogram.png")


def cmd_classify_stats(args) -> int:
    hist: Counter = Counter()
    for sn in _read_cache(args.input):
        hist.update(st.category for st in sn.statements)
    _print_histogram(hist)
    if args.output:
        _histogram_report(hist, Path(args.output), args.no_figures)
    return EXIT_OK


# ---------------------------------------------------------------------------
# build-dict

def _shard_dict(shard):
    return build_token_dict(shard, _STATE["expected"])


def cmd_build_dict(args) -> int:
    snippets = list(_read_cache(args.cache))
    expected = {sn.id: sn.texts for sn in snippets}
    langs = sorted({sn.language.value for sn in snippets})
    meta = {"language": ",".join(langs), "corpus": Path(args.cache).name, "exports": Path(args.input).name}
    exports = load_exports(args.input)
    if args.jobs > 1:
        exports = list(exports)
        k = -(-len(exports) // args.jobs) or 1
        shards = [exports[i:i + k] for i in range(0, len(exports), k)]
        d = TokenAttentionDict(metadata=meta)
        for part in _pmap(_shard_dict, shards, args.jobs, {"expected": expected}):
            d = d.merge(part)
    else:
        d = build_token_dict(exports, expected, meta)
    if not len(d):
        raise InputError(f"{args.input}: no attention records")
    d.save(args.output)
    table = build_category_table(snippets, d, args.min_count, meta)
    table_path = args.category_table or str(Path(args.output).with_suffix("")) + ".categories.json"
    table.save(table_path)
    print(f"tokens\t{len(d)}\ncategories\t{len(table.means)}\ndictionary\t{args.output}\ncategory_table\t{table_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# prune

def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _make_config(args, **overrides) -> tuple[PruneConfig, str]:
    strategy = Strategy(overrides.get("strategy", args.strategy))
    token_dict = TokenAttentionDict.load(args.dict) if args.dict else None
    table = CategoryAttentionTable.load(args.category_table) if args.category_table else None
    if strategy is not Strategy.DROPOUT and token_dict is None:
        raise InputError(f"--strategy {strategy.value} needs --dict")
    ratio = overrides.get("ratio", args.relative_length)
    length = None if "ratio" in overrides else args.target_length
    if length is None and ratio is None:
        raise InputError("give --target-length or --relative-length")
    if length is not None and ratio is not None:
        raise InputError("--target-length and --relative-length are exclusive")
    cfg = PruneConfig(
        strategy=strategy,
        target_length=length,
        relative_length=ratio,
        seed=args.seed,
        source=args.attention_source,
        freeze=args.freeze_attention,
        protect_delimiters=args.protect_delimiters,
        mode=overrides.get("mode", args.mode),
        token_dict=token_dict,
        category_table=table,
    )
    extra = {}
    if args.dict and strategy is not Strategy.DROPOUT:
        extra["dict"] = _file_digest(args.dict)
    if args.category_table and strategy is Strategy.ATTENTION:
        extra["category_table"] = _file_digest(args.category_table)
    return cfg, cfg.digest(extra)


def _prune_one(sn):
    return prune(sn, _STATE["config"])


def run_prune(snippets: Iterable, cfg: PruneConfig, jobs: int) -> Iterator:
    """Yield ``(snippet, result)`` pairs in input order."""
    a, b = itertools.tee(snippets)
    return zip(a, _pmap(_prune_one, b, jobs, {"config": cfg}))


def cmd_prune(args) -> int:
    cfg, digest = _make_config(args)
    snippets = _read_cache(args.input)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    summary = RunSummary(strategy=cfg.strategy.value)
    t0 = time.perf_counter()
    with out.open("w", encoding="utf-8") as fh:
        for sn, res in run_prune(snippets, cfg, args.jobs):
            fh.write(json.dumps(result_to_dict(res, sn, cfg.strategy.value, digest), ensure_ascii=False, separators=(",", ":")) + "\n")
            summary.add(res, sn)
    summary.wall_time = time.perf_counter() - t0
    if summary.records == 0 and args.strict:
        raise InputError(f"{args.input}: no snippets to prune")
    print(summary.table())
    if args.summary:
        _write_summary(summary, Path(args.summary), cfg, digest)
    return EXIT_OK


def _write_summary(summary: RunSummary, path: Path, cfg: PruneConfig | None = None, digest: str | None = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    obj = summary.to_json()
    if cfg is not None:
        obj["config"] = {**cfg.describe(), "digest": digest}
    path.write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# stats

def cmd_stats(args) -> int:
    outdir = Path(args.output) if args.output else None
    d = TokenAttentionDict.load(args.dict)
    rows = d.ranked(args.min_count)
    if not rows:
        log.warning("no token occurs %d times or more; lower --min-count", args.min_count)
    print(f"# top {args.top} tokens by attention (count >= {args.min_count})")
    print("rank\ttoken\tmean\tcount")
    for k, (tok, m, c) in enumerate(rows[: args.top], 1):
        print(f"{k}\t{tok}\t{m:.4g}\t{c}")
    if outdir:
        report.write_tsv(outdir / "token_ranking.tsv", ["rank", "token", "mean", "count"],
                         ((k, t, m, c) for k, (t, m, c) in enumerate(rows, 1)))
        if rows and not args.no_figures:
            report.plot_token_ranking(rows, outdir / "token_ranking.png", args.top)

    if args.category_table:
        table = CategoryAttentionTable.load(args.category_table)
        crow = table.ranked()
        print("\n# statement categories by attention")
        print("rank\tcategory\tmean\tstatements")
        for k, (c, m, n) in enumerate(crow, 1):
            print(f"{k}\t{c.value}\t{m:.4g}\t{n}")
        if outdir:
            report.write_tsv(outdir / "category_attention.tsv", ["rank", "category", "mean", "statements"],
                             ((k, c, m, n) for k, (c, m, n) in enumerate(crow, 1)))
            if crow and not args.no_figures:
                report.plot_category_attention(crow, outdir / "category_attention.png")

    if args.pruned:
        if not args.cache:
            raise InputError("--pruned needs --cache to resolve statements")
        snippets = {sn.id: sn for sn in _read_cache(args.cache)}
        summary = RunSummary()
        with Path(args.pruned).open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                summary.strategy = summary.strategy or obj.get("strategy", "")
                sn = snippets.get(str(obj["id"]))
                if sn is None:
                    raise InputError(f"pruned record {obj['id']!r} not in {args.cache}")
                summary.add(result_from_dict(obj), sn)
        print()
        print(summary.table())
        if outdir:
            _write_summary(summary, outdir / "summary.json")
            ret = {c: summary.retention(c) for c in summary.categories}
            report.write_tsv(outdir / "retention.tsv", ["category", "statements", "retention"],
                             ((c, summary.categories[c].total, r) for c, r in sorted(ret.items(), key=lambda kv: kv[0].value)))
            if ret and not args.no_figures:
                report.plot_retention(ret, outdir / "retention.png")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def cmd_sweep(args) -> int:
    ratios = sorted({float(x) for x in args.ratios.split(",")}, reverse=True)
    modes = [Mode.FULL]
    if args.statement_only:
        modes.append(Mode.STATEMENT)
    if args.token_only:
        modes.append(Mode.TOKEN)
    if args.strategy != Strategy.ATTENTION.value and len(modes) > 1:
        raise InputError("--statement-only/--token-only apply to the attention strategy")
    snippets = list(_read_cache(args.input))
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)

    rows, counts = [], []
    violations = 0
    for mode in modes:
        last: dict[str, int] = {}
        for ratio in ratios:
            cfg, _ = _make_config(args, ratio=ratio, mode=mode.value)
            summary = RunSummary(strategy=cfg.strategy.value)
            for sn, res in run_prune(snippets, cfg, args.jobs):
                summary.add(res, sn)
                k = len(res.kept)
                counts.append((sn.id, mode.value, ratio, len(sn), k))
                if k > last.get(sn.id, k):
                    violations += 1
                last[sn.id] = k
            row = {"mode": mode.value, "ratio": ratio, "records": summary.records,
                   "tokens_before": summary.tokens_before, "tokens_after": summary.tokens_after,
                   "macro_rl": summary.macro_rl, "micro_rl": summary.micro_rl}
            ctrl = [summary.retention(c) for c in CONTROL_FLOW_CATEGORIES if summary.retention(c) is not None]
            row["signature_retention"] = summary.retention(Category.METHOD_SIGNATURE)
            row["return_retention"] = summary.retention(Category.RETURN)
            row["max_control_flow_retention"] = max(ctrl) if ctrl else None
            rows.append(row)
            print(f"{mode.value}\t{ratio:.2f}\tRL macro {row['macro_rl'] or 0:.4f}\tmicro {row['micro_rl'] or 0:.4f}")

    header = list(rows[0]) if rows else ["mode", "ratio"]
    report.write_tsv(outdir / "sweep.tsv", header, ([r[h] for h in header] for r in rows))
    report.write_tsv(outdir / "sweep_counts.tsv", ["id", "mode", "ratio", "n_tokens", "kept"], counts)
    if rows and not args.no_figures:
        report.plot_sweep(rows, outdir / "sweep.png")
    if violations:
        log.warning("%d kept counts increased as the relative length decreased", violations)
    return EXIT_OK


# ---------------------------------------------------------------------------

def _read_cache(path) -> Iterator:
    if not Path(path).is_file():
        raise InputError(f"{path}: no such file")
    return read_cache(path)


def _ratio(s: str) -> float:
    v = float(s)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"relative length must be in (0, 1], got {s}")
    return v


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--strict", action="store_true", help="fail on the first malformed record")
    common.add_argument("--jobs", type=_positive, default=_default_jobs(), help="worker processes (default: all cores)")
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("--no-figures", action="store_true", help="skip matplotlib output")

    strat = argparse.ArgumentParser(add_help=False)
    strat.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.ATTENTION.value)
    strat.add_argument("--target-length", type=_positive)
    strat.add_argument("--relative-length", type=_ratio)
    strat.add_argument("--seed", type=int, default=0)
    strat.add_argument("--dict", help="token attention dictionary (JSON)")
    strat.add_argument("--category-table", help="category attention table (JSON)")
    strat.add_argument("--attention-source", choices=["token", "category"], default="token",
                       help="statement attention from token weights or the category table")
    strat.add_argument("--freeze-attention", action="store_true",
                       help="do not recompute statement attention during token pruning")
    strat.add_argument("--protect-delimiters", action="store_true", help="prune ; { } last")
    strat.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.FULL.value)

    p = argparse.ArgumentParser(prog="codeprune", description="Simplify Java/Python functions to a token budget.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("parse", parents=[common], help="tokenize, split and classify a corpus")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", required=True)
    sp.add_argument("--language", choices=["java", "python"])
    sp.add_argument("--no-delex", action="store_true", help="keep literal text")
    sp.add_argument("--report", help="directory for the histogram TSV/figure")
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("build-dict", parents=[common], help="build attention dictionaries from exports")
    sp.add_argument("--input", required=True, help="attention export JSONL")
    sp.add_argument("--cache", required=True, help="parsed-snippet cache")
    sp.add_argument("--output", required=True, help="token dictionary path")
    sp.add_argument("--category-table")
    sp.add_argument("--min-count", type=_positive, default=50)
    sp.set_defaults(func=cmd_build_dict)

    sp = sub.add_parser("classify-stats", parents=[common], help="category histogram of a cache")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", help="report directory")
    sp.set_defaults(func=cmd_classify_stats)

    sp = sub.add_parser("prune", parents=[common, strat], help="prune a parsed cache")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", required=True)
    sp.add_argument("--summary", help="write the run summary JSON here")
    sp.set_defaults(func=cmd_prune)

    sp = sub.add_parser("stats", parents=[common], help="ranked attention data and run summaries")
    sp.add_argument("--dict", required=True)
    sp.add_argument("--category-table")
    sp.add_argument("--pruned", help="pruned output to summarize")
    sp.add_argument("--cache", help="cache the pruned output came from")
    sp.add_argument("--output", help="report directory")
    sp.add_argument("--top", type=_positive, default=20)
    sp.add_argument("--min-count", type=_positive, default=50)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("sweep", parents=[common, strat], help="prune over a grid of relative lengths")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", required=True, help="report directory")
    sp.add_argument("--ratios", default=",".join(map(str, DEFAULT_SWEEP)))
    sp.add_argument("--statement-only", action="store_true", help="add the selection-only curve")
    sp.add_argument("--token-only", action="store_true", help="add the token-only curve")
    sp.set_defaults(func=cmd_sweep)

    _apply_env(p)
    return p


def _apply_env(parser: argparse.ArgumentParser, env=None) -> None:
    env = os.environ if env is None else env
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                _apply_env(sp, env)
            continue
        longs = [o for o in action.option_strings if o.startswith("--")]
        if not longs or action.dest == "help":
            continue
        key = ENV_PREFIX + longs[0][2:].upper().replace("-", "_")
        if key not in env:
            continue
        raw = env[key]
        if isinstance(action, argparse._StoreTrueAction):
            action.default = raw.strip().lower() in ("1", "true", "yes", "on")
        else:
            action.default = action.type(raw) if action.type else raw
        action.required = False


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (InputError, ValueError, OSError) as e:
        # CorpusError, LexError, AttentionError and SummaryError are ValueErrors
        print(f"codeprune: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

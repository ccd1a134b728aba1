"""
コマンドライン
  assign / balance / rebalance / iters / bench / space

終了コード: 0 正常, 2 使い方の誤り, 3 実行時エラー
出力は stdout (CSV か JSON)、ログは stderr。
"""
import argparse
import logging
import sys
from typing import List, Optional

from logic import analysis, bench, exporter, jump_core, rendezvous_hash, ring_hash, settings
from logic.mixing import parse_key
from logic.models import Algorithm, CachePressureConfig, Layout, OutputFormat, RingConfig, INT32_MAX

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

RING_ALGS = (Algorithm.RING_A, Algorithm.RING_B)


class UsageError(ValueError):
    """引数の組み合わせ・値の誤り (exit 2)"""


def configure_logging(verbose: bool = False):
    level = logging.INFO if verbose else getattr(logging, settings.get_log_level(), logging.WARNING)
    logging.basicConfig(level=level, format="[%(levelname)s] %(message)s", stream=sys.stderr, force=True)


# ─────────────────────────────────────────────
# 引数
# ─────────────────────────────────────────────
def _positive(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _bucket_count(text: str) -> int:
    value = _positive(text)
    if value > INT32_MAX:
        raise argparse.ArgumentTypeError(f"must fit in int32, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        return parse_key(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chl", description="Consistent hashing toolkit: jump / ring / rendezvous")
    parser.add_argument("-v", "--verbose", action="store_true", help="INFO ログを表示")
    sub = parser.add_subparsers(dest="command", required=True)

    algs = [a.value for a in Algorithm if a != Algorithm.LINEAR]

    def common(p, seed=True, fmt=True):
        if seed:
            p.add_argument("--seed", type=_seed, default=None, help="シード (既定: CHL_SEED または 1)")
        if fmt:
            p.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value)

    p = sub.add_parser("assign", help="キーのバケットを表示")
    p.add_argument("--alg", choices=algs, default=Algorithm.JUMP.value)
    p.add_argument("--key", required=True, help="64bit 符号なし整数 (10進 or 0x16進)")
    p.add_argument("--buckets", type=int, required=True)
    p.add_argument("--points", type=_positive, default=None, help="リングの点数 k")
    common(p, fmt=False)

    p = sub.add_parser("balance", help="キー空間の均等性 (σ/μ と 99%% 区間)")
    p.add_argument("--alg", choices=algs, default=Algorithm.JUMP.value)
    p.add_argument("--buckets", type=_bucket_count, default=1000)
    p.add_argument("--points", type=_positive, default=None)
    p.add_argument("--keys", type=_positive, default=1_000_000)
    p.add_argument("--exact", action="store_true", help="リングの弧長から厳密に計算")
    p.add_argument("--table", action="store_true", help="k = 1, 10, 100, 1000 と jump の表")
    common(p)

    p = sub.add_parser("rebalance", help="バケット数変更時の移動量")
    p.add_argument("--alg", choices=algs, default=Algorithm.JUMP.value)
    p.add_argument("--from", dest="n_from", type=_bucket_count, required=True)
    p.add_argument("--to", dest="n_to", type=_bucket_count, required=True)
    p.add_argument("--points", type=_positive, default=None)
    p.add_argument("--keys", type=_positive, default=1_000_000)
    common(p)

    p = sub.add_parser("iters", help="jump のループ回数")
    p.add_argument("--buckets", type=_bucket_count, default=1000)
    p.add_argument("--keys", type=_positive, default=100_000)
    common(p)

    p = sub.add_parser("bench", help="実行時間 / 初期化時間")
    p.add_argument("--alg", choices=algs, default=Algorithm.JUMP.value)
    p.add_argument("--mode", choices=["assign", "build"], default="assign")
    p.add_argument("--buckets", type=_bucket_count, nargs="+", default=None)
    p.add_argument("--points", type=_positive, default=1000)
    p.add_argument("--keys", type=_positive, default=100_000, help="計測に使うキー数")
    p.add_argument("--runs", type=_positive, default=bench.DEFAULT_RUNS)
    p.add_argument("--cache-pressure", action="store_true")
    p.add_argument("--filler-bytes", type=_positive, default=None)
    common(p)

    p = sub.add_parser("space", help="リングのメモリ量モデル")
    p.add_argument("--buckets", type=_bucket_count, nargs="+", default=list(bench.SPACE_NS))
    p.add_argument("--points", type=_positive, default=1000)
    common(p, seed=False)
    return parser


def _validate(args):
    alg = Algorithm(args.alg) if hasattr(args, "alg") else None
    if args.command == "assign":
        if args.buckets < 1 or args.buckets > INT32_MAX:
            raise UsageError(f"--buckets must be in [1, {INT32_MAX}], got {args.buckets}")
        args.key = parse_key(args.key)
    if alg in RING_ALGS and args.command in ("assign", "rebalance") and args.points is None:
        raise UsageError(f"--alg {alg.value} requires --points")
    if args.command == "balance":
        if args.exact and alg not in RING_ALGS:
            raise UsageError("--exact is only available for ring-a / ring-b")
        if (args.exact or alg in RING_ALGS) and args.points is None and not args.table:
            raise UsageError(f"--alg {alg.value} requires --points")
        if not args.exact and not args.table and args.keys < args.buckets:
            raise UsageError("--keys must be >= --buckets")
    if args.command == "bench":
        if args.mode == "build" and alg not in RING_ALGS:
            raise UsageError("--mode build is only available for ring-a / ring-b")
        if args.filler_bytes is not None and not args.cache_pressure:
            raise UsageError("--filler-bytes requires --cache-pressure")


# ─────────────────────────────────────────────
# コマンド
# ─────────────────────────────────────────────
def cmd_assign(args) -> int:
    alg = Algorithm(args.alg)
    seed = args.seed if args.seed is not None else 0
    if alg == Algorithm.JUMP:
        bucket = jump_core.jump_bucket(args.key, args.buckets)
    elif alg == Algorithm.HRW:
        bucket = rendezvous_hash.hrw_bucket(args.key, args.buckets)
    else:
        config = RingConfig(num_buckets=args.buckets, points_per_bucket=args.points, seed=seed)
        ring = ring_hash.build_ring_a(config) if alg == Algorithm.RING_A else ring_hash.build_ring_b(config)
        bucket = ring_hash.assign(ring, args.key)
    print(bucket)
    return EXIT_OK


def cmd_balance(args) -> List:
    seed = _seed_or_default(args)
    alg = Algorithm(args.alg)
    if args.table:
        reports = analysis.balance_table(n=args.buckets, seeds=(seed,), jump_keys=args.keys, jump_seed=seed)
    elif args.exact:
        config = RingConfig(num_buckets=args.buckets, points_per_bucket=args.points, seed=seed)
        ring = ring_hash.build_ring_a(config) if alg == Algorithm.RING_A else ring_hash.build_ring_b(config)
        reports = [analysis.exact_ring_balance(ring)]
    else:
        reports = [analysis.sampled_balance(alg, args.buckets, args.keys, seed, points=args.points)]
    rows = []
    for r in reports:
        rows.extend(exporter.balance_rows(r))
    return rows


def cmd_rebalance(args) -> List:
    report = analysis.rebalance_report(Algorithm(args.alg), args.n_from, args.n_to, args.keys,
                                       _seed_or_default(args), points=args.points)
    return exporter.rebalance_rows(report)


def cmd_iters(args) -> List:
    report = analysis.iteration_stats(args.buckets, args.keys, _seed_or_default(args))
    return exporter.iteration_rows(report)


def cmd_bench(args) -> List:
    alg = Algorithm(args.alg)
    if args.mode == "build":
        layout = Layout.A if alg == Algorithm.RING_A else Layout.B
        ns = args.buckets or list(bench.BUILD_NS)
        return exporter.build_rows(bench.build_time_sweep([layout], ns, args.points, seed=_seed_or_default(args)))

    cache = None
    if args.cache_pressure:
        cache = CachePressureConfig(filler_bytes=args.filler_bytes or settings.get_filler_bytes())
    ns = args.buckets or list(bench.BENCH_NS)
    results = bench.time_sweep([alg], ns, args.keys, points=args.points, cache_config=cache,
                               seed=_seed_or_default(args), runs=args.runs)
    return exporter.bench_rows(results, [bench.reference_ns(r) for r in results])


def cmd_space(args) -> List:
    return exporter.space_rows(bench.space_table(args.buckets, args.points))


COMMANDS = {
    "balance": cmd_balance,
    "rebalance": cmd_rebalance,
    "iters": cmd_iters,
    "bench": cmd_bench,
    "space": cmd_space,
}


def _seed_or_default(args) -> int:
    return args.seed if args.seed is not None else settings.get_default_seed()


def _emit(rows, fmt: str):
    if OutputFormat(fmt) == OutputFormat.JSON:
        sys.stdout.write(exporter.rows_to_json(rows) + "\n")
    else:
        sys.stdout.write(exporter.rows_to_csv(rows))


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    configure_logging(args.verbose)

    try:
        _validate(args)
    except ValueError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "assign":
            return cmd_assign(args)
        rows = COMMANDS[args.command](args)
        _emit(rows, args.format)
    except Exception as e:
        print(f"[ERROR] {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK

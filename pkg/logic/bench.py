"""
ベンチマーク
- time_assign: 1 回あたりの ns (ループのオーバーヘッドを差し引く)
- cache pressure: 1 回ごとにフィラー領域からランダム 16byte + 連続 64KB を読む
- build_time: リングの構築時間
- memory_model: レイアウトごとのメモリ量のモデル (実測ではない)

計測はシングルスレッド。同一プロセス内で同時にベンチを走らせることは禁止 (RuntimeError)。
絶対値はハードウェア依存なので、比較は比率・傾向で行う。
"""
import logging
import platform
import statistics
import threading
import time
from contextlib import contextmanager
from typing import Callable, Dict, Iterable, List, Optional, Sequence
import numpy as np
from scipy import stats

from .models import Algorithm, BenchResult, CachePressureConfig, Layout, MemoryModel, RingConfig
from .mixing import splitmix64_stream
from . import analysis, jump_core, rendezvous_hash, ring_hash

logger = logging.getLogger(__name__)

BENCH_NS = (2, 5, 20, 150, 1024, 8192, 65536)
JUMP_EXTRA_NS = (1 << 20, 1 << 30)
BUILD_NS = (2, 5, 20, 150, 1024, 8192, 65536)
SPACE_NS = (10, 1000, 100000)
BYTES_PER_POINT = {Layout.A: 48, Layout.B: 8}
DEFAULT_RUNS = 5
PASSES_PER_RUN = 3

# Xeon E5-1650 での参考値 (ns/op)。比率の比較にのみ使う
REFERENCE_NS: Dict[str, Dict[int, int]] = {
    "jump": {2: 12, 5: 20, 20: 33, 150: 50, 1024: 65, 8192: 81, 65536: 96, 1 << 20: 116, 1 << 30: 165},
    "ring-a/1000": {2: 73, 5: 92, 20: 156, 150: 262, 1024: 658, 8192: 1151, 65536: 1814},
    "ring-b/1000": {2: 63, 5: 70, 20: 84, 150: 124, 1024: 194, 8192: 432, 65536: 777},
}
REFERENCE_NS_CACHE: Dict[str, Dict[int, int]] = {
    "jump": {2: 17, 5: 26, 20: 40, 150: 54, 1024: 67, 8192: 86, 65536: 103, 1 << 20: 121, 1 << 30: 176},
    "ring-a/1000": {2: 262, 5: 304, 20: 401, 150: 766, 1024: 1075, 8192: 1540, 65536: 2221},
    "ring-b/1000": {2: 72, 5: 86, 20: 115, 150: 187, 1024: 341, 8192: 618, 65536: 966},
}
REFERENCE_BUILD_SECONDS: Dict[Layout, Dict[int, float]] = {
    Layout.A: {2: 0.00024, 5: 0.00072, 20: 0.0039, 150: 0.045, 1024: 0.61, 8192: 8.94, 65536: 111.99},
    Layout.B: {2: 0.00011, 5: 0.00031, 20: 0.0014, 150: 0.012, 1024: 0.093, 8192: 0.85, 65536: 7.66},
}

_bench_lock = threading.Lock()
_last_accumulator = 0


@contextmanager
def _exclusive():
    if not _bench_lock.acquire(blocking=False):
        raise RuntimeError("another benchmark is already running in this process")
    try:
        yield
    finally:
        _bench_lock.release()


def environment() -> str:
    return f"{platform.python_implementation()} {platform.python_version()} {platform.machine()} {platform.system()}"


# ─────────────────────────────────────────────
# キャッシュ競合
# ─────────────────────────────────────────────
class CacheToucher:
    """1 回ごとにランダムな 16byte と 64KB の連続ブロックを読む"""

    def __init__(self, config: CachePressureConfig, ops: int, seed: int = 0):
        self.config = config
        self.filler = np.ones(config.filler_bytes, dtype=np.uint8)
        rng = np.random.default_rng(seed)
        self.random_idx = rng.integers(0, config.filler_bytes, size=(ops, config.random_touches))
        self.block_off = rng.integers(0, config.filler_bytes - config.block_bytes + 1, size=ops).tolist()
        logger.info(f"cache filler allocated: {config.filler_bytes} bytes")

    def touch(self, i: int) -> int:
        off = self.block_off[i]
        return int(self.filler[self.random_idx[i]].sum()) + int(self.filler[off:off + self.config.block_bytes].sum())


def _noop(key: int, n: int) -> int:
    return 0


def _run_loop(fn: Callable[[int, int], int], n: int, keys: List[int], toucher: Optional[CacheToucher]) -> int:
    """1 パスの経過 ns。acc に畳み込んで結果を捨てさせない"""
    global _last_accumulator
    acc = 0
    if toucher is None:
        start = time.perf_counter_ns()
        for key in keys:
            acc ^= fn(key, n)
        elapsed = time.perf_counter_ns() - start
    else:
        touch = toucher.touch
        start = time.perf_counter_ns()
        for i, key in enumerate(keys):
            acc ^= fn(key, n)
            acc ^= touch(i)
        elapsed = time.perf_counter_ns() - start
    _last_accumulator = acc
    return elapsed


def _best_of(fn: Callable[[int, int], int], n: int, keys: List[int], toucher: Optional[CacheToucher]) -> int:
    """PASSES_PER_RUN 回のうち最短 (割り込みなどで遅れたパスを捨てる)"""
    return min(_run_loop(fn, n, keys, toucher) for _ in range(PASSES_PER_RUN))


def time_callable(fn: Callable[[int, int], int], n: int, keys: List[int],
                  runs: int = DEFAULT_RUNS, toucher: Optional[CacheToucher] = None) -> float:
    """
    1 run = fn のループと no-op を呼ぶ同じループの組。run ごとに順序を入れ替え、
    (fn − no-op) / 回数 の run 間の中央値を返す。0 未満は 0。
    どちらのループにもキャッシュ競合の処理が入る。
    """
    if not keys:
        raise ValueError("keys must not be empty")
    with _exclusive():
        # warmup
        _run_loop(fn, n, keys, toucher)
        _run_loop(_noop, n, keys, toucher)
        diffs, work = [], []
        for i in range(max(runs, 1)):
            if i % 2 == 0:
                w = _best_of(fn, n, keys, toucher)
                b = _best_of(_noop, n, keys, toucher)
            else:
                b = _best_of(_noop, n, keys, toucher)
                w = _best_of(fn, n, keys, toucher)
            work.append(w)
            diffs.append(w - b)
    total = statistics.median(work)
    if total < 1_000_000:
        logger.warning(f"only {total} ns measured; increase iterations for stable timings")
    return max(0.0, statistics.median(diffs) / len(keys))


def _assign_fn(algorithm: Algorithm, n: int, points: int, ring_seed: int) -> Callable[[int, int], int]:
    algorithm = Algorithm(algorithm)
    if algorithm == Algorithm.JUMP:
        return jump_core.jump_bucket
    if algorithm == Algorithm.HRW:
        return rendezvous_hash.hrw_bucket
    if algorithm == Algorithm.LINEAR:
        return jump_core.linear_ch
    config = RingConfig(num_buckets=n, points_per_bucket=points, seed=ring_seed)
    if algorithm == Algorithm.RING_A:
        ring = ring_hash.build_ring_a(config)
        return lambda key, _n: ring_hash.lookup(ring, key)
    ring = ring_hash.build_ring_b(config)
    return lambda key, _n: ring_hash.lookup(ring, key >> 32)


def time_assign(algorithm: Algorithm, n: int, iterations: int,
                cache_config: Optional[CachePressureConfig] = None,
                points: int = 1000, seed: int = 1, ring_seed: int = 0,
                runs: int = DEFAULT_RUNS) -> BenchResult:
    fn = _assign_fn(algorithm, n, points, ring_seed)
    keys = splitmix64_stream(seed, iterations)
    toucher = CacheToucher(cache_config, iterations, seed) if cache_config else None
    ns = time_callable(fn, n, keys, runs=runs, toucher=toucher)
    is_ring = Algorithm(algorithm) in (Algorithm.RING_A, Algorithm.RING_B)
    logger.info(f"{Algorithm(algorithm).value} n={n}: {ns:.1f} ns/op (cache={bool(cache_config)})")
    return BenchResult(
        algorithm=Algorithm(algorithm), n=n, points_per_bucket=points if is_ring else None,
        ns_per_op=ns, iterations=iterations, cache_mode=cache_config is not None,
        environment=environment(),
    )


def time_sweep(algorithms: Sequence[Algorithm], ns: Sequence[int] = BENCH_NS, iterations: int = 100_000,
               points: int = 1000, cache_config: Optional[CachePressureConfig] = None,
               seed: int = 1, runs: int = DEFAULT_RUNS) -> List[BenchResult]:
    """jump は既定の n 列のとき 2^20, 2^30 も測る"""
    results = []
    for alg in algorithms:
        sweep = list(ns)
        if Algorithm(alg) == Algorithm.JUMP and list(ns) == list(BENCH_NS):
            sweep += list(JUMP_EXTRA_NS)
        for n in sweep:
            results.append(time_assign(alg, n, iterations, cache_config, points=points, seed=seed, runs=runs))
    return results


def reference_ns(result: BenchResult) -> Optional[int]:
    table = REFERENCE_NS_CACHE if result.cache_mode else REFERENCE_NS
    key = result.algorithm.value
    if result.points_per_bucket is not None:
        key = f"{key}/{result.points_per_bucket}"
    return table.get(key, {}).get(result.n)


def iteration_correlation(results: Sequence[BenchResult], num_keys: int = 100_000, seed: int = 1) -> float:
    """jump の ns/op と平均反復回数の Pearson 相関"""
    ns = [r.ns_per_op for r in results]
    iters = [analysis.iteration_stats(r.n, num_keys, seed).mean_iterations for r in results]
    r, _ = stats.pearsonr(ns, iters)
    return float(r)


# ─────────────────────────────────────────────
# 初期化時間
# ─────────────────────────────────────────────
def build_time(layout: Layout, config: RingConfig) -> float:
    build = ring_hash.build_ring_a if Layout(layout) == Layout.A else ring_hash.build_ring_b
    with _exclusive():
        start = time.perf_counter()
        ring = build(config)
        elapsed = time.perf_counter() - start
    del ring
    return elapsed


def build_time_sweep(layouts: Iterable[Layout] = (Layout.A, Layout.B), ns: Sequence[int] = BUILD_NS,
                     k: int = 1000, seed: int = 0) -> List[dict]:
    rows = []
    for layout in layouts:
        for n in ns:
            seconds = build_time(layout, RingConfig(num_buckets=n, points_per_bucket=k, seed=seed))
            rows.append({
                "layout": Layout(layout).value, "n": n, "k": k, "seconds": seconds,
                "reference_seconds": REFERENCE_BUILD_SECONDS[Layout(layout)].get(n) if k == 1000 else None,
            })
    return rows


# ─────────────────────────────────────────────
# メモリ量
# ─────────────────────────────────────────────
def memory_model(layout: Layout, n: int, k: int) -> MemoryModel:
    layout = Layout(layout)
    per_point = BYTES_PER_POINT[layout]
    return MemoryModel(layout=layout, n=n, points_per_bucket=k,
                       bytes_per_point=per_point, total_bytes=n * k * per_point)


_UNITS = ("B", "KB", "MB", "GB", "TB")


def pick_unit(num_bytes: int) -> str:
    """1 以上になる最大の 1024 系単位"""
    unit = 0
    while unit + 1 < len(_UNITS) and num_bytes >= 1024 ** (unit + 1):
        unit += 1
    return _UNITS[unit]


def format_binary(num_bytes: int, unit: Optional[str] = None) -> str:
    """1024 系の単位で表示。100 以上は整数、それ未満は有効数字 2 桁"""
    unit = unit or pick_unit(num_bytes)
    value = num_bytes / 1024 ** _UNITS.index(unit)
    if value >= 99.5:
        text = f"{value:.0f}"
    else:
        text = f"{value:.2g}"
    return f"{text} {unit}"


def space_table(ns: Sequence[int] = SPACE_NS, k: int = 1000) -> List[dict]:
    """行ごとに A の単位に揃える"""
    rows = []
    for n in ns:
        a = memory_model(Layout.A, n, k)
        b = memory_model(Layout.B, n, k)
        unit = pick_unit(a.total_bytes)
        rows.append({
            "n": n, "k": k,
            "bytes_a": a.total_bytes, "bytes_b": b.total_bytes,
            "space_a": format_binary(a.total_bytes, unit),
            "space_b": format_binary(b.total_bytes, unit),
        })
    return rows

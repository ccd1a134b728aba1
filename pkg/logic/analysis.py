"""
解析 (キー空間の均等性・再配置・反復回数)

キーは SplitMix64 のシード付き列から取り、チャンクに分けて ThreadPoolExecutor で処理する。
各チャンクは整数のヒストグラムを返し、チャンク順に足し合わせるので
スレッド数に関係なく同じレポートになる。
"""
import logging
import math
import concurrent.futures
from typing import Callable, Iterable, List, Optional, Sequence, Set
import numpy as np
from scipy import stats

from .models import (
    Algorithm, BalanceReport, IterationReport, Layout, RebalanceReport,
    RingConfig, SampleBasis,
)
from .mixing import key_array
from .settings import get_threads
from . import jump_core, ring_hash, rendezvous_hash

logger = logging.getLogger(__name__)

CHUNK_KEYS = 1 << 18
CI_QUANTILES = (0.005, 0.995)

AssignFn = Callable[[np.ndarray], np.ndarray]


# ─────────────────────────────────────────────
# 共通
# ─────────────────────────────────────────────
def make_assigner(algorithm: Algorithm, n: int, points: Optional[int] = None, ring_seed: int = 0) -> AssignFn:
    """keys (uint64 配列) → バケット配列 の関数を返す。リングはここで一度だけ構築する"""
    algorithm = Algorithm(algorithm)
    if algorithm == Algorithm.JUMP:
        return lambda keys: jump_core.jump_bucket_array(keys, n)
    if algorithm == Algorithm.LINEAR:
        return lambda keys: jump_core.linear_ch_array(keys, n)
    if algorithm == Algorithm.HRW:
        return lambda keys: rendezvous_hash.hrw_bucket_array(keys, n)
    if points is None:
        raise ValueError(f"{algorithm.value} requires points_per_bucket")
    config = RingConfig(num_buckets=n, points_per_bucket=points, seed=ring_seed)
    ring = ring_hash.build_ring_a(config) if algorithm == Algorithm.RING_A else ring_hash.build_ring_b(config)
    return lambda keys: ring_hash.assign_array(ring, keys)


def _chunks(num_keys: int) -> List[tuple]:
    return [(off, min(CHUNK_KEYS, num_keys - off)) for off in range(0, num_keys, CHUNK_KEYS)]


def _map_chunks(work: Callable[[np.ndarray], tuple], num_keys: int, seed: int, threads: Optional[int] = None) -> List[tuple]:
    """チャンクごとに key_array を作って work を適用。結果はチャンク順"""
    chunks = _chunks(num_keys)
    workers = max(1, min(threads or get_threads(), len(chunks)))
    logger.info(f"{num_keys} keys in {len(chunks)} chunks, {workers} threads")

    def run(chunk):
        offset, count = chunk
        return work(key_array(seed, count, offset))

    if workers == 1:
        return [run(c) for c in chunks]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(run, chunks))


def _balance_stats(fractions: np.ndarray, relative: Optional[np.ndarray] = None):
    """σ/μ と相対サイズの 99% 区間 (経験分位)"""
    fractions = np.asarray(fractions, dtype=np.float64)
    mean = float(np.mean(fractions))
    std_error = float(np.std(fractions) / mean) if mean > 0 else 0.0
    if relative is None:
        relative = fractions * fractions.size
    lo, hi = np.quantile(relative, CI_QUANTILES)
    return std_error, (float(min(lo, 1.0)), float(max(hi, 1.0)))


# ─────────────────────────────────────────────
# 均等性
# ─────────────────────────────────────────────
def sampled_balance(algorithm: Algorithm, n: int, num_keys: int, seed: int,
                    points: Optional[int] = None, ring_seed: int = 0,
                    threads: Optional[int] = None) -> BalanceReport:
    if num_keys < n:
        raise ValueError(f"num_keys ({num_keys}) must be >= n ({n})")
    assign = make_assigner(algorithm, n, points, ring_seed)
    parts = _map_chunks(lambda keys: (np.bincount(assign(keys), minlength=n),), num_keys, seed, threads)
    counts = np.zeros(n, dtype=np.int64)
    for (c,) in parts:
        counts += c
    fractions = counts / num_keys
    std_error, ci = _balance_stats(fractions)
    return BalanceReport(
        algorithm=Algorithm(algorithm), n=n, points_per_bucket=points,
        fractions=fractions.tolist(), std_error=std_error, ci_99=ci,
        basis=SampleBasis.SAMPLED_KEYS, num_keys=num_keys, seeds=[seed],
    )


def exact_ring_balance(ring: ring_hash.Ring) -> BalanceReport:
    arcs = ring_hash.arc_fractions(ring)
    present = sorted(ring.bucket_ids) if isinstance(ring, ring_hash.RingA) else range(ring.num_buckets)
    fractions = np.array([arcs.arcs[b] / arcs.total for b in present], dtype=np.float64)
    std_error, ci = _balance_stats(fractions)
    algorithm = Algorithm.RING_B if isinstance(ring, ring_hash.RingB) else Algorithm.RING_A
    return BalanceReport(
        algorithm=algorithm, n=len(fractions), points_per_bucket=ring.config.points_per_bucket,
        fractions=fractions.tolist(), std_error=std_error, ci_99=ci,
        basis=SampleBasis.EXACT_ARCS, seeds=[ring.config.seed],
    )


def ring_balance_over_seeds(layout: Layout, n: int, k: int, seeds: Sequence[int]) -> BalanceReport:
    """σ/μ はシード平均、99% 区間は全シードの相対サイズをまとめた分位"""
    build = ring_hash.build_ring_a if Layout(layout) == Layout.A else ring_hash.build_ring_b
    errors, relative, fractions = [], [], None
    for s in seeds:
        report = exact_ring_balance(build(RingConfig(num_buckets=n, points_per_bucket=k, seed=s)))
        errors.append(report.std_error)
        relative.append(np.asarray(report.fractions) * n)
        if fractions is None:
            fractions = report.fractions
    lo, hi = np.quantile(np.concatenate(relative), CI_QUANTILES)
    return BalanceReport(
        algorithm=Algorithm.RING_A if Layout(layout) == Layout.A else Algorithm.RING_B,
        n=n, points_per_bucket=k, fractions=fractions, std_error=float(np.mean(errors)),
        ci_99=(float(min(lo, 1.0)), float(max(hi, 1.0))),
        basis=SampleBasis.EXACT_ARCS, seeds=list(seeds),
    )


def balance_table(n: int = 1000, ks: Iterable[int] = (1, 10, 100, 1000), seeds: Sequence[int] = (0,),
                  jump_keys: int = 10_000_000, jump_seed: int = 1) -> List[BalanceReport]:
    """キー空間分布の表: リング (k ごと) + jump (サンプリング)"""
    rows = [ring_balance_over_seeds(Layout.A, n, k, seeds) for k in ks]
    rows.append(sampled_balance(Algorithm.JUMP, n, jump_keys, jump_seed))
    return rows


def chi_square_agreement(n: int, num_keys: int, seed: int, threads: Optional[int] = None) -> float:
    """linear_ch と jump_bucket のバケット分布の 2×n 分割表検定。p 値を返す"""
    def work(keys):
        return (np.bincount(jump_core.jump_bucket_array(keys, n), minlength=n),
                np.bincount(jump_core.linear_ch_array(keys, n), minlength=n))
    jump_counts = np.zeros(n, dtype=np.int64)
    linear_counts = np.zeros(n, dtype=np.int64)
    for a, b in _map_chunks(work, num_keys, seed, threads):
        jump_counts += a
        linear_counts += b
    _, p_value, _, _ = stats.chi2_contingency(np.vstack([jump_counts, linear_counts]))
    return float(p_value)


# ─────────────────────────────────────────────
# 再配置
# ─────────────────────────────────────────────
def rebalance_report(algorithm: Algorithm, n_from: int, n_to: int, num_keys: int, seed: int,
                     points: Optional[int] = None, ring_seed: int = 0,
                     threads: Optional[int] = None) -> RebalanceReport:
    """
    n_from と n_to のそれぞれでキーを割り当て、移動を集計する。
    縮小 (n_to < n_from) も計算するが、単調性の違反は増設時のみ数える。
    """
    if n_from < 1 or n_to < 1:
        raise ValueError(f"bucket counts must be >= 1, got {n_from} -> {n_to}")
    before = make_assigner(algorithm, n_from, points, ring_seed)
    after = make_assigner(algorithm, n_to, points, ring_seed)
    growth = n_to > n_from

    def work(keys):
        a = before(keys)
        b = after(keys)
        moved = a != b
        return (
            np.bincount(a, minlength=n_from),
            np.bincount(a[moved], minlength=n_from),
            np.bincount(b[moved], minlength=n_to),
            int(np.count_nonzero(moved & (b < n_from))) if growth else 0,
        )

    counts = np.zeros(n_from, dtype=np.int64)
    donated = np.zeros(n_from, dtype=np.int64)
    dest = np.zeros(n_to, dtype=np.int64)
    violations = 0
    for c, d, t, v in _map_chunks(work, num_keys, seed, threads):
        counts += c
        donated += d
        dest += t
        violations += v

    moved_total = int(donated.sum())
    shares = np.divide(donated, counts, out=np.zeros(n_from, dtype=np.float64), where=counts > 0)
    if violations:
        logger.warning(f"{algorithm}: {violations} keys moved between old buckets ({n_from} -> {n_to})")
    return RebalanceReport(
        algorithm=Algorithm(algorithm), n_from=n_from, n_to=n_to, num_keys=num_keys, seed=seed,
        moved_fraction=moved_total / num_keys,
        donated_fractions=(donated / num_keys).tolist(),
        donor_shares=shares.tolist(),
        destinations=dest.tolist(),
        violations=violations,
        donors=np.flatnonzero(donated).tolist(),
    )


def donors_on_add(ring: ring_hash.RingA) -> Set[int]:
    """
    add_bucket を実際には行わずに、新バケットの点が奪う弧の元の持ち主を返す。
    新しい点の弧 (直前の点, 自分] は、元のリングでの後続点が持っていた。
    """
    if len(ring) == 0:
        raise ValueError("donors_on_add on an empty ring")
    new_id = max(ring.bucket_ids) + 1
    keys = ring.points.keys()
    size = len(keys)
    donors = set()
    for point in ring._point_keys(new_id):
        idx = ring.points.bisect_left(point)
        # 同じ位置に既存の点があれば新しい点の弧は空 (位置 → バケット番号の順で後ろに並ぶ)
        if keys[(idx - 1) % size][0] == point[0]:
            continue
        donors.add(keys[idx % size][1])
    return donors


# ─────────────────────────────────────────────
# 反復回数
# ─────────────────────────────────────────────
def iteration_stats(n: int, num_keys: int, seed: int, threads: Optional[int] = None) -> IterationReport:
    def work(keys):
        it = jump_core.jump_iterations_array(keys, n)
        return int(it.sum()), int(it.max())

    parts = _map_chunks(work, num_keys, seed, threads)
    total = sum(p[0] for p in parts)
    max_it = max(p[1] for p in parts)
    mean = total / num_keys
    bound = math.log(n) + 1.0
    return IterationReport(
        n=n, num_keys=num_keys, seed=seed,
        mean_iterations=mean, max_iterations=max_it,
        harmonic=jump_core.harmonic(n), bound=bound,
        binary_search_comparisons=math.log2(n) if n > 1 else 0.0,
        below_bound=mean < bound,
    )

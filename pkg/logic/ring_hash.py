"""
Ring consistent hash (比較用ベースライン)
- RingA: 64bit の点位置 → バケット番号 の順序付きインデックス (SortedDict)。バケットの追加・削除が可能
- RingB: 上位 32bit に切り詰めた (位置, バケット) のソート済み配列。変更時は作り直し

規約:
  - 点は (直前の点, 自分] の弧を持つ。キー位置が点の位置と等しければその点のもの
  - 位置が衝突した場合は (position, bucket, replica) の順で全順序を付ける
  - キーは呼び出し側でハッシュ済みの 64bit 値。RingB はその上位 32bit を使う
"""
import logging
from typing import Iterable, List, Optional, Set, Tuple, Union
import numpy as np
from sortedcontainers import SortedDict

from .models import ArcFractions, RingConfig, MASK64
from .mixing import fmix64, fmix64_array

logger = logging.getLogger(__name__)

RING_A_SPACE = 1 << 64
RING_B_SPACE = 1 << 32
_U32 = np.uint64(32)


def point_hash(bucket: int, replica: int, seed: int = 0) -> int:
    """fmix64(((bucket << 32) | replica) ^ seed)"""
    if bucket < 0 or replica < 0 or replica >= (1 << 32):
        raise ValueError(f"invalid point id: bucket={bucket}, replica={replica}")
    return fmix64((((bucket << 32) | replica) & MASK64) ^ (seed & MASK64))


def _point_hash_array(buckets: np.ndarray, replicas: np.ndarray, seed: int) -> np.ndarray:
    packed = (buckets.astype(np.uint64) << _U32) | replicas.astype(np.uint64)
    return fmix64_array(packed ^ np.uint64(seed & MASK64))


def _grid(bucket_ids: Iterable[int], k: int) -> Tuple[np.ndarray, np.ndarray]:
    ids = np.asarray(list(bucket_ids), dtype=np.int64)
    return np.repeat(ids, k), np.tile(np.arange(k, dtype=np.int64), ids.size)


class RingA:
    """
    動的なリング。points は (position, bucket, replica) → bucket。
    読み取り専用の lookup は並行に呼んでよいが、add/remove は排他で呼ぶこと。
    """

    def __init__(self, config: RingConfig):
        self.config = config
        self.points = SortedDict()
        self.bucket_ids: Set[int] = set()
        self._snapshot: Optional[Tuple[np.ndarray, np.ndarray]] = None

    @property
    def num_buckets(self) -> int:
        return len(self.bucket_ids)

    def __len__(self) -> int:
        return len(self.points)

    def _point_keys(self, bucket: int) -> List[Tuple[int, int, int]]:
        k = self.config.points_per_bucket
        b, r = _grid([bucket], k)
        pos = _point_hash_array(b, r, self.config.seed)
        return [(int(p), bucket, i) for i, p in enumerate(pos.tolist())]

    def insert_bucket(self, bucket: int):
        if bucket in self.bucket_ids:
            raise ValueError(f"bucket {bucket} already present")
        for key in self._point_keys(bucket):
            self.points[key] = bucket
        self.bucket_ids.add(bucket)
        self._snapshot = None

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """(positions uint64, buckets int64) のスナップショット。変更のたびに作り直す"""
        if self._snapshot is None:
            keys = list(self.points.keys())
            positions = np.fromiter((k[0] for k in keys), dtype=np.uint64, count=len(keys))
            buckets = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
            self._snapshot = (positions, buckets)
        return self._snapshot


class RingB:
    """切り詰め位置のソート済み配列。作成後は不変"""

    def __init__(self, config: RingConfig, positions: np.ndarray, buckets: np.ndarray):
        self.config = config
        self.positions = positions   # uint32, 昇順
        self.buckets = buckets       # int32
        self.positions.setflags(write=False)
        self.buckets.setflags(write=False)

    @property
    def num_buckets(self) -> int:
        return self.config.num_buckets

    def __len__(self) -> int:
        return int(self.positions.size)

    def collisions(self) -> int:
        """隣接する同一位置の数 (32bit 切り詰めによる衝突)"""
        if self.positions.size < 2:
            return 0
        return int(np.count_nonzero(self.positions[1:] == self.positions[:-1]))

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.positions, self.buckets


Ring = Union[RingA, RingB]


# ─────────────────────────────────────────────
# 構築
# ─────────────────────────────────────────────
def build_ring_a(config: RingConfig) -> RingA:
    ring = RingA(config)
    k = config.points_per_bucket
    b, r = _grid(range(config.num_buckets), k)
    pos = _point_hash_array(b, r, config.seed)
    ring.points = SortedDict(
        ((p, bucket, rep), bucket)
        for p, bucket, rep in zip(pos.tolist(), b.tolist(), r.tolist())
    )
    ring.bucket_ids = set(range(config.num_buckets))
    logger.info(f"RingA built: n={config.num_buckets}, k={k}, points={len(ring)}")
    return ring


def build_ring_b(config: RingConfig) -> RingB:
    k = config.points_per_bucket
    b, r = _grid(range(config.num_buckets), k)
    pos = (_point_hash_array(b, r, config.seed) >> _U32).astype(np.uint32)
    # 位置 → バケット → レプリカ の順
    order = np.lexsort((r, b, pos))
    ring = RingB(config, pos[order], b[order].astype(np.int32))
    dup = ring.collisions()
    if dup:
        logger.warning(f"RingB: {dup} truncated point collisions (n={config.num_buckets}, k={k})")
    logger.info(f"RingB built: n={config.num_buckets}, k={k}, points={len(ring)}")
    return ring


def ring_b_from_a(ring: RingA) -> RingB:
    """RingA と同じ設定・同じバケット数で RingB を作り直す (バケット番号は連続であること)"""
    if ring.bucket_ids != set(range(ring.num_buckets)):
        raise ValueError("RingB requires contiguous bucket ids [0, n)")
    return build_ring_b(ring.config.model_copy(update={"num_buckets": ring.num_buckets}))


# ─────────────────────────────────────────────
# 参照
# ─────────────────────────────────────────────
def key_position(ring: Ring, key: int) -> int:
    """64bit キーをリングの点空間へ (A: そのまま, B: 上位 32bit)"""
    if isinstance(ring, RingB):
        return (key & MASK64) >> 32
    return key & MASK64


def _space(ring: Ring) -> int:
    return RING_B_SPACE if isinstance(ring, RingB) else RING_A_SPACE


def lookup(ring: Ring, position: int) -> int:
    """position 以上で最初の点のバケット。なければ最小の点へ折り返す"""
    if len(ring) == 0:
        raise ValueError("lookup on an empty ring")
    if position < 0 or position >= _space(ring):
        raise ValueError(f"position {position} outside the point space [0, {_space(ring)})")
    if isinstance(ring, RingB):
        idx = int(np.searchsorted(ring.positions, np.uint32(position), side="left"))
        if idx == ring.positions.size:
            idx = 0
        return int(ring.buckets[idx])
    idx = ring.points.bisect_left((position,))
    if idx == len(ring.points):
        idx = 0
    return ring.points.peekitem(idx)[1]


def assign(ring: Ring, key: int) -> int:
    return lookup(ring, key_position(ring, key))


def lookup_array(ring: Ring, positions: np.ndarray) -> np.ndarray:
    if len(ring) == 0:
        raise ValueError("lookup on an empty ring")
    points, buckets = ring.arrays()
    if isinstance(ring, RingB):
        query = np.asarray(positions)
        if query.size and (query.min() < 0 or query.max() >= RING_B_SPACE):
            raise ValueError(f"positions must lie in [0, {RING_B_SPACE}) for RingB")
        query = query.astype(np.uint32)
    else:
        query = np.asarray(positions, dtype=np.uint64)
    idx = np.searchsorted(points, query, side="left")
    idx[idx == points.size] = 0
    return buckets[idx].astype(np.int64)


def assign_array(ring: Ring, keys: np.ndarray) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.uint64)
    if isinstance(ring, RingB):
        return lookup_array(ring, keys >> _U32)
    return lookup_array(ring, keys)


# ─────────────────────────────────────────────
# 変更 (RingA のみ)
# ─────────────────────────────────────────────
def add_bucket(ring: RingA) -> RingA:
    """次の番号のバケットの点を挿入する"""
    if not isinstance(ring, RingA):
        raise TypeError("only RingA supports incremental updates; rebuild RingB instead")
    new_id = max(ring.bucket_ids) + 1 if ring.bucket_ids else 0
    ring.insert_bucket(new_id)
    return ring


def remove_bucket(ring: RingA, bucket: int) -> RingA:
    if not isinstance(ring, RingA):
        raise TypeError("only RingA supports incremental updates; rebuild RingB instead")
    if bucket not in ring.bucket_ids:
        raise KeyError(f"bucket {bucket} is not in the ring")
    if len(ring.bucket_ids) == 1:
        raise ValueError("cannot remove the last bucket: the ring would be empty")
    for key in ring._point_keys(bucket):
        del ring.points[key]
    ring.bucket_ids.discard(bucket)
    ring._snapshot = None
    return ring


# ─────────────────────────────────────────────
# 弧の集計
# ─────────────────────────────────────────────
def arc_fractions(ring: Ring) -> ArcFractions:
    """各点は (直前の点, 自分] を持つ。整数演算で集計するので合計は厳密に 1"""
    if len(ring) == 0:
        raise ValueError("arc_fractions on an empty ring")
    points, buckets = ring.arrays()
    total = _space(ring)
    size = max(ring.bucket_ids) + 1 if isinstance(ring, RingA) else ring.num_buckets

    arcs = [0] * size
    # 点が 1 つ、または全点が同じ位置なら、順序で先頭の点が全周を持つ
    if points.size == 1 or bool(np.all(points == points[0])):
        arcs[int(buckets[0])] = total
        return ArcFractions(arcs=arcs, total=total)

    p = points.astype(np.uint64)
    prev = np.roll(p, 1)
    with np.errstate(over="ignore"):
        length = p - prev
    if total == RING_B_SPACE:
        length = length & np.uint64(RING_B_SPACE - 1)
    # 先頭の点は 0 をまたぐ。uint64 の引き算は 2^64 で折り返すのでそのまま

    # 上位/下位 32bit に分けて足し込めば uint64 に収まる
    lo = np.zeros(size, dtype=np.uint64)
    hi = np.zeros(size, dtype=np.uint64)
    np.add.at(lo, buckets, length & np.uint64(0xFFFFFFFF))
    np.add.at(hi, buckets, length >> _U32)
    for b in range(size):
        arcs[b] = (int(hi[b]) << 32) + int(lo[b])
    return ArcFractions(arcs=arcs, total=total)


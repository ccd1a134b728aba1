"""
Rendezvous (highest random weight) hashing
score(key, b) = fmix64(key ^ point_hash(b, 0, 0)) が最大のバケットを返す。
同点は小さいバケット番号を優先。O(n)。
"""
from typing import Iterable
import numpy as np

from .mixing import fmix64, fmix64_array
from .ring_hash import point_hash
from .jump_core import _check_buckets, _check_key


def score(key: int, bucket: int) -> int:
    return fmix64(key ^ point_hash(bucket, 0, 0))


def hrw_bucket(key: int, n: int) -> int:
    n = _check_buckets(n)
    key = _check_key(key)
    best, best_score = 0, -1
    for b in range(n):
        s = fmix64(key ^ point_hash(b, 0, 0))
        if s > best_score:
            best, best_score = b, s
    return best


def hrw_bucket_among(key: int, candidates: Iterable[int]) -> int:
    """候補集合を明示する版 (削除時の局所性の確認用)"""
    key = _check_key(key)
    best, best_score = None, -1
    for b in sorted(set(candidates)):
        s = score(key, b)
        if s > best_score:
            best, best_score = b, s
    if best is None:
        raise ValueError("candidate set must not be empty")
    return best


def hrw_bucket_array(keys: np.ndarray, n: int) -> np.ndarray:
    """バケットごとに 1 パスずつ、最大値を更新していく (狭義の > なので同点は小さい番号が残る)"""
    n = _check_buckets(n)
    keys = np.asarray(keys, dtype=np.uint64)
    best = np.zeros(keys.shape[0], dtype=np.int64)
    best_score = fmix64_array(keys ^ np.uint64(point_hash(0, 0, 0)))
    for b in range(1, n):
        s = fmix64_array(keys ^ np.uint64(point_hash(b, 0, 0)))
        win = s > best_score
        best[win] = b
        best_score = np.where(win, s, best_score)
    return best

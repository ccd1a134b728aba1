"""
Jump consistent hash
- jump_bucket: 参照実装 (C++) とビット単位で一致させる
- jump_bucket_traced: ループ回数とジャンプ先を記録する版
- linear_ch: O(n) の線形版。値の一致ではなく分布の一致のみを主張する
- *_array: numpy のベクトル版 (スカラー版と同じ値を返すこと)

浮動小数の扱い:
  j = (b + 1) * (2^31 / ((state >> 33) + 1))
  を binary64 で「割り算 → 掛け算」の順に評価する。Python の float 演算は
  1 演算ずつ丸められるので FMA / 拡張精度は入らない。
"""
import math
from pathlib import Path
from typing import List, Tuple, Union
import numpy as np

from .models import JumpTrace, MASK64, INT32_MAX

LCG_MULTIPLIER = 2862933555777941757
TWO_31 = float(1 << 31)
EULER_GAMMA = 0.5772156649015329

_U33 = np.uint64(33)
_U1 = np.uint64(1)
_LCG_MUL = np.uint64(LCG_MULTIPLIER)


def _check_buckets(n: int) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise ValueError(f"num_buckets must be an integer, got {type(n).__name__}")
    n = int(n)
    if n < 1:
        raise ValueError(f"num_buckets must be >= 1, got {n}")
    if n > INT32_MAX:
        raise ValueError(f"num_buckets must fit in int32, got {n}")
    return n


def _check_key(key: int) -> int:
    key = int(key)
    if key < 0 or key > MASK64:
        raise ValueError(f"key must be a 64-bit unsigned integer, got {key}")
    return key


def lcg_next(state: int) -> int:
    """state * 2862933555777941757 + 1 (mod 2^64)"""
    return (state * LCG_MULTIPLIER + 1) & MASK64


def to_unit_interval(state: int) -> float:
    """r = ((state >> 33) + 1) / 2^31  (0 < r <= 1)"""
    return float((state >> 33) + 1) / TWO_31


def jump_bucket(key: int, n: int) -> int:
    """key を [0, n) のバケットに割り当てる"""
    n = _check_buckets(n)
    key = _check_key(key)
    b, j = -1, 0
    while j < n:
        b = j
        key = (key * LCG_MULTIPLIER + 1) & MASK64
        j = int(float(b + 1) * (TWO_31 / float((key >> 33) + 1)))
    return b


def jump_bucket_traced(key: int, n: int) -> JumpTrace:
    n = _check_buckets(n)
    key = _check_key(key)
    b, j = -1, 0
    destinations = []
    while j < n:
        b = j
        destinations.append(b)
        key = (key * LCG_MULTIPLIER + 1) & MASK64
        j = int(float(b + 1) * (TWO_31 / float((key >> 33) + 1)))
    return JumpTrace(bucket=b, iterations=len(destinations), destinations=destinations)


def linear_ch(key: int, n: int) -> int:
    """
    線形時間版。j = 1..n-1 ごとに LCG を 1 回進め、
    r < 1/(j+1) ならば b = j とする。
    """
    n = _check_buckets(n)
    state = _check_key(key)
    b = 0
    for j in range(1, n):
        state = lcg_next(state)
        if to_unit_interval(state) < 1.0 / (j + 1):
            b = j
    return b


# ─────────────────────────────────────────────
# numpy 版
# ─────────────────────────────────────────────
def _jump_arrays(keys: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """(buckets, iterations) を返す。ループを抜けていないキーだけを毎回更新する"""
    n = _check_buckets(n)
    state = np.array(keys, dtype=np.uint64, copy=True)
    size = state.shape[0]
    b = np.full(size, -1, dtype=np.int64)
    j = np.zeros(size, dtype=np.int64)
    iters = np.zeros(size, dtype=np.int64)
    active = np.arange(size)
    while active.size:
        b[active] = j[active]
        iters[active] += 1
        with np.errstate(over="ignore"):
            s = state[active] * _LCG_MUL + _U1
        state[active] = s
        denom = ((s >> _U33) + _U1).astype(np.float64)
        step = TWO_31 / denom
        j_new = ((b[active] + 1).astype(np.float64) * step).astype(np.int64)
        j[active] = j_new
        active = active[j_new < n]
    return b, iters


def jump_bucket_array(keys: np.ndarray, n: int) -> np.ndarray:
    buckets, _ = _jump_arrays(keys, n)
    return buckets


def jump_iterations_array(keys: np.ndarray, n: int) -> np.ndarray:
    _, iters = _jump_arrays(keys, n)
    return iters


def linear_ch_array(keys: np.ndarray, n: int) -> np.ndarray:
    n = _check_buckets(n)
    state = np.array(keys, dtype=np.uint64, copy=True)
    b = np.zeros(state.shape[0], dtype=np.int64)
    for j in range(1, n):
        with np.errstate(over="ignore"):
            state = state * _LCG_MUL + _U1
        r = ((state >> _U33) + _U1).astype(np.float64) / TWO_31
        b = np.where(r < 1.0 / (j + 1), j, b)
    return b


# ─────────────────────────────────────────────
# 補助
# ─────────────────────────────────────────────
def harmonic(n: int) -> float:
    """H_n = 1 + 1/2 + ... + 1/n (反復回数の期待値)"""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n <= 10_000_000:
        return float(np.sum(1.0 / np.arange(n, 0, -1, dtype=np.float64)))
    return math.log(n) + EULER_GAMMA + 1.0 / (2 * n) - 1.0 / (12 * n * n)


def load_golden_vectors(path: Union[str, Path]) -> List[Tuple[int, int, int]]:
    """key<TAB>num_buckets<TAB>bucket 形式のファイルを読む"""
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, n, bucket = line.split("\t")
            rows.append((int(key), int(n), int(bucket)))
    return rows

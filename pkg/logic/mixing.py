"""
SplitMix64 系のミキサーとキー列
- fmix64: SplitMix64 の finalizer (リング点配置 / rendezvous スコア用)
- splitmix64_stream / key_array: シード付きのキー列 (解析・ベンチ用。検証対象の LCG とは独立)
"""
from typing import List
import numpy as np

from .models import MASK64

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_1 = 0xBF58476D1CE4E5B9
MIX_2 = 0x94D049BB133111EB

_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_MIX_1 = np.uint64(MIX_1)
_MIX_2 = np.uint64(MIX_2)
_GAMMA = np.uint64(GOLDEN_GAMMA)


def fmix64(x: int) -> int:
    """SplitMix64 finalizer (0 は 0 に写る)"""
    x &= MASK64
    x ^= x >> 30
    x = (x * MIX_1) & MASK64
    x ^= x >> 27
    x = (x * MIX_2) & MASK64
    x ^= x >> 31
    return x


def fmix64_array(x: np.ndarray) -> np.ndarray:
    """fmix64 の numpy 版 (uint64 の乗算は 2^64 で折り返す)"""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x ^ (x >> _U30)
        x = x * _MIX_1
        x = x ^ (x >> _U27)
        x = x * _MIX_2
        x = x ^ (x >> _U31)
    return x


def splitmix64_stream(seed: int, count: int) -> List[int]:
    """seed から始まる SplitMix64 の出力を count 個返す"""
    state = seed & MASK64
    out = []
    for _ in range(count):
        state = (state + GOLDEN_GAMMA) & MASK64
        out.append(fmix64(state))
    return out


def key_array(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """
    splitmix64_stream(seed, offset + count)[offset:] と同じ列を numpy で生成。
    offset 指定でチャンクごとに独立して作れる。
    """
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        states = np.uint64(seed & MASK64) + idx * _GAMMA
    return fmix64_array(states)


def parse_key(text: str) -> int:
    """10進 or 0x 付き16進の 64bit 符号なし整数をパース"""
    s = text.strip().replace("_", "")
    try:
        value = int(s, 16) if s.lower().startswith("0x") else int(s, 10)
    except ValueError:
        raise ValueError(f"malformed key: {text!r}")
    if value < 0 or value > MASK64:
        raise ValueError(f"key out of 64-bit unsigned range: {text!r}")
    return value

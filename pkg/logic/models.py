from enum import Enum
from typing import List, Optional, Tuple
from pydantic import BaseModel, Field, field_validator, model_validator

MASK64 = (1 << 64) - 1
INT32_MAX = (1 << 31) - 1


class Algorithm(str, Enum):
    JUMP = "jump"
    RING_A = "ring-a"    # 順序付きインデックス (動的)
    RING_B = "ring-b"    # 32bit 切り詰めのソート済み配列 (再構築のみ)
    HRW = "hrw"          # rendezvous / highest random weight
    LINEAR = "linear"    # 線形時間版 (分布のオラクル用)


class Layout(str, Enum):
    A = "A"
    B = "B"


class SampleBasis(str, Enum):
    EXACT_ARCS = "exact_arcs"
    SAMPLED_KEYS = "sampled_keys"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


# ─────────────────────────────────────────────
# Jump hash
# ─────────────────────────────────────────────
class JumpTrace(BaseModel):
    bucket: int = Field(..., ge=0, description="最終的なバケット番号")
    iterations: int = Field(..., ge=1, description="while ループの通過回数")
    destinations: List[int] = Field(default_factory=list, description="b が取った値の列 (ジャンプ先)")

    @model_validator(mode="after")
    def _check_trace(self):
        d = self.destinations
        if len(d) != self.iterations:
            raise ValueError("iterations must equal len(destinations)")
        if any(a >= b for a, b in zip(d, d[1:])):
            raise ValueError("destinations must be strictly increasing")
        if d and d[-1] != self.bucket:
            raise ValueError("last destination must equal bucket")
        return self


# ─────────────────────────────────────────────
# Ring hash
# ─────────────────────────────────────────────
class RingConfig(BaseModel):
    num_buckets: int = Field(..., ge=1, le=INT32_MAX, description="バケット数 n")
    points_per_bucket: int = Field(..., ge=1, description="バケットあたりの点数 k")
    seed: int = Field(0, ge=0, le=MASK64, description="点配置用シード (64bit)")


class ArcFractions(BaseModel):
    """
    バケットごとの弧長の合計 (整数)。
    fractions は arcs / total。sum(arcs) == total が常に成り立つ。
    """
    arcs: List[int] = Field(..., description="バケットごとの弧長の合計")
    total: int = Field(..., description="点空間の大きさ (A: 2^64, B: 2^32)")

    @model_validator(mode="after")
    def _check_sum(self):
        if any(a < 0 for a in self.arcs):
            raise ValueError("arc lengths must be non-negative")
        if sum(self.arcs) != self.total:
            raise ValueError("arc lengths must sum to the point-space size")
        return self

    @property
    def fractions(self) -> List[float]:
        return [a / self.total for a in self.arcs]


# ─────────────────────────────────────────────
# Analysis reports
# ─────────────────────────────────────────────
class BalanceReport(BaseModel):
    algorithm: Algorithm
    n: int = Field(..., ge=1)
    points_per_bucket: Optional[int] = Field(None, description="リング系のみ")
    fractions: List[float] = Field(default_factory=list, description="バケットごとの割合")
    std_error: float = Field(..., ge=0.0, description="σ/μ")
    ci_99: Tuple[float, float] = Field(..., description="相対バケットサイズの 0.5% / 99.5% 分位")
    basis: SampleBasis
    num_keys: Optional[int] = Field(None, description="サンプリング時のキー数")
    seeds: List[int] = Field(default_factory=list)

    @field_validator("ci_99")
    @classmethod
    def _check_ci(cls, v):
        lo, hi = v
        # 浮動小数の丸めで 1 をわずかに越える分は許容
        if lo > 1.0 + 1e-12 or hi < 1.0 - 1e-12:
            raise ValueError(f"ci_99 must bracket 1.0, got {v}")
        return v


class RebalanceReport(BaseModel):
    algorithm: Algorithm
    n_from: int = Field(..., ge=1)
    n_to: int = Field(..., ge=1)
    num_keys: int = Field(..., ge=1)
    seed: int
    moved_fraction: float = Field(..., ge=0.0, le=1.0)
    donated_fractions: List[float] = Field(default_factory=list, description="全キーに対する、旧バケットごとの移動割合")
    donor_shares: List[float] = Field(default_factory=list, description="各旧バケット自身のキーのうち移動した割合")
    destinations: List[int] = Field(default_factory=list, description="移動先バケットのヒストグラム (長さ n_to)")
    violations: int = Field(0, ge=0, description="新バケット以外へ移動したキー数 (増設時)")
    donors: List[int] = Field(default_factory=list, description="キー空間を失った旧バケット")


class IterationReport(BaseModel):
    n: int = Field(..., ge=1)
    num_keys: int = Field(..., ge=1)
    seed: int
    mean_iterations: float
    max_iterations: int
    harmonic: float = Field(..., description="H_n (期待反復回数)")
    bound: float = Field(..., description="ln(n) + 1")
    binary_search_comparisons: float = Field(..., description="log2(n)")
    below_bound: bool

    @model_validator(mode="after")
    def _check_mean(self):
        if self.mean_iterations > self.max_iterations:
            raise ValueError("mean_iterations must not exceed max_iterations")
        return self


# ─────────────────────────────────────────────
# Bench
# ─────────────────────────────────────────────
class CachePressureConfig(BaseModel):
    filler_bytes: int = Field(256 * 1024 * 1024, ge=1, description="既定 256 MiB (--filler-bytes で 1 GiB などに変更可)")
    random_touches: int = Field(16, ge=0, description="1 回あたりのランダム 1byte 読み出し数")
    block_bytes: int = Field(65536, ge=1, description="1 回あたりの連続読み出しサイズ")

    @model_validator(mode="after")
    def _check_sizes(self):
        if self.filler_bytes < self.block_bytes:
            raise ValueError("filler_bytes must be >= block_bytes")
        return self


class BenchResult(BaseModel):
    algorithm: Algorithm
    n: int
    points_per_bucket: Optional[int] = None
    ns_per_op: float = Field(..., ge=0.0, description="ループのオーバーヘッドを差し引いた ns/op")
    iterations: int = Field(..., ge=1)
    cache_mode: bool = False
    environment: str = ""


class MemoryModel(BaseModel):
    layout: Layout
    n: int = Field(..., ge=1)
    points_per_bucket: int = Field(..., ge=1)
    bytes_per_point: int
    total_bytes: int

    @model_validator(mode="after")
    def _check_total(self):
        if self.total_bytes != self.n * self.points_per_bucket * self.bytes_per_point:
            raise ValueError("total_bytes inconsistent with n * k * bytes_per_point")
        return self


# ─────────────────────────────────────────────
# CLI report rows
# ─────────────────────────────────────────────
class ReportRow(BaseModel):
    experiment: str
    algorithm: str
    n: Optional[int] = None
    k: Optional[int] = None
    seed: Optional[int] = None
    num_keys: Optional[int] = None
    metric: str
    value: float
    tol_low: Optional[float] = None
    tol_high: Optional[float] = None
    display: Optional[str] = Field(None, description="人が読む用の表記 (例: '469 KB')")


REPORT_COLUMNS = list(ReportRow.model_fields.keys())

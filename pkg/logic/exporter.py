import io
import json
import math
import numbers
from typing import Callable, Dict, List, Optional
import pandas as pd

from .models import (
    Algorithm, BalanceReport, BenchResult, IterationReport, RebalanceReport,
    ReportRow, REPORT_COLUMNS, SampleBasis,
)

# CSV の列型。整数列は欠損ありの Int64 / UInt64 (seed は 64bit 符号なし)
CSV_DTYPES = {
    "experiment": "string",
    "algorithm": "string",
    "n": "Int64",
    "k": "Int64",
    "seed": "UInt64",
    "num_keys": "Int64",
    "metric": "string",
    "value": "float64",
    "tol_low": "float64",
    "tol_high": "float64",
    "display": "string",
}

# 表示精度: 割合は有効数字 9 桁、ns は整数に丸め、個数・バイト数は丸めない
SIG_DIGITS = 9


def fmt_fraction(x: float) -> float:
    return float(f"{x:.{SIG_DIGITS}g}")


def fmt_ns(x: float) -> float:
    return float(round(x))


def fmt_count(x: int) -> float:
    return float(int(x))


def _formatter(metric: str, value) -> Callable[[float], float]:
    """個数・バイト数などの整数はそのまま、ns は整数に丸め、それ以外は割合として扱う"""
    if isinstance(value, numbers.Integral):
        return fmt_count
    if metric.endswith("ns") or metric.endswith("ns_per_op"):
        return fmt_ns
    return fmt_fraction


def _row(experiment: str, algorithm: str, metric: str, value: float, **kwargs) -> ReportRow:
    fmt = _formatter(metric, value)
    tol_low = kwargs.pop("tol_low", None)
    tol_high = kwargs.pop("tol_high", None)
    return ReportRow(
        experiment=experiment, algorithm=algorithm, metric=metric, value=fmt(value),
        tol_low=None if tol_low is None else fmt(tol_low),
        tol_high=None if tol_high is None else fmt(tol_high),
        **kwargs,
    )


# ─────────────────────────────────────────────
# Report → ReportRow
# ─────────────────────────────────────────────
def balance_rows(report: BalanceReport) -> List[ReportRow]:
    """
    期待値の帯:
      - サンプリング: σ/μ ∈ [0.8, 1.25] × sqrt(n/N) (多項分布の標本誤差)
      - リング厳密値: σ/μ ≈ 1/sqrt(k) の ±20%
    """
    common = dict(
        n=report.n, k=report.points_per_bucket,
        seed=report.seeds[0] if report.seeds else None, num_keys=report.num_keys,
    )
    alg = report.algorithm.value
    experiment = "balance_exact" if report.basis == SampleBasis.EXACT_ARCS else "balance_sampled"
    tol: Dict[str, Optional[float]] = {}
    if report.basis == SampleBasis.SAMPLED_KEYS and report.algorithm in (Algorithm.JUMP, Algorithm.LINEAR, Algorithm.HRW):
        base = math.sqrt(report.n / report.num_keys) if report.n > 1 else 0.0
        tol = {"tol_low": 0.8 * base, "tol_high": 1.25 * base}
    elif report.basis == SampleBasis.EXACT_ARCS and report.points_per_bucket:
        base = 1.0 / math.sqrt(report.points_per_bucket)
        tol = {"tol_low": 0.8 * base, "tol_high": 1.2 * base}
    return [
        _row(experiment, alg, "std_error", report.std_error, **common, **tol),
        _row(experiment, alg, "ci_low", report.ci_99[0], **common),
        _row(experiment, alg, "ci_high", report.ci_99[1], **common),
    ]


def rebalance_rows(report: RebalanceReport) -> List[ReportRow]:
    common = dict(n=report.n_to, seed=report.seed, num_keys=report.num_keys)
    alg = report.algorithm.value
    rows = []
    if report.n_to > report.n_from and report.algorithm in (Algorithm.JUMP, Algorithm.HRW):
        # 期待値 1 - n_from/n_to、4σ の帯
        p = 1.0 - report.n_from / report.n_to
        sigma = math.sqrt(p * (1 - p) / report.num_keys)
        rows.append(_row("rebalance", alg, "moved_fraction", report.moved_fraction,
                         tol_low=p - 4 * sigma, tol_high=p + 4 * sigma, **common))
    else:
        rows.append(_row("rebalance", alg, "moved_fraction", report.moved_fraction, **common))
    rows.append(_row("rebalance", alg, "n_from", report.n_from, **common))
    rows.append(_row("rebalance", alg, "violations", report.violations, **common))
    rows.append(_row("rebalance", alg, "donor_count", len(report.donors), **common))
    shares = [s for s, d in zip(report.donor_shares, report.donated_fractions) if d > 0]
    if shares:
        rows.append(_row("rebalance", alg, "donor_share_min", min(shares), **common))
        rows.append(_row("rebalance", alg, "donor_share_max", max(shares), **common))
    return rows


def iteration_rows(report: IterationReport) -> List[ReportRow]:
    common = dict(n=report.n, seed=report.seed, num_keys=report.num_keys)
    return [
        _row("iters", "jump", "mean_iterations", report.mean_iterations,
             tol_low=report.harmonic - 0.05, tol_high=report.harmonic + 0.05, **common),
        _row("iters", "jump", "max_iterations", report.max_iterations, **common),
        _row("iters", "jump", "harmonic", report.harmonic, **common),
        _row("iters", "jump", "bound", report.bound, **common),
        _row("iters", "jump", "binary_search_comparisons", report.binary_search_comparisons, **common),
    ]


def bench_rows(results: List[BenchResult], references: Optional[List[Optional[int]]] = None) -> List[ReportRow]:
    rows = []
    references = references or [None] * len(results)
    for res, ref in zip(results, references):
        experiment = "bench_cache" if res.cache_mode else "bench"
        common = dict(n=res.n, k=res.points_per_bucket, num_keys=res.iterations)
        rows.append(_row(experiment, res.algorithm.value, "ns_per_op", res.ns_per_op,
                         display=res.environment, **common))
        if ref is not None:
            rows.append(_row(experiment, res.algorithm.value, "reference_ns", ref, **common))
    return rows


def build_rows(rows: List[dict]) -> List[ReportRow]:
    out = []
    for r in rows:
        alg = "ring-a" if r["layout"] == "A" else "ring-b"
        out.append(_row("build", alg, "seconds", r["seconds"], n=r["n"], k=r["k"]))
        if r.get("reference_seconds") is not None:
            out.append(_row("build", alg, "reference_seconds", r["reference_seconds"], n=r["n"], k=r["k"]))
    return out


def space_rows(rows: List[dict]) -> List[ReportRow]:
    out = []
    for r in rows:
        out.append(_row("space", "ring-a", "bytes", r["bytes_a"], n=r["n"], k=r["k"], display=r["space_a"]))
        out.append(_row("space", "ring-b", "bytes", r["bytes_b"], n=r["n"], k=r["k"], display=r["space_b"]))
    return out


# ─────────────────────────────────────────────
# 出力
# ─────────────────────────────────────────────
def rows_to_frame(rows: List[ReportRow]) -> pd.DataFrame:
    # 列ごとに型を指定して作る (float を経由すると 64bit の seed が丸まる)
    records = [r.model_dump() for r in rows]
    return pd.DataFrame({
        col: pd.array([rec[col] for rec in records], dtype=CSV_DTYPES[col])
        for col in REPORT_COLUMNS
    })


def rows_to_csv(rows: List[ReportRow]) -> str:
    """ヘッダ行必須、改行は \\n"""
    return rows_to_frame(rows).to_csv(index=False, lineterminator="\n")


def rows_to_json(rows: List[ReportRow]) -> str:
    return json.dumps([r.model_dump() for r in rows], ensure_ascii=False, indent=2)


def read_csv_rows(text: str) -> List[ReportRow]:
    """rows_to_csv の逆変換"""
    df = pd.read_csv(io.StringIO(text), dtype=CSV_DTYPES, float_precision="round_trip", keep_default_na=False,
                     na_values={c: [""] for c in REPORT_COLUMNS})
    rows = []
    for rec in df.to_dict(orient="records"):
        clean = {}
        for key, val in rec.items():
            if pd.isna(val):
                clean[key] = None
            elif CSV_DTYPES[key] in ("Int64", "UInt64"):
                clean[key] = int(val)
            elif CSV_DTYPES[key] == "float64":
                clean[key] = float(val)
            else:
                clean[key] = str(val)
        rows.append(ReportRow(**clean))
    return rows

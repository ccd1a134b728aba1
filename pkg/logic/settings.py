"""
環境設定
- .env / 環境変数から読み込む (毎回呼び出し時に評価)
- CLI フラグが指定されていればそちらが優先
"""
import os
from dotenv import load_dotenv

load_dotenv()

DEFAULT_FILLER_BYTES = 256 * 1024 * 1024


def _get_env(key: str, default: str = "") -> str:
    """環境変数から値を取得 (空文字は未設定扱い)"""
    value = os.getenv(key, "")
    if value:
        return value
    return default


def _get_int(key: str, default: int) -> int:
    raw = _get_env(key)
    if not raw:
        return default
    try:
        return int(raw, 0)
    except ValueError:
        raise ValueError(f"{key} must be an integer, got {raw!r}")


def get_threads() -> int:
    """CHL_THREADS: 解析処理の並列度の上限"""
    default = min(8, os.cpu_count() or 1)
    return max(1, _get_int("CHL_THREADS", default))


def get_filler_bytes() -> int:
    """CHL_FILLER_BYTES: キャッシュ競合ベンチのフィラーサイズ"""
    return _get_int("CHL_FILLER_BYTES", DEFAULT_FILLER_BYTES)


def get_default_seed() -> int:
    return _get_int("CHL_SEED", 1)


def get_log_level() -> str:
    return _get_env("CHL_LOG_LEVEL", "WARNING").upper()

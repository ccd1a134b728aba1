"""
エントリーポイント
  python app.py assign --alg jump --key 42 --buckets 1000
  python app.py balance --alg ring-a --buckets 1000 --points 1000 --exact
"""
import sys
from pathlib import Path

_project_root = str(Path(__file__).resolve().parent)
if _project_root not in sys.path:
    sys.path.insert(0, _project_root)

from ui.cli import main

if __name__ == "__main__":
    sys.exit(main())

import json
import logging
import subprocess
from pathlib import Path
from typing import Any, Dict, Mapping

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

PACKAGE_DIR = Path(__file__).resolve().parent


def git_describe() -> str:
    """Version of the checkout the package runs from, or ``unknown`` outside git."""
    try:
        result = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=PACKAGE_DIR,
                                capture_output=True, text=True, timeout=5, check=True)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return result.stdout.strip() or "unknown"


def _plain(value: Any) -> Any:
    """Turn numpy scalars and containers into JSON-native values."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


class ResultWriter:
    """Writes the CSV tables, their column sidecars and the run manifest into one directory."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)

    def prepare(self) -> None:
        """Create the directory and prove it is writable; raises OSError otherwise."""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        marker = self.out_dir / ".write-marker"
        marker.write_text("", encoding="utf-8")
        marker.unlink()

    def write_table(self, name: str, frame: pd.DataFrame, columns: Mapping[str, str]) -> Path:
        missing = [c for c in frame.columns if c not in columns]
        if missing:
            raise ValueError(f"table {name} has undocumented columns: {missing}")
        path = self.out_dir / f"{name}.csv"
        frame.to_csv(path, index=False, na_rep="nan", lineterminator="\n")
        sidecar = self.out_dir / f"{name}.columns.txt"
        sidecar.write_text("".join(f"{c}: {columns[c]}\n" for c in frame.columns), encoding="utf-8")
        logger.info("Wrote %s (%d rows)", path, len(frame))
        return path

    def write_manifest(self, manifest: Dict[str, Any]) -> Path:
        path = self.out_dir / "manifest.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(_plain(manifest), f, indent=2, sort_keys=True)
            f.write("\n")
        logger.info("Wrote %s", path)
        return path

"""Report records and vector plots.

A report is a sequence of flat JSON objects, one per line.  Every record
carries the schema version and provenance: the SHA-256 of the effective
configuration, the seed, and the wall time of the run.  Plots are SVG files
written next to a CSV table holding exactly the plotted numbers.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "SCHEMA",
    "config_hash",
    "make_record",
    "write_records",
    "read_records",
    "emit_plot",
]

SCHEMA = "gdl-report/1"


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(v, (bool, int, float, str)) or v is None:
        return v
    return str(v)


def config_hash(config: Mapping) -> str:
    blob = json.dumps({k: _plain(v) for k, v in sorted(config.items())}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def make_record(command: str, config: Mapping, seed: int, wall_ms: float, **fields) -> dict:
    """Flat record: results first, then schema and provenance keys."""
    rec = {k: _plain(v) for k, v in fields.items()}
    rec.update(
        {
            "schema": SCHEMA,
            "command": command,
            "config_hash": config_hash(config),
            "seed": int(seed),
            "wall_ms": round(float(wall_ms), 3),
        }
    )
    return rec


def write_records(records: Sequence[dict], stream) -> None:
    for rec in records:
        stream.write(json.dumps(rec, sort_keys=False) + "\n")
    stream.flush()


def read_records(path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines if line.strip()]


def emit_plot(series: Mapping[str, tuple], path, kind: str = "line", xlabel: str = "x",
              ylabel: str = "y", title: str = "") -> tuple[Path, Path]:
    """Write an SVG plot of labeled ``(x, y)`` series plus a CSV sidecar.

    Output bytes depend only on the input.  Returns the two paths.
    """
    if not series or all(len(np.atleast_1d(xy[0])) == 0 for xy in series.values()):
        raise ValueError("nothing to plot: series is empty")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    sidecar = path.with_suffix(".csv")
    with matplotlib.rc_context({"svg.hashsalt": "gdl", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        for label, (x, y) in series.items():
            x, y = np.atleast_1d(x), np.atleast_1d(y)
            if kind == "scatter":
                ax.scatter(x, y, s=4, label=label)
            else:
                ax.plot(x, y, marker="o", label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if kind == "scatter":
            ax.set_aspect("equal")
        ax.legend()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    with sidecar.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "x", "y"])
        for label, (x, y) in series.items():
            for a, b in zip(np.atleast_1d(x), np.atleast_1d(y)):
                w.writerow([label, repr(float(a)), repr(float(b))])
    return path, sidecar

"""CSV/JSON tables and the run manifest embedded in every output file."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .experiment import ResultRow

COLUMNS = ("n", "statistic", "estimate", "stderr", "theory", "zscore", "verdict")
MANIFEST_PREFIX = "# manifest: "
# fields that legitimately differ between reruns of the same computation
VOLATILE = ("started", "finished", "outputs", "threads")


def fmt_float(x: Optional[float]) -> str:
    if x is None:
        return ""
    return "%.17g" % x


def parse_float(text: str) -> Optional[float]:
    return None if text == "" else float(text)


def now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: Optional[int]
    threads: int = 1
    version: str = __version__
    started: str = field(default_factory=now)
    finished: Optional[str] = None
    outputs: list = field(default_factory=list)

    def as_dict(self, stable: bool = False) -> dict:
        d = {
            "command": self.command,
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "threads": self.threads,
            "started": self.started,
            "finished": self.finished,
            "outputs": list(self.outputs),
        }
        if stable:
            for key in VOLATILE:
                d.pop(key)
        return d


def rows_to_csv(rows: Sequence[ResultRow], manifest: Optional[RunManifest] = None) -> str:
    buf = io.StringIO()
    if manifest is not None:
        buf.write(MANIFEST_PREFIX + json.dumps(manifest.as_dict(stable=True), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(
            [r.n, r.statistic, fmt_float(r.estimate), fmt_float(r.stderr),
             fmt_float(r.theory), fmt_float(r.zscore), r.verdict]
        )
    return buf.getvalue()


def csv_to_rows(text: str) -> tuple[list[ResultRow], Optional[dict]]:
    """Inverse of :func:`rows_to_csv`; returns the rows and the embedded manifest."""
    lines = text.splitlines()
    manifest = None
    while lines and lines[0].startswith("#"):
        if lines[0].startswith(MANIFEST_PREFIX):
            manifest = json.loads(lines[0][len(MANIFEST_PREFIX):])
        lines.pop(0)
    reader = csv.reader(lines)
    header = next(reader, None)
    if tuple(header or ()) != COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    rows = [
        ResultRow(int(n), stat, parse_float(est), parse_float(se), parse_float(th), parse_float(z), verdict)
        for n, stat, est, se, th, z, verdict in reader
    ]
    return rows, manifest


def _json_float(x: Optional[float]):
    if x is None or math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def rows_to_json(rows: Sequence[ResultRow]) -> list[dict]:
    return [
        {
            "n": r.n,
            "statistic": r.statistic,
            "estimate": _json_float(r.estimate),
            "stderr": _json_float(r.stderr),
            "theory": _json_float(r.theory),
            "zscore": _json_float(r.zscore),
            "verdict": r.verdict,
        }
        for r in rows
    ]


def file_slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_")


def write_simulation(result, out_dir, manifest: RunManifest) -> list:
    """One CSV per (order, statistic) plus a JSON summary; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    paths = []
    for n in cfg.n_list:
        for s in cfg.statistics():
            path = out / f"{cfg.name}_n{n}_{file_slug(s.label)}.csv"
            path.write_text(rows_to_csv(result.rows_for(n, s.label), manifest), encoding="utf-8")
            paths.append(path)
    summary = out / f"{cfg.name}_summary.json"
    paths.append(summary)
    manifest.outputs = [str(p) for p in paths]
    manifest.finished = now()
    failures = [r for r in result.rows if r.failed]
    doc = {
        "manifest": manifest.as_dict(),
        "passed": result.passed,
        "failures": len(failures),
        "results": rows_to_json(result.rows),
    }
    summary.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return paths

"""CSV series, JSON sweep summaries and run manifests."""
from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import __version__
from .estimates import EstimateReport


def fmt(x) -> str:
    """17 significant digits: enough to round-trip any finite double."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list, rows: Iterable):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_series(reports: Iterable[EstimateReport], path) -> Path:
    """One row per snapshot; the header is the EstimateReport field list."""
    names = EstimateReport.field_names()
    return _write_csv(path, names, ([getattr(r, k) for k in names] for r in reports))


def read_series(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_profile(path, r, columns: dict) -> Path:
    header = ["r", *columns]
    data = [np.asarray(r), *(np.asarray(c) for c in columns.values())]
    return _write_csv(path, header, zip(*data))


def _jsonable(x):
    if dataclasses.is_dataclass(x) and not isinstance(x, type):
        return {f.name: _jsonable(getattr(x, f.name)) for f in dataclasses.fields(x)}
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        # JSON has no inf/nan; keep them visible as strings
        return x if math.isfinite(x) else str(x)
    return x


def dump_json(obj, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False)
        path.write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _slopes(result) -> Optional[dict]:
    if len(result.m_values) < 4:
        return None
    return {k: None if v is None else {"slope": v[0], "r2": v[1]}
            for k, v in result.fitted_slopes.items()}


def write_sweep(result, outdir) -> Path:
    """Summary JSON plus one CSV per m; returns the JSON path.

    Evolution runs store their snapshot series, stationary runs store the
    summary row for that m.
    """
    outdir = Path(outdir)
    files = {}
    per_m_extra = {}
    for m in result.m_values:
        item = result.per_m[m]
        name = f"m_{fmt(m)}.csv"
        if hasattr(item, "reports"):
            write_series(item.reports, outdir / name)
            per_m_extra[fmt(m)] = {
                "failure": item.failure,
                "dtP_l1": item.dtP_l1,
                "omega_neg_l3_spacetime": item.omega_neg_l3_spacetime,
                "max_energy_slack": max(item.energy_slack) if item.energy_slack else None,
                "audit": None if item.audit is None else {
                    "initial_mass": item.audit.initial_mass,
                    "final_mass": item.reports[-1].mass if item.reports else None,
                    "clipped_mass": item.audit.clipped_mass,
                    "steps": item.audit.steps,
                    "max_density": item.audit.max_density},
            }
        else:
            row = dataclasses.asdict(item)
            _write_csv(outdir / name, list(row), [list(row.values())])
            per_m_extra[fmt(m)] = row
        files[fmt(m)] = name
    summary = {
        "m_values": result.m_values,
        "slopes": _slopes(result),
        "references": result.references,
        "per_m": per_m_extra,
        "files": files,
        "notes": result.notes,
    }
    return dump_json(summary, outdir / "summary.json")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    config: dict
    code_version: str = __version__
    started: str = field(default_factory=_now)
    finished: Optional[str] = None
    status: dict = field(default_factory=dict)  # run label -> "ok" or error text
    audit: dict = field(default_factory=dict)  # run label -> mass bookkeeping
    assumptions: dict = field(default_factory=lambda: {
        "(c4)": "not checked",
        "shared initial data across m": "used"})

    def record(self, label: str, status: str = "ok", **audit):
        self.status[label] = status
        if audit:
            self.audit[label] = audit

    def write(self, outdir) -> Path:
        self.finished = _now()
        return dump_json(self, Path(outdir) / "manifest.json")

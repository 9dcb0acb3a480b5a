#!/usr/bin/env python3
"""
Report Writer
Writes run results as JSON documents and frozen-column CSV tables

Features:
- Every document embeds the resolved config, seed and version
- Sorted keys and no timestamps, so identical runs give identical bytes
- CSV headers frozen per table
"""

import csv
import json
import logging
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

import numpy as np
from pydantic import BaseModel

from .config import settings

logger = logging.getLogger(__name__)


class Table(str, Enum):
    """CSV tables and their frozen column order"""
    PHI = "phi"
    PC_BOUND = "pc-bound"
    PACK = "pack"
    VERIFY_GRID = "verify-grid"
    VERIFY_RADII = "verify-radii"
    SIMULATE = "simulate"


CSV_COLUMNS: Dict[Table, List[str]] = {
    Table.PHI: ["y", "probability", "exact", "ci_low", "ci_high"],
    Table.PC_BOUND: ["vertex", "p", "radius", "phi", "method", "accepted"],
    Table.PACK: [
        "step", "vertex", "radius", "disc_ball", "disc_inf", "disc_inf_double",
        "conn_inf", "ctd_pass", "wil_pass", "wil_method",
    ],
    Table.VERIFY_GRID: ["p1", "eps", "delta", "c", "k", "value", "skipped"],
    Table.VERIFY_RADII: ["radius", "successes", "replicas", "point", "ci_low", "ci_high"],
    Table.SIMULATE: ["radius", "successes", "replicas", "point", "ci_low", "ci_high"],
}


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def dumps(payload: Any) -> str:
    """Canonical JSON text"""
    return json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n"


class ReportWriter:
    """Writes one subcommand's outputs into an output directory"""

    def __init__(self, out_dir: str):
        self.out_dir = Path(out_dir)
        self.logger = logging.getLogger(__name__)

    def write_json(self, name: str, payload: Any) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"{name}.json"
        path.write_text(dumps(payload), encoding="utf-8")
        self.logger.info(f"Wrote {path}")
        return path

    def write_csv(self, name: str, table: Table, rows: Iterable[Mapping[str, Any]]) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"{name}.csv"
        columns = CSV_COLUMNS[table]
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({key: _cell(row.get(key, "")) for key in columns})
        self.logger.info(f"Wrote {path}")
        return path


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, Fraction):
        return float(value)
    if isinstance(value, Enum):
        return value.value
    return value


def save_report(
    out_dir: str,
    subcommand: str,
    config: Mapping[str, Any],
    result: Any,
    tables: Optional[Dict[Table, Iterable[Mapping[str, Any]]]] = None,
) -> List[Path]:
    """
    Write `<subcommand>.json` with the config, seed, version and result, plus
    one CSV per table (`<table>.csv`).
    """
    writer = ReportWriter(out_dir)
    document = {
        "subcommand": subcommand,
        "version": settings.VERSION,
        "seed": config.get("run", {}).get("seed"),
        "config": config,
        "result": result,
    }
    paths = [writer.write_json(subcommand, document)]
    for table, rows in (tables or {}).items():
        paths.append(writer.write_csv(table.value, table, rows))
    return paths

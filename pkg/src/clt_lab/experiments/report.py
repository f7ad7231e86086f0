"""Experiment reports and their on-disk layout."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..model import to_json_ready


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table has {len(self.columns)} columns")
        self.rows.append(list(values))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows([_cell(v) for v in row] for row in to_json_ready(self.rows))
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": self.rows}


def _cell(v):
    return repr(v) if isinstance(v, float) else v


@dataclass
class Assertion:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    config_hash: str
    library_version: str
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)
    plotdata: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    wall_clock: float | None = None

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name: str, passed, **detail) -> bool:
        self.assertions.append(Assertion(name, bool(passed), detail))
        return bool(passed)

    def assertion(self, name: str) -> Assertion:
        for a in self.assertions:
            if a.name == name:
                return a
        raise KeyError(name)

    def table(self, name: str, columns) -> Table:
        self.tables[name] = Table(list(columns))
        return self.tables[name]

    def series(self, name: str, x, y, x_label: str = "x", y_label: str = "y"):
        self.plotdata[name] = {"x": list(x), "y": list(y), "x_label": x_label, "y_label": y_label}

    def to_dict(self) -> dict:
        """Everything except wall-clock, so that the JSON is reproducible."""
        return to_json_ready({
            "experiment": self.experiment,
            "config": self.config,
            "config_hash": self.config_hash,
            "library_version": self.library_version,
            "tables": {k: t.to_dict() for k, t in self.tables.items()},
            "summary": self.summary,
            "assertions": [a.to_dict() for a in self.assertions],
            "plotdata": self.plotdata,
            "warnings": self.warnings,
            "passed": self.passed,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def report_dir(report: ExperimentReport, out_dir) -> Path:
    return Path(out_dir) / f"{report.experiment}-{report.config_hash}"


def write_report(report: ExperimentReport, out_dir) -> Path:
    """Write ``report.json``, ``tables/*.csv``, ``plotdata/*.csv`` and ``timing.json``.

    Returns the report directory ``<out_dir>/<experiment>-<config hash>``.
    """
    root = report_dir(report, out_dir)
    target = root
    try:
        (root / "tables").mkdir(parents=True, exist_ok=True)
        (root / "plotdata").mkdir(parents=True, exist_ok=True)
        target = root / "report.json"
        target.write_text(report.to_json())
        for name, table in report.tables.items():
            target = root / "tables" / f"{name}.csv"
            target.write_text(table.to_csv())
        for name, s in report.plotdata.items():
            target = root / "plotdata" / f"{name}.csv"
            t = Table([s["x_label"], s["y_label"]], [list(p) for p in zip(s["x"], s["y"])])
            target.write_text(t.to_csv())
        target = root / "timing.json"
        target.write_text(json.dumps({"wall_clock_seconds": report.wall_clock}, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report file {target}: {exc}") from exc
    return root

"""Run outputs: tables plus JSON metadata sidecars."""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from .config import _canonical, config_hash

OUT_ENV = "YBQUBIT_OUT"


@dataclass
class Table:
    """Column names carry units (``duration_s``, ``frequency_Hz``)."""

    columns: tuple
    rows: list

    def column(self, name):
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


@dataclass
class RunArtifact:
    scenario: str
    config: object
    tables: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)
    derived: dict = field(default_factory=dict)
    wall_time_s: float = 0.0

    def metadata(self, table=None):
        meta = {
            "scenario": self.scenario,
            "config_sha256": config_hash(self.config.resolved),
            "resolved_config": _canonical(self.config.resolved),
            "seed": self.config.seed,
            "tool_version": __version__,
            "wall_time_s": self.wall_time_s,
        }
        if table is not None:
            meta["table"] = table
            meta["columns"] = list(self.tables[table].columns)
            meta["rows"] = len(self.tables[table].rows)
        return meta

    def write(self, out_dir=None, fmt="csv"):
        """Write every table with a ``.meta.json`` sidecar; return the paths."""
        out_dir = out_dir or self.config.output_dir or os.environ.get(OUT_ENV) or "."
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        for name, tab in self.tables.items():
            if fmt == "csv":
                path = os.path.join(out_dir, f"{name}.csv")
                with open(path, "w", newline="\n") as fh:
                    fh.write(",".join(tab.columns) + "\n")
                    for row in tab.rows:
                        fh.write(",".join(_cell(v) for v in row) + "\n")
            elif fmt == "json":
                path = os.path.join(out_dir, f"{name}.json")
                body = {"columns": list(tab.columns),
                        "rows": [[_json_value(v) for v in row] for row in tab.rows]}
                with open(path, "w", newline="\n") as fh:
                    json.dump(body, fh, sort_keys=True, indent=1)
                    fh.write("\n")
            else:
                raise ValueError(f"unknown format {fmt!r}")
            paths.append(path)
            meta_path = os.path.join(out_dir, f"{name}.meta.json")
            with open(meta_path, "w", newline="\n") as fh:
                json.dump(self.metadata(name), fh, sort_keys=True, indent=1)
                fh.write("\n")
            paths.append(meta_path)
        for name, body in self.reports.items():
            path = os.path.join(out_dir, f"{name}.json")
            with open(path, "w", newline="\n") as fh:
                json.dump({k: _json_value(v) for k, v in body.items()} | {"metadata": self.metadata()},
                          fh, sort_keys=True, indent=1, default=_json_value)
                fh.write("\n")
            paths.append(path)
        return paths

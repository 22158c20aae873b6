"""Per-iteration run records and their CSV serialization.

A record holds one row per outer iteration plus run metadata.  CSV files
carry the metadata as a ``# key=value`` preamble (sorted by key) followed by
an RFC-4180 body, and are written to a temp file then renamed so a crashed
run never leaves a partial file behind.

Timing columns are the only fields expected to differ between two runs with
identical inputs; ``strip_timing`` exists so callers can compare the rest.
"""

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

__all__ = ["COLUMNS", "TIMING_COLUMNS", "ConvergenceRecord", "read_csv", "strip_timing"]

COLUMNS = (
    "k",
    "wall_s",
    "compute_s",
    "barrier_s",
    "objective",
    "primal_residual",
    "dual_residual",
    "eps_primal",
    "eps_dual",
    "grad_norm_sq",
    "y_change_sq",
    "fit_gap_sq",
    "bytes_up",
    "bytes_down",
    "inner_iterations",
)
TIMING_COLUMNS = ("wall_s", "compute_s", "barrier_s")
_INT_COLUMNS = ("k", "bytes_up", "bytes_down", "inner_iterations")


def _format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class ConvergenceRecord:
    """Iteration history plus run metadata for one solver invocation."""

    meta: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    # Extras not serialized to CSV: final iterate state and optional full
    # iterate history for exactness checks.
    final_state: object = None
    iterates: list | None = None

    def add_row(self, **values):
        unknown = set(values) - set(COLUMNS)
        if unknown:
            raise ValueError(f"unknown record columns: {sorted(unknown)}")
        self.rows.append(tuple(values.get(c, float("nan")) for c in COLUMNS))

    @property
    def iterations(self):
        return len(self.rows)

    def column(self, name):
        idx = COLUMNS.index(name)
        return np.array([row[idx] for row in self.rows], dtype=np.float64)

    @property
    def status(self):
        return self.meta.get("status", "unknown")

    def write_csv(self, path):
        """Serialize atomically: temp file in the target directory, then rename."""
        path = os.fspath(path)
        directory = os.path.dirname(os.path.abspath(path))
        buf = io.StringIO()
        for key in sorted(self.meta):
            buf.write(f"# {key}={_format_value(self.meta[key])}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in self.rows:
            writer.writerow([_format_value(v) for v in row])
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tradmm-", suffix=".csv")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def read_csv(path):
    """Read a record CSV back as ``(meta, header, rows)`` with string cells."""
    meta = {}
    rows = []
    header = None
    with open(path, encoding="utf-8", newline="") as fh:
        body = []
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value
            else:
                body.append(line)
        for parsed in csv.reader(body):
            if header is None:
                header = parsed
            elif parsed:
                rows.append(parsed)
    if header is None:
        raise ValueError(f"{path} contains no header row")
    return meta, header, rows


def strip_timing(header, rows):
    """Drop timing columns from parsed CSV rows (for determinism checks)."""
    keep = [i for i, name in enumerate(header) if name not in TIMING_COLUMNS]
    return ([header[i] for i in keep], [[row[i] for i in keep] for row in rows])

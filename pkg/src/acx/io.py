"""CSV and JSON interchange.

Formats
-------
Score matrix CSV: header ``label,c1,...,ck``, one row per test point,
labels 1-based.  Win counts CSV: header ``class,repeat,v,k``.  Both
round-trip losslessly (floats are written with shortest round-trip
precision).

Estimator report JSON: ``{"schema": 1, "reports": [{estimator, source_k,
targets: [{t, p_hat}], diagnostics: {residual, objective, kkt,
warnings}}]}``.

Replication CSV: columns ``replicate,k,K,estimator,p_hat,truth,error,
status`` with a JSON sidecar carrying the generating configuration.

All writers use ``\\n`` line endings and emit no timestamps, so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .core import ScoreMatrix, WinCounts
from .errors import ParseError

__all__ = [
    "read_score_matrix",
    "write_score_matrix",
    "read_win_counts",
    "write_win_counts",
    "write_estimator_reports",
    "write_curve_csv",
    "write_replication_csv",
    "read_replication_csv",
    "write_json",
]

REPLICATION_COLUMNS = ("replicate", "k", "K", "estimator", "p_hat", "truth", "error", "status")


def _fmt(x):
    """Shortest round-trip decimal form of a float; NaN becomes 'nan'."""
    return repr(float(x))


def _parse_float(path, line, column, text):
    try:
        return float(text)
    except ValueError:
        raise ParseError(path, f"not a number: {text!r}", line=line, column=column) from None


def _parse_int(path, line, column, text):
    try:
        return int(text)
    except ValueError:
        raise ParseError(path, f"not an integer: {text!r}", line=line, column=column) from None


def write_score_matrix(path, sm):
    """Write a :class:`ScoreMatrix` as ``label,c1,...,ck`` CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label"] + [f"c{j}" for j in range(1, sm.k + 1)])
        for label, row in zip(sm.labels, sm.scores):
            writer.writerow([int(label)] + [_fmt(x) for x in row])


def read_score_matrix(path):
    """Parse a score matrix CSV; errors name file, line, and column."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, "empty file", line=1) from None
        if len(header) < 3 or header[0] != "label":
            raise ParseError(path, "expected header 'label,c1,...,ck'", line=1, column=1)
        k = len(header) - 1
        expected = [f"c{j}" for j in range(1, k + 1)]
        for j, (got, want) in enumerate(zip(header[1:], expected), start=2):
            if got != want:
                raise ParseError(path, f"expected column {want!r}, got {got!r}", line=1, column=j)
        labels, rows = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != k + 1:
                raise ParseError(path, f"expected {k + 1} fields, got {len(row)}", line=line_no)
            labels.append(_parse_int(path, line_no, "label", row[0]))
            rows.append([_parse_float(path, line_no, header[1 + j], cell)
                         for j, cell in enumerate(row[1:])])
    if not rows:
        raise ParseError(path, "no data rows", line=2)
    try:
        return ScoreMatrix(scores=np.array(rows), labels=np.array(labels), k=k)
    except ValueError as exc:
        raise ParseError(path, str(exc)) from None


def write_win_counts(path, wc):
    """Write :class:`WinCounts` as ``class,repeat,v,k`` CSV.

    Half-tie (doubled) counts have no column in this format and are
    rejected.
    """
    if wc.halved:
        raise ValueError("half-tie (doubled) win counts are not representable in the "
                         "class,repeat,v,k format")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["class", "repeat", "v", "k"])
        seen = {}
        for cls, v in zip(wc.class_ids, wc.v):
            cls = int(cls)
            seen[cls] = seen.get(cls, 0) + 1
            writer.writerow([cls, seen[cls], int(v), wc.k])


def read_win_counts(path):
    """Parse a win counts CSV; errors name file, line, and column."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, "empty file", line=1) from None
        if header != ["class", "repeat", "v", "k"]:
            raise ParseError(path, "expected header 'class,repeat,v,k'", line=1)
        cls, vs, ks = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(path, f"expected 4 fields, got {len(row)}", line=line_no)
            cls.append(_parse_int(path, line_no, "class", row[0]))
            _parse_int(path, line_no, "repeat", row[1])
            vs.append(_parse_int(path, line_no, "v", row[2]))
            ks.append(_parse_int(path, line_no, "k", row[3]))
    if not vs:
        raise ParseError(path, "no data rows", line=2)
    if len(set(ks)) != 1:
        raise ParseError(path, f"inconsistent k values: {sorted(set(ks))}")
    try:
        return WinCounts(v=np.array(vs), class_ids=np.array(cls), k=ks[0])
    except ValueError as exc:
        raise ParseError(path, str(exc)) from None


def _jsonable(x):
    if isinstance(x, dict):
        return {key: _jsonable(val) for key, val in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(val) for val in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(val) for val in x.tolist()]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return None if math.isnan(x) else x
    return x


def write_json(path, payload):
    """Deterministic JSON: stable key order as given, no timestamps,
    NaN mapped to null."""
    with open(path, "w", newline="") as fh:
        json.dump(_jsonable(payload), fh, indent=2, allow_nan=False)
        fh.write("\n")


def write_estimator_reports(path, reports):
    """Write the versioned estimator report document."""
    write_json(path, {"schema": 1, "reports": list(reports)})


def write_curve_csv(path, t_values, columns):
    """Curve CSV: one ``t`` column plus one column per estimator.

    ``columns`` maps estimator name to an array aligned with
    ``t_values``; NaN entries are written as empty cells.
    """
    names = list(columns)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + names)
        for i, t in enumerate(t_values):
            row = [int(t)]
            for name in names:
                val = columns[name][i]
                row.append("" if (val is None or math.isnan(val)) else _fmt(val))
            writer.writerow(row)


def write_replication_csv(path, records):
    """Write tidy replication records."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPLICATION_COLUMNS)
        for rec in records:
            writer.writerow([
                int(rec["replicate"]), int(rec["k"]), int(rec["K"]), rec["estimator"],
                _fmt(rec["p_hat"]), _fmt(rec["truth"]), _fmt(rec["error"]), rec["status"],
            ])


def read_replication_csv(path):
    """Parse replication records; missing columns are named in the error."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, "empty file", line=1) from None
        missing = [c for c in REPLICATION_COLUMNS if c not in header]
        if missing:
            raise ParseError(path, f"missing column(s): {', '.join(missing)}", line=1)
        pos = {name: header.index(name) for name in REPLICATION_COLUMNS}
        records = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                records.append({
                    "replicate": int(row[pos["replicate"]]),
                    "k": int(row[pos["k"]]),
                    "K": int(row[pos["K"]]),
                    "estimator": row[pos["estimator"]],
                    "p_hat": float(row[pos["p_hat"]]) if row[pos["p_hat"]] else float("nan"),
                    "truth": float(row[pos["truth"]]) if row[pos["truth"]] else float("nan"),
                    "error": float(row[pos["error"]]) if row[pos["error"]] else float("nan"),
                    "status": row[pos["status"]],
                })
            except (ValueError, IndexError) as exc:
                raise ParseError(path, str(exc), line=line_no) from None
    return records

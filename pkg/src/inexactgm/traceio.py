"""Trace CSV and bound-report JSON.

A trace file starts with ``# key=value`` metadata lines holding the run
constants the verifiers need, followed by a CSV table with one row per
accepted iteration.  Floats are written with ``repr`` (shortest round-trip
decimal), so ``read_trace(write_trace(...))`` is exact.
"""

import csv
import io
import json
import math

from .solver import BoundParams, IterationRecord

__all__ = ["TRACE_COLUMNS", "TraceFormatError", "format_trace", "write_trace", "read_trace",
           "params_from_meta", "write_report"]

TRACE_COLUMNS = ("k", "i_k", "M_k", "delta_c_k", "f_tilde_x", "f_tilde_w", "gmap_norm",
                 "oracle_calls_cum", "prox_calls_cum")
MAGIC = "inexactgm-trace v1"
_FLOAT_META = ("epsilon", "delta_u", "delta_pu", "L0", "psi_x0", "psi_star",
               "lipschitz", "nu", "l_nu")


class TraceFormatError(ValueError):
    pass


def _row(r):
    return [str(r.k), str(r.i_k), repr(r.M_k), repr(r.delta_c_k), repr(r.f_tilde_at_x),
            repr(r.f_tilde_at_w), repr(r.gmap_norm), str(r.oracle_calls_cumulative),
            str(r.prox_calls_cumulative)]


def _meta_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_trace(trace, meta):
    buf = io.StringIO()
    buf.write(f"# {MAGIC}\n")
    for key, value in meta.items():
        buf.write(f"# {key}={_meta_value(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for r in trace:
        writer.writerow(_row(r))
    return buf.getvalue()


def write_trace(path, trace, meta):
    with open(path, "w", newline="") as fh:
        fh.write(format_trace(trace, meta))


def _parse_meta_value(key, text):
    if text == "":
        return None
    if key in _FLOAT_META:
        return float(text)
    if key in ("K", "N", "seed"):
        return int(text)
    return text


def read_trace(path):
    """Return ``(records, meta)``; raises :class:`TraceFormatError`."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != f"# {MAGIC}":
        raise TraceFormatError("not a trace file (missing header)")
    meta = {}
    idx = 1
    while idx < len(lines) and lines[idx].startswith("#"):
        key, sep, value = lines[idx][1:].strip().partition("=")
        if not sep:
            raise TraceFormatError(f"bad metadata line {idx + 1}")
        try:
            meta[key] = _parse_meta_value(key, value)
        except ValueError as exc:
            raise TraceFormatError(f"bad metadata value for {key}: {value!r}") from exc
        idx += 1
    rows = list(csv.reader(lines[idx:]))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise TraceFormatError("missing or unexpected column header")
    records = []
    for lineno, row in enumerate(rows[1:], start=idx + 2):
        if len(row) != len(TRACE_COLUMNS):
            raise TraceFormatError(f"line {lineno}: expected {len(TRACE_COLUMNS)} fields")
        try:
            records.append(IterationRecord(
                k=int(row[0]), i_k=int(row[1]), M_k=float(row[2]), delta_c_k=float(row[3]),
                f_tilde_at_x=float(row[4]), f_tilde_at_w=float(row[5]), gmap=None,
                gmap_norm=float(row[6]), oracle_calls_cumulative=int(row[7]),
                prox_calls_cumulative=int(row[8])))
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from exc
    return records, meta


def params_from_meta(meta):
    missing = [k for k in ("psi_x0", "psi_star", "epsilon", "L0") if meta.get(k) is None]
    if missing:
        raise TraceFormatError(f"trace metadata lacks {', '.join(missing)}")
    for key in ("psi_x0", "psi_star", "epsilon", "L0"):
        if not math.isfinite(meta[key]):
            raise TraceFormatError(f"non-finite {key}")
    return BoundParams(psi_x0=meta["psi_x0"], psi_star=meta["psi_star"],
                       epsilon=meta["epsilon"], L0=meta["L0"],
                       delta_u=meta.get("delta_u") or 0.0,
                       delta_pu=meta.get("delta_pu") or 0.0,
                       lipschitz=meta.get("lipschitz"), nu=meta.get("nu"),
                       l_nu=meta.get("l_nu"))


def write_report(path, checks):
    data = {c.name: c.as_dict() for c in checks}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=False)
        fh.write("\n")

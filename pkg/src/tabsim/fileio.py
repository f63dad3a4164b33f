"""CSV and weight-file formats.

Tabular outputs start with the resolved run configuration as ``#`` comment
lines, so any output can be passed back as ``--config``.  Units are fixed by
column names (volts, amperes) and values are written in scientific notation
with enough digits to round-trip exactly.

Weight files hold one ``<neuron_id>,<hex code>`` line per neuron and nothing
else, mirroring the serial weight load of the chip.
"""

import csv
import re
from pathlib import Path

import numpy as np

from . import config as config_mod
from .device import curve_from_points
from .errors import DomainError, ParseError
from .quantization import WeightCode

__all__ = [
    "TUNING_HEADER",
    "save_tuning_csv",
    "load_tuning_csv",
    "save_weights",
    "load_weights",
    "load_table",
    "write_config",
    "write_report_csv",
    "write_histogram_csv",
    "write_stats_csv",
    "write_population_csv",
    "write_predictions_csv",
]

TUNING_HEADER = ["neuron_id", "v_in", "i_out"]
MIN_CURVE_POINTS = 8
_WEIGHT_LINE = re.compile(r"^(\d+),([0-9A-Fa-f]{4})$")


def _fmt(x):
    return f"{float(x):.16e}"


def _config_header(cfg):
    if cfg is None:
        return ""
    body = config_mod.EMBED_MARK + "\n" + config_mod.dump(cfg)
    return "".join(f"# {line}\n" if line else "#\n" for line in body.splitlines())


def _data_lines(path):
    """Yield ``(line_number, text)`` for non-comment, non-blank lines."""
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.rstrip("\r\n")
            if not text.strip() or text.startswith("#"):
                continue
            yield lineno, text


def save_tuning_csv(path, curves, cfg=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_config_header(cfg))
        fh.write(",".join(TUNING_HEADER) + "\n")
        for c in curves:
            for v, i in zip(c.v_in, c.i_out):
                fh.write(f"{c.neuron_id},{_fmt(v)},{_fmt(i)}\n")


def _parse_float(text, path, lineno, name):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{name} {text!r} is not a number", path, lineno) from None
    if not np.isfinite(value):
        raise ParseError(f"{name} must be finite", path, lineno)
    return value


def load_tuning_csv(path, min_points=MIN_CURVE_POINTS):
    """Read ``neuron_id,v_in,i_out`` rows into fitted tuning curves, ordered by id."""
    if not path:
        raise DomainError("no tuning-curve CSV given")
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ParseError("empty file", path) from None
    if [h.strip() for h in header.split(",")] != TUNING_HEADER:
        raise ParseError(f"expected header {','.join(TUNING_HEADER)!r}", path, lineno)
    points = {}
    for lineno, text in lines:
        fields = text.split(",")
        if len(fields) != 3:
            raise ParseError(f"expected 3 fields, got {len(fields)}", path, lineno)
        if not fields[0].strip().isdigit():
            raise ParseError(f"neuron_id {fields[0]!r} is not a non-negative integer", path, lineno)
        nid = int(fields[0])
        v = _parse_float(fields[1], path, lineno, "v_in")
        i = _parse_float(fields[2], path, lineno, "i_out")
        if i < 0:
            raise ParseError("i_out must be non-negative", path, lineno)
        rows = points.setdefault(nid, {})
        if v in rows:
            raise ParseError(f"duplicate v_in {v!r} for neuron {nid}", path, lineno)
        rows[v] = i
    if not points:
        raise ParseError("no data rows", path)
    curves = []
    for nid in sorted(points):
        rows = points[nid]
        if len(rows) < min_points:
            raise ParseError(
                f"neuron {nid} has {len(rows)} points, need at least {min_points}", path
            )
        v = np.array(sorted(rows))
        curves.append(curve_from_points(nid, v, np.array([rows[x] for x in v])))
    return curves


def save_weights(path, codes, ids=None):
    ids = range(len(codes)) if ids is None else ids
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for nid, c in zip(ids, codes):
            fh.write(f"{nid},{c.to_hex()}\n")


def load_weights(path):
    """Codes indexed by neuron id; ids must be exactly ``0..n-1``."""
    found = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.rstrip("\r\n")
            if not text:
                continue
            m = _WEIGHT_LINE.match(text)
            if not m:
                raise ParseError(f"expected '<id>,<4 hex digits>', got {text!r}", path, lineno)
            nid, raw = int(m.group(1)), int(m.group(2), 16)
            if raw > 0x1FFF:
                raise ParseError(f"code {m.group(2)} exceeds 13 bits (max 1FFF)", path, lineno)
            if nid in found:
                raise ParseError(f"duplicate neuron id {nid}", path, lineno)
            found[nid] = WeightCode.from_raw(raw)
    if sorted(found) != list(range(len(found))):
        raise ParseError("neuron ids must be 0..n-1 without gaps", path)
    return [found[i] for i in range(len(found))]


def load_table(path):
    """Read an ``x,y`` CSV target table (header required)."""
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ParseError("empty file", path) from None
    if [h.strip() for h in header.split(",")] != ["x", "y"]:
        raise ParseError("expected header 'x,y'", path, lineno)
    xs, ys = [], []
    for lineno, text in lines:
        fields = text.split(",")
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, got {len(fields)}", path, lineno)
        xs.append(_parse_float(fields[0], path, lineno, "x"))
        ys.append(_parse_float(fields[1], path, lineno, "y"))
    return xs, ys


def write_config(path, cfg):
    Path(path).write_text(config_mod.dump(cfg), encoding="utf-8")


def _write_rows(path, cfg, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_config_header(cfg))
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return _fmt(v)
    return v


REPORT_COLUMNS = ["group", "trial", "seed", "L", "bits", "rms_pre", "rms_post",
                  "cost_pre", "cost_post", "iterations", "converged", "active_box_fraction"]


def write_report_csv(path, reports, cfg):
    """Write per-trial rows, then ``mean`` and ``std`` rows per group.

    ``reports`` maps a group label (hidden count, bit depth, ...) to an
    :class:`~tabsim.experiments.ExperimentReport`.  Row fields beyond the
    standard columns (subset membership, say) are appended as extra columns.
    """
    extras = []
    for rep in reports.values():
        for r in rep.rows:
            extras += [k for k in r if k not in REPORT_COLUMNS and k not in extras]
    header = REPORT_COLUMNS + extras
    rows = []
    for group, rep in reports.items():
        for r in rep.rows:
            rows.append([group] + [r.get(k, "") for k in header[1:]])
    pad = [""] * (len(header) - 7)
    for group, rep in reports.items():
        L, bits = rep.meta.get("L", ""), rep.meta.get("bits", "")
        rows.append([group, "mean", "", L, bits, "", rep.mean] + pad)
        rows.append([group, "std", "", L, bits, "", rep.std] + pad)
    _write_rows(path, cfg, header, rows)


def write_histogram_csv(path, hist, cfg):
    counts, edges = hist
    rows = [[edges[k], edges[k + 1], int(counts[k])] for k in range(len(counts))]
    _write_rows(path, cfg, ["bin_lo", "bin_hi", "count"], rows)


def write_stats_csv(path, stats, cfg):
    """Summary of :func:`~tabsim.device.population_stats`: one block per quantity."""
    rows = []
    for key, unit in (("amplitude", "A"), ("offset_v", "V")):
        s = stats[key]
        rows.append([key, unit, "mean", "", s["mean"]])
        rows.append([key, unit, "std", "", s["std"]])
        counts, edges = s["histogram"]
        for k in range(len(counts)):
            rows.append([key, unit, "bin", f"{_fmt(edges[k])}:{_fmt(edges[k + 1])}", int(counts[k])])
    _write_rows(path, cfg, ["quantity", "unit", "stat", "bin", "value"], rows)


def write_population_csv(path, neurons, cfg):
    rows = [[n.id, n.I_b, n.V_ref, n.mirror_gain, n.direction] for n in neurons]
    _write_rows(path, cfg, ["neuron_id", "I_b", "V_ref", "mirror_gain", "direction"], rows)


def write_predictions_csv(path, xs, yhat, y, cfg):
    rows = [[a, b, c] for a, b, c in zip(xs, yhat, y)]
    _write_rows(path, cfg, ["x", "y_pred", "y_target"], rows)

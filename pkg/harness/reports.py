"""
Report files.

Risk tables become a loss CSV (``n,rep,loss``), a separate timings CSV, a
summary CSV, a JSON summary and a text summary rendered from
``templates/reports/risk_summary.txt``. Lower-bound results become JSON and
long-format CSV. Every CSV writes floats with ``repr`` so identical tables
give identical bytes.
"""

import csv
import json
import logging
import math
from pathlib import Path

from django.core.serializers.json import DjangoJSONEncoder
from django.template.loader import render_to_string

import numpy as np

from lecam.models import RateBound, TVTable
from manifold_lab.exceptions import ConfigError, GeometryError

from .models import RiskRow, RiskTable

logger = logging.getLogger(__name__)

LOSS_HEADER = ["n", "rep", "loss"]
TIMING_HEADER = ["n", "rep", "runtime_ms"]
SUMMARY_HEADER = ["n", "reps", "median", "mean", "q1", "q3", "iqr"]


class LabJSONEncoder(DjangoJSONEncoder):
    """Adds numpy scalars and arrays and objects exposing ``as_dict``."""

    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if hasattr(o, "as_dict"):
            return o.as_dict()
        return super().default(o)


def _cell(value):
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def _prepare(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as error:
        raise ConfigError(f"cannot create report directory {path.parent}: {error}")
    return path


def write_csv(path, header, rows):
    path = _prepare(path)
    try:
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(value) for value in row])
    except OSError as error:
        raise ConfigError(f"cannot write {path}: {error}")
    logger.info("wrote %s", path)
    return path


def write_json(path, payload):
    path = _prepare(path)
    text = json.dumps(payload, cls=LabJSONEncoder, indent=2, sort_keys=True)
    try:
        path.write_text(text + "\n")
    except OSError as error:
        raise ConfigError(f"cannot write {path}: {error}")
    logger.info("wrote %s", path)
    return path


def write_risk_csv(table, path):
    return write_csv(path, LOSS_HEADER, [(r.n, r.rep, r.loss) for r in table.rows])


def write_timings_csv(table, path):
    rows = [(r.n, r.rep, r.runtime_ms) for r in table.rows]
    return write_csv(path, TIMING_HEADER, rows)


def write_summary_csv(table, path):
    rows = [[entry[name] for name in SUMMARY_HEADER] for entry in table.summary()]
    return write_csv(path, SUMMARY_HEADER, rows)


def read_risk_csv(path, timings=None, abscissa="log"):
    """
    RiskTable from a loss CSV, with runtimes from a timings CSV if given.

    Raises:
        GeometryError: If the header is not ``n,rep,loss``.
    """
    with Path(path).open(newline="") as handle:
        reader = csv.reader(handle)
        if next(reader, None) != LOSS_HEADER:
            raise GeometryError(f"{path} is not a loss table")
        losses = [(int(n), int(rep), float(loss)) for n, rep, loss in reader]
    runtimes = {}
    if timings is not None:
        with Path(timings).open(newline="") as handle:
            reader = csv.reader(handle)
            next(reader, None)
            runtimes = {(int(n), int(rep)): float(ms) for n, rep, ms in reader}
    rows = tuple(
        RiskRow(n, rep, loss, runtimes.get((n, rep), 0.0)) for n, rep, loss in losses
    )
    return RiskTable(rows, abscissa=abscissa)


def reference_curves(ns):
    """1 / log n and 1 / sqrt(log n), the references for logarithmic rates."""
    return [
        {"n": n, "inv_log": 1 / math.log(n), "inv_sqrt_log": 1 / math.sqrt(math.log(n))}
        for n in ns
    ]


def summary_payload(table, fit=None):
    payload = table.as_dict()
    payload["rows"] = len(table)
    payload["fit"] = fit.as_dict() if fit else None
    if table.abscissa == "loglog":
        payload["reference"] = reference_curves(table.ns)
    return payload


def render_summary(table, fit=None):
    context = {
        "params": sorted(table.params.items()),
        "summary": table.summary(),
        "fit": fit,
        "rows": len(table),
        "reference": reference_curves(table.ns) if table.abscissa == "loglog" else (),
    }
    return render_to_string("reports/risk_summary.txt", context)


def write_density_field(field, path):
    """Long-format CSV ``y1..yD,value`` over the field's grid nodes."""
    header = [f"y{i + 1}" for i in range(field.grid.dim)] + ["value"]
    table = np.column_stack([field.grid.points(), field.flat])
    return write_csv(path, header, table.tolist())


def write_tv_table(table, path):
    rows = [(row["gamma"], row["tv"], row["err"]) for row in table.rows()]
    return write_csv(path, ["gamma", "tv", "err"], rows)


def write_bound_curve(bounds, path):
    rows = [(b.n, b.gamma_star, b.bound) for b in bounds]
    return write_csv(path, ["n", "gamma_star", "bound"], rows)


def emit_reports(result, out_dir, fit=None, name=None):
    """
    Write the report files for a result.

    Args:
        result: RiskTable, TVTable, a list of RateBound, a dict, or any object with
            ``as_dict`` (DivergenceReport, ClutterTV, FitResult, ...).
        out_dir (str | Path): Output directory.
        fit (RateFit): Slope to include with a RiskTable.
        name (str): File stem; defaults by result type.

    Returns:
        list: Paths written.

    Raises:
        ConfigError: If a path cannot be written.
    """
    out_dir = Path(out_dir)
    if isinstance(result, RiskTable):
        stem = name or "risk"
        paths = [
            write_risk_csv(result, out_dir / f"{stem}.csv"),
            write_timings_csv(result, out_dir / "timings.csv"),
            write_summary_csv(result, out_dir / f"{stem}_summary.csv"),
            write_json(out_dir / f"{stem}_summary.json", summary_payload(result, fit)),
        ]
        text = out_dir / f"{stem}_summary.txt"
        try:
            text.write_text(render_summary(result, fit))
        except OSError as error:
            raise ConfigError(f"cannot write {text}: {error}")
        return paths + [text]
    if isinstance(result, TVTable):
        return [write_tv_table(result, out_dir / f"{name or 'tv'}.csv")]
    if isinstance(result, (list, tuple)) and all(
        isinstance(item, RateBound) for item in result
    ):
        return [write_bound_curve(result, out_dir / f"{name or 'bound'}.csv")]
    if isinstance(result, dict):
        return [write_json(out_dir / f"{name or 'report'}.json", result)]
    if hasattr(result, "as_dict"):
        return [write_json(out_dir / f"{name or 'report'}.json", result.as_dict())]
    raise ConfigError(f"no report format for {type(result).__name__}")

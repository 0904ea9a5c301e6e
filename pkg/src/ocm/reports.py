"""CSV/JSON serialization of reports and rasters.

CSV files start with ``#``-prefixed header lines: a format/version line and a
JSON echo of everything needed to re-run. Floats are written with 17
significant digits so identical runs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

REPORT_FORMAT = "ocm-report"
DOMAIN_FORMAT = "ocm-domain"
SWEEP_FORMAT = "ocm-sweep"
CG_FORMAT = "ocm-cg-precision"
VERSION = 1


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, complex) or np.iscomplexobj(v):
        v = complex(v)
        if v.imag == 0:
            return f"{v.real:.17g}"
        return f"{v.real:.17g}{v.imag:+.17g}j"
    return f"{float(v):.17g}"


def _default(o):
    if isinstance(o, np.ndarray):
        if np.iscomplexobj(o):
            return {"re": o.real.tolist(), "im": o.imag.tolist()}
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj, **kw):
    return json.dumps(obj, default=_default, sort_keys=True, **kw)


def csv_text(kind, header: dict, columns, rows):
    buf = io.StringIO()
    buf.write(f"# {kind} v{VERSION}\n")
    buf.write(f"# config: {dumps(header)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def report_header(report):
    return {"config": report.config, "seed": report.seed, "problem": report.problem}


def report_to_csv(report) -> str:
    """Columns: step, relres, x_coeff_sum, rank. Row 0 is the initial guess."""
    rows = [(0, report.relative_residuals[0], None, None)]
    for rec in report.records:
        rows.append((rec.step, rec.relres, rec.x_coefficient_sum, rec.numerical_rank))
    header = report_header(report)
    header.update(converged=report.converged, observed_rate=report.observed_rate,
                  matvecs=report.matvecs)
    return csv_text(REPORT_FORMAT, header, ["step", "relres", "x_coeff_sum", "rank"], rows)


def report_to_json(report) -> str:
    doc = {"format": REPORT_FORMAT, "version": VERSION, **report_header(report),
           "converged": report.converged, "observed_rate": report.observed_rate,
           "matvecs": report.matvecs,
           "relative_residuals": report.relative_residuals,
           "records": [rec.to_dict() for rec in report.records]}
    return dumps(doc, indent=1)


def read_csv(text: str):
    """Parse one of our CSV files into ``(header_dict, column_names, rows)``."""
    header, body = {}, []
    for line in text.splitlines():
        if line.startswith("# config: "):
            header = json.loads(line[len("# config: "):])
        elif line.startswith("#"):
            continue
        else:
            body.append(line)
    rows = list(csv.reader(body))
    return header, rows[0], rows[1:]


def domain_to_csv(grid) -> str:
    """Rows ``re, im, r`` in row-major order (imaginary part outer)."""
    header = {"rectangle": list(grid.rectangle), "resolution": list(grid.resolution),
              "tableau": grid.tableau.to_list(), "label": grid.tableau.label,
              "order": "row-major, im outer, re inner"}
    re, im = grid.re, grid.im
    rows = ((re[j], im[i], grid.values[i, j])
            for i in range(len(im)) for j in range(len(re)))
    return csv_text(DOMAIN_FORMAT, header, ["re", "im", "r"], rows)


def domain_to_json(grid) -> str:
    return dumps({"format": DOMAIN_FORMAT, "version": VERSION,
                  "rectangle": list(grid.rectangle), "resolution": list(grid.resolution),
                  "tableau": grid.tableau.to_list(), "label": grid.tableau.label,
                  "values": grid.values})


def sweep_to_csv(rows, header) -> str:
    return csv_text(SWEEP_FORMAT, header,
                     ["k", "m", "observed_rate", "matvecs_to_tolerance", "failed"],
                     [(r["k"], r["m"], r["observed_rate"], r["matvecs_to_tolerance"],
                       r["failed"]) for r in rows])


def cg_to_csv(comparison, header) -> str:
    rows = [(i + 1, d, a, b) for i, (d, a, b) in enumerate(
        zip(comparison.deviations, comparison.reduced_errors, comparison.extended_errors))]
    return csv_text(CG_FORMAT, header,
                     ["step", "deviation", "anorm_error_reduced", "anorm_error_extended"],
                     rows)

"""Report files: JSON report, histogram CSV and plot-ready columns.

Every file is written to a temporary sibling and renamed into place, so a
reader never sees a partial file.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile

CSV_COLUMNS = ("scenario", "factor", "bin_u_lo", "bin_u_hi", "bin_v_lo", "bin_v_hi",
               "mass", "stderr", "oracle", "n_atoms")


def atomic_write(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_json(report):
    d = report if isinstance(report, dict) else report.to_dict()
    return json.dumps(d, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _rows(d):
    for h in d["histograms"]:
        oracle = h["oracle"]
        for i, (u0, u1, v0, v1) in enumerate(h["bins"]):
            yield (d["scenario"], h["factor"], u0, u1, v0, v1, h["mass"][i], h["stderr"][i],
                   "" if oracle is None or oracle[i] is None else oracle[i], h["n_atoms"][i])


def histogram_csv(report):
    d = report if isinstance(report, dict) else report.to_dict()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in _rows(d):
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def plotdata(report):
    """Whitespace-separated columns: factor, bin centre u, v, mass, stderr, oracle."""
    d = report if isinstance(report, dict) else report.to_dict()
    lines = ["# factor u_mid v_mid mass stderr oracle"]
    for row in _rows(d):
        _, k, u0, u1, v0, v1, m, se, o, _ = row
        lines.append(f"{k} {0.5 * (u0 + u1)!r} {0.5 * (v0 + v1)!r} {m!r} {se!r} "
                     f"{'nan' if o == '' else repr(o)}")
    return "\n".join(lines) + "\n"


def write_outputs(report, out_dir, json_out=True, csv_out=True, plot_out=True, timing=None):
    """Write ``report.json``, ``histograms.csv``, ``plotdata.txt`` (and ``timing.json``).

    Returns the list of paths written.
    """
    d = report if isinstance(report, dict) else report.to_dict()
    written = []
    if json_out:
        p = os.path.join(out_dir, "report.json")
        atomic_write(p, report_json(d))
        written.append(p)
    if csv_out:
        p = os.path.join(out_dir, "histograms.csv")
        atomic_write(p, histogram_csv(d))
        written.append(p)
    if plot_out:
        p = os.path.join(out_dir, "plotdata.txt")
        atomic_write(p, plotdata(d))
        written.append(p)
    if timing is not None:
        # wall time lives outside report.json so identical runs give identical reports
        p = os.path.join(out_dir, "timing.json")
        atomic_write(p, json.dumps(timing, indent=2, sort_keys=True) + "\n")
        written.append(p)
    return written

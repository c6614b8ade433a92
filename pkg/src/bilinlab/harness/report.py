"""Report emission: CSV sample tables, a JSON summary and a matplotlib script.

Reports only copy numbers out of the record, so two emissions of the same
record are byte-identical.
"""

import csv
import io
import json
import os

from ..errors import UsageError
from .runner import SCHEMA_VERSION

FORMATS = ("csv", "json", "plot")

#: CSV column names per kind: (sweep columns, value column)
COLUMNS = {
    "decay-sweep": (("lambda", "mu"), "ratio"),
    "kernel-decay": (("ray", "offset"), "abs_kernel"),
    "transversality": ((), "margin"),
    "torus-bilinear": (("N1", "N2", "T"), "ratio"),
    "torus-rescaled": (("lambda_scale", "N1", "N2"), "ratio"),
    "torus-mixed": (("N1", "N2", "T"), "ratio"),
    "torus-derivative": (("N1", "N2", "T"), "ratio"),
    "linear-baseline": (("N", "T"), "ratio"),
    "sharpness": (("N1",), "scaled_ratio"),
    "parametrix": (("N",), "error"),
}

#: extra per-row meta copied into the CSV
EXTRA = {
    "kernel-decay": ("abscissa",),
    "torus-rescaled": ("normalized", "predicted"),
    "torus-mixed": ("predicted",),
    "torus-derivative": ("predicted",),
    "sharpness": ("closed_form",),
    "parametrix": ("h",),
}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def samples_csv(record):
    """CSV text of the sample table; header e.g. lambda,mu,ratio,trial_spread,schema_version."""
    kind = record.config["kind"]
    axes, value = COLUMNS[kind]
    extra = EXTRA.get(kind, ())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(axes) + [value, "trial_spread"] + list(extra) + ["schema_version"])
    for r in record.rows:
        w.writerow([_fmt(r["coords"].get(a)) for a in axes] + [_fmt(r["value"]), _fmt(r["spread"])]
                   + [_fmt(r["meta"].get(e)) for e in extra] + [SCHEMA_VERSION])
    return buf.getvalue()


def guide_slopes(record):
    """Claimed slope per fitted axis, as used by the plot guide lines."""
    out = {}
    for v in record.verdicts:
        if "claimed" in v and v.get("mode", "two-sided") in ("two-sided", "at-least"):
            out[v["name"]] = v["claimed"]
    return out


def summary_json(record):
    flags = sorted({v["status"] for v in record.verdicts})
    data = {
        "schema_version": SCHEMA_VERSION,
        "kind": record.config["kind"],
        "name": record.config["name"],
        "status": record.status,
        "exit_code": record.exit_code,
        "inconclusive": "inconclusive" in flags,
        "flags": flags,
        "verdicts": record.verdicts,
        "fits": [{k: f[k] for k in ("name", "axis", "exponent", "intercept", "r2", "span_decades")}
                 for f in record.fits],
        "errors": record.errors,
        "rows": len(record.rows),
    }
    return json.dumps(data, indent=1, sort_keys=True) + "\n"


_PLOT = '''"""Log-log panels for {name} ({kind}); needs matplotlib."""
import csv

import matplotlib.pyplot as plt

AXES = {axes!r}
VALUE = {value!r}
FITS = {fits!r}

with open({csv_name!r}, newline="") as fh:
    rows = list(csv.DictReader(fh))

n = max(1, len(FITS))
fig, axs = plt.subplots(1, n, figsize=(5 * n, 4), squeeze=False)
for ax, fit in zip(axs[0], FITS):
    xs = fit["abscissa"]
    ys = fit["ordinate"]
    ax.loglog(xs, ys, "o", label="samples")
    slope = fit["claimed"]
    if slope is not None:
        x0, y0 = xs[0], ys[0]
        ax.loglog([x0, xs[-1]], [y0, y0 * (xs[-1] / x0) ** slope], "--",
                  label="claimed slope %g" % slope)
    ax.set_xlabel(fit["axis"])
    ax.set_ylabel(VALUE if fit["column"] == "value" else fit["column"])
    ax.set_title("%s: fitted %.3f" % (fit["name"], fit["exponent"]))
    ax.legend()
fig.tight_layout()
fig.savefig({png_name!r}, dpi=120)
print("rows read:", len(rows))
'''


def plot_script(record, csv_name, png_name):
    kind = record.config["kind"]
    axes, value = COLUMNS[kind]
    slopes = guide_slopes(record)
    fits = [{"name": f["name"], "axis": f["axis"], "column": f.get("column", "value"),
             "abscissa": list(f["abscissa"]), "ordinate": list(f["ordinate"]),
             "exponent": f["exponent"], "claimed": slopes.get(f["name"])} for f in record.fits]
    return _PLOT.format(name=record.config["name"], kind=kind, axes=tuple(axes), value=value,
                        fits=fits, csv_name=csv_name, png_name=png_name)


def emit_report(record, formats=FORMATS, directory=".", stem="report"):
    """Write the requested report files; return their paths.

    Raises OSError when `directory` cannot be written.
    """
    formats = tuple(formats)
    bad = set(formats) - set(FORMATS)
    if bad:
        raise UsageError(f"unknown report formats {sorted(bad)}")
    os.makedirs(directory, exist_ok=True)
    csv_name = f"{stem}-samples.csv"
    paths = []

    def write(name, text):
        path = os.path.join(directory, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths.append(path)

    if "csv" in formats:
        write(csv_name, samples_csv(record))
    if "json" in formats:
        write(f"{stem}-summary.json", summary_json(record))
    if "plot" in formats:
        write(f"{stem}-plot.py", plot_script(record, csv_name, f"{stem}.png"))
    return paths

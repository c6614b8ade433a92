"""Run an experiment: expand the sweep into cells, evaluate them, fit and judge.

Cells are independent and seeded only by (seed, experiment name, trial), so a
run gives bit-identical samples for any worker count.
"""

import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import oscint, phasekit
from ..errors import BilinlabError, UsageError
from ..scalefit import (BOUNDEDNESS_TOLERANCE, DEFAULT_R2_FLOOR, DEFAULT_TOLERANCE,
                        check_at_least, check_bound, check_bounded,
                        fit_power_law)
from ..toruslab import bilinear, metric1d
from .config import KINDS, ExperimentConfig, parse_tie, resolve_tie

SCHEMA_VERSION = 1
DEFAULT_MIN_SPAN = 0.6
DEFAULT_CAP = 1 << 24
OUTPUT_ENV = "BILINLAB_OUTPUT_DIR"

#: status values that make a record fail
FAILING = ("fail", "hypothesis-fails", "error")


# ---------------------------------------------------------------------------
# building objects from config entries
# ---------------------------------------------------------------------------

def build_phase(spec, d):
    """Phase from {"type": "paraboloid" | "hyperplane" | "cone" | "time_rescaled", ...}."""
    kind = spec.get("type")
    if kind == "paraboloid":
        return phasekit.paraboloid(d)
    if kind == "hyperplane":
        v = spec.get("velocity", 0.0)
        return phasekit.hyperplane(np.broadcast_to(np.asarray(v, dtype=float), (d,)).copy())
    if kind == "cone":
        return phasekit.cone(d, spec.get("sign", 1))
    if kind == "time_rescaled":
        return phasekit.time_rescaled(build_phase(spec["inner"], d), float(spec["c"]))
    raise UsageError(f"unknown phase type {kind!r}")


def build_amplitude(spec, d):
    """Amplitude from {"t": [c, r], "x": [c, r], "xi": [c, r], "annulus": [r0, r1]?}."""
    try:
        return oscint.Amplitude.box(d, t=spec["t"], x=spec["x"], xi=spec["xi"],
                                    annulus=tuple(spec["annulus"]) if spec.get("annulus") else None)
    except KeyError as exc:
        raise UsageError(f"amplitude needs key {exc}") from exc


def build_lattice(spec, d):
    boxes = [tuple(np.asarray(spec[k], dtype=float).reshape(2, -1)) if k != "t" else tuple(spec[k])
             for k in ("t", "x", "xi1", "xi2")]
    t_box, x_box, xi1, xi2 = boxes
    return phasekit.Lattice.from_boxes(t_box, x_box, xi1, xi2, n=spec.get("n", 5),
                                       n_xi=spec.get("n_xi"))


def _delta_min(cfg):
    return float(cfg.params.get("delta_min", 0.1))


# ---------------------------------------------------------------------------
# cells
# ---------------------------------------------------------------------------

def expand_cells(cfg):
    """List of coordinate dicts: product of the free axes, tied axes resolved.

    Cells violating the ordering the estimates assume (mu > lambda, N2 > N1
    for same-generator torus kinds) are left out.
    """
    axes = cfg.axes
    free = [a for a in axes if not any(parse_tie(v) for v in cfg.sweep[a])]
    tied = [a for a in axes if a not in free]
    cells = []
    for combo in itertools.product(*[cfg.sweep[a] for a in free]):
        base = {a: float(v) for a, v in zip(free, combo)}
        for tcombo in itertools.product(*[cfg.sweep[a] for a in tied]):
            coords = dict(base)
            for a, v in zip(tied, tcombo):
                coords[a] = resolve_tie(v, coords)
            if cfg.kind == "decay-sweep" and coords["mu"] > coords["lambda"]:
                continue
            if cfg.kind in ("torus-bilinear", "torus-derivative", "torus-rescaled") \
                    and coords["N2"] > coords["N1"]:
                continue
            cells.append({a: coords[a] for a in axes})
    if cfg.kind == "kernel-decay":
        cells = [{"ray": r} for r in cfg.params.get("rays", ["xi", "p"])]
    if cfg.kind == "transversality":
        cells = [{}]
    if not cells:
        raise UsageError("the sweep expands to no admissible cells")
    return cells


def _torus_size(cfg, c, lam=1.0):
    data = cfg.params.get("data", "beam" if cfg.kind == "torus-rescaled" else "random")
    if data == "beam":
        return cfg.d * int(16 * lam + 2)
    return int(4 * (c["N1"] + c["N2"]) * lam + 2) ** cfg.d


def estimate_size(cfg, c):
    """Rough count of grid points one cell touches, for the desk-scale guard."""
    k = cfg.kind
    if k == "decay-sweep":
        p = cfg.params
        grid = oscint.resolved_grid(
            (build_phase(p["phase_a"], cfg.d), build_amplitude(p["amp_a"], cfg.d), c["lambda"]),
            (build_phase(p["phase_b"], cfg.d), build_amplitude(p["amp_b"], cfg.d), c["mu"]))
        return int(grid.node_count)
    if k in ("torus-bilinear", "torus-mixed", "torus-derivative"):
        return _torus_size(cfg, c)
    if k == "torus-rescaled":
        return _torus_size(cfg, c, c["lambda_scale"])
    if k == "linear-baseline":
        return int(8 * c["N"] + 2) ** cfg.d
    if k == "parametrix":
        return int(cfg.params.get("P", 1024)) * int(4 * c["N"] + 1)
    return 0


def _ratio_kw(cfg):
    p = cfg.params
    kw = {"seed": cfg.seed, "experiment_id": cfg.name}
    if "data" in p:
        kw["kind"] = p["data"]
    if "M" in p:
        kw["M"] = int(p["M"])
    return kw


def _ratio_row(sample, **extra):
    row = {"value": sample.value, "spread": sample.spread, "values": list(sample.values),
           "meta": {k: (list(v) if isinstance(v, tuple) else v) for k, v in sample.meta.items()}}
    row["meta"].update(extra)
    return row


def evaluate_cell(cfg, c):
    """Samples of one cell: a list of {"coords", "value", "spread", "values", "meta"}."""
    k, d, p = cfg.kind, cfg.d, cfg.params
    if k == "decay-sweep":
        sweep = oscint.decay_sweep(build_phase(p["phase_a"], d), build_phase(p["phase_b"], d),
                                   build_amplitude(p["amp_a"], d), build_amplitude(p["amp_b"], d),
                                   [c["lambda"]], c["mu"], trials=cfg.trials, seed=cfg.seed,
                                   experiment_id=cfg.name, delta_min=_delta_min(cfg),
                                   method=p.get("method", "auto"))
        s = sweep.samples[0]
        return [{"value": s.ratio, "spread": s.spread, "values": list(s.values),
                 "meta": {"grid_shape": list(s.grid_shape), "margin": sweep.margin}}]
    if k == "kernel-decay":
        lam, mu = float(p["lambda"]), float(p["mu"])
        cum = oscint.CumulativePhase(build_phase(p["phase_a"], d), build_amplitude(p["amp_a"], d),
                                     build_phase(p["phase_b"], d), build_amplitude(p["amp_b"], d),
                                     lam, mu)
        scale = lam if c["ray"] == "xi" else mu
        offsets = [float(v) / scale for v in cfg.sweep["offset"]]
        rows = []
        for off, ks in zip(cfg.sweep["offset"], oscint.kernel_ray(cum, c["ray"], offsets)):
            rows.append({"coords": {"ray": c["ray"], "offset": float(off)}, "value": abs(ks.value),
                         "spread": None, "values": [ks.value.real, ks.value.imag],
                         "meta": {"abscissa": ks.abscissa}})
        return rows
    if k == "transversality":
        rep = phasekit.transversality_margin(build_phase(p["phase_a"], d), build_phase(p["phase_b"], d),
                                             build_lattice(p["lattice"], d))
        return [{"value": rep.margin, "spread": None, "values": [rep.sup],
                 "meta": {"sup": rep.sup, "min_singular": rep.min_singular}}]
    if k == "torus-bilinear":
        gens = tuple(p.get("generators", ("schrodinger", "schrodinger")))
        s = bilinear.bilinear_ratio(c["N1"], c["N2"], c["T"], d, cfg.trials, gens, **_ratio_kw(cfg))
        return [_ratio_row(s)]
    if k == "torus-rescaled":
        kw = _ratio_kw(cfg)
        s = bilinear.rescaled_ratio(c["lambda_scale"], c["N1"], c["N2"], d, cfg.trials, **kw)
        return [_ratio_row(s, normalized=s.value / s.meta["predicted"])]
    if k == "torus-mixed":
        s = bilinear.mixed_ratio(c["N1"], c["N2"], c["T"], d, int(p.get("sign", 1)), cfg.trials,
                                 **_ratio_kw(cfg))
        return [_ratio_row(s)]
    if k == "torus-derivative":
        s = bilinear.derivative_twisted_ratio(c["N1"], c["N2"], c["T"], tuple(p["orders"]), d,
                                              cfg.trials, **_ratio_kw(cfg))
        return [_ratio_row(s)]
    if k == "linear-baseline":
        kw = _ratio_kw(cfg)
        kw.pop("M", None)
        v = bilinear.linear_strichartz_ratio(int(c["N"]), d, cfg.trials, T=c["T"], **kw)
        return [{"value": v, "spread": None, "values": [v], "meta": {}}]
    if k == "sharpness":
        rep = oscint.sharpness_report(c["N1"], d, int(p.get("cells", 16)))
        return [{"value": rep.value, "spread": None, "values": [rep.value],
                 "meta": {"closed_form": rep.closed_form, "lower_bound_holds": rep.lower_bound_holds}}]
    if k == "parametrix":
        metric = phasekit.Metric.cosine(d, float(p["eps"]))
        v = metric1d.parametrix_error(metric, int(c["N"]), s=float(p.get("s", 0.2)),
                                      P=int(p.get("P", 1024)), seed=cfg.seed, experiment_id=cfg.name)
        return [{"value": v, "spread": None, "values": [v], "meta": {"h": 1.0 / c["N"]}}]
    raise UsageError(f"unknown kind {k!r}")


def run_cell(config_dict, index, coords):
    """Worker entry point: never raises for module errors, records them instead."""
    cfg = ExperimentConfig.from_dict(config_dict)
    start = time.perf_counter()
    try:
        rows = evaluate_cell(cfg, coords)
        error = None
    except (BilinlabError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        rows, error = [], {"type": type(exc).__name__, "message": str(exc)}
    for r in rows:
        r["coords"] = r.get("coords", dict(coords))
        r["cell"] = index
    return {"index": index, "coords": dict(coords), "rows": rows, "error": error,
            "seconds": time.perf_counter() - start}


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------

def _tied(cfg, axis):
    return any(parse_tie(v) for v in cfg.sweep.get(axis, []))


def claim_for(cfg, axis, rows):
    """Claimed scaling along `axis` for a group of rows, or None if none applies.

    Returns dict(mode in {"two-sided", "bounded", "at-least"}, claimed, tolerance,
    r2_floor, column, reciprocal).
    """
    d, k = cfg.d, cfg.kind
    tol = cfg.tolerance

    def two(claimed, flat_ok=False):
        if claimed == 0 or flat_ok:
            return {"mode": "two-sided", "claimed": claimed,
                    "tolerance": tol if tol is not None else BOUNDEDNESS_TOLERANCE, "r2_floor": 0.0}
        return {"mode": "two-sided", "claimed": claimed,
                "tolerance": tol if tol is not None else DEFAULT_TOLERANCE,
                "r2_floor": cfg.r2_floor if cfg.r2_floor is not None else DEFAULT_R2_FLOOR}

    def col(key, vals):
        return np.array([r["coords"][key] for r in vals])

    if k == "decay-sweep":
        return two(-d / 2) if axis == "lambda" else two(-0.5) if axis == "mu" else None
    if k in ("torus-bilinear", "torus-derivative", "torus-mixed"):
        n, m = cfg.params.get("orders", (0, 0)) if k == "torus-derivative" else (0, 0)
        short = bool(np.all(col("T", rows) * col("N1", rows) <= 1 + 1e-12))
        n1, n2 = col("N1", rows), col("N2", rows)
        if axis == "N1":
            if k == "torus-mixed":
                if np.all(n2 <= n1):
                    return two(-0.5)
                return two((d - 1) / 2 - 0.5) if np.all(n1 <= n2) else None
            return two(n - 0.5) if short else two(float(n))
        if axis == "N2":
            if k == "torus-mixed" and not np.all(n2 <= n1):
                return two(0.0) if np.all(n2 >= n1) else None
            return two(m + (d - 1) / 2)
        return None
    if k == "torus-rescaled":
        lam, n1 = col("lambda_scale", rows), col("N1", rows)
        if axis == "lambda_scale":
            return two(-0.5) if np.all(lam <= n1) else two(0.0) if np.all(lam > n1) else None
        if axis == "N1":
            if np.all(lam > n1):
                return {"mode": "bounded", "column": "normalized",
                        "tolerance": tol if tol is not None else BOUNDEDNESS_TOLERANCE}
            return two(0.0) if np.all(lam <= n1) else None
        if axis == "N2":
            return two(0.5)
        return None
    if k == "linear-baseline":
        return two(0.0) if axis == "N" else None
    if k == "parametrix":
        return {"mode": "at-least", "claimed": float(cfg.params.get("min_slope", 0.8)),
                "reciprocal": True}
    return None


def _group_rows(cfg, rows, axis):
    keys = [a for a in cfg.axes if a != axis and not _tied(cfg, a)]
    groups = {}
    for r in rows:
        groups.setdefault(tuple(r["coords"][a] for a in keys), []).append(r)
    return keys, groups


def _verdict_dict(v, **extra):
    out = asdict(v)
    out["notes"] = list(out["notes"])
    out.update(extra)
    return out


def judge(cfg, rows):
    """Fits and verdicts from stored rows; each verdict lists the rows it used."""
    fits, verdicts = [], []
    min_span = cfg.min_span if cfg.min_span is not None else DEFAULT_MIN_SPAN
    if cfg.kind == "transversality":
        r = rows[0]
        ok = r["value"] >= _delta_min(cfg)
        verdicts.append({"name": "margin", "status": "pass" if ok else "hypothesis-fails",
                         "fitted": r["value"], "claimed": _delta_min(cfg), "rows": [0],
                         "notes": [] if ok else ["normals not transverse on the lattice"]})
        return fits, verdicts
    if cfg.kind == "kernel-decay":
        for ray in sorted({r["coords"]["ray"] for r in rows}):
            idx = [i for i, r in enumerate(rows) if r["coords"]["ray"] == ray]
            ks = [_KernelRow(rows[i]) for i in idx]
            name = f"ray={ray}"
            try:
                res = oscint.kernel_decay_check(ks, cfg.d, min_span=cfg.min_span or 1.5)
            except BilinlabError as exc:
                verdicts.append({"name": name, "status": "inconclusive", "rows": idx,
                                 "notes": [str(exc)]})
                continue
            fits.append(dict(asdict(res.fit), name=name, axis="abscissa"))
            verdicts.append({"name": name, "status": "pass" if res.passed else "fail",
                             "claimed": res.claimed, "fitted": res.fit.exponent, "r2": res.fit.r2,
                             "span_decades": res.fit.span_decades, "rows": idx,
                             "notes": [f"{res.used} samples above the round-off floor"]})
        return fits, verdicts
    if cfg.kind == "sharpness":
        vals = np.array([r["value"] for r in rows])
        med = float(np.median(vals))
        factor = float(max(vals.max() / med, med / vals.min()))
        limit = float(cfg.params.get("factor", 1.5))
        verdicts.append({"name": "N1", "status": "pass" if factor <= limit else "fail",
                         "claimed": limit, "fitted": factor, "median": med,
                         "rows": list(range(len(rows))), "notes": []})
        return fits, verdicts
    position = {id(r): i for i, r in enumerate(rows)}
    for axis in cfg.axes:
        if _tied(cfg, axis):
            continue
        keys, groups = _group_rows(cfg, rows, axis)
        for key, grp in sorted(groups.items()):
            if len({r["coords"][axis] for r in grp}) < 3:
                continue
            claim = claim_for(cfg, axis, grp)
            if claim is None:
                continue
            name = axis + "".join(f"@{a}={v:g}" for a, v in zip(keys, key))
            column = claim.get("column")
            y = [r["meta"][column] if column else r["value"] for r in grp]
            s = [r["coords"][axis] for r in grp]
            if claim.get("reciprocal"):
                s = [1.0 / v for v in s]
            used = [position[id(r)] for r in grp]
            fit = fit_power_law(s, y)
            fits.append(dict(asdict(fit), name=name, axis=("1/" + axis) if claim.get("reciprocal") else axis,
                             column=column or "value"))
            if claim["mode"] == "two-sided":
                v = check_bound(fit, claim["claimed"], claim["tolerance"], claim["r2_floor"], min_span)
            elif claim["mode"] == "bounded":
                v = check_bounded(fit, claim["tolerance"], min_span)
            else:
                v = check_at_least(fit, claim["claimed"], min_span)
            verdicts.append(_verdict_dict(v, name=name, mode=claim["mode"], rows=used))
    if not verdicts:
        verdicts.append({"name": "sweep", "status": "inconclusive", "rows": [],
                         "notes": ["no axis with three or more distinct scales and a claim"]})
    return fits, verdicts


class _KernelRow:
    """Adapter giving stored rows the `abscissa` / `value` interface of KernelSample."""

    def __init__(self, row):
        self.abscissa = row["meta"]["abscissa"]
        self.value = complex(*row["values"])


def aggregate_status(verdicts, errors):
    statuses = [v["status"] for v in verdicts]
    if errors or any(s in FAILING for s in statuses):
        return "fail"
    if any(s == "inconclusive" for s in statuses):
        return "inconclusive"
    return "pass"


def exit_code(status):
    return {"pass": 0, "fail": 1, "inconclusive": 3}.get(status, 1)


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

@dataclass
class ResultRecord:
    """Everything a run produced; verdicts reference rows by index."""

    config: dict
    rows: list
    fits: list
    verdicts: list
    status: str
    errors: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_json(self):
        return json.dumps(asdict(self), indent=1, sort_keys=True, default=_json_default) + "\n"

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        if data.get("schema_version") != SCHEMA_VERSION:
            raise UsageError(f"record schema {data.get('schema_version')} is not {SCHEMA_VERSION}")
        return cls(**data)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    @property
    def exit_code(self):
        return exit_code(self.status)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def output_root(cfg, override=None):
    return override or cfg.output_dir or os.environ.get(OUTPUT_ENV) or "results"


def run_experiment(config, workers=1, cap_grid=DEFAULT_CAP):
    """Validate, gate, evaluate every cell and judge.

    Parameters
    ----------
    config : ExperimentConfig
    workers : int
        Process-pool size for the cells (1 runs in-process).
    cap_grid : int or None
        Largest estimated per-cell grid; larger cells are a usage error.

    Returns
    -------
    ResultRecord
    """
    cfg = config.validate()
    start = time.perf_counter()
    cells = expand_cells(cfg)
    if cap_grid is not None:
        for c in cells:
            size = estimate_size(cfg, c)
            if size > cap_grid:
                raise UsageError(f"cell {c} needs about {size} grid points, above the cap {cap_grid}")
    snapshot = json.loads(json.dumps(cfg.to_dict()))
    if cfg.kind in ("decay-sweep", "kernel-decay"):
        p = cfg.params
        rep = oscint.pair_margin(build_phase(p["phase_a"], cfg.d), build_amplitude(p["amp_a"], cfg.d),
                                 build_phase(p["phase_b"], cfg.d), build_amplitude(p["amp_b"], cfg.d))
        if rep.margin < _delta_min(cfg):
            verdicts = [{"name": "transversality", "status": "hypothesis-fails", "fitted": rep.margin,
                         "claimed": _delta_min(cfg), "rows": [],
                         "notes": ["margin below delta_min; sweep not attempted"]}]
            return ResultRecord(snapshot, [], [], verdicts, "fail",
                                meta={"wall_clock_seconds": time.perf_counter() - start, "cells": 0})
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_cell, snapshot, i, c) for i, c in enumerate(cells)]
            results = [f.result() for f in futures]
    else:
        results = [run_cell(snapshot, i, c) for i, c in enumerate(cells)]
    rows, errors, seconds = [], [], []
    for res in results:
        rows.extend(res["rows"])
        seconds.append(res["seconds"])
        if res["error"] is not None:
            errors.append(dict(res["error"], cell=res["index"], coords=res["coords"]))
    fits, verdicts = judge(cfg, rows) if rows else ([], [])
    status = aggregate_status(verdicts, errors)
    meta = {"wall_clock_seconds": time.perf_counter() - start, "cell_seconds": seconds,
            "cells": len(cells)}
    return ResultRecord(snapshot, rows, fits, verdicts, status, errors, meta)


def save_record(record, directory):
    """Write the record under a fresh name (records are never overwritten)."""
    os.makedirs(directory, exist_ok=True)
    for k in itertools.count(1):
        path = os.path.join(directory, f"record-{k:04d}.json")
        try:
            with open(path, "x", encoding="utf-8") as fh:
                fh.write(record.to_json())
            return path
        except FileExistsError:
            continue

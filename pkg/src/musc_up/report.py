"""Result serialization, method comparison, and plot emission.

A run directory holds three artifacts:

* moments.csv -- pointwise mean/std (and bootstrap intervals when the method
  provides them) at the final stored time, one row per grid point (and per
  species on two-component fields). Floats are written with shortest-repr
  formatting, so re-running with the same seed reproduces the file
  byte-for-byte.
* report.json -- method/model metadata, summary statistics, and the
  accept/reject decision where applicable. Same byte-for-byte guarantee.
* timing.json -- wall-clock breakdown. Excluded from the reproducibility
  guarantee (timings vary between runs by nature).

Comparison loads the moments of each method and a designated reference,
checks the grids agree, and scores mean/std fields by mean relative error.
Plots are written as self-contained SVG (no plotting dependency) next to a
CSV of the plotted numbers.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .coupling import Grid1D, Grid2D
from .moments import MomentEstimate

__all__ = [
    "REPORT_VERSION",
    "compare_methods",
    "load_moments_csv",
    "load_report",
    "mean_relative_std_error",
    "relative_field_error",
    "write_moments_csv",
    "write_json",
    "plot_bars",
    "plot_field",
    "plot_profile",
]

REPORT_VERSION = 1
SPECIES_NAMES = ("u", "v")

# relative errors are measured only where the reference is meaningfully
# nonzero; below this floor a ratio would amplify roundoff
ERROR_FLOOR = 1e-12


def _fmt(x) -> str:
    """Shortest round-trip decimal form of a float (plain Python repr)."""
    return repr(float(x))


def relative_field_error(values: np.ndarray, reference: np.ndarray, floor: float = ERROR_FLOOR) -> float:
    """Mean over grid points of |values - reference| / |reference|, restricted
    to points where |reference| > floor. 0.0 if no point qualifies (e.g. a
    deterministic run where the reference std vanishes identically)."""
    values = np.asarray(values, dtype=float).reshape(-1)
    reference = np.asarray(reference, dtype=float).reshape(-1)
    if values.shape != reference.shape:
        raise ValueError(f"field shapes differ: {values.shape} vs {reference.shape}")
    mask = np.abs(reference) > floor
    if not np.any(mask):
        return 0.0
    return float(np.mean(np.abs(values[mask] - reference[mask]) / np.abs(reference[mask])))


def mean_relative_std_error(std: np.ndarray, std_reference: np.ndarray, floor: float = ERROR_FLOOR) -> float:
    """Headline accuracy score: mean relative error of the std field."""
    return relative_field_error(std, std_reference, floor)


def _jsonable(obj):
    """Recursively convert numpy scalars/arrays for json.dump."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: str, payload: dict) -> None:
    """Sorted-key, indented JSON with a trailing newline."""
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


# -- moments.csv --------------------------------------------------------------


def _ci_cols(est: MomentEstimate, flat_index: int) -> list:
    cols = []
    for ci in (est.ci_mean, est.ci_std):
        if ci is None:
            cols += ["", ""]
        else:
            lo, hi = ci
            cols += [_fmt(lo.reshape(-1)[flat_index]), _fmt(hi.reshape(-1)[flat_index])]
    return cols


def write_moments_csv(path: str, grid, est: MomentEstimate) -> None:
    """One row per grid point; two-component 2D fields get a species column.

    Columns: [species,] x [, y], mean, std, ci_mean_lo, ci_mean_hi,
    ci_std_lo, ci_std_hi. Interval columns are empty for methods without
    sampling intervals.
    """
    mean = est.mean
    std = est.std
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(grid, Grid1D):
            if mean.shape != grid.shape:
                raise ValueError(f"field shape {mean.shape} does not match grid {grid.shape}")
            w.writerow(["x", "mean", "std", "ci_mean_lo", "ci_mean_hi", "ci_std_lo", "ci_std_hi"])
            x = grid.points()
            for i in range(grid.n):
                w.writerow([_fmt(x[i]), _fmt(mean[i]), _fmt(std[i])] + _ci_cols(est, i))
        elif isinstance(grid, Grid2D):
            if mean.shape != (2,) + grid.shape:
                raise ValueError(
                    f"field shape {mean.shape} does not match (2,)+{grid.shape}"
                )
            w.writerow(
                ["species", "x", "y", "mean", "std",
                 "ci_mean_lo", "ci_mean_hi", "ci_std_lo", "ci_std_hi"]
            )
            xg, yg = grid.points()
            for s in range(2):
                for i in range(grid.nx):
                    for j in range(grid.ny):
                        flat = s * grid.nx * grid.ny + i * grid.ny + j
                        w.writerow(
                            [SPECIES_NAMES[s], _fmt(xg[i, j]), _fmt(yg[i, j]),
                             _fmt(mean[s, i, j]), _fmt(std[s, i, j])]
                            + _ci_cols(est, flat)
                        )
        else:
            raise TypeError(f"unsupported grid type {type(grid).__name__}")


def load_moments_csv(path: str) -> dict:
    """Columns back as float arrays (empty interval cells become nan);
    the species column, when present, is returned as strings."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {}
    for c, name in enumerate(header):
        col = [r[c] for r in body]
        if name == "species":
            out[name] = np.array(col)
        else:
            out[name] = np.array([float(v) if v != "" else np.nan for v in col])
    return out


def _check_grids_match(ref: dict, other: dict, label: str) -> None:
    keys = [k for k in ("species", "x", "y") if k in ref]
    if keys != [k for k in ("species", "x", "y") if k in other]:
        raise ValueError(f"{label}: grid columns differ from reference")
    if ref["x"].size != other["x"].size:
        raise ValueError(
            f"{label}: {other['x'].size} grid points vs reference {ref['x'].size}"
        )
    for k in keys:
        if k == "species":
            if not np.array_equal(ref[k], other[k]):
                raise ValueError(f"{label}: species layout differs from reference")
        elif not np.allclose(ref[k], other[k], rtol=0.0, atol=1e-12):
            raise ValueError(f"{label}: {k}-coordinates differ from reference")


def _artifact_path(report_path: str, payload: dict, key: str) -> str:
    return os.path.join(os.path.dirname(os.path.abspath(report_path)), payload["artifacts"][key])


def compare_methods(report_paths: list, reference_path: str, out_dir: str) -> dict:
    """Score each run against the reference run (same model and grid).

    Writes comparison.json and comparison.csv in out_dir and returns the
    payload: per method the mean relative error of mean and std fields, the
    wall time, and the speedup relative to the reference run.
    """
    ref_payload = load_report(reference_path)
    ref_moments = load_moments_csv(_artifact_path(reference_path, ref_payload, "moments_csv"))
    with open(_artifact_path(reference_path, ref_payload, "timing_json")) as fh:
        ref_timing = json.load(fh)

    entries = []
    for path in report_paths:
        payload = load_report(path)
        label = payload["method"]["name"]
        if payload["model"]["name"] != ref_payload["model"]["name"]:
            raise ValueError(
                f"{path}: model {payload['model']['name']!r} does not match "
                f"reference {ref_payload['model']['name']!r}"
            )
        moments = load_moments_csv(_artifact_path(path, payload, "moments_csv"))
        _check_grids_match(ref_moments, moments, path)
        with open(_artifact_path(path, payload, "timing_json")) as fh:
            timing = json.load(fh)
        entries.append(
            {
                "report": os.path.abspath(path),
                "method": label,
                "mean_rel_mean_error": relative_field_error(moments["mean"], ref_moments["mean"]),
                "mean_rel_std_error": mean_relative_std_error(moments["std"], ref_moments["std"]),
                "wall_s": float(timing["total_s"]),
                "speedup_vs_reference": float(ref_timing["total_s"]) / float(timing["total_s"]),
                "decision": payload.get("decision"),
            }
        )

    payload = {
        "reference": os.path.abspath(reference_path),
        "reference_method": ref_payload["method"]["name"],
        "model": ref_payload["model"]["name"],
        "entries": entries,
    }
    os.makedirs(out_dir, exist_ok=True)
    write_json(os.path.join(out_dir, "comparison.json"), payload)
    with open(os.path.join(out_dir, "comparison.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["method", "mean_rel_mean_error", "mean_rel_std_error",
             "wall_s", "speedup_vs_reference", "decision"]
        )
        for e in entries:
            w.writerow(
                [e["method"], _fmt(e["mean_rel_mean_error"]), _fmt(e["mean_rel_std_error"]),
                 _fmt(e["wall_s"]), _fmt(e["speedup_vs_reference"]),
                 "" if e["decision"] is None else e["decision"]]
            )
    return payload


# -- SVG plotting -------------------------------------------------------------

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 50
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _svg_open(title: str) -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="24" text-anchor="middle" font-size="15">{title}</text>',
    ]


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


def _axes(parts: list, xlo, xhi, ylo, yhi, xlabel, ylabel):
    x0, x1 = _ML, _W - _MR
    y0, y1 = _H - _MB, _MT
    parts.append(
        f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
        'fill="none" stroke="black"/>'
    )
    for t in _ticks(xlo, xhi):
        px = x0 + (t - xlo) / (xhi - xlo) * (x1 - x0)
        parts.append(f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" y2="{y0 + 4}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{y0 + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(ylo, yhi):
        py = y0 - (t - ylo) / (yhi - ylo) * (y0 - y1)
        parts.append(f'<line x1="{x0 - 4}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 8}" y="{py + 4:.1f}" text-anchor="end">{t:.4g}</text>')
    parts.append(
        f'<text x="{(x0 + x1) / 2}" y="{_H - 12}" text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(y0 + y1) / 2})">{ylabel}</text>'
    )


def _polyline(x, y, xlo, xhi, ylo, yhi, color, dash="") -> str:
    x0, x1 = _ML, _W - _MR
    y0, y1 = _H - _MB, _MT
    pts = " ".join(
        f"{x0 + (xv - xlo) / (xhi - xlo) * (x1 - x0):.2f},"
        f"{y0 - (yv - ylo) / (yhi - ylo) * (y0 - y1):.2f}"
        for xv, yv in zip(x, y)
    )
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>'


def svg_line_plot(path: str, x: np.ndarray, series: list, title: str, xlabel: str, ylabel: str) -> None:
    """series: list of (label, y, dash) drawn over a shared x axis."""
    ys = np.concatenate([np.asarray(y, dtype=float) for _, y, _ in series])
    xlo, xhi = float(np.min(x)), float(np.max(x))
    ylo, yhi = float(np.min(ys)), float(np.max(ys))
    pad = 0.05 * (yhi - ylo if yhi > ylo else max(abs(yhi), 1.0))
    ylo, yhi = ylo - pad, yhi + pad
    parts = _svg_open(title)
    _axes(parts, xlo, xhi, ylo, yhi, xlabel, ylabel)
    for idx, (label, y, dash) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        parts.append(_polyline(x, y, xlo, xhi, ylo, yhi, color, dash))
        lx, ly = _W - _MR - 150, _MT + 16 + 16 * idx
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{lx + 30}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def _heat_color(t: float) -> str:
    """Piecewise-linear 5-stop map from [0, 1] to a perceptual-ish ramp."""
    stops = [
        (0.0, (68, 1, 84)),
        (0.25, (59, 82, 139)),
        (0.5, (33, 145, 140)),
        (0.75, (94, 201, 98)),
        (1.0, (253, 231, 37)),
    ]
    t = min(max(t, 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(stops[:-1], stops[1:]):
        if t <= t1:
            f = (t - t0) / (t1 - t0)
            r, g, b = (round(a + f * (b_ - a)) for a, b_ in zip(c0, c1))
            return f"rgb({r},{g},{b})"
    return "rgb(253,231,37)"


def svg_heatmap(path: str, values: np.ndarray, title: str) -> None:
    """Cell-per-rect heatmap of a (nx, ny) field; value range in the title."""
    values = np.asarray(values, dtype=float)
    nx, ny = values.shape
    vlo, vhi = float(values.min()), float(values.max())
    span = vhi - vlo if vhi > vlo else 1.0
    parts = _svg_open(f"{title} [{vlo:.4g}, {vhi:.4g}]")
    x0, x1 = _ML, _W - _MR
    y0, y1 = _H - _MB, _MT
    cw = (x1 - x0) / nx
    ch = (y0 - y1) / ny
    for i in range(nx):
        for j in range(ny):
            c = _heat_color((values[i, j] - vlo) / span)
            px = x0 + i * cw
            py = y0 - (j + 1) * ch
            parts.append(
                f'<rect x="{px:.2f}" y="{py:.2f}" width="{cw + 0.5:.2f}" '
                f'height="{ch + 0.5:.2f}" fill="{c}"/>'
            )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def svg_bar_chart(path: str, labels: list, values: list, title: str, ylabel: str) -> None:
    vhi = max(max(values), 0.0) or 1.0
    parts = _svg_open(title)
    _axes(parts, 0.0, float(len(labels)), 0.0, vhi * 1.1, "", ylabel)
    x0, x1 = _ML, _W - _MR
    y0, y1 = _H - _MB, _MT
    bw = (x1 - x0) / len(labels)
    for i, (lab, v) in enumerate(zip(labels, values)):
        h = v / (vhi * 1.1) * (y0 - y1)
        px = x0 + i * bw + 0.15 * bw
        parts.append(
            f'<rect x="{px:.1f}" y="{y0 - h:.1f}" width="{0.7 * bw:.1f}" '
            f'height="{h:.1f}" fill="{_PALETTE[i % len(_PALETTE)]}"/>'
        )
        parts.append(
            f'<text x="{x0 + (i + 0.5) * bw:.1f}" y="{y0 + 18}" text-anchor="middle">{lab}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


# -- plot data assembly -------------------------------------------------------


def _nearest_slice_index(y: np.ndarray, target: float) -> int:
    return int(np.argmin(np.abs(y - target)))


def plot_profile(report_path: str, out_prefix: str, slice_y: float | None = None) -> dict:
    """Mean/std profile: the whole domain for 1D runs, the grid row nearest
    slice_y (default: domain midline) for 2D runs. Writes out_prefix.csv and
    out_prefix.svg."""
    payload = load_report(report_path)
    moments = load_moments_csv(_artifact_path(report_path, payload, "moments_csv"))
    if "species" not in moments:
        x = moments["x"]
        cols = {"x": x, "mean": moments["mean"], "std": moments["std"]}
        series = [("mean", moments["mean"], ""), ("std", moments["std"], "")]
        if not np.all(np.isnan(moments["ci_std_lo"])):
            cols["ci_std_lo"] = moments["ci_std_lo"]
            cols["ci_std_hi"] = moments["ci_std_hi"]
            series += [("std CI", moments["ci_std_lo"], "4 3"), ("", moments["ci_std_hi"], "4 3")]
        title = f"{payload['method']['name']} profile"
    else:
        nx = int(payload["model"]["grid"]["nx"])
        ny = int(payload["model"]["grid"]["ny"])
        mask_u = moments["species"] == SPECIES_NAMES[0]
        xs = moments["x"][mask_u].reshape(nx, ny)
        ys = moments["y"][mask_u].reshape(nx, ny)
        if slice_y is None:
            slice_y = 0.5 * (ys.min() + ys.max())
        j = _nearest_slice_index(ys[0], slice_y)
        x = xs[:, j]
        cols = {"x": x}
        series = []
        for s, sp in enumerate(SPECIES_NAMES):
            mask = moments["species"] == sp
            for q in ("mean", "std"):
                field = moments[q][mask].reshape(nx, ny)
                cols[f"{q}_{sp}"] = field[:, j]
            series.append((f"mean {sp}", cols[f"mean_{sp}"], ""))
            series.append((f"std {sp}", cols[f"std_{sp}"], "4 3"))
        title = f"{payload['method']['name']} profile at y={ys[0, j]:.4g}"
    _write_cols_csv(out_prefix + ".csv", cols)
    svg_line_plot(out_prefix + ".svg", cols["x"], series, title, "x", "value")
    return {"csv": out_prefix + ".csv", "svg": out_prefix + ".svg"}


def plot_field(report_path: str, out_prefix: str, quantity: str = "std", species: str = "u") -> dict:
    """2D heatmap of the mean or std field (2D models only)."""
    if quantity not in ("mean", "std"):
        raise ValueError(f"quantity must be 'mean' or 'std', got {quantity!r}")
    payload = load_report(report_path)
    moments = load_moments_csv(_artifact_path(report_path, payload, "moments_csv"))
    if "species" not in moments:
        raise ValueError("field plots need a two-dimensional run")
    if species not in SPECIES_NAMES:
        raise ValueError(f"species must be one of {SPECIES_NAMES}, got {species!r}")
    nx = int(payload["model"]["grid"]["nx"])
    ny = int(payload["model"]["grid"]["ny"])
    mask = moments["species"] == species
    field = moments[quantity][mask].reshape(nx, ny)
    cols = {
        "x": moments["x"][mask],
        "y": moments["y"][mask],
        quantity: moments[quantity][mask],
    }
    _write_cols_csv(out_prefix + ".csv", cols)
    svg_heatmap(
        out_prefix + ".svg", field,
        f"{payload['method']['name']} {quantity}({species})",
    )
    return {"csv": out_prefix + ".csv", "svg": out_prefix + ".svg"}


def plot_bars(report_path: str, out_prefix: str) -> dict:
    """Wall-time breakdown (micro/macro/overhead) of a run."""
    payload = load_report(report_path)
    with open(_artifact_path(report_path, payload, "timing_json")) as fh:
        timing = json.load(fh)
    labels = ["micro", "macro", "overhead"]
    values = [timing["micro_s"], timing["macro_s"], timing["overhead_s"]]
    cols = {"part": np.array(labels), "seconds": np.array(values, dtype=float)}
    _write_cols_csv(out_prefix + ".csv", cols)
    svg_bar_chart(
        out_prefix + ".svg", labels, values,
        f"{payload['method']['name']} wall-time breakdown (total {timing['total_s']:.3g}s)",
        "seconds",
    )
    return {"csv": out_prefix + ".csv", "svg": out_prefix + ".svg"}


def _write_cols_csv(path: str, cols: dict) -> None:
    names = list(cols)
    n = len(next(iter(cols.values())))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i in range(n):
            row = []
            for name in names:
                v = cols[name][i]
                row.append(v if isinstance(v, str) else _fmt(v))
            w.writerow(row)

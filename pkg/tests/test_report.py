"""Reporting: error metrics, CSV/JSON artifacts, SVG plots — Test Suite.

Proves:
 Group 1 — Error metrics
   1.  mean relative error over points above the reference floor
   2.  all-below-floor reference returns 0.0 (deterministic-run case)
   3.  shape mismatch raises

 Group 2 — Artifacts
   4.  moments.csv round-trips 1D fields exactly (full-precision repr)
   5.  moments.csv round-trips 2D two-species fields with CI columns
   6.  absent intervals become empty cells, loaded back as nan
   7.  write_json produces sorted, newline-terminated, numpy-free JSON

 Group 3 — Plots
   8.  line plot / heatmap / bar chart emit parseable SVG with the data
"""

from __future__ import annotations

import json

import numpy as np
import pytest

from musc_up.coupling import Grid1D, Grid2D
from musc_up.moments import MomentEstimate, attach_cis, estimate_moments
from musc_up.report import (
    load_moments_csv,
    mean_relative_std_error,
    relative_field_error,
    svg_bar_chart,
    svg_heatmap,
    svg_line_plot,
    write_json,
    write_moments_csv,
)


# ── Group 1 — Error metrics ──────────────────────────────────────────────────


def test_relative_error_masks_floor():
    ref = np.array([2.0, 0.0, 4.0])
    vals = np.array([2.2, 123.0, 3.0])
    # only points 0 and 2 count: (0.1 + 0.25)/2
    assert relative_field_error(vals, ref) == pytest.approx(0.175, rel=1e-12)


def test_all_reference_below_floor():
    assert mean_relative_std_error(np.ones(5), np.zeros(5)) == 0.0
    assert relative_field_error(np.zeros(3), np.full(3, 1e-13)) == 0.0


def test_shape_mismatch_raises():
    with pytest.raises(ValueError, match="shapes differ"):
        relative_field_error(np.ones(3), np.ones(4))


# ── Group 2 — Artifacts ──────────────────────────────────────────────────────


def test_csv_round_trip_1d(tmp_path):
    grid = Grid1D(n=10, dx=0.1)
    rng = np.random.default_rng(0)
    outputs = rng.random((30, 10)) * 1e-7  # exercise full-precision floats
    est = attach_cis(estimate_moments(outputs), outputs, seed=1)
    path = str(tmp_path / "m.csv")
    write_moments_csv(path, grid, est)
    back = load_moments_csv(path)
    np.testing.assert_array_equal(back["x"], grid.points())
    np.testing.assert_array_equal(back["mean"], est.mean)
    np.testing.assert_array_equal(back["std"], est.std)
    np.testing.assert_array_equal(back["ci_std_lo"], est.ci_std[0])
    np.testing.assert_array_equal(back["ci_std_hi"], est.ci_std[1])


def test_csv_round_trip_2d(tmp_path):
    grid = Grid2D(nx=4, ny=3, lx=2.5, ly=2.5)
    rng = np.random.default_rng(1)
    outputs = rng.random((20, 2, 4, 3))
    est = attach_cis(estimate_moments(outputs), outputs, seed=2)
    path = str(tmp_path / "m2.csv")
    write_moments_csv(path, grid, est)
    back = load_moments_csv(path)
    assert back["species"].tolist() == ["u"] * 12 + ["v"] * 12
    np.testing.assert_array_equal(back["mean"].reshape(2, 4, 3), est.mean)
    np.testing.assert_array_equal(back["std"].reshape(2, 4, 3), est.std)
    xg, _ = grid.points()
    np.testing.assert_array_equal(back["x"][:12].reshape(4, 3), xg)


def test_absent_intervals_become_nan(tmp_path):
    grid = Grid1D(n=5, dx=0.2)
    est = MomentEstimate(mean=np.arange(5.0), std=np.ones(5), n_samples=0)
    path = str(tmp_path / "det.csv")
    write_moments_csv(path, grid, est)
    back = load_moments_csv(path)
    assert np.all(np.isnan(back["ci_mean_lo"]))
    assert np.all(np.isnan(back["ci_std_hi"]))
    np.testing.assert_array_equal(back["mean"], est.mean)


def test_write_json_normalizes(tmp_path):
    path = str(tmp_path / "r.json")
    write_json(path, {"b": np.float64(1.5), "a": np.arange(3), "c": {"k": np.bool_(True)}})
    text = open(path).read()
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    data = json.loads(text)
    assert data == {"a": [0, 1, 2], "b": 1.5, "c": {"k": True}}


# ── Group 3 — Plots ──────────────────────────────────────────────────────────


def test_svg_outputs(tmp_path):
    x = np.linspace(0.0, 1.0, 20)
    line = str(tmp_path / "line.svg")
    svg_line_plot(line, x, [("mean", np.sin(x), ""), ("std", np.cos(x), "4 2")],
                  "profile", "x", "value")
    heat = str(tmp_path / "heat.svg")
    svg_heatmap(heat, np.random.default_rng(0).random((8, 8)), "field")
    bars = str(tmp_path / "bars.svg")
    svg_bar_chart(bars, ["micro", "macro"], [1.5, 0.5], "timing", "seconds")
    for path, token in ((line, "polyline"), (heat, "rect"), (bars, "rect")):
        text = open(path).read()
        assert text.lstrip().startswith("<svg"), path
        assert token in text, f"{path} missing {token}"
        assert text.rstrip().endswith("</svg>"), path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from alsc import raster
from alsc.cloud import from_arrays


def _plane(a, b, n=20, cell=1.0):
    # row 0 is north, so y decreases down the rows
    cols, rows = np.meshgrid(np.arange(n), np.arange(n))
    x, y = cols * cell, (n - 1 - rows) * cell
    return raster.Grid(a * x + b * y, 0.0, 0.0, cell)


def test_flat_grid_is_uniform():
    shade = raster.hillshade(raster.Grid(np.full((8, 9), 12.5), 0, 0, 1.0))
    assert np.ptp(shade.values) == 0
    assert shade.values[0, 0] == pytest.approx(255 * np.cos(np.radians(45)), abs=1e-12)


def test_northwest_slope_brighter():
    # a surface rising to the southeast faces northwest
    nw = raster.hillshade(_plane(0.5, -0.5)).values.mean()
    se = raster.hillshade(_plane(-0.5, 0.5)).values.mean()
    assert nw > se
    assert raster.hillshade(_plane(-0.5, 0.5), azimuth=135).values.mean() > se


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 360), st.floats(5, 85))
def test_plane_shade_matches_cell_formula(a, b, az, el):
    g = raster.hillshade(_plane(a, b, n=5), az, el).values
    # rising northward by b means the southward rate is -b
    assert g[2, 2] == pytest.approx(oracles.hillshade_cell(a, -b, az, el), abs=1e-9)


def test_grid_surface_min_max():
    x = np.array([0.2, 0.4, 1.5, 1.6])
    y = np.array([0.5, 0.5, 0.5, 0.5])
    z = np.array([3.0, 1.0, 7.0, 9.0])
    lo = raster.grid_surface(x, y, z, 1.0, "min", (0, 0, 2, 1))
    hi = raster.grid_surface(x, y, z, 1.0, "max", (0, 0, 2, 1))
    assert lo.values.tolist() == [[1.0, 7.0]] and hi.values.tolist() == [[3.0, 9.0]]
    with pytest.raises(ValueError):
        raster.grid_surface(x, y, z, 0.0)
    with pytest.raises(ValueError):
        raster.grid_surface(x, y, z, -1.0)


def test_fill_nearest():
    v = np.array([[1.0, np.nan, np.nan], [np.nan, np.nan, 5.0]])
    out = raster.fill_nearest(raster.Grid(v, 0, 0, 1)).values
    assert out.tolist() == [[1.0, 1.0, 5.0], [1.0, 5.0, 5.0]]


def test_ascii_roundtrip(tmp_path, rng):
    g = raster.Grid(np.round(rng.normal(size=(4, 6)), 3), 10.0, 20.0, 0.5)
    g.values[1, 2] = np.nan
    g.write(tmp_path / "g.asc")
    text = (tmp_path / "g.asc").read_text()
    assert text.splitlines()[:6] == ["ncols 6", "nrows 4", "xllcorner 10.0", "yllcorner 20.0",
                                     "cellsize 0.5", "NODATA_value -9999"]
    back = raster.Grid.from_ascii(text)
    assert np.allclose(back.values, g.values, equal_nan=True)
    assert (back.x0, back.y0, back.cell) == (10.0, 20.0, 0.5)


def test_cloud_selection(small_scene):
    rows, stat = raster.select_points(small_scene, "ground")
    assert stat == "min" and set(np.unique(small_scene.labels[rows]).tolist()) == {2}
    assert raster.select_points(small_scene, "all")[1] == "max"
    assert raster.select_points(small_scene, "8,13")[1] == "max"
    surface, shade = raster.cloud_hillshade(small_scene, cell=2.0)
    assert not np.isnan(surface.values).any() and shade.values.max() <= 255
    unlabeled = from_arrays(x=[0, 1], y=[0, 1], z=[0, 0])
    with pytest.raises(ValueError):
        raster.select_points(unlabeled, "ground")

import os

import numpy as np
import pytest

from fracfield.data_io import (
    GriddedData,
    SiteTable,
    bin_to_grid,
    fit_quadratic_trend,
    read_site_csv,
    read_surface_csv,
    write_fit_json,
    write_surface_csv,
    write_table_csv,
)
from fracfield.params import FitResult
from fracfield.spectral import GridSpec


def test_read_site_csv_basic(tmp_path):
    p = tmp_path / "sites.csv"
    p.write_text("Latitude,Longitude,Temperature\n10.0,20.0,25.5\n-5.0,140.0,28.1\n0.5,60.0,27.0\n")
    table = read_site_csv(p)
    assert len(table) == 3
    assert table.skipped_rows == 0
    assert table.latitude.tolist() == [10.0, -5.0, 0.5]


def test_read_site_csv_skips_malformed(tmp_path):
    p = tmp_path / "sites.csv"
    p.write_text(
        "Latitude,Longitude,Temperature\n"
        "91.0,20.0,25.5\n"  # latitude out of range
        "10.0,badlon,25.5\n"  # non-numeric
        "10.0,20.0,25.5\n"
        "10.0,20.0\n"  # short row
    )
    table = read_site_csv(p)
    assert len(table) == 1
    assert table.skipped_rows == 3


def test_read_site_csv_whitespace_variant(tmp_path):
    p = tmp_path / "sites.txt"
    p.write_text("Latitude Longitude Temperature\n10.0 20.0 25.5\n11.0 21.0 26.5\n")
    table = read_site_csv(p, delimiter="whitespace")
    assert len(table) == 2


def test_read_site_csv_errors(tmp_path):
    with pytest.raises(OSError):
        read_site_csv(tmp_path / "missing.csv")
    p = tmp_path / "bad.csv"
    p.write_text("A,B,C\n1,2,3\n")
    with pytest.raises(ValueError, match="missing mapped columns"):
        read_site_csv(p)
    p2 = tmp_path / "empty_rows.csv"
    p2.write_text("Latitude,Longitude,Temperature\nxx,yy,zz\n")
    with pytest.raises(ValueError, match="no valid data rows"):
        read_site_csv(p2)


def test_read_site_csv_custom_columns(tmp_path):
    p = tmp_path / "sites.csv"
    p.write_text("lat,lon,sst\n1.0,2.0,3.0\n4.0,5.0,6.0\n")
    table = read_site_csv(p, columns={"latitude": "lat", "longitude": "lon", "value": "sst"})
    assert len(table) == 2


def test_quadratic_trend_exact_parabola():
    table = SiteTable(np.array([-1.0, 0.0, 1.0]), np.zeros(3), np.array([1.0, 0.0, 1.0]))
    a0, a1, a2, resid = fit_quadratic_trend(table)
    assert (a0, a1, a2) == pytest.approx((0.0, 0.0, 1.0), abs=1e-10)
    assert np.max(np.abs(resid)) < 1e-10


def test_quadratic_trend_constant():
    table = SiteTable(np.array([-1.0, 0.0, 1.0, 2.0]), np.zeros(4), np.full(4, 5.5))
    a0, a1, a2, _ = fit_quadratic_trend(table)
    assert (a0, a1, a2) == pytest.approx((5.5, 0.0, 0.0), abs=1e-10)


def test_quadratic_trend_shift_moves_intercept_only():
    rng = np.random.default_rng(0)
    lat = rng.uniform(-60, 20, size=50)
    vals = rng.normal(size=50)
    t1 = SiteTable(lat, np.zeros(50), vals)
    t2 = SiteTable(lat, np.zeros(50), vals + 10.0)
    f1 = fit_quadratic_trend(t1)
    f2 = fit_quadratic_trend(t2)
    assert f2[0] - f1[0] == pytest.approx(10.0, abs=1e-9)
    assert f2[1] == pytest.approx(f1[1], abs=1e-9)
    assert f2[2] == pytest.approx(f1[2], abs=1e-9)
    assert np.max(np.abs(f2[3] - f1[3])) < 1e-9


def test_quadratic_trend_residual_orthogonality():
    rng = np.random.default_rng(1)
    lat = rng.uniform(-67, 21, size=200)
    vals = 2.0 + 0.1 * lat - 0.003 * lat**2 + rng.normal(size=200)
    table = SiteTable(lat, np.zeros(200), vals)
    *_, resid = fit_quadratic_trend(table)
    for basis in (np.ones_like(lat), lat, lat**2):
        assert abs(resid @ basis) <= 1e-8 * np.linalg.norm(resid) * np.linalg.norm(basis)


def test_quadratic_trend_rank_check():
    table = SiteTable(np.array([1.0, 1.0, 2.0]), np.zeros(3), np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError, match="distinct latitudes"):
        fit_quadratic_trend(table)


def test_bin_to_grid_two_in_one_pixel():
    table = SiteTable(np.array([10.2, 10.7]), np.array([20.1, 20.3]), np.array([1.0, 3.0]))
    gd = bin_to_grid(table, (11.0, 9.0, 19.0, 21.0), 2, 2)
    observed = gd.counts > 0
    assert gd.counts.sum() == 2
    assert np.count_nonzero(observed) == 1
    assert gd.values[observed][0] == pytest.approx(2.0)


def test_bin_to_grid_pixel_sizes_argo_box():
    table = SiteTable(np.array([0.0]), np.array([70.0]), np.array([1.0]))
    gd = bin_to_grid(table, (21.0, -67.0, 20.0, 145.0), 128, 180)
    lat_n, lat_s, lon_w, lon_e = gd.grid.bbox
    assert (lat_n - lat_s) / gd.grid.rows == pytest.approx(0.6875)
    assert (lon_e - lon_w) / gd.grid.cols == pytest.approx(125.0 / 180.0)  # 0.69444...


def test_bin_to_grid_conserves_data():
    rng = np.random.default_rng(2)
    n = 500
    table = SiteTable(rng.uniform(-60, 20, n), rng.uniform(25, 140, n), rng.normal(size=n))
    gd = bin_to_grid(table, (21.0, -67.0, 20.0, 145.0), 64, 90)
    assert gd.dropped == 0
    total = np.sum(gd.values * gd.counts)
    assert total == pytest.approx(table.value.sum(), rel=1e-9)


def test_bin_to_grid_edge_rules():
    # north and west edges inclusive; south and east excluded
    table = SiteTable(np.array([10.0, 0.0, 5.0, 5.0]), np.array([0.0, 5.0, 0.0, 10.0]), np.ones(4))
    gd = bin_to_grid(table, (10.0, 0.0, 0.0, 10.0), 2, 2)
    assert gd.dropped == 2  # the lat=0 (south edge) and lon=10 (east edge) points
    grid_counts = gd.counts.reshape((2, 2), order="F")
    assert grid_counts[0, 0] == 1  # lat=10 on the box's north edge stays in row 0
    assert grid_counts[1, 0] == 1  # lat=5 belongs to the pixel whose north edge it is


def test_bin_to_grid_outside_error_mode():
    table = SiteTable(np.array([50.0]), np.array([0.0]), np.array([1.0]))
    with pytest.raises(ValueError, match="outside"):
        bin_to_grid(table, (10.0, 0.0, -10.0, 10.0), 2, 2, on_outside="error")


def test_gridded_data_invariants():
    grid = GridSpec(2, 2)
    with pytest.raises(ValueError):
        GriddedData(grid, values=np.array([1.0, 0, 0, 0]), counts=np.zeros(4, dtype=int))


def test_surface_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    surface = rng.normal(size=(7, 5))
    path = tmp_path / "surf.csv"
    write_surface_csv(surface, path, grid=GridSpec(7, 5, bbox=(10.0, 0.0, 0.0, 5.0)))
    back, meta = read_surface_csv(path)
    assert meta["rows"] == 7 and meta["cols"] == 5
    assert np.max(np.abs(back - surface)) < 1e-10


def test_fit_json_schema(tmp_path):
    fit = FitResult(
        model="fgf",
        estimates={"tau": 1.0, "sigma2": 2.0, "nu": 1.25, "alpha": 0.25},
        std_errors={"tau": 0.1, "sigma2": 0.2, "nu": 0.05, "alpha": 0.01},
        transformed_optimum=np.zeros(4),
        converged=True,
        iterations=12,
        objective_value=34.5,
    )
    path = tmp_path / "fit.json"
    write_fit_json(fit, path)
    import json

    doc = json.loads(path.read_text())
    assert len(doc["estimates"]) == 4 and len(doc["se"]) == 4
    assert doc["converged"] is True


def test_write_to_unwritable_path(tmp_path):
    fit = FitResult(
        model="fld",
        estimates={},
        std_errors=None,
        transformed_optimum=np.zeros(4),
        converged=True,
        iterations=0,
        objective_value=None,
    )
    bad = tmp_path / "no_such_dir" / "fit.json"
    with pytest.raises(OSError):
        write_fit_json(fit, bad)
    with pytest.raises(OSError):
        write_surface_csv(np.zeros((2, 2)), tmp_path / "nope" / "s.csv")
    with pytest.raises(OSError):
        write_table_csv([], ["a"], tmp_path / "nope" / "t.csv")


def test_site_table_validation():
    with pytest.raises(ValueError):
        SiteTable(np.array([100.0]), np.array([0.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        SiteTable(np.array([0.0]), np.array([400.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        SiteTable(np.array([0.0]), np.array([0.0]), np.array([np.nan]))

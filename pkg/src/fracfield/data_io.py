"""Site-table ingestion, latitude trend removal, grid binning, serialization.

File formats
------------
* Site CSV: a header naming at least the mapped columns (default
  ``Latitude, Longitude, Temperature``), one observation per row.  A
  whitespace-delimited variant is accepted with ``delimiter="whitespace"``.
* Surface CSV: one ``# rows=<r> cols=<c> ...`` metadata line, then the
  surface row-major, ten fixed decimals.
* Fit JSON: estimates/se/convergence as produced by the estimators;
  key order and float formatting are deterministic.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .params import FitResult
from .spectral import GridSpec


@dataclass(frozen=True)
class SiteTable:
    """Irregular observations (latitude, longitude, value), one row each."""

    latitude: np.ndarray
    longitude: np.ndarray
    value: np.ndarray
    skipped_rows: int = 0

    def __post_init__(self) -> None:
        lat = np.asarray(self.latitude, dtype=float)
        lon = np.asarray(self.longitude, dtype=float)
        val = np.asarray(self.value, dtype=float)
        if not (lat.shape == lon.shape == val.shape) or lat.ndim != 1:
            raise ValueError("latitude, longitude and value must be equal-length 1-D arrays")
        if lat.size and (np.any(lat < -90.0) or np.any(lat > 90.0)):
            raise ValueError("latitudes must lie in [-90, 90]")
        if lat.size and (np.any(lon < -180.0) or np.any(lon >= 360.0)):
            raise ValueError("longitudes must lie in [-180, 360)")
        if lat.size and not np.all(np.isfinite(val)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "latitude", lat)
        object.__setattr__(self, "longitude", lon)
        object.__setattr__(self, "value", val)

    def __len__(self) -> int:
        return self.latitude.size


@dataclass(frozen=True)
class GriddedData:
    """Pixel-averaged observations on a geographic grid.

    ``values`` are pixel means (exactly 0 where ``counts`` is 0);
    ``counts`` records how many observations fell in each pixel.  Both are
    length-q column-major vectors.
    """

    grid: GridSpec
    values: np.ndarray
    counts: np.ndarray
    dropped: int = 0

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        counts = np.asarray(self.counts, dtype=int)
        if vals.shape != (self.grid.q,) or counts.shape != (self.grid.q,):
            raise ValueError(f"values and counts must have length q={self.grid.q}")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if np.any(vals[counts == 0] != 0.0):
            raise ValueError("values must be exactly 0 at unobserved pixels")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "counts", counts)


DEFAULT_COLUMNS = {"latitude": "Latitude", "longitude": "Longitude", "value": "Temperature"}


def read_site_csv(
    path,
    columns: dict[str, str] | None = None,
    delimiter: str = ",",
) -> SiteTable:
    """Parse a site table, skipping (and counting) malformed rows.

    ``columns`` maps the roles latitude/longitude/value to header names;
    ``delimiter`` is a single character or "whitespace".
    """
    colmap = dict(DEFAULT_COLUMNS)
    if columns:
        colmap.update(columns)

    def rows():
        with open(path, "r", newline="") as fh:
            if delimiter == "whitespace":
                for line in fh:
                    if line.strip():
                        yield line.split()
            else:
                yield from csv.reader(fh, delimiter=delimiter)

    it = rows()
    try:
        header = [h.strip() for h in next(it)]
    except StopIteration:
        raise ValueError(f"{path}: empty file") from None
    try:
        idx = {role: header.index(name) for role, name in colmap.items()}
    except ValueError:
        missing = [name for name in colmap.values() if name not in header]
        raise ValueError(f"{path}: missing mapped columns {missing} in header {header}") from None

    lat, lon, val = [], [], []
    skipped = 0
    for row in it:
        if not row or all(not str(c).strip() for c in row):
            continue
        try:
            la = float(row[idx["latitude"]])
            lo = float(row[idx["longitude"]])
            va = float(row[idx["value"]])
        except (ValueError, IndexError):
            skipped += 1
            continue
        if not (-90.0 <= la <= 90.0) or not (-180.0 <= lo < 360.0) or not np.isfinite(va):
            skipped += 1
            continue
        lat.append(la)
        lon.append(lo)
        val.append(va)
    if not lat:
        raise ValueError(f"{path}: no valid data rows (skipped {skipped})")
    return SiteTable(np.array(lat), np.array(lon), np.array(val), skipped_rows=skipped)


def fit_quadratic_trend(sites: SiteTable) -> tuple[float, float, float, np.ndarray]:
    """OLS of value on (1, latitude, latitude^2).

    Returns (a0, a1, a2, residuals); the design is centered and scaled
    before solving so the normal equations stay well conditioned.
    """
    lat = sites.latitude
    if np.unique(lat).size < 3:
        raise ValueError("need at least three distinct latitudes for a quadratic trend")
    mu = lat.mean()
    sd = lat.std()
    z = (lat - mu) / sd
    design = np.column_stack([np.ones_like(z), z, z * z])
    coef, *_ = np.linalg.lstsq(design, sites.value, rcond=None)
    fitted = design @ coef
    b0, b1, b2 = coef
    a2 = b2 / sd**2
    a1 = b1 / sd - 2.0 * b2 * mu / sd**2
    a0 = b0 - b1 * mu / sd + b2 * mu**2 / sd**2
    return float(a0), float(a1), float(a2), sites.value - fitted


def bin_to_grid(
    sites: SiteTable,
    bbox: tuple[float, float, float, float],
    rows: int,
    cols: int,
    values: np.ndarray | None = None,
    on_outside: str = "drop",
) -> GriddedData:
    """Average observations into the pixels of a (rows x cols) grid.

    ``bbox`` is (lat_north, lat_south, lon_west, lon_east).  Pixels are
    half-open with the north and west edges inclusive, so points exactly
    on the south or east boundary of the box fall outside.  ``values``
    substitutes the site values (e.g. trend residuals).  Points outside
    the box are dropped and counted, or rejected with ``on_outside="error"``.
    """
    lat_n, lat_s, lon_w, lon_e = bbox
    grid = GridSpec(rows, cols, bbox=bbox)
    vals = sites.value if values is None else np.asarray(values, dtype=float)
    if vals.shape != sites.latitude.shape:
        raise ValueError("values must match the site table length")

    d_lat = (lat_n - lat_s) / rows
    d_lon = (lon_e - lon_w) / cols
    i = np.floor((lat_n - sites.latitude) / d_lat).astype(int)
    j = np.floor((sites.longitude - lon_w) / d_lon).astype(int)
    inside = (i >= 0) & (i < rows) & (j >= 0) & (j < cols)
    dropped = int(np.count_nonzero(~inside))
    if dropped and on_outside == "error":
        raise ValueError(f"{dropped} observations fall outside the bounding box")

    flat = i[inside] + rows * j[inside]  # column-major pixel index
    sums = np.bincount(flat, weights=vals[inside], minlength=grid.q)
    counts = np.bincount(flat, minlength=grid.q)
    means = np.zeros(grid.q)
    observed = counts > 0
    means[observed] = sums[observed] / counts[observed]
    return GriddedData(grid=grid, values=means, counts=counts.astype(int), dropped=dropped)


def write_fit_json(fit: FitResult, path) -> None:
    """Serialize a FitResult deterministically (sorted keys, repr floats)."""
    try:
        with open(path, "w") as fh:
            json.dump(fit.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write fit result to {path}: {exc}") from exc


def write_surface_csv(surface: np.ndarray, path, grid: GridSpec | None = None) -> None:
    """Write an (r, c) surface row-major with a metadata header line."""
    surface = np.asarray(surface, dtype=float)
    if surface.ndim != 2:
        raise ValueError(f"surface must be 2-D, got shape {surface.shape}")
    r, c = surface.shape
    meta = f"# rows={r} cols={c}"
    if grid is not None and grid.bbox is not None:
        lat_n, lat_s, lon_w, lon_e = grid.bbox
        meta += f" lat_north={lat_n!r} lat_south={lat_s!r} lon_west={lon_w!r} lon_east={lon_e!r}"
    try:
        with open(path, "w") as fh:
            fh.write(meta + "\n")
            for row in surface:
                fh.write(",".join(f"{x:.10f}" for x in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write surface to {path}: {exc}") from exc


def read_surface_csv(path) -> tuple[np.ndarray, dict]:
    """Read back a surface CSV; returns (array, metadata dict)."""
    with open(path, "r") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing metadata header line")
        meta = {}
        for tok in header[1:].split():
            key, _, raw = tok.partition("=")
            try:
                meta[key] = int(raw)
            except ValueError:
                meta[key] = float(raw)
        data = [[float(x) for x in line.split(",")] for line in fh if line.strip()]
    arr = np.array(data)
    if arr.shape != (meta.get("rows"), meta.get("cols")):
        raise ValueError(f"{path}: data shape {arr.shape} does not match header {meta}")
    return arr, meta


def write_table_csv(rows_iter, header: list[str], path) -> None:
    """Write a tidy table, floats at ten fixed decimals."""

    def fmt(x):
        if isinstance(x, (float, np.floating)):
            return f"{x:.10f}" if np.isfinite(x) else "nan"
        return str(x)

    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows_iter:
                writer.writerow([fmt(x) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write table to {path}: {exc}") from exc


__all__ = [
    "SiteTable",
    "GriddedData",
    "DEFAULT_COLUMNS",
    "read_site_csv",
    "fit_quadratic_trend",
    "bin_to_grid",
    "write_fit_json",
    "write_surface_csv",
    "read_surface_csv",
    "write_table_csv",
]

"""Command-line driver: simulation, fitting, variogram studies, experiments,
and the sea-surface-temperature analysis pipeline.

Commands emit tidy CSV plus a provenance JSON (parameters, seed, version;
never timestamps), so identical invocations produce identical files.

Exit codes: 0 success (including flagged non-convergence), 2 usage,
3 I/O failure, 4 hard numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

from ._threads import configure_threads

configure_threads()

import numpy as np

from . import __version__, data_io, dense_mle, hlik
from .errors import NumericalError
from .params import FgfParams, FldParams
from .simulate import add_noise_and_mean, sample_fgf_sites, sample_fld, select_sites, site_coordinates
from .spectral import GridSpec
from .variograms import (
    continuum_variogram,
    empirical_directional_variogram,
    lattice_variogram_table,
    variogram_gap,
)

MAX_GRID_SIDE = 256
MAX_REPLICATES = 100


def _provenance_path(out: str) -> str:
    root, _ = os.path.splitext(out)
    return root + "_provenance.json"


def _write_provenance(out: str, command: str, seed, params: dict) -> None:
    doc = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "params": params,
    }
    with open(_provenance_path(out), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_uvz(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read a (u, v, value) site CSV written by the simulate command."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        try:
            iu, iv, iz = header.index("u"), header.index("v"), header.index("value")
        except ValueError:
            raise ValueError(f"{path}: expected header with columns u, v, value; got {header}") from None
        u, v, z = [], [], []
        for row in reader:
            if not row:
                continue
            u.append(float(row[iu]))
            v.append(float(row[iv]))
            z.append(float(row[iz]))
    return np.array(u), np.array(v), np.array(z)


def _check_alpha(parser, alpha) -> None:
    if not 0.0 < alpha < 0.5:
        parser.error(f"--alpha must lie strictly inside (0, 0.5), got {alpha}")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args, parser) -> None:
    grid = GridSpec(args.rows, args.cols)
    if args.model == "fld":
        params = FldParams(tau=args.tau, lam=args.lam, nu=args.nu, alpha=args.alpha, kappa=args.kappa)
        field = sample_fld(grid, params, args.seed)
        y = add_noise_and_mean(field.values, args.mu, args.tau, args.seed)
        if args.keep is not None:
            keep = select_sites(grid, args.seed, fraction=args.keep)
            coords = site_coordinates(grid, keep)
            data_io.write_table_csv(
                zip(coords[:, 0], coords[:, 1], y[keep]), ["u", "v", "value"], args.out
            )
        else:
            data_io.write_surface_csv(y.reshape((grid.rows, grid.cols), order="F"), args.out)
        sim_params = {
            "model": "fld",
            "rows": args.rows,
            "cols": args.cols,
            "tau": args.tau,
            "lambda": args.lam,
            "nu": args.nu,
            "alpha": args.alpha,
            "kappa": args.kappa,
            "mu": args.mu,
            "keep": args.keep,
        }
    else:
        idx = select_sites(grid, args.seed, count=args.sites)
        coords = site_coordinates(grid, idx)
        psi = sample_fgf_sites(coords, args.sigma2, args.nu, args.alpha, args.seed)
        y = add_noise_and_mean(psi, args.mu, args.tau, args.seed)
        data_io.write_table_csv(zip(coords[:, 0], coords[:, 1], y), ["u", "v", "value"], args.out)
        sim_params = {
            "model": "fgf",
            "rows": args.rows,
            "cols": args.cols,
            "sites": args.sites,
            "tau": args.tau,
            "sigma2": args.sigma2,
            "nu": args.nu,
            "alpha": args.alpha,
            "mu": args.mu,
        }
    _write_provenance(args.out, "simulate", args.seed, sim_params)
    print(f"wrote {args.out}")


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _summary_line(fit) -> str:
    parts = []
    for key, val in fit.estimates.items():
        se = fit.std_errors.get(key) if fit.std_errors else None
        parts.append(f"{key}={val:.4g}" + (f"±{se:.3g}" if se is not None else ""))
    status = "converged" if fit.converged else "NOT CONVERGED"
    return f"{fit.model}: " + " ".join(parts) + f" ({status}, {fit.iterations} iterations)"


def _load_fld_system(args, parser) -> hlik.HlikSystem:
    with open(args.input) as fh:
        first = fh.readline()
    if first.startswith("#"):
        surface, meta = data_io.read_surface_csv(args.input)
        grid = GridSpec(int(meta["rows"]), int(meta["cols"]))
        values = surface.reshape(-1, order="F")
        counts = np.ones(grid.q, dtype=int)
    else:
        if args.rows is None or args.cols is None:
            parser.error("site-table input requires --rows and --cols")
        u, v, z = _read_uvz(args.input)
        grid = GridSpec(args.rows, args.cols)
        iu = np.round(u).astype(int)
        iv = np.round(v).astype(int)
        if np.any((iu < 0) | (iu >= grid.rows) | (np.abs(u - iu) > 1e-9)):
            raise ValueError("u coordinates must be integer row indices inside the grid")
        if np.any((iv < 0) | (iv >= grid.cols) | (np.abs(v - iv) > 1e-9)):
            raise ValueError("v coordinates must be integer column indices inside the grid")
        flat = iu + grid.rows * iv
        counts = np.bincount(flat, minlength=grid.q)
        sums = np.bincount(flat, weights=z, minlength=grid.q)
        values = np.zeros(grid.q)
        values[counts > 0] = sums[counts > 0] / counts[counts > 0]
    return hlik.build_system(grid, values, counts.astype(int))


def cmd_fit(args, parser) -> None:
    if args.model == "fld":
        system = _load_fld_system(args, parser)
        init = FldParams(tau=args.init_tau, lam=args.init_lam, nu=args.init_nu, alpha=args.init_alpha, kappa=args.kappa)
        fit = hlik.fit_fld(system, init, k=args.probes, seed=args.seed)
    else:
        u, v, z = _read_uvz(args.input)
        init = FgfParams(tau=args.init_tau, sigma2=args.init_sigma2, nu=args.init_nu, alpha=args.init_alpha)
        fit = dense_mle.fit_fgf(np.column_stack([u, v]), z, init)
    data_io.write_fit_json(fit, args.out)
    _write_provenance(
        args.out,
        "fit",
        args.seed,
        {"model": args.model, "input": os.path.basename(args.input), "probes": args.probes},
    )
    print(_summary_line(fit))


# ---------------------------------------------------------------------------
# variogram
# ---------------------------------------------------------------------------


def cmd_variogram(args, parser) -> None:
    rows = []
    if args.mode == "continuum":
        _check_alpha(parser, args.alpha)
        for h in range(0, args.max_lag + 1):
            for k in range(0, args.max_lag + 1):
                val = float(continuum_variogram(h, k, args.sigma2, args.nu, args.alpha))
                rows.append((h, k, float(np.hypot(h, k)), val))
        header = ["h", "k", "lag_distance", "value"]
    elif args.mode == "lattice":
        _check_alpha(parser, args.alpha)
        tab = lattice_variogram_table(args.m, args.sigma2_m, args.nu, args.alpha, args.max_lag, args.n_freq)
        lag = args.max_lag
        for h in range(0, lag + 1):
            for k in range(0, lag + 1):
                rows.append((h, k, float(np.hypot(h, k)), float(tab[lag + h, lag + k])))
        header = ["h", "k", "lag_distance", "value"]
    elif args.mode == "gap":
        nus = [float(s) for s in args.nu_values.split(",")]
        lags = [(h, 0) for h in range(1, args.max_lag + 1)]
        for nu in nus:
            for m in (2, 4, 8):
                for (dist, gap) in variogram_gap(nu, args.alpha, m, lags, args.n_freq):
                    rows.append((nu, m, dist, gap))
        header = ["nu", "m", "lag_distance", "gap"]
    else:  # empirical
        u, v, z = _read_uvz(args.input)
        edges = np.array([float(s) for s in args.bins.split(",")])
        directions = tuple(float(s) for s in args.directions.split(","))
        tables = empirical_directional_variogram(u, v, z, edges, directions, args.angle_tol)
        for d in directions:
            for lag, semiv, count in tables[d]:
                rows.append((d, lag, semiv, int(count)))
        header = ["direction", "lag", "semivariance", "count"]
    data_io.write_table_csv(rows, header, args.out)
    _write_provenance(args.out, "variogram", None, {"mode": args.mode})
    print(f"wrote {args.out} ({len(rows)} rows)")


# ---------------------------------------------------------------------------
# experiment protocols (importable; the CLI and the acceptance suite share them)
# ---------------------------------------------------------------------------


def _rep_seed(seed: int, rep: int) -> int:
    return seed * 100003 + rep


def run_accuracy_experiment(
    replicates: int = 20,
    rows: int = 60,
    cols: int = 60,
    n_sites: int = 1500,
    truth: FgfParams = FgfParams(tau=1.0, sigma2=2.0, nu=1.25, alpha=0.25),
    probes: int = hlik.DEFAULT_PROBES,
    seed: int = 0,
) -> tuple[list[dict], dict]:
    """Continuum-data protocol: simulate the continuum field plus nugget at
    random grid points of a lattice embedding the unit square, fit the dense
    estimator on unit-square coordinates and the lattice estimator on the
    pixel grid, and tabulate estimates, CI coverage, widths, and wall times.
    Returns (per-replicate rows, summary)."""
    grid = GridSpec(rows, cols)
    # Both estimators work in pixel units (lattice refinement m = 1); the
    # matched field precision is the reciprocal of 4^-nu sigma^2.
    lam_init = 4.0**truth.nu / truth.sigma2
    fld_init = FldParams(tau=truth.tau, lam=lam_init, nu=truth.nu, alpha=truth.alpha)
    out_rows = []
    for rep in range(replicates):
        rseed = _rep_seed(seed, rep)
        idx = select_sites(grid, rseed, count=n_sites)
        coords = site_coordinates(grid, idx)
        psi = sample_fgf_sites(coords, truth.sigma2, truth.nu, truth.alpha, rseed)
        y = add_noise_and_mean(psi, truth.mu, truth.tau, rseed)

        t0 = time.perf_counter()
        fgf = dense_mle.fit_fgf(coords, y, truth)
        t_fgf = time.perf_counter() - t0

        counts = np.zeros(grid.q, dtype=int)
        counts[idx] = 1
        values = np.zeros(grid.q)
        values[idx] = y
        system = hlik.build_system(grid, values, counts)
        t0 = time.perf_counter()
        fld = hlik.fit_fld(system, fld_init, k=probes, seed=rseed)
        t_fld = time.perf_counter() - t0

        for model, fit, wall in (("fgf", fgf, t_fgf), ("fld", fld, t_fld)):
            se = fit.std_errors or {}
            row = {
                "rep": rep,
                "model": model,
                "converged": fit.converged,
                "wall_time": wall,
                "nu": fit.estimates["nu"],
                "alpha": fit.estimates["alpha"],
                "tau": fit.estimates["tau"],
                "scale": fit.estimates.get("sigma2", fit.estimates.get("lambda")),
                "se_nu": se.get("nu", np.nan),
                "se_alpha": se.get("alpha", np.nan),
                "se_tau": se.get("tau", np.nan),
            }
            out_rows.append(row)
    summary = summarize_accuracy(out_rows, truth)
    return out_rows, summary


def summarize_accuracy(rows: list[dict], truth: FgfParams) -> dict:
    """Coverage percentages and mean CI widths, Table-1 style, per estimator."""
    z95 = 1.959963984540054
    summary = {}
    for model in ("fgf", "fld"):
        sub = [r for r in rows if r["model"] == model and r["converged"]]
        n_all = sum(1 for r in rows if r["model"] == model)
        stats = {"replicates": n_all, "diverged": n_all - len(sub)}
        if sub:
            for par, true_val in (("nu", truth.nu), ("alpha", truth.alpha)):
                est = np.array([r[par] for r in sub])
                se = np.array([r["se_" + par] for r in sub])
                ok = np.isfinite(se)
                stats[f"median_{par}"] = float(np.median(est))
                stats[f"coverage_{par}"] = float(
                    100.0 * np.mean(np.abs(est[ok] - true_val) <= z95 * se[ok])
                )
                stats[f"width_{par}"] = float(np.mean(2.0 * z95 * se[ok]))
            tau = np.array([r["tau"] for r in sub])
            se_tau = np.array([r["se_tau"] for r in sub])
            ok = np.isfinite(se_tau) & (tau > 0)
            se_log_tau = se_tau[ok] / tau[ok]
            stats["median_tau"] = float(np.median(tau))
            stats["coverage_log_tau"] = float(
                100.0 * np.mean(np.abs(np.log(tau[ok]) - np.log(truth.tau)) <= z95 * se_log_tau)
            )
            stats["width_log_tau"] = float(np.mean(2.0 * z95 * se_log_tau))
            stats["mean_wall_time"] = float(np.mean([r["wall_time"] for r in sub]))
        summary[model] = stats
    return summary


def run_scale_experiment(
    replicates: int = 20,
    rows: int = 128,
    cols: int = 128,
    fraction: float = 0.6,
    truth: FldParams = FldParams(tau=4.0, lam=8.0, nu=1.25, alpha=0.25),
    probes: int = hlik.DEFAULT_PROBES,
    seed: int = 0,
) -> tuple[list[dict], dict]:
    """Lattice-data protocol: simulate the lattice model on a large grid,
    keep a Bernoulli fraction of pixels, and fit matrix-free."""
    grid = GridSpec(rows, cols)
    out_rows = []
    for rep in range(replicates):
        rseed = _rep_seed(seed, rep)
        field = sample_fld(grid, truth, rseed)
        y = add_noise_and_mean(field.values, truth.mu, truth.tau, rseed)
        keep = select_sites(grid, rseed, fraction=fraction)
        counts = np.zeros(grid.q, dtype=int)
        counts[keep] = 1
        values = np.zeros(grid.q)
        values[keep] = y[keep]
        system = hlik.build_system(grid, values, counts)
        t0 = time.perf_counter()
        fit = hlik.fit_fld(system, truth, k=probes, seed=rseed)
        wall = time.perf_counter() - t0
        se = fit.std_errors or {}
        out_rows.append(
            {
                "rep": rep,
                "n": system.n,
                "converged": fit.converged,
                "wall_time": wall,
                "tau": fit.estimates["tau"],
                "lambda": fit.estimates["lambda"],
                "nu": fit.estimates["nu"],
                "alpha": fit.estimates["alpha"],
                "se_tau": se.get("tau", np.nan),
                "se_lambda": se.get("lambda", np.nan),
                "se_nu": se.get("nu", np.nan),
                "se_alpha": se.get("alpha", np.nan),
            }
        )
    summary = summarize_scale(out_rows, truth)
    return out_rows, summary


def summarize_scale(rows: list[dict], truth: FldParams) -> dict:
    conv = [r for r in rows if r["converged"]]
    summary = {"replicates": len(rows), "diverged": len(rows) - len(conv)}
    for par, true_val in (("tau", truth.tau), ("lambda", truth.lam), ("nu", truth.nu), ("alpha", truth.alpha)):
        est = np.array([r[par] for r in conv])
        if est.size:
            summary[f"median_{par}"] = float(np.median(est))
            summary[f"median_rel_bias_{par}"] = float(np.median(est) / true_val - 1.0)
    if conv:
        summary["mean_wall_time"] = float(np.mean([r["wall_time"] for r in conv]))
        summary["max_wall_time"] = float(np.max([r["wall_time"] for r in conv]))
    return summary


def cmd_experiment(args, parser) -> None:
    if args.rows > MAX_GRID_SIDE or args.cols > MAX_GRID_SIDE:
        parser.error(f"grid side capped at {MAX_GRID_SIDE} for experiments")
    if args.replicates > MAX_REPLICATES:
        parser.error(f"replicates capped at {MAX_REPLICATES}")
    if args.which == "accuracy":
        truth = FgfParams(tau=args.tau, sigma2=args.sigma2, nu=args.nu, alpha=args.alpha)
        rows, summary = run_accuracy_experiment(
            replicates=args.replicates,
            rows=args.rows,
            cols=args.cols,
            n_sites=args.sites,
            truth=truth,
            probes=args.probes,
            seed=args.seed,
        )
        header = list(rows[0].keys())
        data_io.write_table_csv([[r[k] for k in header] for r in rows], header, args.out)
        exp_params = {"which": "accuracy", "truth": vars(truth) | {}, "sites": args.sites}
    else:
        all_rows = []
        summary = {}
        for nu in [float(s) for s in args.nu_values.split(",")]:
            truth = FldParams(tau=args.tau, lam=args.lam, nu=nu, alpha=args.alpha)
            rows, summ = run_scale_experiment(
                replicates=args.replicates,
                rows=args.rows,
                cols=args.cols,
                fraction=args.fraction,
                truth=truth,
                probes=args.probes,
                seed=args.seed,
            )
            for r in rows:
                r["nu_true"] = nu
            all_rows.extend(rows)
            summary[f"nu={nu}"] = summ
        header = list(all_rows[0].keys())
        data_io.write_table_csv([[r[k] for k in header] for r in all_rows], header, args.out)
        exp_params = {"which": "scale", "tau": args.tau, "lambda": args.lam, "nu_values": args.nu_values}
    root, _ = os.path.splitext(args.out)
    with open(root + "_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_provenance(args.out, "experiment", args.seed, exp_params)
    print(json.dumps(summary, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# argo pipeline
# ---------------------------------------------------------------------------


def run_argo_pipeline(
    input_path: str,
    out_dir: str,
    bbox: tuple[float, float, float, float] = (21.0, -67.0, 20.0, 145.0),
    rows: int = 128,
    cols: int = 180,
    probes: int = hlik.DEFAULT_PROBES,
    seed: int = 0,
    fgf_init: FgfParams | None = None,
    fld_init: FldParams | None = None,
    skip_fgf: bool = False,
) -> dict:
    """Trend removal, directional variograms, both fits, kriged surface."""
    os.makedirs(out_dir, exist_ok=True)
    results: dict = {}

    stage = "read input"
    try:
        table = data_io.read_site_csv(input_path)
        results["n_sites"] = len(table)

        stage = "quadratic trend"
        a0, a1, a2, resid = data_io.fit_quadratic_trend(table)
        results["trend"] = {"a0": a0, "a1": a1, "a2": a2}
        with open(os.path.join(out_dir, "trend.json"), "w") as fh:
            json.dump(results["trend"], fh, indent=2, sort_keys=True)
            fh.write("\n")

        stage = "directional variograms"
        max_dist = 0.35 * float(
            np.hypot(table.latitude.max() - table.latitude.min(), table.longitude.max() - table.longitude.min())
        )
        edges = np.linspace(0.0, max_dist, 14)
        # u = longitude (east), v = latitude (north): 90 degrees runs south-north.
        tables = empirical_directional_variogram(table.longitude, table.latitude, resid, edges)
        vg_rows = []
        for d in (0.0, 45.0, 90.0, 135.0):
            for lag, semiv, count in tables[d]:
                vg_rows.append((d, lag, semiv, int(count)))
        data_io.write_table_csv(vg_rows, ["direction", "lag", "semivariance", "count"], os.path.join(out_dir, "variogram_empirical.csv"))

        if not skip_fgf:
            stage = "continuum fit"
            init = fgf_init or FgfParams(tau=3.0, sigma2=0.3, nu=1.4, alpha=0.1)
            sites = np.column_stack([table.latitude, table.longitude])
            fgf_fit = dense_mle.fit_fgf(sites, resid, init)
            data_io.write_fit_json(fgf_fit, os.path.join(out_dir, "fit_fgf.json"))
            results["fgf"] = fgf_fit.to_json_dict()
            print(_summary_line(fgf_fit))

        stage = "grid binning"
        gridded = data_io.bin_to_grid(table, bbox, rows, cols, values=resid)
        results["observed_fraction"] = float(np.mean(gridded.counts > 0))

        stage = "lattice fit"
        init_fld = fld_init or FldParams(tau=3.0, lam=10.0, nu=1.4, alpha=0.1)
        system = hlik.build_system(gridded.grid, gridded.values, gridded.counts)
        fld_fit = hlik.fit_fld(system, init_fld, k=probes, seed=seed)
        data_io.write_fit_json(fld_fit, os.path.join(out_dir, "fit_fld.json"))
        results["fld"] = fld_fit.to_json_dict()
        print(_summary_line(fld_fit))

        stage = "kriged surface"
        surface = hlik.krige_surface(fld_fit, system, trend=(a0, a1, a2))
        data_io.write_surface_csv(surface, os.path.join(out_dir, "surface.csv"), grid=gridded.grid)
        geometry = {
            "rows": rows,
            "cols": cols,
            "lat_north": bbox[0],
            "lat_south": bbox[1],
            "lon_west": bbox[2],
            "lon_east": bbox[3],
        }
        with open(os.path.join(out_dir, "surface_geometry.json"), "w") as fh:
            json.dump(geometry, fh, indent=2, sort_keys=True)
            fh.write("\n")

        _write_provenance(
            os.path.join(out_dir, "pipeline.json"),
            "argo",
            seed,
            {"bbox": list(bbox), "rows": rows, "cols": cols, "probes": probes, "input": os.path.basename(input_path)},
        )
    except (ValueError, NumericalError, OSError) as exc:
        raise type(exc)(f"[stage: {stage}] {exc}") from exc
    return results


def cmd_argo(args, parser) -> None:
    bbox = tuple(float(s) for s in args.bbox.split(","))
    if len(bbox) != 4:
        parser.error("--bbox must be lat_north,lat_south,lon_west,lon_east")
    results = run_argo_pipeline(
        args.input,
        args.out_dir,
        bbox=bbox,
        rows=args.rows,
        cols=args.cols,
        probes=args.probes,
        seed=args.seed,
        skip_fgf=args.skip_fgf,
    )
    print(f"observed pixel fraction: {100.0 * results['observed_fraction']:.2f}%")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _require_input(parser, path):
    if not os.path.exists(path):
        parser.error(f"input file not found: {path}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracfield", description=__doc__)
    parser.add_argument("--version", action="version", version=f"fracfield {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a field sample and write it to CSV")
    p.add_argument("--model", choices=("fld", "fgf"), required=True)
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=64)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="lattice precision scale (fld)")
    p.add_argument("--sigma2", type=float, default=1.0, help="continuum field scale (fgf)")
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sites", type=int, default=1000, help="number of sites (fgf)")
    p.add_argument("--keep", type=float, default=None, help="keep this Bernoulli fraction of pixels (fld)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit either estimator to a data file")
    p.add_argument("--model", choices=("fld", "fgf"), required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--rows", type=int, default=None, help="grid rows (fld site-table input)")
    p.add_argument("--cols", type=int, default=None)
    p.add_argument("--init-tau", type=float, default=1.0)
    p.add_argument("--init-lambda", dest="init_lam", type=float, default=4.0)
    p.add_argument("--init-sigma2", type=float, default=1.0)
    p.add_argument("--init-nu", type=float, default=1.5)
    p.add_argument("--init-alpha", type=float, default=0.25)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--probes", type=int, default=hlik.DEFAULT_PROBES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("variogram", help="emit variogram tables as CSV")
    p.add_argument("--mode", choices=("continuum", "lattice", "gap", "empirical"), required=True)
    p.add_argument("--nu", type=float, default=1.5)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--sigma2-m", dest="sigma2_m", type=float, default=1.0)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--max-lag", type=int, default=20)
    p.add_argument("--n-freq", type=int, default=4096)
    p.add_argument("--nu-values", default="1.2,1.4,1.5,1.6,1.8", help="gap mode sweep")
    p.add_argument("--input", default=None, help="site CSV (empirical mode)")
    p.add_argument("--bins", default="0,1,2,3,4,5,6,8,10,12,15,20", help="lag bin edges (empirical)")
    p.add_argument("--directions", default="0,45,90,135")
    p.add_argument("--angle-tol", type=float, default=22.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_variogram)

    p = sub.add_parser("experiment", help="run the replication protocols")
    p.add_argument("--which", choices=("accuracy", "scale"), required=True)
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--rows", type=int, default=None)
    p.add_argument("--cols", type=int, default=None)
    p.add_argument("--sites", type=int, default=1500, help="observed sites (accuracy)")
    p.add_argument("--fraction", type=float, default=0.6, help="kept fraction (scale)")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--sigma2", type=float, default=2.0)
    p.add_argument("--lambda", dest="lam", type=float, default=8.0)
    p.add_argument("--nu", type=float, default=1.25)
    p.add_argument("--nu-values", default="1.25,1.5", help="truth sweep (scale)")
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--probes", type=int, default=hlik.DEFAULT_PROBES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("argo", help="sea-surface-temperature pipeline on a site CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--bbox", default="21,-67,20,145", help="lat_north,lat_south,lon_west,lon_east")
    p.add_argument("--rows", type=int, default=128)
    p.add_argument("--cols", type=int, default=180)
    p.add_argument("--probes", type=int, default=hlik.DEFAULT_PROBES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-fgf", action="store_true", help="skip the dense continuum fit")
    p.set_defaults(func=cmd_argo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    # usage-level validation beyond argparse types
    if args.command in ("simulate", "fit", "experiment"):
        alpha = getattr(args, "alpha", None)
        if alpha is not None and args.command != "fit":
            _check_alpha(parser, alpha)
    if args.command == "experiment":
        if args.rows is None:
            args.rows = 60 if args.which == "accuracy" else 128
        if args.cols is None:
            args.cols = args.rows
        if args.tau is None:
            args.tau = 1.0 if args.which == "accuracy" else 4.0
    if args.command in ("fit", "argo"):
        _require_input(parser, args.input)
    if args.command == "variogram" and args.mode == "empirical":
        if args.input is None:
            parser.error("empirical mode requires --input")
        _require_input(parser, args.input)

    try:
        args.func(args, parser)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

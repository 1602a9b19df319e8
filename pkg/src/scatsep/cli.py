"""Command-line front end.

Subcommands:

* ``validate``   -- check a configuration and report every violation.
* ``run-single`` -- fit all configured methods at one frequency; write a
  summary table, field slices (truth, per-method estimate, normalized
  error) and per-method reconstructions on the evaluation grid.
* ``run-sweep``  -- run the frequency sweep and write one long-format CSV.

Exit codes: 0 success, 1 configuration error, 2 numeric failure. All CSV
files use fixed headers, 9-significant-digit decimals and atomic writes, so
identical configurations and seeds produce byte-identical outputs.

KRR has a single regularization parameter; it is reported in the
``lambda1`` column and ``lambda2`` is left empty.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    with_overrides,
)
from .estimators import SingularSystemError
from .fields import point_source_field
from .scenario import (
    GridSearchResult,
    _FrequencyWorkspace,
    frequency_sweep,
    grid_search,
    nmse_db,
)

__all__ = ["main", "run_single", "run_sweep"]

SUMMARY_HEADER = "frequency_hz,method,truncation_order,weighting,lambda1,lambda2,nmse_db,status"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.9g}"


def _write_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv(path: str, header: str, rows) -> None:
    lines = [header]
    lines.extend(",".join(row) for row in rows)
    _write_atomic(path, "\n".join(lines) + "\n")


def _field_csv_rows(points, values):
    for p, v in zip(points, values):
        yield (_fmt(p[0]), _fmt(p[1]), _fmt(p[2]), _fmt(v.real), _fmt(v.imag),
               _fmt(abs(v)))


def _slice_points(spec, region_radius) -> np.ndarray:
    n = spec.points_per_axis()
    half = spec.extent / 2.0
    axis_vals = -half + spec.resolution * np.arange(n)
    u, v = np.meshgrid(axis_vals, axis_vals, indexing="ij")
    flat_u, flat_v = u.ravel(), v.ravel()
    fixed = np.full_like(flat_u, spec.value)
    cols = {
        "x": (fixed, flat_u, flat_v),
        "y": (flat_u, fixed, flat_v),
        "z": (flat_u, flat_v, fixed),
    }[spec.axis]
    return np.stack(cols, axis=1)


def _summary_row(result: GridSearchResult | None, frequency, method, order, status):
    if result is None:
        return (_fmt(frequency), method.label, _fmt(order),
                method.weighting or "", "", "", "", status)
    lam1 = result.reg if method.kind == "krr" else result.reg_incident
    lam2 = None if method.kind == "krr" else result.reg_scatter
    return (_fmt(frequency), method.label, _fmt(result.truncation_order),
            method.weighting or "", _fmt(lam1), _fmt(lam2),
            _fmt(result.nmse_db), status)


def _render_heatmap(path, points, values, spec, region_radius, title, log_scale=False):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n = spec.points_per_axis()
    img = np.asarray(values, dtype=float).reshape(n, n)
    half = spec.extent / 2.0
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    mesh = ax.imshow(
        img.T,
        origin="lower",
        extent=(-half, half, -half, half),
        cmap="magma" if log_scale else "viridis",
    )
    # intersection of the spherical target region with the slice plane
    circle_r2 = region_radius**2 - spec.value**2
    if circle_r2 > 0.0:
        circle = plt.Circle(
            (0.0, 0.0), np.sqrt(circle_r2), fill=False, linestyle="--", color="white"
        )
        ax.add_patch(circle)
    in_plane = [a for a in "xyz" if a != spec.axis]
    ax.set_xlabel(f"{in_plane[0]} (m)")
    ax.set_ylabel(f"{in_plane[1]} (m)")
    ax.set_title(title)
    fig.colorbar(mesh, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def run_single(config: ExperimentConfig, frequency: float, heatmap: bool = False) -> int:
    """Fit every configured method at one frequency and write outputs.

    Returns the number of methods that were fitted successfully.
    """
    problems = config.violations()
    if problems:
        raise ConfigError("; ".join(problems))
    scenario = config.scenario
    out_dir = config.output.directory
    os.makedirs(out_dir, exist_ok=True)

    ws = _FrequencyWorkspace(scenario, frequency)
    slice_spec = config.output.slice
    slice_pts = _slice_points(slice_spec, scenario.region_radius)
    k = scenario.wavenumber(frequency)
    source = np.asarray(scenario.source, dtype=float)
    slice_truth = point_source_field(source, k, slice_pts)
    mean_truth_sq = float(np.mean(np.abs(slice_truth) ** 2))

    _write_csv(
        os.path.join(out_dir, "slice_truth.csv"),
        "x,y,z,re,im,mag",
        _field_csv_rows(slice_pts, slice_truth),
    )
    _write_csv(
        os.path.join(out_dir, "grid_truth.csv"),
        "x,y,z,re,im",
        (row[:5] for row in _field_csv_rows(ws.grid.positions, ws.truth)),
    )
    if heatmap or config.output.heatmap:
        _render_heatmap(
            os.path.join(out_dir, "heatmap_truth.png"),
            slice_pts, np.abs(slice_truth), slice_spec, scenario.region_radius,
            f"|incident| truth, {frequency:g} Hz",
        )

    summary_rows = []
    n_ok = 0
    for method in config.methods:
        order = (None if method.kind == "krr"
                 else scenario.truncation_order(frequency, method.truncation_multiplier))
        try:
            res = grid_search(scenario, frequency, method, config.exponents, workspace=ws)
        except (SingularSystemError, np.linalg.LinAlgError) as exc:
            summary_rows.append(
                _summary_row(None, frequency, method, order, f"failed: {exc}")
            )
            continue
        n_ok += 1
        summary_rows.append(_summary_row(res, frequency, method, order, "ok"))

        label = method.label
        est_slice = res.estimator.predict(slice_pts)
        _write_csv(
            os.path.join(out_dir, f"slice_{label}.csv"),
            "x,y,z,re,im,mag",
            _field_csv_rows(slice_pts, est_slice),
        )
        nerr = np.abs(slice_truth - est_slice) ** 2 / mean_truth_sq
        _write_csv(
            os.path.join(out_dir, f"error_{label}.csv"),
            "x,y,z,normalized_error",
            ((_fmt(p[0]), _fmt(p[1]), _fmt(p[2]), _fmt(e))
             for p, e in zip(slice_pts, nerr)),
        )
        est_grid = ws.K_cross @ res.estimator.alpha_
        _write_csv(
            os.path.join(out_dir, f"grid_{label}.csv"),
            "x,y,z,re,im",
            (row[:5] for row in _field_csv_rows(ws.grid.positions, est_grid)),
        )
        if heatmap or config.output.heatmap:
            _render_heatmap(
                os.path.join(out_dir, f"heatmap_{label}.png"),
                slice_pts, np.abs(est_slice), slice_spec, scenario.region_radius,
                f"|incident| {label}, {frequency:g} Hz",
            )
            _render_heatmap(
                os.path.join(out_dir, f"heatmap_error_{label}.png"),
                slice_pts, 10.0 * np.log10(np.maximum(nerr, 1e-30)),
                slice_spec, scenario.region_radius,
                f"normalized error (dB) {label}, {frequency:g} Hz",
                log_scale=True,
            )

    _write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_HEADER, summary_rows)
    return n_ok


def run_sweep(config: ExperimentConfig, threads: int = 1) -> int:
    """Run the frequency sweep and write sweep.csv; returns ok-cell count."""
    problems = config.violations()
    if problems:
        raise ConfigError("; ".join(problems))
    os.makedirs(config.output.directory, exist_ok=True)
    records = frequency_sweep(
        config.scenario, list(config.methods), config.exponents, threads=threads
    )
    rows = []
    for rec in records:
        rows.append(
            (_fmt(rec.frequency), rec.method, _fmt(rec.truncation_order),
             rec.weighting or "", _fmt(rec.reg_incident), _fmt(rec.reg_scatter),
             _fmt(rec.nmse_db), rec.status)
        )
    _write_csv(os.path.join(config.output.directory, "sweep.csv"),
               SUMMARY_HEADER, rows)
    return sum(1 for rec in records if rec.status == "ok")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scatsep",
        description="Incident sound field estimation with scattering separation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("validate", "check the configuration and report violations"),
        ("run-single", "run all methods at one frequency and write slices"),
        ("run-sweep", "run the frequency sweep and write sweep.csv"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="configuration file (defaults apply if omitted)")
        p.add_argument("--out", help="output directory (overrides [output] directory)")
        p.add_argument("--seed", type=int, help="noise seed (overrides [scenario] noise_seed)")
        p.add_argument("--threads", type=int, default=1, help="parallel sweep workers")
        if name == "run-single":
            p.add_argument("--frequency", type=float, default=300.0,
                           help="frequency in Hz (default 300)")
            p.add_argument("--heatmap", action="store_true",
                           help="also render heatmap PNGs")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else ExperimentConfig()
        config = with_overrides(config, out_dir=args.out, seed=args.seed)

        if args.command == "validate":
            problems = config.violations()
            for p in problems:
                print(f"violation: {p}")
            if problems:
                return 1
            print("configuration ok")
            return 0

        if args.command == "run-single":
            n_ok = run_single(config, args.frequency, heatmap=args.heatmap)
            if n_ok == 0:
                print("all methods failed", file=sys.stderr)
                return 2
            print(f"wrote outputs for {n_ok} method(s) to {config.output.directory}")
            return 0

        if args.command == "run-sweep":
            n_ok = run_sweep(config, threads=max(1, args.threads))
            if n_ok == 0:
                print("all sweep cells failed", file=sys.stderr)
                return 2
            print(f"wrote sweep.csv ({n_ok} ok cells) to {config.output.directory}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (SingularSystemError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands cover the full pipeline: simulate drying data (dry-sim),
identify a reduced model (identify), roll a model forward under an
input schedule (rom-run), score a model against reference snapshots
(compare) and export its spectrum (eig). Every command writes a
manifest.json next to its outputs recording arguments, output files
and wall-clock timings.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import dmdc as _dmdc
from . import dryer, objective, rom, store
from .exceptions import OmdcError
from .grassmann import CgOptions

PROG = "omdc"


def _log(cmd, message):
    print(f"[{cmd}] {message}", file=sys.stderr)


def _manifest_path(out):
    if os.path.isdir(out) or not os.path.splitext(out)[1]:
        return os.path.join(out, "manifest.json")
    return f"{out}.manifest.json"


def _write_manifest(out, command, arguments, outputs, timings, extra=None):
    payload = {
        "command": command,
        "arguments": arguments,
        "outputs": outputs,
        "timings_s": timings,
    }
    if extra:
        payload.update(extra)
    path = _manifest_path(out)
    store.write_json(path, payload)
    return path


def _field_means(snapshot_block, layout):
    if layout:
        return [(f"{span.name}_mean", snapshot_block[span.start : span.stop].mean(axis=0))
                for span in layout]
    return [("state_mean", snapshot_block.mean(axis=0))]


# ---------------------------------------------------------------------------
# subcommands


def cmd_dry_sim(args):
    t0 = time.perf_counter()
    overrides = {}
    if args.config:
        overrides = store.read_json(args.config)
    config = dryer.config_from_dict(overrides)
    cli_over = {}
    if args.t_end is not None:
        cli_over["t_end"] = args.t_end
    if args.dt is not None:
        cli_over["dt"] = args.dt
    if args.sample_interval is not None:
        cli_over["sample_interval"] = args.sample_interval
    if cli_over:
        config = dryer.config_from_dict(cli_over, base=config)

    g = config.grid
    _log("dry-sim", f"grid {g.nx}x{g.ny}x{g.nz}, t_end {config.t_end} s, dt {config.dt} s")
    snap, audit = dryer.simulate_with_audit(config)
    store.save_snapshots(args.out, snap)
    # plot-ready schedule so rom-run can replay without touching U.mat
    store.write_input_csv(
        os.path.join(args.out, "U.csv"),
        snap.u,
        snap.dt_sample,
        names=["temperature_amb", "vapor_density_amb"],
    )
    total = time.perf_counter() - t0
    _log(
        "dry-sim",
        f"{audit.n_steps} steps in {audit.wall_time_s:.2f} s "
        f"({audit.per_step_ms:.3f} ms/step); snapshots {snap.s.shape[0]} x {snap.s.shape[1]}",
    )
    _write_manifest(
        args.out,
        "dry-sim",
        {"config": config.to_dict()},
        ["S.mat", "U.mat", "U.csv", store.SNAPSHOT_META],
        {
            "total": total,
            "simulate": audit.wall_time_s,
            "per_step": audit.per_step_ms / 1e3,
        },
        extra={"audit": audit.to_dict(), "shape": list(snap.s.shape)},
    )
    return 0


def cmd_identify(args):
    t0 = time.perf_counter()
    snap = store.load_snapshots(args.snapshots)
    if args.normalize and snap.norm_spec is None:
        snap = store.normalize_fields(snap)
    _log(
        "identify",
        f"{args.method} rank {args.rank} on {snap.s.shape[0]} x {snap.s.shape[1]} snapshots",
    )
    t_fit = time.perf_counter()
    if args.method == "dmdc":
        x, y = store.split_snapshots(snap.s)
        reduced = _dmdc.dmdc_reduced(x, y, snap.u, args.rank, rtol=args.rtol)
        model = _dmdc.as_rom(
            reduced,
            dt_sample=snap.dt_sample,
            norm_spec=snap.norm_spec,
            field_layout=snap.field_layout,
            solver_info={"method": "dmdc"},
        )
        solver_summary = {"method": "dmdc"}
    else:
        opts = CgOptions(
            max_iters=args.max_iters,
            grad_tol=args.grad_tol,
            rel_cost_tol=args.rel_cost_tol,
            restart_period=args.restart_period,
        )
        model, report = objective.omdc_identify(snap, args.rank, opts)
        solver_summary = {
            "method": "omdc",
            "iterations": report.iterations,
            "termination": report.termination,
            "final_cost": report.final_cost,
            "final_grad_norm": report.final_grad_norm,
        }
        _log(
            "identify",
            f"converged in {report.iterations} iterations "
            f"({report.termination}), cost {report.final_cost:.6e}",
        )
    fit_time = time.perf_counter() - t_fit
    rom.save_model(args.out, model)
    _log("identify", f"wrote model to {args.out}")
    _write_manifest(
        args.out,
        "identify",
        {
            "snapshots": args.snapshots,
            "method": args.method,
            "rank": args.rank,
            "normalize": args.normalize,
        },
        ["L.mat", "M.mat", "P.mat", rom.MODEL_META],
        {"total": time.perf_counter() - t0, "fit": fit_time},
        extra={"solver": solver_summary},
    )
    return 0


def _load_x0(args, model):
    if args.x0_snapshots:
        ref = store.load_snapshots(args.x0_snapshots)
        ref = store.denormalize_fields(ref)
        col = args.x0_col
        if not 0 <= col < ref.s.shape[1]:
            raise OmdcError(
                f"--x0-col {col} out of range for {ref.s.shape[1]} snapshots"
            )
        return ref.s[:, col]
    x0 = store.load_matrix(args.x0_mat)
    if x0.shape[1] != 1:
        raise OmdcError(f"--x0-mat must hold one column, got {x0.shape}")
    return x0[:, 0]


def cmd_rom_run(args):
    t0 = time.perf_counter()
    model = rom.load_model(args.model)
    u, dt_u, _names = store.read_input_csv(args.inputs)
    if u.shape[1] >= 2 and abs(dt_u - model.dt_sample) > 1e-9 * model.dt_sample:
        raise OmdcError(
            f"input schedule dt {dt_u} does not match model dt {model.dt_sample}"
        )
    x0 = _load_x0(args, model)
    t_run = time.perf_counter()
    traj = rom.simulate(model, x0, u)
    lifted = rom.lift(model, traj.coeffs)
    run_time = time.perf_counter() - t_run
    series = _field_means(lifted, model.field_layout)
    store.write_trajectory_csv(args.out, traj.times, series)
    per_step = run_time / max(1, u.shape[1])
    _log(
        "rom-run",
        f"{u.shape[1]} steps of order-{model.order} model in {run_time:.4f} s "
        f"({per_step * 1e3:.4f} ms/step)",
    )
    _write_manifest(
        args.out,
        "rom-run",
        {
            "model": args.model,
            "inputs": args.inputs,
            "x0_snapshots": args.x0_snapshots,
            "x0_mat": args.x0_mat,
            "x0_col": args.x0_col,
        },
        [os.path.basename(args.out)],
        {"total": time.perf_counter() - t0, "run": run_time, "per_step": per_step},
    )
    return 0


def cmd_compare(args):
    t0 = time.perf_counter()
    model = rom.load_model(args.model)
    ref = store.load_snapshots(args.snapshots)
    fields = args.fields.split(",") if args.fields else None
    result = rom.compare(model, ref, fields=fields)
    rows = [
        (name, result.rel_rms[name], result.mean_rel_rms[name], result.max_abs_err[name])
        for name in result.field_names
    ]
    store.write_metrics_csv(args.out, rows)
    stem, ext = os.path.splitext(args.out)
    series_path = f"{stem}_series{ext or '.csv'}"
    series = []
    for name in result.field_names:
        series.append((f"{name}_mean_ref", result.ref_means[name]))
        series.append((f"{name}_mean_rom", result.rom_means[name]))
    store.write_trajectory_csv(series_path, result.times, series)
    for name in result.field_names:
        _log(
            "compare",
            f"{name}: rel RMS {result.rel_rms[name]:.4e}, "
            f"max abs err {result.max_abs_err[name]:.4e}",
        )
    _write_manifest(
        args.out,
        "compare",
        {"model": args.model, "snapshots": args.snapshots, "fields": args.fields},
        [os.path.basename(args.out), os.path.basename(series_path)],
        {"total": time.perf_counter() - t0},
        extra={
            "rel_rms": result.rel_rms,
            "mean_rel_rms": result.mean_rel_rms,
            "max_abs_err": result.max_abs_err,
        },
    )
    return 0


def cmd_eig(args):
    t0 = time.perf_counter()
    model = rom.load_model(args.model)
    spec = rom.eigenvalues(model.dynamics)
    store.write_spectrum_csv(args.out, spec.values)
    radius = float(np.abs(spec.values).max()) if spec.values.size else 0.0
    _log("eig", f"{spec.values.size} eigenvalues, spectral radius {radius:.6f}")
    _write_manifest(
        args.out,
        "eig",
        {"model": args.model},
        [os.path.basename(args.out)],
        {"total": time.perf_counter() - t0},
        extra={"spectral_radius": radius},
    )
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Reduced-order model identification with control inputs, "
        "plus a finite-volume wood-chip drying simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dry-sim", help="simulate a drying run and store snapshots")
    p.add_argument("--config", help="JSON file overriding the default scenario")
    p.add_argument("--out", required=True, help="output snapshot directory")
    p.add_argument("--t-end", type=float, default=None, help="override end time (s)")
    p.add_argument("--dt", type=float, default=None, help="override time step (s)")
    p.add_argument(
        "--sample-interval", type=float, default=None, help="override sampling (s)"
    )
    p.set_defaults(func=cmd_dry_sim)

    p = sub.add_parser("identify", help="fit a reduced model to snapshots")
    p.add_argument("--snapshots", required=True, help="snapshot directory")
    p.add_argument("--method", choices=("dmdc", "omdc"), default="omdc")
    p.add_argument("--rank", type=int, required=True, help="model order r")
    p.add_argument("--out", required=True, help="output model directory")
    p.add_argument(
        "--no-normalize",
        dest="normalize",
        action="store_false",
        help="skip per-field normalization before fitting",
    )
    p.add_argument("--rtol", type=float, default=None, help="SVD rank tolerance (dmdc)")
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--grad-tol", type=float, default=1e-8)
    p.add_argument("--rel-cost-tol", type=float, default=1e-6)
    p.add_argument("--restart-period", type=int, default=0)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("rom-run", help="roll a model forward under an input schedule")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--inputs", required=True, help="input schedule CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--x0-snapshots", help="snapshot directory supplying x0")
    src.add_argument("--x0-mat", help="matrix file holding x0 as one column")
    p.add_argument("--x0-col", type=int, default=0, help="snapshot column for x0")
    p.add_argument("--out", required=True, help="output trajectory CSV")
    p.set_defaults(func=cmd_rom_run)

    p = sub.add_parser("compare", help="score a model against reference snapshots")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--snapshots", required=True, help="reference snapshot directory")
    p.add_argument("--fields", default=None, help="comma-separated field subset")
    p.add_argument("--out", required=True, help="output metrics CSV")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("eig", help="export a model's reduced-dynamics spectrum")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--out", required=True, help="output spectrum CSV")
    p.set_defaults(func=cmd_eig)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OmdcError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

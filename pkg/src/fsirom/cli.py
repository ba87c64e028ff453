"""Command line pipeline: reference run, compression, reduced runs, figures.

    fsirom hf   --config run.ini --out runs/hf
    fsirom pod  --snapshots runs/hf --n-max 50 --out runs/pod
    fsirom rom  --variant 2 --n 10:50:10 --basis runs/pod --out runs/rom
    fsirom plot --in runs/rom --out runs/figures

The environment variable FSIROM_WORKERS caps how many worker processes a
reduced sweep may use (default 1); timed sweeps always run serially.
"""

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import analysis, plots, rom, storage
from .errors import NonConvergence, SingularSaddle
from .hifi import Operators, run
from .meshfe import build_mesh, build_system
from .problem import load_config, params_summary, RunSetup


def _setup_from(config_path):
    if config_path is None:
        return RunSetup()
    return load_config(config_path)


def _fesys_for(setup):
    mesh = build_mesh(setup.nx, setup.ny, setup.params.L, setup.params.h_f)
    return build_system(mesh)


def _config_dict(setup):
    cfg = params_summary(setup.params)
    cfg.update({"nx": setup.nx, "ny": setup.ny,
                "p_in_amplitude": setup.p_in_amplitude})
    return cfg


def cmd_hf(args):
    tic = time.perf_counter()
    setup = _setup_from(args.config)
    fesys = _fesys_for(setup)
    try:
        traj = run(setup.params, fesys, boundary=setup.boundary)
    except NonConvergence as exc:
        print(f"hf: {exc}", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    written = storage.save_trajectory(args.out, traj, setup)
    inputs = {} if args.config is None else {"config": args.config}
    storage.write_manifest(args.out, "hf", inputs, _config_dict(setup),
                           written, time.perf_counter() - tic)
    print(f"hf: {traj.n_steps} steps on a {setup.nx}x{setup.ny} mesh, "
          f"mean subiterations {traj.iters.mean():.2f} -> {args.out}")
    return 0


def cmd_pod(args):
    tic = time.perf_counter()
    traj, setup = storage.load_trajectory(args.snapshots)
    fesys = _fesys_for(setup)
    bases, _ = rom.build_bases(traj, fesys, setup.params, setup.boundary,
                               n_max=args.n_max)
    os.makedirs(args.out, exist_ok=True)
    written = storage.save_bases(args.out, bases, setup, args.snapshots,
                                 args.n_max)
    storage.write_manifest(args.out, "pod", {"snapshots": args.snapshots},
                           _config_dict(setup), written,
                           time.perf_counter() - tic)
    ranks = ", ".join(f"{tag}={bases[tag].rank}" for tag in sorted(bases))
    print(f"pod: retained {ranks} -> {args.out}")
    return 0


def _parse_n_list(text):
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(
                "mode sweep must look like start:stop:step")
        start, stop, step = (int(p) for p in parts)
        if start < 1 or stop < start or step < 1:
            raise argparse.ArgumentTypeError(
                f"bad mode sweep {text!r}")
        return list(range(start, stop + 1, step))
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("mode count must be positive")
    return [n]


def _truncate_bases(bases, n_top):
    """Cap every basis at n_top columns before projecting."""
    from .pod import PODBasis

    out = {}
    for tag, basis in bases.items():
        keep = min(n_top, basis.rank)
        out[tag] = PODBasis(field=tag, modes=basis.modes[:, :keep].copy(),
                            sigma=basis.sigma)
    return out


def _project(basis_dir, variant, n_top):
    bases, setup, meta = storage.load_bases(basis_dir)
    bases = _truncate_bases(bases, n_top)
    fesys = _fesys_for(setup)
    ops = Operators(fesys, setup.params, setup.boundary)
    if variant == 1:
        model = rom.project_rom1(bases, ops)
    else:
        model = rom.project_rom2(bases, ops)
    return model, setup, meta, fesys


def _run_one(model, n, hf_traj, fesys):
    rtraj = rom.run_online(model, n)
    err = analysis.relative_errors(hf_traj, model, rtraj, fesys)
    perf = analysis.speedup(hf_traj, rtraj)
    return err, perf


def _sweep_worker(packed):
    basis_dir, variant, n = packed
    model, setup, meta, fesys = _project(basis_dir, variant, n)
    hf_traj, _ = storage.load_trajectory(meta["snapshots_dir"])
    try:
        err, perf = _run_one(model, n, hf_traj, fesys)
    except (SingularSaddle, NonConvergence) as exc:
        return n, None, None, str(exc)
    return n, err, perf, None


def cmd_rom(args):
    tic = time.perf_counter()
    ns = args.n
    workers = 1 if args.timed else max(
        1, int(os.environ.get("FSIROM_WORKERS", "1")))

    model, setup, meta, fesys = _project(args.basis, args.variant, max(ns))
    hf_traj, _ = storage.load_trajectory(meta["snapshots_dir"])

    errors, perfs = [], []
    skipped = 0
    if workers > 1 and len(ns) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                _sweep_worker,
                [(args.basis, args.variant, n) for n in ns]))
        for n, err, perf, failure in results:
            if failure is not None:
                print(f"rom: N={n} skipped: {failure}", file=sys.stderr)
                skipped += 1
                continue
            errors.append(err)
            perfs.append(perf)
    else:
        for n in ns:
            try:
                err, perf = _run_one(model, n, hf_traj, fesys)
            except (SingularSaddle, NonConvergence) as exc:
                print(f"rom: N={n} skipped: {exc}", file=sys.stderr)
                skipped += 1
                continue
            errors.append(err)
            perfs.append(perf)

    os.makedirs(args.out, exist_ok=True)
    written = [
        storage.write_csv(os.path.join(args.out, "rom_error.csv"),
                          storage.ERROR_HEADER, storage.error_rows(errors)),
        storage.write_csv(os.path.join(args.out, "rom_perf.csv"),
                          storage.PERF_HEADER, storage.perf_rows(perfs)),
    ]
    written += storage.save_model(
        os.path.join(args.out, f"model_v{args.variant}"), model, setup)
    storage.write_manifest(
        args.out, "rom",
        {"basis": args.basis, "snapshots": meta["snapshots_dir"]},
        _config_dict(setup), written, time.perf_counter() - tic)
    for perf in perfs:
        print(f"rom: variant {perf.variant} N={perf.n} "
              f"it_avg={perf.it_avg:.2f} speedup={perf.speedup_total:.1f}")
    # A partially completed sweep still writes its results but exits nonzero.
    return 1 if skipped else 0


def cmd_plot(args):
    tic = time.perf_counter()
    written = plots.plot_all(args.in_dir, args.out)
    inputs = {
        name: os.path.join(args.in_dir, name)
        for name in ("pod_spectrum.csv", "rom_error.csv", "rom_perf.csv")
        if os.path.exists(os.path.join(args.in_dir, name))
    }
    storage.write_manifest(args.out, "plot", inputs, {}, written,
                           time.perf_counter() - tic)
    print(f"plot: {len(written)} figures -> {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fsirom",
        description="Coupled channel-flow / elastic-wall solver and its "
                    "projection-based reduced models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_hf = sub.add_parser("hf", help="run the reference solver")
    p_hf.add_argument("--config", default=None,
                      help="INI run description (defaults apply when omitted)")
    p_hf.add_argument("--out", required=True, help="output directory")
    p_hf.set_defaults(func=cmd_hf)

    p_pod = sub.add_parser("pod", help="compress a reference run")
    p_pod.add_argument("--snapshots", required=True,
                       help="directory written by 'fsirom hf'")
    p_pod.add_argument("--n-max", type=int, required=True,
                       help="cap on stored modes per field")
    p_pod.add_argument("--out", required=True, help="output directory")
    p_pod.set_defaults(func=cmd_pod)

    p_rom = sub.add_parser("rom", help="run reduced models")
    p_rom.add_argument("--variant", type=int, choices=(1, 2), required=True)
    p_rom.add_argument("--n", type=_parse_n_list, required=True,
                       help="mode count, or an inclusive sweep start:stop:step")
    p_rom.add_argument("--basis", required=True,
                       help="directory written by 'fsirom pod'")
    p_rom.add_argument("--out", required=True, help="output directory")
    p_rom.add_argument("--timed", action="store_true",
                       help="serial run for trustworthy timings")
    p_rom.set_defaults(func=cmd_rom)

    p_plot = sub.add_parser("plot", help="render figures from report CSVs")
    p_plot.add_argument("--in", dest="in_dir", required=True,
                        help="directory holding the report CSVs")
    p_plot.add_argument("--out", required=True, help="output directory")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

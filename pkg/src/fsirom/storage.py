"""On-disk formats: snapshot matrices, CSV reports, run manifests.

Matrices use a small binary container (magic ``SNAPMAT1``, two little-endian
u64 dimensions, row-major float64 payload).  CSV files are comma separated
with a header row, LF line endings and floats rendered as ``%.12e``.  Every
pipeline command writes a ``manifest.json`` recording its inputs, resolved
configuration and the SHA-256 of each produced file.
"""

import hashlib
import json
import os
import struct

import numpy as np

from .errors import UsageError
from .problem import dump_config, load_config

MAGIC = b"SNAPMAT1"


def write_snapmat(path, array):
    """Write a 2D float64 matrix; returns the path."""
    array = np.asarray(array, dtype=float)
    if array.ndim == 1:
        array = array[:, None]
    if array.ndim != 2:
        raise UsageError(f"snapshot matrices are 2D, got shape {array.shape}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", array.shape[0], array.shape[1]))
        fh.write(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return path


def read_snapmat(path):
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise UsageError(f"{path}: not a snapshot matrix (bad magic)")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        payload = fh.read()
    expected = rows * cols * 8
    if len(payload) != expected:
        raise UsageError(
            f"{path}: truncated payload ({len(payload)} bytes, "
            f"expected {expected})")
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy()


def _render(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.12e" % float(value)
    return str(value)


def write_csv(path, header, rows):
    """Comma separated file with header, LF endings, %.12e floats."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_render(v) for v in row) + "\n")
    return path


def read_csv(path):
    """Header list and string-valued rows of a CSV written by write_csv."""
    with open(path, "r", newline="\n") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        return [], []
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, command, inputs, config, outputs, wall_time_s):
    """Record what a command produced; outputs are paths inside out_dir."""
    entry = {
        "command": command,
        "inputs": {k: os.path.abspath(v) for k, v in inputs.items()},
        "config": config,
        "wall_time_s": wall_time_s,
        "outputs": {
            os.path.relpath(p, out_dir): sha256_file(p) for p in sorted(outputs)
        },
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", newline="\n") as fh:
        json.dump(entry, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def verify_manifest(out_dir):
    """List of (file, problem) pairs; empty when everything checks out."""
    path = os.path.join(out_dir, "manifest.json")
    with open(path) as fh:
        entry = json.load(fh)
    issues = []
    for rel, digest in entry.get("outputs", {}).items():
        full = os.path.join(out_dir, rel)
        if not os.path.exists(full):
            issues.append((rel, "missing"))
        elif sha256_file(full) != digest:
            issues.append((rel, "hash mismatch"))
    return issues


def save_trajectory(out_dir, traj, setup):
    """Snapshot files, step log and resolved config of one reference run."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, cols in (("u", traj.u), ("p", traj.p), ("eta", traj.eta),
                       ("lambda", traj.lam)):
        if cols is None:
            continue
        written.append(write_snapmat(
            os.path.join(out_dir, f"{name}.snap"), cols))
    rows = [
        (k + 1, traj.times[k], int(traj.iters[k]),
         traj.t_explicit[k], traj.t_implicit[k])
        for k in range(traj.n_steps)
    ]
    written.append(write_csv(
        os.path.join(out_dir, "trajectory.csv"),
        ["k", "t", "iters", "t_explicit_s", "t_implicit_s"], rows))
    cfg = os.path.join(out_dir, "run_config.ini")
    with open(cfg, "w", newline="\n") as fh:
        fh.write(dump_config(setup))
    written.append(cfg)
    return written


def load_trajectory(run_dir):
    """Rebuild (trajectory, setup) from a reference run directory."""
    from .hifi import Trajectory

    setup = load_config(os.path.join(run_dir, "run_config.ini"))
    fields = {}
    for name in ("u", "p", "eta", "lambda"):
        path = os.path.join(run_dir, f"{name}.snap")
        fields[name] = read_snapmat(path) if os.path.exists(path) else None
    header, rows = read_csv(os.path.join(run_dir, "trajectory.csv"))
    if header != ["k", "t", "iters", "t_explicit_s", "t_implicit_s"]:
        raise UsageError(f"unexpected trajectory.csv header: {header}")
    times = np.array([float(r[1]) for r in rows])
    iters = np.array([int(r[2]) for r in rows], dtype=np.int64)
    t_expl = np.array([float(r[3]) for r in rows])
    t_impl = np.array([float(r[4]) for r in rows])
    traj = Trajectory(times=times, u=fields["u"], p=fields["p"],
                      eta=fields["eta"], lam=fields["lambda"],
                      iters=iters, t_explicit=t_expl, t_implicit=t_impl)
    return traj, setup


def spectrum_rows(bases):
    """CSV rows of the full singular spectra of a basis dict."""
    rows = []
    for tag in sorted(bases):
        basis = bases[tag]
        fractions = basis.energy_fractions()
        cumulative = basis.cumulative_energy()
        for i, sigma in enumerate(basis.sigma):
            rows.append((tag, i, sigma, fractions[i], cumulative[i]))
    return rows


def save_bases(out_dir, bases, setup, snapshots_dir, n_max):
    """Basis matrices, spectra and provenance of one compression run."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for tag, basis in bases.items():
        written.append(write_snapmat(
            os.path.join(out_dir, f"basis_{tag}.snap"), basis.modes))
    written.append(write_csv(
        os.path.join(out_dir, "pod_spectrum.csv"),
        ["field", "index", "sigma", "energy_fraction", "cumulative_energy"],
        spectrum_rows(bases)))
    meta = {
        "snapshots_dir": os.path.abspath(snapshots_dir),
        "n_max": n_max,
        "ranks": {tag: bases[tag].rank for tag in sorted(bases)},
    }
    meta_path = os.path.join(out_dir, "pod_meta.json")
    with open(meta_path, "w", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(meta_path)
    cfg = os.path.join(out_dir, "run_config.ini")
    with open(cfg, "w", newline="\n") as fh:
        fh.write(dump_config(setup))
    written.append(cfg)
    return written


def load_bases(basis_dir):
    """Rebuild (bases, setup, meta) from a compression directory.

    Spectra come back from pod_spectrum.csv, which stores 12 significant
    digits; mode matrices are bit-exact.
    """
    from .pod import PODBasis

    setup = load_config(os.path.join(basis_dir, "run_config.ini"))
    with open(os.path.join(basis_dir, "pod_meta.json")) as fh:
        meta = json.load(fh)
    header, rows = read_csv(os.path.join(basis_dir, "pod_spectrum.csv"))
    if header[:3] != ["field", "index", "sigma"]:
        raise UsageError(f"unexpected pod_spectrum.csv header: {header}")
    sigma = {}
    for row in rows:
        sigma.setdefault(row[0], []).append(float(row[2]))
    bases = {}
    for tag in meta["ranks"]:
        modes = read_snapmat(os.path.join(basis_dir, f"basis_{tag}.snap"))
        bases[tag] = PODBasis(field=tag, modes=modes,
                              sigma=np.array(sigma.get(tag, [])))
    return bases, setup, meta


def save_model(out_dir, model, setup):
    """Projected blocks, bases and lifting of one reduced model."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, block in model.blocks.items():
        written.append(write_snapmat(
            os.path.join(out_dir, f"block_{name}.snap"), block))
    for tag, basis in model.bases.items():
        written.append(write_snapmat(
            os.path.join(out_dir, f"basis_{tag}.snap"), basis.modes))
        written.append(write_snapmat(
            os.path.join(out_dir, f"sigma_{tag}.snap"), basis.sigma))
    written.append(write_snapmat(
        os.path.join(out_dir, "lifting.snap"), model.ell))
    aux = "lambda" if model.variant == 1 else "eta"
    vel = "u" if model.variant == 1 else "z"
    written.append(write_csv(
        os.path.join(out_dir, "reduced_meta.csv"),
        ["variant", "n_vel", "n_p", "n_eta", "n_aux"],
        [(model.variant, model.ranks[vel], model.ranks["p"],
          model.ranks["eta"], model.ranks[aux])]))
    cfg = os.path.join(out_dir, "run_config.ini")
    with open(cfg, "w", newline="\n") as fh:
        fh.write(dump_config(setup))
    written.append(cfg)
    return written


def load_model(model_dir):
    """Rebuild a ReducedModel saved by save_model."""
    from .pod import PODBasis
    from .rom import ReducedModel

    setup = load_config(os.path.join(model_dir, "run_config.ini"))
    header, rows = read_csv(os.path.join(model_dir, "reduced_meta.csv"))
    if header != ["variant", "n_vel", "n_p", "n_eta", "n_aux"]:
        raise UsageError(f"unexpected reduced_meta.csv header: {header}")
    variant = int(rows[0][0])
    blocks = {}
    bases = {}
    for entry in sorted(os.listdir(model_dir)):
        full = os.path.join(model_dir, entry)
        if entry.startswith("block_") and entry.endswith(".snap"):
            blocks[entry[len("block_"):-len(".snap")]] = read_snapmat(full)
        elif entry.startswith("basis_") and entry.endswith(".snap"):
            tag = entry[len("basis_"):-len(".snap")]
            sigma = read_snapmat(
                os.path.join(model_dir, f"sigma_{tag}.snap")).ravel()
            bases[tag] = PODBasis(field=tag, modes=read_snapmat(full),
                                  sigma=sigma)
    ell = read_snapmat(os.path.join(model_dir, "lifting.snap")).ravel()
    tags = ("u", "p", "eta", "lambda") if variant == 1 else ("z", "p", "eta")
    ranks = {tag: bases[tag].rank for tag in tags}
    return ReducedModel(variant=variant, params=setup.params,
                        boundary=setup.boundary, ell=ell,
                        bases=bases, blocks=blocks, ranks=ranks), setup


def error_rows(reports):
    return [(r.variant, r.n, r.err_u, r.err_p, r.err_eta, r.err_stress,
             r.err_u_max, r.err_p_max, r.err_eta_max) for r in reports]


ERROR_HEADER = ["variant", "N", "err_u", "err_p", "err_eta", "err_stress",
                "err_u_max", "err_p_max", "err_eta_max"]


def perf_rows(reports):
    return [(r.variant, r.n, r.cond_explicit, r.it_max, r.it_avg,
             r.t_explicit_s, r.t_implicit_s, r.t_total_s, r.speedup_total)
            for r in reports]


PERF_HEADER = ["variant", "N", "cond_explicit", "it_max", "it_avg",
               "t_explicit_s", "t_implicit_s", "t_total_s", "speedup_total"]

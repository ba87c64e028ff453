"""Report figures rendered from the pipeline CSV files.

All figures are written as SVG with a fixed hash salt and no embedded
timestamp, so rerunning on the same inputs reproduces the bytes exactly.
"""

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .storage import read_csv  # noqa: E402

plt.rcParams.update({
    "svg.hashsalt": "fsirom",
    "figure.figsize": (6.0, 4.0),
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
})

_FIELD_LABELS = {
    "u": "velocity", "p": "pressure", "eta": "displacement",
    "lambda": "interface reaction", "z": "shifted velocity",
}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _spectrum_table(path):
    header, rows = read_csv(path)
    by_field = defaultdict(list)
    for row in rows:
        entry = dict(zip(header, row))
        by_field[entry["field"]].append(
            (int(entry["index"]), float(entry["sigma"]),
             float(entry["cumulative_energy"])))
    for field in by_field:
        by_field[field].sort()
    return by_field


def plot_spectrum(spectrum_csv, out_path):
    """Singular values per field, log scale."""
    table = _spectrum_table(spectrum_csv)
    fig, ax = plt.subplots()
    for field in sorted(table):
        idx = [i + 1 for i, _, _ in table[field]]
        sig = [s for _, s, _ in table[field]]
        ax.plot(idx, sig, marker=".", markersize=3, linewidth=1,
                label=_FIELD_LABELS.get(field, field))
    ax.set_yscale("log")
    ax.set_xlabel("mode index")
    ax.set_ylabel("singular value")
    if table:
        ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, out_path)


def plot_energy(spectrum_csv, out_path):
    """Cumulative energy fraction against retained mode count."""
    table = _spectrum_table(spectrum_csv)
    fig, ax = plt.subplots()
    for field in sorted(table):
        idx = [i + 1 for i, _, _ in table[field]]
        cum = [c for _, _, c in table[field]]
        ax.plot(idx, cum, linewidth=1,
                label=_FIELD_LABELS.get(field, field))
    ax.set_xlabel("retained modes")
    ax.set_ylabel("cumulative energy fraction")
    ax.set_ylim(0.0, 1.05)
    if table:
        ax.legend(fontsize=8, loc="lower right")
    fig.tight_layout()
    return _save(fig, out_path)


def _by_variant(path):
    header, rows = read_csv(path)
    table = defaultdict(list)
    for row in rows:
        entry = dict(zip(header, row))
        table[int(entry["variant"])].append(entry)
    for variant in table:
        table[variant].sort(key=lambda e: int(e["N"]))
    return table


def plot_errors(error_csv, out_path):
    """Time-averaged relative errors against basis size, both variants."""
    table = _by_variant(error_csv)
    fig, ax = plt.subplots()
    styles = {1: "--", 2: "-"}
    for variant in sorted(table):
        ns = [int(e["N"]) for e in table[variant]]
        for key, label in (("err_u", "velocity"), ("err_p", "pressure"),
                           ("err_eta", "displacement")):
            ax.plot(ns, [float(e[key]) for e in table[variant]],
                    styles.get(variant, "-"), marker="o", markersize=3,
                    linewidth=1, label=f"{label} (variant {variant})")
    ax.set_yscale("log")
    ax.set_xlabel("modes per field N")
    ax.set_ylabel("relative error")
    if table:
        ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, out_path)


def plot_conditioning(perf_csv, out_path):
    table = _by_variant(perf_csv)
    fig, ax = plt.subplots()
    for variant in sorted(table):
        ns = [int(e["N"]) for e in table[variant]]
        cond = [float(e["cond_explicit"]) for e in table[variant]]
        ax.plot(ns, cond, marker="o", markersize=3, linewidth=1,
                label=f"variant {variant}")
    ax.set_yscale("log")
    ax.set_xlabel("modes per field N")
    ax.set_ylabel("condition number of the explicit system")
    if table:
        ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, out_path)


def plot_iterations(perf_csv, out_path):
    table = _by_variant(perf_csv)
    fig, ax = plt.subplots()
    for variant in sorted(table):
        ns = [int(e["N"]) for e in table[variant]]
        ax.plot(ns, [float(e["it_avg"]) for e in table[variant]],
                marker="o", markersize=3, linewidth=1,
                label=f"average, variant {variant}")
        ax.plot(ns, [int(e["it_max"]) for e in table[variant]],
                "--", marker="s", markersize=3, linewidth=1,
                label=f"max, variant {variant}")
    ax.set_xlabel("modes per field N")
    ax.set_ylabel("subiterations per step")
    if table:
        ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, out_path)


def plot_speedup(perf_csv, out_path):
    table = _by_variant(perf_csv)
    fig, ax = plt.subplots()
    for variant in sorted(table):
        ns = [int(e["N"]) for e in table[variant]]
        ax.plot(ns, [float(e["speedup_total"]) for e in table[variant]],
                marker="o", markersize=3, linewidth=1,
                label=f"variant {variant}")
    ax.set_yscale("log")
    ax.set_xlabel("modes per field N")
    ax.set_ylabel("wall-time speedup over the reference run")
    if table:
        ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, out_path)


def plot_all(in_dir, out_dir):
    """Render every figure whose input CSV is present; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    spectrum = os.path.join(in_dir, "pod_spectrum.csv")
    if os.path.exists(spectrum):
        written.append(plot_spectrum(
            spectrum, os.path.join(out_dir, "pod_sigma.svg")))
        written.append(plot_energy(
            spectrum, os.path.join(out_dir, "pod_energy.svg")))
    errors = os.path.join(in_dir, "rom_error.csv")
    if os.path.exists(errors):
        written.append(plot_errors(
            errors, os.path.join(out_dir, "rom_error.svg")))
    perf = os.path.join(in_dir, "rom_perf.csv")
    if os.path.exists(perf):
        written.append(plot_conditioning(
            perf, os.path.join(out_dir, "rom_cond.svg")))
        written.append(plot_iterations(
            perf, os.path.join(out_dir, "rom_iters.svg")))
        written.append(plot_speedup(
            perf, os.path.join(out_dir, "rom_speedup.svg")))
    return written

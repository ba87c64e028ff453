"""End-to-end command line pipeline on a deliberately tiny run."""

import argparse
import os
import subprocess
import sys

import numpy as np
import pytest

from fsirom import cli, storage
from fsirom.errors import SingularSaddle

NX, NY, K = 12, 2, 20

TINY_INI = f"""[time]
dt = 1e-4
K = {K}

[mesh]
nx = {NX}
ny = {NY}
"""


@pytest.fixture(scope="module")
def stages(tmp_path_factory):
    """One hf -> pod -> rom -> plot chain shared by the read-only tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "run.ini"
    cfg.write_text(TINY_INI)
    dirs = {
        "root": root, "cfg": cfg, "hf": root / "hf", "pod": root / "pod",
        "rom": root / "rom", "figs": root / "figs",
    }
    assert cli.main(["hf", "--config", str(cfg),
                     "--out", str(dirs["hf"])]) == 0
    assert cli.main(["pod", "--snapshots", str(dirs["hf"]), "--n-max", "10",
                     "--out", str(dirs["pod"])]) == 0
    assert cli.main(["rom", "--variant", "2", "--n", "2:6:2",
                     "--basis", str(dirs["pod"]),
                     "--out", str(dirs["rom"])]) == 0
    assert cli.main(["plot", "--in", str(dirs["rom"]),
                     "--out", str(dirs["figs"])]) == 0
    return dirs


class TestHf:
    def test_outputs_and_manifest(self, stages):
        names = set(os.listdir(stages["hf"]))
        assert {"u.snap", "p.snap", "eta.snap", "lambda.snap",
                "trajectory.csv", "run_config.ini",
                "manifest.json"} <= names
        assert storage.verify_manifest(stages["hf"]) == []

    def test_snapshot_dimensions(self, stages):
        # Quadratic scalar dofs per component and linear pressure dofs
        # follow directly from the structured mesh resolution.
        n_q = (2 * NX + 1) * (2 * NY + 1)
        shapes = {
            "u": (2 * n_q, K),
            "p": ((NX + 1) * (NY + 1), K),
            "eta": (2 * NX + 1, K),
            "lambda": (2 * NX + 1, K),
        }
        for name, shape in shapes.items():
            mat = storage.read_snapmat(stages["hf"] / f"{name}.snap")
            assert mat.shape == shape, name

    def test_zero_amplitude_gives_zero_snapshots(self, tmp_path):
        cfg = tmp_path / "quiet.ini"
        cfg.write_text(TINY_INI + "\n[physics]\np_in_amplitude = 0\n")
        out = tmp_path / "hf0"
        assert cli.main(["hf", "--config", str(cfg),
                         "--out", str(out)]) == 0
        for name in ("u", "p", "eta", "lambda"):
            mat = storage.read_snapmat(out / f"{name}.snap")
            assert np.all(mat == 0.0), name

    def test_nonconvergence_exits_nonzero(self, tmp_path, capsys):
        cfg = tmp_path / "capped.ini"
        cfg.write_text(TINY_INI + "\n[solver]\nmax_implicit_iters = 2\n")
        rc = cli.main(["hf", "--config", str(cfg),
                       "--out", str(tmp_path / "hf")])
        assert rc == 1
        err = capsys.readouterr().err
        assert "did not converge at step 1" in err


class TestPod:
    def test_outputs_and_ranks(self, stages):
        names = set(os.listdir(stages["pod"]))
        assert {"pod_spectrum.csv", "pod_meta.json", "run_config.ini",
                "manifest.json"} <= names
        assert storage.verify_manifest(stages["pod"]) == []
        bases, _, meta = storage.load_bases(stages["pod"])
        assert set(bases) == {"u", "p", "eta", "lambda", "z"}
        for tag, basis in bases.items():
            assert 1 <= basis.rank <= 10, tag
            assert meta["ranks"][tag] == basis.rank

    def test_n_max_one_keeps_single_modes(self, stages, tmp_path):
        out = tmp_path / "pod1"
        assert cli.main(["pod", "--snapshots", str(stages["hf"]),
                         "--n-max", "1", "--out", str(out)]) == 0
        for tag in ("u", "p", "eta", "lambda", "z"):
            mat = storage.read_snapmat(out / f"basis_{tag}.snap")
            assert mat.shape[1] == 1, tag


class TestRomSweep:
    def test_report_rows(self, stages):
        header, rows = storage.read_csv(stages["rom"] / "rom_error.csv")
        assert header == storage.ERROR_HEADER
        assert [(r[0], r[1]) for r in rows] == [("2", "2"), ("2", "4"),
                                                ("2", "6")]
        header, rows = storage.read_csv(stages["rom"] / "rom_perf.csv")
        assert header == storage.PERF_HEADER
        assert len(rows) == 3
        assert storage.verify_manifest(stages["rom"]) == []

    def test_saved_model_reloads(self, stages):
        model, _ = storage.load_model(stages["rom"] / "model_v2")
        assert model.variant == 2
        assert max(model.ranks.values()) <= 6

    def test_variant_one_runs_at_small_sizes(self, stages, tmp_path, capsys):
        out = tmp_path / "rom1"
        rc = cli.main(["rom", "--variant", "1", "--n", "2",
                       "--basis", str(stages["pod"]), "--out", str(out)])
        assert rc == 0
        assert "variant 1 N=2" in capsys.readouterr().out
        header, rows = storage.read_csv(out / "rom_error.csv")
        assert len(rows) == 1 and rows[0][0] == "1"

    def test_partial_failure_flags_exit(self, stages, tmp_path, capsys,
                                        monkeypatch):
        real = cli._run_one

        def flaky(model, n, hf_traj, fesys):
            if n == 4:
                raise SingularSaddle(3, 5)
            return real(model, n, hf_traj, fesys)

        monkeypatch.setattr(cli, "_run_one", flaky)
        out = tmp_path / "partial"
        rc = cli.main(["rom", "--variant", "2", "--n", "2:6:2",
                       "--basis", str(stages["pod"]), "--out", str(out)])
        assert rc == 1
        assert "N=4 skipped" in capsys.readouterr().err
        _, rows = storage.read_csv(out / "rom_error.csv")
        assert [r[1] for r in rows] == ["2", "6"]

    def test_worker_pool_matches_serial(self, stages, tmp_path, monkeypatch):
        monkeypatch.setenv("FSIROM_WORKERS", "2")
        out = tmp_path / "par"
        rc = cli.main(["rom", "--variant", "2", "--n", "2:6:2",
                       "--basis", str(stages["pod"]), "--out", str(out)])
        assert rc == 0
        _, serial = storage.read_csv(stages["rom"] / "rom_error.csv")
        _, parallel = storage.read_csv(out / "rom_error.csv")
        assert parallel == serial

    def test_timed_flag_ignores_worker_pool(self, stages, tmp_path,
                                            monkeypatch):
        calls = []
        monkeypatch.setenv("FSIROM_WORKERS", "8")
        monkeypatch.setattr(cli, "_sweep_worker",
                            lambda packed: calls.append(packed))
        out = tmp_path / "timed"
        rc = cli.main(["rom", "--variant", "2", "--n", "2:4:2", "--timed",
                       "--basis", str(stages["pod"]), "--out", str(out)])
        assert rc == 0
        assert calls == []


class TestParseNList:
    def test_single(self):
        assert cli._parse_n_list("5") == [5]

    def test_sweep(self):
        assert cli._parse_n_list("10:50:10") == [10, 20, 30, 40, 50]

    def test_inclusive_stop(self):
        assert cli._parse_n_list("2:7:2") == [2, 4, 6]

    @pytest.mark.parametrize("text", ["0", "-3", "5:1:1", "1:9:0", "1:9",
                                      "1:2:3:4"])
    def test_rejects(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            cli._parse_n_list(text)

    def test_unknown_variant_rejected(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["rom", "--variant", "3", "--n", "2",
                      "--basis", "x", "--out", "y"])
        assert excinfo.value.code == 2


class TestPlot:
    def test_figures_and_manifest(self, stages):
        names = set(os.listdir(stages["figs"]))
        assert {"rom_error.svg", "rom_cond.svg", "rom_iters.svg",
                "rom_speedup.svg", "manifest.json"} <= names
        assert storage.verify_manifest(stages["figs"]) == []

    def test_spectrum_figures_from_pod_dir(self, stages, tmp_path):
        out = tmp_path / "podfigs"
        assert cli.main(["plot", "--in", str(stages["pod"]),
                         "--out", str(out)]) == 0
        assert {"pod_sigma.svg", "pod_energy.svg"} <= set(os.listdir(out))

    def test_rerun_is_byte_identical(self, stages, tmp_path):
        again = tmp_path / "figs2"
        assert cli.main(["plot", "--in", str(stages["rom"]),
                         "--out", str(again)]) == 0
        for name in os.listdir(again):
            if name.endswith(".svg"):
                first = (stages["figs"] / name).read_bytes()
                second = (again / name).read_bytes()
                assert first == second, name

    def test_empty_input_dir(self, tmp_path):
        src = tmp_path / "empty"
        src.mkdir()
        out = tmp_path / "figs"
        assert cli.main(["plot", "--in", str(src), "--out", str(out)]) == 0
        assert set(os.listdir(out)) == {"manifest.json"}

    def test_header_only_csv(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        storage.write_csv(src / "rom_error.csv", storage.ERROR_HEADER, [])
        out = tmp_path / "figs"
        assert cli.main(["plot", "--in", str(src), "--out", str(out)]) == 0
        assert "rom_error.svg" in os.listdir(out)


class TestEntryPoint:
    def test_module_help(self):
        proc = subprocess.run(
            [sys.executable, "-m", "fsirom.cli", "--help"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        for name in ("hf", "pod", "rom", "plot"):
            assert name in proc.stdout

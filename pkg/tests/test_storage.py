"""On-disk round trips: snapshot matrices, CSV reports, manifests, runs."""

import dataclasses
import hashlib
import json
import os

import numpy as np
import pytest

from fsirom import storage
from fsirom.analysis import relative_errors, speedup
from fsirom.errors import UsageError
from fsirom.problem import dump_config
from fsirom.rom import online_rom2


class TestSnapmat:
    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        mat = rng.standard_normal((7, 5))
        path = storage.write_snapmat(tmp_path / "m.snap", mat)
        back = storage.read_snapmat(path)
        assert back.dtype == np.float64
        assert np.array_equal(back, mat)

    def test_vector_becomes_column(self, tmp_path):
        path = storage.write_snapmat(tmp_path / "v.snap", np.arange(4.0))
        assert storage.read_snapmat(path).shape == (4, 1)

    def test_empty_columns_round_trip(self, tmp_path):
        path = storage.write_snapmat(tmp_path / "e.snap", np.zeros((3, 0)))
        assert storage.read_snapmat(path).shape == (3, 0)

    def test_higher_rank_rejected(self, tmp_path):
        with pytest.raises(UsageError):
            storage.write_snapmat(tmp_path / "t.snap", np.zeros((2, 2, 2)))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.snap"
        path.write_bytes(b"NOTSNAP!" + b"\x00" * 24)
        with pytest.raises(UsageError, match="magic"):
            storage.read_snapmat(path)

    def test_truncated_payload_rejected(self, tmp_path):
        good = tmp_path / "g.snap"
        storage.write_snapmat(good, np.ones((3, 3)))
        clipped = tmp_path / "c.snap"
        clipped.write_bytes(good.read_bytes()[:-8])
        with pytest.raises(UsageError, match="truncated"):
            storage.read_snapmat(clipped)


class TestCsv:
    def test_round_trip_and_rendering(self, tmp_path):
        path = storage.write_csv(
            tmp_path / "r.csv", ["name", "count", "value"],
            [("a", 3, 0.5), ("b", np.int64(7), np.float64(1.0 / 3.0))])
        header, rows = storage.read_csv(path)
        assert header == ["name", "count", "value"]
        assert rows[0] == ["a", "3", "5.000000000000e-01"]
        assert rows[1][1] == "7"
        assert float(rows[1][2]) == pytest.approx(1.0 / 3.0, rel=1e-11)

    def test_lf_endings(self, tmp_path):
        path = storage.write_csv(tmp_path / "lf.csv", ["x"], [(1,)])
        raw = open(path, "rb").read()
        assert b"\r" not in raw
        assert raw.endswith(b"\n")

    def test_header_only(self, tmp_path):
        path = storage.write_csv(tmp_path / "h.csv", ["a", "b"], [])
        assert storage.read_csv(path) == (["a", "b"], [])

    def test_empty_file(self, tmp_path):
        path = tmp_path / "none.csv"
        path.write_text("")
        assert storage.read_csv(path) == ([], [])


class TestHashing:
    def test_known_digest(self, tmp_path):
        path = tmp_path / "abc.bin"
        path.write_bytes(b"abc")
        assert storage.sha256_file(path) == hashlib.sha256(b"abc").hexdigest()


class TestManifest:
    @staticmethod
    def _populate(out_dir):
        a = os.path.join(out_dir, "a.csv")
        storage.write_csv(a, ["x"], [(1,)])
        b = os.path.join(out_dir, "b.snap")
        storage.write_snapmat(b, np.eye(2))
        return [a, b]

    def test_clean_verification(self, tmp_path):
        outputs = self._populate(tmp_path)
        storage.write_manifest(tmp_path, "hf", {"config": "run.ini"},
                               {"K": 10}, outputs, 0.25)
        assert storage.verify_manifest(tmp_path) == []

    def test_structure(self, tmp_path):
        outputs = self._populate(tmp_path)
        path = storage.write_manifest(tmp_path, "pod", {}, {"n_max": 3},
                                      outputs, 1.5)
        entry = json.load(open(path))
        assert entry["command"] == "pod"
        assert entry["config"] == {"n_max": 3}
        assert entry["wall_time_s"] == 1.5
        assert sorted(entry["outputs"]) == ["a.csv", "b.snap"]
        assert entry["outputs"]["a.csv"] == storage.sha256_file(
            tmp_path / "a.csv")

    def test_tamper_detected(self, tmp_path):
        outputs = self._populate(tmp_path)
        storage.write_manifest(tmp_path, "hf", {}, {}, outputs, 0.0)
        (tmp_path / "a.csv").write_text("x\n2\n")
        assert storage.verify_manifest(tmp_path) == [("a.csv",
                                                      "hash mismatch")]

    def test_missing_file_detected(self, tmp_path):
        outputs = self._populate(tmp_path)
        storage.write_manifest(tmp_path, "hf", {}, {}, outputs, 0.0)
        os.remove(tmp_path / "b.snap")
        assert storage.verify_manifest(tmp_path) == [("b.snap", "missing")]

    def test_unlisted_files_ignored(self, tmp_path):
        outputs = self._populate(tmp_path)
        storage.write_manifest(tmp_path, "hf", {}, {}, outputs, 0.0)
        (tmp_path / "extra.txt").write_text("stray\n")
        assert storage.verify_manifest(tmp_path) == []


class TestTrajectoryRoundTrip:
    def test_fields_and_log(self, tmp_path, small_pipe):
        run_dir = tmp_path / "run"
        written = storage.save_trajectory(run_dir, small_pipe.traj,
                                          small_pipe.setup)
        assert all(os.path.exists(p) for p in written)
        back, setup = storage.load_trajectory(run_dir)
        for name in ("u", "p", "eta", "lam"):
            assert np.array_equal(getattr(back, name),
                                  getattr(small_pipe.traj, name)), name
        assert np.array_equal(back.iters, small_pipe.traj.iters)
        # Times and timings pass through 12-digit CSV rendering.
        assert back.times == pytest.approx(small_pipe.traj.times, rel=1e-11)
        assert back.t_explicit == pytest.approx(small_pipe.traj.t_explicit,
                                                rel=1e-11)
        assert dump_config(setup) == dump_config(small_pipe.setup)

    def test_absent_multipliers(self, tmp_path, small_pipe):
        bare = dataclasses.replace(small_pipe.traj, lam=None)
        run_dir = tmp_path / "bare"
        storage.save_trajectory(run_dir, bare, small_pipe.setup)
        assert not os.path.exists(run_dir / "lambda.snap")
        back, _ = storage.load_trajectory(run_dir)
        assert back.lam is None

    def test_header_check(self, tmp_path, small_pipe):
        run_dir = tmp_path / "bad"
        storage.save_trajectory(run_dir, small_pipe.traj, small_pipe.setup)
        storage.write_csv(run_dir / "trajectory.csv", ["k", "t"], [(1, 0.0)])
        with pytest.raises(UsageError, match="trajectory.csv"):
            storage.load_trajectory(run_dir)


class TestBasesRoundTrip:
    def test_modes_spectra_meta(self, tmp_path, small_pipe):
        out = tmp_path / "pod"
        storage.save_bases(out, small_pipe.bases, small_pipe.setup,
                           tmp_path / "snaps", 30)
        bases, setup, meta = storage.load_bases(out)
        assert meta["n_max"] == 30
        assert set(bases) == set(small_pipe.bases)
        for tag, basis in small_pipe.bases.items():
            assert np.array_equal(bases[tag].modes, basis.modes), tag
            assert meta["ranks"][tag] == basis.rank
            assert bases[tag].sigma == pytest.approx(basis.sigma, rel=1e-11)
        assert dump_config(setup) == dump_config(small_pipe.setup)

    def test_spectrum_rows_columns(self, small_pipe):
        rows = storage.spectrum_rows(small_pipe.bases)
        total = sum(b.sigma.size for b in small_pipe.bases.values())
        assert len(rows) == total
        by_tag = {}
        for tag, idx, sigma, frac, cum in rows:
            by_tag.setdefault(tag, []).append((idx, sigma, frac, cum))
        for tag, entries in by_tag.items():
            assert [e[0] for e in entries] == list(range(len(entries))), tag
            assert entries[-1][3] == pytest.approx(1.0), tag


class TestModelRoundTrip:
    @pytest.mark.parametrize("variant", [1, 2])
    def test_blocks_bases_ranks(self, tmp_path, small_pipe, variant):
        model = small_pipe.model(variant)
        out = tmp_path / f"rom{variant}"
        storage.save_model(out, model, small_pipe.setup)
        back, setup = storage.load_model(out)
        assert back.variant == variant
        assert back.ranks == model.ranks
        assert set(back.blocks) == set(model.blocks)
        for name, block in model.blocks.items():
            assert np.array_equal(back.blocks[name], block), name
        assert np.array_equal(back.ell, model.ell)
        assert dump_config(setup) == dump_config(small_pipe.setup)

    def test_loaded_model_reruns_identically(self, tmp_path, small_pipe):
        model = small_pipe.model(2)
        out = tmp_path / "rerun"
        storage.save_model(out, model, small_pipe.setup)
        back, _ = storage.load_model(out)
        a = online_rom2(model, 6)
        b = online_rom2(back, 6)
        assert np.array_equal(a.a_vel, b.a_vel)
        assert np.array_equal(a.a_p0, b.a_p0)
        assert np.array_equal(a.a_eta, b.a_eta)

    def test_meta_header_check(self, tmp_path, small_pipe):
        out = tmp_path / "broken"
        storage.save_model(out, small_pipe.model(2), small_pipe.setup)
        storage.write_csv(out / "reduced_meta.csv", ["variant"], [(2,)])
        with pytest.raises(UsageError, match="reduced_meta.csv"):
            storage.load_model(out)


class TestReportRows:
    def test_error_rows_match_header(self, small_pipe):
        model = small_pipe.model(2)
        rt = online_rom2(model, 6)
        rep = relative_errors(small_pipe.traj, model, rt, small_pipe.fesys)
        rows = storage.error_rows([rep])
        assert len(rows[0]) == len(storage.ERROR_HEADER)
        assert rows[0][0] == 2 and rows[0][1] == 6
        assert rows[0][2] == rep.err_u

    def test_perf_rows_match_header(self, small_pipe):
        model = small_pipe.model(2)
        rt = online_rom2(model, 6)
        rep = speedup(small_pipe.traj, rt)
        rows = storage.perf_rows([rep])
        assert len(rows[0]) == len(storage.PERF_HEADER)
        assert rows[0][-1] == rep.speedup_total

"""Parameter handling: derived coefficients, boundary pulse, config files."""

import math

import pytest

from fsirom.errors import ParameterError
from fsirom.problem import (
    BoundaryData,
    default_boundary,
    default_params,
    derived_coeffs,
    dump_config,
    inlet_pressure,
    load_config,
    params_summary,
    PhysicalParams,
)


class TestDerivedCoeffs:
    def test_reference_values(self):
        # Hand evaluation of the closed formulas at the reference material:
        # c1 = 0.1 * 7.5e5 / (0.25 * 0.75), c0 = 0.1 * 7.5e5 / 3.
        c0, c1 = derived_coeffs(E_s=0.75e6, nu_s=0.5, h_s=0.1, h_f=0.5)
        assert c1 == pytest.approx(4.0e5, rel=1e-12)
        assert c0 == pytest.approx(2.5e4, rel=1e-12)

    def test_zero_poisson(self):
        c0, c1 = derived_coeffs(E_s=1.0, nu_s=0.0, h_s=1.0, h_f=1.0)
        assert c1 == pytest.approx(1.0)
        assert c0 == pytest.approx(0.5)

    @pytest.mark.parametrize("bad", [{"E_s": 0.0}, {"E_s": -1.0},
                                     {"h_s": 0.0}, {"h_f": -2.0}])
    def test_nonpositive_material_rejected(self, bad):
        kwargs = dict(E_s=1.0, nu_s=0.3, h_s=1.0, h_f=1.0)
        kwargs.update(bad)
        with pytest.raises(ParameterError):
            derived_coeffs(**kwargs)

    @pytest.mark.parametrize("nu", [1.0, 1.5, -0.1])
    def test_poisson_range_enforced(self, nu):
        with pytest.raises(ParameterError):
            derived_coeffs(E_s=1.0, nu_s=nu, h_s=1.0, h_f=1.0)


class TestInletPressure:
    def test_zero_at_start_and_after_pulse(self):
        assert inlet_pressure(0.0) == 0.0
        assert inlet_pressure(5.0e-3) == 0.0
        assert inlet_pressure(0.1) == 0.0
        assert inlet_pressure(-1.0e-5) == 0.0

    def test_peak_value(self):
        # 1 - cos(pi) = 2 at the half period.
        assert inlet_pressure(2.5e-3) == pytest.approx(2.0e4, rel=1e-12)

    def test_continuous_at_cutoff(self):
        eps = 1.0e-9
        assert abs(inlet_pressure(5.0e-3 - eps)) < 1.0e-2

    def test_amplitude_scaling(self):
        t = 1.3e-3
        assert inlet_pressure(t, amplitude=3.0) == pytest.approx(
            3.0e-4 * inlet_pressure(t), rel=1e-12)
        assert inlet_pressure(t, amplitude=0.0) == 0.0

    def test_default_boundary_wraps_pulse(self):
        bdata = default_boundary(amplitude=2.0)
        assert bdata.p_in(2.5e-3) == pytest.approx(4.0, rel=1e-12)
        assert bdata.p_out(2.5e-3) == 0.0

    def test_plain_boundary_defaults(self):
        bdata = BoundaryData()
        assert bdata.p_in(2.5e-3) == pytest.approx(2.0e4, rel=1e-12)
        assert bdata.p_out(123.0) == 0.0


class TestPhysicalParams:
    def test_reference_configuration(self, params):
        assert params.K == 1300
        assert params.dt == pytest.approx(1.0e-4)
        assert params.T_final == pytest.approx(0.13)
        assert params.c0 == pytest.approx(2.5e4, rel=1e-12)
        assert params.c1 == pytest.approx(4.0e5, rel=1e-12)
        assert params.alpha_rob == pytest.approx(1.0 / 0.11, rel=1e-12)
        assert params.tol_implicit == pytest.approx(1.0e-6)
        assert params.max_implicit_iters == 100

    def test_explicit_coeffs_not_overwritten(self):
        p = default_params(c0=7.0, c1=11.0, alpha_rob=13.0)
        assert (p.c0, p.c1, p.alpha_rob) == (7.0, 11.0, 13.0)

    def test_time_consistency_enforced(self):
        with pytest.raises(ParameterError, match="inconsistent time"):
            default_params(K=10, dt=1.0e-4, T_final=0.13)

    def test_consistent_overrides_accepted(self):
        p = default_params(K=20, dt=1.0e-4, T_final=2.0e-3)
        assert p.K == 20

    @pytest.mark.parametrize("bad", [
        {"K": 0}, {"K": 2.5}, {"dt": 0.0, "T_final": 0.0},
        {"mu_f": -1.0}, {"rho_s": 0.0}, {"tol_implicit": 0.0},
        {"max_implicit_iters": 0}, {"nu_s": 1.0},
    ])
    def test_invalid_fields_rejected(self, bad):
        with pytest.raises(ParameterError):
            default_params(**bad)

    def test_summary_lists_every_field(self, params):
        summary = params_summary(params)
        assert summary["K"] == 1300
        assert summary["alpha_rob"] == pytest.approx(params.alpha_rob)
        assert set(summary) >= {"rho_f", "mu_f", "c0", "c1", "dt", "T_final",
                                "tol_implicit", "max_implicit_iters"}


def write_config(tmp_path, text):
    path = tmp_path / "run.ini"
    path.write_text(text)
    return path


class TestLoadConfig:
    def test_empty_file_gives_reference_setup(self, tmp_path):
        setup = load_config(write_config(tmp_path, ""))
        assert setup.params.K == 1300
        assert setup.params.dt == pytest.approx(1.0e-4)
        assert (setup.nx, setup.ny) == (120, 10)
        assert setup.p_in_amplitude == pytest.approx(1.0e4)

    def test_dt_alone_derives_step_count(self, tmp_path):
        setup = load_config(write_config(tmp_path, "[time]\ndt = 2e-4\n"))
        assert setup.params.K == 650
        assert setup.params.T_final == pytest.approx(0.13)

    def test_dt_and_steps_derive_horizon(self, tmp_path):
        setup = load_config(write_config(
            tmp_path, "[time]\ndt = 1e-4\nK = 120\n"))
        assert setup.params.T_final == pytest.approx(0.012)

    def test_horizon_and_steps_derive_dt(self, tmp_path):
        setup = load_config(write_config(
            tmp_path, "[time]\nT_final = 0.1\nK = 1000\n"))
        assert setup.params.dt == pytest.approx(1.0e-4)

    def test_steps_alone_keep_reference_dt(self, tmp_path):
        setup = load_config(write_config(tmp_path, "[time]\nK = 50\n"))
        assert setup.params.dt == pytest.approx(1.0e-4)
        assert setup.params.T_final == pytest.approx(5.0e-3)

    def test_horizon_alone_keeps_reference_dt(self, tmp_path):
        setup = load_config(write_config(tmp_path, "[time]\nT_final = 0.05\n"))
        assert setup.params.K == 500

    def test_inconsistent_triple_rejected(self, tmp_path):
        path = write_config(
            tmp_path, "[time]\ndt = 1e-4\nT_final = 0.13\nK = 42\n")
        with pytest.raises(ParameterError, match="inconsistent time"):
            load_config(path)

    def test_case_sensitive_physics_keys(self, tmp_path):
        setup = load_config(write_config(
            tmp_path, "[physics]\nE_s = 1.5e6\nL = 3.0\n"))
        assert setup.params.E_s == pytest.approx(1.5e6)
        assert setup.params.L == pytest.approx(3.0)
        # c1 rederives from the overridden modulus.
        assert setup.params.c1 == pytest.approx(8.0e5, rel=1e-12)

    def test_amplitude_reaches_boundary_data(self, tmp_path):
        setup = load_config(write_config(
            tmp_path, "[physics]\np_in_amplitude = 25.0\n"))
        assert setup.boundary.p_in(2.5e-3) == pytest.approx(50.0, rel=1e-12)

    def test_mesh_and_solver_sections(self, tmp_path):
        setup = load_config(write_config(
            tmp_path,
            "[mesh]\nnx = 24\nny = 2\n"
            "[solver]\ntol_implicit = 1e-8\nmax_implicit_iters = 7\n"))
        assert (setup.nx, setup.ny) == (24, 2)
        assert setup.params.tol_implicit == pytest.approx(1.0e-8)
        assert setup.params.max_implicit_iters == 7

    def test_unknown_section_rejected(self, tmp_path):
        with pytest.raises(ParameterError, match="unknown config section"):
            load_config(write_config(tmp_path, "[turbulence]\nmodel = none\n"))

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ParameterError, match="unknown key"):
            load_config(write_config(tmp_path, "[time]\nstep = 1e-4\n"))

    def test_malformed_value_rejected(self, tmp_path):
        with pytest.raises(ParameterError, match="malformed"):
            load_config(write_config(tmp_path, "[time]\ndt = tiny\n"))

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ParameterError, match="not found"):
            load_config(tmp_path / "nope.ini")

    @pytest.mark.parametrize("text", ["[mesh]\nnx = 0\n",
                                      "[physics]\np_in_amplitude = -1\n"])
    def test_bad_mesh_or_amplitude_rejected(self, tmp_path, text):
        with pytest.raises(ParameterError):
            load_config(write_config(tmp_path, text))


class TestDumpConfig:
    def test_round_trip_preserves_setup(self, tmp_path):
        first = load_config(write_config(
            tmp_path,
            "[physics]\nmu_f = 0.04\np_in_amplitude = 123.5\n"
            "[time]\ndt = 5e-5\nK = 40\n[mesh]\nnx = 12\nny = 3\n"))
        again = load_config(write_config(tmp_path, dump_config(first)))
        for name in params_summary(first.params):
            assert getattr(again.params, name) == pytest.approx(
                getattr(first.params, name), rel=1e-15), name
        assert (again.nx, again.ny) == (first.nx, first.ny)
        assert again.p_in_amplitude == first.p_in_amplitude

    def test_dump_resolves_derived_values(self, tmp_path):
        setup = load_config(write_config(tmp_path, ""))
        text = dump_config(setup)
        assert "c1 = 400000" in text
        assert "K = 1300" in text
        assert "[solver]" in text

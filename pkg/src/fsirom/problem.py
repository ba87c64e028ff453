"""Problem definition: physical parameters, wall coefficients, boundary data.

The model is an unsteady incompressible flow in a rectangular channel
[0, L] x [0, h_f] whose top side is an elastic wall moving in the vertical
direction, described by a second-order string equation for the displacement.
All quantities are in CGS units.
"""

import configparser
import math
from dataclasses import dataclass, field, fields

from .errors import ParameterError

# Reference configuration (CGS): a 6 cm channel of half-height 0.5 cm with a
# 0.1 cm thick wall, impulsively loaded by a half-period cosine pressure pulse
# at the inlet.
RHO_F = 1.0
MU_F = 0.035
RHO_S = 1.1
H_S = 0.1
E_S = 0.75e6
NU_S = 0.5
LENGTH = 6.0
H_F = 0.5
DT = 1.0e-4
T_FINAL = 0.13
N_STEPS = 1300
PULSE_AMPLITUDE = 1.0e4
PULSE_DURATION = 5.0e-3


def derived_coeffs(E_s, nu_s, h_s, h_f):
    """Wall coefficients (c0, c1) of the string model from material data.

    c1 multiplies the second space derivative of the displacement and
    accounts for axial tension, c0 is the transverse spring stiffness:

        c1 = h_s * E_s / (h_f**2 * (1 - nu_s**2))
        c0 = h_s * E_s / (2 * (1 + nu_s))

    Parameters
    ----------
    E_s : float
        Young modulus of the wall.
    nu_s : float
        Poisson ratio, 0 <= nu_s < 1.
    h_s : float
        Wall thickness.
    h_f : float
        Channel height (reference radius of the wall).

    Returns
    -------
    (float, float)
        The pair (c0, c1).
    """
    if E_s <= 0 or h_s <= 0 or h_f <= 0:
        raise ParameterError("E_s, h_s and h_f must be positive")
    if not 0 <= nu_s < 1:
        raise ParameterError(f"Poisson ratio must lie in [0, 1), got {nu_s}")
    c1 = h_s * E_s / (h_f ** 2 * (1.0 - nu_s ** 2))
    c0 = h_s * E_s / (2.0 * (1.0 + nu_s))
    return c0, c1


def inlet_pressure(t, amplitude=PULSE_AMPLITUDE, duration=PULSE_DURATION):
    """Inlet pressure pulse: a single raised-cosine period, then zero.

    p_in(t) = amplitude * (1 - cos(2 pi t / duration)) for 0 <= t < duration,
    and identically zero afterwards.  The profile is continuous at t = duration.
    """
    if t < 0.0 or t >= duration:
        return 0.0
    return amplitude * (1.0 - math.cos(2.0 * math.pi * t / duration))


def _zero_pressure(t):
    return 0.0


@dataclass
class BoundaryData:
    """Pressure boundary data on the inflow and outflow sides.

    Attributes
    ----------
    p_in, p_out : callable
        Time-dependent pressure values imposed on x = 0 and x = L.
    """

    p_in: callable = inlet_pressure
    p_out: callable = _zero_pressure


def default_boundary(amplitude=PULSE_AMPLITUDE):
    """Boundary data of the reference configuration with a scalable pulse."""
    return BoundaryData(p_in=lambda t: inlet_pressure(t, amplitude=amplitude))


@dataclass
class PhysicalParams:
    """All physical and discretization constants of one run.

    Wall coefficients c0, c1 and the Robin coefficient alpha_rob may be set
    explicitly; if left as None they are computed from the material data
    (c0, c1 from `derived_coeffs`, alpha_rob = rho_f / (rho_s * h_s)).

    The step count K and the horizon T_final must satisfy K * dt = T_final.
    """

    rho_f: float = RHO_F
    mu_f: float = MU_F
    rho_s: float = RHO_S
    h_s: float = H_S
    E_s: float = E_S
    nu_s: float = NU_S
    L: float = LENGTH
    h_f: float = H_F
    c0: float = None
    c1: float = None
    alpha_rob: float = None
    dt: float = DT
    T_final: float = T_FINAL
    K: int = N_STEPS
    tol_implicit: float = 1.0e-6
    max_implicit_iters: int = 100

    def __post_init__(self):
        if self.c0 is None or self.c1 is None:
            c0, c1 = derived_coeffs(self.E_s, self.nu_s, self.h_s, self.h_f)
            if self.c0 is None:
                self.c0 = c0
            if self.c1 is None:
                self.c1 = c1
        if self.alpha_rob is None:
            if self.rho_s <= 0 or self.h_s <= 0:
                raise ParameterError(
                    f"rho_s and h_s must be positive to derive alpha_rob, "
                    f"got {self.rho_s} and {self.h_s}"
                )
            self.alpha_rob = self.rho_f / (self.rho_s * self.h_s)
        self.validate()

    def validate(self):
        for name in ("rho_f", "mu_f", "rho_s", "h_s", "E_s", "L", "h_f",
                     "c0", "c1", "alpha_rob", "dt", "T_final", "tol_implicit"):
            value = getattr(self, name)
            if not value > 0:
                raise ParameterError(f"{name} must be positive, got {value}")
        if not 0 <= self.nu_s < 1:
            raise ParameterError(f"nu_s must lie in [0, 1), got {self.nu_s}")
        if not (isinstance(self.K, int) and self.K > 0):
            raise ParameterError(f"K must be a positive integer, got {self.K}")
        if self.max_implicit_iters < 1:
            raise ParameterError("max_implicit_iters must be at least 1")
        if not math.isclose(self.K * self.dt, self.T_final, rel_tol=1e-12):
            raise ParameterError(
                f"inconsistent time data: K * dt = {self.K * self.dt!r} "
                f"but T_final = {self.T_final!r}"
            )


def default_params(**overrides):
    """Parameters of the reference configuration, with keyword overrides."""
    return PhysicalParams(**overrides)


@dataclass
class RunSetup:
    """A complete run description: parameters, boundary data, mesh resolution."""

    params: PhysicalParams = field(default_factory=default_params)
    boundary: BoundaryData = field(default_factory=default_boundary)
    nx: int = 120
    ny: int = 10
    p_in_amplitude: float = PULSE_AMPLITUDE


_PHYSICS_KEYS = ("rho_f", "mu_f", "rho_s", "h_s", "E_s", "nu_s", "L", "h_f",
                 "c0", "c1", "alpha_rob")
_TIME_KEYS = ("dt", "T_final", "K")
_SOLVER_KEYS = ("tol_implicit", "max_implicit_iters")


def _resolve_time(dt, T_final, K):
    """Fill in the unspecified members of (dt, T_final, K) consistently.

    Any subset may be given.  With all three given they must already satisfy
    K * dt = T_final; with two given the third is derived; with fewer given
    the reference values fill the gaps, rederiving K last.
    """
    if dt is not None and K is not None and T_final is None:
        T_final = K * dt
    elif dt is not None and T_final is not None and K is None:
        K = round(T_final / dt)
    elif T_final is not None and K is not None and dt is None:
        dt = T_final / K
    elif dt is not None and T_final is None and K is None:
        T_final = T_FINAL
        K = round(T_final / dt)
    elif K is not None and dt is None and T_final is None:
        dt = DT
        T_final = K * dt
    elif T_final is not None and dt is None and K is None:
        dt = DT
        K = round(T_final / dt)
    elif dt is None and T_final is None and K is None:
        dt, T_final, K = DT, T_FINAL, N_STEPS
    return dt, T_final, K


def load_config(path):
    """Read a run description from an INI file.

    Recognized sections and keys (all optional, defaulting to the reference
    configuration):

    - ``[physics]``: the material fields of `PhysicalParams` plus
      ``p_in_amplitude`` scaling the inlet pulse;
    - ``[time]``: ``dt``, ``T_final``, ``K`` (any consistent subset);
    - ``[solver]``: ``tol_implicit``, ``max_implicit_iters``;
    - ``[mesh]``: ``nx``, ``ny``.

    Returns
    -------
    RunSetup
    """
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keys like E_s and L are case-sensitive
    read = cp.read(path)
    if not read:
        raise ParameterError(f"config file not found or unreadable: {path}")

    known = {"physics": set(_PHYSICS_KEYS) | {"p_in_amplitude"},
             "time": set(_TIME_KEYS),
             "solver": set(_SOLVER_KEYS),
             "mesh": {"nx", "ny"}}
    for section in cp.sections():
        if section not in known:
            raise ParameterError(f"unknown config section [{section}]")
        extra = set(cp[section]) - known[section]
        if extra:
            raise ParameterError(
                f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}"
            )

    kwargs = {}
    try:
        for key in _PHYSICS_KEYS:
            if cp.has_option("physics", key):
                kwargs[key] = cp.getfloat("physics", key)
        dt = cp.getfloat("time", "dt") if cp.has_option("time", "dt") else None
        T_final = (cp.getfloat("time", "T_final")
                   if cp.has_option("time", "T_final") else None)
        K = cp.getint("time", "K") if cp.has_option("time", "K") else None
        for key, getter in (("tol_implicit", cp.getfloat),
                            ("max_implicit_iters", cp.getint)):
            if cp.has_option("solver", key):
                kwargs[key] = getter("solver", key)
        amplitude = (cp.getfloat("physics", "p_in_amplitude")
                     if cp.has_option("physics", "p_in_amplitude")
                     else PULSE_AMPLITUDE)
        nx = cp.getint("mesh", "nx") if cp.has_option("mesh", "nx") else 120
        ny = cp.getint("mesh", "ny") if cp.has_option("mesh", "ny") else 10
    except ValueError as exc:
        raise ParameterError(f"malformed config value: {exc}") from exc

    kwargs["dt"], kwargs["T_final"], kwargs["K"] = _resolve_time(dt, T_final, K)
    if nx < 1 or ny < 1:
        raise ParameterError(f"mesh resolution must be positive, got {nx}x{ny}")
    if amplitude < 0:
        raise ParameterError("p_in_amplitude must be nonnegative")

    params = PhysicalParams(**kwargs)
    return RunSetup(params=params, boundary=default_boundary(amplitude),
                    nx=nx, ny=ny, p_in_amplitude=amplitude)


def dump_config(setup):
    """Serialize a RunSetup back to INI text (fully resolved values)."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["physics"] = {key: repr(getattr(setup.params, key))
                     for key in _PHYSICS_KEYS}
    cp["physics"]["p_in_amplitude"] = repr(setup.p_in_amplitude)
    cp["time"] = {"dt": repr(setup.params.dt),
                  "T_final": repr(setup.params.T_final),
                  "K": str(setup.params.K)}
    cp["solver"] = {"tol_implicit": repr(setup.params.tol_implicit),
                    "max_implicit_iters": str(setup.params.max_implicit_iters)}
    cp["mesh"] = {"nx": str(setup.nx), "ny": str(setup.ny)}
    lines = []
    for section in cp.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {value}" for key, value in cp[section].items())
        lines.append("")
    return "\n".join(lines)


def params_summary(params):
    """Dict of all parameter fields, for manifests and logs."""
    return {f.name: getattr(params, f.name) for f in fields(params)}

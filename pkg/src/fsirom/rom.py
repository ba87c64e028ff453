"""Projection-based reduced models of the coupled scheme.

Two online variants share the pressure/displacement subiteration and differ
in the explicit velocity step:

- variant 1 keeps the velocity modes as they are and enforces the wall
  velocity weakly through a saddle system with a reduced interface
  multiplier;
- variant 2 shifts each velocity snapshot by the lifted wall velocity of
  the previous step (harmonic extension acting on the vertical component),
  so its modes vanish on the interface and the explicit step becomes a
  plain symmetric positive definite solve.

Pressure snapshots are homogenized by an inlet lifting field before
compression, and the online pressure is reassembled as (modes @ a) +
p_in(t) * lifting.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import linalg
from .errors import SingularSaddle, UsageError
from .hifi import _ratio, NonConvergence
from .meshfe import apply_dirichlet, HarmonicExtension
from .pod import compute_basis, inner_product


def build_lifting(fesys, k_p=None):
    """Pressure lifting field: harmonic, 1 at the inlet, 0 at the outlet.

    On the channel rectangle this is exactly the linear profile 1 - x / L,
    but it is computed from the operator so that the construction stays
    valid for any mesh of the domain.
    """
    from .meshfe import assemble

    if k_p is None:
        k_p = assemble("k_p", fesys)
    dofs = np.concatenate([fesys.p1_in, fesys.p1_out])
    values = np.concatenate([np.ones(fesys.p1_in.size),
                             np.zeros(fesys.p1_out.size)])
    mat, rhs = apply_dirichlet(k_p, np.zeros(fesys.n_p), dofs, values)
    return linalg.sparse_solve(mat, rhs)


def homogenize_pressure(p_cols, times, boundary, ell):
    """Remove the inlet-valued lifting from pressure snapshot columns."""
    g = np.array([boundary.p_in(t) for t in np.asarray(times)])
    return p_cols - np.outer(ell, g), g


def wall_shift_snapshots(traj, fesys, params, extension=None):
    """Velocity snapshots minus the lifted wall velocity of the previous step.

    Column k (step k+1 of the run) is u^{k+1} - E((eta^k - eta^{k-1}) / dt)
    acting on the vertical component, with E the harmonic extension; the
    shifted fields vanish on the moving wall.  Returns (snapshots, extension).
    """
    if extension is None:
        extension = HarmonicExtension(fesys)
    K = traj.n_steps
    d = np.zeros((fesys.n_eta, K))
    # The shift of column k uses the wall velocity already known when step
    # k+1 starts, i.e. the difference of the two previous displacements.
    d[:, 1] = traj.eta[:, 0]
    d[:, 2:] = traj.eta[:, 1:-1] - traj.eta[:, :-2]
    d /= params.dt

    g = np.zeros((fesys.n_scalar, K))
    g[fesys.sigma_trace_nodes] = d
    rhs = -(extension.k @ g)
    rhs[extension.constrained] = g[extension.constrained]
    lifted = extension.factor(rhs)
    extension.solve_count += K

    z = traj.u.copy()
    z[fesys.n_scalar:] -= lifted
    return z, extension


def build_bases(traj, fesys, params, boundary, n_max=None, ell=None,
                extension=None):
    """POD bases of all five snapshot families of one trajectory.

    Returns (bases, ell): a dict with keys 'u', 'p', 'eta', 'lambda', 'z'
    and the pressure lifting vector used for homogenization.
    """
    if ell is None:
        ell = build_lifting(fesys)
    p0, _ = homogenize_pressure(traj.p, traj.times, boundary, ell)
    z, _ = wall_shift_snapshots(traj, fesys, params, extension)
    sets = {"u": traj.u, "p": p0, "eta": traj.eta, "lambda": traj.lam, "z": z}
    bases = {}
    for tag, snaps in sets.items():
        if snaps is None:
            raise UsageError(f"trajectory carries no {tag!r} snapshots")
        bases[tag] = compute_basis(snaps, inner_product(fesys, tag),
                                   field=tag, n_max=n_max)
    return bases, ell


@dataclass
class ReducedModel:
    """Projected operators and bases of one reduced variant at full rank."""

    variant: int
    params: object
    boundary: object
    ell: np.ndarray
    bases: dict
    blocks: dict
    ranks: dict

    def mode_counts(self, n):
        """Per-field mode counts when n modes per field are requested."""
        if n < 1:
            raise UsageError(f"mode count must be positive, got {n}")
        return {tag: min(n, r) for tag, r in self.ranks.items()}


def _common_blocks(bases, ops, ell):
    """Projected pressure and wall operators shared by both variants."""
    params = ops.params
    zp = bases["p"].modes
    ze = bases["eta"].modes
    lhs_p = ops.k_p + params.alpha_rob * ops.m_sigma_p
    coeff = params.rho_s * params.h_s / params.dt ** 2
    lhs_e = coeff * ops.m_e + params.c1 * ops.k_e + params.c0 * ops.m_e
    return {
        "p_lhs": zp.T @ (lhs_p @ zp),
        "p_robin": zp.T @ (ops.m_sigma_p @ zp),
        "p_robin_l": (zp.T @ (ops.m_sigma_p @ ell))[:, None],
        "p_lhs_l": (zp.T @ (lhs_p @ ell))[:, None],
        "p_wall": zp.T @ (ops.m_sigma_e.T @ ze),
        "p_norm_l": (zp.T @ (ops.m_p @ ell))[:, None],
        "norm_ll": np.array([[float(ell @ (ops.m_p @ ell))]]),
        "e_lhs": ze.T @ (lhs_e @ ze),
        "e_mass": ze.T @ (ops.m_e @ ze),
        "e_press": ze.T @ (ops.m_sigma_e @ zp),
        "e_press_l": (ze.T @ (ops.m_sigma_e @ ell))[:, None],
    }


def project_rom1(bases, ops, ell=None):
    """Reduced model with the weakly enforced wall velocity (saddle form)."""
    if ell is None:
        ell = build_lifting(ops.fesys, ops.k_p)
    zu = bases["u"].modes
    zl = bases["lambda"].modes
    ze = bases["eta"].modes
    zp = bases["p"].modes
    lhs_u = ops.m_u + ops.a_visc
    blocks = _common_blocks(bases, ops, ell)
    blocks.update({
        "u_lhs": zu.T @ (lhs_u @ zu),
        "u_mass": zu.T @ (ops.m_u @ zu),
        "u_press": zu.T @ (ops.grad_p @ zp),
        "u_press_l": (zu.T @ (ops.grad_p @ ell))[:, None],
        "coupling": zu.T @ (ops.c_n @ zl),
        "constraint": zl.T @ (ops.m_e @ ze),
        "p_div": zp.T @ (ops.div_u @ zu),
        "e_visc": ze.T @ (ops.t_visc @ zu),
    })
    ranks = {tag: bases[tag].rank for tag in ("u", "p", "eta", "lambda")}
    return ReducedModel(variant=1, params=ops.params, boundary=ops.boundary,
                        ell=ell, bases=bases, blocks=blocks, ranks=ranks)


def project_rom2(bases, ops, ell=None, extension=None):
    """Reduced model with interface-vanishing velocity modes.

    Performs one harmonic extension solve per retained displacement mode to
    lift the wall motion into the domain; the online step then recovers the
    velocity as (shifted modes) + (lifted wall velocity) at coefficient
    level, with no further large solves.
    """
    fesys = ops.fesys
    if ell is None:
        ell = build_lifting(fesys, ops.k_p)
    if extension is None:
        extension = HarmonicExtension(fesys)
    zz = bases["z"].modes
    ze = bases["eta"].modes
    zp = bases["p"].modes

    lifted = np.empty((fesys.n_scalar, ze.shape[1]))
    for j in range(ze.shape[1]):
        lifted[:, j] = extension.extend(ze[:, j])
    h_mat = np.zeros((fesys.n_u, ze.shape[1]))
    h_mat[fesys.n_scalar:] = lifted

    lhs_u = ops.m_u + ops.a_visc
    blocks = _common_blocks(bases, ops, ell)
    blocks.update({
        "z_lhs": zz.T @ (lhs_u @ zz),
        "z_mass": zz.T @ (ops.m_u @ zz),
        "z_mass_h": zz.T @ (ops.m_u @ h_mat),
        "z_lhs_h": zz.T @ (lhs_u @ h_mat),
        "z_press": zz.T @ (ops.grad_p @ zp),
        "z_press_l": (zz.T @ (ops.grad_p @ ell))[:, None],
        "p_div": zp.T @ (ops.div_u @ zz),
        "p_div_h": zp.T @ (ops.div_u @ h_mat),
        "e_visc": ze.T @ (ops.t_visc @ zz),
        "e_visc_h": ze.T @ (ops.t_visc @ h_mat),
        "wall_lift": h_mat,
    })
    ranks = {tag: bases[tag].rank for tag in ("z", "p", "eta")}
    return ReducedModel(variant=2, params=ops.params, boundary=ops.boundary,
                        ell=ell, bases=bases, blocks=blocks, ranks=ranks)


@dataclass
class ROMTrajectory:
    """Reduced coefficients of one online run, one column per step."""

    variant: int
    n_requested: int
    n_modes: dict
    times: np.ndarray
    g: np.ndarray
    a_vel: np.ndarray
    a_aux: np.ndarray
    a_p0: np.ndarray
    a_eta: np.ndarray
    iters: np.ndarray
    t_explicit: np.ndarray
    t_implicit: np.ndarray
    cond_explicit: float = np.nan
    extras: dict = field(default_factory=dict)

    @property
    def n_steps(self):
        return self.times.size


class _ImplicitReduced:
    """Shared reduced subiteration; velocity coupling terms injected."""

    def __init__(self, model, nm):
        b = model.blocks
        np_, ne = nm["p"], nm["eta"]
        self.params = model.params
        self.p_lhs = scipy.linalg.cho_factor(
            np.ascontiguousarray(b["p_lhs"][:np_, :np_]))
        self.e_lhs = scipy.linalg.cho_factor(
            np.ascontiguousarray(b["e_lhs"][:ne, :ne]))
        self.p_robin = np.ascontiguousarray(b["p_robin"][:np_, :np_])
        self.p_robin_l = b["p_robin_l"][:np_, 0]
        self.p_lhs_l = b["p_lhs_l"][:np_, 0]
        self.p_wall = np.ascontiguousarray(b["p_wall"][:np_, :ne])
        self.p_norm_l = b["p_norm_l"][:np_, 0]
        self.norm_ll = float(b["norm_ll"][0, 0])
        self.e_mass = np.ascontiguousarray(b["e_mass"][:ne, :ne])
        self.e_press = np.ascontiguousarray(b["e_press"][:ne, :np_])
        self.e_press_l = b["e_press_l"][:ne, 0]

    def p_norm(self, a, g):
        return float(np.sqrt(abs(
            a @ a + 2.0 * g * (self.p_norm_l @ a) + g * g * self.norm_ll)))

    def solve(self, vel_div, vel_tract, a_eta_k, a_eta_km1, a_p_k, g_k, g_new):
        """Run the subiteration for one step.

        vel_div is the projected divergence of the new velocity (times
        rho_f/dt, sign included), vel_tract the projected viscous traction
        term; both stay fixed across the subiterates.
        """
        params = self.params
        coeff = params.rho_s * params.h_s / params.dt ** 2
        e_hist = coeff * (self.e_mass @ (2.0 * a_eta_k - a_eta_km1))
        a_p, g_p = a_p_k, g_k
        a_e = a_eta_k
        r = float("inf")
        for j in range(1, params.max_implicit_iters + 1):
            dtt = (a_e - 2.0 * a_eta_k + a_eta_km1) / params.dt ** 2
            rhs_p = (vel_div - params.rho_f * (self.p_wall @ dtt)
                     + params.alpha_rob * (self.p_robin @ a_p
                                           + g_p * self.p_robin_l)
                     - g_new * self.p_lhs_l)
            a_p_new = scipy.linalg.cho_solve(self.p_lhs, rhs_p)
            rhs_e = (e_hist + self.e_press @ a_p_new
                     + g_new * self.e_press_l + vel_tract)
            a_e_new = scipy.linalg.cho_solve(self.e_lhs, rhs_e)
            num_p = self.p_norm(a_p_new - a_p, g_new - g_p)
            den_p = self.p_norm(a_p_new, g_new)
            diff_e = a_e_new - a_e
            r = min(_ratio(num_p, den_p),
                    _ratio(float(np.linalg.norm(diff_e)),
                           float(np.linalg.norm(a_e_new))))
            a_p, g_p, a_e = a_p_new, g_new, a_e_new
            if r < params.tol_implicit:
                return a_p, a_e, j
        raise NonConvergence(-1, params.max_implicit_iters, r)


def online_rom1(model, n, params=None, boundary=None, compute_cond=True):
    """Run reduced variant 1 with n modes per field.

    Raises SingularSaddle when the explicit saddle system of this mode
    combination is numerically singular.
    """
    if model.variant != 1:
        raise UsageError("online_rom1 needs a variant-1 model")
    params = params if params is not None else model.params
    boundary = boundary if boundary is not None else model.boundary
    nm = model.mode_counts(n)
    nv, nl, np_, ne = nm["u"], nm["lambda"], nm["p"], nm["eta"]
    b = model.blocks

    # More multiplier modes than velocity modes leave the constraint block
    # rank-deficient whatever the data: the saddle is structurally singular.
    if nl > nv:
        raise SingularSaddle(nv, nl)
    saddle = np.zeros((nv + nl, nv + nl))
    saddle[:nv, :nv] = b["u_lhs"][:nv, :nv]
    saddle[:nv, nv:] = b["coupling"][:nv, :nl]
    saddle[nv:, :nv] = b["coupling"][:nv, :nl].T
    factor = linalg.DenseFactor(saddle)
    if factor.singular:
        raise SingularSaddle(nv, nl)
    cond = linalg.cond2(saddle) if compute_cond else np.nan

    u_mass = np.ascontiguousarray(b["u_mass"][:nv, :nv])
    u_press = np.ascontiguousarray(b["u_press"][:nv, :np_])
    u_press_l = b["u_press_l"][:nv, 0]
    constraint = np.ascontiguousarray(b["constraint"][:nl, :ne])
    p_div = np.ascontiguousarray(b["p_div"][:np_, :nv])
    e_visc = np.ascontiguousarray(b["e_visc"][:ne, :nv])
    inner = _ImplicitReduced(model, nm)

    K = params.K
    out = ROMTrajectory(
        variant=1, n_requested=n, n_modes=nm,
        times=params.dt * np.arange(1, K + 1), g=np.empty(K),
        a_vel=np.empty((nv, K)), a_aux=np.empty((nl, K)),
        a_p0=np.empty((np_, K)), a_eta=np.empty((ne, K)),
        iters=np.empty(K, dtype=np.int64),
        t_explicit=np.empty(K), t_implicit=np.empty(K),
        cond_explicit=cond)

    a_u = np.zeros(nv)
    a_p = np.zeros(np_)
    g_k = 0.0
    a_eta = np.zeros(ne)
    a_eta_prev = np.zeros(ne)
    rhs = np.empty(nv + nl)
    dt = params.dt
    for k in range(K):
        tic = time.perf_counter()
        rhs[:nv] = u_mass @ a_u - u_press @ a_p - g_k * u_press_l
        rhs[nv:] = constraint @ ((a_eta - a_eta_prev) / dt)
        sol = factor.solve(rhs)
        a_u_new, a_lam = sol[:nv], sol[nv:]
        mid = time.perf_counter()

        g_new = boundary.p_in((k + 1) * dt)
        vel_div = -(params.rho_f / dt) * (p_div @ a_u_new)
        vel_tract = -2.0 * params.mu_f * (e_visc @ a_u_new)
        try:
            a_p_new, a_eta_new, iters = inner.solve(
                vel_div, vel_tract, a_eta, a_eta_prev, a_p, g_k, g_new)
        except NonConvergence as exc:
            raise NonConvergence(k + 1, exc.iterations, exc.residual) from None
        toc = time.perf_counter()

        out.a_vel[:, k] = a_u_new
        out.a_aux[:, k] = a_lam
        out.a_p0[:, k] = a_p_new
        out.a_eta[:, k] = a_eta_new
        out.g[k] = g_new
        out.iters[k] = iters
        out.t_explicit[k] = mid - tic
        out.t_implicit[k] = toc - mid
        a_u, a_p, g_k = a_u_new, a_p_new, g_new
        a_eta_prev, a_eta = a_eta, a_eta_new
    return out


def online_rom2(model, n, params=None, boundary=None, compute_cond=True):
    """Run reduced variant 2 with n modes per field."""
    if model.variant != 2:
        raise UsageError("online_rom2 needs a variant-2 model")
    params = params if params is not None else model.params
    boundary = boundary if boundary is not None else model.boundary
    nm = model.mode_counts(n)
    nv, np_, ne = nm["z"], nm["p"], nm["eta"]
    b = model.blocks

    lhs = np.ascontiguousarray(b["z_lhs"][:nv, :nv])
    factor = scipy.linalg.cho_factor(lhs)
    cond = linalg.cond2(lhs) if compute_cond else np.nan

    z_mass = np.ascontiguousarray(b["z_mass"][:nv, :nv])
    z_mass_h = np.ascontiguousarray(b["z_mass_h"][:nv, :ne])
    z_lhs_h = np.ascontiguousarray(b["z_lhs_h"][:nv, :ne])
    z_press = np.ascontiguousarray(b["z_press"][:nv, :np_])
    z_press_l = b["z_press_l"][:nv, 0]
    p_div = np.ascontiguousarray(b["p_div"][:np_, :nv])
    p_div_h = np.ascontiguousarray(b["p_div_h"][:np_, :ne])
    e_visc = np.ascontiguousarray(b["e_visc"][:ne, :nv])
    e_visc_h = np.ascontiguousarray(b["e_visc_h"][:ne, :ne])
    inner = _ImplicitReduced(model, nm)

    K = params.K
    out = ROMTrajectory(
        variant=2, n_requested=n, n_modes=nm,
        times=params.dt * np.arange(1, K + 1), g=np.empty(K),
        a_vel=np.empty((nv, K)), a_aux=np.empty((ne, K)),
        a_p0=np.empty((np_, K)), a_eta=np.empty((ne, K)),
        iters=np.empty(K, dtype=np.int64),
        t_explicit=np.empty(K), t_implicit=np.empty(K),
        cond_explicit=cond)

    a_z = np.zeros(nv)
    d_prev = np.zeros(ne)
    a_p = np.zeros(np_)
    g_k = 0.0
    a_eta = np.zeros(ne)
    a_eta_prev = np.zeros(ne)
    dt = params.dt
    for k in range(K):
        tic = time.perf_counter()
        d_new = (a_eta - a_eta_prev) / dt
        rhs = (z_mass @ a_z + z_mass_h @ d_prev
               - z_press @ a_p - g_k * z_press_l - z_lhs_h @ d_new)
        a_z_new = scipy.linalg.cho_solve(factor, rhs)
        mid = time.perf_counter()

        g_new = boundary.p_in((k + 1) * dt)
        vel_div = -(params.rho_f / dt) * (p_div @ a_z_new + p_div_h @ d_new)
        vel_tract = -2.0 * params.mu_f * (e_visc @ a_z_new
                                          + e_visc_h @ d_new)
        try:
            a_p_new, a_eta_new, iters = inner.solve(
                vel_div, vel_tract, a_eta, a_eta_prev, a_p, g_k, g_new)
        except NonConvergence as exc:
            raise NonConvergence(k + 1, exc.iterations, exc.residual) from None
        toc = time.perf_counter()

        out.a_vel[:, k] = a_z_new
        out.a_aux[:, k] = d_new
        out.a_p0[:, k] = a_p_new
        out.a_eta[:, k] = a_eta_new
        out.g[k] = g_new
        out.iters[k] = iters
        out.t_explicit[k] = mid - tic
        out.t_implicit[k] = toc - mid
        a_z, a_p, g_k, d_prev = a_z_new, a_p_new, g_new, d_new
        a_eta_prev, a_eta = a_eta, a_eta_new
    return out


def run_online(model, n, **kw):
    """Dispatch to the online loop matching the model variant."""
    if model.variant == 1:
        return online_rom1(model, n, **kw)
    return online_rom2(model, n, **kw)


def reconstruct(model, rtraj, field):
    """Full-order coefficients of one field for every step of an online run.

    Velocity reconstruction for variant 2 adds the lifted wall motion; the
    online loop itself never touches these full-size arrays.
    """
    nm = rtraj.n_modes
    if field == "p":
        zp = model.bases["p"].modes[:, :nm["p"]]
        return zp @ rtraj.a_p0 + np.outer(model.ell, rtraj.g)
    if field == "eta":
        ze = model.bases["eta"].modes[:, :nm["eta"]]
        return ze @ rtraj.a_eta
    if field == "lambda":
        if model.variant != 1:
            raise UsageError("only variant 1 carries a reduced multiplier")
        zl = model.bases["lambda"].modes[:, :nm["lambda"]]
        return zl @ rtraj.a_aux
    if field == "u":
        if model.variant == 1:
            zu = model.bases["u"].modes[:, :nm["u"]]
            return zu @ rtraj.a_vel
        zz = model.bases["z"].modes[:, :nm["z"]]
        h_mat = model.blocks["wall_lift"][:, :nm["eta"]]
        return zz @ rtraj.a_vel + h_mat @ rtraj.a_aux
    raise UsageError(f"unknown field {field!r} for reconstruction")


def validate_projection(model, ops, rng, n_probes=3):
    """Max relative mismatch between projected blocks and Z^T A Z probes."""
    b = model.blocks
    lhs_u = ops.m_u + ops.a_visc
    if model.variant == 1:
        pairs = [
            ("u_lhs", lhs_u, model.bases["u"].modes, model.bases["u"].modes),
            ("coupling", ops.c_n, model.bases["u"].modes,
             model.bases["lambda"].modes),
            ("p_div", ops.div_u, model.bases["p"].modes,
             model.bases["u"].modes),
            ("e_visc", ops.t_visc, model.bases["eta"].modes,
             model.bases["u"].modes),
        ]
    else:
        zz = model.bases["z"].modes
        pairs = [
            ("z_lhs", lhs_u, zz, zz),
            ("z_lhs_h", lhs_u, zz, b["wall_lift"]),
            ("p_div", ops.div_u, model.bases["p"].modes, zz),
            ("e_visc", ops.t_visc, model.bases["eta"].modes, zz),
        ]
    pairs.append(("p_wall", ops.m_sigma_e.T, model.bases["p"].modes,
                  model.bases["eta"].modes))
    pairs.append(("e_lhs",
                  (model.params.rho_s * model.params.h_s / model.params.dt ** 2
                   + model.params.c0) * ops.m_e + model.params.c1 * ops.k_e,
                  model.bases["eta"].modes, model.bases["eta"].modes))

    worst = 0.0
    for name, mat, left, right in pairs:
        block = b[name]
        for _ in range(n_probes):
            x = rng.standard_normal(block.shape[0])
            y = rng.standard_normal(block.shape[1])
            lhs = x @ (block @ y)
            rhs = (left @ x) @ (mat @ (right @ y))
            scale = max(abs(lhs), abs(rhs), 1e-300)
            worst = max(worst, abs(lhs - rhs) / scale)
    return worst

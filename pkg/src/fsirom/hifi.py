"""High-fidelity time stepping for the channel flow / elastic wall system.

Each time step splits into

1. an explicit viscous step for the velocity, with the wall velocity of the
   previous step imposed on the interface (no incompressibility here);
2. an implicit subiteration between a pressure Poisson problem, carrying a
   Robin interface term that couples it to the wall acceleration, and the
   wall displacement equation loaded by the fluid traction.

The subiteration stops when the smaller of the relative pressure increment
(L2 norm on the domain) and the relative displacement increment (H1
seminorm on the interface) drops below ``params.tol_implicit``.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import NonConvergence
from .meshfe import apply_dirichlet, as_array, assemble, FieldVector
from .problem import default_boundary

_NORM_FLOOR = 1e-14


class BCSolve:
    """One constrained linear operator, eliminated and factored once.

    Keeps the unconstrained matrix around so that per-step boundary values
    only cost a matvec on the right-hand side.
    """

    def __init__(self, matrix, dofs):
        self.matrix = matrix.tocsr()
        self.dofs = np.asarray(dofs, dtype=np.int64)
        n = matrix.shape[0]
        mat_bc, _ = apply_dirichlet(matrix, np.zeros(n), self.dofs,
                                    np.zeros(self.dofs.size))
        self._solve = linalg.factorize(mat_bc)

    def solve(self, rhs, values=0.0):
        n = self.matrix.shape[0]
        g = np.zeros(n)
        g[self.dofs] = values
        b = np.asarray(rhs, dtype=float) - self.matrix @ g
        b[self.dofs] = g[self.dofs]
        return self._solve(b)


class Operators:
    """Assembled forms and prefactored constrained solvers for one setup."""

    def __init__(self, fesys, params, boundary=None):
        self.fesys = fesys
        self.params = params
        self.boundary = boundary if boundary is not None else default_boundary()

        self.m_u = assemble("m_u", fesys, params)
        self.a_visc = assemble("a_visc", fesys, params)
        self.grad_p = assemble("grad_p", fesys)
        self.div_u = assemble("div_u", fesys)
        self.k_p = assemble("k_p", fesys)
        self.m_p = assemble("m_p", fesys)
        self.m_sigma_p = assemble("m_sigma_p", fesys)
        self.m_e = assemble("m_e", fesys)
        self.k_e = assemble("k_e", fesys)
        self.m_sigma_e = assemble("m_sigma_e", fesys)
        self.c_n = assemble("c_n", fesys)
        self.t_visc = assemble("t_visc", fesys)

        trace = fesys.sigma_trace_nodes
        self.expl_dofs = np.concatenate([
            fesys.vel_dof(0, trace),          # no slip along the wall
            fesys.vel_dof(1, trace),          # wall-normal velocity match
            fesys.vel_dof(1, fesys.sym_nodes),  # symmetry axis
        ])
        self._n_trace = trace.size
        lhs_u = (self.m_u + self.a_visc).tocsr()
        self.explicit = BCSolve(lhs_u, self.expl_dofs)
        # Variant with only the symmetry condition eliminated, for reading
        # off the interface reaction of the explicit step.
        free_mat, _ = apply_dirichlet(
            lhs_u, np.zeros(fesys.n_u), fesys.vel_dof(1, fesys.sym_nodes),
            np.zeros(fesys.sym_nodes.size))
        self.free_mat = free_mat

        self.p_dofs = np.concatenate([fesys.p1_in, fesys.p1_out])
        self.pressure = BCSolve(
            (self.k_p + params.alpha_rob * self.m_sigma_p).tocsr(),
            self.p_dofs)

        coeff = params.rho_s * params.h_s / params.dt ** 2
        self.structure = BCSolve(
            (coeff * self.m_e + params.c1 * self.k_e
             + params.c0 * self.m_e).tocsr(),
            fesys.eta_ends)

        self._m_e_solve = linalg.factorize(self.m_e)

    def norm_q(self, p):
        """L2 norm of a pressure coefficient vector."""
        return float(np.sqrt(abs(p @ (self.m_p @ p))))

    def norm_e(self, eta):
        """H1 seminorm of an interface displacement coefficient vector."""
        return float(np.sqrt(abs(eta @ (self.k_e @ eta))))


@dataclass
class HFState:
    """Fields carried between time steps; step k holds the values at t_k."""

    k: int
    u: np.ndarray
    p: np.ndarray
    eta: np.ndarray
    eta_prev: np.ndarray

    @classmethod
    def resting(cls, fesys):
        return cls(k=0, u=np.zeros(fesys.n_u), p=np.zeros(fesys.n_p),
                   eta=np.zeros(fesys.n_eta), eta_prev=np.zeros(fesys.n_eta))


def explicit_rhs(state, ops):
    """Unconstrained right-hand side of the viscous step at state.k."""
    return ops.m_u @ state.u - ops.grad_p @ state.p


def explicit_step(state, ops):
    """Velocity at the next step, wall velocity imposed from known data."""
    wall_vel = (state.eta - state.eta_prev) / ops.params.dt
    values = np.concatenate([
        np.zeros(ops._n_trace), wall_vel,
        np.zeros(ops.fesys.sym_nodes.size),
    ])
    return ops.explicit.solve(explicit_rhs(state, ops), values)


def extract_multiplier(u_new, rhs_unconstrained, ops, fesys):
    """Interface reaction of the explicit step as an L2(Sigma) field.

    The residual of the unconstrained momentum equation at the constrained
    interface rows is the weak normal traction enforcing the wall velocity;
    its Riesz representative in the displacement space is returned.
    """
    u_new = as_array(u_new)
    b = np.asarray(rhs_unconstrained, dtype=float).copy()
    b[fesys.vel_dof(1, fesys.sym_nodes)] = 0.0
    resid = b - ops.free_mat @ u_new
    r_sigma = resid[fesys.vel_dof(1, fesys.sigma_trace_nodes)]
    return FieldVector("lambda", ops._m_e_solve(r_sigma))


def pressure_substep(u_new, eta_iter, p_iter, state, ops):
    """One pressure Poisson solve of the subiteration.

    eta_iter and p_iter are the current iterates of the new displacement
    and pressure (p_iter enters the Robin term), u_new the explicit
    velocity.  Inlet and outlet values are imposed at the new time.
    """
    params = ops.params
    t_next = (state.k + 1) * params.dt
    dtt = (eta_iter - 2.0 * state.eta + state.eta_prev) / params.dt ** 2
    rhs = (-(params.rho_f / params.dt) * (ops.div_u @ u_new)
           - params.rho_f * (ops.m_sigma_e.T @ dtt)
           + params.alpha_rob * (ops.m_sigma_p @ p_iter))
    values = np.concatenate([
        np.full(ops.fesys.p1_in.size, ops.boundary.p_in(t_next)),
        np.full(ops.fesys.p1_out.size, ops.boundary.p_out(t_next)),
    ])
    return ops.pressure.solve(rhs, values)


def structure_substep(u_new, p_next, state, ops):
    """Wall displacement under the current traction iterate."""
    params = ops.params
    coeff = params.rho_s * params.h_s / params.dt ** 2
    traction = ops.m_sigma_e @ p_next - 2.0 * params.mu_f * (ops.t_visc @ u_new)
    rhs = coeff * (ops.m_e @ (2.0 * state.eta - state.eta_prev)) + traction
    return ops.structure.solve(rhs, np.zeros(2))


def _ratio(num, den):
    if den < _NORM_FLOOR:
        return 0.0 if num < _NORM_FLOOR else float("inf")
    return num / den


def implicit_loop(u_new, state, ops):
    """Pressure/displacement subiteration until the increment test passes.

    Returns (p_next, eta_next, iterations).  Raises NonConvergence if the
    iteration cap is hit.
    """
    params = ops.params
    p_prev = state.p
    eta_prev = state.eta
    r = float("inf")
    for j in range(1, params.max_implicit_iters + 1):
        p_new = pressure_substep(u_new, eta_prev, p_prev, state, ops)
        eta_new = structure_substep(u_new, p_new, state, ops)
        r = min(_ratio(ops.norm_q(p_new - p_prev), ops.norm_q(p_new)),
                _ratio(ops.norm_e(eta_new - eta_prev), ops.norm_e(eta_new)))
        p_prev, eta_prev = p_new, eta_new
        if r < params.tol_implicit:
            return p_new, eta_new, j
    raise NonConvergence(state.k + 1, params.max_implicit_iters, r)


@dataclass
class Trajectory:
    """Recorded fields of a run; column k-1 holds the step-k values."""

    times: np.ndarray
    u: np.ndarray
    p: np.ndarray
    eta: np.ndarray
    lam: np.ndarray
    iters: np.ndarray
    t_explicit: np.ndarray
    t_implicit: np.ndarray
    extras: dict = field(default_factory=dict)

    @property
    def n_steps(self):
        return self.times.size


def _multipliers(traj, ops, fesys):
    """Interface reactions for every step, computed in blocks."""
    K = traj.n_steps
    lam = np.empty((fesys.n_eta, K))
    sym_y = fesys.vel_dof(1, fesys.sym_nodes)
    sigma_y = fesys.vel_dof(1, fesys.sigma_trace_nodes)
    for lo in range(0, K, 256):
        hi = min(lo + 256, K)
        u_prev = np.zeros((fesys.n_u, hi - lo))
        p_prev = np.zeros((fesys.n_p, hi - lo))
        if lo == 0:
            u_prev[:, 1:] = traj.u[:, : hi - 1]
            p_prev[:, 1:] = traj.p[:, : hi - 1]
        else:
            u_prev[:] = traj.u[:, lo - 1: hi - 1]
            p_prev[:] = traj.p[:, lo - 1: hi - 1]
        rhs = ops.m_u @ u_prev - ops.grad_p @ p_prev
        rhs[sym_y] = 0.0
        resid = rhs - ops.free_mat @ traj.u[:, lo:hi]
        lam[:, lo:hi] = ops._m_e_solve(resid[sigma_y])
    return lam


def run(params, fesys, boundary=None, operators=None, multipliers=True):
    """Advance the coupled system from rest over params.K steps.

    Returns a Trajectory whose columns are the steps 1..K (the resting
    initial state is not stored).
    """
    ops = operators if operators is not None else Operators(
        fesys, params, boundary)
    K = params.K
    traj = Trajectory(
        times=params.dt * np.arange(1, K + 1),
        u=np.empty((fesys.n_u, K)), p=np.empty((fesys.n_p, K)),
        eta=np.empty((fesys.n_eta, K)), lam=None,
        iters=np.empty(K, dtype=np.int64),
        t_explicit=np.empty(K), t_implicit=np.empty(K))

    state = HFState.resting(fesys)
    for k in range(K):
        tic = time.perf_counter()
        u_new = explicit_step(state, ops)
        mid = time.perf_counter()
        p_new, eta_new, iters = implicit_loop(u_new, state, ops)
        toc = time.perf_counter()

        traj.u[:, k] = u_new
        traj.p[:, k] = p_new
        traj.eta[:, k] = eta_new
        traj.iters[k] = iters
        traj.t_explicit[k] = mid - tic
        traj.t_implicit[k] = toc - mid
        state = HFState(k=k + 1, u=u_new, p=p_new,
                        eta=eta_new, eta_prev=state.eta)

    if multipliers:
        traj.lam = _multipliers(traj, ops, fesys)
    return traj

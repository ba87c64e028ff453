"""Error, conditioning and performance reporting for reduced runs.

Relative errors are time-averaged with a floor filter: steps where the
reference norm falls below 1e-12 times its maximum over the run are left
out of the average (the early steps of a run that starts from rest carry
no information).  The maximum over the kept steps is reported alongside.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import UsageError
from .meshfe import assemble
from .pod import inner_product
from .rom import reconstruct

_FLOOR_RTOL = 1e-12


def _col_norms(cols, gram):
    return np.sqrt(np.abs(np.einsum("ik,ik->k", cols, gram @ cols)))


def _averaged(ref_norms, diff_norms):
    floor = _FLOOR_RTOL * ref_norms.max(initial=0.0)
    valid = ref_norms >= max(floor, 1e-300)
    if not np.any(valid):
        return float("nan"), float("nan"), 0
    ratios = diff_norms[valid] / ref_norms[valid]
    return float(ratios.mean()), float(ratios.max()), int(valid.sum())


@dataclass
class ErrorReport:
    """Time-averaged and worst-step relative errors of one online run."""

    variant: int
    n: int
    err_u: float
    err_p: float
    err_eta: float
    err_stress: float
    err_u_max: float
    err_p_max: float
    err_eta_max: float
    n_valid: dict


def relative_errors(hf_traj, model, rtraj, fesys):
    """Errors of a reduced run against its high-fidelity reference.

    Velocity in the H1 seminorm, pressure in L2, displacement in the
    interface H1 seminorm, and the normal traction mismatch on the wall in
    L2 of the interface (pressure minus twice the viscosity times the
    one-sided normal derivative of the vertical velocity).
    """
    if hf_traj.n_steps != rtraj.n_steps:
        raise UsageError("trajectories cover a different number of steps")
    report = {}
    n_valid = {}
    for tag, ref in (("u", hf_traj.u), ("p", hf_traj.p),
                     ("eta", hf_traj.eta)):
        gram = inner_product(fesys, tag)
        rec = reconstruct(model, rtraj, tag)
        avg, worst, kept = _averaged(_col_norms(ref, gram),
                                     _col_norms(ref - rec, gram))
        report[tag] = (avg, worst)
        n_valid[tag] = kept

    m_se = assemble("m_sigma_e", fesys)
    t_visc = assemble("t_visc", fesys)
    m_e = assemble("m_e", fesys)
    mu = model.params.mu_f
    solve_me = linalg.factorize(m_e)

    def traction_norms(p_cols, u_cols):
        load = m_se @ p_cols - 2.0 * mu * (t_visc @ u_cols)
        riesz = solve_me(load)
        return np.sqrt(np.abs(np.einsum("ik,ik->k", load, riesz)))

    u_rec = reconstruct(model, rtraj, "u")
    p_rec = reconstruct(model, rtraj, "p")
    ref_norms = traction_norms(hf_traj.p, hf_traj.u)
    diff_norms = traction_norms(hf_traj.p - p_rec, hf_traj.u - u_rec)
    stress_avg, _, stress_kept = _averaged(ref_norms, diff_norms)
    n_valid["stress"] = stress_kept

    return ErrorReport(
        variant=rtraj.variant, n=rtraj.n_requested,
        err_u=report["u"][0], err_p=report["p"][0], err_eta=report["eta"][0],
        err_stress=stress_avg,
        err_u_max=report["u"][1], err_p_max=report["p"][1],
        err_eta_max=report["eta"][1], n_valid=n_valid)


def explicit_condition(model, n):
    """Spectral condition number of the reduced explicit system at size n."""
    nm = model.mode_counts(n)
    b = model.blocks
    if model.variant == 1:
        nv, nl = nm["u"], nm["lambda"]
        if nl > nv:
            return float("inf")
        saddle = np.zeros((nv + nl, nv + nl))
        saddle[:nv, :nv] = b["u_lhs"][:nv, :nv]
        saddle[:nv, nv:] = b["coupling"][:nv, :nl]
        saddle[nv:, :nv] = b["coupling"][:nv, :nl].T
        return linalg.cond2(saddle)
    nv = nm["z"]
    return linalg.cond2(np.ascontiguousarray(b["z_lhs"][:nv, :nv]))


def iteration_stats(iters):
    """(max, mean) of the subiteration counts of a run."""
    iters = np.asarray(iters)
    if iters.size == 0:
        raise UsageError("no iteration counts recorded")
    return int(iters.max()), float(iters.mean())


@dataclass
class PerfReport:
    """Wall-time accounting of one reduced run against its reference."""

    variant: int
    n: int
    cond_explicit: float
    it_max: int
    it_avg: float
    t_explicit_s: float
    t_implicit_s: float
    t_total_s: float
    speedup_total: float


def speedup(hf_traj, rtraj):
    """Performance report of an online run relative to the reference run.

    Only the time-stepping work is counted on both sides; reconstruction
    of full fields from reduced coefficients is post-processing and stays
    out of the totals.
    """
    it_max, it_avg = iteration_stats(rtraj.iters)
    t_expl = float(rtraj.t_explicit.sum())
    t_impl = float(rtraj.t_implicit.sum())
    total = t_expl + t_impl
    hf_total = float(hf_traj.t_explicit.sum() + hf_traj.t_implicit.sum())
    return PerfReport(
        variant=rtraj.variant, n=rtraj.n_requested,
        cond_explicit=float(rtraj.cond_explicit),
        it_max=it_max, it_avg=it_avg,
        t_explicit_s=t_expl, t_implicit_s=t_impl, t_total_s=total,
        speedup_total=hf_total / total if total > 0 else float("inf"))

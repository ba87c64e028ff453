"""Coupled channel-flow / elastic-wall solver with projection-based
reduced-order models."""

from .errors import (EmptySpectrum, NonConvergence, ParameterError,
                     SingularSaddle, SolverError, UsageError)
from .problem import (BoundaryData, PhysicalParams, RunSetup, default_boundary,
                      default_params, derived_coeffs, inlet_pressure,
                      load_config)
from .meshfe import (FieldVector, FESystem, HarmonicExtension, Mesh,
                     apply_dirichlet, assemble, build_mesh, build_system,
                     harmonic_extend, load_vector, sigma_load_vector,
                     traction_load)
from .hifi import (HFState, Operators, Trajectory, explicit_step,
                   extract_multiplier, implicit_loop, pressure_substep,
                   run, structure_substep)
from .pod import PODBasis, compute_basis, correlation, inner_product, \
    retained_energy
from .rom import (ReducedModel, ROMTrajectory, build_bases, build_lifting,
                  homogenize_pressure, online_rom1, online_rom2, project_rom1,
                  project_rom2, reconstruct, run_online, wall_shift_snapshots)
from .analysis import (ErrorReport, PerfReport, explicit_condition,
                       iteration_stats, relative_errors, speedup)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

"""Minimal-graph Dirichlet problems over unbounded domains of negatively
curved model manifolds: exhaustion solver, barrier certification, and
nonexistence experiments."""

from .barriers import (BarrierProfile, SupersolutionCertificate,
                       barrier_polynomial, certify_supersolution, g_eval,
                       gp_eval, make_g_profile, make_gp_profile,
                       make_psi_profile, min_barrier_constant, psi_eval,
                       radial_supersolution_residual, universal_constant_B,
                       upper_barrier_field)
from .exhaustion import (AsymptoticReport, BoundaryData, ExhaustionSchedule,
                         attainment_certificate, phi_const, phi_cos,
                         phi_field, phi_step, phi_table, run_exhaustion,
                         transfer_boundary_data, truncate)
from .geometry import (Chart, DomainSpec, ModelManifold, ball_exterior,
                       disk_interior, domain_from_id, fermi_chart, full_plane,
                       half_plane, hyperbolic_space, inward_mean_curvature,
                       laplacian_of_distance, manifold_from_id, polar_chart,
                       sc_decay_check, sc_witness, sinh_exp_manifold)
from .nonexistence import (CounterexampleSpec, GapReport,
                           build_counterexample, jenkins_serrin_bound,
                           run_gap_study)
from .solver import (DiscreteField, Grid, SolveParams, SolverError,
                     discrete_energy, discrete_residual, fermi_rect_grid,
                     harmonic_extension, polar_annulus_grid, polar_disk_grid,
                     solve_dirichlet)

__version__ = "0.1.0"

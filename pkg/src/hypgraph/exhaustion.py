"""Asymptotic Dirichlet driver: nested truncations, transfer of ideal
data, probe-compact convergence monitoring, and barrier-certified
boundary attainment at ideal points.

A run solves the Dirichlet problem on an increasing family of bounded
truncations of the domain, hands each stage's solution to the next as a
warm start, and declares convergence when successive solutions stop
moving on designated probe compacts.  Attainment at an ideal point x is
certified a posteriori: the solution must stay within
``eps + Sigma + slack`` of the prescribed value near x, where Sigma is
the capped height barrier over a convexity witness at x and eps is the
data's oscillation over the witness neighborhood.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import solver
from .barriers import upper_barrier_field
from .geometry import DomainSpec, fermi_chart, polar_chart, sc_witness
from .solver import (FINITE_BOUNDARY, INTERIOR, TRUNCATION_CAP, Grid,
                     SolveParams, fermi_rect_grid, polar_annulus_grid,
                     polar_disk_grid, solve_dirichlet)

_ENDPOINT_TOL = 1e-8


# ---------------------------------------------------------------------------
# boundary data
# ---------------------------------------------------------------------------

@dataclass
class BoundaryData:
    """Continuous data on the cone-topology boundary.

    ``finite`` maps the finite-boundary parameter (angle for circles,
    t for the base geodesic) to a value; ``ideal`` maps the ideal angle.
    ``field`` overrides both with a chart-point function, which is how
    exact-solution data is prescribed in oracle runs.  When finite and
    ideal parts share an ideal endpoint (half-plane domains) their
    values must agree there; a positive ``blend_window`` (radians)
    instead morphs the cap data linearly onto the finite endpoint value.
    """
    finite: Optional[Callable] = None
    ideal: Optional[Callable] = None
    field: Optional[Callable] = None
    blend_window: float = 0.0
    label: str = ""


def phi_const(v):
    v = float(v)
    return BoundaryData(finite=lambda t: np.full_like(np.asarray(t, float), v),
                        ideal=lambda a: np.full_like(np.asarray(a, float), v),
                        label=f"const:{v:g}")


def phi_cos():
    return BoundaryData(ideal=np.cos, finite=np.cos, label="cos")


def phi_step(windows, base=0.0):
    """Piecewise-constant ideal data: ``windows`` is a list of
    ``(lo, hi, value)`` angle ranges on top of ``base``."""
    windows = [(float(a), float(b), float(v)) for a, b, v in windows]

    def ideal(theta):
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, float(base))
        for lo, hi, v in windows:
            out = np.where((theta >= lo) & (theta <= hi), v, out)
        return out

    return BoundaryData(ideal=ideal, finite=lambda t: np.full_like(
        np.asarray(t, float), float(base)), label="step")


def phi_field(fn, label="field"):
    return BoundaryData(field=fn, label=label)


def phi_table(path):
    """Ideal data from a two-column (angle, value) CSV, linearly
    interpolated."""
    data = np.loadtxt(path, delimiter=",", comments="#")
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError(f"table {path} must have two columns (coordinate, value)")
    coords, vals = data[np.argsort(data[:, 0])].T
    return BoundaryData(
        ideal=lambda a: np.interp(np.asarray(a, float), coords, vals),
        finite=lambda t: np.interp(np.asarray(t, float), coords, vals),
        label=f"table:{path}",
    )


# ---------------------------------------------------------------------------
# truncation
# ---------------------------------------------------------------------------

def truncate(domain: DomainSpec, R, h, h2=None):
    """Grid over the bounded truncation of the domain at radius R.

    Polar domains are cut by the geodesic sphere of radius R about the
    pole (a coordinate box); half-plane domains use the Fermi coordinate
    box [0, R] x [-R, R], whose sides are a geodesic and an equidistant
    curve, all mean convex.  Cap nodes are tagged ``TRUNCATION_CAP``,
    nodes on the original boundary ``FINITE_BOUNDARY``.
    """
    if domain.kind == "full":
        return polar_disk_grid(domain.chart, R, h, outer_tag=TRUNCATION_CAP, h2=h2)
    if domain.kind == "ball-exterior":
        if R <= domain.rho:
            raise ValueError(
                f"truncation radius {R} does not reach past the excluded ball "
                f"(rho = {domain.rho})")
        return polar_annulus_grid(domain.chart, domain.rho, R, h,
                                  inner_tag=FINITE_BOUNDARY,
                                  outer_tag=TRUNCATION_CAP, h2=h2)
    if domain.kind == "half-plane":
        return fermi_rect_grid(domain.chart, (0.0, R), (-R, R), h,
                               side_tags={"s0": FINITE_BOUNDARY,
                                          "s1": TRUNCATION_CAP,
                                          "t0": TRUNCATION_CAP,
                                          "t1": TRUNCATION_CAP}, h2=h2)
    if domain.kind == "disk":
        # already bounded; the truncation is the domain itself
        return polar_disk_grid(domain.chart, domain.rho, h,
                               outer_tag=FINITE_BOUNDARY, h2=h2)
    raise ValueError(f"no truncation rule for domain {domain.kind!r}")


def transfer_boundary_data(phi: BoundaryData, grid: Grid, domain: DomainSpec):
    """Node values for the tagged boundary of a truncation grid.

    Finite-boundary nodes evaluate the finite part at their boundary
    parameter; cap nodes evaluate the ideal part at the node's ideal
    direction seen from the pole.  Mixed data on half-plane grids is
    checked for agreement at the two shared ideal endpoints.
    """
    vals = np.zeros(grid.n_nodes)
    bmask = grid.boundary_mask()
    if phi.field is not None:
        vals[bmask] = phi.field(grid.node_x1[bmask], grid.node_x2[bmask])
        return vals

    fin = grid.tag == FINITE_BOUNDARY
    cap = grid.tag == TRUNCATION_CAP
    if fin.any():
        if phi.finite is None:
            raise ValueError("domain has finite boundary but phi has no finite part")
        vals[fin] = phi.finite(grid.node_x2[fin])
    if cap.any():
        if phi.ideal is None:
            raise ValueError("truncation has cap nodes but phi has no ideal part")
        angles = grid.chart.ideal_direction(grid.node_x1[cap], grid.node_x2[cap])
        vals[cap] = phi.ideal(angles)

    if fin.any() and cap.any() and grid.kind == "fermi-rect":
        # shared ideal endpoints of the half-plane: t -> +inf is angle 0,
        # t -> -inf is angle pi
        t_lo = grid.node_x2[fin].min()
        t_hi = grid.node_x2[fin].max()
        for t_end, angle in ((t_hi, 0.0), (t_lo, np.pi)):
            gap = abs(float(phi.finite(t_end)) - float(phi.ideal(angle)))
            if gap > _ENDPOINT_TOL and phi.blend_window <= 0.0:
                raise ValueError(
                    f"boundary data is discontinuous at the shared ideal "
                    f"endpoint (angle {angle:.3f}, mismatch {gap:.3g}); set a "
                    "blend_window to run anyway")
        if phi.blend_window > 0.0:
            angles = grid.chart.ideal_direction(grid.node_x1[cap], grid.node_x2[cap])
            w = np.clip(np.minimum(angles, np.pi - angles) / phi.blend_window, 0.0, 1.0)
            ends = np.where(angles < 0.5 * np.pi, float(phi.finite(t_hi)),
                            float(phi.finite(t_lo)))
            vals[cap] = w * vals[cap] + (1.0 - w) * ends
    return vals


# ---------------------------------------------------------------------------
# schedules and reports
# ---------------------------------------------------------------------------

@dataclass
class ExhaustionSchedule:
    """Truncation radii, probe compacts, and the convergence threshold.

    Probes are chart-coordinate boxes ``(x1_lo, x1_hi, x2_lo, x2_hi)``
    sampled on a fixed lattice; they must sit inside the smallest
    truncation.
    """
    radii: list
    h: float = 0.1
    probes: list = field(default_factory=list)
    probe_samples: int = 7
    theta_conv: float = 1e-6
    burn_in: int = 1

    def __post_init__(self):
        radii = [float(r) for r in self.radii]
        if len(radii) < 2:
            raise ValueError("an exhaustion needs at least two radii")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("truncation radii must be strictly increasing")
        self.radii = radii
        for box in self.probes:
            if len(box) != 4:
                raise ValueError("probe boxes are (x1_lo, x1_hi, x2_lo, x2_hi)")
            if box[1] > radii[0] or abs(box[2]) > radii[0] or abs(box[3]) > radii[0]:
                raise ValueError(f"probe {box} is not inside the smallest truncation")


@dataclass
class AttainmentEntry:
    ideal_point: float
    halfwidth: float
    epsilon: float
    measured_sup: float
    margin_min: float
    slack: float
    n_nodes: int
    passed: bool

    def to_dict(self):
        return {
            "ideal_point": self.ideal_point,
            "halfwidth": self.halfwidth,
            "epsilon": self.epsilon,
            "measured_sup": self.measured_sup,
            "margin_min": self.margin_min,
            "slack": self.slack,
            "n_nodes": self.n_nodes,
            "pass": self.passed,
        }


@dataclass
class AsymptoticReport:
    """Everything a run produces: per-stage solver metadata, probe
    Cauchy differences, the convergence verdict, and attainment
    certificates at the sampled ideal points."""
    stages: list
    probe_diffs: list          # one list of successive sup-differences per probe
    converged: bool
    monotone_violations: list
    certificates: list
    theta_conv: float
    fields: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "stages": self.stages,
            "probe_diffs": self.probe_diffs,
            "converged": self.converged,
            "monotone_violations": self.monotone_violations,
            "certificates": [c.to_dict() for c in self.certificates],
            "theta_conv": self.theta_conv,
        }


def _probe_lattice(box, n):
    x1 = np.linspace(box[0], box[1], n)
    x2 = np.linspace(box[2], box[3], n)
    m1, m2 = np.meshgrid(x1, x2, indexing="ij")
    return m1.ravel(), m2.ravel()


def default_certificate_slack(h, height):
    """Discretization allowance for attainment certificates: one mesh
    width of barrier variation plus a safety floor."""
    return 0.02 * (1.0 + height) + 4.0 * h * h


def attainment_certificate(domain, fld, phi, x_angle, halfwidth, height,
                           slack=None):
    """Check ``|u - phi(x)| <= eps + Sigma + slack`` near the ideal point.

    ``Sigma`` is the capped height barrier over the convexity witness at
    ``x``; ``eps`` is the oscillation of the ideal data over the witness
    arc.  The height must dominate ``max |phi|`` on the truncation.
    """
    grid = fld.grid
    bvals = transfer_boundary_data(phi, grid, domain)
    max_phi = float(np.max(np.abs(bvals[grid.boundary_mask()])))
    if height < max_phi - 1e-12:
        raise ValueError(
            f"barrier height {height} is below max |phi| = {max_phi:.6g}")
    if phi.ideal is None:
        raise ValueError("attainment certificates need ideal-part data")
    witness = sc_witness(domain, x_angle, halfwidth)
    sigma = upper_barrier_field(witness, height)
    if slack is None:
        slack = default_certificate_slack(grid.structure["h1"], height)

    phi_x = float(phi.ideal(x_angle))
    arc = np.linspace(x_angle - halfwidth, x_angle + halfwidth, 401)
    eps = float(np.max(np.abs(phi.ideal(arc) - phi_x)))

    dist = witness.distance(grid.node_x1, grid.node_x2)
    inside = dist > 1e-9
    if not inside.any():
        raise ValueError("witness region contains no grid nodes; enlarge the "
                         "truncation or the neighborhood")
    sig = sigma.evaluate(grid.node_x1[inside], grid.node_x2[inside])
    measured = np.abs(fld.values[inside] - phi_x)
    margins = eps + sig + slack - measured
    return AttainmentEntry(
        ideal_point=float(x_angle),
        halfwidth=float(halfwidth),
        epsilon=eps,
        measured_sup=float(measured.max()),
        margin_min=float(margins.min()),
        slack=float(slack),
        n_nodes=int(np.count_nonzero(inside)),
        passed=bool(margins.min() >= 0.0),
    )


def run_exhaustion(domain, phi, schedule, params=None, certify=(),
                   height=None):
    """Solve the asymptotic problem by exhaustion.

    ``certify`` is a sequence of ``(ideal_angle, halfwidth)`` pairs
    checked on the final stage.  Convergence is declared when the last
    two probe differences on every probe fall below ``theta_conv``.
    Solver failures abort the run with the partial stage list attached
    to the raised error.
    """
    params = params or SolveParams()
    stages, fields = [], []
    probe_pts = [_probe_lattice(box, schedule.probe_samples)
                 for box in schedule.probes]
    probe_vals = [[] for _ in probe_pts]
    prev = None
    for R in schedule.radii:
        grid = truncate(domain, R, schedule.h)
        bvals = transfer_boundary_data(phi, grid, domain)
        guess = None
        if prev is not None:
            guess = prev.interpolate(grid.node_x1, grid.node_x2)
        try:
            fld = solve_dirichlet(grid, bvals, params, initial_guess=guess)
        except solver.SolverError as err:
            err.partial_stages = stages
            raise
        stages.append({
            "R": R,
            "n_nodes": grid.n_nodes,
            "iterations": fld.metadata["iterations"],
            "residual": fld.metadata["residual"],
            "energy": fld.metadata["energy"],
            "max_gradient": fld.metadata["max_gradient"],
        })
        fields.append(fld)
        for vals, (p1, p2) in zip(probe_vals, probe_pts):
            vals.append(fld.interpolate(p1, p2))
        prev = fld

    probe_diffs = []
    for vals in probe_vals:
        diffs = [float(np.max(np.abs(b - a))) for a, b in zip(vals, vals[1:])]
        probe_diffs.append(diffs)
    converged = all(
        len(d) >= 2 and max(d[-1], d[-2]) <= schedule.theta_conv
        for d in probe_diffs) if probe_diffs else False

    violations = []
    for pi, diffs in enumerate(probe_diffs):
        for k in range(schedule.burn_in, len(diffs) - 1):
            if diffs[k + 1] > diffs[k] * (1.0 + 1e-9) + 1e-15:
                violations.append({"probe": pi, "stage": k + 1,
                                   "before": diffs[k], "after": diffs[k + 1]})

    certificates = []
    if certify:
        final = fields[-1]
        if height is None:
            b = transfer_boundary_data(phi, final.grid, domain)
            height = float(np.max(np.abs(b[final.grid.boundary_mask()])))
        for angle, halfwidth in certify:
            certificates.append(attainment_certificate(
                domain, final, phi, angle, halfwidth, height))

    return AsymptoticReport(
        stages=stages,
        probe_diffs=probe_diffs,
        converged=converged,
        monotone_violations=violations,
        certificates=certificates,
        theta_conv=schedule.theta_conv,
        fields=fields,
    )

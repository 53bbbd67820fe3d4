"""The counterexample machine: non-mean-convex domains, the chained
barrier estimates, and the boundary-attainment gap experiment.

On a domain with a boundary point y of negative inward mean curvature,
a continuous datum with peak value ``pi (A + B)`` at y and zero outside
a small ball cannot be attained: the solution near y is trapped below
the ceiling ``A pi/2 + B pi/2 + sup(outside data)`` by two barriers,
``A psi(dist to boundary)`` on the collar (the infinite-normal-slope
comparison) and ``B psi(dist to the small sphere)`` off the ball.  The
discrete signature is a boundary gap that persists under refinement,
while small data (the control) is attained to discretization accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .barriers import min_barrier_constant, psi_eval, universal_constant_B
from .exhaustion import BoundaryData, transfer_boundary_data, truncate
from .geometry import (DomainSpec, ball_exterior, hyp_distance,
                       inward_mean_curvature, polar_embed)
from .solver import INTERIOR, SolveParams, solve_dirichlet

DEFAULT_LEVELS = (0.1, 0.05, 0.025)


@dataclass
class CounterexampleSpec:
    """A non-mean-convex domain with the nonexistence datum assembled.

    ``eps = -H(y)/2`` is the guaranteed Laplacian excess of the distance
    function on the collar ball ``B_s(y)``; ``A`` and ``B`` are the
    corresponding barrier amplitudes, and ``phi`` peaks at
    ``phi_y = pi (A + B)`` at y, tapers to zero along the boundary at
    chart distance ``s``, and vanishes on the ideal boundary.
    """
    domain: DomainSpec
    y: tuple
    s: float
    eps: float
    A: float
    B: float
    phi_y: float
    phi: BoundaryData
    theta_s: float

    @property
    def ceiling_base(self):
        """The outside-data-free part of the ceiling, ``(A + B) pi / 2``."""
        return 0.5 * np.pi * (self.A + self.B)


def _boundary_arc_distance(rho, theta):
    """Geodesic distance between (rho, 0) and (rho, theta)."""
    p = polar_embed(rho, 0.0)
    q = polar_embed(rho, np.asarray(theta, dtype=float))
    return hyp_distance(p, q)


def build_counterexample(domain_kind="ball-exterior", rho=1.0, s=None,
                         scale=1.0):
    """Assemble the counterexample datum on a cataloged domain.

    Only the ball-exterior catalog entry has negative boundary curvature
    (H = -coth rho everywhere in H^2); half-planes and disks are
    rejected.  ``s`` defaults to 1 and is validated against the
    Laplacian-excess condition ``Delta d > eps`` on the collar.
    ``scale`` multiplies the datum (used by control runs).
    """
    if domain_kind != "ball-exterior":
        raise ValueError(
            f"domain kind {domain_kind!r} has no boundary point with negative "
            "mean curvature in the catalog")
    domain = ball_exterior(rho)
    y = (rho, 0.0)
    h_y = inward_mean_curvature(domain, y)
    if h_y >= 0:
        raise ValueError(f"mean curvature at y is {h_y:.4g} >= 0; the "
                         "construction needs H(y) < 0")
    eps = -0.5 * h_y
    s = 1.0 if s is None else float(s)
    if s <= 0:
        raise ValueError("collar radius s must be positive")

    # Delta d = (n-1) f'/f on the collar must exceed eps; sample it
    man = domain.manifold
    r = np.linspace(rho, rho + s, 256)
    lap_d = (man.n - 1) * man.warp_d1(r) / man.warp(r)
    if lap_d.min() <= eps:
        raise ValueError(
            f"requested collar radius s = {s} violates the Laplacian excess "
            f"condition (min Delta d = {lap_d.min():.4g} <= eps = {eps:.4g})")

    theta_hi = _boundary_arc_distance(rho, np.pi)
    if theta_hi <= s:
        raise ValueError(f"collar radius s = {s} wraps around the whole "
                         "boundary circle; choose s below "
                         f"{theta_hi:.4g}")
    # angle at which the boundary leaves B_s(y)
    lo, hi = 0.0, np.pi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _boundary_arc_distance(rho, mid) < s:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    theta_s = 0.5 * (lo + hi)

    a_const = min_barrier_constant(eps)
    b_const = universal_constant_B(man.n)
    phi_y = np.pi * (a_const + b_const) * scale

    def taper(theta):
        d = _boundary_arc_distance(rho, np.asarray(theta, dtype=float))
        w = np.where(d < s, 0.5 * (1.0 + np.cos(np.pi * np.minimum(d / s, 1.0))), 0.0)
        return phi_y * w

    phi = BoundaryData(
        finite=taper,
        ideal=lambda a: np.zeros_like(np.asarray(a, dtype=float)),
        label=f"counterexample(rho={rho:g},s={s:g},scale={scale:g})",
    )
    return CounterexampleSpec(domain=domain, y=y, s=s, eps=eps, A=a_const,
                              B=b_const, phi_y=float(phi_y), phi=phi,
                              theta_s=float(theta_s))


# ---------------------------------------------------------------------------
# the chained barrier estimates on a solved field
# ---------------------------------------------------------------------------

@dataclass
class ChainedBound:
    """Measured quantities for the two-barrier estimate on one field."""
    u_adjacent: float        # solution at the interior node nearest y
    u_near_max: float        # max over interior nodes within s/2 of y
    sphere_sup: float        # sup of u on the sphere around y
    outside_sup: float       # sup of the data away from the collar
    ceiling: float           # A pi/2 + B pi/2 + outside_sup
    collar_violation: float  # max(u - A psi(d) - sphere_sup) on the collar
    offball_violation: float  # max(u - B psi(r) - outside_sup) off the ball
    n_collar: int
    n_offball: int

    def to_dict(self):
        return {k: getattr(self, k) for k in (
            "u_adjacent", "u_near_max", "sphere_sup", "outside_sup", "ceiling",
            "collar_violation", "offball_violation", "n_collar", "n_offball")}


def _sphere_samples(spec, n_samples=720):
    """Points of the geodesic circle of radius s about y, in polar chart
    coordinates, restricted to the closed domain."""
    rho, s = spec.domain.rho, spec.s
    p_y = polar_embed(rho, 0.0)
    e1 = np.array([np.cosh(rho), 0.0, np.sinh(rho)])  # radial unit at y
    e2 = np.array([0.0, 1.0, 0.0])                    # angular unit at y
    psi_ang = np.linspace(0.0, 2.0 * np.pi, n_samples, endpoint=False)
    pts = (np.cosh(s) * p_y[None, :]
           + np.sinh(s) * (np.outer(np.cos(psi_ang), e1) + np.outer(np.sin(psi_ang), e2)))
    r = np.arccosh(np.maximum(1.0, pts[:, 2]))
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    keep = r >= rho - 1e-12
    return r[keep], theta[keep]


def jenkins_serrin_bound(spec, fld):
    """Evaluate the chained estimate on a solved truncation field.

    Returns the solution values near y, the measured sup over the
    sphere ``partial B_s(y)``, the theoretical ceiling, and the largest
    nodewise violations of the two barrier dominations (nonpositive
    values mean the barriers hold)."""
    grid = fld.grid
    if grid.kind != "polar-annulus" or abs(grid.structure["x1"][0] - spec.domain.rho) > 1e-9:
        raise ValueError("field was not solved on a truncation of the "
                         "counterexample domain")
    rho, s = spec.domain.rho, spec.s
    p_nodes = polar_embed(grid.node_x1, grid.node_x2)
    dist_y = hyp_distance(p_nodes, polar_embed(rho, 0.0))
    d_wall = grid.node_x1 - rho
    interior = grid.tag == INTERIOR

    bmask = grid.boundary_mask()
    outside_vals = fld.values[bmask & (dist_y >= s)]
    outside_sup = float(outside_vals.max()) if outside_vals.size else 0.0

    r_sp, th_sp = _sphere_samples(spec)
    in_range = r_sp <= grid.structure["x1"][-1]
    sphere_sup = float(np.max(fld.interpolate(r_sp[in_range], th_sp[in_range])))

    ceiling = spec.ceiling_base + outside_sup

    near = interior & (dist_y <= 0.5 * s)
    u_near_max = float(fld.values[near].max()) if near.any() else float("-inf")
    cand = np.where(interior)[0]
    u_adjacent = float(fld.values[cand[np.argmin(dist_y[cand])]])

    collar = interior & (dist_y < s - 1e-9) & (d_wall > 1e-12)
    v1 = spec.A * psi_eval(d_wall[collar])[0] + sphere_sup
    collar_violation = float(np.max(fld.values[collar] - v1)) if collar.any() else float("-inf")

    offball = interior & (dist_y > s + 1e-9)
    v2 = spec.B * psi_eval(dist_y[offball] - s)[0] + outside_sup
    offball_violation = float(np.max(fld.values[offball] - v2)) if offball.any() else float("-inf")

    return ChainedBound(
        u_adjacent=u_adjacent, u_near_max=u_near_max, sphere_sup=sphere_sup,
        outside_sup=outside_sup, ceiling=ceiling,
        collar_violation=collar_violation, offball_violation=offball_violation,
        n_collar=int(np.count_nonzero(collar)),
        n_offball=int(np.count_nonzero(offball)),
    )


# ---------------------------------------------------------------------------
# the refinement study
# ---------------------------------------------------------------------------

@dataclass
class GapReport:
    """Per-level gap measurements plus the control experiment."""
    rho: float
    s: float
    eps: float
    A: float
    B: float
    phi_y: float
    radius: float
    levels: list
    control: dict
    verdict: bool
    fields: list = field(default_factory=list, repr=False)

    def to_dict(self):
        out = {k: getattr(self, k) for k in (
            "rho", "s", "eps", "A", "B", "phi_y", "radius", "verdict")}
        out["levels"] = self.levels
        out["control"] = self.control
        return out


def _extrapolated_boundary_mismatch(fld, bvals):
    """Sup over the inner circle of |2 u(ring1) - u(ring2) - phi|: the
    second-order estimate of the field's boundary trace mismatch."""
    st = fld.grid.structure
    n2 = st["shape"][1]
    u = fld.values.reshape(st["shape"])
    phi_row = bvals.reshape(st["shape"])[0]
    extrap = 2.0 * u[1] - u[2]
    return float(np.max(np.abs(extrap - phi_row))), n2


def run_gap_study(spec, levels=DEFAULT_LEVELS, radius=8.0,
                  control_scale=0.01, params=None, gap_margin=0.25,
                  ceiling_slack=0.05, keep_fields=False):
    """Solve the counterexample datum on refined truncations and measure
    the persistent boundary gap.

    The verdict passes when, at every level, the solution near y stays
    below ``ceiling + ceiling_slack * phi_y`` and the gap
    ``phi_y - u_near`` keeps a margin of at least ``gap_margin`` of the
    ceiling base.  The control resolves the datum scaled by
    ``control_scale`` at the finest level and reports the extrapolated
    boundary mismatch (attained data makes it small).
    """
    params = params or SolveParams(continuation_steps=4)
    level_rows, fields = [], []
    for h in levels:
        grid = truncate(spec.domain, radius, h)
        bvals = transfer_boundary_data(spec.phi, grid, spec.domain)
        fld = solve_dirichlet(grid, bvals, params)
        bound = jenkins_serrin_bound(spec, fld)
        gap = spec.phi_y - bound.u_near_max
        row = {
            "h": h,
            "n_nodes": grid.n_nodes,
            "iterations": fld.metadata["iterations"],
            "gap": gap,
            "below_ceiling": bool(
                bound.u_near_max <= bound.ceiling + ceiling_slack * spec.phi_y),
            "gap_margin_ok": bool(gap >= gap_margin * spec.ceiling_base),
        }
        row.update(bound.to_dict())
        level_rows.append(row)
        if keep_fields:
            fields.append(fld)

    finest = min(levels)
    ctrl_spec = build_counterexample(rho=spec.domain.rho, s=spec.s,
                                     scale=control_scale)
    grid = truncate(ctrl_spec.domain, radius, finest)
    bvals = transfer_boundary_data(ctrl_spec.phi, grid, ctrl_spec.domain)
    ctrl_fld = solve_dirichlet(grid, bvals, params)
    mismatch, _ = _extrapolated_boundary_mismatch(ctrl_fld, bvals)
    control = {
        "scale": control_scale,
        "h": finest,
        "phi_y": ctrl_spec.phi_y,
        "boundary_mismatch": mismatch,
        "attained": bool(mismatch <= 5e-3),
    }

    verdict = all(r["below_ceiling"] and r["gap_margin_ok"] for r in level_rows)
    return GapReport(
        rho=spec.domain.rho, s=spec.s, eps=spec.eps, A=spec.A, B=spec.B,
        phi_y=spec.phi_y, radius=radius, levels=level_rows, control=control,
        verdict=bool(verdict), fields=fields,
    )

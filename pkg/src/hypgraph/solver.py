"""Discrete Dirichlet solver for the minimal surface and p-Laplace
equations on metric-aware structured grids.

The discretization is variational: each quadrilateral cell carries the
chart metric coefficient at its center, the two covariant gradient
components are assembled from the four corner values, and the discrete
energy is

    sum_cells  G_c * Phi(|grad_g u|^2_cell) * h1 * h2,

with ``Phi(q) = sqrt(1 + q)`` for the minimal surface operator and the
delta-regularized ``((q + d^2)^(p/2) - d^p)/p`` for the p-Laplacian.
The energy is convex, so damped Newton on its gradient (with the
Dirichlet rows eliminated) converges to the unique constrained
minimizer; the nodal gradient scaled by lumped volumes is a consistent
second-order approximation of the divergence-form operator.

Grids are polar disks (with a triangle-fan closure at the pole), polar
annuli (periodic in the angle), and Fermi rectangles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

INTERIOR, FINITE_BOUNDARY, TRUNCATION_CAP = 0, 1, 2

_CORNER_S1 = (-1.0, 1.0, -1.0, 1.0)   # gradient signs along x1
_CORNER_S2 = (-1.0, -1.0, 1.0, 1.0)   # gradient signs along x2


class SolverError(RuntimeError):
    """Raised when Newton fails to converge; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass
class SolveParams:
    """Solve configuration.

    ``operator`` is ``"minimal-surface"`` or ``"p-laplace"`` (with
    exponent ``p > 1``).  ``newton_tol`` bounds the volume-scaled
    residual max-norm; ``continuation_steps`` ramps the boundary data
    linearly (useful for steep data, and retried automatically with 4
    steps if a direct solve stalls).
    """
    operator: str = "minimal-surface"
    p: float = 2.0
    newton_tol: float = 1e-10
    max_iters: int = 100
    continuation_steps: int = 1
    delta: float = 1e-8
    max_halvings: int = 40

    def __post_init__(self):
        if self.operator not in ("minimal-surface", "p-laplace"):
            raise ValueError(f"unknown operator {self.operator!r}")
        if self.operator == "p-laplace" and self.p <= 1:
            raise ValueError("p-laplace exponent must exceed 1")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")


class Grid:
    """Node/cell mesh over an orthogonal chart box.

    Nodes carry chart coordinates and a boundary tag; cells carry their
    corner indices, spacings, and the midpoint metric coefficient.
    ``node_vol`` are the lumped volumes used to scale residuals.
    """

    def __init__(self, kind, chart, node_x1, node_x2, tag, cells,
                 cell_h1, cell_h2, cell_g, cell_vol, structure):
        self.kind = kind
        self.chart = chart
        self.node_x1 = node_x1
        self.node_x2 = node_x2
        self.tag = tag
        self.cells = cells
        self.cell_h1 = cell_h1
        self.cell_h2 = cell_h2
        self.cell_g = cell_g
        self.cell_vol = cell_vol
        self.structure = structure
        self.n_nodes = len(node_x1)
        share = 0.25 * cell_vol
        vol = np.zeros(self.n_nodes)
        for k in range(4):
            np.add.at(vol, cells[:, k], share)
        self.node_vol = vol

    @property
    def n_interior(self):
        return int(np.count_nonzero(self.tag == INTERIOR))

    def boundary_mask(self):
        return self.tag != INTERIOR

    # -- structured interpolation ------------------------------------------

    def interpolate(self, values, x1q, x2q):
        """Bilinear interpolation in chart coordinates (angle-periodic on
        polar grids; the pole cell blends the pole value with ring one)."""
        x1q = np.asarray(x1q, dtype=float)
        x2q = np.asarray(x2q, dtype=float)
        st = self.structure
        if self.kind == "fermi-rect":
            return self._interp_lattice(values, x1q, x2q, st["x1"], st["x2"],
                                        st["shape"], periodic=False)
        if self.kind == "polar-annulus":
            return self._interp_lattice(values, x1q, x2q, st["x1"], st["x2"],
                                        st["shape"], periodic=True)
        # polar disk: rings start at index 1; radial queries below the first
        # ring interpolate toward the pole value
        r1 = st["x1"][0]
        out = np.empty(np.broadcast(x1q, x2q).shape)
        x1b, x2b = np.broadcast_arrays(x1q, x2q)
        inner = x1b < r1
        if np.any(~inner):
            out[~inner] = self._interp_lattice(
                values[1:], x1b[~inner], x2b[~inner], st["x1"], st["x2"],
                st["shape"], periodic=True)
        if np.any(inner):
            ring = self._interp_lattice(
                values[1:], np.full(np.count_nonzero(inner), r1),
                x2b[inner], st["x1"], st["x2"], st["shape"], periodic=True)
            w = x1b[inner] / r1
            out[inner] = (1.0 - w) * values[0] + w * ring
        return out

    @staticmethod
    def _interp_lattice(values, x1q, x2q, x1v, x2v, shape, periodic):
        n1, n2 = shape
        grid = values.reshape(n1, n2)
        h1 = x1v[1] - x1v[0]
        h2 = x2v[1] - x2v[0]
        u = np.clip((x1q - x1v[0]) / h1, 0.0, n1 - 1 - 1e-12)
        i = np.floor(u).astype(int)
        fu = u - i
        if periodic:
            v = (x2q - x2v[0]) / h2
            j = np.floor(v).astype(int)
            fv = v - j
            j0 = np.mod(j, n2)
            j1 = np.mod(j + 1, n2)
        else:
            v = np.clip((x2q - x2v[0]) / h2, 0.0, n2 - 1 - 1e-12)
            j = np.floor(v).astype(int)
            fv = v - j
            j0, j1 = j, j + 1
        return ((1 - fu) * (1 - fv) * grid[i, j0] + fu * (1 - fv) * grid[i + 1, j0]
                + (1 - fu) * fv * grid[i, j1] + fu * fv * grid[i + 1, j1])


@dataclass
class DiscreteField:
    """Node values plus solve metadata on a grid."""
    grid: Grid
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def interpolate(self, x1q, x2q):
        return self.grid.interpolate(self.values, x1q, x2q)


# ---------------------------------------------------------------------------
# grid constructors
# ---------------------------------------------------------------------------

def _angular_count(h2_target):
    return max(8, int(round(2.0 * np.pi / h2_target)))


def polar_disk_grid(chart, R, h, outer_tag=TRUNCATION_CAP, h2=None):
    """Full geodesic disk of radius R about the pole.

    Quadrilateral ring cells plus a triangle fan closing the pole: the
    fan cells reuse the quad gradient maps with the pole entered twice,
    which samples the angular gradient midway between pole and ring.
    """
    n1 = max(2, int(round(R / h)))
    h1 = R / n1
    n2 = _angular_count(h2 or h)
    h2v = 2.0 * np.pi / n2
    radii = h1 * np.arange(1, n1 + 1)
    thetas = -np.pi + h2v * np.arange(n2)
    node_x1 = np.concatenate(([0.0], np.repeat(radii, n2)))
    node_x2 = np.concatenate(([0.0], np.tile(thetas, n1)))
    tag = np.zeros(len(node_x1), dtype=np.int8)
    tag[1 + (n1 - 1) * n2:] = outer_tag

    def idx(i, j):
        return 1 + (i - 1) * n2 + np.mod(j, n2)

    j = np.arange(n2)
    quads = []
    for i in range(1, n1):
        quads.append(np.stack([idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)], axis=1))
    fans = np.stack([np.zeros(n2, dtype=int), idx(1, j), np.zeros(n2, dtype=int), idx(1, j + 1)], axis=1)
    cells = np.concatenate([fans] + quads, axis=0).astype(np.int32)
    mid_r = np.concatenate(([0.5 * h1], np.repeat(radii[:-1] + 0.5 * h1, n2)))
    cell_g = chart.G(np.concatenate((np.full(n2, 0.5 * h1), np.repeat(radii[:-1] + 0.5 * h1, n2))))
    cell_h1 = np.full(len(cells), h1)
    cell_h2 = np.full(len(cells), h2v)
    cell_vol = cell_g * cell_h1 * cell_h2
    structure = {"x1": radii, "x2": thetas, "shape": (n1, n2), "h1": h1, "h2": h2v}
    return Grid("polar-disk", chart, node_x1, node_x2, tag, cells,
                cell_h1, cell_h2, cell_g, cell_vol, structure)


def polar_annulus_grid(chart, r0, R, h, inner_tag=FINITE_BOUNDARY,
                       outer_tag=TRUNCATION_CAP, h2=None):
    """Annulus r in [r0, R] about the pole, periodic in the angle."""
    if R <= r0:
        raise ValueError(f"annulus range [{r0}, {R}] is empty")
    n1 = max(2, int(round((R - r0) / h)))
    h1 = (R - r0) / n1
    n2 = _angular_count(h2 or h)
    h2v = 2.0 * np.pi / n2
    radii = r0 + h1 * np.arange(n1 + 1)
    thetas = -np.pi + h2v * np.arange(n2)
    node_x1 = np.repeat(radii, n2)
    node_x2 = np.tile(thetas, n1 + 1)
    tag = np.zeros(len(node_x1), dtype=np.int8)
    tag[:n2] = inner_tag
    tag[-n2:] = outer_tag

    def idx(i, j):
        return i * n2 + np.mod(j, n2)

    j = np.arange(n2)
    quads = [np.stack([idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)], axis=1)
             for i in range(n1)]
    cells = np.concatenate(quads, axis=0).astype(np.int32)
    cell_g = chart.G(np.repeat(radii[:-1] + 0.5 * h1, n2))
    cell_h1 = np.full(len(cells), h1)
    cell_h2 = np.full(len(cells), h2v)
    cell_vol = cell_g * cell_h1 * cell_h2
    structure = {"x1": radii, "x2": thetas, "shape": (n1 + 1, n2), "h1": h1, "h2": h2v}
    return Grid("polar-annulus", chart, node_x1, node_x2, tag, cells,
                cell_h1, cell_h2, cell_g, cell_vol, structure)


def fermi_rect_grid(chart, s_range, t_range, h, side_tags=None, h2=None):
    """Rectangle [s0, s1] x [t0, t1] in Fermi coordinates.

    ``side_tags`` maps side names ``s0, s1, t0, t1`` to boundary tags
    (default: all finite-boundary).
    """
    s0, s1 = s_range
    t0, t1 = t_range
    if s1 <= s0 or t1 <= t0:
        raise ValueError("empty rectangle")
    side_tags = side_tags or {}
    n1 = max(2, int(round((s1 - s0) / h)))
    n2 = max(2, int(round((t1 - t0) / (h2 or h))))
    h1 = (s1 - s0) / n1
    h2v = (t1 - t0) / n2
    sv = s0 + h1 * np.arange(n1 + 1)
    tv = t0 + h2v * np.arange(n2 + 1)
    node_x1 = np.repeat(sv, n2 + 1)
    node_x2 = np.tile(tv, n1 + 1)
    tag = np.zeros(len(node_x1), dtype=np.int8)
    shaped = tag.reshape(n1 + 1, n2 + 1)
    shaped[0, :] = side_tags.get("s0", FINITE_BOUNDARY)
    shaped[-1, :] = side_tags.get("s1", FINITE_BOUNDARY)
    shaped[:, 0] = np.maximum(shaped[:, 0], side_tags.get("t0", FINITE_BOUNDARY))
    shaped[:, -1] = np.maximum(shaped[:, -1], side_tags.get("t1", FINITE_BOUNDARY))

    def idx(i, j):
        return i * (n2 + 1) + j

    j = np.arange(n2)
    quads = [np.stack([idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)], axis=1)
             for i in range(n1)]
    cells = np.concatenate(quads, axis=0).astype(np.int32)
    cell_g = chart.G(np.repeat(sv[:-1] + 0.5 * h1, n2))
    cell_h1 = np.full(len(cells), h1)
    cell_h2 = np.full(len(cells), h2v)
    cell_vol = cell_g * cell_h1 * cell_h2
    structure = {"x1": sv, "x2": tv, "shape": (n1 + 1, n2 + 1), "h1": h1, "h2": h2v}
    return Grid("fermi-rect", chart, node_x1, node_x2, tag, cells,
                cell_h1, cell_h2, cell_g, cell_vol, structure)


# ---------------------------------------------------------------------------
# energy, gradient, Hessian
# ---------------------------------------------------------------------------

def _cell_gradients(grid, u):
    ua, ub, uc, ud = (u[grid.cells[:, k]] for k in range(4))
    g1 = (-ua + ub - uc + ud) / (2.0 * grid.cell_h1)
    g2 = (-ua - ub + uc + ud) / (2.0 * grid.cell_h2)
    return g1, g2


def _density(q, params):
    """Phi(q), Phi'(q), Phi''(q) for q = |grad_g u|^2."""
    if params.operator == "minimal-surface":
        w = np.sqrt(1.0 + q)
        return w, 0.5 / w, -0.25 / w ** 3
    p = params.p
    if p == 2.0:
        return 0.5 * q, np.full_like(q, 0.5), np.zeros_like(q)
    d2 = params.delta ** 2
    base = q + d2
    phi = (base ** (0.5 * p) - d2 ** (0.5 * p)) / p
    d1 = 0.5 * base ** (0.5 * p - 1.0)
    dd = 0.25 * (p - 2.0) * base ** (0.5 * p - 2.0)
    return phi, d1, dd


def discrete_energy(grid, values, params):
    """Total metric-weighted energy of a node field."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_nodes,):
        raise ValueError(f"field shape {values.shape} does not match grid "
                         f"({grid.n_nodes} nodes)")
    g1, g2 = _cell_gradients(grid, values)
    q = g1 * g1 + (g2 / grid.cell_g) ** 2
    phi, _, _ = _density(q, params)
    return float(np.dot(grid.cell_vol, phi))


def _energy_gradient(grid, u, params):
    g1, g2 = _cell_gradients(grid, u)
    q = g1 * g1 + (g2 / grid.cell_g) ** 2
    _, d1, _ = _density(q, params)
    c1 = grid.cell_vol * d1 * 2.0 * g1
    c2 = grid.cell_vol * d1 * 2.0 * g2 / grid.cell_g ** 2
    grad = np.zeros(grid.n_nodes)
    for k in range(4):
        np.add.at(grad, grid.cells[:, k],
                  c1 * (_CORNER_S1[k] / (2.0 * grid.cell_h1))
                  + c2 * (_CORNER_S2[k] / (2.0 * grid.cell_h2)))
    return grad


def _energy_hessian(grid, u, params):
    g1, g2 = _cell_gradients(grid, u)
    gg = grid.cell_g
    q = g1 * g1 + (g2 / gg) ** 2
    _, d1, dd = _density(q, params)
    vol = grid.cell_vol
    h11 = vol * (2.0 * d1 + 4.0 * g1 * g1 * dd)
    h22 = vol * (2.0 * d1 / gg ** 2 + 4.0 * g2 * g2 * dd / gg ** 4)
    h12 = vol * (4.0 * g1 * g2 * dd / gg ** 2)
    w1 = [s / (2.0 * grid.cell_h1) for s in _CORNER_S1]
    w2 = [s / (2.0 * grid.cell_h2) for s in _CORNER_S2]
    n_cells = len(grid.cells)
    rows = np.empty(16 * n_cells, dtype=np.int32)
    cols = np.empty(16 * n_cells, dtype=np.int32)
    vals = np.empty(16 * n_cells)
    pos = 0
    for k in range(4):
        for l in range(4):
            rows[pos:pos + n_cells] = grid.cells[:, k]
            cols[pos:pos + n_cells] = grid.cells[:, l]
            vals[pos:pos + n_cells] = (h11 * w1[k] * w1[l] + h22 * w2[k] * w2[l]
                                       + h12 * (w1[k] * w2[l] + w2[k] * w1[l]))
            pos += n_cells
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(grid.n_nodes, grid.n_nodes))
    return mat.tocsr()


def discrete_residual(grid, values, params):
    """Nodal divergence-form operator values and their max-norm.

    The residual at an interior node is the energy gradient scaled by
    the lumped node volume (with a sign making it approximate the
    continuum operator); boundary nodes report zero.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_nodes,):
        raise ValueError("field does not conform to grid")
    grad = _energy_gradient(grid, values, params)
    res = np.zeros(grid.n_nodes)
    interior = grid.tag == INTERIOR
    res[interior] = -grad[interior] / grid.node_vol[interior]
    norm = float(np.max(np.abs(res[interior]))) if interior.any() else 0.0
    return res, norm


# ---------------------------------------------------------------------------
# solves
# ---------------------------------------------------------------------------

_LAPLACE = SolveParams(operator="p-laplace", p=2.0, delta=0.0)


def harmonic_extension(grid, boundary_values):
    """p = 2 extension of the boundary data (one linear solve); used as
    the Newton initial guess."""
    free = grid.tag == INTERIOR
    u = np.where(free, 0.0, boundary_values)
    mat = _energy_hessian(grid, u, _LAPLACE)
    rhs = -_energy_gradient(grid, u, _LAPLACE)[free]
    kff = mat[free][:, free].tocsc()
    u[free] = spla.spsolve(kff, rhs)
    return u


def _newton(grid, u, params, free):
    vol_f = grid.node_vol[free]
    energy = discrete_energy(grid, u, params)
    trace = [energy]
    residual = np.inf
    for it in range(params.max_iters):
        grad = _energy_gradient(grid, u, params)
        residual = float(np.max(np.abs(grad[free] / vol_f)))
        if residual <= params.newton_tol:
            return u, it, residual, trace
        mat = _energy_hessian(grid, u, params)
        kff = mat[free][:, free].tocsc()
        step = spla.spsolve(kff, -grad[free])
        if not np.all(np.isfinite(step)):
            raise SolverError("singular linearization", residual=residual)
        lam = 1.0
        for _ in range(params.max_halvings):
            trial = u.copy()
            trial[free] += lam * step
            e_new = discrete_energy(grid, trial, params)
            if e_new <= energy + 1e-14 * (1.0 + abs(energy)):
                u, energy = trial, e_new
                trace.append(energy)
                break
            lam *= 0.5
        else:
            raise SolverError(
                f"damping exhausted at iteration {it} (residual {residual:.3e})",
                residual=residual)
    grad = _energy_gradient(grid, u, params)
    residual = float(np.max(np.abs(grad[free] / vol_f)))
    if residual <= params.newton_tol:
        return u, params.max_iters, residual, trace
    raise SolverError(
        f"no convergence within {params.max_iters} iterations "
        f"(residual {residual:.3e})", residual=residual)


def solve_dirichlet(grid, boundary_values, params=None, initial_guess=None):
    """Minimize the discrete energy subject to Dirichlet data.

    ``boundary_values`` is a full-length node array; only entries at
    tagged boundary nodes are used.  Returns a ``DiscreteField`` whose
    metadata records iterations, the final scaled residual, the energy
    trace, and the largest cell gradient magnitude.  Raises
    ``SolverError`` (with the last residual) on non-convergence.
    """
    params = params or SolveParams()
    boundary_values = np.asarray(boundary_values, dtype=float)
    if boundary_values.shape != (grid.n_nodes,):
        raise ValueError("boundary values must be a full node array")
    bmask = grid.boundary_mask()
    if not np.all(np.isfinite(boundary_values[bmask])):
        raise ValueError("boundary values must be finite")
    free = ~bmask

    schedules = [params.continuation_steps]
    if params.continuation_steps == 1:
        schedules.append(4)  # automatic fallback for steep data
    last_err = None
    for steps in schedules:
        try:
            u = None
            total_iters = 0
            trace_all = []
            for lam in np.linspace(1.0 / steps, 1.0, steps):
                bv = lam * boundary_values
                if u is None:
                    u = harmonic_extension(grid, bv)
                    if initial_guess is not None:
                        u = np.where(free, initial_guess, u)
                else:
                    u[bmask] = bv[bmask]
                u[bmask] = bv[bmask]
                u, iters, residual, trace = _newton(grid, u, params, free)
                total_iters += iters
                trace_all.extend(trace)
            g1, g2 = _cell_gradients(grid, u)
            grad_mag = np.sqrt(g1 ** 2 + (g2 / grid.cell_g) ** 2)
            meta = {
                "iterations": total_iters,
                "residual": residual,
                "energy": discrete_energy(grid, u, params),
                "energy_trace": trace_all,
                "max_gradient": float(grad_mag.max()) if len(grad_mag) else 0.0,
                "continuation_steps": steps,
                "operator": params.operator,
            }
            return DiscreteField(grid, u, meta)
        except SolverError as err:
            last_err = err
            continue
    raise last_err


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def field_to_csv(fld, path):
    """Write ``x1,x2,value`` rows (17 significant digits, reproducible)."""
    data = np.column_stack((fld.grid.node_x1, fld.grid.node_x2, fld.values))
    np.savetxt(path, data, delimiter=",", header="x1,x2,value",
               comments="", fmt="%.17g")


def solve_metadata(fld):
    meta = dict(fld.metadata)
    meta.pop("energy_trace", None)
    meta["n_nodes"] = fld.grid.n_nodes
    meta["grid_kind"] = fld.grid.kind
    return meta

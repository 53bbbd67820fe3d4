"""Model manifolds, charts, domains, and curvature comparison data.

The ambient spaces are rotationally symmetric warped products
``dr^2 + f(r)^2 dsigma^2`` with radial curvature ``-f''/f <= -1``;
the hyperbolic spaces are the case ``f = sinh``.  Two-dimensional
charts (geodesic polar, Fermi about a geodesic) are realized through
the hyperboloid model of H^2, which also supplies exact distances to
points and geodesics for the barrier machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

_CURVATURE_SLACK = 1e-12


# ---------------------------------------------------------------------------
# hyperboloid model of H^2: points live on {x1^2 + x2^2 - x3^2 = -1, x3 > 0}
# ---------------------------------------------------------------------------

def minkowski_dot(p, q):
    return p[..., 0] * q[..., 0] + p[..., 1] * q[..., 1] - p[..., 2] * q[..., 2]


def polar_embed(r, theta):
    """Geodesic polar coordinates about the pole -> hyperboloid points."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sh = np.sinh(r)
    return np.stack((sh * np.cos(theta), sh * np.sin(theta), np.cosh(r)), axis=-1)


def fermi_embed(s, t):
    """Fermi coordinates about the geodesic through the pole in direction
    theta = 0; ``s`` is the signed distance to it (s > 0 is theta in (0, pi))."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    ch = np.cosh(s)
    return np.stack((np.sinh(t) * ch, np.sinh(s), np.cosh(t) * ch), axis=-1)


def hyp_distance(p, q):
    return np.arccosh(np.maximum(1.0, -minkowski_dot(p, q)))


def geodesic_normal(theta, rho0):
    """Unit spacelike normal of the geodesic at distance ``rho0`` from the
    pole along direction ``theta``, oriented away from the pole."""
    return np.array([np.cosh(rho0) * np.cos(theta),
                     np.cosh(rho0) * np.sin(theta),
                     np.sinh(rho0)])


def signed_distance_to_geodesic(p, normal):
    return np.arcsinh(minkowski_dot(p, normal))


def ideal_angle(p):
    """Direction of the ideal point hit by the ray from the pole through p."""
    return np.arctan2(p[..., 1], p[..., 0])


# ---------------------------------------------------------------------------
# model manifolds
# ---------------------------------------------------------------------------

class ModelManifold:
    """Warped product ``dr^2 + f(r)^2 dsigma^2`` of dimension n.

    ``warp`` must vanish at 0 with unit derivative and satisfy the
    pinching ``-f''(r)/f(r) <= -1`` on the working range; this is
    verified on a sample grid at construction time.

    Parameters
    ----------
    n : int
        Dimension, at least 2.
    warp, warp_d1, warp_d2 : callables
        The warp function and its first two derivatives (vectorized).
    curvature : callable, optional
        Closed-form radial curvature ``-f''/f``; derived from the warp
        when omitted (supply it when the quotient cancels badly).
    """

    def __init__(self, n, warp, warp_d1, warp_d2, curvature=None, name="",
                 check_range=(1e-3, 25.0), is_hyperbolic=False):
        if int(n) != n or n < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {n}")
        self.n = int(n)
        self.warp = warp
        self.warp_d1 = warp_d1
        self.warp_d2 = warp_d2
        self.name = name or f"warped-{n}d"
        self.is_hyperbolic = is_hyperbolic
        if curvature is None:
            curvature = lambda r: -warp_d2(r) / warp(r)
        self._curvature = curvature
        self._validate(check_range)

    def _validate(self, check_range):
        r = np.geomspace(check_range[0], check_range[1], 400)
        f = self.warp(r)
        if np.any(f <= 0):
            raise ValueError(f"{self.name}: warp must be positive for r > 0")
        if np.any(self.warp_d1(r) <= 0):
            raise ValueError(f"{self.name}: warp derivative must stay positive")
        k = self.curvature(r)
        if np.any(k > -1.0 + _CURVATURE_SLACK):
            bad = r[np.argmax(k)]
            raise ValueError(
                f"{self.name}: radial curvature {np.max(k):.6g} at r = {bad:.4g} "
                "violates the bound K <= -1"
            )

    def curvature(self, r):
        """Radial sectional curvature ``-f''(r)/f(r)``."""
        return self._curvature(np.asarray(r, dtype=float))

    def __repr__(self):
        return f"ModelManifold({self.name}, n={self.n})"


def hyperbolic_space(n):
    """H^n: the warped product with f = sinh, constant curvature -1."""
    return ModelManifold(
        n, np.sinh, np.cosh, np.sinh,
        curvature=lambda r: np.full_like(np.asarray(r, dtype=float), -1.0),
        name=f"h{n}", is_hyperbolic=True,
    )


def sinh_exp_manifold(n, c, beta=1.0):
    """Warped product ``f(r) = sinh(r) exp(c (cosh(beta r) - 1) / beta^2)``.

    A convenient family with closed-form curvature

        -f''/f = -(1 + (2c/beta) sinh(beta r) coth(r) + c cosh(beta r)
                   + (c/beta)^2 sinh(beta r)^2),

    which decays (grows in magnitude) like ``-exp(2 beta r)``; c = 0
    recovers H^n.
    """
    if c < 0:
        raise ValueError("c must be nonnegative to keep K <= -1")

    def g(r):
        return c * (np.cosh(beta * r) - 1.0) / beta ** 2

    def g1(r):
        return c * np.sinh(beta * r) / beta

    def g2(r):
        return c * np.cosh(beta * r)

    warp = lambda r: np.sinh(r) * np.exp(g(r))
    warp_d1 = lambda r: np.exp(g(r)) * (np.cosh(r) + g1(r) * np.sinh(r))
    warp_d2 = lambda r: np.exp(g(r)) * (
        np.sinh(r) + 2.0 * g1(r) * np.cosh(r) + (g2(r) + g1(r) ** 2) * np.sinh(r)
    )

    def curvature(r):
        r = np.asarray(r, dtype=float)
        # 2 g' coth(r) has a removable singularity at r = 0: sinh(beta r) coth(r) -> beta r / r... -> beta
        with np.errstate(invalid="ignore", divide="ignore"):
            cross = np.where(r == 0.0, 2.0 * c,
                             2.0 * g1(r) / np.tanh(r))
        return -(1.0 + cross + g2(r) + g1(r) ** 2)

    return ModelManifold(n, warp, warp_d1, warp_d2, curvature=curvature,
                         name=f"sinhexp(n={n},c={c:g},beta={beta:g})")


def manifold_from_id(mid):
    """Resolve a manifold id: ``h2``, ``h3``, ..., or
    ``warped:sinhexp:c=<v>[,beta=<v>][,n=<v>]``."""
    mid = mid.strip().lower()
    if mid.startswith("h") and mid[1:].isdigit():
        return hyperbolic_space(int(mid[1:]))
    if mid.startswith("warped:sinhexp:"):
        params = {"beta": 1.0, "n": 2}
        for item in mid.split(":", 2)[2].split(","):
            key, _, val = item.partition("=")
            if key not in ("c", "beta", "n"):
                raise ValueError(f"unknown warp parameter {key!r}")
            params[key] = float(val)
        if "c" not in params:
            raise ValueError("warped:sinhexp requires c=<value>")
        return sinh_exp_manifold(int(params["n"]), params["c"], params["beta"])
    raise ValueError(f"unknown manifold id {mid!r}")


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------

@dataclass
class Chart:
    """Orthogonal 2-d chart with metric ``dx1^2 + G(x1)^2 dx2^2``.

    ``polar``: x1 = r, x2 = theta, G = f(r); ``fermi`` (H^2 only):
    x1 = s (signed distance to a geodesic), x2 = t, G = cosh(s).
    Volume density equals G.
    """
    kind: str
    manifold: ModelManifold
    G: Callable = field(repr=False, default=None)
    dG: Callable = field(repr=False, default=None)

    def embed(self, x1, x2):
        """Hyperboloid realization; only available over H^2."""
        if not (self.manifold.is_hyperbolic and self.manifold.n == 2):
            raise ValueError("hyperboloid embedding requires the H^2 chart")
        if self.kind == "polar":
            return polar_embed(x1, x2)
        return fermi_embed(x1, x2)

    def ideal_direction(self, x1, x2):
        """Angle of the ideal point behind a chart point, seen from the pole."""
        if self.kind == "polar":
            return np.asarray(x2, dtype=float)
        return ideal_angle(self.embed(x1, x2))


def polar_chart(manifold):
    return Chart("polar", manifold, G=manifold.warp, dG=manifold.warp_d1)


def fermi_chart(manifold):
    if not (manifold.is_hyperbolic and manifold.n == 2):
        raise ValueError("Fermi charts are only cataloged over H^2")
    return Chart("fermi", manifold, G=np.cosh, dG=np.sinh)


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass
class BoundaryPiece:
    name: str
    mean_curvature: Callable  # of the boundary parameter, inward orientation


@dataclass
class DomainSpec:
    """A cataloged region of a model manifold.

    ``ideal`` is the ideal boundary as an angular arc: ``None`` (bounded
    domain), ``(lo, hi)`` or the string ``"full"``.  The finite boundary
    pieces carry inward mean curvature (sum of principal curvatures with
    respect to the normal pointing into the domain).
    """
    kind: str
    manifold: ModelManifold
    chart: Chart
    finite_pieces: list
    ideal: object
    rho: float = None

    def has_ideal_point(self, angle):
        if self.ideal is None:
            return False
        if self.ideal == "full":
            return True
        lo, hi = self.ideal
        return lo < angle < hi


def full_plane(manifold=None):
    """The whole model surface (no finite boundary, full ideal circle)."""
    manifold = manifold or hyperbolic_space(2)
    return DomainSpec("full", manifold, polar_chart(manifold), [], "full")


def ball_exterior(rho, manifold=None):
    """Complement of the closed geodesic ball of radius rho about the pole."""
    manifold = manifold or hyperbolic_space(2)
    if rho <= 0:
        raise ValueError("rho must be positive")
    n, f, f1 = manifold.n, manifold.warp, manifold.warp_d1
    h = -(n - 1) * f1(rho) / f(rho)
    piece = BoundaryPiece("sphere", lambda param, h=h: h)
    return DomainSpec("ball-exterior", manifold, polar_chart(manifold),
                      [piece], "full", rho=rho)


def disk_interior(rho, manifold=None):
    """Geodesic ball of radius rho about the pole (bounded, mean convex)."""
    manifold = manifold or hyperbolic_space(2)
    if rho <= 0:
        raise ValueError("rho must be positive")
    n, f, f1 = manifold.n, manifold.warp, manifold.warp_d1
    h = (n - 1) * f1(rho) / f(rho)
    piece = BoundaryPiece("sphere", lambda param, h=h: h)
    return DomainSpec("disk", manifold, polar_chart(manifold), [piece],
                      None, rho=rho)


def half_plane(manifold=None):
    """Half-plane of H^2 bounded by a geodesic (totally geodesic, H = 0)."""
    manifold = manifold or hyperbolic_space(2)
    piece = BoundaryPiece("geodesic", lambda param: 0.0)
    return DomainSpec("half-plane", manifold, fermi_chart(manifold),
                      [piece], (0.0, np.pi))


def domain_from_id(did, manifold=None):
    """Resolve a domain id: ``h2``, ``halfplane``, ``ball-exterior:rho=<v>``,
    ``disk:rho=<v>``."""
    did = did.strip().lower()
    if did == "h2":
        return full_plane(manifold)
    if did == "halfplane":
        return half_plane(manifold)
    for prefix, ctor in (("ball-exterior:rho=", ball_exterior), ("disk:rho=", disk_interior)):
        if did.startswith(prefix):
            return ctor(float(did[len(prefix):]), manifold)
    raise ValueError(f"unknown domain id {did!r}")


# ---------------------------------------------------------------------------
# comparison quantities
# ---------------------------------------------------------------------------

def laplacian_of_distance(manifold, base, s):
    """Exact Laplacian of the distance function in the model.

    ``base="point"`` gives ``(n-1) f'(s)/f(s)`` (distance to the pole);
    ``base="hypersurface"`` gives ``(n-1) tanh(s)`` (distance to a
    totally geodesic hypersurface), available in the hyperbolic model
    only.  Under the curvature bound these dominate ``n-1`` and
    ``(n-1) tanh s`` respectively.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("distance must be positive")
    n = manifold.n
    if base == "point":
        out = (n - 1) * manifold.warp_d1(s) / manifold.warp(s)
    elif base == "hypersurface":
        if not manifold.is_hyperbolic:
            raise ValueError(
                "hypersurface-based distance Laplacian is only cataloged for "
                "the hyperbolic warp"
            )
        out = (n - 1) * np.tanh(s)
    else:
        raise ValueError(f"unknown base kind {base!r}")
    return float(out) if out.ndim == 0 else out


def inward_mean_curvature(domain, y):
    """Mean curvature (sum convention, inward orientation) at a finite
    boundary point ``y`` given in chart coordinates."""
    x1, x2 = y
    if not domain.finite_pieces:
        raise ValueError(f"domain {domain.kind!r} has no finite boundary")
    if domain.kind in ("ball-exterior", "disk"):
        if abs(x1 - domain.rho) > 1e-9:
            raise ValueError(f"point r = {x1} is not on the boundary circle")
        return float(domain.finite_pieces[0].mean_curvature(x2))
    if domain.kind == "half-plane":
        if abs(x1) > 1e-9:
            raise ValueError(f"point s = {x1} is not on the base geodesic")
        return float(domain.finite_pieces[0].mean_curvature(x2))
    raise ValueError(f"no boundary curvature catalog for {domain.kind!r}")


def sc_decay_check(manifold, k, eps, r_star, r_max, samples=200):
    """Check the exponential curvature-decay criterion that guarantees
    strict convexity at infinity.

    True iff for every sampled R in [r_star, r_max] the most negative
    radial curvature on the ball of radius R + 1 stays above
    ``-exp(2 k R) / R^(2 + 2 eps)``.
    """
    if r_star <= 0:
        raise ValueError("r_star must be positive")
    if r_max < r_star:
        raise ValueError(f"empty radius range [{r_star}, {r_max}]")
    if k < 1 or eps <= 0:
        raise ValueError("need k >= 1 and eps > 0")
    radii = np.linspace(r_star, r_max, samples)
    # min curvature over B_{R+1} is a running minimum along the profile
    grid = np.linspace(1e-6, r_max + 1.0, 4 * samples)
    curv = manifold.curvature(grid)
    for r in radii:
        floor = -np.exp(2.0 * k * r) / r ** (2.0 + 2.0 * eps)
        if curv[grid <= r + 1.0].min() < floor:
            return False
    return True


# ---------------------------------------------------------------------------
# strict-convexity witnesses
# ---------------------------------------------------------------------------

@dataclass
class ScWitness:
    """Constructive convexity witness at an ideal point.

    ``kind="geodesic"``: V is the half-plane beyond a geodesic (normal
    stored in hyperboloid coordinates); ``kind="sphere"``: V is the
    complement of a concentric ball of radius ``radius``.  In both
    cases the distance to the cutting hypersurface is positive inside V
    and the Laplacian of that distance dominates ``(n-1) tanh``.
    """
    domain: DomainSpec
    ideal_point: float
    kind: str
    normal: Optional[np.ndarray] = None
    radius: Optional[float] = None

    def distance(self, x1, x2):
        """Signed distance to the cutting hypersurface (positive in V)."""
        if self.kind == "sphere":
            return np.asarray(x1, dtype=float) - self.radius
        p = self.domain.chart.embed(x1, x2)
        return signed_distance_to_geodesic(p, self.normal)

    def laplacian_floor(self, s):
        """Lower bound for the Laplacian of the witness distance."""
        n = self.domain.manifold.n
        if self.kind == "geodesic":
            return (n - 1) * np.tanh(s)
        r = self.radius + np.asarray(s, dtype=float)
        m = self.domain.manifold
        return (n - 1) * m.warp_d1(r) / m.warp(r)


def sc_witness(domain, x, w):
    """Build the cataloged convexity witness for ideal point ``x``.

    ``w`` is the angular half-width of the prescribed neighborhood (or
    an ``(lo, hi)`` arc containing x).  Geodesic witnesses are used on
    the plane and half-plane (the cut at distance rho0 from the pole
    has ideal endpoints x +- delta with cos(delta) = tanh(rho0));
    ball-exterior domains get the concentric sphere cut, whose closure
    misses the finite boundary entirely.
    """
    if np.ndim(w) == 1:
        lo, hi = w
        if not lo < x < hi:
            raise ValueError("neighborhood arc does not contain x")
        delta = min(x - lo, hi - x)
    else:
        delta = float(w)
    if delta <= 0:
        raise ValueError("neighborhood must have positive width")
    if not domain.has_ideal_point(x):
        raise ValueError(
            f"{x!r} is not an ideal boundary point of domain {domain.kind!r}")

    if domain.kind == "ball-exterior":
        return ScWitness(domain, x, "sphere", radius=domain.rho + 1.0)
    if domain.kind in ("full", "half-plane"):
        if domain.kind == "half-plane":
            delta = min(delta, 0.95 * min(x, np.pi - x))
        delta = min(delta, 1.45)  # keep cos(delta) > 0 so the cut exists
        rho0 = np.arctanh(np.cos(delta))
        return ScWitness(domain, x, "geodesic", normal=geodesic_normal(x, rho0))
    raise ValueError(f"no witness construction for domain {domain.kind!r}")

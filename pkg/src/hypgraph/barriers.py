"""Radial barrier profiles, sharp constants, and supersolution residuals.

Three profile families are implemented:

* ``psi(t) = pi/2 - arcsec(t + 1)``, the bounded profile with infinite
  boundary slope used by the nonexistence construction;
* ``g(s) = int_s^inf dt / sqrt(cosh(t)^(2(n-1)) - 1)``, the height
  barrier at infinity for the minimal surface operator (an exact
  solution on H^n over totally geodesic cuts);
* ``g_p(s) = c int_s^inf cosh(t)^((1-n)/(p-1)) dt``, its analogue for
  the p-Laplacian.

The constants A (depending on a curvature excess eps) and B (universal)
are the least amplitudes making ``A psi(dist)`` a strict supersolution;
they come from a quartic polynomial with leading coefficient ``-eps``
whose positive part is maximized numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import integrate, integrate_to_infinity

_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


# ---------------------------------------------------------------------------
# psi profile
# ---------------------------------------------------------------------------

def psi_eval(t):
    """Evaluate ``psi(t) = pi/2 - arcsec(t+1)`` with its two derivatives.

    Defined for t >= 0; psi(0) = pi/2, psi decreases to 0 at infinity.
    The derivatives blow up at t = 0 (the infinite-slope end) and are
    returned as infinities there.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("psi is only defined for t >= 0")
    value = np.pi / 2 - np.arccos(1.0 / (t + 1.0))
    q = t * t + 2.0 * t
    with np.errstate(divide="ignore"):
        d1 = -1.0 / ((t + 1.0) * np.sqrt(q))
        d2 = 1.0 / ((t + 1.0) ** 2 * np.sqrt(q)) + q ** -1.5
    if value.ndim == 0:
        return float(value), float(d1), float(d2)
    return value, d1, d2


# ---------------------------------------------------------------------------
# height barriers g and g_p
# ---------------------------------------------------------------------------

def _cosh_pow_minus_one(m, t):
    """``cosh(t)^(2m) - 1`` without cancellation at small t."""
    return np.expm1(m * np.log1p(np.sinh(t) ** 2))


def _g_integrand(n):
    return lambda t: 1.0 / np.sqrt(_cosh_pow_minus_one(n - 1, t))


def _g_tail_bound(n):
    # cosh(t)^(2(n-1)) - 1 >= cosh(t)^(2(n-1)) (1 - cosh(T)^(-2(n-1))) for t >= T,
    # and cosh(t) >= exp(t)/2, so the tail is below a plain exponential.
    m = n - 1

    def bound(T):
        sup = 2.0 ** m / np.sqrt(1.0 - np.cosh(T) ** (-2 * m))
        return sup * np.exp(-m * T) / m

    return bound


def g_eval(n, s, abs_tol=1e-10):
    """Height barrier ``g(s)`` and its derivative.

    ``value = int_s^inf dt / sqrt(cosh(t)^(2(n-1)) - 1)`` by adaptive
    quadrature with an analytic exponential tail cutoff;
    ``d1 = -1/sqrt(cosh(s)^(2(n-1)) - 1)`` analytically.  g decreases
    from +inf at 0+ to 0 at infinity.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_arr <= 0):
        raise ValueError("g is only defined for s > 0")
    f = _g_integrand(n)
    order = np.argsort(s_arr, kind="stable")
    ordered = s_arr[order]
    vals = np.empty_like(ordered)
    top = ordered[-1]
    acc = integrate_to_infinity(f, top, _g_tail_bound(n), abs_tol=abs_tol)
    vals[-1] = acc
    for i in range(len(ordered) - 2, -1, -1):
        if ordered[i + 1] > ordered[i]:
            acc += integrate(f, ordered[i], ordered[i + 1], abs_tol=abs_tol)
        vals[i] = acc
    value = np.empty_like(s_arr)
    value[order] = vals
    d1 = -1.0 / np.sqrt(_cosh_pow_minus_one(n - 1, s_arr))
    if np.ndim(s) == 0:
        return float(value[0]), float(d1[0])
    return value, d1


def _g_d2(n, s):
    s = np.asarray(s, dtype=float)
    return ((n - 1) * np.cosh(s) ** (2 * n - 3) * np.sinh(s)
            * _cosh_pow_minus_one(n - 1, s) ** -1.5)


def gp_eval(n, p, c, s, abs_tol=1e-10):
    """p-Laplacian height barrier ``g_p(s) = c int_s^inf cosh(t)^(-alpha) dt``
    with ``alpha = (n-1)/(p-1)``, and derivative ``-c cosh(s)^(-alpha)``."""
    if n < 2 or p <= 1:
        raise ValueError("need n >= 2 and p > 1 for a convergent profile")
    if c <= 0:
        raise ValueError("scale c must be positive")
    alpha = (n - 1.0) / (p - 1.0)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_arr < 0):
        raise ValueError("g_p is only defined for s >= 0")
    f = lambda t: np.cosh(t) ** -alpha
    bound = lambda T: 2.0 ** alpha * np.exp(-alpha * T) / alpha
    order = np.argsort(s_arr, kind="stable")
    ordered = s_arr[order]
    vals = np.empty_like(ordered)
    acc = integrate_to_infinity(f, ordered[-1], bound, abs_tol=abs_tol)
    vals[-1] = acc
    for i in range(len(ordered) - 2, -1, -1):
        if ordered[i + 1] > ordered[i]:
            acc += integrate(f, ordered[i], ordered[i + 1], abs_tol=abs_tol)
        vals[i] = acc
    value = np.empty_like(s_arr)
    value[order] = c * vals
    d1 = -c * np.cosh(s_arr) ** -alpha
    if np.ndim(s) == 0:
        return float(value[0]), float(d1[0])
    return value, d1


# ---------------------------------------------------------------------------
# the quartic threshold constants
# ---------------------------------------------------------------------------

def barrier_polynomial(t, eps, a):
    """The degree-4 bracket whose negativity certifies ``a psi`` as a
    strict supersolution against a Laplacian excess ``eps``:

        P(t) = (t+1)(t^2+2t) + (t+1)^3 - eps (t+1)^2 (t^2+2t) - eps a^2.

    Leading coefficient ``-eps``, constant term ``1 - eps a^2``.
    """
    t = np.asarray(t, dtype=float)
    u = t + 1.0
    q = t * t + 2.0 * t
    return u * q + u ** 3 - eps * u * u * q - eps * a * a


def _quartic_positive_part(t, eps):
    # P(t) + eps a^2, whose max over t >= 0 fixes the threshold amplitude
    u = np.asarray(t, dtype=float) + 1.0
    q = u * u - 1.0
    return u * q + u ** 3 - eps * u * u * q


def min_barrier_constant(eps, n_grid=10_000, jitter=None):
    """Least amplitude ``A`` with ``barrier_polynomial(t, eps, A) < 0``
    for all t >= 0, i.e. ``sqrt(max_t Q(t) / eps)`` for the eps-free
    part Q.

    The max is bracketed on a coarse grid (the ``-eps t^4`` leading term
    confines it to ``t <= max(1, 13/eps)``) and polished by golden
    section.  ``n_grid``/``jitter`` only perturb the search grid; the
    result is stable to far below 1e-6.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    t_hi = max(200.0, 15.0 / eps)
    grid = np.linspace(0.0, t_hi, n_grid)
    if jitter is not None:
        rng = np.random.default_rng(jitter)
        inner = grid[1:-1] + (grid[1] - grid[0]) * 0.4 * rng.uniform(-1, 1, n_grid - 2)
        grid = np.concatenate(([0.0], np.sort(inner), [t_hi]))
    vals = _quartic_positive_part(grid, eps)
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    # golden-section maximization on [lo, hi]
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1 = _quartic_positive_part(x1, eps)
    f2 = _quartic_positive_part(x2, eps)
    while hi - lo > 1e-12:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = _quartic_positive_part(x2, eps)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = _quartic_positive_part(x1, eps)
    q_max = max(f1, f2, _quartic_positive_part(0.0, eps))
    return float(np.sqrt(q_max / eps))


def universal_constant_B(n):
    """The dimension-free amplitude: the eps = 1 threshold works in every
    dimension because the distance-to-sphere Laplacian excess is n-1 >= 1
    and the threshold decreases in the excess."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return min_barrier_constant(1.0)


# ---------------------------------------------------------------------------
# profiles as objects
# ---------------------------------------------------------------------------

@dataclass
class BarrierProfile:
    """A radial profile with evaluators for value and two derivatives."""
    kind: str
    params: dict = field(default_factory=dict)

    def value(self, s):
        if self.kind == "psi":
            v = psi_eval(s)[0]
            return self.params["A"] * v + self.params.get("offset", 0.0)
        if self.kind == "g":
            return g_eval(self.params["n"], s)[0]
        return gp_eval(self.params["n"], self.params["p"], self.params["c"], s)[0]

    def d1(self, s):
        if self.kind == "psi":
            return self.params["A"] * psi_eval(s)[1]
        if self.kind == "g":
            return g_eval(self.params["n"], s)[1]
        return gp_eval(self.params["n"], self.params["p"], self.params["c"], s)[1]

    def d2(self, s):
        if self.kind == "psi":
            return self.params["A"] * psi_eval(s)[2]
        if self.kind == "g":
            return _g_d2(self.params["n"], s)
        n, p, c = self.params["n"], self.params["p"], self.params["c"]
        alpha = (n - 1.0) / (p - 1.0)
        s = np.asarray(s, dtype=float)
        return c * alpha * np.cosh(s) ** (-alpha - 1.0) * np.sinh(s)


def make_g_profile(n):
    return BarrierProfile("g", {"n": n})


def make_gp_profile(n, p, c=1.0):
    if p <= 1 or n < 2:
        raise ValueError("need n >= 2 and p > 1")
    return BarrierProfile("g_p", {"n": n, "p": p, "c": c})


def make_psi_profile(amplitude, offset=0.0):
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    return BarrierProfile("psi", {"A": amplitude, "offset": offset})


def suggested_gp_scale(n, p, big_c):
    """The documented 'large enough' scale for the p-Laplacian barrier:
    ``2 C (cosh 1)^((n-1)/(p-1))``."""
    return 2.0 * big_c * np.cosh(1.0) ** ((n - 1.0) / (p - 1.0))


# ---------------------------------------------------------------------------
# radial operator residuals
# ---------------------------------------------------------------------------

def radial_supersolution_residual(profile, operator, laplacian_of_s, s, p=None):
    """First-principles radial reduction of the operator on ``w = h(s(.))``
    where ``|grad s| = 1`` and ``Delta s`` is supplied by the caller.

    minimal-surface:  d/ds [ h' / sqrt(1 + h'^2) ] + h' / sqrt(1 + h'^2) * Delta s
    p-laplace:        (p-1) |h'|^(p-2) h'' + |h'|^(p-2) h' * Delta s

    The sign is the certified quantity: the coefficient of ``Delta s``
    is negative for decreasing profiles, so any Laplacian excess drives
    the residual down.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("profile derivatives are singular at s <= 0")
    lap = np.asarray(laplacian_of_s, dtype=float)
    h1 = profile.d1(s)
    h2 = profile.d2(s)
    if operator == "minimal-surface":
        w2 = 1.0 + h1 * h1
        res = h2 / w2 ** 1.5 + h1 / np.sqrt(w2) * lap
    elif operator == "p-laplace":
        p = p if p is not None else profile.params.get("p")
        if p is None:
            raise ValueError("p-laplace residual needs an exponent p")
        mag = np.abs(h1) ** (p - 2.0)
        res = (p - 1.0) * mag * h2 + mag * h1 * lap
    else:
        raise ValueError(f"unknown operator {operator!r}")
    return float(res) if res.ndim == 0 else res


@dataclass
class SupersolutionCertificate:
    """Sampled sign certificate for a radial profile under the worst-case
    distance Laplacian ``(n-1) tanh s`` allowed by the curvature bound."""
    profile_kind: str
    params: dict
    operator: str
    sample_grid: np.ndarray
    residuals: np.ndarray
    worst_case_laplacian_used: bool
    tolerance: float

    @property
    def max_residual(self):
        return float(self.residuals.max())

    @property
    def passed(self):
        return bool(self.max_residual <= self.tolerance)

    def to_dict(self):
        return {
            "profile": self.profile_kind,
            "params": self.params,
            "operator": self.operator,
            "sample_grid": self.sample_grid.tolist(),
            "residuals": self.residuals.tolist(),
            "max_residual": self.max_residual,
            "worst_case_laplacian_used": self.worst_case_laplacian_used,
            "pass": self.passed,
        }


def certify_supersolution(profile, operator, n, s_grid=None, tolerance=1e-10,
                          laplacian_excess=0.0):
    """Certify ``residual <= tolerance`` on a sample grid with the
    comparison worst case ``Delta s = (n-1) tanh s`` (plus an optional
    excess, which can only help)."""
    if s_grid is None:
        s_grid = np.geomspace(0.1, 10.0, 200)
    s_grid = np.asarray(s_grid, dtype=float)
    lap = (n - 1) * np.tanh(s_grid) + laplacian_excess
    res = radial_supersolution_residual(profile, operator, lap, s_grid)
    return SupersolutionCertificate(
        profile_kind=profile.kind,
        params=dict(profile.params),
        operator=operator,
        sample_grid=s_grid,
        residuals=np.atleast_1d(res),
        worst_case_laplacian_used=(laplacian_excess == 0.0),
        tolerance=tolerance,
    )


# ---------------------------------------------------------------------------
# the capped barrier field over a convexity witness
# ---------------------------------------------------------------------------

@dataclass
class BarrierField:
    """``Sigma = min(g(dist to cut), C)`` inside the witness region,
    ``C`` outside: continuous, nonnegative, pinching to 0 at the ideal
    point and at least C off the witness."""
    witness: object
    height: float
    n: int
    _s_cap: float = field(default=0.0, repr=False)

    def evaluate(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if self.height == 0.0:
            return np.zeros(np.broadcast(x1, x2).shape)
        s = self.witness.distance(x1, x2)
        out = np.full(np.shape(s), self.height)
        inside = s > self._s_cap
        if np.any(inside):
            g_vals = g_eval(self.n, np.asarray(s)[inside])[0]
            out[inside] = np.minimum(g_vals, self.height)
        return out


def upper_barrier_field(witness, height):
    """Build the capped height-barrier field over a convexity witness."""
    if height < 0:
        raise ValueError("barrier height must be nonnegative")
    n = witness.domain.manifold.n
    field_ = BarrierField(witness, float(height), n)
    if height > 0.0:
        # s below this cap has g(s) >= height, so the min is height there;
        # below 1e-6 the profile exceeds any realistic cap, no need to probe it
        lo, hi = 1e-6, 60.0
        if g_eval(n, lo)[0] > height:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if g_eval(n, mid)[0] > height:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-13:
                    break
            field_._s_cap = lo
    return field_

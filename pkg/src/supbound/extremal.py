"""The radial extremal family attaining the sharp constant.

The profile u(r) = (1 - e^{-r})/r satisfies sup u = 1 and has both
integral of |grad u|^2 and integral of |lap u|^2 equal to 2 pi over R^3,
so its quotient is exactly 1/(2 pi).  Compactly supported approximants are
built by multiplying with a C^2 cutoff psi(r/R) and converge to the same
values as R grows; scaling them into a voxel domain demonstrates that the
constant is attained on any fixture.

Cutoff design.  Any cutoff supported in a ball of radius R pays a harmonic
"capacity" surcharge on the gradient energy of at least 4 pi / R (the 1/r
far field must be discharged inside the ball), so grad_sq >= 2 pi (1 + 2/R)
no matter how smooth psi is.  The cutoff used here is the energy-optimal
linear descent of r*u ~ 1 (i.e. psi linear in r), with quintic-Hermite
shoulders for C^2 smoothness:

    psi(t) = 1                         on [0, CUT_FLAT_END]
    psi(t) = quintic shoulder          on [CUT_FLAT_END, CUT_FLAT_END + 2w]
    psi(t) = (1 - t)/(1 - CUT_FLAT_END) on the middle stretch
    psi(t) = quintic shoulder          on [1 - 2w, 1]
    psi(t) = 0                         beyond 1,

with CUT_FLAT_END = 0.10 and shoulder half-width w = 0.06.  The shoulders
match value, slope and curvature at both ends; the Hermite coefficients are
solved once at import.  At R = 20 this leaves grad_sq within ~10% and lap_sq
within ~5% of 2 pi (the gradient figure is within 4% of the capacity floor).
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad

from . import grid
from .grid import ScalarField, VoxelDomain

TWO_PI = 2.0 * math.pi

TAYLOR_SWITCH = 1e-4  # below this radius (1-e^-r)/r cancels catastrophically

CUT_FLAT_END = 0.10
CUT_SHOULDER_HALFWIDTH = 0.06
MIN_CUTOFF_RADIUS = 4.0


class ExtremalError(ValueError):
    pass


def extremal_value(r):
    """(1 - e^{-r})/r, with the removable singularity filled by its series."""
    r = np.asarray(r, dtype=float)
    safe = np.where(r > 0, r, 1.0)
    exact = -np.expm1(-safe) / safe
    series = 1.0 - r / 2.0 + r * r / 6.0
    out = np.where(r < TAYLOR_SWITCH, series, exact)
    return out if out.ndim else float(out)


def extremal_slope(r):
    """d/dr of the extremal profile: ((1+r)e^{-r} - 1)/r^2."""
    r = np.asarray(r, dtype=float)
    safe = np.where(r > 0, r, 1.0)
    exact = ((1.0 + safe) * np.exp(-safe) - 1.0) / safe**2
    series = -0.5 + r / 3.0 - r * r / 8.0
    out = np.where(r < TAYLOR_SWITCH, series, exact)
    return out if out.ndim else float(out)


def extremal_laplacian(r):
    """Radial Laplacian of the extremal profile: -e^{-r}/r (diverges at 0,
    but only as 1/r, so its square is integrable)."""
    r = np.asarray(r, dtype=float)
    out = -np.exp(-r) / r
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# the C^2 cutoff


def _hermite_quintic(a, va, sa, b, vb, sb):
    """Quintic with value/slope prescribed and zero curvature at both ends."""
    M, rhs = [], [va, sa, 0.0, vb, sb, 0.0]
    for x, order in ((a, 0), (a, 1), (a, 2), (b, 0), (b, 1), (b, 2)):
        row = np.zeros(6)
        for p in range(order, 6):
            c = 1.0
            for q in range(order):
                c *= p - q
            row[p] = c * x ** (p - order)
        M.append(row)
    return np.linalg.solve(np.array(M), np.array(rhs))


def _poly_eval(coeffs, t, order):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for p in range(order, 6):
        c = coeffs[p]
        for q in range(order):
            c *= p - q
        out = out + c * t ** (p - order)
    return out


_T0 = CUT_FLAT_END
_T1 = CUT_FLAT_END + 2.0 * CUT_SHOULDER_HALFWIDTH
_T2 = 1.0 - 2.0 * CUT_SHOULDER_HALFWIDTH
_T3 = 1.0
_SLOPE = -1.0 / (1.0 - CUT_FLAT_END)
_LIN = lambda t: (1.0 - t) / (1.0 - CUT_FLAT_END)
_H1 = _hermite_quintic(_T0, 1.0, 0.0, _T1, float(_LIN(_T1)), _SLOPE)
_H2 = _hermite_quintic(_T2, float(_LIN(_T2)), _SLOPE, _T3, 0.0, 0.0)

CUTOFF_KNOTS = (_T0, _T1, _T2, _T3)


def _cutoff(t, order):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    flat = t <= _T0
    sh1 = (t > _T0) & (t < _T1)
    lin = (t >= _T1) & (t <= _T2)
    sh2 = (t > _T2) & (t < _T3)
    if order == 0:
        out[flat] = 1.0
        out[lin] = _LIN(t[lin])
    elif order == 1:
        out[lin] = _SLOPE
    out[sh1] = _poly_eval(_H1, t[sh1], order)
    out[sh2] = _poly_eval(_H2, t[sh2], order)
    return out


def cutoff_weight(t):
    """The C^2 cutoff psi: 1 near 0, smoothed linear descent, 0 beyond 1."""
    out = _cutoff(t, 0)
    return out if out.ndim else float(out)


def cutoff_weight_d1(t):
    out = _cutoff(t, 1)
    return out if out.ndim else float(out)


def cutoff_weight_d2(t):
    out = _cutoff(t, 2)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class RadialProfile:
    """Radial samples of the (possibly cut, possibly rescaled) extremal.

    values[i] = u(r_nodes[i]/scale) * psi(r_nodes[i]/(scale*cutoff_radius));
    cutoff_radius is None for the uncut profile.  r_max bounds the sampled
    (and for the uncut profile, quadrature) range.
    """

    r_nodes: np.ndarray
    values: np.ndarray
    cutoff_radius: float | None
    scale: float = 1.0
    r_max: float = 40.0

    def __post_init__(self):
        r = np.asarray(self.r_nodes, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape:
            raise ExtremalError("r_nodes and values must be matching 1D arrays")
        if np.any(np.diff(r) <= 0) or r[0] < 0:
            raise ExtremalError("r_nodes must be increasing and nonnegative")
        if not np.all(np.isfinite(v)):
            raise ExtremalError("profile values must be finite")
        object.__setattr__(self, "r_nodes", r)
        object.__setattr__(self, "values", v)

    @property
    def support_radius(self) -> float | None:
        if self.cutoff_radius is None:
            return None
        return self.cutoff_radius * self.scale


def profile_value(profile: RadialProfile, r):
    """Closed-form evaluation of the profile at radii r."""
    r = np.asarray(r, dtype=float)
    base = extremal_value(r / profile.scale)
    if profile.cutoff_radius is not None:
        base = base * cutoff_weight(r / (profile.scale * profile.cutoff_radius))
    return base if base.ndim else float(base)


def uncut_profile(r_max: float = 40.0, n_samples: int = 801) -> RadialProfile:
    r = np.linspace(0.0, r_max, n_samples)
    return RadialProfile(r, extremal_value(r), None, 1.0, float(r_max))


def cutoff_sequence(R: float, n_samples: int = 801) -> RadialProfile:
    """Compactly supported approximant u(r) * psi(r/R); requires R >= 4."""
    if R < MIN_CUTOFF_RADIUS:
        raise ExtremalError(f"cutoff radius must be >= {MIN_CUTOFF_RADIUS}, got {R}")
    r = np.linspace(0.0, R, n_samples)
    vals = extremal_value(r) * cutoff_weight(r / R)
    return RadialProfile(r, vals, float(R), 1.0, float(R))


def scale_profile(profile: RadialProfile, s: float) -> RadialProfile:
    """Rescale x -> x/s (support radius multiplies by s)."""
    if s <= 0:
        raise ExtremalError(f"scale must be positive, got {s}")
    return replace(
        profile,
        r_nodes=profile.r_nodes * s,
        values=profile.values.copy(),
        scale=profile.scale * s,
        r_max=profile.r_max * s,
    )


@dataclass(frozen=True)
class RadialIntegrals:
    sup: float
    grad_sq: float
    lap_sq: float

    @property
    def quotient(self) -> float:
        return self.sup**2 / math.sqrt(self.grad_sq * self.lap_sq)


def radial_integrals(profile: RadialProfile, quad_tol: float = 1e-10) -> RadialIntegrals:
    """sup, 4 pi int f'(r)^2 r^2 dr and 4 pi int (lap f)^2 r^2 dr.

    Uses the closed-form slope and Laplacian of the profile.  For the uncut
    profile the quadrature runs on [0, r_max] and the slowly decaying
    gradient tail (the 1/r far field) is added in closed form:

        4 pi int_a^inf u'(r)^2 r^2 dr = 4 pi [ (1 - e^{-a})^2 / a + e^{-2a}/2 ]
        4 pi int_a^inf (e^{-r}/r)^2 r^2 dr = 2 pi e^{-2a} .

    A zero profile (all sampled values zero) integrates to (0, 0, 0).
    """
    if not np.any(profile.values):
        return RadialIntegrals(0.0, 0.0, 0.0)
    s = profile.scale
    R = profile.cutoff_radius

    if R is None:
        a = profile.r_max / s  # in unscaled units

        def slope(r):
            return extremal_slope(r)

        def lap(r):
            return extremal_laplacian(r)

        breakpoints = [0.0, min(1.0, a), a]
        tail_grad = 4.0 * math.pi * ((-np.expm1(-a)) ** 2 / a + math.exp(-2.0 * a) / 2.0)
        tail_lap = TWO_PI * math.exp(-2.0 * a)
    else:

        def slope(r):
            t = r / R
            return extremal_slope(r) * cutoff_weight(t) + extremal_value(r) * cutoff_weight_d1(t) / R

        def lap(r):
            t = r / R
            return (
                extremal_laplacian(r) * cutoff_weight(t)
                + 2.0 * extremal_slope(r) * cutoff_weight_d1(t) / R
                + extremal_value(r)
                * (cutoff_weight_d2(t) / R**2 + 2.0 * cutoff_weight_d1(t) / (R * r))
            )

        breakpoints = [0.0] + [k * R for k in CUTOFF_KNOTS]
        tail_grad = tail_lap = 0.0

    grad_sq, grad_err = 0.0, 0.0
    lap_sq, lap_err = 0.0, 0.0
    for lo, hi in zip(breakpoints[:-1], breakpoints[1:]):
        if hi - lo <= 0:
            continue
        val, err = quad(lambda r: 4.0 * math.pi * r * r * slope(r) ** 2, lo, hi,
                        epsabs=quad_tol * 1e-2, epsrel=quad_tol * 1e-2, limit=400)
        grad_sq += val
        grad_err += err
        val, err = quad(lambda r: 4.0 * math.pi * r * r * lap(r) ** 2, lo, hi,
                        epsabs=quad_tol * 1e-2, epsrel=quad_tol * 1e-2, limit=400)
        lap_sq += val
        lap_err += err
    if grad_err > quad_tol * max(1.0, grad_sq) or lap_err > quad_tol * max(1.0, lap_sq):
        raise ExtremalError(
            f"radial quadrature error estimate too large (grad {grad_err:.2e}, lap {lap_err:.2e})"
        )
    # scaling x -> x/s: grad energy times s, lap energy times 1/s
    sup = float(np.max(np.abs(profile.values)))
    return RadialIntegrals(sup, grad_sq * s, lap_sq / s)


# ---------------------------------------------------------------------------
# embedding into voxel domains


def embed_in_domain(profile: RadialProfile, domain: VoxelDomain) -> ScalarField:
    """Sample the cut profile, centered at the deepest interior node and
    rescaled so its support fills the inscribed ball there.

    The center comes from the breadth-first depth transform (ties broken by
    lowest index); the inscribed radius is the Euclidean clearance of that
    node, which must be at least 3h.  The result vanishes identically at
    every non-interior node.
    """
    if profile.cutoff_radius is None:
        raise ExtremalError("only compactly supported (cut) profiles can be embedded")
    center = grid.deepest_interior_node(domain)
    clearance = grid.boundary_clearance(domain)[center] * domain.h
    if clearance < 3.0 * domain.h:
        raise ExtremalError(
            f"no inscribed ball of radius >= 3h around any interior node "
            f"(best clearance {clearance:.3g})"
        )
    fitted = scale_profile(profile, clearance / profile.support_radius)
    nodes = domain.interior_nodes()
    delta = (nodes - np.asarray(center)) * domain.h
    r = np.sqrt(np.sum(delta * delta, axis=1))
    return ScalarField(domain, profile_value(fitted, r))

"""Vector Burgers flow u_t + (u . grad) u = nu lap u with zero boundary values,
plus the a priori gradient-energy machinery derived from the sharp pointwise
bound.

The energy identity  (1/2) d/dt ||grad u||^2 + nu ||lap u||^2 = <u.grad u, lap u>
combined with the pointwise bound and Young's inequality yields the
differential inequality y' <= 2 C y^3 for y = ||grad u||^2, with
C = 27/(1024 pi^2 nu^3).  The comparison solution y0 (1 - t/T)^{-1/2} and the
horizon T = 256 pi^2 nu^3/(27 y0^2) bound every resolved trajectory; an RK4
integration of the comparison ODE provides an independent check of the entire
constant chain.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import grid
from .grid import ScalarField, VectorField3, VoxelDomain
from .linalg import conjugate_gradient

CFL_SAFETY = 0.9


class BurgersError(RuntimeError):
    pass


@dataclass(frozen=True)
class BurgersState:
    u: VectorField3
    t: float
    nu: float

    def __post_init__(self):
        if self.nu <= 0:
            raise BurgersError(f"viscosity must be positive, got {self.nu}")
        if self.t < 0:
            raise BurgersError(f"time must be nonnegative, got {self.t}")


def grad_energy(u: VectorField3) -> float:
    """y = ||grad u||^2 summed over components."""
    return sum(grid.grad_norm_sq(c) for c in u.components)


def lap_energy(u: VectorField3) -> float:
    """d = ||lap u||^2 summed over components."""
    return sum(grid.l2_norm_sq(grid.laplacian(c)) for c in u.components)


def sup_speed(u: VectorField3) -> float:
    """Pointwise Euclidean maximum of |u|."""
    return math.sqrt(float(np.max(sum(c.values**2 for c in u.components))))


def blowup_horizon(y0: float, nu: float) -> float:
    """T = 256 pi^2 nu^3 / (27 y0^2)."""
    if y0 <= 0 or nu <= 0:
        raise BurgersError(f"need positive y0 and nu, got y0={y0}, nu={nu}")
    return 256.0 * math.pi**2 * nu**3 / (27.0 * y0**2)


def young_constant(nu: float) -> float:
    """C = 27/(1024 pi^2 nu^3) in the absorbed inequality y' <= 2 C y^3."""
    return 27.0 / (1024.0 * math.pi**2 * nu**3)


def gradient_bound(t: float, y0: float, T: float) -> float:
    """y0 / sqrt(1 - t/T), valid for 0 <= t < T."""
    if t >= T:
        raise BurgersError(f"gradient bound undefined at t={t} >= T={T}")
    return y0 / math.sqrt(1.0 - t / T)


def dissipation_bound(t: float, y0: float, nu: float, T: float) -> float:
    """y0 / (2 nu (1 - (t/T)^(1/6)) sqrt(1 - sqrt(t/T))) for 0 < t < T;
    tends to y0/(2 nu) as t -> 0+."""
    if t >= T:
        raise BurgersError(f"dissipation bound undefined at t={t} >= T={T}")
    if t <= 0:
        return y0 / (2.0 * nu)
    tau = t / T
    return y0 / (2.0 * nu * (1.0 - tau ** (1.0 / 6.0)) * math.sqrt(1.0 - math.sqrt(tau)))


def advection(u: VectorField3) -> VectorField3:
    """(u . grad) u with second-order centered differences, zero extension."""
    d = u.domain
    dense = [c.to_dense() for c in u.components]
    out = []
    for comp in dense:
        acc = np.zeros(d.dims)
        for axis, vel in enumerate(dense):
            upper = [slice(1, -1)] * 3
            lower = [slice(1, -1)] * 3
            upper[axis] = slice(2, None)
            lower[axis] = slice(None, -2)
            deriv = (comp[tuple(upper)] - comp[tuple(lower)]) / (2.0 * d.h)
            acc[1:-1, 1:-1, 1:-1] += vel[1:-1, 1:-1, 1:-1] * deriv
        acc[~d.interior_mask] = 0.0
        out.append(ScalarField(d, d.pack(acc)))
    return VectorField3(tuple(out))


def max_timestep(state: BurgersState) -> float:
    """Advective/diffusive step ceiling min(h^2/(6 nu), h/max|u|) * 0.9."""
    d = state.u.domain
    dt = d.h**2 / (6.0 * state.nu) * CFL_SAFETY
    speed = sup_speed(state.u)
    if speed > 0:
        dt = min(dt, d.h / speed * CFL_SAFETY)
    return dt


def step(state: BurgersState, dt: float, cg_rtol: float = 1e-10) -> BurgersState:
    """One semi-implicit step: explicit centered advection, implicit diffusion.

    Solves (I - nu dt lap) u_new = u - dt (u . grad) u per component by CG;
    zero boundary values are preserved exactly by construction.
    """
    if dt <= 0:
        raise BurgersError(f"time step must be positive, got {dt}")
    ceiling = max_timestep(state)
    if dt > ceiling * (1.0 + 1e-12):
        raise BurgersError(f"dt={dt:g} exceeds the stability ceiling {ceiling:g}")
    d = state.u.domain
    neg_lap = d.neg_laplacian_matrix()
    c = state.nu * dt
    apply_op = lambda v: v + c * (neg_lap @ v)
    adv = advection(state.u)
    new_components = []
    for comp, a in zip(state.u.components, adv.components):
        rhs = comp.values - dt * a.values
        try:
            sol, _ = conjugate_gradient(apply_op, rhs, rtol=cg_rtol, x0=comp.values)
        except Exception as exc:
            raise BurgersError(f"implicit diffusion solve failed at t={state.t}: {exc}") from exc
        if not np.all(np.isfinite(sol)):
            raise BurgersError(f"non-finite velocity after step at t={state.t}")
        new_components.append(ScalarField(d, sol))
    return BurgersState(VectorField3(tuple(new_components)), state.t + dt, state.nu)


def energy_identity_residual(before: BurgersState, after: BurgersState) -> float:
    """Residual of the discrete energy identity across one step, normalized.

    (y(t+dt) - y(t))/(2 dt) + nu d(t+1/2) - <u.grad u, lap u>(t+1/2), divided
    by nu d(t+1/2); both nonlinear term and dissipation are evaluated at the
    half-step average field.  Zero states give residual zero.
    """
    dt = after.t - before.t
    if dt <= 0:
        raise BurgersError("states must be consecutive in time")
    half = VectorField3(
        tuple(0.5 * (b + a) for b, a in zip(before.u.components, after.u.components))
    )
    d_half = lap_energy(half)
    if d_half == 0.0:
        return 0.0
    adv = advection(half)
    nonlinear = sum(
        grid.l2_inner(a, grid.laplacian(c)) for a, c in zip(adv.components, half.components)
    )
    dy = (grad_energy(after.u) - grad_energy(before.u)) / (2.0 * dt)
    return (dy + before.nu * d_half - nonlinear) / (before.nu * d_half)


# ---------------------------------------------------------------------------
# trajectory monitoring


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    y: float
    d: float
    cum_d: float
    sup: float
    residual: float


@dataclass(frozen=True)
class BoundMonitor:
    y0: float
    nu: float
    T: float
    samples: list[TrajectorySample]


def simulate(
    state: BurgersState,
    t_end: float,
    dt: float | None = None,
    cg_rtol: float = 1e-10,
) -> tuple[BurgersState, BoundMonitor]:
    """March to t_end recording (t, y, d, trapezoid cumulative d, sup|u|,
    energy-identity residual) at every step."""
    y0 = grad_energy(state.u)
    if y0 <= 0:
        raise BurgersError("initial data must have positive gradient energy")
    T = blowup_horizon(y0, state.nu)
    y = y0
    d = lap_energy(state.u)
    samples = [TrajectorySample(state.t, y, d, 0.0, sup_speed(state.u), 0.0)]
    cum = 0.0
    while state.t < t_end - 1e-14:
        dt_step = max_timestep(state) if dt is None else min(dt, max_timestep(state))
        dt_step = min(dt_step, t_end - state.t)
        new_state = step(state, dt_step, cg_rtol=cg_rtol)
        resid = energy_identity_residual(state, new_state)
        d_new = lap_energy(new_state.u)
        cum += 0.5 * (d + d_new) * dt_step
        d = d_new
        state = new_state
        samples.append(
            TrajectorySample(state.t, grad_energy(state.u), d, cum, sup_speed(state.u), resid)
        )
    return state, BoundMonitor(y0, state.nu, T, samples)


@dataclass(frozen=True)
class MarginRow:
    t: float
    y: float
    bound1: float
    margin1: float
    cum_d: float
    bound2: float
    margin2: float
    sup: float
    pointwise_margin: float
    passed: bool


def monitor_bounds(monitor: BoundMonitor, tol: float = 0.05) -> list[MarginRow]:
    """Per-sample margins against the two a priori bounds and the pointwise
    vector bound sup|u| <= (2 pi)^(-1/2) (y d)^(1/4).

    A sample passes when both energy margins exceed -tol * bound and the
    pointwise bound holds within the same relative slack.  Samples at or past
    the horizon are an error (the bounds are undefined there).
    """
    rows = []
    for s in monitor.samples:
        if s.t >= monitor.T:
            raise BurgersError(f"sample at t={s.t} is past the horizon T={monitor.T}")
        b1 = gradient_bound(s.t, monitor.y0, monitor.T)
        b2 = dissipation_bound(s.t, monitor.y0, monitor.nu, monitor.T)
        pointwise_cap = (s.y * s.d) ** 0.25 / math.sqrt(2.0 * math.pi)
        m1 = b1 - s.y
        m2 = b2 - s.cum_d
        mp = pointwise_cap - s.sup
        ok = m1 >= -tol * b1 and m2 >= -tol * b2 and (s.sup == 0.0 or mp >= -tol * pointwise_cap)
        rows.append(MarginRow(s.t, s.y, b1, m1, s.cum_d, b2, m2, s.sup, mp, ok))
    return rows


def comparison_ode_oracle(y0: float, nu: float, t: float, n_steps: int | None = None) -> float:
    """RK4 integration of the Young-absorbed inequality y' = 2 C y^3 up to t.

    Must reproduce the closed form y0 / sqrt(1 - t/T); together the pair
    validates the constant chain 1/sqrt(2 pi) -> C -> T.
    """
    if y0 <= 0 or nu <= 0:
        raise BurgersError(f"need positive y0 and nu, got y0={y0}, nu={nu}")
    T = blowup_horizon(y0, nu)
    if t >= T:
        raise BurgersError(f"comparison solution blows up at T={T}; asked for t={t}")
    if t == 0:
        return y0
    if n_steps is None:
        # the solution steepens like (1 - t/T)^(-3/2); refine accordingly
        n_steps = 2000 + int(3000.0 / (1.0 - t / T) ** 1.5)
    c2 = 2.0 * young_constant(nu)
    f = lambda y: c2 * y**3
    h = t / n_steps
    y = y0
    for _ in range(n_steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


# ---------------------------------------------------------------------------
# initial-data fixtures


def eigenmode_state(
    domain: VoxelDomain, nu: float, amplitude: float, pairs=None, weights=None
) -> BurgersState:
    """Initial data from scaled eigenmode combinations, one copy per component.

    weights[c] is the coefficient vector for component c over the supplied
    eigenpairs (default: fundamental mode in every component).
    """
    from . import eigen as _eigen

    if pairs is None:
        pairs = _eigen.compute_eigenpairs(domain, 1)
    if weights is None:
        weights = [[1.0] + [0.0] * (len(pairs) - 1)] * 3
    comps = []
    for wc in weights:
        vals = np.zeros(domain.n_interior)
        for w, p in zip(wc, pairs):
            vals += w * p.phi.values
        comps.append(ScalarField(domain, amplitude * vals))
    return BurgersState(VectorField3(tuple(comps)), 0.0, nu)


def bump_state(domain: VoxelDomain, nu: float, amplitude: float, R: float = 8.0) -> BurgersState:
    """Initial data from an embedded extremal bump, same profile per component."""
    from . import extremal as _extremal

    bump = _extremal.embed_in_domain(_extremal.cutoff_sequence(R), domain)
    comps = tuple(ScalarField(domain, amplitude * bump.values) for _ in range(3))
    return BurgersState(VectorField3(comps), 0.0, nu)


# ---------------------------------------------------------------------------
# checkpointing

STATE_MAGIC = b"SBS1"


def save_state(state: BurgersState, path) -> None:
    """Flat binary checkpoint: header (magic, dims, h, shape, t, nu) then the
    three dense component payloads."""
    import struct

    from .grid import _SHAPE_CODES  # noqa: WPS437 (shared layout constants)

    d = state.u.domain
    with open(path, "wb") as fh:
        fh.write(STATE_MAGIC)
        fh.write(struct.pack("<3IdBdd", *d.dims, d.h, _SHAPE_CODES[d.shape_tag], state.t, state.nu))
        for c in state.u.components:
            fh.write(c.to_dense().astype("<f8").tobytes(order="C"))


def load_state(path, domain: VoxelDomain) -> BurgersState:
    import struct

    header = struct.Struct("<3IdBdd")
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != STATE_MAGIC:
            raise BurgersError("bad checkpoint magic")
        nx, ny, nz, h, _code, t, nu = header.unpack(fh.read(header.size))
        if (nx, ny, nz) != domain.dims or h != domain.h:
            raise BurgersError("checkpoint does not match the supplied domain")
        count = nx * ny * nz
        comps = []
        for _ in range(3):
            payload = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(domain.dims)
            comps.append(ScalarField(domain, domain.pack(payload)))
    return BurgersState(VectorField3(tuple(comps)), t, nu)

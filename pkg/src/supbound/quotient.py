"""The pointwise quotient u(x0)^2 / (||grad u|| ||lap u||) and its maximization
over eigenfunction spans.

Over span{phi_1..phi_m} the quotient reduces to a function of the coefficient
vector c,

    Q(c) = (sum c_n a_n)^2 / sqrt(sum lam_n c_n^2) / sqrt(sum lam_n^2 c_n^2),

with a_n = phi_n(x0).  Stationarity gives c_n ~ a_n / (lam_n (mu + lam_n))
where mu = (sum lam^2 c^2)/(sum lam c^2) solves a scalar self-consistency
equation; at the fixed point the maximum equals the closed form

    q_max = 4 sqrt(mu) sum (a_n / (mu + lam_n))^2 .

A projected-gradient ascent over the coefficient sphere provides an
independent oracle for small spans.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import grid
from .eigen import DEFAULT_SEED, EigenPair
from .green import GreenSolution
from .grid import ScalarField, VectorField3

TWO_PI = 2.0 * math.pi
SHARP_CONSTANT = 1.0 / TWO_PI  # supremum of the quotient over any domain


class QuotientError(ValueError):
    pass


def quotient(u: ScalarField, x0: tuple[int, int, int]) -> float:
    """u(x0)^2 / (||grad u|| ||lap u||); scale invariant, bounded by 1/(2 pi)
    up to discretization."""
    gsq = grid.grad_norm_sq(u)
    lsq = grid.l2_norm_sq(grid.laplacian(u))
    if gsq == 0.0 or lsq == 0.0:
        raise QuotientError("quotient undefined for the zero field")
    return u.value_at(x0) ** 2 / math.sqrt(gsq * lsq)


def vector_quotient(u: VectorField3) -> float:
    """Vector version: sup over nodes of |u|^2 (Euclidean), divided by
    ||grad u|| ||lap u|| with component-summed energies."""
    sup_sq = float(np.max(sum(c.values**2 for c in u.components)))
    gsq = sum(grid.grad_norm_sq(c) for c in u.components)
    lsq = sum(grid.l2_norm_sq(grid.laplacian(c)) for c in u.components)
    if gsq == 0.0 or lsq == 0.0:
        raise QuotientError("quotient undefined for the zero field")
    return sup_sq / math.sqrt(gsq * lsq)


@dataclass(frozen=True)
class QuotientResult:
    mu: float
    coeffs: np.ndarray  # unit Euclidean length
    q_max: float
    point: tuple[int, int, int]
    m: int
    iterations: int


def closed_form_value(lams: np.ndarray, a: np.ndarray, mu: float) -> float:
    """4 sqrt(mu) sum (a_n / (mu + lam_n))^2."""
    return 4.0 * math.sqrt(mu) * float(np.sum((a / (mu + lams)) ** 2))


def span_quotient_value(lams: np.ndarray, a: np.ndarray, c: np.ndarray) -> float:
    num = float(np.dot(c, a)) ** 2
    den = math.sqrt(float(np.sum(lams * c * c)) * float(np.sum(lams**2 * c * c)))
    if den == 0.0:
        raise QuotientError("quotient undefined for the zero coefficient vector")
    return num / den


def span_quotient_gradient(lams: np.ndarray, a: np.ndarray, c: np.ndarray) -> np.ndarray:
    s = float(np.dot(c, a))
    A = float(np.sum(lams * c * c))
    B = float(np.sum(lams**2 * c * c))
    den = math.sqrt(A * B)
    q = s * s / den
    return (2.0 * s / den) * a - q * (lams * c / A + lams**2 * c / B)


def _span_data(pairs: list[EigenPair], x0) -> tuple[np.ndarray, np.ndarray]:
    if not pairs:
        raise QuotientError("need at least one eigenpair")
    d = pairs[0].phi.domain
    idx = d.packed_index(x0)
    lams = np.array([p.lam for p in pairs])
    a = np.array([p.phi.values[idx] for p in pairs])
    return lams, a


def maximize_over_span(
    pairs: list[EigenPair],
    x0: tuple[int, int, int],
    tol: float = 1e-12,
    max_iter: int = 500,
) -> QuotientResult:
    """Maximize the quotient over span{phi_1..phi_m} via the mu fixed point.

    Iterates mu <- (sum a^2/(mu+lam)^2) / (sum a^2/(lam (mu+lam)^2)), damping
    by one half when the iterates oscillate, until the relative update falls
    below tol.
    """
    lams, a = _span_data(pairs, x0)
    return _maximize_spectrum_fixed_point(lams, a, tuple(int(i) for i in x0), tol, max_iter)


def _maximize_spectrum_fixed_point(
    lams: np.ndarray, a: np.ndarray, point, tol: float, max_iter: int
) -> QuotientResult:
    scale = float(np.max(np.abs(a)))
    if scale == 0.0 or not np.isfinite(scale):
        raise QuotientError("all eigenfunctions vanish at x0; quotient is zero on the span")
    active = np.abs(a) > 1e-14 * scale
    la, aa = lams[active], a[active]

    def advance(mu):
        w = aa * aa / (la * (mu + la) ** 2)
        return float(np.sum(w * la) / np.sum(w))

    mu = advance(float(np.sum(aa * aa * la) / np.sum(aa * aa)))
    prev_step = 0.0
    for it in range(1, max_iter + 1):
        nxt = advance(mu)
        step = nxt - mu
        if step * prev_step < 0.0:  # oscillation: damp
            nxt = mu + 0.5 * step
            step = 0.5 * step
        converged = abs(step) <= tol * abs(mu)
        mu, prev_step = nxt, step
        if converged:
            break
    else:
        raise QuotientError(
            f"mu fixed point did not converge in {max_iter} iterations (last mu={mu!r})"
        )

    coeffs = np.zeros_like(a)
    coeffs[active] = aa / (la * (mu + la))
    coeffs /= np.linalg.norm(coeffs)
    q_max = closed_form_value(lams, a, mu)
    return QuotientResult(mu, coeffs, q_max, point, len(lams), it)


def brute_force_maximize(
    pairs: list[EigenPair],
    x0: tuple[int, int, int],
    seed: int = DEFAULT_SEED,
    restarts: int = 64,
) -> QuotientResult:
    """Independent oracle: projected-gradient ascent on the coefficient sphere
    from deterministic random restarts.  Limited to m <= 8."""
    lams, a = _span_data(pairs, x0)
    return maximize_spectrum_bruteforce(lams, a, tuple(int(i) for i in x0), seed, restarts)


def maximize_spectrum_bruteforce(
    lams: np.ndarray,
    a: np.ndarray,
    point=(-1, -1, -1),
    seed: int = DEFAULT_SEED,
    restarts: int = 64,
) -> QuotientResult:
    """Spectrum-level oracle (no grid needed): ascend Q(c) on the unit sphere."""
    m = len(lams)
    if m > 8:
        raise QuotientError(f"brute-force oracle is limited to m <= 8, got m={m}")
    if np.max(np.abs(a)) == 0.0:
        raise QuotientError("all eigenfunctions vanish at x0; quotient is zero on the span")
    rng = np.random.default_rng(seed)
    best_q, best_c, total_it = -np.inf, None, 0
    for _ in range(restarts):
        c = rng.standard_normal(m)
        c /= np.linalg.norm(c)
        if np.dot(c, a) == 0.0:
            c = a / np.linalg.norm(a)
        step = 0.1
        q = span_quotient_value(lams, a, c)
        for it in range(2000):
            total_it += 1
            g = span_quotient_gradient(lams, a, c)
            g -= np.dot(g, c) * c  # project out the radial direction
            gnorm = np.linalg.norm(g)
            if gnorm <= 1e-14 * max(q, 1e-300):
                break
            improved = False
            while step > 1e-16:
                cand = c + step * g / gnorm
                cand /= np.linalg.norm(cand)
                q_cand = span_quotient_value(lams, a, cand)
                if q_cand > q:
                    c, q = cand, q_cand
                    step *= 1.5
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
        if q > best_q:
            best_q, best_c = q, c
    A = float(np.sum(lams * best_c**2))
    B = float(np.sum(lams**2 * best_c**2))
    return QuotientResult(B / A, best_c, best_q, point, m, total_it)


# ---------------------------------------------------------------------------
# the Step-2 inequality chain


@dataclass(frozen=True)
class ChainReport:
    mu: float
    m: int
    q_max: float
    eigen_sum_term: float  # 4 sqrt(mu) * partial Parseval sum
    green_term: float      # 4 sqrt(mu) * ||G||^2
    constant: float        # 1/(2 pi)
    gap1: float
    gap2: float
    gap3: float
    passed: bool

    @property
    def gaps(self) -> tuple[float, float, float]:
        return (self.gap1, self.gap2, self.gap3)


def step2_chain_check(
    pairs: list[EigenPair],
    x0: tuple[int, int, int],
    green: GreenSolution,
    mu: float | None = None,
    tol: float = 1e-6,
) -> ChainReport:
    """Verify q_max <= 4 sqrt(mu) sum_m (a_n/(mu+lam_n))^2 <= 4 sqrt(mu) ||G||^2
    <= 1/(2 pi) term by term, reporting the three gaps.

    mu defaults to the Green solution's; it must be the fixed point of the
    span maximizer at x0 for the first link to be tight.
    """
    if mu is None:
        mu = green.mu
    if abs(green.mu - mu) > 1e-9 * mu:
        raise QuotientError(f"Green solution solved at mu={green.mu}, chain asked for {mu}")
    if tuple(green.source) != tuple(int(i) for i in x0):
        raise QuotientError("Green solution source differs from the chain's x0")
    lams, a = _span_data(pairs, x0)
    result = maximize_over_span(pairs, x0)
    if abs(result.mu - mu) > 1e-6 * mu:
        raise QuotientError(
            f"chain mu={mu} is not the span's fixed point mu={result.mu}; "
            "the first link is tight only there"
        )
    eigen_sum_term = closed_form_value(lams, a, mu)
    green_term = 4.0 * math.sqrt(mu) * green.l2_sq
    gap1 = eigen_sum_term - result.q_max
    gap2 = green_term - eigen_sum_term
    gap3 = SHARP_CONSTANT - green_term
    passed = min(gap1, gap2, gap3) >= -tol
    return ChainReport(
        mu, len(pairs), result.q_max, eigen_sum_term, green_term, SHARP_CONSTANT,
        gap1, gap2, gap3, passed,
    )

"""Exact and Monte Carlo checkers for chain stability conditions.

Everything here works either on explicit finite chains (exact matrix
arithmetic) or on user-supplied density kernels over a grid (empirical
certificates, labeled as such): minorization extraction, domination
constants, local density floors, ball-overlap volume bounds, return-time and
stopped-sum identities, geometric drift verification, and the reversible
two-pass minorization bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (DegenerateRectangle, InvalidParameter, NoSuccess,
                     NotReversible)

_ROW_SUM_TOL = 1e-12
_STATIONARY_TOL = 1e-10
_REVERSIBLE_TOL = 1e-10


@dataclass
class FiniteChain:
    """A finite-state chain: states, row-stochastic matrix, stationary law.

    The stationary vector is computed at construction and validated to
    satisfy pi P = pi; the reversible flag records whether detailed balance
    pi_x P_xy = pi_y P_yx holds entrywise.
    """

    states: list
    P: np.ndarray
    pi: np.ndarray = None
    reversible: bool = None

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        n = self.P.shape[0]
        if self.P.shape != (n, n) or len(self.states) != n:
            raise InvalidParameter("states and matrix sizes disagree")
        if (self.P < 0).any():
            raise InvalidParameter("negative transition probability")
        rows = self.P.sum(axis=1)
        if np.abs(rows - 1.0).max() > _ROW_SUM_TOL:
            raise InvalidParameter("rows must sum to 1")
        if self.pi is None:
            self.pi = stationary_distribution(self.P)
        resid = np.abs(self.pi @ self.P - self.pi).max()
        if resid > _STATIONARY_TOL:
            raise InvalidParameter(f"stationary residual {resid:.3g} too large")
        flux = self.pi[:, None] * self.P
        self.reversible = bool(np.abs(flux - flux.T).max() <= _REVERSIBLE_TOL)

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    def power(self, n: int) -> np.ndarray:
        return np.linalg.matrix_power(self.P, n)

    def index_of(self, state) -> int:
        return self.states.index(state)


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1 by replacing one balance equation."""
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return np.linalg.solve(A, b)


def sample_paths(chain: FiniteChain, start: np.ndarray, n_steps: int,
                 rng: np.random.Generator) -> np.ndarray:
    """Vectorized paths: (replicas, n_steps+1) state indices."""
    cum = np.cumsum(chain.P, axis=1)
    out = np.empty((start.size, n_steps + 1), dtype=np.int64)
    out[:, 0] = start
    cur = start.copy()
    for t in range(n_steps):
        u = rng.random(cur.size)
        rows = cum[cur]
        cur = (u[:, None] < rows).argmax(axis=1)
        out[:, t + 1] = cur
    return out


# ---------------------------------------------------------------------------
# minorization


@dataclass(frozen=True)
class MinorizationCertificate:
    """P^n0(x, .) >= epsilon * nu(.) for every x in C, with maximal epsilon."""

    C: tuple
    n0: int
    epsilon: float
    nu: np.ndarray


def extract_minorization(chain: FiniteChain, C, n0: int
                         ) -> Optional[MinorizationCertificate]:
    """Columnwise-minimum certificate over C, or None when the overlap is 0.

    nu(y) is proportional to min_{x in C} P^n0(x, y); epsilon is the total
    overlap mass, which is the largest constant valid for this nu.
    """
    C = tuple(C)
    if not C:
        raise InvalidParameter("C must be nonempty")
    if n0 < 1:
        raise InvalidParameter("n0 must be >= 1")
    Pn = chain.power(n0)
    mins = Pn[list(C), :].min(axis=0)
    eps = float(mins.sum())
    if eps == 0.0:
        return None
    return MinorizationCertificate(C=C, n0=n0, epsilon=eps, nu=mins / eps)


# ---------------------------------------------------------------------------
# domination (transition rows bounded by a multiple of one reference measure)


@dataclass(frozen=True)
class DominationReport:
    M: float
    mu: np.ndarray               # reference probabilities on the outer set
    outer: tuple
    vacuous: bool                # no inner row reaches the outer set
    method: str                  # "exact" or "empirical"


def domination_check(chain: FiniteChain, inner, outer) -> DominationReport:
    """Minimal M with P(x, z) <= M mu(z) on inner x outer, finite-chain case.

    mu is the normalized columnwise maximum over the inner rows restricted
    to the outer set, which makes M = total max mass the smallest possible
    constant.  When no inner row touches the outer set the bound holds
    vacuously with M = 0 (reported, not raised).
    """
    inner, outer = list(inner), list(outer)
    if not inner or not outer:
        raise InvalidParameter("inner and outer sets must be nonempty")
    block = chain.P[np.ix_(inner, outer)]
    col_max = block.max(axis=0)
    M = float(col_max.sum())
    if M == 0.0:
        return DominationReport(M=0.0, mu=np.zeros(len(outer)),
                                outer=tuple(outer), vacuous=True, method="exact")
    return DominationReport(M=M, mu=col_max / M, outer=tuple(outer),
                            vacuous=False, method="exact")


def domination_check_density(density: Callable, inner_pts, outer_interval,
                             n_grid: int = 512) -> DominationReport:
    """Grid version against the uniform reference on a bounded outer interval.

    M = sup over the grid of density(x, z) * |outer|; an empirical
    certificate, flagged as such.
    """
    lo, hi = outer_interval
    if not hi > lo:
        raise DegenerateRectangle("outer interval must have positive length")
    zs = np.linspace(lo, hi, n_grid)
    sup = 0.0
    for x in inner_pts:
        vals = np.asarray([density(x, z) for z in zs], dtype=float)
        sup = max(sup, float(vals.max()))
    length = hi - lo
    M = sup * length
    mu = np.full(n_grid, 1.0 / n_grid)
    return DominationReport(M=M, mu=mu, outer=(lo, hi),
                            vacuous=(M == 0.0), method="empirical")


# ---------------------------------------------------------------------------
# local density floor on a rectangle


@dataclass(frozen=True)
class DensityFloorReport:
    epsilon: float
    argmin: tuple                # (x, y) grid pair achieving the minimum
    delta: float
    method: str = "empirical"


def density_floor_check(density: Callable, rectangle, delta: float,
                        n_grid: int = 256) -> DensityFloorReport:
    """Largest epsilon with density(x, y) >= epsilon when |y - x| < delta.

    Minimizes over a grid of pairs inside the rectangle; the certificate is
    empirical (grid resolution limits it), and the minimizing pair is
    reported so a failure can be inspected.
    """
    lo, hi = rectangle
    if not (hi > lo) or delta <= 0:
        raise DegenerateRectangle("need a nondegenerate rectangle and delta > 0")
    xs = np.linspace(lo, hi, n_grid)
    best = math.inf
    arg = (xs[0], xs[0])
    for x in xs:
        near = xs[np.abs(xs - x) < delta]
        vals = np.asarray([density(x, y) for y in near], dtype=float)
        k = int(vals.argmin())
        if vals[k] < best:
            best = float(vals[k])
            arg = (float(x), float(near[k]))
    return DensityFloorReport(epsilon=best, argmin=arg, delta=delta)


# ---------------------------------------------------------------------------
# ball overlap volume bound


_UNIT_CENTER_GAP = 1.5           # distance between the two reference unit balls


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def reference_overlap_volume(d: int, mc: int = 0, rng=None):
    """Volume v_d of the overlap of two unit balls whose centers sit 3/2 apart.

    Closed form in dimensions 1 and 2; Monte Carlo (with its standard error)
    otherwise.
    """
    if d == 1:
        return 0.5, 0.0
    if d == 2:
        w = _UNIT_CENTER_GAP
        area = 2.0 * math.acos(w / 2.0) - (w / 2.0) * math.sqrt(4.0 - w * w)
        return area, 0.0
    if mc <= 0 or rng is None:
        raise InvalidParameter("dimension > 2 needs a Monte Carlo budget and rng")
    return _mc_overlap(1.0, 1.0, _UNIT_CENTER_GAP, d, mc, rng)


def _mc_overlap(r: float, R: float, w: float, d: int, mc: int,
                rng: np.random.Generator):
    """Rejection-sample the r-ball from its bounding box, then test the R-ball."""
    inside = 0
    hits = 0
    remaining = mc
    center2 = np.zeros(d)
    center2[0] = w
    while inside < mc:
        batch = min(4 * remaining + 64, 10 ** 7)
        pts = rng.uniform(-r, r, size=(batch, d))
        in_ball = np.einsum("ij,ij->i", pts, pts) <= r * r
        pts = pts[in_ball]
        take = pts[:min(len(pts), mc - inside)]
        if take.size:
            diff = take - center2
            hits += int((np.einsum("ij,ij->i", diff, diff) <= R * R).sum())
            inside += len(take)
    vol_r = unit_ball_volume(d) * r ** d
    p = hits / mc
    est = vol_r * p
    se = vol_r * math.sqrt(p * (1.0 - p) / mc)
    return est, se


@dataclass(frozen=True)
class BallOverlapReport:
    overlap: float
    overlap_stderr: float
    reference_volume: float      # v_d
    reference_stderr: float
    bound: float                 # r^d * v_d
    bound_holds: bool
    in_hypothesis: bool
    tolerance: float


def ball_overlap_bound(r: float, R: float, w: float, d: int, mc: int,
                       rng: np.random.Generator,
                       tolerance: float = None) -> BallOverlapReport:
    """Estimate Leb(A intersect B) for balls of radii r <= R at distance w
    and compare it against the scaling bound r^d * v_d.

    The hypothesis w <= 3r/2 + (R - r) is flagged, not enforced; the check
    still runs outside it.  ``bound_holds`` is the one-sided statistical
    test estimate - 4*stderr >= bound - tolerance, with the default
    tolerance 8 combined stderr so a bound that is exactly tight still
    passes at Monte Carlo resolution.
    """
    if not (0 < r <= R) or d < 1:
        raise InvalidParameter("need 0 < r <= R and d >= 1")
    in_hyp = w <= 1.5 * r + (R - r) + 1e-12
    vd, vd_se = reference_overlap_volume(d, mc=mc, rng=rng)
    est, se = _mc_overlap(r, R, w, d, mc, rng)
    bound = (r ** d) * vd
    combined = se + (r ** d) * vd_se
    if tolerance is None:
        tolerance = 8.0 * combined + 1e-12
    holds = est - 4.0 * combined >= bound - tolerance
    return BallOverlapReport(overlap=est, overlap_stderr=se,
                             reference_volume=vd, reference_stderr=vd_se,
                             bound=bound, bound_holds=bool(holds),
                             in_hypothesis=bool(in_hyp), tolerance=tolerance)


# ---------------------------------------------------------------------------
# return-time identity (expected k-th return to A from pi restricted to A)


@dataclass(frozen=True)
class ReturnTimeReport:
    empirical: float
    expected: float              # k / pi(A)
    stderr: float
    discrepancy_sigma: float


def kac_return_time_check(chain: FiniteChain, A, k: int, replicas: int,
                          rng: np.random.Generator) -> ReturnTimeReport:
    """Average k-th return time to A from pi|A against k / pi(A)."""
    A = np.asarray(sorted(A), dtype=np.int64)
    piA = float(chain.pi[A].sum())
    if piA <= 0:
        raise InvalidParameter("A must have positive stationary mass")
    weights = chain.pi[A] / piA
    start = A[rng.choice(A.size, size=replicas, p=weights)]
    in_A = np.zeros(chain.n_states, dtype=bool)
    in_A[A] = True

    cum = np.cumsum(chain.P, axis=1)
    cur = start.copy()
    visits = np.zeros(replicas, dtype=np.int64)
    taus = np.zeros(replicas, dtype=np.int64)
    active = np.ones(replicas, dtype=bool)
    t = 0
    cap = int(5e7 // max(replicas, 1)) + 100 * int(k / piA + 1)
    while active.any():
        t += 1
        if t > cap:
            raise RuntimeError("return-time simulation exceeded its safety cap")
        live = np.where(active)[0]
        u = rng.random(live.size)
        rows = cum[cur[live]]
        nxt = (u[:, None] < rows).argmax(axis=1)
        cur[live] = nxt
        arrived = live[in_A[nxt]]
        visits[arrived] += 1
        done = arrived[visits[arrived] >= k]
        taus[done] = t
        active[done] = False
    emp = float(taus.mean())
    se = float(taus.std(ddof=1) / math.sqrt(replicas))
    expected = k / piA
    disc = abs(emp - expected) / se if se > 0 else math.inf * (emp != expected)
    return ReturnTimeReport(empirical=emp, expected=expected, stderr=se,
                            discrepancy_sigma=float(disc))


# ---------------------------------------------------------------------------
# stopped-sum identity (mean of sum W_i up to the first success equals m/p)


@dataclass(frozen=True)
class StoppedSumReport:
    empirical: float
    plugin: float                # m_hat / p_hat from an independent sample
    stderr: float                # combined
    discrepancy_sigma: float


def wald_identity_check(pair_sampler: Callable, replicas: int,
                        rng: np.random.Generator,
                        max_rounds: int = 100_000) -> StoppedSumReport:
    """Check E(sum_{i<=tau} W_i) = E(W) / P(I=1) for i.i.d. pairs (W, I).

    ``pair_sampler(size, rng)`` returns a batch of weights and indicators;
    pairs may be dependent within themselves, never across draws.  The
    plugin m/p is estimated from an independent batch so the two sides of
    the comparison carry independent noise.
    """
    S = np.zeros(replicas)
    active = np.ones(replicas, dtype=bool)
    rounds = 0
    while active.any():
        rounds += 1
        if rounds > max_rounds:
            raise NoSuccess("some replica never drew a success indicator")
        n_live = int(active.sum())
        w, ind = pair_sampler(n_live, rng)
        w = np.asarray(w, dtype=float)
        ind = np.asarray(ind)
        S[active] += w
        still = active.copy()
        still[active] = ind == 0
        active = still

    w2, i2 = pair_sampler(replicas, rng)
    w2 = np.asarray(w2, dtype=float)
    i2 = np.asarray(i2, dtype=float)
    m_hat = float(w2.mean())
    p_hat = float(i2.mean())
    if p_hat <= 0:
        raise NoSuccess("plugin sample saw no successes")
    plugin = m_hat / p_hat
    emp = float(S.mean())
    se_emp = float(S.std(ddof=1) / math.sqrt(replicas))
    # delta method for m_hat / p_hat including the within-pair covariance
    var_w = float(w2.var(ddof=1))
    var_p = float(i2.var(ddof=1))
    cov = float(np.cov(w2, i2, ddof=1)[0, 1])
    var_plugin = (var_w / p_hat ** 2
                  + (m_hat ** 2 / p_hat ** 4) * var_p
                  - 2.0 * (m_hat / p_hat ** 3) * cov) / replicas
    se = math.sqrt(se_emp ** 2 + max(var_plugin, 0.0))
    disc = abs(emp - plugin) / se if se > 0 else math.inf * (emp != plugin)
    return StoppedSumReport(empirical=emp, plugin=plugin, stderr=se,
                            discrepancy_sigma=float(disc))


# ---------------------------------------------------------------------------
# geometric drift


@dataclass(frozen=True)
class DriftReport:
    lam: float
    b: float
    C: tuple
    holds: bool
    violations: list             # (state index, PV, allowed, margin)
    max_margin: float            # most positive violation margin
    method: str


def geometric_drift_check(chain: FiniteChain, V: np.ndarray, C,
                          lam: float, b: float) -> DriftReport:
    """Exact check of PV(x) <= lam V(x) + b 1_C(x) on a finite chain."""
    if not (0.0 <= lam < 1.0) or b < 0:
        raise InvalidParameter("need 0 <= lam < 1 and b >= 0")
    V = np.asarray(V, dtype=float)
    if (V < 1.0 - 1e-12).any():
        raise InvalidParameter("drift function must be >= 1")
    C = set(C)
    PV = chain.P @ V
    allowed = lam * V + b * np.asarray([i in C for i in range(chain.n_states)])
    margins = PV - allowed
    tol = 1e-12 * max(1.0, float(np.abs(allowed).max()))
    bad = [(int(i), float(PV[i]), float(allowed[i]), float(margins[i]))
           for i in np.where(margins > tol)[0]]
    return DriftReport(lam=lam, b=b, C=tuple(sorted(C)), holds=not bad,
                       violations=bad, max_margin=float(margins.max()),
                       method="exact")


def geometric_drift_check_sampled(sample_step: Callable, V: Callable,
                                  in_C: Callable, lam: float, b: float,
                                  eval_points, replicas: int,
                                  rng: np.random.Generator) -> DriftReport:
    """Monte Carlo drift check for a sampled kernel on chosen points.

    A point counts as a violation only when the estimate exceeds the bound
    by more than 4 standard errors.
    """
    if not (0.0 <= lam < 1.0) or b < 0:
        raise InvalidParameter("need 0 <= lam < 1 and b >= 0")
    bad = []
    worst = -math.inf
    for i, x in enumerate(eval_points):
        vals = np.asarray([V(sample_step(x, rng)) for _ in range(replicas)])
        pv = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(replicas))
        allowed = lam * V(x) + (b if in_C(x) else 0.0)
        margin = pv - allowed
        worst = max(worst, margin)
        if margin > 4.0 * se:
            bad.append((i, pv, allowed, margin))
    return DriftReport(lam=lam, b=b, C=(), holds=not bad, violations=bad,
                       max_margin=worst, method="empirical")


# ---------------------------------------------------------------------------
# reversible two-pass minorization bound


@dataclass(frozen=True)
class PiMinorizationReport:
    holds: bool
    worst_margin: float          # min over x in C, y in C of lhs - rhs
    beta: float
    n0: int


def reversible_pi_minorization_check(chain: FiniteChain,
                                     cert: MinorizationCertificate
                                     ) -> PiMinorizationReport:
    """For reversible chains: P^{2 n0}(x, {y}) >= (beta^2/4) pi({y} in C).

    Verified pointwise on singletons, which implies the inequality for all
    sets because both sides are additive over y.
    """
    if not chain.reversible:
        raise NotReversible("the two-pass minorization bound needs reversibility")
    beta = cert.epsilon
    P2 = chain.power(2 * cert.n0)
    C = list(cert.C)
    lhs = P2[np.ix_(C, C)]
    rhs = 0.25 * beta * beta * chain.pi[C][None, :]
    margins = lhs - rhs
    worst = float(margins.min())
    return PiMinorizationReport(holds=bool(worst >= -1e-12),
                                worst_margin=worst, beta=beta, n0=cert.n0)


# ---------------------------------------------------------------------------
# fixture helpers


def random_birth_death_chain(n_states: int, rng: np.random.Generator,
                             labels=None) -> FiniteChain:
    """Random birth-death chain with holding mass; reversible by construction."""
    if n_states < 2:
        raise InvalidParameter("need at least two states")
    up = np.zeros(n_states)
    down = np.zeros(n_states)
    up[:-1] = rng.uniform(0.05, 0.45, size=n_states - 1)
    down[1:] = rng.uniform(0.05, 0.45, size=n_states - 1)
    P = np.zeros((n_states, n_states))
    for i in range(n_states):
        if i + 1 < n_states:
            P[i, i + 1] = up[i]
        if i - 1 >= 0:
            P[i, i - 1] = down[i]
        P[i, i] = 1.0 - up[i] - down[i]
    states = labels if labels is not None else list(range(n_states))
    return FiniteChain(states=states, P=P)

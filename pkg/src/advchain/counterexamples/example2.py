"""Loop-excursion counterexample with continuous transition probabilities.

The state space hangs countably many excursion loops off the origin: loop k
climbs a ladder of k probabilistic rungs, then rides a deterministic ramp up
to height beta_k on the y-axis and walks back down.  Expected excursion
lengths r_k grow like k^k, and two ways of launching excursions from the
origin -- kernel weights a_k against adversary weights b_k -- make the mean
return time finite for the kernel but infinite for the adversary, so the
adversarial process is null recurrent and escapes in probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..chain import AdversarialPolicy, KernelContract
from ..errors import InvalidParameter, InvalidState

JUMP_BOUND = math.sqrt(2.0)

# state kinds for the packed integer representation
ORIGIN, XAXIS, LADDER, RAMP, YAXIS = range(5)

_KIND_NAMES = {ORIGIN: "origin", XAXIS: "xaxis", LADDER: "ladder",
               RAMP: "ramp", YAXIS: "yaxis"}


@dataclass(frozen=True)
class State:
    """One state, identified by kind plus integer indices (never raw floats).

    Ramp states are indexed by arc position p = 1..beta_k along the segment
    from (k, 1) to (0, beta_k), keeping state identity exact.
    """

    kind: int
    k: int = 0
    idx: int = 0

    def embed(self, betas) -> tuple:
        if self.kind == ORIGIN:
            return (0.0, 0.0)
        if self.kind == XAXIS:
            return (float(self.idx), 0.0)
        if self.kind == LADDER:
            return (float(self.idx), self.idx / self.k)
        if self.kind == RAMP:
            beta = betas[self.k - 1]
            t = self.idx / (beta + 1.0)
            return (self.k * (1.0 - t), 1.0 + (beta - 1.0) * t)
        return (0.0, float(self.idx))

    def __repr__(self):
        return f"State({_KIND_NAMES[self.kind]}, k={self.k}, idx={self.idx})"


O = State(ORIGIN)


class Ex2Point:
    """State plus its embedding, shaped like the core Point protocol."""

    __slots__ = ("state", "coords")

    def __init__(self, state: State, spec: "Example2Spec"):
        self.state = state
        self.coords = state.embed(spec.betas)

    def __repr__(self):
        return f"Ex2Point({self.state!r})"

    def __eq__(self, other):
        return isinstance(other, Ex2Point) and self.state == other.state

    def __hash__(self):
        return hash(self.state)


def expected_return_time(k: int, beta_k: int) -> float:
    """Exact mean number of steps back to the origin from the first rung.

    r_k = (k + 2*beta_k) * prod_{i<=k}(i/k)
        + sum_{j<k} (2j-1) * prod_{i<j}(i/k) * (1 - j/k),
    evaluated with compensated summation; the factorial-over-power products
    are formed in log space so large k cannot overflow intermediates.
    """
    if k < 1:
        raise InvalidParameter(f"rung count k must be >= 1, got {k}")
    if beta_k < k + 1:
        raise InvalidParameter(
            f"ramp height must exceed the rung count: beta={beta_k}, k={k}")
    logk = math.log(k)
    # prod_{i=1}^{k} i/k = k! / k^k
    log_full = math.lgamma(k + 1) - k * logk
    terms = [(k + 2.0 * beta_k) * math.exp(log_full)]
    for j in range(1, k):
        # prod_{i=1}^{j-1} i/k = (j-1)! / k^(j-1)
        log_partial = math.lgamma(j) - (j - 1) * logk
        terms.append((2 * j - 1) * math.exp(log_partial) * (1.0 - j / k))
    return math.fsum(terms)


def minimal_ramp_height(k: int, floor: int) -> int:
    """Smallest integer beta > floor with expected_return_time(k, beta) >= k^k.

    The map beta -> r_k(beta) is affine increasing, so bracket then bisect.
    """
    log_target = k * math.log(k)

    def big_enough(beta):
        r = expected_return_time(k, beta)
        return r > 0 and math.log(r) >= log_target - 1e-12

    lo = max(floor, k) + 1          # smallest admissible candidate
    if big_enough(lo):
        return lo
    hi = lo
    while not big_enough(hi):
        hi = 2 * hi + 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if big_enough(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class Example2Spec:
    """Loop heights plus the kernel/adversary launch weights.

    ``kernel_weights`` (proportional to (2k)^-k) make sum a_k r_k converge;
    ``adversary_weights`` (proportional to (k/2)^-k) make sum b_k r_k blow
    up.  Partial sums of both series are recorded as the convergence /
    divergence witness.
    """

    k_max: int
    betas: tuple
    return_times: tuple
    kernel_weights: np.ndarray
    adversary_weights: np.ndarray
    kernel_partial_sums: np.ndarray      # partial sums of a_k r_k
    adversary_partial_sums: np.ndarray   # partial sums of b_k r_k

    def __post_init__(self):
        if len(self.betas) != self.k_max or any(
                b <= k for k, b in enumerate(self.betas, start=1)):
            raise InvalidParameter("need beta_k > k for every loop")
        if any(b2 <= b1 for b1, b2 in zip(self.betas, self.betas[1:])):
            raise InvalidParameter("ramp heights must be strictly increasing")
        for name, w in (("kernel", self.kernel_weights),
                        ("adversary", self.adversary_weights)):
            if abs(float(w.sum()) - 1.0) > 1e-12:
                raise InvalidParameter(f"{name} weights must sum to 1")
            if (w < 0).any():
                raise InvalidParameter(f"{name} weights must be nonnegative")


def _normalized(log_raw: np.ndarray) -> np.ndarray:
    shifted = np.exp(log_raw - log_raw.max())
    return shifted / shifted.sum()


def build_spec(k_max: int) -> Example2Spec:
    """Construct the loops: minimal ramp heights with r_k >= k^k, then weights."""
    if k_max < 2:
        raise InvalidParameter("need at least two loops")
    betas = []
    rs = []
    prev = 1
    for k in range(1, k_max + 1):
        beta = minimal_ramp_height(k, max(k, prev))
        betas.append(beta)
        rs.append(expected_return_time(k, beta))
        prev = beta
    ks = np.arange(1, k_max + 1, dtype=float)
    a = _normalized(-ks * np.log(2.0 * ks))
    b = _normalized(-ks * np.log(ks / 2.0))
    r = np.asarray(rs)
    return Example2Spec(k_max=k_max, betas=tuple(betas), return_times=tuple(rs),
                        kernel_weights=a, adversary_weights=b,
                        kernel_partial_sums=np.cumsum(a * r),
                        adversary_partial_sums=np.cumsum(b * r))


def transition_probs(state: State, spec: Example2Spec,
                     adversary: bool = False) -> dict:
    """The transition row at ``state`` as a dict State -> probability.

    From the origin, launch weights are the kernel's a_k or, when
    ``adversary`` is set, the adversary's b_k; everywhere else the two
    processes agree.
    """
    if state.kind == ORIGIN:
        weights = spec.adversary_weights if adversary else spec.kernel_weights
        return {State(LADDER, k=k, idx=1): float(weights[k - 1])
                for k in range(1, spec.k_max + 1)}
    if state.kind == XAXIS:
        if state.idx < 1:
            raise InvalidState(f"bad x-axis index {state.idx}")
        nxt = O if state.idx == 1 else State(XAXIS, idx=state.idx - 1)
        return {nxt: 1.0}
    if state.kind == LADDER:
        k, i = state.k, state.idx
        if not (1 <= k <= spec.k_max and 1 <= i <= k):
            raise InvalidState(f"bad ladder state {state}")
        if i < k:
            drop = O if i == 1 else State(XAXIS, idx=i - 1)
            return {State(LADDER, k=k, idx=i + 1): i / k, drop: 1.0 - i / k}
        return {State(RAMP, k=k, idx=1): 1.0}
    if state.kind == RAMP:
        k, p = state.k, state.idx
        beta = spec.betas[k - 1]
        if not (1 <= k <= spec.k_max and 1 <= p <= beta):
            raise InvalidState(f"bad ramp state {state}")
        if p < beta:
            return {State(RAMP, k=k, idx=p + 1): 1.0}
        return {State(YAXIS, idx=beta): 1.0}
    if state.kind == YAXIS:
        if state.idx < 1:
            raise InvalidState(f"bad y-axis index {state.idx}")
        nxt = O if state.idx == 1 else State(YAXIS, idx=state.idx - 1)
        return {nxt: 1.0}
    raise InvalidState(f"unknown state kind {state.kind}")


def _sample_row(row: dict, rng) -> State:
    u = rng.random()
    acc = 0.0
    last = None
    for nxt, prob in row.items():
        acc += prob
        last = nxt
        if u < acc:
            return nxt
    return last


def kernel(spec: Example2Spec) -> KernelContract:
    """Kernel over Ex2Point states (launches use the kernel weights)."""

    def sample_step(x, rng):
        return Ex2Point(_sample_row(transition_probs(x.state, spec), rng), spec)

    def density(x, y):
        return transition_probs(x.state, spec).get(y.state, 0.0)

    return KernelContract(sample_step=sample_step, density=density,
                          jump_bound=JUMP_BOUND)


def policy(spec: Example2Spec) -> AdversarialPolicy:
    """Origin policy launching loops with the adversary weights."""

    def next_state(history, n, rng):
        row = transition_probs(O, spec, adversary=True)
        return Ex2Point(_sample_row(row, rng), spec)

    return AdversarialPolicy(next_state=next_state, jump_bound=JUMP_BOUND)


@dataclass
class Ex2Run:
    times: np.ndarray
    distances: np.ndarray        # (replicas, len(times)) distance from origin
    seed: int
    n_steps: int
    adversary: bool


def _vector_distances(kind, kk, idx, betas_arr):
    dist = np.zeros(kind.shape, dtype=float)
    m = (kind == XAXIS) | (kind == YAXIS)
    dist[m] = idx[m]
    m = kind == LADDER
    dist[m] = np.hypot(idx[m].astype(float), idx[m] / kk[m])
    m = kind == RAMP
    if m.any():
        beta = betas_arr[kk[m] - 1].astype(float)
        t = idx[m] / (beta + 1.0)
        dist[m] = np.hypot(kk[m] * (1.0 - t), 1.0 + (beta - 1.0) * t)
    return dist


def _vector_step(kind, kk, idx, cum_launch, betas_arr, rng):
    """Advance the ensemble arrays one step in place.

    Masks are frozen up front so a state relabeled this step does not move
    twice.
    """
    at_origin = np.where(kind == ORIGIN)[0]
    on_ladder = np.where(kind == LADDER)[0]
    on_ramp = np.where(kind == RAMP)[0]
    walking = np.where((kind == XAXIS) | (kind == YAXIS))[0]

    if at_origin.size:
        u = rng.random(at_origin.size)
        launched = np.searchsorted(cum_launch, u, side="right") + 1
        kind[at_origin] = LADDER
        kk[at_origin] = launched
        idx[at_origin] = 1

    if on_ladder.size:
        i = idx[on_ladder]
        k = kk[on_ladder]
        u = rng.random(on_ladder.size)
        below_top = i < k
        climb = below_top & (u < i / k)
        drop = below_top & ~climb
        top = ~below_top
        idx[on_ladder[climb]] += 1
        d_idx = on_ladder[drop]
        drop_to = i[drop] - 1
        kind[d_idx] = np.where(drop_to == 0, ORIGIN, XAXIS)
        kk[d_idx] = 0
        idx[d_idx] = drop_to
        t_idx = on_ladder[top]
        kind[t_idx] = RAMP
        idx[t_idx] = 1

    if on_ramp.size:
        beta = betas_arr[kk[on_ramp] - 1]
        done = idx[on_ramp] >= beta
        idx[on_ramp[~done]] += 1
        d_idx = on_ramp[done]
        kind[d_idx] = YAXIS
        idx[d_idx] = beta[done]
        kk[d_idx] = 0

    if walking.size:
        at_one = idx[walking] == 1
        o_idx = walking[at_one]
        kind[o_idx] = ORIGIN
        idx[o_idx] = 0
        idx[walking[~at_one]] -= 1


def run_ensemble(spec: Example2Spec, n_steps: int, n_replicas: int, seed: int,
                 adversary: bool = True, thin: int = 100) -> Ex2Run:
    """Lockstep ensemble from the origin, recording thinned distances."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    weights = spec.adversary_weights if adversary else spec.kernel_weights
    cum = np.cumsum(weights)
    betas_arr = np.asarray(spec.betas, dtype=np.int64)

    kind = np.full(n_replicas, ORIGIN, dtype=np.int64)
    kk = np.zeros(n_replicas, dtype=np.int64)
    idx = np.zeros(n_replicas, dtype=np.int64)

    times = np.arange(0, n_steps + 1, max(thin, 1))
    dist = np.empty((n_replicas, times.size))
    dist[:, 0] = 0.0
    t_idx = 1
    for n in range(n_steps):
        _vector_step(kind, kk, idx, cum, betas_arr, rng)
        if t_idx < times.size and n + 1 == times[t_idx]:
            dist[:, t_idx] = _vector_distances(kind, kk, idx, betas_arr)
            t_idx += 1
    return Ex2Run(times=times, distances=dist, seed=seed,
                  n_steps=n_steps, adversary=adversary)


def return_time_mc(spec: Example2Spec, k: int, n_replicas: int,
                   seed: int) -> np.ndarray:
    """Monte Carlo return times to the origin from the first rung of loop k.

    The longest possible excursion is k + 2*beta_k steps, so the loop below
    always terminates.
    """
    if not 1 <= k <= spec.k_max:
        raise InvalidParameter(f"loop index {k} outside built range")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    betas_arr = np.asarray(spec.betas, dtype=np.int64)
    cum = np.cumsum(spec.kernel_weights)

    kind = np.full(n_replicas, LADDER, dtype=np.int64)
    kk = np.full(n_replicas, k, dtype=np.int64)
    idx = np.ones(n_replicas, dtype=np.int64)
    taus = np.zeros(n_replicas, dtype=np.int64)
    active = np.ones(n_replicas, dtype=bool)

    cap = k + 2 * spec.betas[k - 1] + 1
    for n in range(1, cap + 1):
        live = np.where(active)[0]
        if not live.size:
            break
        sub_kind = kind[live]
        sub_kk = kk[live]
        sub_idx = idx[live]
        _vector_step(sub_kind, sub_kk, sub_idx, cum, betas_arr, rng)
        kind[live] = sub_kind
        kk[live] = sub_kk
        idx[live] = sub_idx
        hit = live[sub_kind == ORIGIN]
        taus[hit] = n
        active[hit] = False
    if active.any():
        raise RuntimeError("excursion outlived its deterministic cap (bug)")
    return taus

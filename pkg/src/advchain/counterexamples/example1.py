"""Column-climbing counterexample on the state space {(1/i, j)}.

States sit on countably many vertical columns accumulating at the y-axis.
The stationary law puts geometric columns of mean i at x = 1/i, and the
kernel is a +-1 Metropolis move up and down the current column.  The
adversary, acting on the bottom row, throws the chain onto ever-later
columns, where excursions above the axis last longer and longer, so the
second coordinate is not bounded in probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..chain import AdversarialPolicy, Discrete, KernelContract
from ..errors import InvalidState

# Kernel moves have length <= 1; the bottom-row policy jump from (1/i, 0) to
# (1/n, 1) has length sqrt((1/i - 1/n)^2 + 1) < sqrt(2), which is the bound
# the whole process obeys.
KERNEL_JUMP_BOUND = 1.0
PROCESS_JUMP_BOUND = math.sqrt(2.0)


def point(i: int, j: int) -> Discrete:
    if i < 1 or j < 0:
        raise InvalidState(f"column index must be >= 1 and height >= 0, got {(i, j)}")
    return Discrete(label=(i, j), coords=(1.0 / i, float(j)))


ORIGIN = point(1, 0)


def stationary_mass(i: int, j: int) -> float:
    """Target mass of state (1/i, j): 2^-i times a mean-i geometric in j."""
    return 2.0 ** (-i) * (1.0 / i) * (1.0 - 1.0 / i) ** j


def transition_probs(i: int, j: int) -> dict:
    """The kernel row at state (1/i, j) as a dict label -> probability.

    Above the bottom row this is the +-1 Metropolis move along the column;
    on the bottom row it mixes an upward move with left/right moves along
    the row.  Probabilities are nonnegative and sum to one.
    """
    if i < 1 or j < 0:
        raise InvalidState(f"invalid state {(i, j)}")
    up = 0.5 * (1.0 - 1.0 / i)
    if j >= 1:
        down = 0.5
        stay = 1.0 - down - up
        return {(i, j - 1): down, (i, j + 1): up, (i, j): stay}
    left = 0.25 if i > 1 else 0.0
    right = i / (8.0 * (i + 1))
    stay = 1.0 - up - left - right
    # the leftover is defined implicitly; it is provably positive, but we
    # guard it anyway so a construction bug cannot pass silently
    if stay < 0:
        raise InvalidState(f"negative holding probability at column {i}")
    row = {(i, 1): up, (i + 1, 0): right, (i, 0): stay}
    if i > 1:
        row[(i - 1, 0)] = left
    return row


def adversary_target(n: int) -> Discrete:
    """Where the adversary sends the chain from the bottom row at time n.

    The rule is (1/n, 1); the degenerate call n=0 maps to (1, 1) since the
    start state lies in the bottom row and the first move happens at n=0.
    """
    return point(max(n, 1), 1)


def in_bottom_row(p) -> bool:
    return p.label[1] == 0


def _sample_row(row: dict, i: int, j: int, rng) -> Discrete:
    u = rng.random()
    acc = 0.0
    for label, prob in row.items():
        acc += prob
        if u < acc:
            return point(*label)
    return point(i, j)


def kernel() -> KernelContract:
    def sample_step(x, rng):
        i, j = x.label
        return _sample_row(transition_probs(i, j), i, j, rng)

    def density(x, y):
        return transition_probs(*x.label).get(y.label, 0.0)

    return KernelContract(sample_step=sample_step, density=density,
                          jump_bound=KERNEL_JUMP_BOUND)


def policy() -> AdversarialPolicy:
    def next_state(history, n, rng):
        return adversary_target(n)

    return AdversarialPolicy(next_state=next_state,
                             jump_bound=PROCESS_JUMP_BOUND)


def witness_column(level: float) -> int:
    """Smallest column m whose geometric median ceil(-1/log2(1-1/m)) >= level."""
    m = 2
    while math.ceil(-1.0 / math.log2(1.0 - 1.0 / m)) < level:
        m += 1
    return m


@dataclass
class Ex1Run:
    """Vectorized ensemble run: thinned snapshots plus the escape witness."""

    times: np.ndarray            # thinned step indices
    distances: np.ndarray       # (replicas, len(times)) distance from origin
    heights: np.ndarray         # (replicas, len(times)) second coordinate
    reach_time: np.ndarray      # first n with column >= witness column (or -1)
    witness_level: float
    witness_column: int
    witness_hits: np.ndarray    # height >= level at the per-replica horizon
    seed: int
    n_steps: int

    @property
    def witness_prob(self) -> float:
        return float(self.witness_hits.mean())

    @property
    def witness_stderr(self) -> float:
        p = self.witness_prob
        return math.sqrt(p * (1.0 - p) / self.witness_hits.size)


def run_ensemble(n_steps: int, n_replicas: int, seed: int,
                 adversary: bool = True, thin: int = 100,
                 witness_level: float = 10.0) -> Ex1Run:
    """Step all replicas in lockstep with one seeded stream.

    Tracks, per replica, the first time the column index reaches the witness
    column m(L) and whether the height is >= L at ten times that moment
    (capped at the run length).
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    m = witness_column(witness_level)

    col = np.ones(n_replicas, dtype=np.int64)
    ht = np.zeros(n_replicas, dtype=np.int64)
    reach = np.full(n_replicas, -1, dtype=np.int64)
    hits = np.zeros(n_replicas, dtype=bool)
    recorded = np.zeros(n_replicas, dtype=bool)

    times = np.arange(0, n_steps + 1, max(thin, 1))
    dist = np.empty((n_replicas, times.size))
    heights = np.empty((n_replicas, times.size), dtype=np.int64)
    t_idx = 0

    def snapshot(k):
        dist[:, k] = np.hypot(1.0 / col - 1.0, ht)
        heights[:, k] = ht

    snapshot(t_idx)
    t_idx += 1

    for n in range(n_steps):
        bottom = ht == 0
        u = rng.random(n_replicas)
        if adversary:
            moved = bottom
            col = np.where(bottom, max(n, 1), col)
            ht = np.where(bottom, 1, ht)
        else:
            # bottom-row kernel: up / right / left / stay
            up_p = 0.5 * (1.0 - 1.0 / col)
            right_p = col / (8.0 * (col + 1.0))
            left_p = np.where(col > 1, 0.25, 0.0)
            go_up = bottom & (u < up_p)
            go_right = bottom & ~go_up & (u < up_p + right_p)
            go_left = bottom & ~go_up & ~go_right & (u < up_p + right_p + left_p)
            ht = np.where(go_up, 1, ht)
            col = np.where(go_right, col + 1, col)
            col = np.where(go_left, col - 1, col)
            moved = bottom

        interior = ~moved & (ht >= 1)
        down = interior & (u < 0.5)
        up = interior & ~down & (u < 0.5 + 0.5 * (1.0 - 1.0 / col))
        ht = np.where(down, ht - 1, ht)
        ht = np.where(up, ht + 1, ht)

        now = n + 1
        newly = (reach < 0) & (col >= m)
        reach[newly] = now
        due = ~recorded & (reach > 0) & (now == 10 * reach)
        hits[due] = ht[due] >= witness_level
        recorded |= due

        if t_idx < times.size and now == times[t_idx]:
            snapshot(t_idx)
            t_idx += 1

    # horizons past the end of the run fall back to the final state
    hits[~recorded] = ht[~recorded] >= witness_level
    return Ex1Run(times=times, distances=dist, heights=heights,
                  reach_time=reach, witness_level=witness_level,
                  witness_column=m, witness_hits=hits,
                  seed=seed, n_steps=n_steps)

"""Anticipatory counterexample driven by a shared binary digit stream.

The marginal one-step law on [0, inf) is harmless: uniform relocations near
the origin, a uniform jump into [4, 5] from (3, 4], and a drift-down coin
flip above 4.  But the coin flips are rigged: the up/down indicator above 4
compares a binary digit of the current state against a pre-drawn digit
stream, and the landing point of the (3, 4] jump is built from that same
stream.  Once the chain lands there it wins every comparison and marches to
infinity.  The construction matches its marginal transitions state by state
yet is anticipatory, which is exactly the loophole it exploits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..chain import Euclidean, KernelContract
from ..errors import InvalidParameter, PrecisionExhausted

JUMP_BOUND = 2.0
REGION_HIGH = 2.0      # the adversary's set is [0, 2]


def nonterminating_bit(r: float, i: int, depth: int = 64) -> int:
    """Digit of 2**i in the nonterminating binary expansion of r > 0.

    Dyadic fractional parts are rewritten with trailing ones (0.5 becomes
    0.0111...), so the digit sequence never terminates; integer digits are
    read off the plain binary representation and r's integer part is left
    untouched by the rewrite.  Digits beyond ``depth`` positions (in |i|)
    raise PrecisionExhausted: a float carries no information that deep.
    """
    if r <= 0:
        raise InvalidParameter(f"need a positive real, got {r}")
    if abs(i) > depth:
        raise PrecisionExhausted(f"digit 2**{i} beyond declared depth {depth}")
    whole = int(math.floor(r))
    frac = Fraction(r) - whole
    if i >= 0:
        return (whole >> i) & 1
    if frac == 0:
        return 0
    # frac = m / 2**s in lowest terms; its nonterminating digits are those of
    # (m - 1) / 2**s followed by ones forever
    s = frac.denominator.bit_length() - 1
    if -i > s:
        return 1
    reduced = frac - Fraction(1, 2 ** s)
    shifted = reduced * 2 ** (-i)
    return int(shifted) & 1


class BitStream:
    """Lazily generated fair digit stream, reproducible from its seed."""

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = np.random.default_rng(np.random.SeedSequence(seed))
        self._bits = []

    def __getitem__(self, n: int) -> int:
        if n < 0:
            raise IndexError("digit stream is indexed from 0")
        while len(self._bits) <= n:
            self._bits.extend(int(b) for b in self._rng.integers(0, 2, size=256))
        return self._bits[n]


@dataclass
class Example3Spec:
    """The digit stream, the trap point it encodes, and the digit depth.

    ``a_star`` is 4 + sum B_i 2^-i over i = 1..depth, rounded to the nearest
    float; comparisons against the stream use the exact digits, never digits
    re-extracted from the rounded float.
    """

    seed: int
    depth: int = 64
    bits: BitStream = field(init=False)
    a_star: float = field(init=False)

    def __post_init__(self):
        self.bits = BitStream(self.seed)
        num = 0
        for i in range(1, self.depth + 1):
            num = (num << 1) | self.bits[i]
        self.a_star = float(4 + Fraction(num, 2 ** self.depth))
        assert 4.0 <= self.a_star <= 5.0

    def is_trapped(self, x: float) -> bool:
        """Whether x is the trap point plus a whole number of unit steps."""
        return x >= self.a_star and x - math.floor(x) == self.a_star - 4.0


def step(x: float, n: int, spec: Example3Spec, rng) -> float:
    """One move of the adversarial process at time n.

    Marginally this follows the one-step law of the fixed kernel, but the
    above-4 branch is decided by comparing a digit of x with the stream, and
    trapped states win that comparison by construction, so they always move
    up by one.
    """
    if x < 0:
        raise InvalidParameter(f"state space is [0, inf), got {x}")
    if x <= 1.0:
        return 2.0 * rng.random()
    if x <= 3.0:
        return x - 1.0 + 2.0 * rng.random()
    if x <= 4.0:
        return spec.a_star
    if spec.is_trapped(x):
        up = True
    else:
        up = nonterminating_bit(x, -n, spec.depth) == spec.bits[n]
    if up:
        return x + 1.0
    return x - 1.0 - rng.random()


def marginal_kernel() -> KernelContract:
    """The fixed one-step law, with honest coins instead of the rigged ones."""

    def sample_step(p, rng):
        x = p.coords[0]
        if x <= 1.0:
            y = 2.0 * rng.random()
        elif x <= 3.0:
            y = x - 1.0 + 2.0 * rng.random()
        elif x <= 4.0:
            y = 4.0 + rng.random()
        elif rng.random() < 0.5:
            y = x + 1.0
        else:
            y = x - 1.0 - rng.random()
        return Euclidean(coords=(y,))

    return KernelContract(sample_step=sample_step, jump_bound=JUMP_BOUND)


@dataclass
class Ex3Run:
    lock_times: np.ndarray       # first step landing on the trap point (-1 if never)
    all_locked: bool
    increasing_after_lock: bool
    final_states: np.ndarray
    seed: int


def run_replicas(n_replicas: int, max_steps: int, seed: int,
                 stream_seed: int = None) -> Ex3Run:
    """Run replicas from uniform starts in the adversary's set [0, 2].

    Each replica checks, step by step, that once the trap point is reached
    every later move increases the state by exactly one.
    """
    root = np.random.SeedSequence(seed)
    stream_seed = seed if stream_seed is None else stream_seed
    spec = Example3Spec(seed=stream_seed)
    streams = root.spawn(n_replicas)
    lock = np.full(n_replicas, -1, dtype=np.int64)
    finals = np.empty(n_replicas)
    increasing = True
    for r, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        x = 2.0 * rng.random()
        for n in range(max_steps):
            y = step(x, n, spec, rng)
            if lock[r] < 0 and y == spec.a_star:
                lock[r] = n + 1
            elif lock[r] >= 0 and y != x + 1.0:
                increasing = False
            x = y
        finals[r] = x
    return Ex3Run(lock_times=lock, all_locked=bool((lock >= 0).all()),
                  increasing_after_lock=increasing,
                  final_states=finals, seed=seed)

"""Core machinery for adversarial Markov chain simulation.

A process follows a fixed transition kernel outside a designated region and
is steered by an "adversary" policy inside it, subject to a hard bound on
the step length.  This module provides the state types, the kernel/policy
contracts, trajectory simulation with invariant checking, replica ensembles,
and the tightness / hitting-time diagnostics built on top of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AllCensored, EmptyEnsemble, JumpBoundViolation, NonFiniteState

RNG_ALGORITHM = "numpy.random.Generator(PCG64), replica streams via SeedSequence.spawn"


@dataclass(frozen=True)
class Euclidean:
    """A point of R^d."""

    coords: tuple[float, ...]

    def __post_init__(self):
        if not all(math.isfinite(c) for c in self.coords):
            raise NonFiniteState(f"non-finite coordinates {self.coords}")


@dataclass(frozen=True)
class Discrete:
    """A discrete state: an integer label pair plus its fixed embedding in R^2.

    The embedding makes the metric and the origin well defined for discrete
    state spaces, so both point variants can share the same diagnostics.
    """

    label: tuple[int, int]
    coords: tuple[float, ...]


Point = object  # anything exposing a .coords tuple


def distance(p, q) -> float:
    """Euclidean metric on the embedded coordinates."""
    return math.dist(p.coords, q.coords)


@dataclass(frozen=True)
class KernelContract:
    """A one-step transition sampler with a declared jump bound.

    ``sample_step(x, rng)`` draws the next state; ``density(x, y)``, when
    available, evaluates the pointwise transition density or probability.
    Every sampled transition must satisfy ``distance(x, y) <= jump_bound``.
    """

    sample_step: Callable
    jump_bound: float
    density: Optional[Callable] = None


@dataclass(frozen=True)
class AdversarialPolicy:
    """An adapted rule producing the next state whenever the chain is in K.

    ``next_state(history, n, rng)`` may inspect the whole past but not the
    future; the one deliberately anticipatory construction in this package
    (the binary-expansion adversary) is flagged via ``anticipatory=True``.
    ``jump_bound`` bounds the policy's own step length.
    """

    next_state: Callable
    jump_bound: float
    anticipatory: bool = False


@dataclass
class Trajectory:
    points: list

    def __len__(self):
        return len(self.points)

    def coords_array(self) -> np.ndarray:
        return np.asarray([p.coords for p in self.points], dtype=float)

    def distances_from(self, origin) -> np.ndarray:
        oc = np.asarray(origin.coords, dtype=float)
        return np.linalg.norm(self.coords_array() - oc, axis=1)


def simulate_adversarial(kernel: KernelContract,
                         policy: Optional[AdversarialPolicy],
                         in_region: Callable,
                         x0,
                         n_steps: int,
                         rng: np.random.Generator) -> Trajectory:
    """Run one adversarial trajectory of ``n_steps`` transitions.

    Outside the region the kernel drives the chain; inside it the policy does
    (when present).  With ``policy=None`` the kernel is used everywhere.
    Raises JumpBoundViolation if any emitted step exceeds the applicable
    bound, and NonFiniteState on NaN/inf coordinates.
    """
    if policy is not None and not in_region(x0):
        raise ValueError("x0 must lie in the adversary's region when a policy is given")
    if not math.isfinite(kernel.jump_bound):
        raise ValueError("kernel jump bound must be finite")

    bound = kernel.jump_bound
    if policy is not None:
        bound = max(bound, policy.jump_bound)
    slack = bound * 1e-9 + 1e-12

    history = [x0]
    for n in range(n_steps):
        x = history[-1]
        if policy is not None and in_region(x):
            y = policy.next_state(history, n, rng)
        else:
            y = kernel.sample_step(x, rng)
        if not all(math.isfinite(c) for c in y.coords):
            raise NonFiniteState(f"non-finite state at step {n}: {y.coords}")
        step = distance(x, y)
        if step > bound + slack:
            raise JumpBoundViolation(
                f"step {n}: length {step:.6g} exceeds bound {bound:.6g}")
        history.append(y)
    return Trajectory(history)


@dataclass(frozen=True)
class SimulationConfig:
    n_steps: int
    n_replicas: int
    seed: int
    thin: int = 1


@dataclass
class ReplicaEnsemble:
    """Independent seeded trajectories of one process.

    Distances from the origin are recorded at the thinned times; full point
    trajectories are kept only on request (they get large).  Distinct
    replicas use distinct spawned streams, so reruns with the same seed and
    config reproduce bit-identical output.
    """

    distances: np.ndarray          # (n_replicas, n_times)
    times: np.ndarray              # thinned step indices, 0-based states
    seeds: list
    config: SimulationConfig
    trajectories: Optional[list] = field(default=None, repr=False)

    @classmethod
    def run(cls, kernel, policy, in_region, x0, origin,
            config: SimulationConfig, keep_points: bool = False):
        streams = np.random.SeedSequence(config.seed).spawn(config.n_replicas)
        times = np.arange(0, config.n_steps + 1, config.thin)
        dist = np.empty((config.n_replicas, times.size))
        kept = [] if keep_points else None
        for r, ss in enumerate(streams):
            rng = np.random.default_rng(ss)
            traj = simulate_adversarial(kernel, policy, in_region, x0,
                                        config.n_steps, rng)
            dist[r] = traj.distances_from(origin)[times]
            if keep_points:
                kept.append(traj)
        return cls(distances=dist, times=times,
                   seeds=[s.entropy for s in streams],
                   config=config, trajectories=kept)


@dataclass(frozen=True)
class TailCurve:
    levels: np.ndarray
    sup_prob: np.ndarray
    stderr: np.ndarray
    argmax_time: np.ndarray


def tail_curve(ensemble, levels) -> TailCurve:
    """Per level L, the supremum over observed times of P-hat(dist > L).

    Also reports a binomial standard error at the achieving time.  The curve
    is nonincreasing in L by construction.  Accepts a ReplicaEnsemble or a
    raw (replicas x times) distance matrix.
    """
    dist = ensemble.distances if hasattr(ensemble, "distances") else np.asarray(ensemble, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if dist.ndim != 2 or dist.size == 0:
        raise EmptyEnsemble("need a nonempty (replicas x times) distance matrix")
    if levels.size == 0:
        raise EmptyEnsemble("need a nonempty level grid")
    n_rep = dist.shape[0]
    sup = np.empty(levels.size)
    se = np.empty(levels.size)
    arg = np.empty(levels.size, dtype=int)
    for j, level in enumerate(levels):
        probs = np.mean(dist > level, axis=0)
        k = int(np.argmax(probs))
        p = probs[k]
        sup[j] = p
        se[j] = math.sqrt(p * (1.0 - p) / n_rep)
        arg[j] = k
    return TailCurve(levels=levels, sup_prob=sup, stderr=se, argmax_time=arg)


@dataclass(frozen=True)
class HittingTimes:
    times: np.ndarray              # capped hitting times, one per replica
    censored: np.ndarray           # True where the cap was hit first
    estimate: float                # mean over uncensored replicas
    stderr: float
    censored_fraction: float


def hitting_time_samples(kernel: KernelContract,
                         start_sampler: Callable,
                         target: Callable,
                         cap: int,
                         replicas: int,
                         rng: np.random.Generator) -> HittingTimes:
    """Monte Carlo of tau = inf{n >= 1 : X_n in target} under the kernel.

    Replicas hitting the cap are reported as censored, never averaged in.
    Raises AllCensored when no replica hits the target (the expected hitting
    time is then presumed infinite, or the cap too small).
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    times = np.empty(replicas, dtype=np.int64)
    censored = np.zeros(replicas, dtype=bool)
    for r in range(replicas):
        x = start_sampler(rng)
        tau = cap
        hit = False
        for n in range(1, cap + 1):
            x = kernel.sample_step(x, rng)
            if target(x):
                tau, hit = n, True
                break
        times[r] = tau
        censored[r] = not hit
    n_ok = int((~censored).sum())
    if n_ok == 0:
        raise AllCensored(f"all {replicas} replicas were censored at cap {cap}")
    good = times[~censored].astype(float)
    est = float(good.mean())
    se = float(good.std(ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else 0.0
    return HittingTimes(times=times, censored=censored, estimate=est,
                        stderr=se, censored_fraction=1.0 - n_ok / replicas)

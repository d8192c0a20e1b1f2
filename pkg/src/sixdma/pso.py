"""Particle swarm optimizer with a counting penalty and box projection.

The generic part (``SearchSpace``, ``initialize``, ``step``, ``run_swarm``)
minimizes any objective returning ``(value, violations)``; the fitness of a
particle is ``value + penalty * violations``. The pose-specific part packs all
surface poses into ``s = [q_1..q_B, u_1..u_B]`` and scores them by total CRB.
"""

from __future__ import annotations

import copy
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .channel import channel_terms
from .estimation import SENTINEL_CRB, crb_from_channels
from .geometry import (TWO_PI, ArrayLayout, LocalArray, MovementConstraints, SiteSpace,
                       canonical_angles, constraint_masks, rotation_matrices)
from .pattern import PatternKind

Objective = Callable[[np.ndarray], "tuple[float, int]"]


@dataclass(frozen=True)
class PsoParams:
    particles: int = 200
    iterations: int = 300
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    penalty: Optional[float] = None  # None: calibrated from the initial swarm
    penalty_scale: float = 1e3
    velocity_fraction: float = 0.1
    fresh_velocity: bool = True  # move with v(t+1); False moves with v(t)
    clamp_velocity: bool = True  # limit |v| per dimension to the initial range

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("need at least one particle")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if not 0 < self.inertia <= 1:
            raise ValueError("inertia must lie in (0, 1]")
        if self.cognitive < 0 or self.social < 0:
            raise ValueError("learning factors must be non-negative")
        if self.penalty is not None and not self.penalty > 0:
            raise ValueError("penalty must be positive")


@dataclass(frozen=True)
class SearchSpace:
    """Box ``[lower, upper]``; dimensions flagged ``periodic`` wrap instead of clamping."""

    lower: np.ndarray
    upper: np.ndarray
    periodic: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        per = np.asarray(self.periodic, dtype=bool)
        if lo.shape != hi.shape or lo.shape != per.shape or np.any(hi < lo):
            raise ValueError("inconsistent search space bounds")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "periodic", per)

    @property
    def dims(self) -> int:
        return self.lower.size

    def project(self, s):
        s = np.asarray(s, dtype=float)
        span = self.upper - self.lower
        wrapped = self.lower + np.mod(s - self.lower, np.where(self.periodic, span, 1.0))
        wrapped = np.where(wrapped >= self.upper, self.lower, wrapped)
        return np.where(self.periodic, wrapped, np.clip(s, self.lower, self.upper))

    def offset(self, target, s):
        """``target - s``, taken the short way round on periodic dimensions."""
        d = np.asarray(target, dtype=float) - np.asarray(s, dtype=float)
        span = self.upper - self.lower
        wrapped = np.mod(d + span / 2, np.where(self.periodic, span, 1.0)) - span / 2
        return np.where(self.periodic, wrapped, d)

    def sample(self, rng, n: int) -> np.ndarray:
        return self.lower + rng.random((n, self.dims)) * (self.upper - self.lower)


@dataclass
class SwarmState:
    positions: np.ndarray
    velocities: np.ndarray
    fitness: np.ndarray
    pbest: np.ndarray
    pbest_fitness: np.ndarray
    gbest: np.ndarray
    gbest_fitness: float
    penalty: float
    iteration: int
    rng: np.random.Generator = field(repr=False)


def _evaluate(objective: Objective, positions, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(objective, positions))
    else:
        results = [objective(s) for s in positions]
    values = np.array([r[0] for r in results], dtype=float)
    counts = np.array([r[1] for r in results], dtype=float)
    return values, counts


def _calibrate_penalty(values, counts, scale: float) -> float:
    ok = values < SENTINEL_CRB
    feasible = ok & (counts == 0)
    pool = values[feasible] if feasible.any() else values[ok]
    if pool.size == 0:
        return 1.0
    return float(scale * np.median(pool))


def initialize(objective: Objective, space: SearchSpace, params: PsoParams, seed=None,
               initial=None, workers: int = 1) -> SwarmState:
    """Random swarm; rows of ``initial`` (if any) replace the first particles."""
    rng = np.random.default_rng(seed)
    positions = space.sample(rng, params.particles)
    vmax = params.velocity_fraction * (space.upper - space.lower)
    velocities = (2 * rng.random((params.particles, space.dims)) - 1) * vmax
    if initial is not None:
        initial = np.atleast_2d(np.asarray(initial, dtype=float))[: params.particles]
        positions[: len(initial)] = space.project(initial)
    values, counts = _evaluate(objective, positions, workers)
    tau = params.penalty if params.penalty is not None else _calibrate_penalty(
        values, counts, params.penalty_scale)
    fitness = values + tau * counts
    best = int(np.argmin(fitness))
    return SwarmState(positions, velocities, fitness, positions.copy(), fitness.copy(),
                      positions[best].copy(), float(fitness[best]), tau, 0, rng)


def step(state: SwarmState, params: PsoParams, objective: Objective, space: SearchSpace,
         workers: int = 1) -> SwarmState:
    """One synchronous PSO iteration; returns a new state and leaves ``state`` untouched."""
    rng = copy.deepcopy(state.rng)
    s = state.positions
    r = rng.random((s.shape[0], 2))
    v = (params.inertia * state.velocities
         + params.cognitive * r[:, :1] * space.offset(state.pbest, s)
         + params.social * r[:, 1:] * space.offset(state.gbest[None, :], s))
    if params.clamp_velocity:
        vmax = params.velocity_fraction * (space.upper - space.lower)
        v = np.clip(v, -vmax, vmax)
    move = v if params.fresh_velocity else state.velocities
    positions = space.project(s + move)
    values, counts = _evaluate(objective, positions, workers)
    fitness = values + state.penalty * counts
    better = fitness < state.pbest_fitness
    pbest = np.where(better[:, None], positions, state.pbest)
    pbest_fitness = np.where(better, fitness, state.pbest_fitness)
    gbest, gbest_fitness = state.gbest, state.gbest_fitness
    best = int(np.argmin(fitness))  # first index wins ties, as a sequential scan would
    if fitness[best] < gbest_fitness:
        gbest, gbest_fitness = positions[best].copy(), float(fitness[best])
    return SwarmState(positions, v, fitness, pbest, pbest_fitness, gbest, gbest_fitness,
                      state.penalty, state.iteration + 1, rng)


@dataclass
class SwarmResult:
    best: np.ndarray
    fitness: float
    history: np.ndarray
    penalty: float
    state: SwarmState = field(repr=False)


def run_swarm(objective: Objective, space: SearchSpace, params: PsoParams, seed=None,
              initial=None, workers: int = 1) -> SwarmResult:
    state = initialize(objective, space, params, seed, initial, workers)
    history = [state.gbest_fitness]
    for _ in range(params.iterations):
        state = step(state, params, objective, space, workers)
        history.append(state.gbest_fitness)
    return SwarmResult(state.gbest.copy(), state.gbest_fitness, np.array(history),
                       state.penalty, state)


# ---------------------------------------------------------------------------
# surface pose problem

def pose_space(n_surfaces: int, site: SiteSpace) -> SearchSpace:
    h = site.half
    lower = np.concatenate([np.full(3 * n_surfaces, -h), np.zeros(3 * n_surfaces)])
    upper = np.concatenate([np.full(3 * n_surfaces, h), np.full(3 * n_surfaces, TWO_PI)])
    periodic = np.arange(6 * n_surfaces) >= 3 * n_surfaces
    return SearchSpace(lower, upper, periodic)


def project(s, side: float) -> np.ndarray:
    """Clamp the position half of ``s`` to ``[-side/2, side/2]`` and wrap the angles."""
    s = np.asarray(s, dtype=float)
    B = s.size // 6
    out = s.copy()
    out[: 3 * B] = np.clip(s[: 3 * B], -side / 2, side / 2)
    out[3 * B:] = canonical_angles(s[3 * B:])
    return out


def encode(layout: ArrayLayout) -> np.ndarray:
    return np.concatenate([layout.positions.ravel(), canonical_angles(layout.rotations).ravel()])


def decode(s, local: LocalArray) -> ArrayLayout:
    s = np.asarray(s, dtype=float)
    B = s.size // 6
    return ArrayLayout.uniform(s[: 3 * B].reshape(B, 3), s[3 * B:].reshape(B, 3), local)


def penalty_set(s, cons: MovementConstraints, normal=(1.0, 0.0, 0.0)) -> set:
    """Violating pairs of ``s``: ``("distance", i, j)`` with ``i < j``,
    ``("reflection", i, j)`` for ordered pairs and ``("blockage", i)``."""
    s = np.asarray(s, dtype=float)
    B = s.size // 6
    q = s[: 3 * B].reshape(B, 3)
    normals = rotation_matrices(s[3 * B:].reshape(B, 3)) @ np.asarray(normal, dtype=float)
    reflection, blockage, distance = constraint_masks(q, normals, cons.d_min)
    out = {("distance", int(i), int(j)) for i, j in zip(*np.nonzero(distance))}
    out |= {("reflection", int(i), int(j)) for i, j in zip(*np.nonzero(reflection))}
    out |= {("blockage", int(i)) for i in np.flatnonzero(blockage)}
    return out


def violation_count(s, cons: MovementConstraints, normal=(1.0, 0.0, 0.0)) -> int:
    s = np.asarray(s, dtype=float)
    B = s.size // 6
    q = s[: 3 * B].reshape(B, 3)
    normals = rotation_matrices(s[3 * B:].reshape(B, 3)) @ np.asarray(normal, dtype=float)
    return int(sum(m.sum() for m in constraint_masks(q, normals, cons.d_min)))


class CrbObjective:
    """Total CRB of the typical targets for a layout built by ``to_layout``.

    Returns ``(crb, violations)`` with the sentinel CRB for unidentifiable
    geometries; ``count`` supplies the constraint violation count.
    """

    def __init__(self, scenario, kind: PatternKind, to_layout, count,
                 gain_derivative: bool = True):
        self.scenario = scenario
        self.kind = kind
        self.to_layout = to_layout
        self.count = count
        self.gain_derivative = gain_derivative

    def crb(self, layout: ArrayLayout) -> float:
        sc = self.scenario
        probe = sc.probe(layout.n_antennas)
        H, D = channel_terms(layout, self.kind, sc.phis, sc.wavelength,
                             gain_derivative=self.gain_derivative)
        return crb_from_channels(H, D, sc.rhos, probe, sc.noise_var)

    def __call__(self, s):
        return self.crb(self.to_layout(s)), self.count(s)


def fitness(s, scenario, site: SiteSpace, cons: MovementConstraints, kind: PatternKind,
            local: LocalArray, penalty: float, gain_derivative: bool = True) -> float:
    """Penalized CRB of one packed pose vector."""
    objective = CrbObjective(scenario, kind, lambda x: decode(x, local),
                             lambda x: violation_count(x, cons, local.normal), gain_derivative)
    value, count = objective(project(s, site.side))
    return value + penalty * count


@dataclass
class PsoResult:
    layout: ArrayLayout
    fitness: float
    crb: float
    history: np.ndarray
    violations: set
    penalty: float

    @property
    def feasible(self) -> bool:
        return not self.violations and self.crb < SENTINEL_CRB

    @property
    def iterations(self) -> int:
        return len(self.history) - 1


def optimize(scenario, site: SiteSpace, cons: MovementConstraints, kind: PatternKind,
             params: PsoParams, seed=None, *, local: LocalArray, n_surfaces: int,
             initial=None, workers: int = 1, gain_derivative: bool = True) -> PsoResult:
    """Minimize the total CRB over all surface positions and rotations."""
    space = pose_space(n_surfaces, site)
    objective = CrbObjective(scenario, kind, lambda x: decode(x, local),
                             lambda x: violation_count(x, cons, local.normal), gain_derivative)
    res = run_swarm(objective, space, params, seed, initial, workers)
    layout = decode(res.best, local)
    return PsoResult(layout, res.fitness, objective.crb(layout), res.history,
                     penalty_set(res.best, cons, local.normal), res.penalty)


def with_params(params: PsoParams, **changes) -> PsoParams:
    return replace(params, **changes)

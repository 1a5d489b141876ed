"""
Binary particle swarm for the secondary-link activation problem.

Each particle carries a continuous position and velocity in R^M. Bits are
sampled from the position through the sigmoid transfer rule; personal and
global bests are stored as bit vectors. When they attract the position, a
remembered bit b is placed at 2b - 1 (i.e. -1 or +1), so a particle that has
settled on its attractor reproduces the remembered bit with the same odds
(sigmoid(1) ~ 0.73) whether the bit is 0 or 1. Attracting toward raw 0/1
would leave every remembered 0 at a coin flip.

Random draws come from a single ``numpy.random.Generator`` seeded from
``PsoConfig.seed``. Each block is drawn as an (S, M) array, i.e.
particle-major and component-minor, in this order:

    init:       positions U(-1, 1), then binarization draws
    iteration:  r1, then r2, then binarization draws
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from cogrelay.sharing import ActivationVector, SharingInstance, SharingSolution, interference_free_bound, solution_for


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 40
    iterations: int = 200
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    velocity_clamp: float = 4.0
    # None -> derived from the instance, see default_penalty()
    infeasibility_penalty: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 1:
            raise ValueError("swarm_size must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0.0 <= self.inertia <= 1.0:
            raise ValueError("inertia must lie in [0, 1]")
        if self.cognitive < 0 or self.social < 0:
            raise ValueError("acceleration coefficients must be >= 0")
        if not self.velocity_clamp > 0:
            raise ValueError("velocity_clamp must be > 0")
        if self.infeasibility_penalty is not None and self.infeasibility_penalty < 0:
            raise ValueError("infeasibility_penalty must be >= 0")


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    bits: ActivationVector
    pbest_bits: ActivationVector
    pbest_fitness: float


@dataclass
class SwarmState:
    """Array-backed swarm snapshot; row k of each matrix is particle k."""

    positions: np.ndarray
    velocities: np.ndarray
    bits: np.ndarray
    pbest_bits: np.ndarray
    pbest_fitness: np.ndarray
    gbest_bits: np.ndarray
    gbest_fitness: float
    iteration: int = 0
    history: list[float] = field(default_factory=list)

    @property
    def particles(self) -> list[Particle]:
        return [
            Particle(
                self.positions[k].copy(),
                self.velocities[k].copy(),
                ActivationVector(tuple(self.bits[k])),
                ActivationVector(tuple(self.pbest_bits[k])),
                float(self.pbest_fitness[k]),
            )
            for k in range(self.positions.shape[0])
        ]


def default_penalty(instance: SharingInstance) -> float:
    """Ten times the all-zeros objective, raised if needed so that any
    infeasible activation scores below every feasible one."""
    baseline = float(instance.assess(np.zeros((1, instance.n_secondary)))[0][0])
    bound = interference_free_bound(instance)
    return max(10.0 * baseline, 2.0 * bound, 1.0)


def update_velocity(velocity, position, pbest, gbest, cfg: PsoConfig, r1, r2):
    v = (
        cfg.inertia * np.asarray(velocity, dtype=float)
        + cfg.cognitive * r1 * (pbest - position)
        + cfg.social * r2 * (gbest - position)
    )
    return np.clip(v, -cfg.velocity_clamp, cfg.velocity_clamp)


def update_position(position, velocity):
    return np.asarray(position, dtype=float) + velocity


def attractor(bits):
    """Position-space location of a remembered bit vector."""
    return 2.0 * np.asarray(bits, dtype=float) - 1.0


def sigmoid(x):
    # np.exp overflow for large negative x gives inf -> 0.0, which is the right limit
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def binarize(position, draws) -> np.ndarray:
    return (np.asarray(draws) < sigmoid(position)).astype(np.int8)


def fitness(instance: SharingInstance, bits, penalty: float):
    """Objective, minus ``penalty`` per violated SINR constraint. Works on a
    single bit vector or a batch of rows."""
    values, viol = instance.assess(bits)
    out = values - penalty * viol
    return float(out[0]) if np.ndim(bits) == 1 or isinstance(bits, ActivationVector) else out


def optimize(
    instance: SharingInstance,
    cfg: PsoConfig = PsoConfig(),
    callback: Callable[[SwarmState], None] | None = None,
) -> SharingSolution:
    """Search for the best activation; the result's objective and feasibility
    are re-evaluated without the penalty."""
    m = instance.n_secondary
    if m == 0:
        raise ValueError("optimize needs at least one secondary link")
    state = run_swarm(instance, cfg, callback)
    return solution_for(instance, ActivationVector(tuple(state.gbest_bits)))


def run_swarm(instance: SharingInstance, cfg: PsoConfig = PsoConfig(), callback=None) -> SwarmState:
    m = instance.n_secondary
    s = cfg.swarm_size
    penalty = default_penalty(instance) if cfg.infeasibility_penalty is None else cfg.infeasibility_penalty
    rng = np.random.default_rng(cfg.seed)

    pos = rng.uniform(-1.0, 1.0, size=(s, m))
    vel = np.zeros((s, m))
    bits = binarize(pos, rng.random((s, m)))
    fit = fitness(instance, bits, penalty)
    pbest, pbest_fit = bits.copy(), fit.copy()
    g = int(np.argmax(pbest_fit))
    state = SwarmState(pos, vel, bits, pbest, pbest_fit, pbest[g].copy(), float(pbest_fit[g]))
    state.history.append(state.gbest_fitness)
    if callback:
        callback(state)

    for it in range(1, cfg.iterations + 1):
        r1 = rng.random((s, m))
        r2 = rng.random((s, m))
        vel = update_velocity(vel, pos, attractor(pbest), attractor(state.gbest_bits), cfg, r1, r2)
        pos = update_position(pos, vel)
        bits = binarize(pos, rng.random((s, m)))
        fit = fitness(instance, bits, penalty)

        improved = fit > pbest_fit
        pbest[improved] = bits[improved]
        pbest_fit[improved] = fit[improved]
        g = int(np.argmax(pbest_fit))
        if pbest_fit[g] > state.gbest_fitness:
            state.gbest_bits = pbest[g].copy()
            state.gbest_fitness = float(pbest_fit[g])

        state.positions, state.velocities, state.bits = pos, vel, bits
        state.pbest_bits, state.pbest_fitness = pbest, pbest_fit
        state.iteration = it
        state.history.append(state.gbest_fitness)
        if callback:
            callback(state)
    return state

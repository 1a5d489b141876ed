import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cogrelay.channel import NodePosition as P, NoiseModel, db_to_linear
from cogrelay.sharing import (
    SharingInstance,
    brute_force_optimum,
    enumerate_activations,
    objective,
    random_instance,
    violations,
)
from cogrelay.swarm import (
    PsoConfig,
    binarize,
    default_penalty,
    fitness,
    optimize,
    run_swarm,
    sigmoid,
    update_position,
    update_velocity,
)


def test_velocity_vanishes_without_coefficients():
    cfg = PsoConfig(inertia=0.0, cognitive=0.0, social=0.0)
    v = update_velocity(np.array([0.5, -2.0]), np.array([1.0, 2.0]), np.array([0, 1]), np.array([1, 1]), cfg, 0.3, 0.6)
    assert np.array_equal(v, [0.0, 0.0])


def test_velocity_scalar_hand_step():
    cfg = PsoConfig(inertia=0.7, cognitive=1.5, social=1.5)
    v = update_velocity(0.5, 2.0, 3.0, 5.0, cfg, 0.3, 0.6)
    assert abs(v - 3.5) <= 1e-12
    assert abs(update_position(2.0, v) - 5.5) <= 1e-12


def test_velocity_pure_inertia():
    cfg = PsoConfig(inertia=0.7)
    y = np.array([0.2, -0.4])
    assert np.allclose(update_velocity(np.array([1.0, -2.0]), y, y, y, cfg, 0.9, 0.1), [0.7, -1.4])


def test_velocity_clamp():
    cfg = PsoConfig(velocity_clamp=4.0)
    v = update_velocity(np.array([10.0, -10.0]), np.zeros(2), np.array([9.0, -9.0]), np.array([9.0, -9.0]), cfg, 1.0, 1.0)
    assert np.array_equal(v, [4.0, -4.0])


def test_position_update():
    assert update_position(3.0, 0.0) == 3.0
    assert update_position(update_position(3.0, 1.0), -1.0) == 3.0


def test_binarize_rule():
    assert binarize(np.array([0.0, 0.0]), np.array([0.49, 0.51])).tolist() == [1, 0]
    assert binarize(np.array([np.inf, 1e6]), np.array([0.999, 0.999999])).tolist() == [1, 1]
    assert binarize(np.array([-np.inf, -1e6]), np.array([0.0, 1e-12])).tolist() == [0, 0]
    assert sigmoid(0.0) == 0.5


def _collocated_pair(floor=10.0):
    return SharingInstance(
        secondary_links=[(P(100, 100), P(110, 100)), (P(130, 100), P(120, 100))],
        sinr_floor=floor,
        noise=NoiseModel(1e-4),
    )


def test_fitness_feasible_equals_objective():
    s = _collocated_pair()
    assert fitness(s, np.array([1, 0]), 123.0) == objective(s, [1, 0])
    assert fitness(s, np.array([0, 0]), 123.0) == objective(s, [0, 0])


def test_fitness_penalises_each_violation():
    # a secondary link too long to clear its floor; the primary is unaffected
    s = SharingInstance(
        primary_links=[(P(10, 10), P(20, 10))],
        secondary_links=[(P(300, 300), P(22, 10))],
        sinr_floor=5.0,
        noise=NoiseModel(1e-3),
    )
    assert violations(s, [0]) == 0
    assert violations(s, [1]) == 1
    assert fitness(s, np.array([1]), 7.0) == pytest.approx(objective(s, [1]) - 7.0, rel=1e-12)
    pair = _collocated_pair()
    assert violations(pair, [1, 1]) == 2
    assert fitness(pair, np.array([1, 1]), 5.0) == pytest.approx(objective(pair, [1, 1]) - 10.0, rel=1e-12)


def test_fitness_batch():
    s = random_instance(2, 1, 4)
    rows = enumerate_activations(4)
    batch = fitness(s, rows, 1e3)
    assert batch.shape == (16,)
    assert batch[5] == fitness(s, rows[5], 1e3)


@pytest.mark.parametrize("seed", range(5))
def test_default_penalty_separates_feasible_from_infeasible(seed):
    s = random_instance(seed, 2, 8, arena=(300.0, 300.0), sinr_floor=db_to_linear(8))
    pen = default_penalty(s)
    vals, viol = s.assess(enumerate_activations(8))
    fit = vals - pen * viol
    if (viol == 0).any() and (viol > 0).any():
        assert fit[viol > 0].max() < fit[viol == 0].min()
    assert pen >= 10 * objective(s, [0] * 8)


def test_optimize_requires_links():
    with pytest.raises(ValueError):
        optimize(SharingInstance(), PsoConfig(iterations=1))


def test_optimize_deterministic():
    s = random_instance(8, 2, 10)
    a = optimize(s, PsoConfig(seed=3, iterations=30))
    b = optimize(s, PsoConfig(seed=3, iterations=30))
    assert a == b


def test_optimize_beats_baseline_when_all_ones_feasible():
    s = random_instance(1, 1, 6, sinr_floor=0.0)
    assert violations(s, [1] * 6) == 0
    sol = optimize(s, PsoConfig(seed=0))
    assert sol.feasible
    assert sol.objective >= objective(s, [0] * 6)


def test_optimize_reports_honest_feasibility():
    s = SharingInstance(
        primary_links=[(P(10, 10), P(500, 500))],
        secondary_links=[(P(20, 20), P(30, 30)), (P(40, 40), P(45, 45)), (P(600, 600), P(601, 601))],
        sinr_floor=100.0,
    )
    sol = optimize(s, PsoConfig(seed=0, iterations=20))
    assert not sol.feasible
    fewest = min(violations(s, r) for r in enumerate_activations(3))
    assert violations(s, sol.activation) == fewest


def test_optimize_matches_brute_force_small():
    s = random_instance(21, 2, 8, sinr_floor=db_to_linear(10))
    best = brute_force_optimum(s)
    sol = optimize(s, PsoConfig(seed=21))
    assert sol.objective <= best.objective
    assert sol.objective >= 0.99 * best.objective


def test_draw_order_is_documented_order():
    s = random_instance(4, 1, 5)
    cfg = PsoConfig(swarm_size=7, iterations=0, seed=9)
    state = run_swarm(s, cfg)
    rng = np.random.default_rng(9)
    pos = rng.uniform(-1, 1, size=(7, 5))
    bits = binarize(pos, rng.random((7, 5)))
    assert np.array_equal(state.positions, pos)
    assert np.array_equal(state.bits, bits)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 8), st.integers(0, 1000))
def test_swarm_invariants(inst_seed, m, pso_seed):
    s = random_instance(inst_seed, 2, m, arena=(400.0, 400.0))
    cfg = PsoConfig(swarm_size=8, iterations=15, seed=pso_seed)
    pen = default_penalty(s)
    history = []

    def check(state):
        assert (np.abs(state.velocities) <= cfg.velocity_clamp).all()
        assert state.gbest_fitness == pytest.approx(state.pbest_fitness.max(), rel=0, abs=0)
        fresh = fitness(s, state.pbest_bits, pen)
        assert np.array_equal(fresh, state.pbest_fitness)
        history.append(state.gbest_fitness)
        assert len(state.particles) == cfg.swarm_size

    run_swarm(s, cfg, callback=check)
    assert all(a <= b for a, b in zip(history, history[1:]))


def test_positions_frozen_without_coefficients():
    s = random_instance(6, 1, 6)
    cfg = PsoConfig(inertia=0.0, cognitive=0.0, social=0.0, iterations=10, seed=2)
    seen = []
    run_swarm(s, cfg, callback=lambda st_: seen.append(st_.positions.copy()))
    assert all(np.array_equal(seen[0], p) for p in seen)


def test_config_validation():
    for bad in (
        dict(swarm_size=0),
        dict(iterations=-1),
        dict(inertia=1.5),
        dict(cognitive=-1.0),
        dict(velocity_clamp=0.0),
        dict(infeasibility_penalty=-1.0),
    ):
        with pytest.raises(ValueError):
            PsoConfig(**bad)

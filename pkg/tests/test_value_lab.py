"""Value estimation and the two oracles.

The fused cost driver must agree with the record-then-score route exactly;
the adjoint oracle is checked by finite differences on its own backward
equation and against the brute-force search on a shared noise tensor.
"""

import numpy as np
import pytest

from mfclab.dynamics import SimConfig, noise_tensor, simulate_particles
from mfclab.hamiltonian import CostSpec, QuadraticControlCost, cost_of_pathbundle
from mfclab.measures import sample_atoms
from mfclab.models import smooth_law
from mfclab.policies import ConstantPolicy, OpenLoopPolicy
from mfclab.spaces import weighted_adjoint
from mfclab.value_lab import (build_costate_feedback, deterministic_value, estimate_cost,
                              interval_index, oracle_adjoint_linear, oracle_open_loop,
                              path_costs)


def test_path_costs_equals_record_then_score(delay_model):
    cfg = SimConfig(t0=0.0, horizon=1.0, steps=10, paths=37, seed=3)
    atoms = sample_atoms(delay_model.space, smooth_law(delay_model), 3, seed=1)
    policy = ConstantPolicy(np.array([0.3]))
    noise = noise_tensor(cfg.seed, cfg.paths, cfg.steps, delay_model.system.k_noise)
    fused = path_costs(delay_model.system, delay_model.cost, policy, atoms, cfg, noise)
    bundle = simulate_particles(delay_model.system, policy, atoms, cfg, noise)
    scored = cost_of_pathbundle(delay_model.cost, bundle)
    assert np.array_equal(fused, scored)


def test_estimate_cost_standard_error_shrinks(delay_model):
    atoms = sample_atoms(delay_model.space, smooth_law(delay_model), 2, seed=1)
    policy = ConstantPolicy(np.array([0.3]))
    base = SimConfig(t0=0.0, horizon=1.0, steps=10, paths=100, seed=3)
    big = SimConfig(t0=0.0, horizon=1.0, steps=10, paths=400, seed=3)
    se1 = estimate_cost(delay_model.system, delay_model.cost, policy, atoms, base).std_error
    se2 = estimate_cost(delay_model.system, delay_model.cost, policy, atoms, big).std_error
    assert se2 < se1
    assert abs(se2 / se1 - 0.5) < 0.2  # roughly 1/sqrt(4)


def test_deterministic_value_is_zero_noise_single_path(delay_model):
    cfg = SimConfig(t0=0.0, horizon=1.0, steps=8, paths=64, seed=5)
    atoms = sample_atoms(delay_model.space, smooth_law(delay_model), 2, seed=1)
    policy = ConstantPolicy(np.array([0.2]))
    v = deterministic_value(delay_model.system, delay_model.cost, policy, atoms, cfg)
    one = SimConfig(t0=0.0, horizon=1.0, steps=8, paths=1, seed=5)
    zeros = np.zeros((1, cfg.steps, delay_model.system.k_noise))
    assert v == float(path_costs(delay_model.system, delay_model.cost, policy, atoms,
                                 one, zeros)[0])


def test_interval_index_partition():
    for steps, intervals in ((50, 3), (9, 3), (8, 4), (7, 2)):
        seg = interval_index(steps, intervals)
        assert seg.shape == (steps,)
        assert seg[0] == 0 and seg[-1] == intervals - 1
        assert np.all(np.diff(seg) >= 0)
        counts = np.bincount(seg, minlength=intervals)
        assert counts.min() >= steps // intervals
        assert counts.max() <= -(-steps // intervals)


def zero_cost(model):
    return CostSpec(running_state=lambda s, m: np.zeros(s.shape[:2]),
                    control_cost=QuadraticControlCost(1.0),
                    terminal=lambda s, m: np.zeros(s.shape[:2]),
                    cone="nonneg", channel_weights=np.ones(model.system.k_ctrl))


def test_adjoint_oracle_zero_data_gives_zero(delay_model):
    cfg = SimConfig(t0=0.0, horizon=1.0, steps=10, paths=1, seed=0)
    dim = delay_model.space.dim
    x0 = np.ones((1, dim))
    adj = oracle_adjoint_linear(delay_model.system, zero_cost(delay_model),
                                np.zeros(dim), np.zeros(dim), x0, cfg)
    assert np.array_equal(adj.costates, np.zeros((cfg.steps + 1, dim)))
    assert np.array_equal(adj.controls, np.zeros((cfg.steps, 1)))
    assert adj.value == 0.0


def test_adjoint_costate_solves_backward_equation(delay_model):
    cfg = SimConfig(t0=0.0, horizon=1.0, steps=50, paths=1, seed=0)
    x0 = np.zeros((1, delay_model.space.dim))
    adj = oracle_adjoint_linear(delay_model.system, delay_model.cost,
                                delay_model.run_vec, delay_model.term_vec, x0, cfg)
    assert np.array_equal(adj.costates[-1], delay_model.term_vec)
    m_full = (delay_model.bundle.generator + delay_model.system.drift_state
              + delay_model.system.drift_mean)
    m_star = weighted_adjoint(delay_model.space, m_full)
    dt = cfg.dt
    # dp/dt = -(M* p + g), checked by central differences at interior nodes
    for k in range(1, cfg.steps):
        lhs = (adj.costates[k + 1] - adj.costates[k - 1]) / (2.0 * dt)
        rhs = -(m_star @ adj.costates[k] + delay_model.run_vec)
        assert np.abs(lhs - rhs).max() < 5e-3


def test_adjoint_controls_are_channel_minimizers(delay_model):
    cfg = SimConfig(t0=0.0, horizon=1.0, steps=12, paths=1, seed=0)
    x0 = np.zeros((1, delay_model.space.dim))
    adj = oracle_adjoint_linear(delay_model.system, delay_model.cost,
                                delay_model.run_vec, delay_model.term_vec, x0, cfg)
    inj = delay_model.params.injection
    want = inj * np.maximum(-adj.costates[:cfg.steps, 0], 0.0)
    assert np.allclose(adj.controls[:, 0], want, atol=1e-12)


def test_costate_feedback_matches_adjoint_controls(delay_model):
    cfg = SimConfig(t0=0.0, horizon=1.0, steps=12, paths=1, seed=0)
    policy = build_costate_feedback(delay_model, cfg, gain=1.0)
    x0 = np.zeros((1, delay_model.space.dim))
    adj = oracle_adjoint_linear(delay_model.system, delay_model.cost,
                                delay_model.run_vec, delay_model.term_vec, x0, cfg)
    states = np.zeros((2, 3, delay_model.space.dim))
    mean = states.mean(axis=1)
    for k in range(cfg.steps):
        a = policy.controls_at(k, 0.0, states, mean)
        assert a.shape == (2, 3, 1)
        assert np.allclose(a, adj.controls[k, 0], atol=1e-12)


def test_open_loop_oracle_against_per_candidate_rerun(delay_model):
    import itertools
    cfg = SimConfig(t0=0.0, horizon=1.0, steps=6, paths=3, seed=4)
    atoms = sample_atoms(delay_model.space, smooth_law(delay_model), 2, seed=1)
    grid = np.linspace(0.0, 1.0, 3)
    intervals = 2
    noise = noise_tensor(cfg.seed, cfg.paths, cfg.steps, delay_model.system.k_noise)
    oracle = oracle_open_loop(delay_model.system, delay_model.cost, atoms, cfg,
                              intervals, grid, noise)
    seg = interval_index(cfg.steps, intervals)
    want = []
    for cand in itertools.product(grid, repeat=intervals):
        per_step = np.array(cand)[seg][:, None]
        bundle = simulate_particles(delay_model.system, OpenLoopPolicy(per_step),
                                    atoms, cfg, noise)
        want.append(cost_of_pathbundle(delay_model.cost, bundle).mean())
    want = np.array(want)
    assert np.allclose(oracle.candidate_values, want, atol=1e-10)
    best = int(np.argmin(want))
    assert oracle.value.value == oracle.candidate_values[best]
    assert np.array_equal(oracle.controls,
                          np.array(list(itertools.product(grid, repeat=intervals))[best]))
    assert oracle.grid_gap >= 0.0


def test_open_loop_oracle_input_validation(delay_model, vintage_model):
    cfg = SimConfig(t0=0.0, horizon=1.0, steps=4, paths=2, seed=0)
    atoms = np.ones((1, vintage_model.space.dim))
    with pytest.raises(ValueError):
        oracle_open_loop(vintage_model.system, vintage_model.cost, atoms, cfg, 2,
                         np.linspace(0, 1, 3))
    atoms = np.ones((1, delay_model.space.dim))
    with pytest.raises(ValueError):
        oracle_open_loop(delay_model.system, delay_model.cost, atoms, cfg, 23,
                         np.linspace(0, 1, 9))

"""Value estimation and independent oracles.

Values are always policy values or oracle values; no Hamilton-Jacobi
equation is ever solved.  `estimate_cost` fuses simulation and cost
accumulation (identical arithmetic to simulating first and scoring the
recorded bundle, without storing trajectories).  Two oracles cover the
linear-cost benchmark:

* `oracle_open_loop` exhaustively searches piecewise-constant deterministic
  controls on a value grid, all candidates scored on the same noise;
* `oracle_adjoint_linear` solves the deterministic backward co-state
  equation (RK4 at 10x finer steps), reads off the minimizing control per
  step, and evaluates the closed loop with the simulator's own
  discretization, noise dropped.  On an affine-cost model the noise
  contributes exactly zero to the expected cost, so the Monte Carlo estimate
  of the same closed loop differs from this value only by its standard
  error.
"""

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import SimConfig, SystemSpec, advance, map_path_chunks, noise_tensor
from .hamiltonian import CostSpec, running_cost_term, terminal_cost_term
from .models import Model
from .policies import CostateFeedback, CostateFieldFeedback, OpenLoopPolicy
from .spaces import weighted_adjoint


@dataclass(frozen=True, eq=False)
class ValueEstimate:
    value: float
    std_error: float
    paths: int


def path_costs(system: SystemSpec, cost: CostSpec, policy, x0: np.ndarray, cfg: SimConfig,
               noise: np.ndarray | None = None) -> np.ndarray:
    """Per-path total cost under a policy; fused simulation and scoring."""
    x0 = np.asarray(x0, dtype=float)
    if noise is None:
        noise = noise_tensor(cfg.seed, cfg.paths, cfg.steps, system.k_noise)
    dt = cfg.dt
    dw = noise * np.sqrt(dt)
    prop = system.bundle.propagator(dt)
    times = cfg.times
    out = np.empty(cfg.paths)

    def run(sl: slice) -> None:
        states = np.repeat(x0[None, :, :], sl.stop - sl.start, axis=0)
        acc = np.zeros(sl.stop - sl.start)
        for k in range(cfg.steps):
            mean = states.mean(axis=1)
            a = np.asarray(policy.controls_at(k, float(times[k]), states, mean), dtype=float)
            acc += dt * running_cost_term(cost, states, mean, a)
            states = advance(system, states, mean, a, dw[sl, k], prop, dt)
        acc += terminal_cost_term(cost, states, states.mean(axis=1))
        out[sl] = acc

    map_path_chunks(run, cfg.paths)
    if not np.all(np.isfinite(out)):
        from .dynamics import SimulationError
        bad = int(np.argmin(np.isfinite(out)))
        raise SimulationError(f"non-finite cost on path {bad}")
    return out


def estimate_cost(system: SystemSpec, cost: CostSpec, policy, x0: np.ndarray, cfg: SimConfig,
                  noise: np.ndarray | None = None) -> ValueEstimate:
    """Monte Carlo policy value with its standard error (std / sqrt(paths))."""
    costs = path_costs(system, cost, policy, x0, cfg, noise)
    se = float(np.std(costs, ddof=1) / np.sqrt(cfg.paths)) if cfg.paths > 1 else 0.0
    return ValueEstimate(value=float(np.mean(costs)), std_error=se, paths=cfg.paths)


def deterministic_value(system: SystemSpec, cost: CostSpec, policy, x0: np.ndarray,
                        cfg: SimConfig) -> float:
    """Value of one noise-free path (the expected cost when costs are affine)."""
    one = replace(cfg, paths=1)
    zeros = np.zeros((1, cfg.steps, system.k_noise))
    return float(path_costs(system, cost, policy, x0, one, zeros)[0])


# ---------------------------------------------------------------------------
# open-loop brute force


@dataclass(frozen=True, eq=False)
class OpenLoopOracle:
    value: ValueEstimate
    controls: np.ndarray          # (intervals,) best piecewise-constant levels
    candidate_values: np.ndarray  # (candidates,) in grid product order
    grid: np.ndarray
    grid_gap: float               # Lipschitz-based bound on the grid resolution loss


def interval_index(steps: int, intervals: int) -> np.ndarray:
    return (np.arange(steps) * intervals) // steps


def _score_candidates(system: SystemSpec, cost: CostSpec, x0: np.ndarray, cfg: SimConfig,
                      per_step: np.ndarray, dw: np.ndarray, chunk: int = 27):
    """Scores piecewise-constant scalar candidates, batched over (candidate, path)."""
    n_cand, steps = per_step.shape
    n, dim = x0.shape
    dt = cfg.dt
    prop = system.bundle.propagator(dt)
    values = np.empty(n_cand)
    errors = np.empty(n_cand)
    for lo in range(0, n_cand, chunk):
        hi = min(lo + chunk, n_cand)
        nc = hi - lo
        batch = nc * cfg.paths
        states = np.repeat(x0[None, :, :], batch, axis=0)
        acc = np.zeros(batch)
        dw_big = np.tile(dw, (nc, 1, 1))
        for k in range(steps):
            mean = states.mean(axis=1)
            a_flat = np.repeat(per_step[lo:hi, k], cfg.paths)
            a = np.broadcast_to(a_flat[:, None, None], (batch, n, 1))
            acc += dt * running_cost_term(cost, states, mean, a)
            states = advance(system, states, mean, a, dw_big[:, k], prop, dt)
        acc += terminal_cost_term(cost, states, states.mean(axis=1))
        acc = acc.reshape(nc, cfg.paths)
        values[lo:hi] = acc.mean(axis=1)
        if cfg.paths > 1:
            errors[lo:hi] = acc.std(axis=1, ddof=1) / np.sqrt(cfg.paths)
        else:
            errors[lo:hi] = 0.0
    return values, errors


def oracle_open_loop(system: SystemSpec, cost: CostSpec, x0: np.ndarray, cfg: SimConfig,
                     intervals: int, grid: np.ndarray,
                     noise: np.ndarray | None = None) -> OpenLoopOracle:
    """Exhaustive search over piecewise-constant open-loop controls.

    Scalar control channel only.  All candidates share the same common
    random numbers, so candidate comparisons are noise-free on models whose
    noise enters additively.  The returned grid gap bounds the loss from the
    finite value grid via numerically estimated sensitivities around the
    winner.
    """
    if system.k_ctrl != 1:
        raise ValueError("open-loop brute force covers scalar control channels only")
    grid = np.asarray(grid, dtype=float)
    n_cand = grid.size ** intervals
    if n_cand > 2_000_000:
        raise ValueError(f"{n_cand} candidates exceed the search budget")
    if noise is None:
        noise = noise_tensor(cfg.seed, cfg.paths, cfg.steps, system.k_noise)
    dw = noise * np.sqrt(cfg.dt)
    seg = interval_index(cfg.steps, intervals)
    candidates = np.array(list(itertools.product(grid, repeat=intervals)))
    per_step = candidates[:, seg]
    values, errors = _score_candidates(system, cost, x0, cfg, per_step, dw)
    best = int(np.argmin(values))

    # grid-resolution loss: deterministic sensitivity of the value to each
    # interval level, evaluated around the winner at grid spacing
    spacing = float(grid[1] - grid[0]) if grid.size > 1 else 0.0
    gap = 0.0
    if spacing > 0.0:
        zero_dw = np.zeros((1, cfg.steps, system.k_noise))
        one = replace(cfg, paths=1)
        probes = [candidates[best]]
        for i in range(intervals):
            for sign in (+1.0, -1.0):
                c = candidates[best].copy()
                c[i] = c[i] + sign * spacing
                probes.append(c)
        probe_steps = np.array(probes)[:, seg]
        pv, _ = _score_candidates(system, cost, x0, one, probe_steps, zero_dw)
        base = pv[0]
        for i in range(intervals):
            up, down = pv[1 + 2 * i], pv[2 + 2 * i]
            slope = max(abs(up - base), abs(down - base)) / spacing
            gap += slope * spacing / 2.0
    return OpenLoopOracle(
        value=ValueEstimate(value=float(values[best]), std_error=float(errors[best]),
                            paths=cfg.paths),
        controls=candidates[best],
        candidate_values=values,
        grid=grid,
        grid_gap=float(gap),
    )


# ---------------------------------------------------------------------------
# adjoint oracle (affine benchmark)


@dataclass(frozen=True, eq=False)
class AdjointOracle:
    value: float               # deterministic closed-loop value
    costates: np.ndarray       # (steps+1, dim) at the coarse time nodes
    controls: np.ndarray       # (steps, k_ctrl) minimizing controls, left endpoints


def oracle_adjoint_linear(system: SystemSpec, cost: CostSpec, run_vec: np.ndarray,
                          term_vec: np.ndarray, x0: np.ndarray, cfg: SimConfig,
                          fine: int = 10) -> AdjointOracle:
    """Deterministic optimal control for affine state costs.

    Solves the backward co-state equation p' = -(M* p + run_vec) with
    terminal value term_vec by RK4 at `fine` times finer steps (M is the
    full linear drift including the generator), reads the channel minimizers
    at the coarse left endpoints, and evaluates the closed loop with the
    simulator's discretization on the ensemble-mean initial state (affine
    costs depend on the ensemble only through its mean, and the noise
    contributes zero).
    """
    space = system.space
    m_full = system.bundle.generator + system.drift_state + system.drift_mean
    m_star = weighted_adjoint(space, m_full)
    dt_fine = cfg.dt / fine

    def rhs(q):
        return m_star @ q + run_vec

    costates = np.empty((cfg.steps + 1, space.dim))
    q = np.array(term_vec, dtype=float)
    costates[cfg.steps] = q
    for i in range(cfg.steps * fine):
        k1 = rhs(q)
        k2 = rhs(q + 0.5 * dt_fine * k1)
        k3 = rhs(q + 0.5 * dt_fine * k2)
        k4 = rhs(q + dt_fine * k3)
        q = q + (dt_fine / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (i + 1) % fine == 0:
            costates[cfg.steps - (i + 1) // fine] = q

    w = space.state_weights
    controls = np.empty((cfg.steps, system.k_ctrl))
    for k in range(cfg.steps):
        slopes = system.control_map.T @ (w * costates[k])
        for c in range(system.k_ctrl):
            controls[k, c], _ = cost.control_cost.channel_argmin(
                float(slopes[c]), float(cost.channel_weights[c]), cost.cone)

    x_mean = np.asarray(x0, dtype=float).mean(axis=0, keepdims=True)
    value = deterministic_value(system, cost, OpenLoopPolicy(controls), x_mean, cfg)
    return AdjointOracle(value=value, costates=costates, controls=controls)


def build_costate_feedback(model: Model, cfg: SimConfig, gain: float = 1.0,
                           oracle: AdjointOracle | None = None):
    """Feedback policy driven by the benchmark co-state (any gain)."""
    if oracle is None:
        x0 = np.zeros((1, model.space.dim))
        oracle = oracle_adjoint_linear(model.system, model.cost, model.run_vec,
                                       model.term_vec, x0, cfg)
    if model.kind == "advertising":
        return CostateFeedback(costate_heads=oracle.costates[:cfg.steps, 0],
                               injection=model.params.injection, gain=gain)
    return CostateFieldFeedback(costates=oracle.costates[:cfg.steps], gain=gain)

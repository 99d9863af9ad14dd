"""Running costs, the control Hamiltonian and path-bundle cost evaluation.

The Hamiltonian at a point (x, mean, p) is

    H = <Ds x + Dm mean, p> + l1(x, mean) + min_q [ <E q, p> + l2(q) ]

with the minimum over the admissible cone.  The control part decouples into
scalar channels: for channel c with weight w_c the objective is
slope_c * q + w_c * g(q) with slope = E^T W p.  Quadratic g has a closed-form
minimizer; general convex g is minimized by a dense grid on [0, K] followed
by golden-section refinement, where K is the coercivity truncation radius
(minimizers never leave [0, K] once |p| is bounded, so truncating the search
box does not change the value).
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import PathBundle, SystemSpec
from .spaces import inner, norm

GRID_POINTS = 2**14
GOLDEN_TOL = 1e-8
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class QuadraticControlCost:
    """g(q) = 0.5 * curvature * q^2 per channel."""

    curvature: float = 1.0

    @property
    def coercivity(self) -> tuple:
        # -C1 + C2 q^2 <= g(q) <= C1 + C3 q^2
        return (0.0, self.curvature / 2.0, self.curvature / 2.0)

    def values(self, q: np.ndarray) -> np.ndarray:
        return 0.5 * self.curvature * q * q

    def channel_argmin(self, slope: float, weight: float, cone: str, radius=None):
        q = -slope / (weight * self.curvature)
        if cone == "nonneg":
            q = max(q, 0.0)
        return q, slope * q + weight * 0.5 * self.curvature * q * q


def _golden_refine(f, lo: float, hi: float, tol: float):
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    q = 0.5 * (a + b)
    return q, f(q)


@dataclass(frozen=True, eq=False)
class TabulatedControlCost:
    """General convex channel cost with declared coercivity constants.

    fn is a vectorized scalar convex function; the constants (c_low,
    c_quad_low, c_quad_high) assert -c_low + c_quad_low q^2 <= fn(q)
    <= c_low + c_quad_high q^2, which is what bounds the minimizers.
    """

    fn: object
    c_low: float
    c_quad_low: float
    c_quad_high: float

    @property
    def coercivity(self) -> tuple:
        return (self.c_low, self.c_quad_low, self.c_quad_high)

    def values(self, q: np.ndarray) -> np.ndarray:
        return self.fn(np.asarray(q, dtype=float))

    def channel_argmin(self, slope: float, weight: float, cone: str, radius=None):
        if radius is None:
            raise ValueError("tabulated control cost needs a search radius")
        lo = 0.0 if cone == "nonneg" else -float(radius)
        hi = float(radius)
        grid = np.linspace(lo, hi, GRID_POINTS)
        vals = slope * grid + weight * self.fn(grid)
        best = int(np.argmin(vals))
        step = (hi - lo) / (GRID_POINTS - 1)
        a = max(lo, grid[best] - step)
        b = min(hi, grid[best] + step)
        return _golden_refine(lambda q: slope * q + weight * float(self.fn(np.float64(q))), a, b, GOLDEN_TOL)


@dataclass(frozen=True, eq=False)
class CostSpec:
    """Running, control and terminal costs of a control problem.

    running_state(states (B,n,dim), mean (B,dim)) -> (B,n) and terminal alike;
    the control part of the running cost is sum_c channel_weights[c] *
    control_cost(q_c), evaluated per particle.
    """

    running_state: object
    control_cost: object
    terminal: object
    cone: str
    channel_weights: np.ndarray  # (k_ctrl,)


# ---------------------------------------------------------------------------
# Hamiltonian


def truncation_radius(system: SystemSpec, cost: CostSpec, p_bound: float) -> float:
    """Radius K such that channel minimizers stay in [-K, K] for |p| <= p_bound.

    From coercivity: at a minimizer, slope*q + w(-C1 + C2 q^2) <= w*C1 (the
    value at q = 0), so |q| <= (|slope| + sqrt(slope^2 + 8 w^2 C1 C2)) / (2 w C2)
    with |slope| <= |E_c| * p_bound.  A unit slack is added on top.
    """
    c1, c2, _ = cost.control_cost.coercivity
    if c2 <= 0:
        raise ValueError("control cost must be coercive (quadratic lower bound)")
    col_norms = norm(system.space, system.control_map.T)  # (k_ctrl,)
    s = col_norms * float(p_bound)
    w = cost.channel_weights
    radius = (s + np.sqrt(s * s + 8.0 * (w * w) * c1 * c2)) / (2.0 * w * c2)
    return float(radius.max()) + 1.0


def hamiltonian_pointwise(system: SystemSpec, cost: CostSpec, x: np.ndarray,
                          mean: np.ndarray, p: np.ndarray,
                          search_radius: float | None = None):
    """Evaluate the Hamiltonian and its minimizing control at one point.

    Returns (value, qstar).  For tabulated control costs the channel search
    runs on [0, K] (or [-K, K] for a free cone) with K = search_radius,
    defaulting to the coercivity radius for this co-state's norm.
    """
    w = system.space.state_weights
    slopes = system.control_map.T @ (w * p)
    lin = float(inner(system.space, system.drift_state @ x + system.drift_mean @ mean, p))
    run = float(cost.running_state(x[None, None, :], mean[None, :])[0, 0])
    if search_radius is None and not isinstance(cost.control_cost, QuadraticControlCost):
        search_radius = truncation_radius(system, cost, float(norm(system.space, p)))
    qstar = np.empty(system.k_ctrl)
    total = lin + run
    for c in range(system.k_ctrl):
        q, val = cost.control_cost.channel_argmin(
            float(slopes[c]), float(cost.channel_weights[c]), cost.cone, search_radius)
        qstar[c] = q
        total += val
    return total, qstar


def feedback_gamma_star(p_head: np.ndarray, n_particles: int, injection: float) -> np.ndarray:
    """Optimal scalar-channel feedback: n * injection * max(-p_head, 0).

    p_head is the head component of the per-particle value gradient (which
    carries a 1/n scaling for n-particle values, hence the factor n).
    """
    return n_particles * injection * np.maximum(-np.asarray(p_head, dtype=float), 0.0)


# ---------------------------------------------------------------------------
# path costs


def running_cost_term(cost: CostSpec, states: np.ndarray, mean: np.ndarray,
                      controls: np.ndarray) -> np.ndarray:
    """Per-path running cost at one time node: averages over particles."""
    run = cost.running_state(states, mean)
    ctrl = cost.control_cost.values(controls) @ cost.channel_weights
    return (run + ctrl).mean(axis=1)


def terminal_cost_term(cost: CostSpec, states: np.ndarray, mean: np.ndarray) -> np.ndarray:
    return cost.terminal(states, mean).mean(axis=1)


def cost_of_pathbundle(cost: CostSpec, bundle: PathBundle) -> np.ndarray:
    """Per-path total cost: left-endpoint time quadrature plus terminal term.

    Works identically for particle bundles and block-function bundles (the
    block average over the uniform partition is the particle average).
    """
    dt = float(bundle.times[1] - bundle.times[0])
    total = np.zeros(bundle.paths)
    for k in range(bundle.steps):
        states = bundle.trajectories[:, k]
        mean = states.mean(axis=1)
        total += dt * running_cost_term(cost, states, mean, bundle.controls[:, k])
    states = bundle.trajectories[:, -1]
    total += terminal_cost_term(cost, states, states.mean(axis=1))
    return total

"""Controlled interacting-particle dynamics under common noise.

State equation for each particle, discretized by the exponential-Euler mild
scheme with the propagator applied after forcing:

    x_{k+1} = P(dt) @ (x_k + dt * (Ds x_k + Dm xbar_k + E a_k) + S dW_k)

where P(dt) is the cached matrix exponential of the transport generator,
Ds / Dm are the self and mean drift matrices, E injects controls, S injects
the common Brownian increment dW_k shared by all particles of a path, and
xbar_k is the ensemble mean.  The same stepping drives block-function lifts,
which is what makes the particle/lifted correspondence exact pathwise.

Noise is counter-based: `gaussian_increment` is a pure function of
(seed, path, step, coordinate), so results are independent of execution
order and worker count.  `MFCLAB_WORKERS` selects a thread pool over fixed
path chunks; it affects wall time only.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .measures import BlockFunction
from .spaces import GeneratorBundle

WORKER_ENV = "MFCLAB_WORKERS"
CHUNK_PATHS = 256
NOISE_STREAM = 0  # Philox key tag for path noise (atoms use a different tag)


class SimulationError(RuntimeError):
    """Raised when a simulation produces non-finite states."""


def gaussian_increment(seed: int, path_index: int, step_index: int, coordinate: int) -> float:
    """Standard normal draw, a pure function of its four indices.

    Each (seed, path, step, coordinate) owns a disjoint Philox counter block,
    so the value never depends on evaluation order; serial and parallel
    schedules agree exactly.  The Brownian increment of a step is
    sqrt(dt) times this value.
    """
    bits = np.random.Philox(key=[seed, NOISE_STREAM],
                            counter=[0, coordinate, step_index, path_index])
    return float(np.random.Generator(bits).standard_normal())


def noise_tensor(seed: int, paths: int, steps: int, coords: int) -> np.ndarray:
    """All standard-normal draws for a run, shape (paths, steps, coords)."""
    out = np.empty((paths, steps, coords))
    for p in range(paths):
        for k in range(steps):
            for c in range(coords):
                out[p, k, c] = gaussian_increment(seed, p, k, c)
    return out


def worker_count() -> int:
    raw = os.environ.get(WORKER_ENV, "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise SimulationError(f"{WORKER_ENV} must be an integer, got {raw!r}") from exc
    return max(1, value)


def _path_chunks(paths: int) -> list:
    return [slice(i, min(i + CHUNK_PATHS, paths)) for i in range(0, paths, CHUNK_PATHS)]


def map_path_chunks(fn, paths: int) -> None:
    """Run fn(slice) over fixed path chunks, threaded when workers > 1.

    Chunk boundaries do not depend on the worker count and fn writes to
    disjoint slices, so results are identical for any worker count.
    """
    chunks = _path_chunks(paths)
    workers = worker_count()
    if workers == 1 or len(chunks) == 1:
        for sl in chunks:
            fn(sl)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(fn, chunks))


# ---------------------------------------------------------------------------
# system and run descriptions


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Drift, control and noise maps over a generator bundle.

    cone is "nonneg" (componentwise [0, inf)) or "free"; policies are trusted
    to respect it, the Hamiltonian minimizers enforce it.
    """

    bundle: GeneratorBundle
    drift_state: np.ndarray   # (dim, dim), applied to the particle's own state
    drift_mean: np.ndarray    # (dim, dim), applied to the ensemble mean
    control_map: np.ndarray   # (dim, k_ctrl)
    noise_map: np.ndarray     # (dim, k_noise)
    cone: str = "nonneg"

    @property
    def space(self):
        return self.bundle.space

    @property
    def dim(self) -> int:
        return self.bundle.space.dim

    @property
    def k_ctrl(self) -> int:
        return self.control_map.shape[1]

    @property
    def k_noise(self) -> int:
        return self.noise_map.shape[1]


@dataclass(frozen=True, eq=False)
class SimConfig:
    t0: float
    horizon: float
    steps: int
    paths: int
    seed: int

    def __post_init__(self):
        if self.horizon <= self.t0:
            raise ValueError(f"horizon {self.horizon} must exceed t0 {self.t0}")
        if self.steps < 1 or self.paths < 1:
            raise ValueError("steps and paths must be positive")

    @property
    def dt(self) -> float:
        return (self.horizon - self.t0) / self.steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.steps + 1) * self.dt


@dataclass(frozen=True, eq=False)
class PathBundle:
    """Recorded trajectories of one simulation.

    kind is "particles" or "blocks"; under the block lift the particle axis
    indexes blocks of the uniform partition instead of particles.
    increments store the scaled Brownian increments sqrt(dt) * g actually
    applied to the paths.
    """

    kind: str
    times: np.ndarray         # (steps+1,)
    trajectories: np.ndarray  # (paths, steps+1, n, dim)
    controls: np.ndarray      # (paths, steps, n, k_ctrl)
    increments: np.ndarray    # (paths, steps, k_noise)

    @property
    def paths(self) -> int:
        return self.trajectories.shape[0]

    @property
    def steps(self) -> int:
        return self.trajectories.shape[1] - 1

    @property
    def n(self) -> int:
        return self.trajectories.shape[2]


# ---------------------------------------------------------------------------
# exponential-Euler stepping


def advance(system: SystemSpec, states: np.ndarray, mean: np.ndarray,
            controls: np.ndarray, dw: np.ndarray, prop: np.ndarray, dt: float) -> np.ndarray:
    """One mild-scheme step for a batch: states (B, n, dim), dw (B, k_noise)."""
    drift = (states @ system.drift_state.T
             + mean[:, None, :] @ system.drift_mean.T
             + controls @ system.control_map.T)
    forced = states + dt * drift
    forced = forced + (dw @ system.noise_map.T)[:, None, :]
    return forced @ prop.T


def _check_finite(states: np.ndarray, step: int, sl: slice) -> None:
    ok = np.isfinite(states).all(axis=(1, 2))
    if not ok.all():
        bad = sl.start + int(np.argmin(ok))
        raise SimulationError(f"non-finite state on path {bad} after step {step}")


def _simulate(system: SystemSpec, policy, x0: np.ndarray, cfg: SimConfig,
              noise: np.ndarray | None, kind: str) -> PathBundle:
    x0 = np.asarray(x0, dtype=float)
    n, dim = x0.shape
    if dim != system.dim:
        raise ValueError(f"state dim {dim} does not match system dim {system.dim}")
    if noise is None:
        noise = noise_tensor(cfg.seed, cfg.paths, cfg.steps, system.k_noise)
    dt = cfg.dt
    dw = noise * np.sqrt(dt)
    prop = system.bundle.propagator(dt)
    times = cfg.times

    traj = np.empty((cfg.paths, cfg.steps + 1, n, dim))
    ctrl = np.empty((cfg.paths, cfg.steps, n, system.k_ctrl))

    def run(sl: slice) -> None:
        states = np.repeat(x0[None, :, :], sl.stop - sl.start, axis=0)
        traj[sl, 0] = states
        for k in range(cfg.steps):
            mean = states.mean(axis=1)
            a = np.asarray(policy.controls_at(k, float(times[k]), states, mean), dtype=float)
            ctrl[sl, k] = a
            states = advance(system, states, mean, a, dw[sl, k], prop, dt)
            _check_finite(states, k, sl)
            traj[sl, k + 1] = states

    map_path_chunks(run, cfg.paths)
    return PathBundle(kind=kind, times=times, trajectories=traj, controls=ctrl, increments=dw)


def simulate_particles(system: SystemSpec, policy, x0: np.ndarray, cfg: SimConfig,
                       noise: np.ndarray | None = None) -> PathBundle:
    """Simulate an n-particle ensemble under common noise.

    Parameters
    ----------
    system : SystemSpec
    policy : policy object (see policies module)
    x0 : ndarray (n, dim)
        Initial particle states, shared by all paths.
    cfg : SimConfig
    noise : ndarray (paths, steps, k_noise), optional
        Standard-normal draws; generated from cfg.seed when omitted.
        Passing the same tensor to different simulators couples them
        pathwise (common random numbers).
    """
    return _simulate(system, policy, x0, cfg, noise, kind="particles")


def simulate_lifted(system: SystemSpec, policy, block0: BlockFunction, cfg: SimConfig,
                    noise: np.ndarray | None = None) -> PathBundle:
    """Simulate the lifted block-function dynamics on the uniform partition.

    The lifted drift evaluates the particle drift blockwise against the
    pushforward measure of the current block function; since that measure's
    atoms are exactly the block values, the stepping coincides with the
    particle scheme applied to the block rows, and the returned bundle's
    trajectories are the block values along each path.
    """
    return _simulate(system, policy, block0.values, cfg, noise, kind="blocks")


# ---------------------------------------------------------------------------
# direct scalar delay simulation (reformulation cross-check)


def _delay_lookup_tables(space, cfg: SimConfig):
    """Static interpolation tables for evaluating paths at delayed times.

    For each step k and history node j the delayed time t_k + grid[j] falls
    either in the initial-history window (interpolate on the history grid) or
    on the step timeline (interpolate between step nodes filled so far).
    """
    m = space.grid.size
    h = space.mesh
    dt = cfg.dt
    tables = []
    for k in range(cfg.steps):
        from_hist = np.empty(m, dtype=bool)
        idx = np.empty(m, dtype=np.int64)
        frac = np.empty(m)
        for j in range(m):
            tau = k * dt + space.grid[j]
            if tau <= 0.0:
                u = (tau - space.grid[0]) / h
                i = min(max(int(np.floor(u)), 0), m - 2)
                from_hist[j] = True
                idx[j] = i
                frac[j] = u - i
            else:
                s = tau / dt
                i = min(max(int(np.floor(s + 1e-12)), 0), k - 1)
                from_hist[j] = False
                idx[j] = i
                frac[j] = s - i
        tables.append((from_hist, idx, frac))
    return tables


def simulate_sdde_direct(space, coeffs: dict, policy, x0: np.ndarray, cfg: SimConfig,
                         noise: np.ndarray | None = None) -> np.ndarray:
    """Euler-Maruyama on the scalar delay equation, without the abstract lift.

    coeffs holds the scalar model data: b0, c0, e0, sigma0 and the grid
    profiles eta1, chi1 (memory kernels, evaluated on space.grid).  The delay
    integrals are trapezoidal quadrature over the stored past, linearly
    interpolated in time.  x0 is the abstract initial state (n, 1 + m): head
    plus history segment.  Returns head paths of shape (paths, steps+1, n).

    Uses the same noise stream convention as the abstract simulator, so the
    two can be coupled pathwise for the reformulation cross-check.  Policies
    see head-only pseudo-states of shape (batch, n, 1).
    """
    m = space.grid.size
    heads0 = np.asarray(x0, dtype=float)[:, 0]
    hist = np.asarray(x0, dtype=float)[:, 1:]
    n = heads0.size
    if noise is None:
        noise = noise_tensor(cfg.seed, cfg.paths, cfg.steps, 1)
    dt = cfg.dt
    dw = noise[:, :, 0] * np.sqrt(dt)
    kernel_self = space.weights * coeffs["eta1"]
    kernel_mean = space.weights * coeffs["chi1"]
    tables = _delay_lookup_tables(space, cfg)
    times = cfg.times

    out = np.empty((cfg.paths, cfg.steps + 1, n))

    def run(sl: slice) -> None:
        batch = sl.stop - sl.start
        y = np.repeat(heads0[None, :], batch, axis=0)  # (B, n)
        paths_y = np.empty((batch, cfg.steps + 1, n))
        paths_y[:, 0] = y
        for k in range(cfg.steps):
            from_hist, idx, frac = tables[k]
            delayed = np.empty((batch, n, m))
            if from_hist.any():
                ih = idx[from_hist]
                fh = frac[from_hist]
                vals = hist[:, ih] * (1.0 - fh) + hist[:, ih + 1] * fh  # (n, mh)
                delayed[:, :, from_hist] = vals[None, :, :]
            if (~from_hist).any():
                ip = idx[~from_hist]
                fp = frac[~from_hist]
                lo = paths_y[:, ip, :]      # (B, mp, n)
                hi = paths_y[:, ip + 1, :]
                vals = lo * (1.0 - fp)[None, :, None] + hi * fp[None, :, None]
                delayed[:, :, ~from_hist] = np.swapaxes(vals, 1, 2)
            ybar = y.mean(axis=1)
            mem_self = delayed @ kernel_self                    # (B, n)
            mem_mean = delayed.mean(axis=1) @ kernel_mean       # (B,)
            a = np.asarray(policy.controls_at(k, float(times[k]), y[:, :, None], ybar[:, None]),
                           dtype=float)[:, :, 0]
            y = (y + dt * (coeffs["b0"] * y + coeffs["c0"] * ybar[:, None]
                           + mem_self + mem_mean[:, None] + coeffs["e0"] * a)
                 + coeffs["sigma0"] * dw[sl, k][:, None])
            if not np.all(np.isfinite(y)):
                bad = sl.start + int(np.argmin(np.isfinite(y).all(axis=1)))
                raise SimulationError(f"non-finite head on path {bad} after step {k}")
            paths_y[:, k + 1] = y
        out[sl] = paths_y

    map_path_chunks(run, cfg.paths)
    return out

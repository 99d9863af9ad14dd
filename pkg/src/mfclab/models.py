"""Concrete controlled models on the two discretized spaces.

Advertising / goodwill-with-memory: scalar head (goodwill level) plus a
history segment; scalar nonnegative control injected into the head; rank-one
common noise on the head; memory kernels couple the own history and the
ensemble-mean history back into the head drift.  The +1 in the head entry of
the self-drift compensates the structural unit decay of the transport
generator, so the effective own-state rate is b0.

Vintage capital: age profile of capital with depreciation; distributed
nonnegative investment control (one channel per age node); the ensemble mean
depresses the drift (aggregate-supply effect); common noise on the first few
age nodes.  Rewards are read through a fixed age-weighting profile that
vanishes at the terminal age, which keeps its dual-norm pairing constant
finite and computable.

Benchmark costs are affine in the state (plus quadratic control cost), which
is what the adjoint oracle requires; the convex variant adds a quadratic
state term for the regularity probes.
"""

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import SystemSpec
from .hamiltonian import CostSpec, QuadraticControlCost
from .measures import AtomLaw
from .spaces import (GeneratorBundle, SpaceSpec, assemble_generator,
                     build_delay_space, build_vintage_space, dual_norm, inner,
                     pairing_constant)


class ValidationError(ValueError):
    """Raised when model parameters violate a structural assumption."""


@dataclass(frozen=True)
class AdvertisingParams:
    own_rate: float = -0.5        # b0 <= 0
    mean_rate: float = -0.1       # c0 <= 0
    injection: float = 1.0        # e0 >= 0
    noise_level: float = 0.2      # sigma0 > 0
    memory_span: float = 1.0      # d > 0
    nodes: int = 41
    own_kernel_scale: float = -0.3   # <= 0, kernel vanishes at -d
    mean_kernel_scale: float = -0.1  # <= 0
    run_own: float = 1.0          # running reward coefficient on own head
    run_mean: float = 0.5         # running reward coefficient on mean head
    end_own: float = 1.0          # terminal reward coefficient on own head
    end_mean: float = 0.5         # terminal reward coefficient on mean head

    def validate(self) -> None:
        checks = [
            (self.own_rate <= 0.0, f"own_rate must be <= 0, got {self.own_rate}"),
            (self.mean_rate <= 0.0, f"mean_rate must be <= 0, got {self.mean_rate}"),
            (self.injection >= 0.0, f"injection must be >= 0, got {self.injection}"),
            (self.noise_level > 0.0, f"noise_level must be > 0, got {self.noise_level}"),
            (self.memory_span > 0.0, f"memory_span must be > 0, got {self.memory_span}"),
            (self.nodes >= 2, f"nodes must be >= 2, got {self.nodes}"),
            (self.own_kernel_scale <= 0.0, f"own_kernel_scale must be <= 0, got {self.own_kernel_scale}"),
            (self.mean_kernel_scale <= 0.0, f"mean_kernel_scale must be <= 0, got {self.mean_kernel_scale}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValidationError(msg)


@dataclass(frozen=True)
class VintageParams:
    age_span: float = 2.0         # > 0
    nodes: int = 41
    decay: float = 0.1            # depreciation, > 0
    mean_decay: float = 0.05      # aggregate drag on the drift, > 0
    noise_rank: int = 3           # common noise on the first noise_rank nodes
    noise_level: float = 0.1      # >= 0 per node
    weighting_scale: float = 0.5  # >= 0, reward weighting, vanishes at age_span
    run_scale: float = 1.0        # running reward coefficient
    end_scale: float = 1.0        # terminal reward coefficient

    def validate(self) -> None:
        checks = [
            (self.age_span > 0.0, f"age_span must be > 0, got {self.age_span}"),
            (self.nodes >= 2, f"nodes must be >= 2, got {self.nodes}"),
            (self.decay > 0.0, f"decay must be > 0, got {self.decay}"),
            (self.mean_decay > 0.0, f"mean_decay must be > 0, got {self.mean_decay}"),
            (1 <= self.noise_rank <= self.nodes, f"noise_rank must lie in [1, {self.nodes}], got {self.noise_rank}"),
            (self.noise_level >= 0.0, f"noise_level must be >= 0, got {self.noise_level}"),
            (self.weighting_scale >= 0.0, f"weighting_scale must be >= 0, got {self.weighting_scale}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValidationError(msg)


@dataclass(frozen=True, eq=False)
class Model:
    """A built model: space, generator, system, benchmark cost and helpers."""

    kind: str
    params: object
    space: SpaceSpec
    bundle: GeneratorBundle
    system: SystemSpec
    cost: CostSpec
    run_vec: np.ndarray        # W-gradient of the aggregate running state cost
    term_vec: np.ndarray       # W-gradient of the aggregate terminal cost
    mixture_base: np.ndarray   # (2, dim) profiles for two-component mixtures
    functionals: dict          # named linear functionals for inequality checks
    sdde_coeffs: dict | None   # scalar-delay coefficients (advertising only)


def build_advertising(params: AdvertisingParams = AdvertisingParams()) -> Model:
    """Assemble the goodwill-with-memory model from validated parameters."""
    params.validate()
    space = build_delay_space(params.memory_span, params.nodes)
    bundle = assemble_generator(space)
    dim = space.dim
    w = space.weights
    xi = space.grid

    own_kernel = params.own_kernel_scale * (1.0 + xi / params.memory_span)
    mean_kernel = params.mean_kernel_scale * (1.0 + xi / params.memory_span)

    drift_state = np.zeros((dim, dim))
    drift_state[0, 0] = params.own_rate + 1.0  # +1 cancels the generator's unit head decay
    drift_state[0, 1:] = w * own_kernel
    drift_mean = np.zeros((dim, dim))
    drift_mean[0, 0] = params.mean_rate
    drift_mean[0, 1:] = w * mean_kernel

    control_map = np.zeros((dim, 1))
    control_map[0, 0] = params.injection
    noise_map = np.zeros((dim, 1))
    noise_map[0, 0] = params.noise_level

    system = SystemSpec(bundle=bundle, drift_state=drift_state, drift_mean=drift_mean,
                        control_map=control_map, noise_map=noise_map, cone="nonneg")

    a, b = params.run_own, params.run_mean
    g, d = params.end_own, params.end_mean

    def running_state(states, mean):
        return -(a * states[..., 0] + b * mean[:, None, 0])

    def terminal(states, mean):
        return -(g * states[..., 0] + d * mean[:, None, 0])

    cost = CostSpec(running_state=running_state, control_cost=QuadraticControlCost(1.0),
                    terminal=terminal, cone="nonneg", channel_weights=np.ones(1))

    head = np.zeros(dim)
    head[0] = 1.0
    own_fn = np.concatenate([[0.0], own_kernel])
    mean_fn = np.concatenate([[0.0], mean_kernel])

    hi = np.concatenate([[1.0], np.full(space.grid.size, 1.0)])
    lo = np.concatenate([[-0.5], np.full(space.grid.size, -0.5)])

    return Model(
        kind="advertising",
        params=params,
        space=space,
        bundle=bundle,
        system=system,
        cost=cost,
        run_vec=-(a + b) * head,
        term_vec=-(g + d) * head,
        mixture_base=np.stack([hi, lo]),
        functionals={"head": head, "own_kernel": own_fn, "mean_kernel": mean_fn},
        sdde_coeffs={
            "b0": params.own_rate,
            "c0": params.mean_rate,
            "e0": params.injection,
            "sigma0": params.noise_level,
            "eta1": own_kernel,
            "chi1": mean_kernel,
        },
    )


def build_vintage(params: VintageParams = VintageParams()) -> Model:
    """Assemble the vintage-capital model from validated parameters."""
    params.validate()
    space = build_vintage_space(params.age_span, params.nodes)
    bundle = assemble_generator(space, decay=params.decay)
    dim = space.dim
    w = space.weights
    theta = space.grid

    drift_state = np.zeros((dim, dim))
    drift_mean = -params.mean_decay * np.eye(dim)
    control_map = np.eye(dim)  # distributed investment, one channel per age node
    noise_map = np.zeros((dim, params.noise_rank))
    for j in range(params.noise_rank):
        noise_map[j, j] = params.noise_level

    system = SystemSpec(bundle=bundle, drift_state=drift_state, drift_mean=drift_mean,
                        control_map=control_map, noise_map=noise_map, cone="nonneg")

    weighting = params.weighting_scale * (1.0 - theta / params.age_span)
    read = w * weighting  # <weighting, x>_W as a plain dot product
    a, g = params.run_scale, params.end_scale

    def running_state(states, mean):
        return -a * (states @ read)

    def terminal(states, mean):
        return -g * (states @ read)

    cost = CostSpec(running_state=running_state, control_cost=QuadraticControlCost(1.0),
                    terminal=terminal, cone="nonneg", channel_weights=w.copy())

    amp = np.pi * theta / params.age_span
    hi = 1.0 * np.sin(amp)
    lo = 0.4 * np.sin(2.0 * amp)

    return Model(
        kind="vintage",
        params=params,
        space=space,
        bundle=bundle,
        system=system,
        cost=cost,
        run_vec=-a * weighting,
        term_vec=-g * weighting,
        mixture_base=np.stack([hi, lo]),
        functionals={"weighting": weighting},
        sdde_coeffs=None,
    )


def build_model(kind: str, params=None) -> Model:
    if kind == "advertising":
        return build_advertising(params or AdvertisingParams())
    if kind == "vintage":
        return build_vintage(params or VintageParams())
    raise ValidationError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# laws and cost variants


def point_law(model: Model, level: float = 1.0) -> AtomLaw:
    """Point mass at a compatible constant-level state."""
    if model.kind == "advertising":
        base = level * np.ones(model.space.dim)
    else:
        base = level * np.sin(np.pi * model.space.grid / model.space.span)
    return AtomLaw(kind="point", base=base[None, :])


def smooth_law(model: Model, head_mean: float = 1.0, head_std: float = 0.3,
               amplitude: float = 0.2, modes: int = 3) -> AtomLaw:
    return AtomLaw(kind="smooth", head_mean=head_mean, head_std=head_std,
                   amplitude=amplitude, modes=modes)


def mixture_law(model: Model, weight: float = 0.7) -> AtomLaw:
    """Two-profile mixture with proportional (nested) atom allocation."""
    if not 0.0 < weight < 1.0:
        raise ValidationError(f"mixture weight must lie in (0, 1), got {weight}")
    return AtomLaw(kind="mixture", base=model.mixture_base.copy(),
                   weights=np.array([weight, 1.0 - weight]))


def convex_variant_cost(model: Model, kappa: float = 0.4) -> CostSpec:
    """Benchmark cost plus a quadratic penalty on the ensemble mean.

    The penalty acts on the aggregate (mean head level, or weighted mean
    output), so the running cost is strictly convex along flat interpolation
    of ensembles while the benchmark stays affine.
    """
    base = model.cost
    if model.kind == "advertising":
        def running_state(states, mean, _inner=base.running_state):
            extra = kappa * mean[:, 0] ** 2
            return _inner(states, mean) + extra[:, None]
    else:
        read = model.space.weights * model.functionals["weighting"]

        def running_state(states, mean, _inner=base.running_state):
            extra = kappa * (mean @ read) ** 2
            return _inner(states, mean) + extra[:, None]
    return replace(base, running_state=running_state)


def inequality_report(model: Model, samples: int = 100, seed: int = 7) -> list:
    """Check |<functional, x>| <= C * |x|_{-1} with C computed, not assumed.

    C is the weighted norm of adjoint(generator) applied to the functional.
    Returns one row per named functional with the computed constant and the
    worst sampled ratio.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for name, vec in model.functionals.items():
        constant = pairing_constant(model.bundle, vec)
        worst = 0.0
        for _ in range(samples):
            x = rng.standard_normal(model.space.dim)
            value = abs(float(inner(model.space, vec, x)))
            dual = float(dual_norm(model.bundle, x))
            worst = max(worst, value / dual)
        rows.append({
            "functional": name,
            "constant": constant,
            "max_ratio": worst,
            "ok": worst <= constant * (1.0 + 1e-9),
        })
    return rows

"""Empirical measures on the state space and their block-function lifts.

An ensemble of n particle states is identified with two equivalent objects:
the empirical measure with equal atom weights 1/n, and the block function on
(0, 1) that takes value x_i on ((i-1)/n, i/n).  Pushing a block function
forward by Lebesgue measure recovers the empirical measure, and averaging a
finer block function over a coarser partition projects it back onto block
form.  All metric quantities come in a strong flavor (weighted norm) and a
dual flavor (negative-order norm through the generator inverse).
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .spaces import GeneratorBundle, SpaceSpec, norm

ATOM_STREAM = 1  # Philox key tag separating atom draws from path noise


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Equal-weight empirical measure with atoms stacked as rows."""

    atoms: np.ndarray  # (n, dim)

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def mean_vector(self) -> np.ndarray:
        return self.atoms.mean(axis=0)


@dataclass(frozen=True, eq=False)
class BlockFunction:
    """Piecewise-constant function on (0,1): value i on ((i-1)/n, i/n)."""

    values: np.ndarray  # (n, dim)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def lift(atoms: np.ndarray) -> BlockFunction:
    """Lift an ensemble to the block function over the uniform partition."""
    return BlockFunction(values=np.array(atoms, dtype=float))


def pushforward(block: BlockFunction) -> EmpiricalMeasure:
    """Image measure of Lebesgue measure under a block function.

    Atom order follows block order; equal blocks stay distinct atoms.
    """
    return EmpiricalMeasure(atoms=block.values)


def block_average(block: BlockFunction, n: int) -> BlockFunction:
    """Project onto the coarser n-block partition by averaging within blocks."""
    kn = block.n
    if kn % n != 0:
        raise ValueError(f"cannot average {kn} blocks onto {n} blocks")
    vals = block.values.reshape(n, kn // n, -1).mean(axis=1)
    return BlockFunction(values=vals)


# ---------------------------------------------------------------------------
# ensemble norms and moments


def ensemble_norm(space: SpaceSpec, atoms: np.ndarray, r: float = 2.0) -> float:
    """|x|_r = ((1/n) sum |x_i|^r)^(1/r) in the weighted norm.

    For r = 2 this equals the L2((0,1); H) norm of the lifted block function.
    """
    vals = norm(space, atoms)
    return float(np.mean(vals**r) ** (1.0 / r))


def ensemble_dual_norm(bundle: GeneratorBundle, atoms: np.ndarray, r: float = 2.0) -> float:
    return ensemble_norm(bundle.space, atoms @ bundle.generator_inv.T, r)


def moment(bundle: GeneratorBundle, measure: EmpiricalMeasure, r: float = 2.0,
           metric: str = "strong") -> float:
    """r-th moment of the measure in the strong or dual metric."""
    if metric == "strong":
        return ensemble_norm(bundle.space, measure.atoms, r)
    if metric == "dual":
        return ensemble_dual_norm(bundle, measure.atoms, r)
    raise ValueError(f"unknown metric {metric!r}")


# ---------------------------------------------------------------------------
# transport distance


def wasserstein(bundle: GeneratorBundle, mu: EmpiricalMeasure, nu: EmpiricalMeasure,
                r: float = 2.0, metric: str = "strong") -> float:
    """Order-r transport distance between equal-size empirical measures.

    Solved as an optimal assignment over atom pairings (the measures have
    equal atom weights, so an optimal coupling is a permutation):
    d_r = min_sigma ((1/n) sum |x_i - y_sigma(i)|^r)^(1/r).

    The pairwise ground metric is the weighted norm ("strong") or the
    negative-order norm through the generator inverse ("dual").
    """
    if mu.n != nu.n:
        raise ValueError(f"atom counts differ: {mu.n} vs {nu.n}")
    if not 1.0 <= r <= 2.0:
        raise ValueError(f"exponent r must lie in [1, 2], got {r}")
    a, b = mu.atoms, nu.atoms
    if metric == "dual":
        a = a @ bundle.generator_inv.T
        b = b @ bundle.generator_inv.T
    elif metric != "strong":
        raise ValueError(f"unknown metric {metric!r}")
    s = np.sqrt(bundle.space.state_weights)
    if r == 2.0:
        cost = cdist(a * s, b * s, "sqeuclidean")
    else:
        cost = cdist(a * s, b * s, "euclidean") ** r
    rows, cols = linear_sum_assignment(cost)
    return float((cost[rows, cols].sum() / mu.n) ** (1.0 / r))


# ---------------------------------------------------------------------------
# atom sampling


@dataclass(frozen=True, eq=False)
class AtomLaw:
    """Sampling recipe for initial ensembles.

    kind = "point":   every atom equals `base[0]`.
    kind = "smooth":  per-atom random head and smooth random profile; atom i
                      depends only on (seed, i), so ensembles of increasing n
                      are nested.
    kind = "mixture": two fixed profiles `base[0]`, `base[1]` allocated
                      proportionally to `weights` (atom i takes component 0
                      iff round((i+1) w) > round(i w)); nested by construction.
    """

    kind: str
    base: np.ndarray | None = None      # (1, dim) or (2, dim)
    weights: np.ndarray | None = None   # (2,) for mixture
    head_mean: float = 0.0
    head_std: float = 0.3
    amplitude: float = 0.2
    modes: int = 3


def _atom_generator(seed: int, index: int) -> np.random.Generator:
    bits = np.random.Philox(key=[seed, ATOM_STREAM], counter=[0, 0, 0, index])
    return np.random.Generator(bits)


def _smooth_atom(space: SpaceSpec, law: AtomLaw, seed: int, index: int) -> np.ndarray:
    gen = _atom_generator(seed, index)
    level = law.head_mean + law.head_std * gen.standard_normal()
    coeff = gen.standard_normal(law.modes) / (1.0 + np.arange(law.modes))
    # sine modes vanish at both grid ends, so the atoms satisfy the boundary
    # compatibility of either space (history value at 0 equals the head;
    # vintage profile vanishes at the inflow end)
    phase = np.pi * (space.grid - space.grid[0]) / space.span
    wiggle = law.amplitude * (coeff[:, None] * np.sin(np.outer(np.arange(1, law.modes + 1), phase))).sum(axis=0)
    if space.kind == "delay":
        return np.concatenate([[level], level + wiggle])
    return level * np.sin(0.5 * phase) + wiggle


def sample_atoms(space: SpaceSpec, law: AtomLaw, n: int, seed: int) -> np.ndarray:
    """Draw n atoms; atoms for smaller n are a prefix of atoms for larger n."""
    if n < 1:
        raise ValueError(f"need at least one atom, got {n}")
    if law.kind == "point":
        return np.tile(law.base[0], (n, 1)).astype(float)
    if law.kind == "smooth":
        return np.stack([_smooth_atom(space, law, seed, i) for i in range(n)])
    if law.kind == "mixture":
        if law.base is None or law.base.shape[0] != 2 or law.weights is None:
            raise ValueError("mixture law needs exactly two base profiles and weights")
        w = float(law.weights[0])
        first = np.array([round((i + 1) * w) > round(i * w) for i in range(n)])
        return np.where(first[:, None], law.base[0][None, :], law.base[1][None, :]).astype(float)
    raise ValueError(f"unknown law kind {law.kind!r}")

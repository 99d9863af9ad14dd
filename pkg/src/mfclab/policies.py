"""Control policies.

A policy maps (step index, time, particle states, ensemble mean) to one
control vector per particle.  All policies are vectorized over a leading
batch axis of independent paths: `states` has shape (batch, n, dim), `mean`
has shape (batch, dim) and the returned controls have shape
(batch, n, k_ctrl).  Under the block-function lift the same object drives
the lifted dynamics blockwise, which is what makes the particle/lifted
correspondence an identity at the code level.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ConstantPolicy:
    """One fixed control vector applied to every particle at every step."""

    value: np.ndarray  # (k_ctrl,)

    def controls_at(self, step: int, t: float, states: np.ndarray, mean: np.ndarray) -> np.ndarray:
        batch, n = states.shape[0], states.shape[1]
        return np.broadcast_to(self.value, (batch, n, self.value.size))


@dataclass(frozen=True, eq=False)
class OpenLoopPolicy:
    """Deterministic step-indexed controls, shared or per particle.

    `values` has shape (steps, k_ctrl) (shared across particles) or
    (n, steps, k_ctrl) (one schedule per particle).
    """

    values: np.ndarray

    def controls_at(self, step: int, t: float, states: np.ndarray, mean: np.ndarray) -> np.ndarray:
        batch, n = states.shape[0], states.shape[1]
        if self.values.ndim == 2:
            row = self.values[step]
            return np.broadcast_to(row, (batch, n, row.size))
        col = self.values[:, step, :]  # (n, k)
        return np.broadcast_to(col, (batch, n, col.shape[-1]))


@dataclass(frozen=True, eq=False)
class FeedbackPolicy:
    """State feedback through a vectorized callable.

    `fn(t, states, mean) -> (batch, n, k_ctrl)`; the callable is responsible
    for returning controls inside the admissible cone.
    """

    fn: object

    def controls_at(self, step: int, t: float, states: np.ndarray, mean: np.ndarray) -> np.ndarray:
        return self.fn(t, states, mean)


@dataclass(frozen=True, eq=False)
class CostateFeedback:
    """Feedback law driven by a precomputed deterministic co-state path.

    On the scalar-channel benchmark the per-particle optimal control is
    gain * injection * max(-costate_head, 0) evaluated at the left endpoint
    of each step; `gain = 1` is the optimal law and other gains give
    deliberately detuned variants.
    """

    costate_heads: np.ndarray  # (steps,) head component at left endpoints
    injection: float           # scalar control injection strength (>= 0)
    gain: float = 1.0

    def controls_at(self, step: int, t: float, states: np.ndarray, mean: np.ndarray) -> np.ndarray:
        batch, n = states.shape[0], states.shape[1]
        a = self.gain * self.injection * max(-float(self.costate_heads[step]), 0.0)
        return np.full((batch, n, 1), a)


@dataclass(frozen=True, eq=False)
class CostateFieldFeedback:
    """Nodewise feedback for distributed control: q_j = gain * max(-p_j, 0)."""

    costates: np.ndarray  # (steps, dim) co-state at left endpoints
    gain: float = 1.0

    def controls_at(self, step: int, t: float, states: np.ndarray, mean: np.ndarray) -> np.ndarray:
        batch, n = states.shape[0], states.shape[1]
        q = self.gain * np.maximum(-self.costates[step], 0.0)
        return np.broadcast_to(q, (batch, n, q.size))

"""Feedback policy evaluators shared by the design modules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .linsys import TimeGrid, interp_samples


class FeedbackPolicy:
    """Evaluation contract (t, x) -> u plus metadata (mode, eps).

    Policies are read-only once built.  ``batch`` evaluates a whole
    ensemble at one time; ``mean_path`` is the designed population mean
    trajectory (used by the mean-field simulation coupling).
    """

    mode: str = "none"
    eps: float = 0.0

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def batch(self, t: float, states: np.ndarray) -> np.ndarray:
        return np.stack([self(t, x) for x in states])

    def mean_path(self, t: float) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class AffinePolicy(FeedbackPolicy):
    """Time-varying affine law u(t, x) = -B' P(t) (x - y(t)) + B' m(t).

    P, y, m are interpolated linearly between grid nodes; evaluation
    outside the grid horizon is an error.
    """

    grid: TimeGrid
    pi: np.ndarray
    y: np.ndarray
    m: np.ndarray
    B: np.ndarray
    mode: str = "noncoop"
    eps: float = 1.0

    def _at(self, t: float):
        if not self.grid.covers(t, t):
            raise DomainError(f"time {t} outside policy horizon")
        P = interp_samples(self.grid, self.pi, t)
        yv = interp_samples(self.grid, self.y, t)
        mv = interp_samples(self.grid, self.m, t)
        return P, yv, mv

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        P, yv, mv = self._at(t)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.B.T @ (mv - P @ (x - yv))

    def batch(self, t: float, states: np.ndarray) -> np.ndarray:
        P, yv, mv = self._at(t)
        return (mv - (states - yv) @ P.T) @ self.B

    def bias(self, t: float) -> np.ndarray:
        """Input-space offset B'(P(t) y(t) + m(t)) of the affine law."""
        P, yv, mv = self._at(t)
        return self.B.T @ (P @ yv + mv)

    def mean_path(self, t: float) -> np.ndarray:
        return interp_samples(self.grid, self.y, t)


@dataclass(frozen=True)
class ConstantPolicy(FeedbackPolicy):
    """Time-invariant affine law u(x) = -B' P x + B' n."""

    pi: np.ndarray
    nvec: np.ndarray
    B: np.ndarray
    target_mean: np.ndarray = None
    mode: str = "stationary"
    eps: float = 1.0

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.B.T @ (self.nvec - self.pi @ x)

    def batch(self, t: float, states: np.ndarray) -> np.ndarray:
        return (self.nvec - states @ self.pi.T) @ self.B

    def mean_path(self, t: float) -> np.ndarray:
        if self.target_mean is None:
            raise DomainError("policy has no designed mean path")
        return self.target_mean


@dataclass(frozen=True)
class PerturbedPolicy(FeedbackPolicy):
    """Base policy plus a state-independent input offset v(t)."""

    base: FeedbackPolicy
    offset: object = None  # callable t -> (m_in,) array
    mode: str = "perturbed"
    eps: float = 0.0

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.base(t, x) + self.offset(t)

    def batch(self, t: float, states: np.ndarray) -> np.ndarray:
        return self.base.batch(t, states) + self.offset(t)

    def mean_path(self, t: float) -> np.ndarray:
        return self.base.mean_path(t)

"""Deterministic linear-systems kernel.

Transition matrices, the three controllability-type Gramians, dense
Lyapunov solves, symmetric matrix square roots and fixed-step RK4
integration.  Everything downstream (Gaussian steering, bridges,
particle simulation) is built on these primitives.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DivergenceError, DomainError, SingularityError

RCOND_SINGULAR = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [t0, t1] with ``steps`` intervals."""

    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise DomainError(f"need t0 < t1, got [{self.t0}, {self.t1}]")
        if self.steps < 1:
            raise DomainError("steps must be a positive integer")

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.steps + 1)

    def covers(self, s: float, t: float) -> bool:
        eps = 1e-12 * (1.0 + abs(self.t1 - self.t0))
        return self.t0 - eps <= s and t <= self.t1 + eps

    def locate(self, t: float) -> tuple[int, float]:
        """Index ``i`` and fraction ``theta`` with t = nodes[i] + theta*dt."""
        if not self.covers(t, t):
            raise DomainError(f"time {t} outside grid [{self.t0}, {self.t1}]")
        pos = (t - self.t0) / self.dt
        i = min(int(np.floor(pos)), self.steps - 1)
        i = max(i, 0)
        return i, pos - i


def interp_samples(grid: TimeGrid, samples: np.ndarray, t: float) -> np.ndarray:
    """Linear interpolation of per-node samples at time ``t``."""
    i, theta = grid.locate(t)
    if theta == 0.0:
        return samples[i]
    return (1.0 - theta) * samples[i] + theta * samples[i + 1]


@dataclass(frozen=True)
class SystemDynamics:
    """Shared model of the agent dynamics.

    ``A`` may be a constant (n, n) matrix or a (k, n, n) sequence sampled
    on a uniform grid covering [0, 1]; samples are interpolated linearly
    in between.  ``Abar`` is the interaction matrix, ``B`` the input
    matrix and ``eps`` the noise intensity (variance scale, >= 0).
    """

    A: np.ndarray
    Abar: np.ndarray
    B: np.ndarray
    eps: float = 1.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.ndim == 2:
            pass
        elif A.ndim != 3:
            raise DomainError("A must be (n, n) or a (k, n, n) sample sequence")
        object.__setattr__(self, "A", A)
        n = A.shape[-1]
        if A.shape[-2] != n:
            raise DomainError("A blocks must be square")
        if A.ndim == 3 and A.shape[0] < 2:
            raise DomainError("time-varying A needs at least two samples")
        Abar = np.atleast_2d(np.asarray(self.Abar, dtype=float))
        if Abar.shape != (n, n):
            raise DomainError(f"Abar must be {n}x{n}, got {Abar.shape}")
        object.__setattr__(self, "Abar", Abar)
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 0:
            B = B.reshape(1, 1)
        elif B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.shape[0] != n:
            raise DomainError(f"B must have {n} rows, got {B.shape}")
        object.__setattr__(self, "B", B)
        if not np.isfinite(self.eps) or self.eps < 0.0:
            raise DomainError("eps must be finite and >= 0")

    @property
    def n(self) -> int:
        return self.A.shape[-1]

    @property
    def m_in(self) -> int:
        return self.B.shape[1]

    @property
    def BBt(self) -> np.ndarray:
        return self.B @ self.B.T

    @property
    def time_varying(self) -> bool:
        return self.A.ndim == 3

    def a_at(self, t: float) -> np.ndarray:
        if not self.time_varying:
            return self.A
        k = self.A.shape[0]
        pos = np.clip(t, 0.0, 1.0) * (k - 1)
        i = min(int(np.floor(pos)), k - 2)
        theta = pos - i
        return (1.0 - theta) * self.A[i] + theta * self.A[i + 1]

    def with_eps(self, eps: float) -> "SystemDynamics":
        return SystemDynamics(self.A, self.Abar, self.B, eps)


@dataclass(frozen=True)
class TransitionData:
    """Joint samples of transition matrices and Gramians anchored at ``s``.

    ``phi[i]`` is the transition matrix from ``s`` to ``grid.nodes[i]`` for
    the drift matrix alone, ``phibar[i]`` for drift plus interaction;
    ``gram_M``/``gram_Mbar``/``gram_Mhat`` are the plain, mixed and
    interaction-shifted Gramians over the same intervals.  gram_M and
    gram_Mhat are exactly symmetric; gram_Mbar is whatever the mixed
    integrand produces.
    """

    grid: TimeGrid
    phi: np.ndarray
    phibar: np.ndarray
    gram_M: np.ndarray
    gram_Mbar: np.ndarray
    gram_Mhat: np.ndarray

    def gram(self, kind: str) -> np.ndarray:
        table = {"M": self.gram_M, "Mbar": self.gram_Mbar, "Mhat": self.gram_Mhat}
        try:
            return table[kind]
        except KeyError:
            raise DomainError(f"unknown Gramian kind {kind!r}") from None


def integrate_ode(field, x0, grid: TimeGrid) -> np.ndarray:
    """Classical fixed-step RK4 over ``grid``.

    ``field(t, x)`` may return any array shaped like ``x0``.  Returns the
    samples at every grid node, deterministically.  Raises
    DivergenceError as soon as a non-finite value appears.
    """
    x = np.array(x0, dtype=float)
    out = np.empty((grid.steps + 1,) + x.shape)
    out[0] = x
    h = grid.dt
    t = grid.t0
    for i in range(grid.steps):
        k1 = field(t, x)
        k2 = field(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = field(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = field(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = grid.t0 + (i + 1) * h
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite value at t={t:.6g}")
        out[i + 1] = x
    return out


def _subgrid(grid: TimeGrid, s: float, t: float) -> TimeGrid:
    if not grid.covers(s, t):
        raise DomainError(f"grid [{grid.t0}, {grid.t1}] does not cover [{s}, {t}]")
    frac = (t - s) / (grid.t1 - grid.t0)
    steps = max(1, int(round(grid.steps * frac)))
    return TimeGrid(s, t, steps)


def transition_data(dyn: SystemDynamics, s: float, t: float, grid: TimeGrid) -> TransitionData:
    """One joint RK4 pass for (phi, phibar, M, Mbar, Mhat) from ``s`` to ``t``.

    All five quantities share the integration grid, so downstream
    identities (cocycle, Gramian additivity) hold to integrator accuracy.
    """
    if t < s:
        raise DomainError(f"need s <= t, got s={s}, t={t}")
    n = dyn.n
    sub = _subgrid(grid, s, t)
    BBt = dyn.BBt
    Abar = dyn.Abar

    def field(tau, Y):
        A = dyn.a_at(tau)
        Ab = A + Abar
        d = np.empty_like(Y)
        d[0] = A @ Y[0]
        d[1] = Ab @ Y[1]
        d[2] = A @ Y[2] + Y[2] @ A.T + BBt
        d[3] = Ab @ Y[3] + Y[3] @ A.T + BBt
        d[4] = Ab @ Y[4] + Y[4] @ Ab.T + BBt
        return d

    Y0 = np.zeros((5, n, n))
    Y0[0] = np.eye(n)
    Y0[1] = np.eye(n)
    samples = integrate_ode(field, Y0, sub)
    gram_M = 0.5 * (samples[:, 2] + np.swapaxes(samples[:, 2], 1, 2))
    gram_Mhat = 0.5 * (samples[:, 4] + np.swapaxes(samples[:, 4], 1, 2))
    return TransitionData(
        grid=sub,
        phi=samples[:, 0],
        phibar=samples[:, 1],
        gram_M=gram_M,
        gram_Mbar=samples[:, 3],
        gram_Mhat=gram_Mhat,
    )


def transition_matrix(dyn: SystemDynamics, which: str, t: float, s: float, grid: TimeGrid) -> np.ndarray:
    """Transition matrix from ``s`` to ``t`` for the drift alone (``plain``)
    or the drift plus interaction (``bar``)."""
    if which not in ("plain", "bar"):
        raise DomainError(f"which must be 'plain' or 'bar', got {which!r}")
    if t < s:
        raise DomainError(f"need s <= t, got s={s}, t={t}")
    if t == s:
        if not grid.covers(s, t):
            raise DomainError(f"grid does not cover [{s}, {t}]")
        return np.eye(dyn.n)
    td = transition_data(dyn, s, t, grid)
    return td.phi[-1] if which == "plain" else td.phibar[-1]


def reciprocal_condition(mat: np.ndarray) -> float:
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[0] == 0.0:
        return 0.0
    return float(sv[-1] / sv[0])


def gramian(
    dyn: SystemDynamics,
    kind: str,
    t: float,
    s: float,
    grid: TimeGrid,
    require_invertible: bool = False,
) -> np.ndarray:
    """Gramian of ``kind`` in {M, Mbar, Mhat} over [s, t].

    With ``require_invertible`` the result is rejected when its reciprocal
    condition number falls below 1e-12.
    """
    if not s < t:
        raise DomainError(f"need s < t, got s={s}, t={t}")
    td = transition_data(dyn, s, t, grid)
    G = td.gram(kind)[-1]
    if require_invertible and reciprocal_condition(G) < RCOND_SINGULAR:
        raise SingularityError(f"Gramian {kind} over [{s}, {t}] is singular to tolerance")
    return G


def solve_lyapunov(F: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Solve F X + X F' + W = 0 for symmetric X (dense Bartels-Stewart).

    The residual is checked against 1e-10 * (1 + ||W||_F); a failure means
    the Sylvester operator is singular (eigenvalue pair summing to zero).
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if F.shape[0] != F.shape[1] or F.shape != W.shape:
        raise DomainError(f"shape mismatch: F {F.shape}, W {W.shape}")
    try:
        X = scipy.linalg.solve_continuous_lyapunov(F, -W)
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"Lyapunov operator is singular: {exc}") from exc
    X = 0.5 * (X + X.T)
    residual = np.linalg.norm(F @ X + X @ F.T + W, "fro")
    if not residual <= 1e-10 * (1.0 + np.linalg.norm(W, "fro")):
        raise SingularityError(
            f"Lyapunov solve residual {residual:.3e} exceeds tolerance; "
            "operator is near-singular"
        )
    return X


def sqrtm_spd(S: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Rejects inputs that are noticeably asymmetric or have an eigenvalue
    below -1e-12 * ||S||.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    scale = np.linalg.norm(S, 2) if S.size else 0.0
    if np.linalg.norm(S - S.T, "fro") > 1e-10 * (1.0 + scale):
        raise DomainError("matrix is not symmetric to tolerance")
    Ssym = 0.5 * (S + S.T)
    lam, U = np.linalg.eigh(Ssym)
    if lam.min(initial=0.0) < -1e-12 * max(scale, 1e-300):
        raise DomainError(f"matrix is indefinite (min eigenvalue {lam.min():.3e})")
    lam = np.clip(lam, 0.0, None)
    R = (U * np.sqrt(lam)) @ U.T
    return 0.5 * (R + R.T)


def spd_sqrt_and_inverse_sqrt(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(S^{1/2}, S^{-1/2}) for strictly positive definite S."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    Ssym = 0.5 * (S + S.T)
    lam, U = np.linalg.eigh(Ssym)
    if lam.min() <= 0.0:
        raise DomainError(f"matrix is not positive definite (min eigenvalue {lam.min():.3e})")
    root = (U * np.sqrt(lam)) @ U.T
    iroot = (U / np.sqrt(lam)) @ U.T
    return 0.5 * (root + root.T), 0.5 * (iroot + iroot.T)

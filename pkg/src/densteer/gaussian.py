"""Closed-form steering designs for Gaussian marginals in any dimension.

Builds the quadratic value-function matrix from its boundary formula,
propagates it, solves the mean-steering problem in both the
noncooperative and cooperative variants, and assembles terminal costs
and feedback laws.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import GaussianDensity
from .errors import ConvergenceError, DivergenceError, DomainError, SingularityError
from .linsys import (
    RCOND_SINGULAR,
    SystemDynamics,
    TimeGrid,
    TransitionData,
    interp_samples,
    reciprocal_condition,
    spd_sqrt_and_inverse_sqrt,
    sqrtm_spd,
    transition_data,
)
from .policy import AffinePolicy


@dataclass(frozen=True)
class RiccatiSolution:
    """Samples of the quadratic value matrix on the time grid."""

    grid: TimeGrid
    pi: np.ndarray

    def at(self, t: float) -> np.ndarray:
        return interp_samples(self.grid, self.pi, t)

    @property
    def pi0(self) -> np.ndarray:
        return self.pi[0]

    @property
    def pi1(self) -> np.ndarray:
        return self.pi[-1]

    def trace_integral(self, BBt: np.ndarray) -> np.ndarray:
        """Cumulative trapezoid of tr(BB' Pi(s)) over the grid nodes."""
        tr = np.einsum("ij,kji->k", BBt, self.pi)
        inner = 0.5 * self.grid.dt * (tr[1:] + tr[:-1])
        return np.concatenate([[0.0], np.cumsum(inner)])


@dataclass(frozen=True)
class MeanSteering:
    """Mean-shift data (m, y, gamma) for one game mode.

    ``m`` is the costate driving the mean, ``y`` the designed mean path
    (y(0) is the initial mean, y(1) lands on the target mean), ``gamma``
    the accumulated constant of the value function.
    """

    grid: TimeGrid
    mode: str
    m: np.ndarray
    y: np.ndarray
    gamma: np.ndarray
    dyn: SystemDynamics
    rho0: GaussianDensity
    rho1: GaussianDensity
    td: TransitionData
    gram10: np.ndarray

    def m_at(self, t: float) -> np.ndarray:
        return interp_samples(self.grid, self.m, t)

    def y_at(self, t: float) -> np.ndarray:
        return interp_samples(self.grid, self.y, t)

    def gamma_at(self, t: float) -> float:
        return float(interp_samples(self.grid, self.gamma, t))


@dataclass(frozen=True)
class TerminalCostSpec:
    """g(x, mu) = (x - center)' quad (x - center) + lin . x (+ constant).

    With ``fixed_center`` unset the center is the mean of the argument
    distribution; set, it freezes the dependence to a constant vector.
    """

    quad: np.ndarray
    lin: np.ndarray
    constant: float | None = None
    fixed_center: np.ndarray | None = None

    def evaluate(self, x, mu_mean=None) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        center = self.fixed_center
        if center is None:
            if mu_mean is None:
                raise DomainError("terminal cost needs the population mean")
            center = np.atleast_1d(np.asarray(mu_mean, dtype=float))
        z = x - center
        val = float(z @ self.quad @ z + self.lin @ x)
        if self.constant is not None:
            val += self.constant
        return val


def _solve_spd(mat: np.ndarray, rhs: np.ndarray, label: str) -> np.ndarray:
    if reciprocal_condition(mat) < RCOND_SINGULAR:
        raise SingularityError(f"{label} is singular to tolerance")
    return np.linalg.solve(mat, rhs)


def riccati_initial(
    rho0: GaussianDensity, rho1: GaussianDensity, dyn: SystemDynamics, grid: TimeGrid
) -> np.ndarray:
    """Boundary value of the quadratic value matrix.

    Evaluates, with S = Sigma0^{1/2}, Phi the horizon transition matrix
    and M the reachability Gramian,

        P(eps) = S^{-1} [ eps I/2 + S Phi' M^{-1} Phi S
                          - (eps^2 I/4 + S Phi' M^{-1} Sigma1 M^{-1} Phi S)^{1/2} ] S^{-1}

    eps is read from ``dyn``; eps = 0 gives the deterministic limit.
    """
    if rho0.n != dyn.n or rho1.n != dyn.n:
        raise DomainError("marginal dimension does not match the dynamics")
    td = transition_data(dyn, grid.t0, grid.t1, grid)
    phi10 = td.phi[-1]
    M10 = td.gram_M[-1]
    if reciprocal_condition(M10) < RCOND_SINGULAR:
        raise SingularityError("reachability Gramian is singular to tolerance")
    S, Sinv = spd_sqrt_and_inverse_sqrt(rho0.cov)
    eps = dyn.eps
    K = phi10 @ S
    MinvK = np.linalg.solve(M10, K)
    X = K.T @ MinvK
    X = 0.5 * (X + X.T)
    Y = MinvK.T @ rho1.cov @ MinvK
    Y = 0.5 * (Y + Y.T)
    n = dyn.n
    inner = sqrtm_spd(0.25 * eps * eps * np.eye(n) + Y)
    bracket = 0.5 * eps * np.eye(n) + X - inner
    P = Sinv @ bracket @ Sinv
    return 0.5 * (P + P.T)


def riccati_propagate(pi0: np.ndarray, dyn: SystemDynamics, grid: TimeGrid) -> RiccatiSolution:
    """RK4 propagation of dP/dt = -A'P - PA + P BB' P, symmetrized each step."""
    P = 0.5 * (np.atleast_2d(np.asarray(pi0, dtype=float)) + np.atleast_2d(np.asarray(pi0)).T)
    BBt = dyn.BBt
    out = np.empty((grid.steps + 1,) + P.shape)
    out[0] = P
    h = grid.dt

    def rhs(t, M):
        A = dyn.a_at(t)
        return -A.T @ M - M @ A + M @ BBt @ M

    for i in range(grid.steps):
        t = grid.t0 + i * h
        k1 = rhs(t, P)
        k2 = rhs(t + 0.5 * h, P + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, P + 0.5 * h * k2)
        k4 = rhs(t + h, P + h * k3)
        P = P + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        P = 0.5 * (P + P.T)
        if not np.all(np.isfinite(P)):
            raise DivergenceError(f"Riccati finite escape at t={t + h:.6g}")
        out[i + 1] = P
    return RiccatiSolution(grid=grid, pi=out)


def mean_steering(
    rho0: GaussianDensity,
    rho1: GaussianDensity,
    dyn: SystemDynamics,
    mode: str,
    grid: TimeGrid,
) -> MeanSteering:
    """Mean costate m(t), mean path y(t) and constant gamma(t).

    Noncooperative mode inverts the mixed Gramian; cooperative mode the
    interaction-shifted one.  The identities

        m(t) = Phi(t1, t)' G10^{-1} c        (plain or bar transition)
        y(t) = Phibar(t, t0) y0 + Gbar(t, t0) m(t)

    give node samples without interpolating m inside the integrator, so
    y(t1) hits the target mean to solver accuracy.
    """
    if mode not in ("noncoop", "coop"):
        raise DomainError(f"mode must be 'noncoop' or 'coop', got {mode!r}")
    if rho0.n != dyn.n or rho1.n != dyn.n:
        raise DomainError("marginal dimension does not match the dynamics")
    td = transition_data(dyn, grid.t0, grid.t1, grid)
    phibar10 = td.phibar[-1]
    c = rho1.mean - phibar10 @ rho0.mean
    if mode == "noncoop":
        G10 = td.gram_Mbar[-1]
        trans = td.phi
        carrier = td.gram_Mbar
        label = "mixed Gramian"
    else:
        G10 = td.gram_Mhat[-1]
        trans = td.phibar
        carrier = td.gram_Mhat
        label = "interaction Gramian"
    v = _solve_spd(G10, c, label)
    k = grid.steps + 1
    n = dyn.n
    m = np.empty((k, n))
    y = np.empty((k, n))
    endT = trans[-1].T @ v
    for i in range(k):
        m[i] = np.linalg.solve(trans[i].T, endT)
        y[i] = td.phibar[i] @ rho0.mean + carrier[i] @ m[i]
    BBt = dyn.BBt
    Abar = dyn.Abar
    integrand = np.einsum("ki,ki->k", y @ Abar.T, m) + 0.5 * np.einsum("ki,ki->k", m @ BBt, m)
    inner = 0.5 * grid.dt * (integrand[1:] + integrand[:-1])
    gamma = -np.concatenate([[0.0], np.cumsum(inner)])

    target = rho1.mean
    err = np.linalg.norm(y[-1] - target)
    if err > 1e-6 * (1.0 + np.linalg.norm(target)):
        raise ConvergenceError(
            f"mean path misses the target mean by {err:.3e}; refine the grid"
        )
    return MeanSteering(
        grid=grid, mode=mode, m=m, y=y, gamma=gamma,
        dyn=dyn, rho0=rho0, rho1=rho1, td=td, gram10=G10,
    )


def terminal_cost(
    riccati: RiccatiSolution, steering: MeanSteering, include_constant: bool = False
) -> TerminalCostSpec:
    """Quadratic-plus-linear terminal incentive for the noncooperative game.

    quad is half the terminal value matrix acting on (x - mean of the
    population), lin is minus the terminal mean costate.  The additive
    constant is dropped by default; ``include_constant`` restores it.
    """
    if steering.mode != "noncoop":
        raise DomainError("terminal cost is defined for the noncooperative design")
    quad = 0.5 * riccati.pi1
    lin = -steering.m[-1]
    constant = float(-steering.gamma[-1]) if include_constant else None
    return TerminalCostSpec(quad=0.5 * (quad + quad.T), lin=lin, constant=constant)


def terminal_cost_state_only(riccati: RiccatiSolution, steering: MeanSteering) -> TerminalCostSpec:
    """Population-independent variant: minus the terminal value function.

    Same quadratic and linear parts, but centered at the designed
    terminal mean instead of the population mean, with the full constant
    (including the accumulated trace term) kept.
    """
    if steering.mode != "noncoop":
        raise DomainError("terminal cost is defined for the noncooperative design")
    eps = steering.dyn.eps
    trace_term = riccati.trace_integral(steering.dyn.BBt)[-1]
    constant = float(-steering.gamma[-1] - 0.5 * eps * trace_term)
    quad = 0.5 * riccati.pi1
    return TerminalCostSpec(
        quad=0.5 * (quad + quad.T),
        lin=-steering.m[-1],
        constant=constant,
        fixed_center=steering.y[-1].copy(),
    )


def feedback_noncoop(riccati: RiccatiSolution, steering: MeanSteering) -> AffinePolicy:
    """u(t, x) = -B' P(t) (x - y(t)) + B' m(t) for the noncooperative design."""
    if steering.mode != "noncoop":
        raise DomainError("steering was not built in noncooperative mode")
    return AffinePolicy(
        grid=steering.grid, pi=riccati.pi, y=steering.y, m=steering.m,
        B=steering.dyn.B, mode="noncoop", eps=steering.dyn.eps,
    )


@dataclass(frozen=True)
class CooperativePolicy(AffinePolicy):
    """Cooperative law u = -B' P x + B' n with n = P y + m.

    ``bias_expanded`` evaluates the equivalent form of n(t) written
    directly in transition-matrix and Gramian factors, as a cross-check
    on the assembled samples.
    """

    steering: MeanSteering = None

    def n_at(self, t: float) -> np.ndarray:
        P, yv, mv = self._at(t)
        return P @ yv + mv

    def bias_expanded(self, t: float) -> np.ndarray:
        st = self.steering
        td = st.td
        grid = st.grid
        pos = (t - grid.t0) / grid.dt
        i = int(round(pos))
        if not (0 <= i <= grid.steps and abs(pos - i) < 1e-9):
            raise DomainError("expanded bias is evaluated at grid nodes")
        phibar_t0 = td.phibar[i]
        phibar10 = td.phibar[-1]
        mhat_t0 = td.gram_Mhat[i]
        mhat10 = td.gram_Mhat[-1]
        # Phibar(1, t) = Phibar(1, 0) Phibar(t, 0)^{-1}; split via solves.
        phibar_1t = np.linalg.solve(phibar_t0.T, phibar10.T).T
        mhat_1t = mhat10 - phibar_1t @ mhat_t0 @ phibar_1t.T
        phibar_t1 = np.linalg.solve(phibar_1t, np.eye(phibar_1t.shape[0]))
        m0 = st.rho0.mean
        m1 = st.rho1.mean
        P = interp_samples(grid, self.pi, t)
        winv = np.linalg.solve(mhat10, np.column_stack([phibar10 @ m0, m1]))
        w0, w1 = winv[:, 0], winv[:, 1]
        return (
            P @ phibar_t1 @ mhat_1t @ w0
            + P @ mhat_t0 @ phibar_1t.T @ w1
            + phibar_1t.T @ (w1 - w0)
        )


def feedback_coop(riccati: RiccatiSolution, steering: MeanSteering) -> CooperativePolicy:
    """u(t, x) = -B' P(t) x + B' n(t), n = P y + m, for the cooperative design."""
    if steering.mode != "coop":
        raise DomainError("steering was not built in cooperative mode")
    return CooperativePolicy(
        grid=steering.grid, pi=riccati.pi, y=steering.y, m=steering.m,
        B=steering.dyn.B, mode="coop", eps=steering.dyn.eps, steering=steering,
    )


def value_field(riccati: RiccatiSolution, steering: MeanSteering, t: float, x) -> float:
    """Value function of the steering design.

    lambda(t, x) = -z' P(t) z / 2 + (eps/2) int_0^t tr(BB' P) ds
                   + m(t) . x + gamma(t),   z = x - y(t).
    Its gradient reproduces the feedback laws.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    P = riccati.at(t)
    z = x - steering.y_at(t)
    trace_cum = riccati.trace_integral(steering.dyn.BBt)
    trace_t = float(interp_samples(steering.grid, trace_cum, t))
    return float(
        -0.5 * z @ P @ z
        + 0.5 * steering.dyn.eps * trace_t
        + steering.m_at(t) @ x
        + steering.gamma_at(t)
    )

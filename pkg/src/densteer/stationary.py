"""Stationary (ergodic) cost design for a target invariant Gaussian.

Feasibility of the target, the algebraic solve for the quadratic and
linear value coefficients, the induced running cost, and the stationary
feedback law.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import GaussianDensity
from .errors import DomainError, SingularityError
from .linsys import SystemDynamics
from .policy import ConstantPolicy


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    cov_residual: float
    mean_residual: float
    cov_tolerance: float
    mean_tolerance: float


@dataclass(frozen=True)
class StationaryDesign:
    """Coefficients of the stationary design.

    ``pi`` and ``nvec`` parameterize the value ansatz, ``Q`` the induced
    quadratic state cost, ``eta`` the ergodic constant (diagnostic only).
    """

    pi: np.ndarray
    nvec: np.ndarray
    Q: np.ndarray
    target_mean: np.ndarray
    target_cov: np.ndarray
    eta: float
    dyn: SystemDynamics

    def g(self, x, rho_mean=None) -> float:
        """Cost g(x, rho) = x'Qx/2 + n.(A - BB'P)x - mean(rho).Abar'P x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if rho_mean is None:
            rho_mean = self.target_mean
        rho_mean = np.atleast_1d(np.asarray(rho_mean, dtype=float))
        dyn = self.dyn
        Acl = dyn.a_at(0.0) - dyn.BBt @ self.pi
        return float(
            0.5 * x @ self.Q @ x
            + self.nvec @ (Acl @ x)
            - rho_mean @ (dyn.Abar.T @ (self.pi @ x))
        )

    def hjb_residual(self, x) -> float:
        """Residual of the stationary value equation at ``x`` (should vanish)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        dyn = self.dyn
        A = dyn.a_at(0.0)
        BBt = dyn.BBt
        grad = -self.pi @ x + self.nvec
        return float(
            -0.5 * np.trace(BBt @ self.pi)
            + self.eta
            + grad @ (A @ x)
            + grad @ (dyn.Abar @ self.target_mean)
            + 0.5 * grad @ BBt @ grad
            - self.g(x)
        )


def _range_basis(B: np.ndarray) -> np.ndarray:
    """Columns spanning {B X' + X B' : X} as vectors in R^{n*n}."""
    n, m = B.shape
    cols = []
    for i in range(n):
        for j in range(m):
            E = np.zeros((n, m))
            E[i, j] = 1.0
            cols.append((B @ E.T + E @ B.T).ravel())
    return np.column_stack(cols)


def check_feasibility(target: GaussianDensity, dyn: SystemDynamics) -> FeasibilityReport:
    """Least-squares residuals of the two range conditions for invariance.

    The covariance condition projects A S + S A' onto the range of
    X -> B X' + X B'; the mean condition projects (A + Abar) mean onto
    the range of B.  Feasible iff both residuals are at tolerance.
    """
    if target.n != dyn.n:
        raise DomainError("target dimension does not match the dynamics")
    A = dyn.a_at(0.0)
    S = target.cov
    lhs_cov = A @ S + S @ A.T
    basis = _range_basis(dyn.B)
    coef, *_ = np.linalg.lstsq(basis, lhs_cov.ravel(), rcond=None)
    cov_residual = float(np.linalg.norm(basis @ coef - lhs_cov.ravel()))
    cov_tol = 1e-8 * (1.0 + np.linalg.norm(lhs_cov, "fro"))

    lhs_mean = (A + dyn.Abar) @ target.mean
    coef_m, *_ = np.linalg.lstsq(dyn.B, lhs_mean, rcond=None)
    mean_residual = float(np.linalg.norm(dyn.B @ coef_m - lhs_mean))
    mean_tol = 1e-8 * (1.0 + np.linalg.norm(lhs_mean))

    return FeasibilityReport(
        feasible=bool(cov_residual <= cov_tol and mean_residual <= mean_tol),
        cov_residual=cov_residual,
        mean_residual=mean_residual,
        cov_tolerance=cov_tol,
        mean_tolerance=mean_tol,
    )


def _sym_basis(n: int) -> list[np.ndarray]:
    basis = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = 1.0
            E[j, i] = 1.0
            basis.append(E)
    return basis


def design_stationary(target: GaussianDensity, dyn: SystemDynamics) -> StationaryDesign:
    """Solve the stationary design equations for (P, n) and assemble the cost.

    P is the unique symmetric solution of
        BB' P S + S P BB' = A S + S A' + BB'
    obtained by a vectorized solve restricted to symmetric matrices, with
    an explicit uniqueness (rank) check.  n solves the mean equilibrium
    equation in least squares; Q follows from P by construction.
    """
    report = check_feasibility(target, dyn)
    if not report.feasible:
        raise DomainError(
            "target is not feasible: covariance residual "
            f"{report.cov_residual:.3e}, mean residual {report.mean_residual:.3e}"
        )
    n = dyn.n
    B = dyn.B
    if np.linalg.matrix_rank(B, tol=1e-10 * max(1.0, np.linalg.norm(B, 2))) < dyn.m_in:
        raise DomainError("B must have full column rank")
    BBt = dyn.BBt
    A = dyn.a_at(0.0)
    S = target.cov
    W = A @ S + S @ A.T + BBt

    basis = _sym_basis(n)
    L = np.column_stack([(BBt @ E @ S + S @ E @ BBt).ravel() for E in basis])
    coef, _, rank, sv = np.linalg.lstsq(L, W.ravel(), rcond=None)
    if rank < len(basis) or sv[-1] < 1e-12 * sv[0]:
        raise SingularityError("stationary value equation has no unique symmetric solution")
    P = sum(c * E for c, E in zip(coef, basis))
    P = 0.5 * (P + P.T)
    residual = np.linalg.norm(BBt @ P @ S + S @ P @ BBt - W, "fro")
    if residual > 1e-9 * (1.0 + np.linalg.norm(W, "fro")):
        raise DomainError(f"stationary solve residual {residual:.3e}: target infeasible")
    closed_loop = (A - BBt @ P) @ S + S @ (A - BBt @ P).T + BBt
    if np.linalg.norm(closed_loop, "fro") > 1e-9 * (1.0 + np.linalg.norm(BBt, "fro")):
        raise DomainError("closed-loop invariance residual exceeds tolerance")

    rhs = -(A + dyn.Abar - BBt @ P) @ target.mean
    nvec, *_ = np.linalg.lstsq(BBt, rhs, rcond=None)
    n_residual = np.linalg.norm(BBt @ nvec - rhs)
    if n_residual > 1e-9 * (1.0 + np.linalg.norm(rhs)):
        raise DomainError(f"mean equation is inconsistent (residual {n_residual:.3e})")

    Q = -(P @ A + A.T @ P) + P @ BBt @ P
    Q = 0.5 * (Q + Q.T)
    eta = float(
        0.5 * np.trace(BBt @ P)
        - nvec @ (dyn.Abar @ target.mean)
        - 0.5 * nvec @ BBt @ nvec
    )
    return StationaryDesign(
        pi=P, nvec=nvec, Q=Q,
        target_mean=target.mean.copy(), target_cov=target.cov.copy(),
        eta=eta, dyn=dyn,
    )


def stationary_policy(design: StationaryDesign) -> ConstantPolicy:
    """Time-invariant law u(x) = -B' P x + B' n; the target mean is an
    equilibrium of the closed-loop mean dynamics."""
    return ConstantPolicy(
        pi=design.pi, nvec=design.nvec, B=design.dyn.B,
        target_mean=design.target_mean, mode="stationary", eps=design.dyn.eps,
    )


def stationary_eta(design: StationaryDesign, dyn: SystemDynamics) -> float:
    """Ergodic constant balancing the stationary value equation.

    eta = tr(BB'P)/2 - n.(Abar mean) - n.BB'n/2; with it the equation's
    residual is identically zero in x (checked by ``hjb_residual``).
    """
    P, nvec = design.pi, design.nvec
    BBt = dyn.BBt
    return float(
        0.5 * np.trace(BBt @ P)
        - nvec @ (dyn.Abar @ design.target_mean)
        - 0.5 * nvec @ BBt @ nvec
    )

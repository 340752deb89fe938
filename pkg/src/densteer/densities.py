"""Marginal distributions: Gaussian moment form and 1-D grid form."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DomainError


@dataclass(frozen=True)
class GaussianDensity:
    """Gaussian marginal N(mean, cov) with strictly positive definite cov."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise DomainError(f"cov must be {mean.size}x{mean.size}, got {cov.shape}")
        if np.linalg.norm(cov - cov.T, "fro") > 1e-10 * (1.0 + np.linalg.norm(cov, "fro")):
            raise DomainError("cov must be symmetric")
        eigs = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        if eigs.min() <= 0.0:
            raise DomainError(f"cov must be positive definite (min eigenvalue {eigs.min():.3e})")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def n(self) -> int:
        return self.mean.size

    def pdf1d(self, x: np.ndarray) -> np.ndarray:
        if self.n != 1:
            raise DomainError("pdf1d requires a scalar density")
        var = self.cov[0, 0]
        z = (np.asarray(x, dtype=float) - self.mean[0]) ** 2 / (2.0 * var)
        return np.exp(-z) / np.sqrt(2.0 * np.pi * var)

    def cdf(self, x: np.ndarray) -> np.ndarray:
        if self.n != 1:
            raise DomainError("cdf requires a scalar density")
        sigma = np.sqrt(self.cov[0, 0])
        return ndtr((np.asarray(x, dtype=float) - self.mean[0]) / sigma)


def trapezoid_weights(xs: np.ndarray) -> np.ndarray:
    """Trapezoidal quadrature weights for a uniform grid."""
    dx = xs[1] - xs[0]
    w = np.full(xs.size, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


@dataclass(frozen=True)
class GridDensity1D:
    """Density sampled on a uniform, strictly increasing grid.

    Weights are density values; the trapezoid rule over the grid
    integrates to one (checked to 1e-10 after construction-time
    normalization).
    """

    xs: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if xs.ndim != 1 or xs.size < 8 or xs.shape != w.shape:
            raise DomainError("xs and w must be matching 1-D arrays with >= 8 nodes")
        dx = np.diff(xs)
        if dx.min() <= 0.0:
            raise DomainError("grid must be strictly increasing")
        if dx.max() - dx.min() > 1e-9 * dx.mean():
            raise DomainError("grid must be uniform")
        if w.min() < -1e-14 * max(w.max(), 1e-300):
            raise DomainError("weights must be nonnegative")
        w = np.clip(w, 0.0, None)
        mass = float(trapezoid_weights(xs) @ w)
        if abs(mass - 1.0) > 1e-10:
            raise DomainError(f"density mass is {mass!r}, not 1 (normalize first)")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "w", w)

    @property
    def dx(self) -> float:
        return float(self.xs[1] - self.xs[0])

    @property
    def mean(self) -> float:
        wts = trapezoid_weights(self.xs)
        return float(wts @ (self.xs * self.w))

    @property
    def variance(self) -> float:
        wts = trapezoid_weights(self.xs)
        m = self.mean
        return float(wts @ ((self.xs - m) ** 2 * self.w))

    def boundary_fraction(self) -> float:
        """Largest boundary weight relative to the peak weight."""
        peak = max(self.w.max(), 1e-300)
        return float(max(self.w[0], self.w[-1]) / peak)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.xs, self.w, left=0.0, right=0.0)

    def cdf_table(self) -> np.ndarray:
        inner = 0.5 * self.dx * (self.w[1:] + self.w[:-1])
        F = np.concatenate([[0.0], np.cumsum(inner)])
        return np.clip(F / max(F[-1], 1e-300), 0.0, 1.0)

    def cdf(self, x: np.ndarray) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.xs, self.cdf_table(), left=0.0, right=1.0)

    def quantile(self, q: np.ndarray) -> np.ndarray:
        F = _strictify(self.cdf_table())
        return np.interp(np.asarray(q, dtype=float), F, self.xs)

    def shifted(self, offset: float) -> "GridDensity1D":
        """Same weights on a grid translated by ``offset``."""
        return GridDensity1D(self.xs + offset, self.w)

    def l1_distance(self, other: "GridDensity1D") -> float:
        if other.xs.shape != self.xs.shape or not np.allclose(other.xs, self.xs):
            raise DomainError("l1_distance requires a shared grid")
        return float(trapezoid_weights(self.xs) @ np.abs(self.w - other.w))

    @staticmethod
    def normalized(xs: np.ndarray, values: np.ndarray) -> "GridDensity1D":
        values = np.clip(np.asarray(values, dtype=float), 0.0, None)
        mass = trapezoid_weights(xs) @ values
        if mass <= 0.0:
            raise DomainError("cannot normalize a zero density")
        return GridDensity1D(xs, values / mass)

    @staticmethod
    def from_gaussian(mean: float, var: float, xs: np.ndarray) -> "GridDensity1D":
        if var <= 0.0:
            raise DomainError("variance must be positive")
        z = (np.asarray(xs, dtype=float) - mean) ** 2 / (2.0 * var)
        return GridDensity1D.normalized(xs, np.exp(-z))

    @staticmethod
    def from_mixture(weights, means, variances, xs: np.ndarray) -> "GridDensity1D":
        xs = np.asarray(xs, dtype=float)
        vals = np.zeros_like(xs)
        for a, m, v in zip(weights, means, variances):
            vals += a * np.exp(-((xs - m) ** 2) / (2.0 * v)) / np.sqrt(2.0 * np.pi * v)
        return GridDensity1D.normalized(xs, vals)

    @staticmethod
    def from_csv(path) -> "GridDensity1D":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        if data.ndim != 2 or data.shape[1] != 2:
            raise DomainError(f"{path}: expected two columns (x, weight)")
        return GridDensity1D.normalized(data[:, 0], data[:, 1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "weight"])
            for x, w in zip(self.xs, self.w):
                writer.writerow([f"{x:.17g}", f"{w:.17g}"])


def _strictify(F: np.ndarray) -> np.ndarray:
    """Make a nondecreasing CDF table strictly increasing for interpolation."""
    ramp = np.linspace(0.0, 1.0, F.size)
    return (1.0 - 1e-12) * F + 1e-12 * ramp


def support_grid(centers, sigmas, points: int = 2048, span: float = 8.0, margin: float = 0.0) -> np.ndarray:
    """Uniform grid covering every [center - span*sigma, center + span*sigma]
    plus an absolute ``margin`` on both sides."""
    centers = np.atleast_1d(np.asarray(centers, dtype=float))
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=float))
    lo = float(np.min(centers - span * sigmas)) - margin
    hi = float(np.max(centers + span * sigmas)) + margin
    return np.linspace(lo, hi, points)

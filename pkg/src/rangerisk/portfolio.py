"""Range-based mean-variance portfolio selection with a closed-form frontier."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .generators import DomainError

COND_MAX = 1e12


@dataclass
class FrontierInput:
    mrvar: np.ndarray
    mrcov: np.ndarray
    targets: list = field(default_factory=list)

    def __post_init__(self):
        self.mrvar = np.atleast_1d(np.asarray(self.mrvar, float))
        self.mrcov = np.atleast_2d(np.asarray(self.mrcov, float))
        n = self.mrvar.size
        if n < 2:
            raise DomainError("bad-dimension", "portfolio needs at least two assets")
        if self.mrcov.shape != (n, n):
            raise DomainError("bad-shape", f"mrcov must be {n}x{n}")
        self.mrcov = 0.5 * (self.mrcov + self.mrcov.T)
        self.targets = [float(t) for t in self.targets]


@dataclass
class FrontierPoint:
    mu0: float
    weights: np.ndarray
    variance: float
    abcd: tuple

    @property
    def std(self) -> float:
        return float(np.sqrt(max(self.variance, 0.0)))


class _Solver:
    """Cholesky factorization of MRCov and the scalars a, b, c, d."""

    def __init__(self, inp: FrontierInput):
        C = inp.mrcov
        if np.linalg.cond(C) >= COND_MAX:
            raise DomainError("singular-mrcov", "mrcov is singular or too ill-conditioned")
        try:
            self.factor = cho_factor(C, lower=True)
        except LinAlgError:
            raise DomainError("singular-mrcov", "mrcov is not positive definite") from None
        m = inp.mrvar
        one = np.ones_like(m)
        self.Cm = cho_solve(self.factor, m)
        self.C1 = cho_solve(self.factor, one)
        a = float(m @ self.Cm)
        b = float(one @ self.Cm)
        c = float(one @ self.C1)
        d = a * c - b * b
        if not abs(d) > 1e-12 * abs(a * c):
            raise DomainError("degenerate", "mrvar is proportional to the ones vector")
        self.abcd = (a, b, c, d)
        self.C = C

    def point(self, mu0: float) -> FrontierPoint:
        a, b, c, d = self.abcd
        w = ((a * self.C1 - b * self.Cm) + mu0 * (c * self.Cm - b * self.C1)) / d
        var = float(w @ self.C @ w)
        return FrontierPoint(float(mu0), w, var, self.abcd)


def optimal_weights(inp: FrontierInput, mu0: float) -> FrontierPoint:
    """Minimum range-variance weights with full investment and target MRVaR mu0."""
    return _Solver(inp).point(mu0)


def frontier(inp: FrontierInput) -> list:
    """One FrontierPoint per target level."""
    if not inp.targets:
        raise DomainError("no-targets", "frontier needs at least one target")
    s = _Solver(inp)
    return [s.point(t) for t in inp.targets]


def frontier_variance(abcd, mu0):
    """Closed-form frontier variance (c mu0^2 - 2 b mu0 + a) / d."""
    a, b, c, d = abcd
    mu0 = np.asarray(mu0, float)
    return (c * mu0 * mu0 - 2.0 * b * mu0 + a) / d

"""Maximum-likelihood fits of normal and Student-t elliptical models."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .distributions import EllipticalModel
from .generators import DomainError, GeneratorFamily

DOF_BRACKET = (2.1, 100.0)
EM_TOL = 1e-9
EM_MAX_ITER = 500


@dataclass
class ReturnPanel:
    observations: np.ndarray
    asset_labels: list = field(default_factory=list)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.observations, float))
        if not np.all(np.isfinite(x)):
            raise DomainError("missing-values", "panel contains missing or non-finite values")
        T, n = x.shape
        if T <= n:
            raise DomainError("too-few-observations", "need more observations than assets")
        if not self.asset_labels:
            self.asset_labels = [f"X{i + 1}" for i in range(n)]
        if len(self.asset_labels) != n:
            raise DomainError("bad-shape", "one label per column is required")
        self.observations = x

    @classmethod
    def from_csv(cls, path) -> "ReturnPanel":
        """Header of labels with a leading date column; rows with gaps are rejected."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2:
            raise DomainError("bad-panel", "panel needs a header and data rows")
        labels = [h.strip() for h in rows[0][1:]]
        data = []
        for i, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            vals = row[1:]
            if len(vals) != len(labels) or any(v.strip() == "" for v in vals):
                raise DomainError("missing-values", f"row {i} has missing values")
            try:
                data.append([float(v) for v in vals])
            except ValueError:
                raise DomainError("bad-panel", f"row {i} has a non-numeric value") from None
        return cls(np.array(data), labels)


@dataclass
class FitResult:
    model: EllipticalModel
    loglik: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "loglik": self.loglik,
                "iterations": self.iterations, "converged": self.converged}


def _check_rank(S):
    w = np.linalg.eigvalsh(S)
    if not w[0] > 1e-12 * max(w[-1], 1e-300):
        raise DomainError("rank-deficient", "sample scatter matrix is singular")


def _normal_loglik(x, mu, S):
    T, n = x.shape
    L = np.linalg.cholesky(S)
    r = np.linalg.solve(L, (x - mu).T)
    return float(-0.5 * T * n * math.log(2 * math.pi) - T * np.log(np.diag(L)).sum()
                 - 0.5 * (r * r).sum())


def fit_normal(panel: ReturnPanel) -> FitResult:
    """Sample mean and T-denominator covariance."""
    x = panel.observations
    mu = x.mean(axis=0)
    S = np.cov(x.T, bias=True).reshape(x.shape[1], x.shape[1])
    _check_rank(S)
    model = EllipticalModel(mu, S, GeneratorFamily.normal())
    return FitResult(model, _normal_loglik(x, mu, S), 1, True)


def t_loglik(x, mu, S, m) -> float:
    T, n = x.shape
    L = np.linalg.cholesky(S)
    r = np.linalg.solve(L, (x - mu).T)
    delta = (r * r).sum(axis=0)
    const = (special.gammaln(0.5 * (m + n)) - special.gammaln(0.5 * m)
             - 0.5 * n * math.log(m * math.pi))
    return float(T * const - T * np.log(np.diag(L)).sum() - 0.5 * (m + n) * np.log1p(delta / m).sum())


def _em_fixed(x, m, mu, S, max_iter=EM_MAX_ITER, tol=EM_TOL):
    """EM for location and scale at fixed dof; asserts monotone log-likelihood."""
    T, n = x.shape
    ll = t_loglik(x, mu, S, m)
    hist = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        L = np.linalg.cholesky(S)
        r = np.linalg.solve(L, (x - mu).T)
        delta = (r * r).sum(axis=0)
        w = (m + n) / (m + delta)
        mu = (w @ x) / w.sum()
        xc = x - mu
        S = (xc * w[:, None]).T @ xc / T
        S = 0.5 * (S + S.T)
        _check_rank(S)
        new = t_loglik(x, mu, S, m)
        if new < ll - 1e-9 * max(1.0, abs(ll)):
            raise AssertionError(f"EM log-likelihood decreased: {ll} -> {new}")
        hist.append(new)
        gain = new - ll
        ll = new
        if gain < tol:
            converged = True
            break
    return mu, S, ll, it, converged, hist


def fit_student_t(panel: ReturnPanel, dof_mode: str = "profile", dof: float = None) -> FitResult:
    """Student-t MLE by EM; the dof is fixed or maximized on the profile likelihood."""
    x = panel.observations
    T, n = x.shape
    if T <= n + 4:
        raise DomainError("too-few-observations", "Student-t fit needs T > n + 4")
    mu0 = x.mean(axis=0)
    S0 = np.cov(x.T, bias=True).reshape(n, n)
    _check_rank(S0)
    if dof_mode == "fixed":
        if dof is None or not dof > 0:
            raise DomainError("bad-dof", "fixed mode needs a positive dof")
        m = float(dof)
        mu, S, ll, it, conv, hist = _em_fixed(x, m, mu0, S0 * (m - 2) / m if m > 2 else S0)
        return FitResult(EllipticalModel(mu, S, GeneratorFamily.student_t(m)), ll, it, conv, hist)
    if dof_mode != "profile":
        raise DomainError("bad-dof-mode", "dof_mode must be 'fixed' or 'profile'")

    cache = {}

    def negprof(m):
        r = _em_fixed(x, m, mu0, S0 * (m - 2) / m)
        cache[m] = r
        return -r[2]

    res = optimize.minimize_scalar(negprof, bounds=DOF_BRACKET, method="bounded",
                                   options={"xatol": 1e-5})
    m = float(res.x)
    mu, S, ll, it, conv, hist = cache[m] if m in cache else _em_fixed(x, m, mu0, S0 * (m - 2) / m)
    total_iter = sum(v[3] for v in cache.values())
    return FitResult(EllipticalModel(mu, S, GeneratorFamily.student_t(m)), ll, total_iter,
                     bool(conv and res.success), hist)


def simulate_t_panel(mu, sigma, m, T, seed=0) -> ReturnPanel:
    """Synthetic Student-t returns for tests and demos."""
    gen = np.random.default_rng(seed)
    mu = np.asarray(mu, float)
    L = np.linalg.cholesky(np.asarray(sigma, float))
    z = gen.standard_normal((T, mu.size)) @ L.T
    w = np.sqrt(m / gen.chisquare(m, T))
    return ReturnPanel(mu + z * w[:, None])

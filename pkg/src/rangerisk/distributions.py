"""Elliptical models, marginal quantiles, rectangle probabilities and sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats
from scipy.interpolate import PchipInterpolator

from .boxmass import box_mass
from .generators import (LAPLACE, NORMAL, PEARSON_VII, STUDENT_T, DomainError, GeneratorFamily,
                         GeneratorKernel, kernel_eval, norm_constant)
from .quadrature import integrate

PD_RTOL = 1e-12


@dataclass(frozen=True)
class EllipticalModel:
    """The law E_n(mu, sigma, g_n)."""

    mu: np.ndarray
    sigma: np.ndarray
    family: GeneratorFamily

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, float))
        sigma = np.atleast_2d(np.asarray(self.sigma, float))
        n = mu.size
        if n < 1:
            raise DomainError("bad-dimension", "model needs n >= 1")
        if sigma.shape != (n, n):
            raise DomainError("bad-shape", f"sigma must be {n}x{n}")
        if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(sigma)):
            raise DomainError("non-finite", "mu and sigma must be finite")
        if not np.allclose(sigma, sigma.T, rtol=1e-12, atol=1e-14 * np.abs(sigma).max()):
            raise DomainError("not-symmetric", "sigma must be symmetric")
        sigma = 0.5 * (sigma + sigma.T)
        _check_pd(sigma)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self) -> int:
        return self.mu.size

    def to_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "sigma": self.sigma.tolist(), "family": self.family.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "EllipticalModel":
        try:
            return cls(np.asarray(d["mu"], float), np.asarray(d["sigma"], float),
                       GeneratorFamily.from_dict(d["family"]))
        except KeyError as exc:
            raise DomainError("bad-model", f"model is missing field {exc}") from None


def _check_pd(sigma):
    w = np.linalg.eigvalsh(sigma)
    if not w[0] > PD_RTOL * max(w[-1], 0.0) or w[-1] <= 0:
        raise DomainError("not-pd", "scale matrix is not positive definite")
    return w


@dataclass(frozen=True)
class StandardBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, float))
        hi = np.atleast_1d(np.asarray(self.upper, float))
        if lo.shape != hi.shape:
            raise DomainError("bad-shape", "box bounds must have equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or not np.all(lo < hi):
            raise DomainError("degenerate-range", "box needs lower < upper in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


@dataclass
class BoxProbability:
    value: float
    std_error: float
    engine: str
    n_evals: int
    converged: bool = True


def sqrt_matrix(sigma) -> np.ndarray:
    """Symmetric positive definite square root via eigendecomposition."""
    sigma = np.asarray(sigma, float)
    sigma = 0.5 * (sigma + sigma.T)
    w, v = np.linalg.eigh(sigma)
    if not w[0] > PD_RTOL * max(w[-1], 0.0) or w[-1] <= 0:
        raise DomainError("not-pd", "scale matrix is not positive definite")
    r = (v * np.sqrt(w)) @ v.T
    return 0.5 * (r + r.T)


# ---------------------------------------------------------------------------
# standardized 1-D marginal

def _sphere_area(n):
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def radial_density(family: GeneratorFamily, n: int, r):
    """Density of |Y| for Y ~ E_n(0, I, g_n)."""
    r = np.asarray(r, float)
    c = norm_constant(family, n, "c").value
    k = GeneratorKernel(family, 0, n)
    return c * _sphere_area(n) * r ** (n - 1) * np.asarray(kernel_eval(k, 0.5 * r * r))


def _upper_tail_numeric(family, n, a):
    """P(Y_1 > a) for a >= 0 through the radial decomposition."""
    a = np.atleast_1d(np.asarray(a, float))
    c = norm_constant(family, n, "c").value
    k = GeneratorKernel(family, 0, n)
    if n == 1:
        res = integrate(lambda x, g: c * np.asarray(kernel_eval(k, 0.5 * x * x)),
                        a, np.full(a.size, np.inf), epsabs=1e-300, epsrel=1e-12)
        return res.value
    area = _sphere_area(n)

    def f(r, g):
        ratio = np.clip(a[g] / r, 0.0, 1.0)
        sphere = 0.5 * special.betainc(0.5 * (n - 1), 0.5, 1.0 - ratio * ratio)
        return c * area * r ** (n - 1) * np.asarray(kernel_eval(k, 0.5 * r * r)) * sphere

    # split at a + 1 to resolve the kink of the sphere factor near r = a
    lo = np.concatenate([a, a + 1.0])
    hi = np.concatenate([a + 1.0, np.full(a.size, np.inf)])
    g = np.concatenate([np.arange(a.size)] * 2)
    return integrate(f, lo, hi, g, a.size, epsabs=1e-300, epsrel=1e-12).value


def standard_marginal_cdf(family: GeneratorFamily, n: int, x):
    """CDF of one coordinate of Y ~ E_n(0, I, g_n)."""
    x = np.asarray(x, float)
    tag = family.tag
    if tag == NORMAL:
        return special.ndtr(x)
    if tag == STUDENT_T:
        return special.stdtr(family.dof_m, x)
    if tag == PEARSON_VII:
        nu = 2.0 * family.shape_t - n
        if nu <= 0:
            raise DomainError("moment-condition", "Pearson VII needs t > n/2")
        return special.stdtr(nu, x * math.sqrt(nu))
    flat = np.atleast_1d(x).ravel()
    out = np.empty(flat.size)
    finite = np.isfinite(flat)
    out[~finite] = np.where(flat[~finite] > 0, 1.0, 0.0)
    idx = np.where(finite)[0]
    if idx.size:
        tail = _upper_tail_numeric(family, n, np.abs(flat[idx]))
        out[idx] = np.where(flat[idx] >= 0, 1.0 - tail, tail)
    out = out.reshape(x.shape)
    return out if out.ndim else float(out)


def standard_marginal_quantile(family: GeneratorFamily, n: int, p):
    """Quantile of one coordinate of Y ~ E_n(0, I, g_n); p = 0, 1 give -inf, +inf."""
    p = np.asarray(p, float)
    if np.any((p < 0) | (p > 1)):
        raise DomainError("bad-probability", "probabilities must lie in [0, 1]")
    tag = family.tag
    if tag == NORMAL:
        return special.ndtri(p)
    if tag == STUDENT_T:
        return special.stdtrit(family.dof_m, p) if p.ndim else _t_quantile(family.dof_m, float(p))
    if tag == PEARSON_VII:
        nu = 2.0 * family.shape_t - n
        if nu <= 0:
            raise DomainError("moment-condition", "Pearson VII needs t > n/2")
        return np.asarray(special.stdtrit(nu, p)) / math.sqrt(nu) if p.ndim else \
            _t_quantile(nu, float(p)) / math.sqrt(nu)
    flat = np.atleast_1d(p).ravel()
    out = np.array([_numeric_quantile(family, n, float(pi)) for pi in flat]).reshape(p.shape)
    return out if out.ndim else float(out)


def _t_quantile(nu, p):
    if p == 0.0:
        return -math.inf
    if p == 1.0:
        return math.inf
    return float(special.stdtrit(nu, p))


def _numeric_quantile(family, n, p):
    if p == 0.0:
        return -math.inf
    if p == 1.0:
        return math.inf
    if p == 0.5:
        return 0.0
    # symmetric law: solve the upper tail P(Y > x) = min(p, 1-p) for x >= 0
    tail = min(p, 1.0 - p)

    def h(x):
        return math.log(float(_upper_tail_numeric(family, n, np.array([x]))[0])) - math.log(tail)

    hi = 1.0
    while h(hi) > 0:
        hi *= 2.0
        if hi > 1e8:
            raise DomainError("quantile-failure", "could not bracket marginal quantile")
    x = optimize.brentq(h, 0.0, hi, xtol=1e-14, rtol=1e-14, maxiter=200)
    return x if p > 0.5 else -x


def marginal_var(model: EllipticalModel, k: int, p: float) -> float:
    """VaR_p of the k-th component (0-based index)."""
    if not 0.0 <= p <= 1.0:
        raise DomainError("bad-probability", "p must lie in [0, 1]")
    q = float(standard_marginal_quantile(model.family, model.n, p))
    return model.mu[k] + math.sqrt(model.sigma[k, k]) * q


def marginal_vars(model: EllipticalModel, p) -> np.ndarray:
    """Componentwise VaR vector for a probability vector ``p``."""
    p = np.broadcast_to(np.asarray(p, float), (model.n,))
    return np.array([marginal_var(model, k, float(p[k])) for k in range(model.n)])


# ---------------------------------------------------------------------------
# rectangle probabilities

def rectangle_prob(family: GeneratorFamily, n: int, box: StandardBox, kernel: GeneratorKernel = None,
                   tilt=None, tol: float = 1e-8, seed: int = 0, engine: str = "auto") -> BoxProbability:
    """c_n * int_box w(y) kernel(y'y/2) dy for the spherical law in dimension n.

    Without a kernel argument this is P(Y in box) for Y ~ E_n(0, I, g_n).
    ``tilt`` gives the weight exp(tilt'y).
    """
    if kernel is None:
        kernel = GeneratorKernel(family, 0, n)
    if box.lower.size != n:
        raise DomainError("bad-shape", "box dimension must equal n")
    c = norm_constant(family, n, "c").value
    m = box_mass(kernel, box.lower, box.upper, tilt=tilt, engine=engine, tol=tol / c, seed=seed,
                 relative=False)
    value, se = c * m.value, c * m.std_error
    if tilt is None and kernel.level == 0 and kernel.shift == 0:
        # a probability: keep the 3-sigma band inside [0, 1]
        value = min(max(value, 0.0), 1.0)
        se = min(se, value / 3.0, (1.0 - value) / 3.0)
    return BoxProbability(value, se, m.engine, m.n_evals, m.converged)


# ---------------------------------------------------------------------------
# sampling

@dataclass
class RadialSampler:
    """Inverse-CDF table of the radius |Y| for Y ~ E_n(0, I, g_n)."""

    family: GeneratorFamily
    n: int
    inverse_cdf_table: np.ndarray = field(default=None, repr=False)
    n_nodes: int = 4096

    def __post_init__(self):
        if self.inverse_cdf_table is None:
            self.inverse_cdf_table = self._build_table()
        p, r = self.inverse_cdf_table
        if not np.all(np.diff(r) > 0):
            raise DomainError("bad-table", "radius grid must be strictly increasing")
        self._interp = PchipInterpolator(special.logit(p), np.log(r))

    def _exact_ppf(self, p):
        fam, n = self.family, self.n
        if fam.tag == NORMAL:
            return np.sqrt(stats.chi2.ppf(p, n))
        if fam.tag == STUDENT_T:
            return np.sqrt(n * stats.f.ppf(p, n, fam.dof_m))
        if fam.tag == PEARSON_VII:
            nu = 2.0 * fam.shape_t - n
            return np.sqrt(n * stats.f.ppf(p, n, nu) / nu)
        if fam.tag == LAPLACE:
            return stats.gamma.ppf(p, n)
        return None

    def _build_table(self):
        k = np.arange(self.n_nodes)
        lo, hi = 1e-9, 1.0 - 1e-9
        # Chebyshev-spaced probability nodes cluster at both ends
        p = lo + (hi - lo) * 0.5 * (1.0 - np.cos(math.pi * k / (self.n_nodes - 1)))
        r = self._exact_ppf(p)
        if r is None:
            r = self._numeric_ppf(p)
        return np.vstack([p, r])

    def _numeric_ppf(self, p):
        fam, n = self.family, self.n
        # dense radius grid and cumulative mass by panelwise quadrature
        rmax = 1.0
        while radial_density(fam, n, rmax) * rmax > 1e-16 or rmax < 4.0:
            rmax *= 1.5
        grid = np.concatenate([[0.0], np.geomspace(1e-6, rmax, 8000)])
        res = integrate(lambda x, g: radial_density(fam, n, x), grid[:-1], grid[1:],
                        epsabs=1e-300, epsrel=1e-12)
        cdf = np.cumsum(res.value)
        total = cdf[-1]
        cdf = cdf / total
        rr = grid[1:]
        keep = np.concatenate([[True], np.diff(cdf) > 0]) & (cdf > 0) & (cdf < 1)
        f = PchipInterpolator(special.logit(cdf[keep]), np.log(rr[keep]), extrapolate=True)
        return np.exp(f(special.logit(p)))

    def radius(self, u):
        """Map uniforms to radii."""
        u = np.asarray(u, float)
        exact = self._exact_ppf(u)
        if exact is not None:
            return exact
        p, _ = self.inverse_cdf_table
        uc = np.clip(u, p[0], p[-1])
        return np.exp(self._interp(special.logit(uc)))


_SAMPLERS: dict = {}


def _sampler(family: GeneratorFamily, n: int) -> RadialSampler:
    key = (family.tag, family.dof_m, family.shape_t, id(family.custom_g), n)
    s = _SAMPLERS.get(key)
    if s is None:
        s = RadialSampler(family, n)
        _SAMPLERS[key] = s
    return s


def sample(family: GeneratorFamily, n: int, count: int, seed=0) -> np.ndarray:
    """Draws from E_n(0, I, g_n) as radius times a uniform direction."""
    if count < 1:
        raise DomainError("bad-count", "count must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((count, n))
    tag = family.tag
    # exact stochastic representations where one exists, the radial table otherwise
    if tag == NORMAL:
        return z
    if tag == STUDENT_T:
        return z * np.sqrt(family.dof_m / rng.chisquare(family.dof_m, count))[:, None]
    if tag == PEARSON_VII:
        nu = 2.0 * family.shape_t - n
        if nu <= 0:
            raise DomainError("moment-condition", "Pearson VII needs t > n/2")
        return z * np.sqrt(1.0 / rng.chisquare(nu, count))[:, None]
    s = z / np.linalg.norm(z, axis=1, keepdims=True)
    if tag == LAPLACE:
        r = rng.gamma(n, 1.0, count)
    else:
        r = _sampler(family, n).radius(rng.random(count))
    return s * r[:, None]


def sample_model(model: EllipticalModel, count: int, seed=0) -> np.ndarray:
    """Draws from the model using the symmetric root of sigma."""
    y = sample(model.family, model.n, count, seed)
    return model.mu + y @ sqrt_matrix(model.sigma)

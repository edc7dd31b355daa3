"""Box integrals of shifted elliptical kernels.

The central quantity is the unnormalized mass

    M = |S|^{-1/2} int_{lo <= z <= hi} w(z) K(s + (z-m)' S^{-1} (z-m) / 2) dz

of a generator level ``K`` with offset ``s``, location ``m`` and scale ``S``,
optionally weighted by ``w(z) = exp(a'(z-m))``. Writing ``z = m + L y`` with
``L`` the Cholesky factor of ``S`` turns the box into a parallelepiped in the
spherical coordinates ``y``; all engines work there.

Engines
-------
product     normal kernel, diagonal scale: product of 1-D normal CDFs.
quadrature  nested adaptive Gauss-Kronrod over leading coordinates; the last
            two coordinates are integrated in polar form, where the radial
            integral is exact through the next cumulative level.
qmc         randomized Sobol points. Normal and power kernels use sequential
            conditioning (chi-mixing for the power laws); other kernels use a
            radial-spherical estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.stats import qmc

from .generators import (LAPLACE, LOGISTIC, NORMAL, DomainError, GeneratorKernel,
                         kernel_eval, power_params)
from .quadrature import QuadratureError, integrate

QMC_BASE_LOG2 = 14
QMC_RANDOMIZATIONS = 16
QMC_MAX_POINTS = 2 ** 22


@dataclass
class MassEstimate:
    value: float
    std_error: float
    engine: str
    n_evals: int
    converged: bool = True


class IntegrationError(RuntimeError):
    """Raised when an engine cannot reach the requested tolerance."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


# ---------------------------------------------------------------------------
# helpers

def _level_fn(kernel: GeneratorKernel, level: int):
    k = GeneratorKernel(kernel.family, level, kernel.n, 0.0)
    return lambda u: np.asarray(kernel_eval(k, u), float)


def _ndtr_diff(a, b):
    """Phi(b) - Phi(a) without cancellation in the upper tail."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    flip = a > 0
    return np.where(flip, special.ndtr(-a) - special.ndtr(-b), special.ndtr(b) - special.ndtr(a))


def _stdtr_diff(nu, a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    flip = a > 0
    return np.where(flip, special.stdtr(nu, -a) - special.stdtr(nu, -b),
                    special.stdtr(nu, b) - special.stdtr(nu, a))


def _power_total(kernel: GeneratorKernel, d: int, shift):
    """Prefactor turning a power-kernel mass into a Student-t probability.

    K(s + |y|^2/2) = C (1+2s/M)^-alpha (1 + |y|^2/M')^-alpha with M' = M + 2s,
    which is proportional to a t density with nu = 2 alpha - d and scale M'/nu.
    Returns (total mass over R^d, nu, scale factor lambda).
    """
    coef, M, alpha = power_params(kernel.family, kernel.n, kernel.level)
    shift = np.asarray(shift, float)
    Mp = M + 2.0 * shift
    nu = 2.0 * alpha - d
    if not nu > 0:
        raise DomainError("moment-condition", "kernel not integrable in this dimension")
    total = (coef * np.exp(-alpha * np.log1p(2.0 * shift / M)) * (Mp * math.pi) ** (d / 2.0)
             * math.exp(math.lgamma(alpha - d / 2.0) - math.lgamma(alpha)))
    return total, nu, Mp / nu


def _normal_total(d, shift):
    return np.exp(-np.asarray(shift, float)) * (2.0 * math.pi) ** (d / 2.0)


# ---------------------------------------------------------------------------
# quadrature engine

class _QuadSpec:
    """Kernel data shared by every subproblem of one nested integration."""

    def __init__(self, kernel: GeneratorKernel, epsrel: float):
        self.kernel = kernel
        self.family = kernel.family
        self.epsrel = epsrel
        self.k0 = _level_fn(kernel, kernel.level)
        self.k1 = _level_fn(kernel, kernel.level + 1) if kernel.level < 3 else None


def _mass_1d(spec: _QuadSpec, l11, lo, hi, shift, tilt):
    """Batch of int_{lo/l11}^{hi/l11} exp(t y) K(s + y^2/2) dy."""
    a = lo / l11
    b = hi / l11
    fam = spec.family
    if tilt == 0.0:
        if fam.tag == NORMAL:
            return _normal_total(1, shift) * _ndtr_diff(a, b), 0
        if fam.is_power:
            total, nu, lam = _power_total(spec.kernel, 1, shift)
            r = np.sqrt(lam)
            return total * _stdtr_diff(nu, a / r, b / r), 0
    k0 = spec.k0

    def f(y, g):
        return np.exp(tilt * y) * k0(shift[g] + 0.5 * y * y)

    # split at the origin, where the Laplace kernel has its cusp
    ga = np.arange(a.size)
    left_a, left_b = a, np.minimum(b, 0.0)
    right_a, right_b = np.maximum(a, 0.0), b
    aa = np.concatenate([left_a, right_a])
    bb = np.concatenate([left_b, right_b])
    gg = np.concatenate([ga, ga])
    keep = bb > aa
    res = integrate(f, aa[keep], bb[keep], gg[keep], a.size, epsabs=1e-300, epsrel=spec.epsrel)
    return res.value, res.n_evals


def _breakpoints_2d(L, lo, hi):
    """Polar angles where the ray/parallelogram geometry changes, per group."""
    G = lo.shape[0]
    rows = L
    angs = []
    for i in range(2):
        base = math.atan2(rows[i, 1], rows[i, 0])
        angs.append(np.full(G, base + 0.5 * math.pi))
        angs.append(np.full(G, base - 0.5 * math.pi))
    # vertices: row0.y = c0, row1.y = c1
    inv = np.linalg.inv(rows)
    for c0 in (lo[:, 0], hi[:, 0]):
        for c1 in (lo[:, 1], hi[:, 1]):
            ok = np.isfinite(c0) & np.isfinite(c1)
            c0f = np.where(ok, c0, 0.0)
            c1f = np.where(ok, c1, 0.0)
            v = inv @ np.vstack([c0f, c1f])
            ang = np.arctan2(v[1], v[0])
            angs.append(np.where(ok, ang, np.nan))
    A = np.mod(np.vstack(angs).T, 2.0 * math.pi)
    A = np.concatenate([np.zeros((G, 1)), A, np.full((G, 1), 2.0 * math.pi)], axis=1)
    A = np.sort(np.where(np.isnan(A), 2.0 * math.pi, A), axis=1)
    return A


def _mass_2d_polar(spec: _QuadSpec, L, lo, hi, shift):
    """Batch of untilted 2-D masses via  int dtheta [H(s + r_lo^2/2) - H(s + r_hi^2/2)]."""
    G = lo.shape[0]
    H = spec.k1
    A = _breakpoints_2d(L, lo, hi)
    a = A[:, :-1].ravel()
    b = A[:, 1:].ravel()
    g = np.repeat(np.arange(G), A.shape[1] - 1)
    keep = b - a > 1e-15
    r0, r1 = L[0], L[1]

    def f(theta, gid):
        c, s = np.cos(theta), np.sin(theta)
        rlo = np.zeros_like(theta)
        rhi = np.full_like(theta, np.inf)
        empty = np.zeros(theta.shape, bool)
        for row, i in ((r0, 0), (r1, 1)):
            nu = row[0] * c + row[1] * s
            l = lo[gid, i]
            h = hi[gid, i]
            pos = nu > 0
            neg = nu < 0
            with np.errstate(divide="ignore", invalid="ignore"):
                up = np.where(pos, h / nu, np.where(neg, l / nu, np.inf))
                dn = np.where(pos, l / nu, np.where(neg, h / nu, -np.inf))
            up = np.where(np.isnan(up), np.inf, up)
            dn = np.where(np.isnan(dn), -np.inf, dn)
            empty |= (nu == 0) & ((l > 0) | (h < 0))
            rhi = np.minimum(rhi, up)
            rlo = np.maximum(rlo, dn)
        ok = (rhi > rlo) & ~empty
        sg = shift[gid]
        hlo = H(sg + 0.5 * np.where(ok, rlo, 0.0) ** 2)
        rh = np.where(ok, rhi, 0.0)
        hhi = np.where(np.isinf(rh), 0.0, H(sg + 0.5 * np.where(np.isinf(rh), 0.0, rh) ** 2))
        return np.where(ok, hlo - hhi, 0.0)

    res = integrate(f, a[keep], b[keep], g[keep], G, epsabs=1e-300, epsrel=spec.epsrel)
    return res.value, res.n_evals


def _mass_nested(spec: _QuadSpec, L, lo, hi, shift, tilt):
    """Batch of masses for lower-triangular L (d x d), offsets lo/hi (G x d)."""
    d = L.shape[0]
    if d == 1:
        return _mass_1d(spec, L[0, 0], lo[:, 0], hi[:, 0], shift, float(tilt[0]))
    if d == 2 and not np.any(tilt) and spec.k1 is not None:
        return _mass_2d_polar(spec, L, lo, hi, shift)
    G = lo.shape[0]
    a = lo[:, 0] / L[0, 0]
    b = hi[:, 0] / L[0, 0]
    col = L[1:, 0]
    Lsub = L[1:, 1:]
    counter = [0]

    def f(y, g):
        lo2 = lo[g, 1:] - np.outer(y, col)
        hi2 = hi[g, 1:] - np.outer(y, col)
        s2 = shift[g] + 0.5 * y * y
        val, ne = _mass_nested(spec, Lsub, lo2, hi2, s2, tilt[1:])
        counter[0] += ne
        if tilt[0] != 0.0:
            val = val * np.exp(tilt[0] * y)
        return val

    ga = np.arange(G)
    aa = np.concatenate([a, np.maximum(a, 0.0)])
    bb = np.concatenate([np.minimum(b, 0.0), b])
    gg = np.concatenate([ga, ga])
    keep = bb > aa
    res = integrate(f, aa[keep], bb[keep], gg[keep], G, epsabs=1e-300, epsrel=spec.epsrel)
    return res.value, res.n_evals + counter[0]


# ---------------------------------------------------------------------------
# QMC engines

def _reorder(lo, hi, cov):
    """Genz-Bretz variable ordering by smallest expected conditional probability."""
    d = lo.size
    lo = lo.copy()
    hi = hi.copy()
    cov = cov.copy()
    L = np.zeros((d, d))
    y = np.zeros(d)
    perm = np.arange(d)
    for i in range(d):
        best, bi = np.inf, i
        for j in range(i, d):
            sj = cov[j, j] - L[j, :i] @ L[j, :i]
            sj = math.sqrt(max(sj, 1e-300))
            m = L[j, :i] @ y[:i]
            p = float(_ndtr_diff((lo[j] - m) / sj, (hi[j] - m) / sj))
            if p < best:
                best, bi = p, j
        if bi != i:
            for arr in (lo, hi, perm):
                arr[[i, bi]] = arr[[bi, i]]
            cov[[i, bi], :] = cov[[bi, i], :]
            cov[:, [i, bi]] = cov[:, [bi, i]]
            L[[i, bi], :] = L[[bi, i], :]
        L[i, i] = math.sqrt(max(cov[i, i] - L[i, :i] @ L[i, :i], 1e-300))
        for j in range(i + 1, d):
            L[j, i] = (cov[j, i] - L[j, :i] @ L[i, :i]) / L[i, i]
        m = L[i, :i] @ y[:i]
        a = (lo[i] - m) / L[i, i]
        b = (hi[i] - m) / L[i, i]
        p = max(float(_ndtr_diff(a, b)), 1e-300)
        pa = special.ndtr(a) if np.isfinite(a) else 0.0
        pb = special.ndtr(b) if np.isfinite(b) else 1.0
        da = math.exp(-0.5 * a * a) / math.sqrt(2 * math.pi) if np.isfinite(a) else 0.0
        db = math.exp(-0.5 * b * b) / math.sqrt(2 * math.pi) if np.isfinite(b) else 0.0
        y[i] = (da - db) / p if pb > pa or p > 0 else 0.0
    return lo, hi, L


def _genz_eval(u, lo, hi, L, nu):
    """Sequential-conditioning integrand at QMC points ``u`` (N x dim)."""
    N = u.shape[0]
    d = lo.size
    if np.isfinite(nu):
        w = np.sqrt(2.0 * special.gammaincinv(nu / 2.0, u[:, 0]) / nu)
        ur = u[:, 1:]
    else:
        w = np.ones(N)
        ur = u
    prod = np.ones(N)
    y = np.zeros((N, d))
    for i in range(d):
        m = y[:, :i] @ L[i, :i]
        with np.errstate(invalid="ignore"):
            a = (lo[i] * w - m) / L[i, i]
            b = (hi[i] * w - m) / L[i, i]
        a = np.where(np.isnan(a), -np.inf, a)
        b = np.where(np.isnan(b), np.inf, b)
        flip = a > 0
        pa = np.where(flip, special.ndtr(-b), special.ndtr(a))
        pb = np.where(flip, special.ndtr(-a), special.ndtr(b))
        diff = np.maximum(pb - pa, 0.0)
        prod *= diff
        if i < d - 1:
            q = pa + ur[:, i] * diff
            with np.errstate(invalid="ignore"):
                yi = np.where(flip, -special.ndtri(q), special.ndtri(q))
            fallback = np.where(np.isfinite(a), a, np.where(np.isfinite(b), b, 0.0))
            y[:, i] = np.where(np.isfinite(yi), yi, fallback)
    return prod


def _qmc_loop(evaluate, dim, atol, rtol, seed):
    """Randomized QMC with doubling; ``evaluate(points)`` returns integrand values.

    Stops once the randomization std error is below max(atol, rtol*|mean|).
    """
    children = np.random.SeedSequence(seed).spawn(QMC_RANDOMIZATIONS)
    m = QMC_BASE_LOG2
    while True:
        ests = np.empty(QMC_RANDOMIZATIONS)
        for r, child in enumerate(children):
            pts = qmc.Sobol(dim, scramble=True, seed=np.random.default_rng(child)).random_base2(m)
            ests[r] = evaluate(pts).mean()
        mean = ests.mean()
        se = ests.std(ddof=1) / math.sqrt(QMC_RANDOMIZATIONS)
        total = QMC_RANDOMIZATIONS * 2 ** m
        ok = se <= max(atol, rtol * abs(mean))
        if ok or total * 2 > QMC_MAX_POINTS:
            return mean, se, total, ok
        m += 1


def _genz_prob(lo, hi, cov, nu, atol, rtol, seed):
    d = lo.size
    lo2, hi2, L = _reorder(lo, hi, cov)
    dim = d - 1 + (1 if np.isfinite(nu) else 0)
    if dim == 0:
        return float(_ndtr_diff(lo2[0] / L[0, 0], hi2[0] / L[0, 0])), 0.0, 1, True
    return _qmc_loop(lambda u: _genz_eval(u, lo2, hi2, L, nu), dim, atol, rtol, seed)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
_RADIAL_PANELS = ((0.0, 1.0), (1.0, 3.0), (3.0, 7.0), (7.0, 15.0), (15.0, 31.0), (31.0, 63.0))


def _radial_eval(u, spec_kernel, L, lo, hi, shift, tilt_y):
    """Radial-spherical estimator: surface area times the mean radial mass per direction."""
    d = L.shape[0]
    z = special.ndtri(np.clip(u, 1e-16, 1 - 1e-16))
    dirs = z / np.linalg.norm(z, axis=1, keepdims=True)
    nu = dirs @ L.T
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(nu > 0, hi / nu, np.where(nu < 0, lo / nu, np.inf))
        dn = np.where(nu > 0, lo / nu, np.where(nu < 0, hi / nu, -np.inf))
    empty = np.any((nu == 0) & ((lo > 0) | (hi < 0)), axis=1)
    up = np.where(np.isnan(up), np.inf, up)
    dn = np.where(np.isnan(dn), -np.inf, dn)
    rlo = np.maximum(0.0, dn.max(axis=1))
    rhi = up.min(axis=1)
    ok = (rhi > rlo) & ~empty
    k0 = _level_fn(spec_kernel, spec_kernel.level)
    tproj = dirs @ tilt_y
    total = np.zeros(u.shape[0])
    # composite panels of geometrically growing width starting at rlo
    for pa, pb in _RADIAL_PANELS:
        a = np.minimum(rlo + pa, rhi)
        b = np.minimum(rlo + pb, rhi)
        h = 0.5 * (b - a)
        live = ok & (h > 0)
        if not live.any():
            break
        r = 0.5 * (a + b)[live, None] + h[live, None] * _GL_X[None, :]
        vals = r ** (d - 1) * np.exp(tproj[live, None] * r) * k0(shift + 0.5 * r * r)
        total[live] += (vals @ _GL_W) * h[live]
    tail = ok & (rhi > rlo + _RADIAL_PANELS[-1][1])
    if tail.any():
        # beyond the last panel: r = start + x/(1-x) on [0, 1) up to the end point
        start = rlo[tail] + _RADIAL_PANELS[-1][1]
        xend = np.where(np.isfinite(rhi[tail]), (rhi[tail] - start) / (1.0 + rhi[tail] - start), 1.0)
        x = 0.5 * xend[:, None] * (_GL_X[None, :] + 1.0)
        rr = start[:, None] + x / (1.0 - x)
        tv = rr ** (d - 1) * np.exp(tproj[tail][:, None] * rr) * k0(shift + 0.5 * rr * rr) / (1.0 - x) ** 2
        total[tail] += (tv @ _GL_W) * 0.5 * xend
    area = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    return np.where(ok, total, 0.0) * area


# ---------------------------------------------------------------------------
# public entry points

def box_mass_batch(kernel: GeneratorKernel, lower, upper, loc=None, scale=None, shifts=None,
                   tilt=None, engine="auto", tol=1e-10, seed=0, relative=True):
    """Masses of one kernel level for a batch of boxes sharing the same scale.

    ``lower``/``upper``/``loc`` have shape (G, d); ``shifts`` (G,) adds to the
    kernel's own offset. ``tilt`` is a z-space vector ``a`` for the weight
    ``exp(a'(z - loc))``. ``tol`` is a relative accuracy target (absolute in
    mass units when ``relative`` is false). Returns a list of MassEstimate.
    """
    lower = np.atleast_2d(np.asarray(lower, float))
    upper = np.atleast_2d(np.asarray(upper, float))
    G, d = lower.shape
    loc = np.zeros((G, d)) if loc is None else np.broadcast_to(np.asarray(loc, float), (G, d))
    shifts = np.zeros(G) if shifts is None else np.broadcast_to(np.asarray(shifts, float), (G,))
    shift = kernel.shift + shifts
    if d == 0:
        vals = np.asarray(kernel_eval(GeneratorKernel(kernel.family, kernel.level, kernel.n, 0.0), shift), float)
        return [MassEstimate(float(v), 0.0, "exact", 1) for v in np.atleast_1d(vals)]
    S = np.eye(d) if scale is None else np.asarray(scale, float)
    L = np.linalg.cholesky(S)
    lo = lower - loc
    hi = upper - loc
    if np.any(hi <= lo):
        raise DomainError("degenerate-range", "box must have lower < upper")
    a_z = np.zeros(d) if tilt is None else np.asarray(tilt, float)
    t_y = L.T @ a_z
    fam = kernel.family
    factor = np.ones(G)
    if fam.tag == NORMAL and np.any(t_y):
        # exp(t'y - |y|^2/2) = exp(|t|^2/2) exp(-|y - t|^2/2)
        off = L @ t_y
        lo = lo - off
        hi = hi - off
        factor = np.full(G, math.exp(0.5 * t_y @ t_y))
        t_y = np.zeros(d)
    tilted = bool(np.any(t_y))
    if tilted and fam.is_power:
        raise DomainError("divergent-tilt", "exponential moments of power-law kernels are infinite")
    if tilted and fam.tag == LAPLACE and float(np.linalg.norm(t_y)) >= 1.0:
        raise DomainError("divergent-tilt", "tilt too large for the Laplace kernel")

    diagonal = np.allclose(L, np.diag(np.diag(L)))
    if engine == "auto":
        if fam.tag == NORMAL and diagonal:
            engine = "product"
        elif d <= 3:
            engine = "quadrature"
        else:
            engine = "qmc"
    if engine == "product" and not (fam.tag == NORMAL and diagonal):
        engine = "quadrature" if d <= 3 else "qmc"

    if engine == "product":
        dl = np.diag(L)
        vals = _normal_total(d, shift) * np.prod(_ndtr_diff(lo / dl, hi / dl), axis=1) * factor
        return [MassEstimate(float(v), 0.0, "product", d) for v in vals]

    if engine == "quadrature":
        spec = _QuadSpec(kernel, epsrel=max(min(tol, 1e-6), 1e-13))
        vals, ne = _mass_nested(spec, L, lo, hi, shift, t_y)
        vals = vals * factor
        # nested adaptive rules report a conservative error through their tolerance
        return [MassEstimate(float(v), abs(float(v)) * spec.epsrel, "quadrature", int(ne)) for v in vals]

    if engine != "qmc":
        raise DomainError("bad-engine", f"unknown engine {engine!r}")
    out = []
    ss = np.random.SeedSequence(seed).spawn(G)
    for gi in range(G):
        child_seed = int(ss[gi].generate_state(1)[0])
        if not tilted and (fam.tag == NORMAL or fam.is_power):
            if fam.tag == NORMAL:
                total = float(_normal_total(d, shift[gi]))
                nu, lam = np.inf, 1.0
            else:
                total, nu, lam = _power_total(kernel, d, shift[gi])
                total = float(total)
            cov = lam * (L @ L.T)
            atol = 0.0 if relative else tol / max(total, 1e-300)
            p, se, nev, conv = _genz_prob(lo[gi], hi[gi], cov, nu, atol, tol if relative else 0.0,
                                          child_seed)
            val = total * p * factor[gi]
            out.append(MassEstimate(val, total * se * factor[gi], "qmc", int(nev), conv))
        else:
            k_shift = GeneratorKernel(fam, kernel.level, kernel.n, 0.0)
            ev = lambda u, gi=gi: _radial_eval(u, k_shift, L, lo[gi], hi[gi], shift[gi], t_y)
            mean, se, nev, conv = _qmc_loop(ev, d, 0.0 if relative else tol,
                                            tol if relative else 0.0, child_seed)
            out.append(MassEstimate(float(mean * factor[gi]), float(se * factor[gi]), "qmc", int(nev), conv))
    return out


def box_mass(kernel: GeneratorKernel, lower, upper, loc=None, scale=None, tilt=None,
             engine="auto", tol=1e-10, seed=0, relative=True) -> MassEstimate:
    """Single-box version of :func:`box_mass_batch`."""
    lower = np.atleast_1d(np.asarray(lower, float))
    upper = np.atleast_1d(np.asarray(upper, float))
    return box_mass_batch(kernel, lower[None, :], upper[None, :],
                          None if loc is None else np.asarray(loc, float)[None, :],
                          scale, None, tilt, engine, tol, seed, relative)[0]

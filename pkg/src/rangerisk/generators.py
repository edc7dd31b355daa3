"""Density generators of the five elliptical families.

A generator ``g_n`` defines the spherical density ``c_n g_n(x'x / 2)`` in
dimension ``n``. Each family also provides its successive tail integrals
(``Gbar = int_u^inf g``, ``GGbar = int_u^inf Gbar`` and one more level used
internally for planar integrals), the matching normalizing constants and the
closed-form ratios of constants that arise once one or two coordinates are
pinned at a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import special

from .quadrature import QuadratureError, integrate_scalar

NORMAL = "Normal"
STUDENT_T = "StudentT"
LOGISTIC = "Logistic"
LAPLACE = "Laplace"
PEARSON_VII = "PearsonVII"
CUSTOM = "Custom"
TAGS = (NORMAL, STUDENT_T, LOGISTIC, LAPLACE, PEARSON_VII)

LEVEL_NAMES = {"g": 0, "Gbar": 1, "GGbar": 2}
CONSTANT_LEVELS = {"c": 0, "c_star": 1, "c_star_star": 2}


class DomainError(ValueError):
    """Invalid parameters or moment conditions; carries a short machine code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class GeneratorFamily:
    """One of the supported density-generator families.

    ``dof_m`` is the Student-t degrees of freedom and ``shape_t`` the Pearson
    type VII exponent. A ``Custom`` family wraps a user function ``g(u)``;
    its cumulative forms are obtained by quadrature.
    """

    tag: str
    dof_m: Optional[float] = None
    shape_t: Optional[float] = None
    custom_g: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.tag not in TAGS + (CUSTOM,):
            raise DomainError("unknown-family", f"unknown family {self.tag!r}")
        if self.tag == STUDENT_T and not (self.dof_m is not None and self.dof_m > 0):
            raise DomainError("bad-parameter", "Student-t needs dof_m > 0")
        if self.tag == PEARSON_VII and not (self.shape_t is not None and self.shape_t > 0):
            raise DomainError("bad-parameter", "Pearson VII needs shape_t > 0")
        if self.tag == CUSTOM and self.custom_g is None:
            raise DomainError("bad-parameter", "custom family needs a generator function")

    @classmethod
    def normal(cls):
        return cls(NORMAL)

    @classmethod
    def student_t(cls, m):
        return cls(STUDENT_T, dof_m=float(m))

    @classmethod
    def logistic(cls):
        return cls(LOGISTIC)

    @classmethod
    def laplace(cls):
        return cls(LAPLACE)

    @classmethod
    def pearson_vii(cls, t):
        return cls(PEARSON_VII, shape_t=float(t))

    @classmethod
    def custom(cls, g):
        return cls(CUSTOM, custom_g=g)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorFamily":
        tag = d.get("tag") or d.get("name")
        aliases = {"normal": NORMAL, "studentt": STUDENT_T, "student_t": STUDENT_T, "t": STUDENT_T,
                   "logistic": LOGISTIC, "laplace": LAPLACE, "pearsonvii": PEARSON_VII,
                   "pearson_vii": PEARSON_VII, "pearson7": PEARSON_VII}
        tag = aliases.get(str(tag).lower(), tag)
        m = d.get("dof_m", d.get("m"))
        t = d.get("shape_t", d.get("t"))
        return cls(tag, None if m is None else float(m), None if t is None else float(t))

    def to_dict(self) -> dict:
        out = {"tag": self.tag}
        if self.dof_m is not None:
            out["dof_m"] = self.dof_m
        if self.shape_t is not None:
            out["shape_t"] = self.shape_t
        return out

    @property
    def is_power(self) -> bool:
        """True when every cumulative level is a shifted power law."""
        return self.tag in (STUDENT_T, PEARSON_VII)


@dataclass(frozen=True)
class GeneratorKernel:
    """A generator level with an additive offset: ``u -> level_n(u + shift)``.

    ``n`` is the ambient dimension of the family (the Student-t and Pearson VII
    forms depend on it). Level 3 is the next tail integral after ``GGbar``.
    """

    family: GeneratorFamily
    level: int
    n: int
    shift: float = 0.0

    def __post_init__(self):
        lvl = LEVEL_NAMES.get(self.level, self.level) if isinstance(self.level, str) else self.level
        object.__setattr__(self, "level", int(lvl))
        if not 0 <= self.level <= 3:
            raise DomainError("bad-level", f"level must be 0..3, got {self.level}")
        if self.shift < 0 or not np.isfinite(self.shift):
            raise DomainError("bad-shift", "shift must be finite and nonnegative")
        _check_level(self.family, self.n, self.level)

    def shifted(self, extra) -> "GeneratorKernel":
        return replace(self, shift=self.shift + float(extra))

    def next_level(self) -> "GeneratorKernel":
        return replace(self, level=self.level + 1)

    def __call__(self, u):
        return kernel_eval(self, u)


@dataclass(frozen=True)
class NormConstant:
    value: float
    method: str
    abs_error: float = 0.0


# ---------------------------------------------------------------------------
# power-law bookkeeping

def power_params(family: GeneratorFamily, n: int, level: int):
    """Return (coef, scale M, exponent alpha) with level_n(u) = coef*(1+2u/M)^-alpha."""
    if family.tag == STUDENT_T:
        m = family.dof_m
        alpha = 0.5 * (m + n) - level
        coef = 1.0
        for i in range(1, level + 1):
            coef *= m / (m + n - 2 * i)
        return coef, m, alpha
    if family.tag == PEARSON_VII:
        t = family.shape_t
        coef = 1.0
        for i in range(1, level + 1):
            coef /= 2.0 * (t - i)
        return coef, 1.0, t - level
    raise DomainError("not-power", f"{family.tag} is not a power-law family")


def _check_level(family: GeneratorFamily, n: int, level: int):
    if family.tag == STUDENT_T:
        m = family.dof_m
        if level >= 1 and not m + n - 2 * level > 0:
            raise DomainError("moment-condition",
                              f"Student-t level {level} needs m + n > {2 * level}")
    elif family.tag == PEARSON_VII:
        if level >= 1 and not family.shape_t > level:
            raise DomainError("moment-condition",
                              f"Pearson VII level {level} needs t > {level}")


# ---------------------------------------------------------------------------
# kernel values

def _custom_level(g, level, u):
    if level == 0:
        return np.vectorize(lambda x: float(g(x)))(u)

    def one(x):
        return integrate_scalar(lambda v: _custom_level(g, level - 1, v), x, np.inf,
                                epsrel=1e-11)[0]
    return np.vectorize(one)(u)


def kernel_eval(kernel: GeneratorKernel, u):
    """Value of the generator level at ``u + shift``; vectorized over ``u``."""
    u = np.asarray(u, float) + kernel.shift
    fam = kernel.family
    lvl = kernel.level
    if np.any(u < 0):
        raise DomainError("negative-argument", "generator argument must be >= 0")
    with np.errstate(over="ignore", invalid="ignore"):
        if fam.tag == NORMAL:
            out = np.exp(-u)
        elif fam.is_power:
            coef, M, alpha = power_params(fam, kernel.n, lvl)
            out = coef * np.exp(-alpha * np.log1p(2.0 * u / M))
        elif fam.tag == LOGISTIC:
            if lvl == 0:
                out = special.expit(u) * special.expit(-u)
            elif lvl == 1:
                out = special.expit(-u)
            elif lvl == 2:
                out = np.log1p(np.exp(-u))
            else:
                # tail integral of log(1 + e^-v) is -Li2(-e^-u), and spence(1 + z) = Li2(-z)
                out = -special.spence(1.0 + np.exp(-u))
        elif fam.tag == LAPLACE:
            w = np.sqrt(2.0 * u)
            poly = {0: np.ones_like(w), 1: 1.0 + w, 2: 3.0 + 3.0 * w + w * w,
                    3: 15.0 + 15.0 * w + 6.0 * w * w + w ** 3}[lvl]
            out = poly * np.exp(-w)
        else:
            out = _custom_level(fam.custom_g, lvl, u)
    out = np.where(np.isinf(u), 0.0, out)
    return out if out.ndim else float(out)


def kernel_log(kernel: GeneratorKernel, u):
    """Natural log of the kernel, accurate far in the tail."""
    u = np.asarray(u, float) + kernel.shift
    fam = kernel.family
    if fam.tag == NORMAL:
        return -u
    if fam.is_power:
        coef, M, alpha = power_params(fam, kernel.n, kernel.level)
        return math.log(coef) - alpha * np.log1p(2.0 * u / M)
    if fam.tag == LAPLACE:
        w = np.sqrt(2.0 * u)
        poly = {0: np.ones_like(w), 1: 1.0 + w, 2: 3.0 + 3.0 * w + w * w,
                3: 15.0 + 15.0 * w + 6.0 * w * w + w ** 3}[kernel.level]
        return np.log(poly) - w
    with np.errstate(divide="ignore"):
        return np.log(kernel_eval(replace(kernel, shift=0.0), u))


# ---------------------------------------------------------------------------
# normalizing constants

def _radial_moment(family: GeneratorFamily, n_amb: int, level: int, d: int, shift: float = 0.0):
    """Return (value, abs_error, method) of  int_0^inf s^(d/2-1) level_n(s+shift) ds."""
    tag = family.tag
    h = d / 2.0
    if tag == NORMAL:
        return math.gamma(h) * math.exp(-shift), 0.0, "closed_form"
    if family.is_power:
        coef, M, alpha = power_params(family, n_amb, level)
        if not alpha > h:
            raise DomainError("moment-condition",
                              f"{tag} level {level} is not integrable in dimension {d}")
        Mp = M + 2.0 * shift
        pref = coef * (1.0 + 2.0 * shift / M) ** (-alpha)
        return pref * (Mp / 2.0) ** h * special.beta(h, alpha - h), 0.0, "closed_form"
    if tag == LAPLACE and shift == 0.0:
        # s = r^2/2 turns the integral into gamma moments of a polynomial in r
        polys = {0: [1.0], 1: [1.0, 1.0], 2: [3.0, 3.0, 1.0], 3: [15.0, 15.0, 6.0, 1.0]}
        tot = sum(cf * math.gamma(d + i) for i, cf in enumerate(polys[level]))
        return 2.0 ** (1.0 - h) * tot, 0.0, "closed_form"
    if tag == LOGISTIC and shift == 0.0:
        kappa, s_arg = {0: (2, h), 1: (1, h), 2: (1, h + 1.0), 3: (1, h + 2.0)}[level]
        return math.gamma(h) * hurwitz_lerch_psi(kappa, -1.0, s_arg, 1.0), 0.0, "closed_form"
    kern = GeneratorKernel(family, level, n_amb, shift)
    # s = r^2/2 keeps the integrand smooth at the origin (Laplace cusp, d = 1 singularity)
    f = lambda r: r ** (d - 1) * np.asarray(kernel_eval(kern, 0.5 * r * r)) * 2.0 ** (1.0 - h)
    try:
        val, err = integrate_scalar(f, 0.0, np.inf, points=(1e-3, 1.0, 10.0), epsrel=1e-12)
    except QuadratureError as exc:
        raise QuadratureError(f"normalizing integral failed for {tag}", exc.value, exc.error)
    return val, err, "quadrature"


def norm_constant(family: GeneratorFamily, n: int, level="c") -> NormConstant:
    """Normalizing constant c_n, c_n* or c_n** of the family in dimension n."""
    lvl = CONSTANT_LEVELS.get(level, level)
    if n < 1:
        raise DomainError("bad-dimension", "dimension must be >= 1")
    _check_level(family, n, lvl)
    integral, err, method = _radial_moment(family, n, lvl, n)
    scale = math.gamma(n / 2.0) / (2.0 * math.pi) ** (n / 2.0)
    value = scale / integral
    return NormConstant(value, method, value * err / integral if err else 0.0)


def shifted_constant(family: GeneratorFamily, n: int, n_reduced: int, shifts, level="c_star") -> NormConstant:
    """Constant normalizing ``level_n(u + sum(shifts))`` as a density in ``n_reduced`` dimensions."""
    lvl = CONSTANT_LEVELS.get(level, level)
    if n_reduced < 1:
        raise DomainError("bad-dimension", "reduced dimension must be >= 1")
    shift = float(np.sum(shifts))
    integral, err, method = _radial_moment(family, n, lvl, n_reduced, shift)
    scale = math.gamma(n_reduced / 2.0) / (2.0 * math.pi) ** (n_reduced / 2.0)
    value = scale / integral
    return NormConstant(value, method, value * err / integral if err else 0.0)


# ---------------------------------------------------------------------------
# Hurwitz-Lerch zeta

def hurwitz_lerch_psi(kappa: float, z: float, s: float, a: float) -> float:
    """Generalized Hurwitz-Lerch zeta  sum_k Gamma(kappa+k)/(Gamma(kappa) k!) z^k/(k+a)^s."""
    if not a > 0:
        raise DomainError("hurwitz-lerch-domain", "a must be positive")
    if abs(z) > 1 or (z == 1 and not s > kappa) or not s > 0:
        raise DomainError("hurwitz-lerch-domain", "outside the convergence region")
    if z == 0:
        return a ** (-s)
    if abs(z) <= 0.5:
        return _hl_series(kappa, z, s, a)
    return _hl_integral(kappa, z, s, a)


def _hl_series(kappa, z, s, a, max_terms=100000):
    total = 0.0
    coef = 1.0  # Gamma(kappa+k)/(Gamma(kappa) k!)
    zk = 1.0
    for k in range(max_terms):
        term = coef * zk * (k + a) ** (-s)
        total += term
        if k > 2 and abs(term) < 1e-16 * abs(total):
            break
        coef *= (kappa + k) / (k + 1)
        zk *= z
    return total


def _hl_integral(kappa, z, s, a):
    lg = math.lgamma(s)

    def f(t):
        t = np.asarray(t, float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            logv = (s - 1) * np.log(t) - a * t - kappa * np.log1p(-z * np.exp(-t)) - lg
            return np.where(t > 0, np.exp(logv), 0.0)

    # t = x^2 removes the t^(s-1) endpoint singularity for s >= 1/2
    g = lambda x: 2.0 * x * f(x * x)
    val, _ = integrate_scalar(g, 0.0, np.inf, points=(1.0, 3.0), epsrel=1e-13)
    return val


# ---------------------------------------------------------------------------
# marginal generator

def marginal_generator(family: GeneratorFamily, n: int, k: int, u):
    """g_{k,n}(u) = int_0^inf s^((n-k)/2-1) g_n(s+u) ds (unnormalized)."""
    if not 1 <= k <= n:
        raise DomainError("bad-dimension", "need 1 <= k <= n")
    u = np.asarray(u, float)
    if k == n:
        return kernel_eval(GeneratorKernel(family, 0, n), u)
    d = n - k
    out = np.empty(u.shape)
    flat = out.reshape(-1)
    for i, ui in enumerate(u.reshape(-1)):
        flat[i] = _radial_moment(family, n, 0, d, float(ui))[0]
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# closed-form constant ratios for pinned coordinates

def ratio_one_pinned(family: GeneratorFamily, n: int, eta: float) -> float:
    """c_n / c*_{n-1}: constant ratio when coordinate k is pinned at ``eta``.

    The reduced kernel is ``Gbar_n(u + eta^2/2)`` in dimension n-1. For n = 1
    the reduced space is a point and the ratio is ``c_1 Gbar_1(eta^2/2)``.
    """
    tag = family.tag
    e2 = eta * eta
    if n == 1:
        return norm_constant(family, 1).value * float(kernel_eval(GeneratorKernel(family, 1, 1), 0.5 * e2))
    if tag == NORMAL:
        return math.exp(-0.5 * e2) / math.sqrt(2 * math.pi)
    if tag == STUDENT_T:
        m = family.dof_m
        return (math.exp(math.lgamma((m - 1) / 2) - math.lgamma(m / 2)) * math.sqrt(m)
                / (2 * math.sqrt(math.pi)) * (1 + e2 / m) ** (-(m - 1) / 2))
    if tag == PEARSON_VII:
        t = family.shape_t
        return (math.exp(math.lgamma(t - (n + 1) / 2) - math.lgamma(t - n / 2)) / (2 * math.sqrt(math.pi))
                * (1 + e2) ** (-(t - 1) + (n - 1) / 2))
    if tag == LOGISTIC:
        phi = math.exp(-0.5 * e2) / math.sqrt(2 * math.pi)
        return (hurwitz_lerch_psi(1, -math.sqrt(2 * math.pi) * phi, (n - 1) / 2, 1) * phi
                / hurwitz_lerch_psi(2, -1, n / 2, 1))
    if tag == LAPLACE:
        pref = math.exp(math.lgamma(n / 2) - math.lgamma((n - 1) / 2) - math.lgamma(n)) \
            * 2 ** ((n - 3) / 2) / math.sqrt(math.pi)
        return pref * _laplace_pinned_integral(1, n - 1, e2)
    c = norm_constant(family, n).value
    return c / shifted_constant(family, n, n - 1, [0.5 * e2]).value


def ratio_two_pinned(family: GeneratorFamily, n: int, eta1: float, eta2: float) -> float:
    """c_n / c**_{n-2}: constant ratio when two coordinates are pinned.

    The reduced kernel is ``GGbar_n(u + eta1^2/2 + eta2^2/2)`` in dimension
    n-2; for n = 2 the reduced space is a point and the ratio is
    ``c_2 GGbar_2(.)``.
    """
    if n < 2:
        raise DomainError("bad-dimension", "two pinned coordinates need n >= 2")
    tag = family.tag
    e2 = eta1 * eta1 + eta2 * eta2
    if n == 2:
        return norm_constant(family, 2).value * float(kernel_eval(GeneratorKernel(family, 2, 2), 0.5 * e2))
    if tag == NORMAL:
        return math.exp(-0.5 * e2) / (2 * math.pi)
    if tag == STUDENT_T:
        m = family.dof_m
        return m ** (m / 2) / (2 * (m - 2) * math.pi) * (m + e2) ** (-(m - 2) / 2)
    if tag == PEARSON_VII:
        t = family.shape_t
        return (1 + e2) ** (-(t - 2) + (n - 2) / 2) / (4 * (t - 1 - n / 2) * math.pi)
    if tag == LOGISTIC:
        z = math.exp(-0.5 * e2)
        return z * hurwitz_lerch_psi(1, -z, n / 2, 1) / (2 * math.pi * hurwitz_lerch_psi(2, -1, n / 2, 1))
    if tag == LAPLACE:
        pref = (n - 2) * 2 ** ((n - 6) / 2) / (math.pi * math.gamma(n))
        return pref * _laplace_pinned_integral(2, n - 2, e2)
    c = norm_constant(family, n).value
    return c / shifted_constant(family, n, n - 2, [0.5 * e2], "c_star_star").value


def ratio_full(family: GeneratorFamily, n: int) -> float:
    """c_n / c_n*, the weight of the Gbar-law in the second-moment formulas."""
    if family.tag == NORMAL:
        return 1.0
    if family.tag == STUDENT_T:
        m = family.dof_m
        if not m > 2:
            raise DomainError("moment-condition", "Student-t second moments need m > 2")
        return m / (m - 2)
    if family.tag == PEARSON_VII:
        t = family.shape_t
        if not t > n / 2 + 1:
            raise DomainError("moment-condition", "Pearson VII second moments need t > n/2 + 1")
        return 1.0 / (2 * t - n - 2)
    if family.tag == LAPLACE:
        return n + 1.0
    return norm_constant(family, n).value / norm_constant(family, n, "c_star").value


def _laplace_pinned_integral(level, d, e2):
    """int_0^inf t^(d/2-1) level(t + e2/2) dt for the Laplace kernels, via t = r^2/2."""
    kern = GeneratorKernel(GeneratorFamily.laplace(), level, d + level, 0.5 * e2)
    f = lambda r: r ** (d - 1) * np.asarray(kernel_eval(kern, 0.5 * r * r)) * 2.0 ** (1.0 - d / 2)
    return integrate_scalar(f, 0.0, np.inf, points=(1.0, 10.0), epsrel=1e-13)[0]

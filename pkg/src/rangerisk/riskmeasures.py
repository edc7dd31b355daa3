"""Range risk measures: RVaR, RV, MRVaR, MRCov, MRCorr and their oracles.

Conditioning region
-------------------
``region="x_box"`` (default) conditions on the event VaR_p <= X <= VaR_q
componentwise. ``region="y_box"`` conditions on eta_p <= Y <= eta_q for the
standardized vector Y = Sigma^{-1/2}(X - mu) with eta_v = Sigma^{-1/2}(VaR_v - mu).
The two coincide when Sigma is diagonal.

Moments on a box
----------------
For Z = X - mu with density c_n |S|^{-1/2} g(z'S^{-1}z/2) and box [A, B],
integration by parts with S^{-1} z g = -grad Gbar gives

    E[Z 1_box]    = S d,                 d_r = sum_v sgn(v) c_n sigma_rr^{-1/2} J1(r, v)
    E[Z Z' 1_box] = W' S,

where J1(r, v) is the (n-1)-dim mass of Gbar with coordinate r pinned at v
and W collects the level-1 mass, the pinned first-level terms and the
doubly pinned level-2 terms (see ``_box_moments``). sgn(A) = +1, sgn(B) = -1;
pins at infinite thresholds vanish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .boxmass import IntegrationError, box_mass, box_mass_batch
from .distributions import (BoxProbability, EllipticalModel, StandardBox, marginal_vars, sample,
                            sqrt_matrix)
from .generators import DomainError, GeneratorFamily, GeneratorKernel, norm_constant
from .quadrature import integrate

EMPTY_RANGE = 1e-12
REGIONS = ("x_box", "y_box")


# ---------------------------------------------------------------------------
# types

@dataclass(frozen=True)
class RangeSpec:
    """Probability levels 0 <= p_k < q_k <= 1."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, float))
        q = np.atleast_1d(np.asarray(self.q, float))
        if p.shape != q.shape:
            raise DomainError("bad-shape", "p and q must have the same length")
        if np.any(np.isnan(p)) or np.any(np.isnan(q)) or np.any(p < 0) or np.any(q > 1):
            raise DomainError("bad-probability", "levels must lie in [0, 1]")
        if np.any(p == q):
            raise DomainError("degenerate-range", "p_k = q_k gives a zero-probability range")
        if np.any(p > q):
            raise DomainError("inverted-range", "need p_k < q_k")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def uniform(cls, p: float, q: float, n: int) -> "RangeSpec":
        return cls(np.full(n, float(p)), np.full(n, float(q)))

    def to_dict(self) -> dict:
        return {"p": self.p.tolist(), "q": self.q.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RangeSpec":
        try:
            return cls(d["p"], d["q"])
        except KeyError as exc:
            raise DomainError("bad-range", f"range is missing field {exc}") from None


@dataclass
class StandardizedRangeStats:
    eta_p: np.ndarray
    eta_q: np.ndarray
    delta: np.ndarray
    lam: Optional[float]
    denom: BoxProbability


@dataclass
class RiskReport:
    mrvar: np.ndarray
    mrcov: np.ndarray
    mrcorr: np.ndarray
    mrvar_se: np.ndarray
    mrcov_se: np.ndarray
    diagnostics: list = field(default_factory=list)
    region: str = "x_box"
    mrcorr_se: np.ndarray = None

    def __post_init__(self):
        if self.mrcorr_se is None:
            self.mrcorr_se = mrcorr_se(self.mrcov, self.mrcov_se)

    def to_dict(self) -> dict:
        return {
            "region": self.region,
            "mrvar": self.mrvar.tolist(),
            "mrvar_std_error": self.mrvar_se.tolist(),
            "mrcov": self.mrcov.tolist(),
            "mrcov_std_error": self.mrcov_se.tolist(),
            "mrcorr": self.mrcorr.tolist(),
            "mrcorr_std_error": self.mrcorr_se.tolist(),
            "diagnostics": self.diagnostics,
        }


# ---------------------------------------------------------------------------
# thresholds

def _thresholds(model: EllipticalModel, rng):
    """Offsets A = lower - mu and B = upper - mu of the X-space box."""
    if isinstance(rng, StandardBox):
        if rng.lower.size != model.n:
            raise DomainError("bad-shape", "box dimension must equal model dimension")
        return rng.lower - model.mu, rng.upper - model.mu
    if not isinstance(rng, RangeSpec):
        rng = RangeSpec(*rng)
    if rng.p.size != model.n:
        raise DomainError("bad-shape", "range dimension must equal model dimension")
    lo = marginal_vars(model, rng.p)
    hi = marginal_vars(model, rng.q)
    return lo - model.mu, hi - model.mu


def standardize(offsets, root):
    """eta = root^{-1} offset; an infinite entry stays infinite with its own sign.

    Finite entries ignore the infinite ones, which only occur as whole-range
    endpoints (p = 0 or q = 1).
    """
    offsets = np.asarray(offsets, float)
    inf = ~np.isfinite(offsets)
    if not inf.any():
        return np.linalg.solve(root, offsets)
    out = np.empty_like(offsets)
    out[inf] = offsets[inf]
    fin = ~inf
    if fin.any():
        out[fin] = np.linalg.solve(root, np.where(inf, 0.0, offsets))[fin]
    return out


# ---------------------------------------------------------------------------
# engine

class _Terms:
    """Bookkeeping of masses with per-term deterministic seeds and diagnostics."""

    def __init__(self, family, n, tol, seed, engine):
        self.family = family
        self.n = n
        self.tol = tol
        self.seed = seed
        self.engine = engine
        self.c = norm_constant(family, n, "c").value
        self.diag = []
        self.counter = 0

    def _seed(self):
        self.counter += 1
        return int(np.random.SeedSequence([self.seed, self.counter]).generate_state(1)[0])

    def batch(self, label, level, lower, upper, loc, scale, shifts, tilt=None):
        k = GeneratorKernel(self.family, level, self.n)
        res = box_mass_batch(k, lower, upper, loc, scale, shifts, tilt=tilt, engine=self.engine,
                             tol=self.tol, seed=self._seed())
        for i, r in enumerate(res):
            self.diag.append({"term": f"{label}[{i}]" if len(res) > 1 else label,
                              "value": self.c * r.value, "std_error": self.c * r.std_error,
                              "engine": r.engine, "n_evals": r.n_evals, "converged": r.converged})
        return np.array([r.value for r in res]), np.array([r.std_error for r in res])


def _pin_one(S, r):
    idx = [i for i in range(S.shape[0]) if i != r]
    beta = S[idx, r] / S[r, r]
    schur = S[np.ix_(idx, idx)] - np.outer(S[idx, r], S[idx, r]) / S[r, r]
    return idx, beta, 0.5 * (schur + schur.T)


def _pin_two(S, r, t):
    idx = [i for i in range(S.shape[0]) if i not in (r, t)]
    pin = [r, t]
    Spp = S[np.ix_(pin, pin)]
    Spp_inv = np.linalg.inv(Spp)
    Sop = S[np.ix_(idx, pin)]
    B = Sop @ Spp_inv
    schur = S[np.ix_(idx, idx)] - B @ Sop.T
    return idx, Spp, Spp_inv, B, 0.5 * (schur + schur.T)


def _box_moments(family, S, A, B, second, tol, seed, engine):
    """Mass F, first moment M1 and optionally second moment M2 of Z on [A, B].

    All moments are unnormalized (integrals over the box); standard errors
    are propagated to first order assuming independent term errors.
    """
    n = A.size
    T = _Terms(family, n, tol, seed, engine)
    c = T.c
    m, se = T.batch("F", 0, A[None], B[None], None, S, None)
    F, F_se = c * m[0], c * se[0]
    if F < EMPTY_RANGE:
        raise DomainError("empty-range", f"range probability {F:.3e} is below {EMPTY_RANGE:g}")

    # level-1 masses with one coordinate pinned at a finite threshold
    J1 = np.zeros((n, 2))
    J1_se = np.zeros((n, 2))
    pins = [_pin_one(S, r) for r in range(n)]
    for r in range(n):
        idx, beta, schur = pins[r]
        vs = [(j, v) for j, v in enumerate((A[r], B[r])) if np.isfinite(v)]
        if not vs:
            continue
        v = np.array([x for _, x in vs])
        lo = np.tile(A[idx], (v.size, 1))
        hi = np.tile(B[idx], (v.size, 1))
        val, err = T.batch(f"J1[{r}]", 1, lo, hi, np.outer(v, beta), schur, 0.5 * v * v / S[r, r])
        for (j, _), a, e in zip(vs, val, err):
            J1[r, j], J1_se[r, j] = a, e
    sgn = np.array([1.0, -1.0])
    scale = c / np.sqrt(np.diag(S))
    d = scale * (J1 @ sgn)
    d_se = scale * np.sqrt((J1_se ** 2).sum(axis=1))
    M1 = S @ d
    M1_se = np.sqrt((S ** 2) @ (d_se ** 2))
    if not second:
        return F, F_se, M1, M1_se, None, None, T.diag

    m, se = T.batch("Fstar", 1, A[None], B[None], None, S, None)
    Fstar, Fstar_se = c * m[0], c * se[0]
    AB = np.vstack([A, B]).T
    vfin = np.where(np.isfinite(AB), AB, 0.0)

    # level-2 masses with two coordinates pinned
    K = np.zeros((n, n))
    K_se = np.zeros((n, n))
    for r in range(n):
        for t in range(r + 1, n):
            idx, Spp, Spp_inv, Bmat, schur = _pin_two(S, r, t)
            combos = [(i, j) for i in range(2) for j in range(2)
                      if np.isfinite(AB[r, i]) and np.isfinite(AB[t, j])]
            if not combos:
                continue
            z = np.array([[AB[r, i], AB[t, j]] for i, j in combos])
            shifts = 0.5 * np.einsum("gi,ij,gj->g", z, Spp_inv, z)
            loc = z @ Bmat.T
            lo = np.tile(A[idx], (len(combos), 1))
            hi = np.tile(B[idx], (len(combos), 1))
            val, err = T.batch(f"K[{r},{t}]", 2, lo, hi, loc, schur if idx else None, shifts)
            w = np.array([sgn[i] * sgn[j] for i, j in combos])
            pref = c / math.sqrt(np.linalg.det(Spp))
            K[r, t] = K[t, r] = pref * (w @ val)
            K_se[r, t] = K_se[t, r] = pref * math.sqrt((err ** 2).sum())

    W = np.zeros((n, n))
    W_se2 = np.zeros((n, n))
    for r in range(n):
        idx, beta, schur = pins[r]
        vJ = (J1 * vfin)[r] @ sgn * scale[r]
        vJ_se2 = ((J1_se * vfin)[r] ** 2).sum() * scale[r] ** 2
        W[r, r] = Fstar + vJ
        W_se2[r, r] = Fstar_se ** 2 + vJ_se2
        for a, l in enumerate(idx):
            others = [b for b, rp in enumerate(idx)]
            Ksum = sum(schur[a, b] * K[r, idx[b]] for b in others)
            Ksum_se2 = sum((schur[a, b] * K_se[r, idx[b]]) ** 2 for b in others)
            W[r, l] = beta[a] * vJ + Ksum
            W_se2[r, l] = beta[a] ** 2 * vJ_se2 + Ksum_se2
    M2 = W.T @ S
    M2 = 0.5 * (M2 + M2.T)
    M2_se = np.sqrt(W_se2.T @ (S ** 2))
    M2_se = 0.5 * (M2_se + M2_se.T)
    return F, F_se, M1, M1_se, M2, M2_se, T.diag


def _moments(model: EllipticalModel, rng, region, second, tol, seed, engine):
    if region not in REGIONS:
        raise DomainError("bad-region", f"region must be one of {REGIONS}")
    A, B = _thresholds(model, rng)
    if np.any(B <= A):
        raise DomainError("degenerate-range", "range must have lower < upper")
    if region == "x_box" or model.n == 1:
        S = model.sigma
        root = None
    else:
        root = sqrt_matrix(model.sigma)
        A, B = standardize(A, root), standardize(B, root)
        if np.any(B <= A):
            raise DomainError("empty-range", "standardized box is empty")
        S = np.eye(model.n)
    out = _box_moments(model.family, S, A, B, second, tol, seed, engine)
    return out, root


def _check(diag, strict):
    bad = [d["term"] for d in diag if not d["converged"]]
    if bad and strict:
        raise IntegrationError(f"tolerance not reached for {', '.join(bad)}", diag)


def mrvar(model: EllipticalModel, rng, tol: float = 1e-8, seed: int = 0, region: str = "x_box",
          engine: str = "auto", strict: bool = False, with_error: bool = False):
    """Conditional mean of X on the range event; returns (vector, diagnostics).

    ``rng`` is a RangeSpec, a (p, q) pair, or a StandardBox of raw thresholds.
    With ``with_error`` the std error vector is returned as a third element.
    """
    (F, F_se, M1, M1_se, _, _, diag), root = _moments(model, rng, region, False, tol, seed, engine)
    _check(diag, strict)
    y = M1 / F
    y_se = np.sqrt((M1_se / F) ** 2 + (M1 * F_se / F ** 2) ** 2)
    if root is not None:
        y, y_se = root @ y, np.sqrt((root ** 2) @ (y_se ** 2))
    out = model.mu + y
    return (out, diag, y_se) if with_error else (out, diag)


def mrcov(model: EllipticalModel, rng, tol: float = 1e-8, seed: int = 0, region: str = "x_box",
          engine: str = "auto", strict: bool = False, with_error: bool = False):
    """Conditional covariance of X on the range event; returns (matrix, diagnostics)."""
    rep = risk_report(model, rng, tol, seed, region, engine, strict)
    return (rep.mrcov, rep.diagnostics, rep.mrcov_se) if with_error else (rep.mrcov, rep.diagnostics)


def mrcorr(cov) -> np.ndarray:
    """Normalize a covariance matrix to a correlation matrix."""
    cov = np.asarray(cov, float)
    dg = np.diag(cov)
    if np.any(dg <= 0):
        raise DomainError("nonpositive-diagonal", "covariance diagonal must be positive")
    s = np.sqrt(dg)
    r = cov / np.outer(s, s)
    r = np.clip(0.5 * (r + r.T), -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return r


def mrcorr_se(cov, cov_se):
    """First-order std error of the correlation; the unit diagonal is exact."""
    d = np.sqrt(np.diag(cov))
    rel_d = np.diag(cov_se) / np.diag(cov)
    with np.errstate(divide="ignore", invalid="ignore"):
        se = np.sqrt((cov_se / np.outer(d, d)) ** 2
                     + 0.25 * (cov / np.outer(d, d)) ** 2 * (rel_d[:, None] ** 2 + rel_d[None, :] ** 2))
    np.fill_diagonal(se, 0.0)
    return se


def risk_report(model: EllipticalModel, rng, tol: float = 1e-8, seed: int = 0, region: str = "x_box",
                engine: str = "auto", strict: bool = False) -> RiskReport:
    """MRVaR, MRCov and MRCorr with first-order error estimates."""
    (F, F_se, M1, M1_se, M2, M2_se, diag), root = _moments(model, rng, region, True, tol, seed, engine)
    _check(diag, strict)
    m = M1 / F
    m_se = np.sqrt((M1_se / F) ** 2 + (M1 * F_se / F ** 2) ** 2)
    cov = M2 / F - np.outer(m, m)
    cov = 0.5 * (cov + cov.T)
    cov_se = np.sqrt((M2_se / F) ** 2 + (M2 * F_se / F ** 2) ** 2
                     + np.outer(m_se, np.abs(m)) ** 2 + np.outer(np.abs(m), m_se) ** 2)
    if root is not None:
        m, m_se = root @ m, np.sqrt((root ** 2) @ (m_se ** 2))
        cov = root @ cov @ root
        cov = 0.5 * (cov + cov.T)
        cov_se = np.sqrt((root ** 2) @ (cov_se ** 2) @ (root ** 2))
    return RiskReport(model.mu + m, cov, mrcorr(cov), m_se, cov_se, diag, region)


def standardized_range_stats(model: EllipticalModel, rng, tol: float = 1e-8, seed: int = 0,
                             engine: str = "auto") -> StandardizedRangeStats:
    """Standardized thresholds, delta vector, lambda (n = 1) and F_Y on the Y-space box."""
    A, B = _thresholds(model, rng)
    root = sqrt_matrix(model.sigma)
    ep, eq = standardize(A, root), standardize(B, root)
    F, F_se, M1, _, _, _, diag = _box_moments(model.family, np.eye(model.n), ep, eq, False, tol, seed,
                                              engine)
    lam = None
    if model.n == 1:
        c = norm_constant(model.family, 1, "c").value
        k = GeneratorKernel(model.family, 1, 1)
        lam = 0.0
        for sgn, v in ((1.0, ep[0]), (-1.0, eq[0])):
            if np.isfinite(v):
                lam += sgn * c * v * float(k(0.5 * v * v))
    d0 = diag[0]
    return StandardizedRangeStats(ep, eq, M1, lam,
                                  BoxProbability(F, F_se, d0["engine"], d0["n_evals"], d0["converged"]))


# ---------------------------------------------------------------------------
# univariate

def _as_univariate(model):
    if model.n != 1:
        raise DomainError("bad-dimension", "univariate measure needs a 1-dim model")


def rvar(model: EllipticalModel, p: float, q: float, tol: float = 1e-10) -> float:
    """Range Value-at-Risk of a 1-dim elliptical model."""
    _as_univariate(model)
    return float(mrvar(model, RangeSpec([p], [q]), tol=tol)[0][0])


def rv(model: EllipticalModel, p: float, q: float, tol: float = 1e-10) -> float:
    """Range variance of a 1-dim elliptical model."""
    _as_univariate(model)
    return float(risk_report(model, RangeSpec([p], [q]), tol=tol).mrcov[0, 0])


# ---------------------------------------------------------------------------
# Monte-Carlo oracle

ORACLE_GROUPS = 20
ORACLE_CHUNK = 1_000_000
MIN_ACCEPTED = 1000


@dataclass
class OracleResult:
    mrvar: np.ndarray
    mrvar_se: np.ndarray
    mrcov: np.ndarray
    mrcov_se: np.ndarray
    accepted: int
    draws: int
    mode: str


def oracle_draws(range_prob: float, base: int = 10_000_000, target_accepted: int = 20_000,
                 cap: int = 400_000_000) -> int:
    """Draw count giving about ``target_accepted`` hits for a range of probability ``range_prob``."""
    need = int(math.ceil(target_accepted / max(range_prob, 1e-300)))
    return int(min(max(base, need), cap))


def _jackknife(stats):
    """Leave-one-group-out estimates; ``stats`` holds per-group (count, sum x, sum xx')."""
    cnt, s1, s2 = stats
    tc, t1, t2 = cnt.sum(), s1.sum(axis=0), s2.sum(axis=0)

    def est(c, a, b):
        m = a / c
        return m, b / c - np.outer(m, m)

    full_m, full_c = est(tc, t1, t2)
    g = cnt.size
    ms, cs = [], []
    for i in range(g):
        m, cv = est(tc - cnt[i], t1 - s1[i], t2 - s2[i])
        ms.append(m)
        cs.append(cv)
    ms, cs = np.array(ms), np.array(cs)
    fac = (g - 1) / g
    m_se = np.sqrt(fac * ((ms - ms.mean(axis=0)) ** 2).sum(axis=0))
    c_se = np.sqrt(fac * ((cs - cs.mean(axis=0)) ** 2).sum(axis=0))
    return full_m, m_se, full_c, c_se


def oracle(model: EllipticalModel, rng, mode: str = "y_box", draws: int = 10_000_000, seed: int = 0,
           sampler: Callable = None) -> OracleResult:
    """Conditional sample mean and covariance with 20-group jackknife errors.

    ``sampler(count, generator)`` may replace the model's spherical sampler
    and must return standardized draws Y (X = mu + Sigma^{1/2} Y).
    """
    if mode not in REGIONS:
        raise DomainError("bad-region", f"mode must be one of {REGIONS}")
    if draws < 10_000:
        raise DomainError("too-few-draws", "oracle needs at least 1e4 draws")
    n = model.n
    A, B = _thresholds(model, rng)
    root = sqrt_matrix(model.sigma)
    if mode == "y_box":
        lo, hi = standardize(A, root), standardize(B, root)
    else:
        lo, hi = A, B
    children = np.random.SeedSequence(seed).spawn(ORACLE_GROUPS)
    per = [draws // ORACLE_GROUPS + (1 if i < draws % ORACLE_GROUPS else 0) for i in range(ORACLE_GROUPS)]
    cnt = np.zeros(ORACLE_GROUPS)
    s1 = np.zeros((ORACLE_GROUPS, n))
    s2 = np.zeros((ORACLE_GROUPS, n, n))
    for gi, child in enumerate(children):
        gen = np.random.default_rng(child)
        left = per[gi]
        while left > 0:
            k = min(left, ORACLE_CHUNK)
            y = sampler(k, gen) if sampler else sample(model.family, n, k, gen)
            z = y @ root
            test = y if mode == "y_box" else z
            ok = np.all((test >= lo) & (test <= hi), axis=1)
            zz = z[ok]
            cnt[gi] += zz.shape[0]
            s1[gi] += zz.sum(axis=0)
            s2[gi] += zz.T @ zz
            left -= k
    total = int(cnt.sum())
    if total < MIN_ACCEPTED:
        raise DomainError("too-few-accepted", f"only {total} accepted draws (need {MIN_ACCEPTED})")
    m, m_se, c, c_se = _jackknife((cnt, s1, s2))
    return OracleResult(model.mu + m, m_se, c, c_se, total, draws, mode)


def oracle_mrvar(model, rng, mode="y_box", draws=10_000_000, seed=0):
    r = oracle(model, rng, mode, draws, seed)
    return r.mrvar, r.mrvar_se


def oracle_mrcov(model, rng, mode="y_box", draws=10_000_000, seed=0):
    r = oracle(model, rng, mode, draws, seed)
    return r.mrcov, r.mrcov_se


# ---------------------------------------------------------------------------
# log-elliptical

def _psi_normal(u):
    return np.exp(-np.asarray(u, float))


def _psi_laplace(u):
    u = np.asarray(u, float)
    if np.any(u <= -1.0):
        raise DomainError("divergent-psi", "Laplace characteristic generator needs u > -1")
    return 1.0 / (1.0 + u)


@dataclass(frozen=True)
class LogEllipticalModel:
    """Z = exp(X) with X elliptical.

    ``generator`` is "normal", "laplace" (the normal variance mixture with an
    Exp(1) mixing variable, characteristic generator 1/(1+u)) or a
    GeneratorFamily together with its characteristic generator ``psi``.
    """

    mu: np.ndarray
    sigma: np.ndarray
    generator: object = "normal"
    psi: Optional[Callable] = None

    def __post_init__(self):
        base = EllipticalModel(self.mu, self.sigma, GeneratorFamily.normal())
        object.__setattr__(self, "mu", base.mu)
        object.__setattr__(self, "sigma", base.sigma)
        gen = self.generator
        if isinstance(gen, str):
            gen = gen.lower()
            if gen not in ("normal", "laplace"):
                raise DomainError("bad-family", "built-in log generators are 'normal' and 'laplace'")
            object.__setattr__(self, "generator", gen)
            if self.psi is None:
                object.__setattr__(self, "psi", _psi_normal if gen == "normal" else _psi_laplace)
        elif isinstance(gen, GeneratorFamily):
            if gen.is_power:
                raise DomainError("divergent-psi", "power-law families have no exponential moments")
            if self.psi is None:
                raise DomainError("missing-psi", "a characteristic generator is required")
        else:
            raise DomainError("bad-family", "unknown log-elliptical generator")
        if self.generator == "laplace" and np.any(np.diag(self.sigma) >= 2.0):
            raise DomainError("divergent-psi", "Laplace log model needs sigma_kk < 2")

    def check_pairs(self):
        """Finiteness of psi at -(sigma_kk + 2 sigma_kj + sigma_jj)/2, needed for the covariance."""
        if self.generator == "laplace":
            s = self.sigma
            dg = np.diag(s)
            if np.any(np.add.outer(dg, dg) + 2.0 * s >= 2.0):
                raise DomainError("divergent-psi",
                                  "Laplace log covariance needs sigma_kk + 2 sigma_kj + sigma_jj < 2")

    @property
    def n(self) -> int:
        return self.mu.size

    def log_model_quantile(self, p):
        """Componentwise quantiles of X = ln Z."""
        p = np.broadcast_to(np.asarray(p, float), (self.n,))
        sd = np.sqrt(np.diag(self.sigma))
        if self.generator == "normal":
            z = special.ndtri(p)
        elif self.generator == "laplace":
            # one-dimensional Laplace with scale sqrt(sigma_kk / 2), written per unit scale
            with np.errstate(divide="ignore"):
                z = np.where(p < 0.5, np.log(2.0 * p), -np.log(2.0 * (1.0 - p))) / math.sqrt(2.0)
        else:
            return marginal_vars(EllipticalModel(self.mu, self.sigma, self.generator), p)
        return self.mu + sd * z


def _log_box(model: LogEllipticalModel, rng):
    if isinstance(rng, StandardBox):
        with np.errstate(divide="ignore"):
            return np.log(rng.lower) - model.mu, np.log(rng.upper) - model.mu
    if not isinstance(rng, RangeSpec):
        rng = RangeSpec(*rng)
    return model.log_model_quantile(rng.p) - model.mu, model.log_model_quantile(rng.q) - model.mu


def _sml_masses(S, A, B, tilts, tol, seed):
    """Tilted box probabilities E[exp(a'X) 1_box] for X = sqrt(W) N(0, S), W ~ Exp(1).

    Conditional on W = w the tilt is a location shift, so the mass is a 1-D
    integral over w of normal box probabilities.
    """
    n = A.size
    c = norm_constant(GeneratorFamily.normal(), n, "c").value
    k0 = GeneratorKernel(GeneratorFamily.normal(), 0, n)
    tilts = np.atleast_2d(tilts)
    G = tilts.shape[0]
    q = np.einsum("gi,ij,gj->g", tilts, S, tilts)
    St = tilts @ S

    def f(w, g):
        sw = np.sqrt(w)
        safe = np.maximum(sw, 1e-300)
        lo = A[None, :] / safe[:, None] - sw[:, None] * St[g]
        hi = B[None, :] / safe[:, None] - sw[:, None] * St[g]
        res = box_mass_batch(k0, lo, hi, None, S, None, engine="auto", tol=tol, seed=seed)
        p = c * np.array([r.value for r in res])
        return np.exp(-w * (1.0 - 0.5 * q[g])) * p

    # w is split at 1 so the small-w behavior near the origin is resolved
    a = np.concatenate([np.zeros(G), np.ones(G)])
    b = np.concatenate([np.ones(G), np.full(G, np.inf)])
    gg = np.concatenate([np.arange(G)] * 2)
    res = integrate(f, a, b, gg, G, epsabs=1e-300, epsrel=max(tol, 1e-11))
    return res.value, np.abs(res.value) * max(tol, 1e-11)


def _log_tilted(model: LogEllipticalModel, A, B, tilts, tol, seed, engine, region):
    """E[exp(a'(X - mu)) 1_box] for each tilt row, plus the untilted mass first."""
    n = model.n
    tilts = np.vstack([np.zeros(n), np.atleast_2d(tilts)])
    if region == "y_box":
        root = sqrt_matrix(model.sigma)
        A, B = standardize(A, root), standardize(B, root)
        S = np.eye(n)
        tilts = tilts @ root
    else:
        S = model.sigma
    if model.generator == "laplace":
        vals, errs = _sml_masses(S, A, B, tilts, tol, seed)
        return vals, errs
    fam = GeneratorFamily.normal() if model.generator == "normal" else model.generator
    c = norm_constant(fam, n, "c").value
    k = GeneratorKernel(fam, 0, n)
    vals, errs = [], []
    for i, a in enumerate(tilts):
        r = box_mass(k, A, B, scale=S, tilt=a if np.any(a) else None, engine=engine, tol=tol,
                     seed=int(np.random.SeedSequence([seed, i]).generate_state(1)[0]))
        vals.append(c * r.value)
        errs.append(c * r.std_error)
    return np.array(vals), np.array(errs)


def log_mrvar(model: LogEllipticalModel, rng, tol: float = 1e-9, seed: int = 0, engine: str = "auto",
              region: str = "x_box"):
    """Conditional mean of Z = exp(X) on the range event; returns (vector, details)."""
    A, B = _log_box(model, rng)
    n = model.n
    vals, errs = _log_tilted(model, A, B, np.eye(n), tol, seed, engine, region)
    F = vals[0]
    if F < EMPTY_RANGE:
        raise DomainError("empty-range", f"range probability {F:.3e} is below {EMPTY_RANGE:g}")
    psi = np.asarray(model.psi(-0.5 * np.diag(model.sigma)), float)
    f_dagger = vals[1:] / psi
    out = np.exp(model.mu) * psi * f_dagger / F
    se = np.abs(out) * np.sqrt((errs[1:] / vals[1:]) ** 2 + (errs[0] / F) ** 2)
    return out, {"F": F, "F_dagger": f_dagger, "psi": psi, "std_error": se}


def log_mrcov(model: LogEllipticalModel, rng, tol: float = 1e-9, seed: int = 0, engine: str = "auto",
              region: str = "x_box"):
    """Conditional covariance of Z = exp(X) on the range event; returns (matrix, details)."""
    model.check_pairs()
    A, B = _log_box(model, rng)
    n = model.n
    pairs = [(k, j) for k in range(n) for j in range(k, n)]
    tilts = np.vstack([np.eye(n)] + [np.eye(n)[k] + np.eye(n)[j] for k, j in pairs])
    vals, errs = _log_tilted(model, A, B, tilts, tol, seed, engine, region)
    F = vals[0]
    if F < EMPTY_RANGE:
        raise DomainError("empty-range", f"range probability {F:.3e} is below {EMPTY_RANGE:g}")
    Tk = vals[1:n + 1]
    out = np.zeros((n, n))
    s = model.sigma
    f_ddagger = np.zeros((n, n))
    for i, (k, j) in enumerate(pairs):
        Tkj = vals[n + 1 + i]
        psi_kj = float(model.psi(-0.5 * (s[k, k] + 2.0 * s[k, j] + s[j, j])))
        f_ddagger[k, j] = f_ddagger[j, k] = Tkj / psi_kj
        v = math.exp(model.mu[k] + model.mu[j]) * (Tkj / F - Tk[k] * Tk[j] / F ** 2)
        out[k, j] = out[j, k] = v
    return out, {"F": F, "F_ddagger": f_ddagger}


def sample_log_model(model: LogEllipticalModel, count: int, seed=0) -> np.ndarray:
    """Draws of X = ln Z for the built-in generators."""
    gen = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    L = np.linalg.cholesky(model.sigma)
    z = gen.standard_normal((count, model.n)) @ L.T
    if model.generator == "laplace":
        z = z * np.sqrt(gen.exponential(size=count))[:, None]
    elif model.generator != "normal":
        z = sample(model.generator, model.n, count, gen) @ sqrt_matrix(model.sigma)
    return model.mu + z

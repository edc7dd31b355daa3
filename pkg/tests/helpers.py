"""Shared fixtures and property checks for the unit and acceptance suites."""

import math

import numpy as np
from scipy import stats

from rangerisk import paperdata as P
from rangerisk.distributions import EllipticalModel
from rangerisk.generators import GeneratorFamily
from rangerisk.riskmeasures import RangeSpec, risk_report, rv, rvar

FAMILIES = {
    "normal": GeneratorFamily.normal(),
    "student_t": GeneratorFamily.student_t(5.0),
    "logistic": GeneratorFamily.logistic(),
    "laplace": GeneratorFamily.laplace(),
    "pearson_vii": GeneratorFamily.pearson_vii(5.0),
}

# oracle families on the three-asset location and scale
ORACLE_FAMILIES = {
    "normal": GeneratorFamily.normal(),
    "student_t4": GeneratorFamily.student_t(4.0),
    "logistic": GeneratorFamily.logistic(),
    "laplace": GeneratorFamily.laplace(),
    "pearson_vii5": GeneratorFamily.pearson_vii(5.0),
}


def random_model(rng, family, n=3):
    a = rng.normal(size=(n, n))
    sigma = a @ a.T / n + 0.3 * np.eye(n)
    return EllipticalModel(rng.normal(size=n), sigma, family)


def random_range(rng, n=3):
    p = rng.uniform(0.0, 0.45, n)
    q = rng.uniform(0.55, 1.0, n)
    p[rng.random(n) < 0.2] = 0.0
    q[rng.random(n) < 0.2] = 1.0
    return RangeSpec(p, q)


def property_deviations(family, n_models, seed, tol=1e-10):
    """Worst violations of the homogeneity, translation, standardization and PSD properties."""
    rng = np.random.default_rng(seed)
    worst = {"homogeneity": 0.0, "translation": 0.0, "constant_limit": 0.0, "psd": 0.0, "symmetry": 0.0}
    for _ in range(n_models):
        m = random_model(rng, family)
        r = random_range(rng)
        base = risk_report(m, r, tol=tol)
        for c in (0.5, 2.0, 10.0):
            rc = risk_report(EllipticalModel(c * m.mu, c * c * m.sigma, family), r, tol=tol)
            worst["homogeneity"] = max(worst["homogeneity"],
                                       np.max(np.abs(rc.mrvar - c * base.mrvar)) / c,
                                       np.max(np.abs(rc.mrcov - c * c * base.mrcov)) / (c * c))
        g = rng.normal(size=m.n) * 3
        rt = risk_report(EllipticalModel(m.mu + g, m.sigma, family), r, tol=tol)
        worst["translation"] = max(worst["translation"], np.max(np.abs(rt.mrvar - base.mrvar - g)),
                                   np.max(np.abs(rt.mrcov - base.mrcov)))
        # a constant vector is the zero-scale limit
        eps = 1e-6
        re = risk_report(EllipticalModel(m.mu, eps * eps * m.sigma, family), r, tol=tol)
        worst["constant_limit"] = max(worst["constant_limit"], np.max(np.abs(re.mrcov)),
                                      np.max(np.abs(re.mrvar - m.mu)) * 1e-6)
        cov = base.mrcov
        worst["symmetry"] = max(worst["symmetry"], np.max(np.abs(cov - cov.T)))
        worst["psd"] = max(worst["psd"], -np.linalg.eigvalsh(cov)[0] / np.trace(cov))
    return worst


def independence_deviation(n_models, seed, tol=1e-10):
    """Normal with diagonal scale: MRVaR/MRCov against univariate RVaR/RV."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_models):
        mu = rng.normal(size=3)
        sd = rng.uniform(0.3, 2.0, 3)
        r = random_range(rng)
        rep = risk_report(EllipticalModel(mu, np.diag(sd ** 2), GeneratorFamily.normal()), r, tol=tol)
        for k in range(3):
            uni = EllipticalModel([mu[k]], [[sd[k] ** 2]], GeneratorFamily.normal())
            worst = max(worst, abs(rep.mrvar[k] - rvar(uni, r.p[k], r.q[k])),
                        abs(rep.mrcov[k, k] - rv(uni, r.p[k], r.q[k])))
        off = rep.mrcov - np.diag(np.diag(rep.mrcov))
        worst = max(worst, np.max(np.abs(off)))
    return worst


def tce_deviation(seed, n_models=20, tol=1e-10):
    """q = 1 limits: univariate TCE and the independent-Y multivariate tail expectation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_models):
        mu, sd, p = rng.normal(), rng.uniform(0.3, 3.0), rng.uniform(0.01, 0.99)
        uni = EllipticalModel([mu], [[sd * sd]], GeneratorFamily.normal())
        tce = mu + sd * stats.norm.pdf(stats.norm.ppf(p)) / (1 - p)
        worst = max(worst, abs(rvar(uni, p, 1.0, tol=tol) - tce))
        m = random_model(rng, GeneratorFamily.normal())
        pv = rng.uniform(0.05, 0.95, 3)
        rep = risk_report(m, RangeSpec(pv, np.ones(3)), tol=tol, region="y_box")
        from rangerisk.distributions import sqrt_matrix
        root = sqrt_matrix(m.sigma)
        eta = np.linalg.solve(root, (m.mu + np.sqrt(np.diag(m.sigma)) * stats.norm.ppf(pv)) - m.mu)
        tail = stats.norm.sf(eta)
        F = np.prod(tail)
        delta = np.array([stats.norm.pdf(eta[k]) * np.prod(np.delete(tail, k)) for k in range(3)])
        worst = max(worst, np.max(np.abs(rep.mrvar - (m.mu + root @ delta / F))))
    return worst


def symmetric_range_deviation(family, seed, n_models=4, tol=1e-9):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_models):
        m = random_model(rng, family)
        p = rng.uniform(0.0, 0.45, 3)
        rep = risk_report(m, RangeSpec(p, 1 - p), tol=tol)
        worst = max(worst, np.max(np.abs(rep.mrvar - m.mu)))
    return worst


def three_asset_model(name):
    return P.model3(name)


def z_scores(a, a_se, b, b_se):
    return (np.asarray(a) - np.asarray(b)) / np.sqrt(np.asarray(a_se) ** 2 + np.asarray(b_se) ** 2)


def log_normal_truncated_mean(mu, s, lo, hi):
    """E[e^X | lo <= X <= hi] for X ~ N(mu, s^2), by 1-D quadrature."""
    from scipy import integrate
    a = (lo - mu) / s
    b = (hi - mu) / s
    num = integrate.quad(lambda z: math.exp(mu + s * z - 0.5 * z * z) / math.sqrt(2 * math.pi), a, b, epsabs=0, epsrel=1e-13)[0]
    return num / (stats.norm.cdf(b) - stats.norm.cdf(a))

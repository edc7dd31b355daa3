import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy import stats

from rangerisk.boxmass import box_mass, box_mass_batch
from rangerisk.generators import DomainError, GeneratorFamily, GeneratorKernel, norm_constant
from rangerisk.quadrature import QuadratureError, integrate, integrate_scalar


def test_integrate_grouped_and_infinite():
    f = lambda x, g: np.where(g == 0, np.exp(-x * x), 1.0 / (1.0 + x * x))
    res = integrate(f, [-np.inf, 0.0, 1.0], [np.inf, 1.0, np.inf], group=[0, 1, 1])
    assert res.converged
    assert res.value[0] == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert res.value[1] == pytest.approx(math.pi / 2, rel=1e-12)


def test_integrate_reversed_interval_changes_sign():
    res = integrate(lambda x, g: x ** 2, [1.0], [0.0])
    assert res.value[0] == pytest.approx(-1.0 / 3.0, rel=1e-13)


def test_integrate_scalar_endpoint_singularity():
    val, err = integrate_scalar(lambda x: 1.0 / np.sqrt(np.maximum(x, 1e-300)), 0.0, 1.0, epsrel=1e-7)
    assert val == pytest.approx(2.0, rel=1e-7)


def test_integrate_strict_failure():
    with pytest.raises(QuadratureError):
        integrate(lambda x, g: np.sin(1.0 / np.maximum(np.abs(x), 1e-300)), [0.0], [1.0], epsrel=1e-14,
                  max_iter=3, strict=True)


@pytest.mark.parametrize("d", [2, 3])
def test_normal_quadrature_matches_product_on_random_boxes(d):
    rng = np.random.default_rng(d)
    k = GeneratorKernel(GeneratorFamily.normal(), 0, d)
    c = norm_constant(GeneratorFamily.normal(), d).value
    for _ in range(25):
        lo = rng.uniform(-3, 1, d)
        hi = lo + rng.uniform(0.2, 3, d)
        lo[rng.random(d) < 0.2] = -np.inf
        hi[rng.random(d) < 0.2] = np.inf
        a = box_mass(k, lo, hi, engine="product").value
        b = box_mass(k, lo, hi, engine="quadrature", tol=1e-11).value
        assert c * b == pytest.approx(c * a, abs=1e-8)


@pytest.mark.parametrize("fam", [GeneratorFamily.student_t(4.0), GeneratorFamily.laplace(),
                                 GeneratorFamily.logistic(), GeneratorFamily.pearson_vii(5.0)])
def test_correlated_quadrature_matches_nquad(fam):
    S = np.array([[1.0, 0.4, -0.2], [0.4, 1.5, 0.3], [-0.2, 0.3, 0.8]])
    lo = np.array([-0.5, -1.0, 0.2])
    hi = np.array([1.0, 0.5, 1.5])
    k = GeneratorKernel(fam, 1, 3)
    Si = np.linalg.inv(S)
    L = np.linalg.cholesky(S)
    det = math.sqrt(np.linalg.det(S))
    from rangerisk.generators import kernel_eval

    def f(z1, z2, z3):
        z = np.array([z1, z2, z3])
        return float(kernel_eval(k, 0.5 * z @ Si @ z)) / det

    ref = sp_integrate.nquad(f, list(zip(lo, hi)), opts={"epsrel": 1e-10})[0]
    got = box_mass(k, lo, hi, scale=S, engine="quadrature", tol=1e-10).value
    assert got == pytest.approx(ref, rel=1e-7)
    q = box_mass(k, lo, hi, scale=S, engine="qmc", tol=1e-6, seed=3)
    assert abs(q.value - ref) <= 4 * q.std_error + 1e-9 * ref


def test_qmc_deterministic_per_seed_and_reports_error():
    k = GeneratorKernel(GeneratorFamily.student_t(5.0), 0, 4)
    lo, hi = np.full(4, -0.5), np.full(4, 1.0)
    a = box_mass(k, lo, hi, engine="qmc", tol=1e-5, seed=11)
    b = box_mass(k, lo, hi, engine="qmc", tol=1e-5, seed=11)
    assert a.value == b.value and a.std_error == b.std_error
    assert a.std_error > 0 and a.engine == "qmc"


def test_tilted_normal_mass_closed_form():
    # int exp(a'z) phi(z) over a box equals exp(|a|^2/2) times the shifted box mass
    k = GeneratorKernel(GeneratorFamily.normal(), 0, 2)
    a = np.array([0.3, -0.2])
    lo, hi = np.array([-1.0, 0.0]), np.array([0.5, 2.0])
    got = box_mass(k, lo, hi, tilt=a).value * norm_constant(GeneratorFamily.normal(), 2).value
    ref = math.exp(0.5 * a @ a) * np.prod(stats.norm.cdf(hi - a) - stats.norm.cdf(lo - a))
    assert got == pytest.approx(ref, rel=1e-12)


def test_divergent_tilt_and_degenerate_box():
    k = GeneratorKernel(GeneratorFamily.student_t(4.0), 0, 2)
    with pytest.raises(DomainError) as e:
        box_mass(k, [-1, -1], [1, 1], tilt=[0.1, 0.0])
    assert e.value.code == "divergent-tilt"
    with pytest.raises(DomainError):
        box_mass(k, [0, 0], [0, 1])


def test_zero_dimensional_mass_is_kernel_value():
    k = GeneratorKernel(GeneratorFamily.laplace(), 2, 3)
    res = box_mass_batch(k, np.zeros((2, 0)), np.zeros((2, 0)), shifts=[0.0, 1.0])
    assert res[0].value == pytest.approx(3.0)
    assert res[1].value == pytest.approx((3 + 2 + 3 * math.sqrt(2)) * math.exp(-math.sqrt(2)))

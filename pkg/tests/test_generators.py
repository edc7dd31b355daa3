import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, special

from rangerisk.generators import (
    DomainError, GeneratorFamily, GeneratorKernel, hurwitz_lerch_psi, kernel_eval,
    marginal_generator, norm_constant, ratio_full, ratio_one_pinned, ratio_two_pinned,
    shifted_constant,
)
from rangerisk.generators import _hl_integral, _hl_series

FAMILIES = {
    "normal": GeneratorFamily.normal(),
    "t5": GeneratorFamily.student_t(5.0),
    "logistic": GeneratorFamily.logistic(),
    "laplace": GeneratorFamily.laplace(),
    "pvii": GeneratorFamily.pearson_vii(5.0),
}


def test_kernel_values_at_zero():
    assert kernel_eval(GeneratorKernel(FAMILIES["normal"], "g", 3), 0.0) == pytest.approx(1.0)
    t4 = GeneratorFamily.student_t(4.0)
    assert kernel_eval(GeneratorKernel(t4, "Gbar", 1), 0.0) == pytest.approx(4.0 / 3.0, rel=1e-12)
    assert kernel_eval(GeneratorKernel(FAMILIES["laplace"], "GGbar", 3), 0.0) == pytest.approx(3.0, rel=1e-12)


def test_laplace_gbar_closed_form():
    u = np.array([0.1, 1.0, 4.0])
    got = kernel_eval(GeneratorKernel(FAMILIES["laplace"], "Gbar", 3), u)
    s = np.sqrt(2 * u)
    np.testing.assert_allclose(got, (1 + s) * np.exp(-s), rtol=1e-12)


def test_shift_moves_argument():
    k = GeneratorKernel(FAMILIES["t5"], 1, 3, shift=0.7)
    base = GeneratorKernel(FAMILIES["t5"], 1, 3)
    assert kernel_eval(k, 1.1) == pytest.approx(kernel_eval(base, 1.8), rel=1e-14)


@pytest.mark.parametrize("name", FAMILIES)
def test_kernels_nonnegative_nonincreasing(name):
    u = np.linspace(0, 30, 301)
    for level in (0, 1, 2):
        v = kernel_eval(GeneratorKernel(FAMILIES[name], level, 3), u)
        assert np.all(v >= 0)
        assert np.all(np.diff(v) <= 1e-15)


@pytest.mark.parametrize("name", FAMILIES)
def test_cumulative_levels_are_tail_integrals(name):
    fam = FAMILIES[name]
    gen = np.random.default_rng(1)
    u = gen.uniform(0.05, 10.0, 20)
    for level in (1, 2):
        upper = GeneratorKernel(fam, level, 3)
        lower = GeneratorKernel(fam, level - 1, 3)
        h = 1e-5 * np.maximum(1.0, u)
        deriv = (kernel_eval(upper, u + h) - kernel_eval(upper, u - h)) / (2 * h)
        np.testing.assert_allclose(deriv, -kernel_eval(lower, u), rtol=1e-6)


@pytest.mark.parametrize("name", FAMILIES)
@pytest.mark.parametrize("n", range(1, 7))
def test_norm_constant_normalizes(name, n):
    fam = FAMILIES[name]
    c = norm_constant(fam, n).value
    k = GeneratorKernel(fam, 0, n)
    f = lambda s: s ** (n / 2 - 1) * float(kernel_eval(k, s))
    pts = [1e-3, 1.0, 10.0]
    val = sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
              for a, b in zip([0.0] + pts, pts + [np.inf]))
    assert c * val == pytest.approx(math.gamma(n / 2) / (2 * math.pi) ** (n / 2), rel=1e-8)


def test_norm_constant_closed_forms():
    assert norm_constant(FAMILIES["normal"], 3).value == pytest.approx((2 * math.pi) ** -1.5, rel=1e-12)
    t4 = GeneratorFamily.student_t(4.0)
    ref = math.gamma(3.5) / (math.gamma(2.0) * (4 * math.pi) ** 1.5)
    assert norm_constant(t4, 3).value == pytest.approx(ref, rel=1e-10)
    ref = 3 * math.gamma(1.5) / (2 * math.pi ** 1.5 * math.gamma(5.0))
    assert norm_constant(FAMILIES["laplace"], 3, "c_star").value == pytest.approx(ref, rel=1e-10)
    for n in (1, 2, 3, 5):
        ref = 1.0 / ((2 * math.pi) ** (n / 2) * hurwitz_lerch_psi(2, -1, n / 2, 1))
        assert norm_constant(FAMILIES["logistic"], n).value == pytest.approx(ref, rel=1e-10)


def test_closed_form_constant_reports_zero_error():
    nc = norm_constant(FAMILIES["normal"], 2)
    assert nc.abs_error == 0.0 or nc.method != "closed_form"


@pytest.mark.parametrize("name", ["normal", "logistic", "laplace"])
def test_zero_shift_constant_matches_unshifted(name):
    fam = FAMILIES[name]
    a = shifted_constant(fam, 4, 3, [0.0], "c_star").value
    b = norm_constant(fam, 3, "c_star").value
    assert a == pytest.approx(b, rel=1e-9)


@pytest.mark.parametrize("name", FAMILIES)
@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("eta", [0.0, 0.7, 2.0])
def test_one_pinned_ratio_matches_quotient(name, n, eta):
    fam = FAMILIES[name]
    c = norm_constant(fam, n).value
    star = shifted_constant(fam, n, n - 1, [0.5 * eta * eta]).value
    assert ratio_one_pinned(fam, n, eta) == pytest.approx(c / star, rel=1e-8)


@pytest.mark.parametrize("name", FAMILIES)
@pytest.mark.parametrize("n", [3, 4])
@pytest.mark.parametrize("etas", [(0.0, 0.0), (0.5, -1.2), (2.0, 1.0)])
def test_two_pinned_ratio_matches_quotient(name, n, etas):
    fam = FAMILIES[name]
    c = norm_constant(fam, n).value
    shift = 0.5 * (etas[0] ** 2 + etas[1] ** 2)
    star2 = shifted_constant(fam, n, n - 2, [shift], "c_star_star").value
    assert ratio_two_pinned(fam, n, *etas) == pytest.approx(c / star2, rel=1e-8)


@pytest.mark.parametrize("name", FAMILIES)
def test_full_ratio_matches_quotient(name):
    fam = FAMILIES[name]
    q = norm_constant(fam, 3).value / norm_constant(fam, 3, "c_star").value
    assert ratio_full(fam, 3) == pytest.approx(q, rel=1e-8)


def test_one_pinned_ratio_student_t_independent_form():
    # pinned coordinate of a t law: marginal t density divided by the box-free reduced mass
    m, n, eta = 4.0, 3, 1.3
    fam = GeneratorFamily.student_t(m)
    expected = special.gamma((m - 1) / 2) / special.gamma(m / 2) * math.sqrt(m) / (2 * math.sqrt(math.pi)) \
        * (1 + eta ** 2 / m) ** (-(m - 1) / 2)
    assert ratio_one_pinned(fam, n, eta) == pytest.approx(expected, rel=1e-12)


def test_hurwitz_lerch_values():
    assert hurwitz_lerch_psi(1, 0.0, 2.5, 3.0) == pytest.approx(3.0 ** -2.5, rel=1e-14)
    assert hurwitz_lerch_psi(1, -1.0, 1.0, 1.0) == pytest.approx(math.log(2), rel=1e-10)
    # Gamma(2+k)/k! = k+1 collapses the series to the alternating zeta at 1/2
    assert hurwitz_lerch_psi(2, -1.0, 1.5, 1.0) == pytest.approx(float(mpmath.altzeta(0.5)), rel=1e-10)


def test_hurwitz_lerch_partial_sum_oracle():
    partial = sum((-1) ** k / (k + 1) for k in range(2_000_000))
    assert hurwitz_lerch_psi(1, -1.0, 1.0, 1.0) == pytest.approx(partial, abs=1e-6)


@pytest.mark.parametrize("kappa,z,s,a", [(1, 0.5, 1.5, 1.0), (2, -0.5, 2.0, 1.0), (1, -0.3, 0.8, 2.0),
                                         (2, 0.4, 3.0, 0.5)])
def test_hurwitz_lerch_series_and_integral_agree(kappa, z, s, a):
    assert _hl_series(kappa, z, s, a) == pytest.approx(_hl_integral(kappa, z, s, a), rel=1e-8)


def test_hurwitz_lerch_domain():
    with pytest.raises(DomainError):
        hurwitz_lerch_psi(1, 1.5, 2.0, 1.0)
    with pytest.raises(DomainError):
        hurwitz_lerch_psi(1, 0.5, 2.0, -1.0)


def test_marginal_generator_shapes():
    u = np.array([0.0, 0.5, 2.0, 5.0])
    g = marginal_generator(FAMILIES["normal"], 4, 1, u)
    np.testing.assert_allclose(g / g[0], np.exp(-u), rtol=1e-9)
    g = marginal_generator(FAMILIES["laplace"], 3, 1, u)
    s = np.sqrt(2 * u)
    np.testing.assert_allclose(g / g[0], (1 + s) * np.exp(-s), rtol=1e-8)
    g = marginal_generator(GeneratorFamily.student_t(4.0), 3, 1, u)
    np.testing.assert_allclose(g / g[0], (1 + u / 2) ** -2.5, rtol=1e-8)


def test_family_round_trip_and_validation():
    for fam in FAMILIES.values():
        assert GeneratorFamily.from_dict(fam.to_dict()) == fam
    with pytest.raises(DomainError):
        GeneratorFamily.student_t(-1.0)
    with pytest.raises(DomainError):
        GeneratorKernel(GeneratorFamily.student_t(0.5), 1, 1)
    with pytest.raises(DomainError):
        ratio_full(GeneratorFamily.student_t(2.0), 3)

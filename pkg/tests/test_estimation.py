import math

import numpy as np
import pytest

from rangerisk import paperdata as P
from rangerisk.estimation import ReturnPanel, fit_normal, fit_student_t, simulate_t_panel
from rangerisk.generators import DomainError


def test_rank_deficient_and_shape_errors():
    x = np.column_stack([np.ones(50), np.random.default_rng(0).normal(size=50)])
    with pytest.raises(DomainError) as e:
        fit_normal(ReturnPanel(x))
    assert e.value.code == "rank-deficient"
    with pytest.raises(DomainError):
        ReturnPanel(np.zeros((3, 3)))
    with pytest.raises(DomainError):
        ReturnPanel(np.array([[1.0, np.nan], [0.0, 1.0], [2.0, 3.0]]))


def test_independent_columns_have_small_correlation():
    T = 20_000
    x = np.random.default_rng(1).normal(size=(T, 2))
    s = fit_normal(ReturnPanel(x)).model.sigma
    assert abs(s[0, 1] / math.sqrt(s[0, 0] * s[1, 1])) < 3 / math.sqrt(T)


def test_normal_recovery():
    T = 100_000
    mu = np.array([0.5, -1.0, 2.0])
    a = np.array([[1.0, 0.0, 0.0], [0.3, 0.8, 0.0], [-0.2, 0.4, 1.2]])
    S = a @ a.T
    x = mu + np.random.default_rng(2).normal(size=(T, 3)) @ a.T
    fit = fit_normal(ReturnPanel(x)).model
    assert np.all(np.abs(fit.mu - mu) <= 3 * np.sqrt(np.diag(S) / T))
    se = np.sqrt((np.outer(np.diag(S), np.diag(S)) + S ** 2) / T)
    assert np.all(np.abs(fit.sigma - S) <= 3 * se)


def test_student_t_fit_recovers_dof():
    panel = simulate_t_panel(P.MU5 * 100, P.SIGMA5 * 100, 6.0, 500, seed=1)
    res = fit_student_t(panel)
    assert res.converged
    assert 4 <= res.model.family.dof_m <= 9
    assert np.all(np.diff(res.history) >= -1e-9 * abs(res.history[-1]))


def test_normal_data_pushes_dof_up():
    x = np.random.default_rng(3).normal(size=(3000, 2))
    res = fit_student_t(ReturnPanel(x))
    assert res.model.family.dof_m > 40


def test_fixed_dof_and_equivariance():
    panel = simulate_t_panel(np.zeros(3), np.eye(3) + 0.3, 5.0, 400, seed=4)
    base = fit_student_t(panel, "profile")
    A = np.array([[2.0, 0.5, 0.0], [0.0, 1.0, -0.3], [0.1, 0.0, 0.7]])
    b = np.array([1.0, -2.0, 0.5])
    moved = fit_student_t(ReturnPanel(panel.observations @ A.T + b), "profile")
    np.testing.assert_allclose(moved.model.mu, A @ base.model.mu + b, rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(moved.model.sigma, A @ base.model.sigma @ A.T, rtol=1e-6, atol=1e-9)
    assert moved.model.family.dof_m == pytest.approx(base.model.family.dof_m, abs=1e-4)
    fixed = fit_student_t(panel, "fixed", 5.0)
    assert fixed.model.family.dof_m == 5.0 and fixed.converged
    with pytest.raises(DomainError):
        fit_student_t(panel, "fixed")
    with pytest.raises(DomainError):
        fit_student_t(ReturnPanel(panel.observations[:7]))


def test_csv_ingestion(tmp_path):
    p = tmp_path / "panel.csv"
    p.write_text("date,A,B\n2020-01-01,0.1,0.2\n2020-01-02,-0.1,0.0\n2020-01-03,0.05,0.3\n")
    panel = ReturnPanel.from_csv(p)
    assert panel.asset_labels == ["A", "B"] and panel.observations.shape == (3, 2)
    p.write_text("date,A,B\n2020-01-01,0.1,\n2020-01-02,-0.1,0.0\n2020-01-03,0.05,0.3\n")
    with pytest.raises(DomainError) as e:
        ReturnPanel.from_csv(p)
    assert e.value.code == "missing-values"

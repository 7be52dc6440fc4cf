import numpy as np
import pytest

from smot.coupling import FiniteCoupling
from smot.errors import MassError, OrderError
from smot.measure import DiscreteMeasure, leq_c, leq_cd, wasserstein
from smot.strassen import feasible_martingale, feasible_supermartingale, quantitative_martingale

from _gen import random_cd_pair, random_pair

D = DiscreteMeasure


class TestFeasible:
    def test_unique_supermartingale(self):
        pi = feasible_supermartingale(D([0], [1]), D([-1], [1]))
        assert pi.allclose(FiniteCoupling([(0.0, 1.0, D([-1], [1]))]))

    def test_unique_martingale(self):
        pi = feasible_martingale(D([0], [1]), D([-1, 1], [0.5, 0.5]))
        assert pi.allclose(FiniteCoupling([(0.0, 1.0, D([-1, 1], [0.5, 0.5]))]))

    def test_mean_rise_rejected(self):
        with pytest.raises(OrderError) as info:
            feasible_supermartingale(D([0], [1]), D([1], [1]))
        assert info.value.breakpoint is not None and info.value.gap > 0

    def test_martingale_needs_equal_means(self):
        with pytest.raises(OrderError):
            feasible_martingale(D([0], [1]), D([-1], [1]))

    def test_mass_mismatch(self):
        with pytest.raises(MassError):
            feasible_supermartingale(D([0], [1]), D([0], [0.5]))

    def test_zero_measures(self):
        assert feasible_supermartingale(D.zero(), D.zero()).size == 0

    def test_equivalence_with_order(self):
        rng = np.random.default_rng(31)
        for t in range(120):
            mu, nu = (random_cd_pair(rng, 5)[:2]) if t % 2 else random_pair(rng, 5)
            ordered = leq_cd(mu, nu)
            try:
                pi = feasible_supermartingale(mu, nu)
            except OrderError:
                assert not ordered
                continue
            assert ordered
            assert pi.marginal_residual(mu, nu) <= 1e-9
            assert pi.defect() <= 1e-9

    def test_martingale_equivalence(self):
        rng = np.random.default_rng(32)
        for _ in range(60):
            mu, nu, _ = random_cd_pair(rng, 5, kinds=("stay", "mart"))
            assert leq_c(mu, nu)
            M = feasible_martingale(mu, nu)
            assert M.is_martingale() and M.marginal_residual(mu, nu) <= 1e-9


class TestQuantitative:
    def test_identity(self):
        m = D([-1, 0, 2], [0.2, 0.3, 0.5])
        M, cost = quantitative_martingale(m, m, return_cost=True)
        assert cost == pytest.approx(0.0, abs=1e-12)
        assert M.allclose(FiniteCoupling.identity(m))

    def test_single_source(self):
        M, cost = quantitative_martingale(D([0], [1]), D([-1, 1], [0.5, 0.5]), return_cost=True)
        assert cost == pytest.approx(1.0)
        assert cost <= 2 * wasserstein(D([0], [1]), D([-1, 1], [0.5, 0.5]))

    def test_forced_kernels(self):
        eta, nu = D([-1, 1], [0.5, 0.5]), D([-2, 2], [0.5, 0.5])
        M, cost = quantitative_martingale(eta, nu, return_cost=True)
        assert cost == pytest.approx(1.5)
        assert 2 * wasserstein(eta, nu) == pytest.approx(2.0)
        assert M.kernels[0].allclose(D([-2, 2], [0.75, 0.25]), 1e-9)
        assert M.kernels[1].allclose(D([-2, 2], [0.25, 0.75]), 1e-9)

    def test_bound_on_random_pairs(self):
        rng = np.random.default_rng(33)
        for _ in range(60):
            eta, nu, _ = random_cd_pair(rng, 5, kinds=("stay", "mart"))
            M, cost = quantitative_martingale(eta, nu, return_cost=True)
            assert cost <= 2 * wasserstein(eta, nu) + 1e-7
            assert M.is_martingale()

    def test_order_violation(self):
        with pytest.raises(OrderError):
            quantitative_martingale(D([-1, 1], [0.5, 0.5]), D([0], [1]))

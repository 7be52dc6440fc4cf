import math

import numpy as np
import pytest

from smot.approx import (
    approximate,
    build_target,
    choose_params,
    complete,
    contract,
    correct_barycentres,
    final_adjust,
    localize,
    quantile_transfer,
    truncate,
)
from smot.coupling import FiniteCoupling, aw_distance
from smot.errors import (
    CompletionError,
    CorrectionError,
    LocalizationError,
    MassError,
    OrderError,
    PreconditionError,
)
from smot.measure import DiscreteMeasure, Interval, leq_c, leq_cd, wasserstein
from smot.strassen import feasible_supermartingale

from _gen import random_cd_pair

D = DiscreteMeasure
REAL = Interval.open(-math.inf, math.inf)


def single(x, kernel):
    return FiniteCoupling([(float(x), 1.0, kernel)])


def spread(nu, h):
    return (nu.translate(-h) + nu.translate(h)).scale_mass(0.5)


class TestTruncate:
    def test_inside_level(self):
        out = truncate(single(0, D([-2, 2], [0.5, 0.5])), 1.0)
        assert out.kernels[0].allclose(D([-1, 1], [0.5, 0.5]), 1e-12)

    def test_wide_level_unchanged(self):
        pi = single(0, D([-2, 2], [0.5, 0.5]))
        assert truncate(pi, 3.0).allclose(pi, 1e-12)

    def test_far_row_becomes_dirac(self):
        out = truncate(single(5, D([3, 4], [0.5, 0.5])), 1.0)
        assert out.kernels[0].allclose(D([5], [1]))

    def test_random_rows_stay_supermartingale_and_shrink(self):
        rng = np.random.default_rng(51)
        for _ in range(40):
            mu, nu, pi = random_cd_pair(rng, 5)
            R = float(rng.uniform(0.5, 4))
            out = truncate(pi, R)
            assert out.is_supermartingale()
            for x, k_old, k_new in zip(pi.xs, pi.kernels, out.kernels):
                if abs(x) <= R and abs(k_old.bary) <= R:
                    assert leq_cd(k_new, k_old)

    def test_level_must_be_positive(self):
        with pytest.raises(Exception):
            truncate(single(0, D([0], [1])), 0.0)


class TestContract:
    def test_identity(self):
        pi = single(0, D([-2, 2], [0.5, 0.5]))
        assert contract(pi, 1.0) is pi

    def test_halving(self):
        out = contract(single(0, D([-2, 2], [0.5, 0.5])), 0.5)
        assert out.allclose(single(0, D([-1, 1], [0.5, 0.5])), 1e-12)

    def test_bound_is_tight_on_example(self):
        pi = single(0, D([2], [1]))
        out = contract(pi, 0.5)
        assert aw_distance(out, pi) == pytest.approx(1.0)
        assert 1.0 <= 0.5 * (0 + 2)

    def test_bound_on_random_couplings(self):
        rng = np.random.default_rng(52)
        for _ in range(40):
            _, _, pi = random_cd_pair(rng, 5)
            alpha = float(rng.uniform(0.05, 1))
            out = contract(pi, alpha)
            mu, nu = pi.marginals()
            assert aw_distance(out, pi) <= (1 - alpha) * (mu.abs_moment() + nu.abs_moment()) + 1e-9
            assert out.is_supermartingale()


class TestChooseParams:
    def test_compact_instance(self):
        pi = single(0, D([-1, 1], [0.5, 0.5]))
        mu, nu = pi.marginals()
        p = choose_params(pi, mu, nu, 0.25, Interval.open(-1, 1))
        assert mu.measure_of(p.K) >= 1 - 0.25
        assert -1 < p.a_t < p.a <= p.b < p.b_t < 1
        assert p.truncation_gap < 0.125 and p.contraction_gap < 0.125
        self.assert_invariants(p, mu)

    @staticmethod
    def assert_invariants(p, mu):
        assert mu.measure_of(p.K) >= 1 - p.eps - 1e-12
        lo = max(-p.R, p.alpha * p.ell + (1 - p.alpha) * p.a)
        hi = min(p.R, p.alpha * p.rho + (1 - p.alpha) * p.b)
        assert p.L[0] < lo and hi < p.L[1]
        bound = max((2 * p.R - p.a - p.a_t) / (2 * p.R - 2 * p.a_t),
                    (2 * p.R + p.b + p.b_t) / (2 * p.R + 2 * p.b_t))
        assert p.alpha > bound
        assert p.delta > 0 and p.e > 0

    def test_large_eps(self):
        pi = FiniteCoupling([(-0.5, 0.5, D([-1, 0], [0.5, 0.5])), (0.5, 0.5, D([0, 1], [0.5, 0.5]))])
        mu, nu = pi.marginals()
        p = choose_params(pi, mu, nu, 0.49, Interval.open(-1, 1))
        self.assert_invariants(p, mu)

    def test_unbounded_interval(self):
        pi = FiniteCoupling([(0.0, 0.5, D([-1], [1])), (1.0, 0.5, D([0, 1], [0.5, 0.5]))])
        mu, nu = pi.marginals()
        p = choose_params(pi, mu, nu, 0.125, Interval.open(-1, math.inf))
        self.assert_invariants(p, mu)

    @pytest.mark.parametrize("eps", [0.5, 0.75, 0.0])
    def test_eps_out_of_range(self, eps):
        pi = single(0, D([-1, 1], [0.5, 0.5]))
        mu, nu = pi.marginals()
        with pytest.raises(PreconditionError):
            choose_params(pi, mu, nu, eps, Interval.open(-1, 1))

    def test_first_marginal_outside_interval(self):
        pi = single(0, D([-1, 1], [0.5, 0.5]))
        mu, nu = pi.marginals()
        with pytest.raises(PreconditionError):
            choose_params(pi, mu, nu, 0.25, Interval.open(1, 2))


class TestBuildTarget:
    def test_fixed_point(self):
        rng = np.random.default_rng(53)
        for _ in range(20):
            mu, nu, _ = random_cd_pair(rng, 5)
            assert build_target(nu, mu, nu).allclose(nu, 1e-9)

    def test_translation_equivariance(self):
        rng = np.random.default_rng(54)
        for _ in range(20):
            mu, nu, _ = random_cd_pair(rng, 5)
            nu_ra = spread(nu, 0.3)
            nu_k = spread(nu, 0.5)
            base = build_target(nu_k, mu, nu_ra)
            moved = build_target(nu_k.translate(0.7), mu.translate(0.7), nu_ra.translate(0.7))
            assert moved.allclose(base.translate(0.7), 1e-9)

    def test_example_orders(self):
        mu_k, nu_k = D([0], [1]), D([-1, 1], [0.5, 0.5])
        out = build_target(nu_k, mu_k, D([-0.5, 0.5], [0.5, 0.5]))
        assert leq_cd(mu_k, out) and leq_c(out, nu_k)
        assert out.allclose(D([-0.5, 0.5], [0.5, 0.5]), 1e-12)


class TestQuantileTransfer:
    def test_identity_marginals(self):
        rng = np.random.default_rng(55)
        for _ in range(20):
            _, _, pi = random_cd_pair(rng, 5)
            mu, nu = pi.marginals()
            assert aw_distance(quantile_transfer(pi, mu, nu), pi) <= 1e-9

    def test_marginals_exact(self):
        rng = np.random.default_rng(56)
        for _ in range(20):
            _, _, pi = random_cd_pair(rng, 5)
            mu, nu = pi.marginals()
            out = quantile_transfer(pi, mu.translate(0.1), spread(nu, 0.2))
            assert out.marginal_residual(mu.translate(0.1), spread(nu, 0.2)) <= 1e-9


class TestLocalize:
    def test_full_set(self):
        pi = FiniteCoupling([(0.0, 0.5, D([-1, 1], [0.5, 0.5])), (2.0, 0.5, D([1], [1]))])
        A = Interval.closed(-1, 3)
        mu_hat, pi_hat, e, ep = localize(pi, pi, A, Interval.open(-2, 4), REAL)
        assert pi_hat.allclose(pi, 1e-12)
        assert e == pytest.approx(0, abs=1e-12) and ep == pytest.approx(0, abs=1e-12)

    def test_restriction(self):
        pi = FiniteCoupling([(0.0, 0.5, D([0], [1])), (2.0, 0.5, D([2], [1]))])
        mu_hat, pi_hat, e, ep = localize(pi, pi, Interval.closed(-1, 1), Interval.open(-1.5, 1.5), REAL)
        assert mu_hat.allclose(D([0], [0.5]))
        assert pi_hat.allclose(FiniteCoupling([(0.0, 0.5, D([0], [1]))]))
        assert e == pytest.approx(0, abs=1e-12) and ep == pytest.approx(0, abs=1e-12)

    def test_no_mass(self):
        pi = single(0, D([0], [1]))
        with pytest.raises(LocalizationError):
            localize(pi, pi, Interval.closed(5, 6), Interval.open(4, 7), REAL)

    def test_common_fraction_and_eps_order(self):
        rng = np.random.default_rng(57)
        for _ in range(30):
            _, _, pi = random_cd_pair(rng, 5)
            mu, nu = pi.marginals()
            pi_k = quantile_transfer(pi, mu, spread(nu, 0.3))
            A = Interval.closed(float(mu.atoms[0]), float(mu.atoms[-1]))
            C = Interval.open(float(nu.atoms[0]) - 0.5, float(nu.atoms[-1]) - 0.1)
            try:
                mu_hat, pi_hat, e, ep = localize(pi_k, pi, A, Interval.open(A.lo - 1, A.hi + 1), C)
            except LocalizationError:
                continue
            assert ep >= e >= 0
            for k in pi_hat.kernels:
                assert k.measure_of(C) == pytest.approx(1.0)
            assert pi_hat.mass == pytest.approx(1 - ep)


class TestCorrectBarycentres:
    def test_example(self):
        out = correct_barycentres(single(0, D([1], [1])), D([-4], [0.5]))
        assert out.kernels[0].allclose(D([-4, 1], [0.2, 0.8]), 1e-12)
        assert out.kernels[0].bary == pytest.approx(0.0, abs=1e-12)

    def test_supermartingale_unchanged(self):
        pi = single(0, D([-1], [1]))
        assert correct_barycentres(pi, D([-4], [0.5])) is pi

    def test_right_of_row(self):
        with pytest.raises(CorrectionError):
            correct_barycentres(single(0, D([1], [1])), D([2], [0.5]))

    def test_gap_too_small(self):
        with pytest.raises(CorrectionError):
            correct_barycentres(single(0, D([1], [1])), D([-0.1], [0.5]), e=0.5)

    def test_empty(self):
        with pytest.raises(CorrectionError):
            correct_barycentres(single(0, D([1], [1])), D.zero())

    def test_random_rows(self):
        rng = np.random.default_rng(58)
        for _ in range(30):
            rows = [(float(x), 0.25, D(rng.uniform(-1, 3, 3), rng.random(3) + 0.1)) for x in (0, 1, 2, 3)]
            pi = FiniteCoupling(rows)
            out = correct_barycentres(pi, D([-2, -1.5], [0.3, 0.2]))
            assert out.is_supermartingale(1e-12)
            for k_old, k_new, x in zip(pi.kernels, out.kernels, pi.xs):
                if k_old.bary <= x:
                    assert k_new.allclose(k_old)
                else:
                    assert k_new.bary == pytest.approx(x, abs=1e-12)


class TestComplete:
    def test_zero(self):
        assert complete(D.zero(), D.zero()).size == 0

    def test_dirac(self):
        out = complete(D([0], [0.5]), D([-1], [0.5]))
        assert out.allclose(FiniteCoupling([(0.0, 0.5, D([-1], [1]))]))

    def test_not_ordered(self):
        with pytest.raises(CompletionError) as info:
            complete(D([0], [0.5]), D([1], [0.5]))
        detail = info.value.detail
        assert detail["gap"] > 0 and detail["breakpoint"] is not None
        assert "mu_rem_potential" in detail and "nu_rem_potential" in detail

    def test_mass_mismatch(self):
        with pytest.raises(MassError):
            complete(D([0], [0.5]), D([0], [0.25]))


class TestFinalAdjust:
    def test_identity(self):
        pi = FiniteCoupling([(0.0, 0.5, D([-1], [1])), (1.0, 0.5, D([0, 1], [0.5, 0.5]))])
        assert final_adjust(pi, pi.second_marginal).allclose(pi, 1e-12)

    def test_unique_martingale(self):
        out = final_adjust(single(0, D([0], [1])), D([-1, 1], [0.5, 0.5]))
        assert out.allclose(single(0, D([-1, 1], [0.5, 0.5])), 1e-12)

    def test_distance_bound(self):
        rng = np.random.default_rng(59)
        for _ in range(30):
            _, nu, pi = random_cd_pair(rng, 4)
            nu_k = spread(nu, float(rng.uniform(0.05, 1)))
            out, cost = final_adjust(pi, nu_k, return_cost=True)
            assert out.marginal_residual(pi.first_marginal, nu_k) <= 1e-9
            assert out.is_supermartingale()
            assert aw_distance(out, pi) <= cost + 1e-9
            assert cost <= 2 * wasserstein(nu, nu_k) + 1e-9

    def test_order_violation(self):
        with pytest.raises(OrderError):
            final_adjust(single(0, D([-1, 1], [0.5, 0.5])), D([0], [1]))


class TestApproximate:
    def test_forced_instance(self):
        mu, nu = D([0], [1]), D([-1, 1], [0.5, 0.5])
        pi = single(0, nu)
        nu_k = D([-1.1, 1.1], [0.5, 0.5])
        out, trace = approximate(pi, mu, nu_k)
        assert out.allclose(single(0, nu_k), 1e-9)
        assert trace.aw == pytest.approx(0.1, abs=1e-7)

    def test_unperturbed_is_close(self):
        rng = np.random.default_rng(60)
        for _ in range(4):
            mu, nu, pi = random_cd_pair(rng, 4)
            out, trace = approximate(pi, mu, nu)
            assert out.marginal_residual(mu, nu) <= 1e-9 and out.defect() <= 1e-9
            assert trace.aw <= 0.5
            assert trace.stage_bound_checks > 0 or not trace.runs

    def test_perturbed_marginals_valid(self):
        rng = np.random.default_rng(61)
        for _ in range(4):
            mu, nu, pi = random_cd_pair(rng, 4)
            nu_k = spread(nu, 0.1)
            out, trace = approximate(pi, mu, nu_k)
            assert out.marginal_residual(mu, nu_k) <= 1e-9 and out.defect() <= 1e-9
            assert trace.aw == pytest.approx(aw_distance(out, pi), abs=1e-12)

    def test_trace_csv(self):
        mu, nu = D([0], [1]), D([-1, 1], [0.5, 0.5])
        _, trace = approximate(single(0, nu), mu, D([-1.2, 1.2], [0.5, 0.5]), schedule=[0.25])
        lines = trace.to_csv().splitlines()
        assert lines[0] == "component,eps,stage,aw_gap,defect,mass"
        assert any(",final_adjust," in line for line in lines[1:])

    def test_threads_do_not_change_result(self):
        rng = np.random.default_rng(62)
        mu, nu, pi = random_cd_pair(rng, 4)
        a, _ = approximate(pi, mu, spread(nu, 0.1))
        b, _ = approximate(pi, mu, spread(nu, 0.1), threads=3)
        assert a.allclose(b, 0)

    def test_order_violation(self):
        nu = D([-1, 1], [0.5, 0.5])
        with pytest.raises(OrderError):
            approximate(single(0, nu), D([-5], [1]), nu)

    def test_reference_must_be_supermartingale(self):
        pi = single(0, D([1], [1]))
        with pytest.raises(OrderError):
            approximate(pi, D([0], [1]), D([0], [1]))

    def test_feasible_start_is_valid_baseline(self):
        mu, nu = D([0], [1]), D([-1, 1], [0.5, 0.5])
        base = feasible_supermartingale(mu, D([-1.1, 1.1], [0.5, 0.5]))
        out, trace = approximate(single(0, nu), mu, D([-1.1, 1.1], [0.5, 0.5]))
        assert trace.aw <= aw_distance(base, single(0, nu)) + 1e-9

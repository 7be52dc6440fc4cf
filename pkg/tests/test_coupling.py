import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smot.coupling import (
    FiniteCoupling,
    add,
    aw_distance,
    compose,
    defect,
    intensity,
    marginals,
    restrict_first,
)
from smot.errors import ChainingError, DomainError, MassError
from smot.measure import DiscreteMeasure, Interval, wasserstein
from smot.strassen import feasible_martingale

from _gen import random_cd_pair, random_measure, random_super_coupling
from oracles import aw_enumerate

D = DiscreteMeasure


def row(x, w, atoms, weights=None):
    weights = [1.0 / len(atoms)] * len(atoms) if weights is None else weights
    return (x, w, D(atoms, weights))


def random_coupling(rng, n_max=4, m_max=3):
    mu = random_measure(rng, n_max)
    return FiniteCoupling((x, w, random_measure(rng, m_max, mass=1.0)) for x, w in zip(mu.atoms, mu.weights))


class TestConstruction:
    def test_rows_sorted_and_merged(self):
        pi = FiniteCoupling([row(1, 0.5, [1]), row(0, 0.25, [0]), row(1, 0.25, [3])])
        assert pi.xs.tolist() == [0.0, 1.0]
        assert pi.ws.tolist() == [0.25, 0.75]
        assert pi.kernels[1].allclose(D([1, 3], [2 / 3, 1 / 3]))

    def test_kernel_normalised(self):
        pi = FiniteCoupling([(0.0, 1.0, D([0, 1], [2.0, 2.0]))])
        assert pi.kernels[0].mass == pytest.approx(1.0)

    def test_json_roundtrip(self):
        pi = FiniteCoupling([row(0, 0.5, [-1, 1]), row(2, 0.5, [2])])
        assert FiniteCoupling.from_json(pi.to_json()).allclose(pi)

    def test_json_kernel_mass_checked(self):
        with pytest.raises(DomainError):
            FiniteCoupling.from_json({"rows": [{"x": 0, "w": 1, "kernel": [[0, 0.5]]}]})

    def test_matrix_roundtrip(self):
        pi = FiniteCoupling([row(0, 0.5, [-1, 1]), row(2, 0.5, [1, 2])])
        xs, ys, Z = pi.to_matrix()
        assert FiniteCoupling.from_matrix(xs, ys, Z).allclose(pi)


class TestMarginals:
    @pytest.mark.parametrize("pi,first,second", [
        (FiniteCoupling([row(0, 1, [1])]), D([0], [1]), D([1], [1])),
        (FiniteCoupling([row(0, 0.5, [0]), row(1, 0.5, [1])]), D([0, 1], [0.5, 0.5]), D([0, 1], [0.5, 0.5])),
        (FiniteCoupling(), D.zero(), D.zero()),
    ])
    def test_examples(self, pi, first, second):
        a, b = marginals(pi)
        assert a.allclose(first) and b.allclose(second)


class TestDefect:
    @pytest.mark.parametrize("pi,expected", [
        (FiniteCoupling([row(0, 1, [-1])]), 0.0),
        (FiniteCoupling([row(0, 1, [1])]), 1.0),
        (FiniteCoupling([row(0, 0.5, [1]), row(2, 0.5, [0])]), 0.5),
    ])
    def test_examples(self, pi, expected):
        assert defect(pi) == pytest.approx(expected)

    def test_predicates(self):
        m = FiniteCoupling([row(0, 1, [-1, 1])])
        s = FiniteCoupling([row(0, 1, [-1])])
        assert m.is_martingale() and m.is_supermartingale()
        assert s.is_supermartingale() and not s.is_martingale()

    def test_defect_inequality(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            pi = random_super_coupling(rng, 4)
            other = FiniteCoupling((x, w, random_measure(rng, 3, mass=1.0)) for x, w in zip(pi.xs, pi.ws))
            assert defect(other) <= aw_distance(pi, other) + 1e-7


class TestAWDistance:
    def test_zero_on_self(self):
        pi = FiniteCoupling([row(0, 0.5, [-1, 1]), row(2, 0.5, [2])])
        assert aw_distance(pi, pi) == pytest.approx(0.0, abs=1e-12)

    def test_swapped_kernels(self):
        p = FiniteCoupling([row(0, 0.5, [0]), row(1, 0.5, [1])])
        q = FiniteCoupling([row(0, 0.5, [1]), row(1, 0.5, [0])])
        assert aw_distance(p, q) == pytest.approx(1.0)

    def test_spread_kernels(self):
        p = FiniteCoupling([row(0, 0.5, [0]), row(1, 0.5, [1])])
        q = FiniteCoupling([row(0, 0.5, [0, 1]), row(1, 0.5, [0, 1])])
        assert aw_distance(p, q) == pytest.approx(0.5)

    def test_mass_mismatch(self):
        with pytest.raises(MassError):
            aw_distance(FiniteCoupling([row(0, 1, [0])]), FiniteCoupling([row(0, 0.5, [0])]))

    @pytest.mark.parametrize("r", [1.0, 2.0])
    def test_matches_vertex_enumeration(self, r):
        rng = np.random.default_rng(int(10 * r))
        for _ in range(15):
            p, q = random_coupling(rng), random_coupling(rng)
            q = q.scale(p.mass / q.mass)
            assert aw_distance(p, q, r) == pytest.approx(aw_enumerate(p, q, r), abs=1e-7)

    def test_metric_properties(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            a, b, c = (random_coupling(rng) for _ in range(3))
            b, c = b.scale(a.mass / b.mass), c.scale(a.mass / c.mass)
            ab, bc, ac = aw_distance(a, b), aw_distance(b, c), aw_distance(a, c)
            assert ab == pytest.approx(aw_distance(b, a), abs=1e-7)
            assert ac <= ab + bc + 1e-7

    def test_dominates_marginal_distances(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            p, q = random_coupling(rng), random_coupling(rng)
            q = q.scale(p.mass / q.mass)
            d = aw_distance(p, q)
            assert d >= wasserstein(p.first_marginal, q.first_marginal) - 1e-7
            assert d >= wasserstein(p.second_marginal, q.second_marginal) - 1e-7

    def test_threads_do_not_change_result(self):
        rng = np.random.default_rng(13)
        p, q = random_coupling(rng, 6), random_coupling(rng, 6)
        q = q.scale(p.mass / q.mass)
        assert aw_distance(p, q, threads=4) == aw_distance(p, q, threads=1)


class TestCompose:
    def test_identity(self):
        pi = FiniteCoupling([row(0, 0.5, [-1, 1]), row(2, 0.5, [1, 2])])
        assert compose(pi, FiniteCoupling.identity(pi.second_marginal)).allclose(pi)

    def test_example(self):
        pi = FiniteCoupling([row(0, 1, [1])])
        M = FiniteCoupling([row(1, 1, [0, 2])])
        assert compose(pi, M).allclose(FiniteCoupling([row(0, 1, [0, 2])]))

    def test_mismatch(self):
        with pytest.raises(ChainingError):
            compose(FiniteCoupling([row(0, 1, [1])]), FiniteCoupling([row(2, 1, [2])]))

    def test_martingale_chain(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            pi = random_super_coupling(rng, 4, kinds=("stay", "mart"))
            nu = pi.second_marginal
            spread = (nu.translate(-0.5) + nu.translate(0.5)).scale_mass(0.5)
            M = feasible_martingale(nu, spread)
            out = compose(pi, M)
            assert out.is_martingale()
            assert out.first_marginal.allclose(pi.first_marginal, 0)
            assert out.second_marginal.allclose(M.second_marginal, 1e-12)

    def test_super_then_martingale_stays_super(self):
        rng = np.random.default_rng(22)
        for _ in range(30):
            mu, nu, pi = random_cd_pair(rng, 4)
            spread = (nu.translate(-1.0) + nu.translate(1.0)).scale_mass(0.5)
            out = compose(pi, feasible_martingale(nu, spread))
            assert out.is_supermartingale()


class TestAlgebra:
    def test_add(self):
        out = add(FiniteCoupling([row(0, 0.5, [0])]), FiniteCoupling([row(1, 0.5, [1])]))
        assert out.allclose(FiniteCoupling.identity(D([0, 1], [0.5, 0.5])))
        pi = FiniteCoupling([row(0, 1, [1])])
        assert add(pi, FiniteCoupling()).allclose(pi)

    def test_restrict_first(self):
        pi = FiniteCoupling([row(0, 0.5, [0]), row(2, 0.5, [2])])
        assert restrict_first(pi, Interval.closed(-1, 1)).allclose(FiniteCoupling([row(0, 0.5, [0])]))

    def test_intensity(self):
        assert intensity([(1.0, D([3], [1]))]).allclose(D([3], [1]))
        assert intensity([(0.5, D([0], [1])), (0.5, D([2], [1]))]).allclose(D([0, 2], [0.5, 0.5]))

    def test_embedding_left_inverse(self):
        pi = FiniteCoupling([row(0, 0.5, [-1, 1]), row(2, 0.5, [1, 2])])
        assert FiniteCoupling.intensity_hat(pi.embed()).allclose(pi)

    @given(st.floats(0.1, 3.0))
    @settings(max_examples=20, deadline=None)
    def test_scale(self, s):
        pi = FiniteCoupling([row(0, 0.5, [-1, 1]), row(2, 0.5, [1, 2])])
        assert pi.scale(s).mass == pytest.approx(s)

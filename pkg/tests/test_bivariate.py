"""Exact bivariate algebra: correlations, structural checks and constructors."""

import itertools
from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from invcorr.bivariate import (
    JointPMF,
    correlation,
    cyclic_remainder,
    independent,
    is_independent,
    is_quasi_frechet,
    is_quasi_independent,
    make_quasi_frechet,
    make_quasi_independent,
    pushforward,
    quasi_frechet_fit,
    quasi_independence_cdf_gap,
    quasi_independence_event_gap,
    r_bounds,
    random_rearrangement,
    random_transform_values,
    transform_correlation,
)
from invcorr.errors import AdmissibilityError, ConstructionError, StructureError, ValidationError

from pmfgen import as_float_map, perturb, random_g, random_prob, random_qf, random_qi

THIRD = [Fr(1, 3)] * 3


def quadratic_form_corr(P, x):
    """Correlation for identical marginals as a ratio of two quadratic forms."""
    P = np.asarray(P, dtype=float)
    p = P.sum(axis=1)
    x = np.asarray(x, dtype=float)
    num = x @ (P - np.outer(p, p)) @ x
    den = x @ (np.diag(p) - np.outer(p, p)) @ x
    return num / den


def example_pmf(eps=Fr(1, 9)):
    return make_quasi_independent(THIRD, THIRD, cyclic_remainder(eps))


def frechet_pmf(p, r):
    p = np.asarray(p, dtype=float)
    return JointPMF([1, 2, 3][:len(p)], [1, 2, 3][:len(p)], r * np.diag(p) + (1 - r) * np.outer(p, p))


class TestJointPMF:
    def test_validation_lists_problems(self):
        with pytest.raises(ValidationError) as err:
            JointPMF([2, 1], [1, 1], [[0.5, 0.5], [0.0, 0.2]])
        assert len(err.value.violations) >= 2

    def test_zero_marginal_atom_rejected(self):
        with pytest.raises(ValidationError, match="positive mass"):
            JointPMF([1, 2], [1, 2], [[0.5, 0.5], [0.0, 0.0]])

    def test_shape(self):
        with pytest.raises(ValidationError):
            JointPMF([1, 2], [1], [[0.5, 0.5]])

    def test_identical_flag(self):
        assert example_pmf().identical_marginals
        assert not independent([0.5, 0.5], [0.3, 0.7]).identical_marginals
        assert not JointPMF([1, 2], [1, 3], [[0.5, 0], [0, 0.5]]).identical_marginals

    def test_json_round_trip_exact(self):
        pmf = example_pmf()
        obj = pmf.to_dict()
        assert obj["P"][0][1] == "2/9"
        back = JointPMF.from_dict(obj)
        assert back.exact and np.array_equal(back.P, pmf.P)

    def test_union_grid(self):
        pmf = JointPMF([0, 1], [1, 2], [[0.25, 0.25], [0.25, 0.25]])
        atoms, Pu = pmf.on_union_grid()
        assert list(atoms) == [0, 1, 2]
        assert Pu.shape == (3, 3) and Pu[2].sum() == 0 and Pu[:, 0].sum() == 0


class TestCorrelation:
    def test_independent_zero(self):
        assert correlation(independent([0.2, 0.8], [0.5, 0.3, 0.2])) == pytest.approx(0, abs=1e-15)

    def test_comonotone_one(self):
        assert correlation(JointPMF(THIRD and [1, 2, 3], [1, 2, 3], np.diag(THIRD))) == 1

    def test_frechet_quadratic_form(self):
        pmf = frechet_pmf([1 / 3] * 3, 0.3)
        assert correlation(pmf) == pytest.approx(0.3, abs=1e-14)
        assert quadratic_form_corr(pmf.P, [1, 2, 3]) == pytest.approx(0.3, abs=1e-14)

    def test_exact_fraction(self):
        pmf = make_quasi_frechet(THIRD, Fr(3, 10))
        assert correlation(pmf) == Fr(3, 10)

    def test_degenerate(self):
        with pytest.raises(AdmissibilityError):
            correlation(JointPMF([1], [1, 2], [[0.5, 0.5]]))

    @pytest.mark.parametrize("seed", range(20))
    def test_against_numpy_moments(self, seed):
        rng = np.random.default_rng(seed)
        P = rng.random((3, 4))
        P /= P.sum()
        x, y = np.sort(rng.normal(size=3)), np.sort(rng.normal(size=4))
        pmf = JointPMF(x, y, P)
        X, Y = np.meshgrid(x, y, indexing="ij")
        cov = np.cov(X.ravel(), Y.ravel(), aweights=P.ravel(), bias=True)
        assert correlation(pmf) == pytest.approx(cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1]))


class TestTransformCorrelation:
    def test_identity(self):
        pmf = frechet_pmf([0.2, 0.3, 0.5], 0.4)
        assert transform_correlation(pmf, lambda a: a) == pytest.approx(correlation(pmf))

    def test_top_indicator_on_frechet(self):
        p = np.array([0.2, 0.3, 0.5])
        pmf = frechet_pmf(p, 0.3)
        P = pmf.P
        # plugging z = e_3 into the quadratic-form ratio
        oracle = (P[2, 2] - p[2] ** 2) / (p[2] - p[2] ** 2)
        got = transform_correlation(pmf, {1: 0, 2: 0, 3: 1})
        assert got == pytest.approx(0.3, abs=1e-14)
        assert got == pytest.approx(oracle, abs=1e-14)

    def test_constant_rejected(self):
        pmf = JointPMF([0, 1], [2, 3], [[0.25, 0.25], [0.25, 0.25]])
        with pytest.raises(AdmissibilityError, match="Y"):
            transform_correlation(pmf, {0: 0.0, 1: 1.0, 2: 5.0, 3: 5.0})

    def test_missing_atom(self):
        with pytest.raises(AdmissibilityError):
            transform_correlation(example_pmf(), {1: 0.0, 2: 1.0})

    @pytest.mark.parametrize("seed", range(10))
    def test_quasi_independent_always_zero(self, seed):
        rng = np.random.default_rng(seed)
        pmf = random_qi(rng, int(rng.integers(3, 7)))
        for _ in range(50):
            g = random_g(rng, pmf.union_atoms())
            assert transform_correlation(pmf, g) == pytest.approx(0, abs=1e-12)

    def test_random_values_helper(self):
        rng = np.random.default_rng(0)
        v = random_transform_values(6, rng, monotone=True)
        assert np.all(np.diff(v) >= 0) and np.ptp(v) > 0


class TestQuasiIndependence:
    def test_independent(self):
        assert is_quasi_independent(independent([0.2, 0.8], [0.1, 0.9]))

    def test_documented_example(self):
        pmf = example_pmf()
        assert is_quasi_independent(pmf)
        assert not is_independent(pmf)

    def test_symmetric_positive_dependence(self):
        pmf = frechet_pmf([1 / 3] * 3, 0.5)
        # direct arithmetic: P + P' - 2pp' = 0.5 (2D - 2pp') is nonzero on the diagonal
        P = np.asarray(pmf.P)
        p = P.sum(1)
        assert np.max(np.abs(P + P.T - 2 * np.outer(p, p))) > 0.1
        assert not is_quasi_independent(pmf)

    def test_different_supports_padding(self):
        pmf = independent([0.5, 0.5], [0.2, 0.3, 0.5], x_atoms=[0, 5], y_atoms=[1, 2, 3])
        assert is_quasi_independent(pmf)

    def test_cdf_and_event_forms(self):
        pmf = example_pmf()
        assert quasi_independence_cdf_gap(pmf) == 0
        assert quasi_independence_event_gap(pmf) == 0


class TestQuasiFrechet:
    def test_constructed_recovery(self):
        assert quasi_frechet_fit(frechet_pmf([1 / 3] * 3, 0.3)) == pytest.approx(0.3, abs=1e-14)

    def test_independent_is_zero(self):
        assert quasi_frechet_fit(independent([0.3, 0.7], [0.3, 0.7])) == pytest.approx(0, abs=1e-14)

    def test_example_is_zero(self):
        assert quasi_frechet_fit(example_pmf()) == 0

    def test_requires_identical(self):
        with pytest.raises(StructureError):
            quasi_frechet_fit(independent([0.3, 0.7], [0.5, 0.5]))

    def test_non_member_returns_none(self):
        rng = np.random.default_rng(1)
        pmf, _ = random_qf(rng, 4)
        assert quasi_frechet_fit(perturb(pmf, rng)) is None

    def test_is_quasi_frechet(self):
        pmf = make_quasi_frechet(THIRD, Fr(3, 10), cyclic_remainder(Fr(1, 100)))
        assert is_quasi_frechet(pmf, Fr(3, 10))
        assert not is_quasi_frechet(pmf, Fr(1, 5))


class TestRBounds:
    def test_uniform_three(self):
        assert r_bounds(THIRD).lower == Fr(-1, 2)

    def test_uniform_two(self):
        assert r_bounds([0.5, 0.5]).lower == -1

    def test_skewed(self):
        b = r_bounds([0.9, 0.05, 0.05])
        assert b.lower == pytest.approx(-1 / 19)
        assert b.upper == 1

    @given(st.lists(st.floats(0.01, 1), min_size=2, max_size=7))
    def test_bound_is_tight_for_frechet(self, raw):
        """At the lower bound, r D + (1 - r) p p' has a zero entry and stays a pmf."""
        p = np.asarray(raw) / sum(raw)
        lo = r_bounds(p).lower
        assert -1 <= lo < 0
        M = lo * np.diag(p) + (1 - lo) * np.outer(p, p)
        assert M.min() == pytest.approx(0, abs=1e-12)
        below = (lo - 1e-3) * np.diag(p) + (1 - lo + 1e-3) * np.outer(p, p)
        assert below.min() < 0

    def test_invalid(self):
        with pytest.raises(ValidationError):
            r_bounds([1.0])
        with pytest.raises(ValidationError):
            r_bounds([0.5, 0.6])
        with pytest.raises(ValidationError):
            r_bounds([0.0, 1.0])


class TestConstructors:
    def test_zero_remainder_is_independent(self):
        pmf = make_quasi_independent([0.2, 0.8], [0.6, 0.4], np.zeros((2, 2)))
        assert is_independent(pmf)

    def test_boundary_epsilon(self):
        p, q = [Fr(1, 2), Fr(1, 4), Fr(1, 4)], [Fr(1, 4), Fr(1, 2), Fr(1, 4)]
        eps = min(p[0] * q[2], p[1] * q[0], p[2] * q[1])
        pmf = make_quasi_independent(p, q, cyclic_remainder(eps))
        assert any(v == 0 for v in pmf.P.ravel())
        assert is_quasi_independent(pmf)

    def test_lower_boundary_epsilon(self):
        p = q = THIRD
        pmf = make_quasi_independent(p, q, cyclic_remainder(-Fr(1, 9)))
        assert is_quasi_independent(pmf)

    def test_beyond_boundary(self):
        with pytest.raises(ConstructionError, match="negative"):
            make_quasi_independent(THIRD, THIRD, cyclic_remainder(Fr(1, 9) + Fr(1, 1000)))

    def test_first_violation_named(self):
        S = np.array([[0, 0.1], [0.1, 0]])
        with pytest.raises(ConstructionError, match="antisymmetric"):
            make_quasi_independent([0.5, 0.5], [0.5, 0.5], S)
        S = np.array([[0, 0.1], [-0.1, 0]])
        with pytest.raises(ConstructionError, match="row sums"):
            make_quasi_independent([0.5, 0.5], [0.5, 0.5], S)

    def test_zero_mass_atoms_dropped(self):
        pmf = make_quasi_independent([0.5, 0.5, 0.0], [0.5, 0.5, 0.0], np.zeros((3, 3)))
        assert list(pmf.x_atoms) == [1, 2]

    def test_comonotone(self):
        pmf = make_quasi_frechet([0.2, 0.3, 0.5], 1.0)
        assert np.allclose(pmf.P, np.diag([0.2, 0.3, 0.5]))

    def test_lower_bound_attained(self):
        pmf = make_quasi_frechet(THIRD, Fr(-1, 2))
        assert correlation(pmf) == Fr(-1, 2)
        assert quasi_frechet_fit(pmf) == Fr(-1, 2)

    def test_out_of_bounds(self):
        with pytest.raises(ConstructionError, match="admissible"):
            make_quasi_frechet(THIRD, Fr(-3, 5))

    def test_non_exchangeable_with_remainder(self):
        pmf = make_quasi_frechet([1 / 3] * 3, 0.3, cyclic_remainder(0.01))
        assert not np.allclose(pmf.P, pmf.P.T)
        assert quasi_frechet_fit(pmf) == pytest.approx(0.3, abs=1e-14)
        rng = np.random.default_rng(0)
        for _ in range(100):
            g = random_g(rng, pmf.union_atoms())
            assert transform_correlation(pmf, g) == pytest.approx(0.3, abs=1e-12)


class TestRearrangement:
    def test_symmetric_unchanged(self):
        pmf = frechet_pmf([0.2, 0.3, 0.5], 0.4)
        assert np.allclose(random_rearrangement(pmf).P, pmf.P)

    def test_example_becomes_independent(self):
        out = random_rearrangement(example_pmf())
        assert np.array_equal(out.P, np.full((3, 3), Fr(1, 9), dtype=object))

    def test_remainder_cancels(self):
        p = [Fr(1, 5), Fr(3, 10), Fr(1, 2)]
        pmf = make_quasi_frechet(p, Fr(2, 5), cyclic_remainder(Fr(1, 50)))
        expect = make_quasi_frechet(p, Fr(2, 5))
        assert np.array_equal(random_rearrangement(pmf).P, expect.P)


# --- property-level equivalences ------------------------------------------------------


def transform_zero_for_all(pmf, rng, count=200, target=0.0):
    for _ in range(count):
        g = random_g(rng, pmf.union_atoms())
        try:
            if abs(transform_correlation(pmf, g) - target) > 1e-12:
                return False
        except AdmissibilityError:
            continue
    return True


class TestEquivalences:
    @pytest.mark.parametrize("seed", range(15))
    def test_zero_invariance_iff_quasi_independent(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 9))
        pos = random_qi(rng, n)
        assert is_quasi_independent(pos)
        assert transform_zero_for_all(pos, rng)
        neg = perturb(pos, rng)
        assert not is_quasi_independent(neg)
        assert not transform_zero_for_all(neg, rng)

    @pytest.mark.parametrize("seed", range(15))
    def test_r_invariance_iff_quasi_frechet(self, seed):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(2, 8))
        pos, r = random_qf(rng, n)
        assert quasi_frechet_fit(pos) == pytest.approx(r, abs=1e-12)
        assert transform_zero_for_all(pos, rng, target=r)
        if n >= 3:
            neg = perturb(pos, rng)
            assert quasi_frechet_fit(neg) is None
            base = float(correlation(neg))
            assert not transform_zero_for_all(neg, rng, target=base)

    @pytest.mark.parametrize("seed", range(30))
    def test_biatomic_quasi_independence_is_independence(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(2, 6))
        p = random_prob(rng, 2)
        q = random_prob(rng, m)
        # Any admissible remainder on a grid where X has 2 atoms must vanish.
        S = np.zeros((m, m))
        if m >= 3:
            i, j, k = rng.choice(m, size=3, replace=False)
            for a, b in ((i, j), (j, k), (k, i)):
                S[a, b] += 0.01
                S[b, a] -= 0.01
        pp = np.r_[p, np.zeros(m - 2)]
        try:
            pmf = make_quasi_independent(pp, q, S)
        except ConstructionError:
            pmf = make_quasi_independent(pp, q, np.zeros((m, m)))
        assert len(pmf.x_atoms) == 2
        assert np.max(np.abs(pmf.P - np.outer(pmf.p, pmf.q))) <= 1e-12

    @pytest.mark.parametrize("seed", range(20))
    def test_different_marginals_nonzero_corr_not_invariant(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 6))
        while True:
            P = rng.random((n, n)) ** 3
            P /= P.sum()
            pmf = JointPMF(range(1, n + 1), range(1, n + 1), P)
            if abs(correlation(pmf)) > 1e-3:
                break
        values = set()
        for mask in itertools.product((0, 1), repeat=n):
            if 0 < sum(mask) < n:
                w = rng.integers(1, 3, size=n) * np.array(mask)
                try:
                    values.add(round(transform_correlation(pmf, dict(zip(range(1, n + 1), w))), 12))
                except AdmissibilityError:
                    pass
            if len(values) >= 2:
                break
        assert len(values) >= 2

    @pytest.mark.parametrize("seed", range(20))
    def test_pushforward_keeps_structure(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 7))
        pmf, r = random_qf(rng, n)
        merge = rng.integers(0, max(2, n - 1), size=n)
        if len(set(merge)) < 2:
            merge[0], merge[1] = 0, 1
        h = lambda a: int(merge[int(a) - 1])
        out = pushforward(pmf, h)
        assert quasi_frechet_fit(out, 1e-10) == pytest.approx(r, abs=1e-10)
        qi = random_qi(rng, n)
        assert is_quasi_independent(pushforward(qi, h), 1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_cdf_and_event_identities_agree(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 5))
        pmf = random_qi(rng, n) if rng.random() < 0.5 else perturb(random_qi(rng, max(n, 3)), rng)
        cdf = quasi_independence_cdf_gap(pmf) <= 1e-12
        event = quasi_independence_event_gap(pmf) <= 1e-12
        assert cdf == event == is_quasi_independent(pmf)

"""Membership LP for the clique partition polytope."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from invcorr.errors import DimensionError, ValidationError, WeightSumError
from invcorr.partitions import SetPartition, clique_point, enumerate_partitions
from invcorr.polytope import (
    CorrMatrix,
    MembershipCert,
    assemble_vd,
    lp_solve,
    membership,
    reconstruct,
    upper_pairs,
)


def offdiag3(a, b, c):
    return CorrMatrix.from_offdiagonal(3, [a, b, c])


def random_member(rng, d):
    parts = enumerate_partitions(d)
    k = rng.integers(1, min(6, len(parts)) + 1)
    idx = rng.choice(len(parts), size=k, replace=False)
    w = rng.dirichlet(np.ones(k))
    R = sum(wi * clique_point(parts[i]) for wi, i in zip(w, idx))
    return CorrMatrix(R)


def scipy_residual(R):
    """Independent oracle: the same L1 feasibility LP solved by HiGHS."""
    V = assemble_vd(R.d).matrix.astype(float)
    iu = [(i - 1, j - 1) for i, j in upper_pairs(R.d)]
    rhs = np.array([max(R.entries[i, j], 0.0) for i, j in iu] + [1.0])
    m, n = V.shape
    res = linprog(np.r_[np.zeros(n), np.ones(m)], A_eq=np.hstack([V, np.eye(m)]), b_eq=rhs,
                  bounds=(0, None), method="highs")
    return res.fun


class TestVdSystem:
    def test_pair_order(self):
        assert upper_pairs(4) == [(1, 2), (1, 3), (2, 3), (1, 4), (2, 4), (3, 4)]

    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    def test_columns_are_clique_points(self, d):
        sysd = assemble_vd(d)
        parts = enumerate_partitions(d)
        assert sysd.matrix.shape == (d * (d - 1) // 2 + 1, len(parts))
        for col, part in enumerate(parts):
            c = clique_point(part)
            expect = [c[i - 1, j - 1] for i, j in upper_pairs(d)] + [1]
            assert list(sysd.matrix[:, col]) == expect
            assert sysd.partition(col) == part

    def test_bounds(self):
        with pytest.raises(DimensionError):
            assemble_vd(1)
        with pytest.raises(DimensionError):
            assemble_vd(10)


class TestLPSolve:
    def test_known_optimum(self):
        # min -x - y s.t. x + 2y + s1 = 4, 3x + y + s2 = 6  -> x = 8/5, y = 6/5
        A = [[1, 2, 1, 0], [3, 1, 0, 1]]
        res = lp_solve([-1, -1, 0, 0], A, [4, 6])
        assert res.status == "optimal"
        assert res.objective == pytest.approx(-2.8)
        assert res.solution[:2] == pytest.approx([1.6, 1.2])

    def test_exact_known_optimum(self):
        A = [[1, 2, 1, 0], [3, 1, 0, 1]]
        res = lp_solve([-1, -1, 0, 0], A, [4, 6], exact=True)
        assert res.objective == Fraction(-14, 5)
        assert list(res.solution[:2]) == [Fraction(8, 5), Fraction(6, 5)]

    def test_infeasible(self):
        assert lp_solve([1, 1], [[1, 1]], [-1]).status == "infeasible"

    def test_unbounded(self):
        assert lp_solve([-1, 0], [[1, -1]], [0]).status == "unbounded"

    def test_free_variable(self):
        # min x s.t. x - y = -3, y >= 0 fixed to 0 by y = 0 row
        res = lp_solve([1, 0], [[1, -1], [0, 1]], [-3, 0], nonneg=[False, True])
        assert res.solution == pytest.approx([-3, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            lp_solve([1, 2, 3], [[1, 1]], [1])

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_highs(self, seed):
        rng = np.random.default_rng(seed)
        m, n = 4, 9
        A = rng.normal(size=(m, n))
        b = A @ rng.random(n)
        c = rng.random(n)
        ours = lp_solve(c, A, b)
        ref = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        assert ours.status == "optimal"
        assert ours.objective == pytest.approx(ref.fun, abs=1e-9)


class TestMembership:
    def test_documented_non_member(self):
        cert = membership(offdiag3(0.8, 0.5, 0.2))
        assert not cert.member
        assert cert.residual > 1e-6
        assert cert.residual == pytest.approx(scipy_residual(offdiag3(0.8, 0.5, 0.2)), abs=1e-9)

    def test_hand_derived_residual(self):
        # Facet r12 + r13 - r23 <= 1 is violated by 0.1; the L1 distance is 0.1.
        assert membership(offdiag3(0.8, 0.5, 0.2)).residual == pytest.approx(0.1, abs=1e-12)

    def test_exact_non_member(self):
        R = offdiag3(Fraction(4, 5), Fraction(1, 2), Fraction(1, 5))
        cert = membership(R, exact=True)
        assert not cert.member
        assert cert.exact_residual == Fraction(1, 10)

    def test_identity(self):
        cert = membership(np.eye(4))
        assert cert.member
        assert [(p.blocks, a) for p, a in cert.weights] == [(((1,), (2,), (3,), (4,)), 1.0)]

    def test_all_ones(self):
        cert = membership(np.ones((3, 3)))
        assert [(p.blocks, a) for p, a in cert.weights] == [(((1, 2, 3),), 1.0)]

    def test_negative_fast_reject(self):
        R = offdiag3(0.5, -0.2, 0.3)
        cert = membership(R)
        assert not cert.member
        assert cert.reason == "negative entry fast-reject"
        assert cert.residual == pytest.approx(0.2)

    def test_tiny_negative_is_clamped(self):
        cert = membership(offdiag3(0.5, -1e-12, 0.0))
        assert cert.member

    def test_half_matrix(self):
        cert = membership(offdiag3(0.5, 0.5, 0.5))
        assert cert.member
        assert cert.reconstruction_error <= 1e-12
        assert sum(a for _, a in cert.weights) == pytest.approx(1.0)

    def test_exact_member(self):
        R = offdiag3(Fraction(1, 3), Fraction(1, 3), Fraction(1, 3))
        cert = membership(R, exact=True)
        assert cert.member and cert.exact_residual == 0

    @pytest.mark.parametrize("seed", range(40))
    def test_random_members(self, seed):
        rng = np.random.default_rng(seed)
        R = random_member(rng, int(rng.integers(2, 7)))
        cert = membership(R)
        assert cert.member
        assert cert.reconstruction_error <= 1e-8
        rec = reconstruct(cert.weights)
        assert np.max(np.abs(rec.entries - R.entries)) <= 1e-8

    @pytest.mark.parametrize("seed", range(30))
    def test_residual_matches_highs(self, seed):
        rng = np.random.default_rng(100 + seed)
        d = int(rng.integers(3, 6))
        R = np.eye(d)
        iu = np.triu_indices(d, 1)
        R[iu] = rng.random(len(iu[0]))
        R = CorrMatrix(R + np.triu(R, 1).T)
        assert membership(R).residual == pytest.approx(scipy_residual(R), abs=1e-9)

    @given(st.lists(st.floats(0, 1), min_size=15, max_size=15))
    def test_hypothesis_mixtures_are_members(self, raw):
        w = np.asarray(raw)
        if w.sum() <= 0:
            w = np.ones(15)
        w = w / w.sum()
        parts = enumerate_partitions(4)
        R = CorrMatrix(sum(wi * clique_point(p) for wi, p in zip(w, parts)))
        cert = membership(R)
        assert cert.member and cert.reconstruction_error <= 1e-8

    def test_d_one(self):
        assert membership(np.eye(1)).member

    def test_caps(self):
        with pytest.raises(DimensionError):
            membership(np.eye(10))
        with pytest.raises(DimensionError):
            membership(np.eye(6), exact=True)

    def test_bad_tol(self):
        with pytest.raises(ValidationError):
            membership(np.eye(3), tol=0)


class TestCorrMatrix:
    def test_rejects_all_problems(self):
        with pytest.raises(ValidationError) as err:
            CorrMatrix(np.array([[2.0, 0.3], [0.1, 1.0]]))
        assert len(err.value.violations) == 2

    def test_range(self):
        with pytest.raises(ValidationError):
            CorrMatrix(np.array([[1.0, 1.5], [1.5, 1.0]]))

    def test_json_round_trip(self):
        R = offdiag3(0.1, 0.2, 0.3)
        assert CorrMatrix.from_dict(R.to_dict()) == R

    def test_declared_dimension_checked(self):
        with pytest.raises(ValidationError):
            CorrMatrix.from_dict({"d": 3, "rows": [[1, 0], [0, 1]]})


class TestCertificate:
    def test_round_trip(self):
        cert = membership(offdiag3(0.5, 0.5, 0.5))
        back = MembershipCert.from_dict(cert.to_dict())
        assert back.member and back.d == 3
        assert [p for p, _ in back.weights] == [p for p, _ in cert.weights]

    def test_exact_json(self):
        cert = membership(offdiag3(Fraction(4, 5), Fraction(1, 2), Fraction(1, 5)), exact=True)
        assert cert.to_dict()["exact_residual"] == {"num": 1, "den": 10}


class TestReconstruct:
    def test_exact(self):
        parts = enumerate_partitions(3)
        R = reconstruct([(parts[0], Fraction(1, 2)), (parts[4], Fraction(1, 2))])
        assert R.entries[0, 1] == Fraction(1, 2)

    def test_bad_weights(self):
        p = SetPartition(2, [(1, 2)])
        with pytest.raises(WeightSumError):
            reconstruct([(p, 0.7)])
        with pytest.raises(WeightSumError):
            reconstruct([(p, 1.5), (p, -0.5)])
        with pytest.raises(WeightSumError):
            reconstruct([])

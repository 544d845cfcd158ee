"""Membership testing for the set of invariant correlation matrices.

A correlation matrix is an invariant correlation matrix (of a continuous random
vector with identical marginals) iff it is a convex combination of clique
partition points.  Membership is decided with a phase-1 style linear program::

    min 1'z  s.t.  V alpha + z = r,  alpha >= 0,  z >= 0

whose optimum is zero exactly for members.  ``V`` has one column per set
partition (vectorized upper triangle of its clique point, plus a final row of
ones) and ``r`` is the vectorized upper triangle of the input followed by 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import _backend
from .errors import DimensionError, ValidationError, WeightSumError
from .partitions import SetPartition, bell_number, clique_point, partition_labels

MEMBERSHIP_CAP = 9
EXACT_CAP = 5
DEFAULT_TOL = 1e-9

MEMBER = "member"
NON_MEMBER = "non-member"


@dataclass(frozen=True, eq=False)
class CorrMatrix:
    """Symmetric matrix with unit diagonal and off-diagonal entries in [-1, 1]."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries)
        if a.dtype != object:
            a = a.astype(float)
        problems = []
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValidationError(f"matrix must be square and nonempty, got shape {a.shape}")
        af = a.astype(float)
        if not np.all(np.isfinite(af)):
            problems.append("entries must be finite")
        else:
            if np.max(np.abs(af - af.T)) > 1e-12:
                problems.append("matrix must be symmetric within 1e-12")
            if np.max(np.abs(np.diag(af) - 1.0)) > 1e-12:
                problems.append("diagonal entries must equal 1 within 1e-12")
            off = af[~np.eye(len(af), dtype=bool)]
            if off.size and (off.min() < -1 - 1e-12 or off.max() > 1 + 1e-12):
                problems.append("off-diagonal entries must lie in [-1, 1] within 1e-12")
        if problems:
            raise ValidationError(problems)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def __eq__(self, other):
        return isinstance(other, CorrMatrix) and np.array_equal(self.entries, other.entries)

    __hash__ = None

    @classmethod
    def from_offdiagonal(cls, d, values):
        """Build from upper-triangle entries in LP row order."""
        a = np.eye(d, dtype=object if any(isinstance(v, Fraction) for v in values) else float)
        for (i, j), v in zip(upper_pairs(d), values):
            a[i - 1, j - 1] = a[j - 1, i - 1] = v
        return cls(a)

    def to_dict(self) -> dict:
        return {"d": self.d, "rows": [[float(v) for v in row] for row in self.entries]}

    @classmethod
    def from_dict(cls, obj) -> "CorrMatrix":
        rows = obj["rows"]
        if "d" in obj and int(obj["d"]) != len(rows):
            raise ValidationError(f"declared d={obj['d']} but {len(rows)} rows given")
        return cls(np.array(rows))


def upper_pairs(d):
    """1-based (i, j) pairs, i < j, in LP row order (12, 13, 23, 14, 24, 34, ...)."""
    return [(i, j) for j in range(2, d + 1) for i in range(1, j)]


def _upper_vector(a):
    d = a.shape[0]
    return [a[i - 1, j - 1] for i, j in upper_pairs(d)]


class VdSystem(NamedTuple):
    matrix: np.ndarray
    row_pairs: list
    labels: np.ndarray

    def partition(self, column) -> SetPartition:
        return SetPartition.from_labels(self.labels[column])


def assemble_vd(d: int, cap: int = MEMBERSHIP_CAP) -> VdSystem:
    """Constraint matrix of the membership LP.

    Column ``l`` is ``(sigma_12, sigma_13, sigma_23, ..., sigma_{d-1,d}, 1)`` for the
    ``l``-th partition in enumeration order.  ``row_pairs`` lists the (i, j) of each
    row, with ``None`` for the final all-ones row.
    """
    if d < 2:
        raise DimensionError(f"membership LP needs d >= 2, got {d}")
    if d > cap:
        raise DimensionError(f"dimension {d} exceeds the cap {cap} (Bell({d}) = {bell_number(d)})")
    labels = partition_labels(d, cap=max(cap, d))
    pairs = upper_pairs(d)
    V = np.ones((len(pairs) + 1, len(labels)), dtype=np.int8)
    for row, (i, j) in enumerate(pairs):
        V[row] = labels[:, i - 1] == labels[:, j - 1]
    return VdSystem(V, pairs + [None], labels)


# --- linear programming -----------------------------------------------------

LP_OPTIMAL = "optimal"
LP_INFEASIBLE = "infeasible"
LP_UNBOUNDED = "unbounded"
LP_NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True, eq=False)
class LPResult:
    status: str
    objective: object
    solution: np.ndarray
    iterations: int


def _tableau_solve(A, b, c, kern, eps, feas_tol, max_iter, exact):
    m, n = A.shape
    if exact:
        zero, one = Fraction(0), Fraction(1)
        T = np.full((m + 1, n + m + 1), zero, dtype=object)
    else:
        zero, one = 0.0, 1.0
        T = np.zeros((m + 1, n + m + 1))
    flip = np.array([bi < 0 for bi in b])
    A = A.copy()
    b = b.copy()
    A[flip] = -A[flip]
    b[flip] = -b[flip]
    T[:m, :n] = A
    for i in range(m):
        T[i, n + i] = one
    T[:m, -1] = b
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = np.arange(n, n + m, dtype=np.int64)
    allowed = np.ones(n + m, dtype=bool)

    status, it1 = kern.pivot_loop(T, basis, allowed, eps, max_iter)
    if status != _backend.OPTIMAL:
        return LPResult(LP_NUMERICAL_FAILURE, None, None, it1)
    if -T[m, -1] > feas_tol:
        return LPResult(LP_INFEASIBLE, None, None, it1)

    for i in range(m):
        if basis[i] >= n:
            nz = [j for j in range(n) if abs(T[i, j]) > eps]
            if nz:
                kern.pivot(T, i, nz[0])
                basis[i] = nz[0]
    allowed[n:] = False

    T[m, :] = zero
    T[m, :n] = c
    for i in range(m):
        if basis[i] < n and c[basis[i]] != 0:
            T[m] -= c[basis[i]] * T[i]
    status, it2 = kern.pivot_loop(T, basis, allowed, eps, max_iter)
    if status == _backend.UNBOUNDED:
        return LPResult(LP_UNBOUNDED, None, None, it1 + it2)
    if status != _backend.OPTIMAL:
        return LPResult(LP_NUMERICAL_FAILURE, None, None, it1 + it2)
    x = np.full(n, zero, dtype=object) if exact else np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, -1]
    objective = sum((ci * xi for ci, xi in zip(c, x)), zero)
    return LPResult(LP_OPTIMAL, objective, x, it1 + it2)


def lp_solve(cost, eq_lhs, eq_rhs, nonneg=None, *, exact=False, backend=None,
             eps=1e-11, feas_tol=1e-9, max_iter=100_000) -> LPResult:
    """Solve ``min cost'x  s.t.  eq_lhs x = eq_rhs`` by a dense two-phase simplex.

    Variables flagged ``False`` in ``nonneg`` are free (split into two
    nonnegative parts); by default every variable is nonnegative.  Bland's rule
    is used for both entering and leaving variables, so the result is a
    deterministic function of the inputs.

    With ``exact=True`` all arithmetic is on ``fractions.Fraction`` and the
    tolerances are ignored.
    """
    if exact:
        conv = np.vectorize(Fraction, otypes=[object])
        c = conv(np.asarray(cost, dtype=object))
        A = conv(np.atleast_2d(np.asarray(eq_lhs, dtype=object)))
        b = conv(np.asarray(eq_rhs, dtype=object))
        kern = _backend.get_kernels("python")
        eps = feas_tol = Fraction(0)
    else:
        c = np.asarray(cost, dtype=float)
        A = np.atleast_2d(np.asarray(eq_lhs, dtype=float))
        b = np.asarray(eq_rhs, dtype=float)
        kern = _backend.get_kernels(backend)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise DimensionError(f"inconsistent LP dimensions: A {A.shape}, b {b.shape}, c {c.shape}")
    free = np.zeros(n, dtype=bool) if nonneg is None else ~np.asarray(nonneg, dtype=bool)
    if free.any():
        A = np.hstack([A, -A[:, free]])
        c = np.concatenate([c, -c[free]])
    res = _tableau_solve(A, b, c, kern, eps, feas_tol, max_iter, exact)
    if res.solution is not None and free.any():
        x = res.solution[:n].copy()
        x[free] = x[free] - res.solution[n:]
        res = LPResult(res.status, res.objective, x, res.iterations)
    return res


# --- membership ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MembershipCert:
    status: str
    weights: tuple
    residual: float
    reconstruction_error: float
    d: int
    reason: str = ""
    exact: bool = False
    exact_residual: object = field(default=None, repr=False)

    @property
    def member(self) -> bool:
        return self.status == MEMBER

    def to_dict(self) -> dict:
        out = {
            "member": self.member,
            "d": self.d,
            "residual": float(self.residual),
            "weights": [{"blocks": [list(b) for b in p.blocks], "alpha": float(a)}
                        for p, a in self.weights],
            "reconstruction_error": float(self.reconstruction_error),
        }
        if self.reason:
            out["reason"] = self.reason
        if self.exact:
            out["exact"] = True
            r = Fraction(self.exact_residual)
            out["exact_residual"] = {"num": r.numerator, "den": r.denominator}
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, obj) -> "MembershipCert":
        weights = obj.get("weights", [])
        d = obj.get("d")
        if d is None:
            if not weights:
                raise ValidationError("certificate needs 'd' or at least one weight")
            d = sum(len(b) for b in weights[0]["blocks"])
        parts = tuple((SetPartition(int(d), tuple(tuple(b) for b in w["blocks"])), float(w["alpha"]))
                      for w in weights)
        return cls(MEMBER if obj["member"] else NON_MEMBER, parts, float(obj["residual"]),
                   float(obj.get("reconstruction_error", 0.0)), int(d), obj.get("reason", ""))


def _as_corr(R) -> CorrMatrix:
    if isinstance(R, CorrMatrix):
        return R
    return CorrMatrix(np.asarray(R))


def _reconstruction_error(R, weights):
    if not weights:
        return float(np.max(np.abs(np.asarray(_upper_vector(R.entries), dtype=float)), initial=0.0))
    acc = np.zeros((R.d, R.d))
    for part, alpha in weights:
        acc += float(alpha) * clique_point(part)
    diff = np.abs(acc - R.entries.astype(float))
    return float(np.max(diff[np.triu_indices(R.d, 1)], initial=0.0))


def membership(R, tol: float = DEFAULT_TOL, *, exact: bool = False, cap: int = MEMBERSHIP_CAP,
               backend=None) -> MembershipCert:
    """Decide whether ``R`` is an invariant correlation matrix.

    Off-diagonal entries below ``-tol`` cause an immediate non-member verdict
    without solving the LP.  Otherwise the LP is solved and ``R`` is a member iff
    the optimum is at most ``tol``.  Member certificates carry the LP mixture
    weights above ``tol``, renormalized to sum to one.  The optimal weights are
    generally not unique; only the reconstruction is meaningful.

    ``exact=True`` (``d <= 5``) solves the LP over the rationals and classifies
    by an exactly zero optimum.
    """
    R = _as_corr(R)
    d = R.d
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if d > cap or (exact and d > EXACT_CAP):
        limit = EXACT_CAP if exact else cap
        raise DimensionError(f"dimension {d} exceeds the cap {limit}")
    if d == 1:
        part = SetPartition(1, ((1,),))
        return MembershipCert(MEMBER, ((part, 1.0),), 0.0, 0.0, 1)

    r = _upper_vector(R.entries)
    negative = [float(v) for v in r if v < 0]
    if min(negative, default=0.0) < -tol:
        residual = float(-sum(negative))
        return MembershipCert(NON_MEMBER, (), residual, _reconstruction_error(R, ()), d,
                              reason="negative entry fast-reject")

    system = assemble_vd(d, cap=max(cap, d))
    V = system.matrix
    nrow, ncol = V.shape
    A = np.hstack([V, np.eye(nrow, dtype=np.int8)])
    c = np.concatenate([np.zeros(ncol), np.ones(nrow)])
    if exact:
        rhs = [max(Fraction(v), Fraction(0)) for v in r] + [Fraction(1)]
        res = lp_solve(c.astype(int), A.astype(int), rhs, exact=True)
    else:
        rhs = np.array([max(float(v), 0.0) for v in r] + [1.0])
        res = lp_solve(c, A, rhs, backend=backend)
    if res.status != LP_OPTIMAL:
        raise RuntimeError(f"membership LP returned status {res.status!r}")

    alpha = res.solution[:ncol]
    if exact:
        residual_exact = res.objective
        residual = float(residual_exact)
        is_member = residual_exact == 0
        keep = [k for k in range(ncol) if alpha[k] > 0]
    else:
        residual_exact = None
        residual = max(float(res.objective), 0.0)
        is_member = residual <= tol
        keep = [k for k in range(ncol) if alpha[k] > tol]
    total = sum(alpha[k] for k in keep)
    weights = []
    for k in keep:
        a = alpha[k] / total if (is_member and total > 0) else alpha[k]
        weights.append((system.partition(k), float(a)))
    weights = tuple(weights)
    return MembershipCert(
        MEMBER if is_member else NON_MEMBER,
        weights,
        residual,
        _reconstruction_error(R, weights),
        d,
        reason="" if is_member else "LP optimum is positive",
        exact=exact,
        exact_residual=residual_exact,
    )


def reconstruct(weights) -> CorrMatrix:
    """Convex combination of clique points: ``sum alpha * clique_point(partition)``."""
    weights = list(weights)
    if not weights:
        raise WeightSumError("no weights given")
    alphas = [a for _, a in weights]
    if any(a < 0 for a in alphas) or abs(sum(alphas) - 1) > 1e-12:
        raise WeightSumError(f"weights must be nonnegative and sum to 1, got sum {sum(alphas)!r}")
    d = weights[0][0].d
    exact = all(isinstance(a, (Fraction, int)) for a in alphas)
    acc = np.zeros((d, d), dtype=object if exact else float)
    for part, alpha in weights:
        if part.d != d:
            raise DimensionError("all partitions must have the same d")
        acc = acc + alpha * clique_point(part).astype(object if exact else float)
    return CorrMatrix(acc)

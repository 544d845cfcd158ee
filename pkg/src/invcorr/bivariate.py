"""Exact algebra for bivariate laws with finite support.

A :class:`JointPMF` holds the probability matrix of ``(X, Y)`` on two sorted atom
grids.  Entries may be floats or ``fractions.Fraction``; with rational inputs
every check below runs in exact arithmetic.

When the supports of ``X`` and ``Y`` differ, checks that compare ``P`` with its
transpose first embed both marginals in the sorted union of the two atom sets,
padding with zeros.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import AdmissibilityError, ConstructionError, StructureError, ValidationError

STRUCT_TOL = 1e-12


def _is_exact(values) -> bool:
    return any(isinstance(v, Fraction) for v in np.ravel(np.asarray(values, dtype=object)))


def _to_array(values, exact):
    if exact:
        return np.array([[_frac(v) for v in row] for row in np.atleast_2d(np.asarray(values, dtype=object))],
                        dtype=object).reshape(np.shape(values))
    return np.asarray(values, dtype=float)


def _frac(v):
    if isinstance(v, str):
        return Fraction(v)
    return v if isinstance(v, (Fraction, int)) else Fraction(v)


def _exact_sqrt(x):
    """Square root of a nonnegative Fraction if it is rational, else None."""
    x = Fraction(x)
    n, d = x.numerator, x.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def _maxabs(a):
    a = np.asarray(a)
    if a.size == 0:
        return 0
    return max(abs(v) for v in a.ravel()) if a.dtype == object else float(np.max(np.abs(a)))


@dataclass(frozen=True, eq=False)
class JointPMF:
    """Finite bivariate law: ``P[i, j] = P(X = x_atoms[i], Y = y_atoms[j])``."""

    x_atoms: np.ndarray
    y_atoms: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        exact = _is_exact(self.P) or _is_exact(self.x_atoms) or _is_exact(self.y_atoms)
        x = _to_array(self.x_atoms, exact)
        y = _to_array(self.y_atoms, exact)
        P = _to_array(self.P, exact)
        problems = []
        if x.ndim != 1 or y.ndim != 1 or P.shape != (len(x), len(y)):
            raise ValidationError(
                f"P must have shape (len(x_atoms), len(y_atoms)), got {P.shape} for {len(x)}, {len(y)} atoms")
        if any(not (a < b) for a, b in zip(x[:-1], x[1:])):
            problems.append("x_atoms must be strictly increasing")
        if any(not (a < b) for a, b in zip(y[:-1], y[1:])):
            problems.append("y_atoms must be strictly increasing")
        if not exact:
            if not np.all(np.isfinite(P)):
                problems.append("probabilities must be finite")
            elif P.min(initial=0.0) < -1e-14:
                problems.append("probabilities must be nonnegative")
            else:
                P = np.where(P < 0, 0.0, P)
        elif any(v < 0 for v in P.ravel()):
            problems.append("probabilities must be nonnegative")
        if not problems:
            total = P.sum()
            if abs(total - 1) > STRUCT_TOL:
                problems.append(f"total mass must be 1 within 1e-12, got {total}")
            if any(not (v > 0) for v in P.sum(axis=1)):
                problems.append("every x atom needs positive mass")
            if any(not (v > 0) for v in P.sum(axis=0)):
                problems.append("every y atom needs positive mass")
        if problems:
            raise ValidationError(problems)
        for a in (x, y, P):
            a.setflags(write=False)
        object.__setattr__(self, "x_atoms", x)
        object.__setattr__(self, "y_atoms", y)
        object.__setattr__(self, "P", P)

    @property
    def exact(self) -> bool:
        return self.P.dtype == object

    @property
    def p(self) -> np.ndarray:
        return self.P.sum(axis=1)

    @property
    def q(self) -> np.ndarray:
        return self.P.sum(axis=0)

    @property
    def identical_marginals(self) -> bool:
        if len(self.x_atoms) != len(self.y_atoms) or any(a != b for a, b in zip(self.x_atoms, self.y_atoms)):
            return False
        return _maxabs(self.p - self.q) <= STRUCT_TOL

    def union_atoms(self) -> np.ndarray:
        merged = sorted(set(self.x_atoms.tolist()) | set(self.y_atoms.tolist()))
        return np.array(merged, dtype=object if self.exact else float)

    def on_union_grid(self):
        """Return ``(atoms, Pu)`` with both marginals embedded in the union grid."""
        atoms = self.union_atoms()
        index = {a: k for k, a in enumerate(atoms.tolist())}
        n = len(atoms)
        Pu = np.full((n, n), Fraction(0), dtype=object) if self.exact else np.zeros((n, n))
        rows = [index[a] for a in self.x_atoms.tolist()]
        cols = [index[a] for a in self.y_atoms.tolist()]
        Pu[np.ix_(rows, cols)] = self.P
        return atoms, Pu

    def to_dict(self) -> dict:
        def enc(v):
            if isinstance(v, Fraction):
                return str(v) if v.denominator != 1 else v.numerator
            return float(v)
        return {
            "x_atoms": [enc(v) for v in self.x_atoms],
            "y_atoms": [enc(v) for v in self.y_atoms],
            "P": [[enc(v) for v in row] for row in self.P],
        }

    @classmethod
    def from_dict(cls, obj) -> "JointPMF":
        """Parse the JSON form; string entries such as ``"1/9"`` are read as exact rationals."""
        def dec(v):
            return Fraction(v) if isinstance(v, str) else v
        P = [[dec(v) for v in row] for row in obj["P"]]
        x = [dec(v) for v in obj["x_atoms"]]
        y = [dec(v) for v in obj["y_atoms"]]
        if _is_exact(P) or _is_exact(x) or _is_exact(y):
            P = [[_frac(v) for v in row] for row in P]
            x = [_frac(v) for v in x]
            y = [_frac(v) for v in y]
        return cls(x, y, P)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class RBounds(NamedTuple):
    lower: object
    upper: object = 1


# --- correlations -------------------------------------------------------------


def _corr_from_values(P, vx, vy):
    p = P.sum(axis=1)
    q = P.sum(axis=0)
    mx = p @ vx
    my = q @ vy
    cx = vx - mx
    cy = vy - my
    cov = cx @ P @ cy
    var_x = p @ (cx * cx)
    var_y = q @ (cy * cy)
    if not (var_x > 0 and var_y > 0):
        raise AdmissibilityError("transformed variable is degenerate")
    if P.dtype == object:
        root = _exact_sqrt(var_x * var_y)
        if root is not None:
            return cov / root
        return float(cov) / math.sqrt(float(var_x) * float(var_y))
    return float(cov / math.sqrt(var_x * var_y))


def correlation(pmf: JointPMF):
    """Pearson correlation of ``(X, Y)``.

    Exact (a ``Fraction``) when the law is rational and the variance product is
    a rational square, e.g. whenever the marginals are identical.
    """
    if len(pmf.x_atoms) < 2 or len(pmf.y_atoms) < 2:
        raise AdmissibilityError("both marginals must have at least two atoms")
    return _corr_from_values(pmf.P, pmf.x_atoms, pmf.y_atoms)


def _g_values(g, atoms, exact):
    if callable(g):
        vals = [g(a) for a in atoms]
    elif isinstance(g, dict):
        try:
            vals = [g[a] for a in atoms]
        except KeyError as exc:
            raise AdmissibilityError(f"transform has no value for atom {exc.args[0]!r}") from None
    else:
        raise TypeError("g must be a mapping from atoms to reals or a callable")
    if exact and all(isinstance(v, (int, Fraction)) for v in vals):
        return np.array([Fraction(v) for v in vals], dtype=object)
    return np.array([float(v) for v in vals])


def transform_correlation(pmf: JointPMF, g) -> float:
    """``Corr(g(X), g(Y))`` computed exactly from ``P``.

    ``g`` is a mapping from each atom of the union of both supports to a real,
    or a callable.  Raises :class:`AdmissibilityError` if ``g`` is constant on
    the support of ``X`` or of ``Y``.
    """
    gx = _g_values(g, pmf.x_atoms.tolist(), pmf.exact)
    gy = _g_values(g, pmf.y_atoms.tolist(), pmf.exact)
    if len(set(gx.tolist())) < 2:
        raise AdmissibilityError("g is constant on the support of X")
    if len(set(gy.tolist())) < 2:
        raise AdmissibilityError("g is constant on the support of Y")
    P = pmf.P
    if P.dtype == object and gx.dtype != object:
        P = P.astype(float)
    return _corr_from_values(P, gx, gy)


def random_transform_values(n, rng, monotone=False):
    """i.i.d. standard-normal values for ``n`` atoms, redrawn until non-constant.

    With ``monotone=True`` the values are sorted, giving a nondecreasing map.
    """
    while True:
        v = rng.standard_normal(n)
        if n < 2 or np.ptp(v) > 0:
            break
    return np.sort(v) if monotone else v


# --- structural checks -------------------------------------------------------


def quasi_independence_residual(pmf: JointPMF):
    """Max-abs residual of ``P + P' = p q' + q p'`` on the union grid."""
    _, Pu = pmf.on_union_grid()
    p = Pu.sum(axis=1)
    q = Pu.sum(axis=0)
    return _maxabs(Pu + Pu.T - np.outer(p, q) - np.outer(q, p))


def is_quasi_independent(pmf: JointPMF, tol: float = STRUCT_TOL) -> bool:
    return quasi_independence_residual(pmf) <= tol


def is_independent(pmf: JointPMF, tol: float = STRUCT_TOL) -> bool:
    return _maxabs(pmf.P - np.outer(pmf.p, pmf.q)) <= tol


def r_bounds(p) -> RBounds:
    """Admissible range ``[lower, 1]`` of an invariant correlation for marginal ``p``."""
    exact = _is_exact(p)
    p = [(_frac(v) if exact else float(v)) for v in p]
    n = len(p)
    problems = []
    if n < 2:
        problems.append("need at least two atoms")
    if any(not (v > 0) for v in p):
        problems.append("probabilities must be strictly positive")
    if abs(sum(p) - 1) > STRUCT_TOL:
        problems.append("probabilities must sum to 1")
    if problems:
        raise ValidationError(problems)
    one = Fraction(1) if exact else 1.0
    first = max(-v / (one - v) for v in p)
    second = max(one - one / (p[i] * p[j]) for i in range(n) for j in range(n) if i != j)
    return RBounds(max(first, second), 1)


def _frechet_parts(pmf):
    p = pmf.p
    sym = (pmf.P + pmf.P.T) / 2
    pp = np.outer(p, p)
    return sym - pp, np.diag(p) - pp


def quasi_frechet_fit(pmf: JointPMF, tol: float = STRUCT_TOL):
    """Fit ``(P + P')/2 = r D + (1 - r) p p'`` by least squares over all entries.

    Returns ``r`` when the Frobenius residual is at most ``tol`` and ``r`` lies in
    :func:`r_bounds`; otherwise ``None``.  Requires identical marginals.
    """
    if not pmf.identical_marginals:
        raise StructureError("quasi-Frechet fit requires identical marginals")
    A, B = _frechet_parts(pmf)
    r = (A * B).sum() / (B * B).sum()
    resid = A - r * B
    sq = (resid * resid).sum()
    if sq > tol * tol:
        return None
    lower = r_bounds(pmf.p).lower
    if r < lower - tol or r > 1 + tol:
        return None
    return r if pmf.exact else float(r)


def is_quasi_frechet(pmf: JointPMF, r, tol: float = STRUCT_TOL) -> bool:
    A, B = _frechet_parts(pmf)
    return _maxabs(A - r * B) <= tol


def random_rearrangement(pmf: JointPMF) -> JointPMF:
    """Equal mixture of ``(X, Y)`` and ``(Y, X)``: ``(P + P')/2`` on the union grid."""
    atoms, Pu = pmf.on_union_grid()
    return JointPMF(atoms, atoms, (Pu + Pu.T) / 2)


def pushforward(pmf: JointPMF, h) -> JointPMF:
    """Law of ``(h(X), h(Y))``; atoms with equal images are merged."""
    hx = [h(a) for a in pmf.x_atoms.tolist()]
    hy = [h(a) for a in pmf.y_atoms.tolist()]
    nx = sorted(set(hx))
    ny = sorted(set(hy))
    ix = {v: k for k, v in enumerate(nx)}
    iy = {v: k for k, v in enumerate(ny)}
    Q = np.full((len(nx), len(ny)), Fraction(0), dtype=object) if pmf.exact else np.zeros((len(nx), len(ny)))
    for i, a in enumerate(hx):
        for j, b in enumerate(hy):
            Q[ix[a], iy[b]] += pmf.P[i, j]
    return JointPMF(nx, ny, Q)


def quasi_independence_cdf_gap(pmf: JointPMF):
    """Max over union-grid points of ``|(H(x,y)+H(y,x))/2 - (F(x)G(y)+F(y)G(x))/2|``."""
    _, Pu = pmf.on_union_grid()
    H = np.cumsum(np.cumsum(Pu, axis=0), axis=1)
    F = np.cumsum(Pu.sum(axis=1))
    G = np.cumsum(Pu.sum(axis=0))
    return _maxabs((H + H.T) / 2 - (np.outer(F, G) + np.outer(G, F)) / 2)


def quasi_independence_event_gap(pmf: JointPMF):
    """Max over all pairs of atom subsets (A, B) of the event-identity residual.

    Exhaustive over ``2^n x 2^n`` subsets of the union grid; intended for small grids.
    """
    _, Pu = pmf.on_union_grid()
    n = Pu.shape[0]
    subsets = ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1)
    if pmf.exact:
        subsets = subsets.astype(object)
    M = subsets @ Pu @ subsets.T
    a = subsets @ Pu.sum(axis=1)
    b = subsets @ Pu.sum(axis=0)
    return _maxabs(M + M.T - np.outer(a, b) - np.outer(b, a))


# --- constructors ---------------------------------------------------------------


def _check_remainder(S, n, exact):
    if S.shape != (n, n):
        raise ConstructionError(f"S must be {n}x{n}, got {S.shape}")
    if _maxabs(S + S.T) > STRUCT_TOL:
        raise ConstructionError("S must be antisymmetric")
    if _maxabs(S.sum(axis=1)) > STRUCT_TOL:
        raise ConstructionError("row sums of S must be zero")
    if _maxabs(S.sum(axis=0)) > STRUCT_TOL:
        raise ConstructionError("column sums of S must be zero")


def _check_prob_vector(v, name):
    if any(x < 0 for x in v):
        raise ConstructionError(f"{name} must be nonnegative")
    if abs(sum(v) - 1) > STRUCT_TOL:
        raise ConstructionError(f"{name} must sum to 1")


def _build(atoms, P, exact):
    if exact:
        negative = [v for v in P.ravel() if v < 0]
    else:
        negative = [v for v in P.ravel() if v < -1e-14]
        P = np.where(P < 0, 0.0, P)
    if negative:
        raise ConstructionError(f"resulting matrix has a negative entry ({min(negative)})")
    p = P.sum(axis=1)
    q = P.sum(axis=0)
    rows = [k for k in range(len(p)) if p[k] > 0]
    cols = [k for k in range(len(q)) if q[k] > 0]
    return JointPMF([atoms[k] for k in rows], [atoms[k] for k in cols], P[np.ix_(rows, cols)])


def make_quasi_independent(p, q, S, atoms=None) -> JointPMF:
    """``P = p q' + S`` on a common grid of ``n`` atoms (default ``1..n``).

    ``S`` must be antisymmetric with zero row and column sums, and ``p q' + S``
    entrywise nonnegative.  Atoms where ``p`` (or ``q``) vanishes are dropped from
    the support of ``X`` (or ``Y``).
    """
    exact = _is_exact(p) or _is_exact(q) or _is_exact(S)
    p = _to_array(list(p), exact)
    q = _to_array(list(q), exact)
    S = _to_array(S, exact)
    n = len(p)
    if len(q) != n:
        raise ConstructionError("p and q must live on a common grid")
    _check_prob_vector(p, "p")
    _check_prob_vector(q, "q")
    _check_remainder(S, n, exact)
    atoms = list(range(1, n + 1)) if atoms is None else list(atoms)
    return _build(atoms, np.outer(p, q) + S, exact)


def make_quasi_frechet(p, r, S=None, atoms=None) -> JointPMF:
    """``P = r D + (1 - r) p p' + S`` with identical marginal ``p``.

    ``S = 0`` gives the exchangeable r-Frechet law.
    """
    exact = _is_exact(p) or isinstance(r, Fraction) or (S is not None and _is_exact(S))
    p = _to_array(list(p), exact)
    n = len(p)
    _check_prob_vector(p, "p")
    if S is None:
        S = np.full((n, n), Fraction(0), dtype=object) if exact else np.zeros((n, n))
    S = _to_array(S, exact)
    _check_remainder(S, n, exact)
    bounds = r_bounds(p)
    if r < bounds.lower - STRUCT_TOL or r > 1 + STRUCT_TOL:
        raise ConstructionError(f"r={r} outside the admissible range [{bounds.lower}, 1]")
    one = Fraction(1) if exact else 1.0
    P = r * np.diag(p) + (one - r) * np.outer(p, p) + S
    if exact:
        P = np.array(P, dtype=object)
    atoms = list(range(1, n + 1)) if atoms is None else list(atoms)
    return _build(atoms, P, exact)


def independent(p, q, x_atoms=None, y_atoms=None) -> JointPMF:
    exact = _is_exact(p) or _is_exact(q)
    p = _to_array(list(p), exact)
    q = _to_array(list(q), exact)
    x_atoms = list(range(1, len(p) + 1)) if x_atoms is None else x_atoms
    y_atoms = list(range(1, len(q) + 1)) if y_atoms is None else y_atoms
    return JointPMF(x_atoms, y_atoms, np.outer(p, q))


def cyclic_remainder(eps, n=3):
    """Antisymmetric ``S`` with ``s_12 = s_23 = ... = s_n1 = eps`` and zero row sums."""
    exact = isinstance(eps, Fraction)
    S = np.full((n, n), Fraction(0), dtype=object) if exact else np.zeros((n, n))
    for i in range(n):
        j = (i + 1) % n
        S[i, j] += eps
        S[j, i] -= eps
    return S

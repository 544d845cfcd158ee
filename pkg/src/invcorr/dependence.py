"""Dependence concepts on finite models: quadrant dependence, regression dependence,
the FGM conditional-probability evaluator and empirical tail dependence."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bivariate import JointPMF
from .errors import CapacityError, ValidationError
from .models import GammaModel

DEFAULT_CELL_CAP = 4096
DEFAULT_UPSET_CAP = 200_000


def _maybe_exact(a):
    return a.dtype == object


# --- quadrant dependence ----------------------------------------------------------


def quadrant_gaps(pmf: JointPMF) -> np.ndarray:
    """``P(X<=x, Y<=y) - P(X<=x) P(Y<=y)`` on the atom grid."""
    H = np.cumsum(np.cumsum(pmf.P, axis=0), axis=1)
    F = np.cumsum(pmf.p)
    G = np.cumsum(pmf.q)
    return H - np.outer(F, G)


def is_pqd(pmf: JointPMF, tol: float | None = None) -> bool:
    """Positive quadrant dependence at every grid point.

    Rational inputs are compared exactly (``tol`` defaults to 0 for them and to
    1e-12 otherwise).
    """
    if tol is None:
        tol = 0 if pmf.exact else 1e-12
    return bool(all(g >= -tol for g in quadrant_gaps(pmf).ravel()))


def is_nqd(pmf: JointPMF, tol: float | None = None) -> bool:
    if tol is None:
        tol = 0 if pmf.exact else 1e-12
    return bool(all(g <= tol for g in quadrant_gaps(pmf).ravel()))


# --- grid laws ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridPMF:
    """Probability table over the product of per-coordinate atom lists."""

    d: int
    levels: tuple
    probs: np.ndarray

    def __post_init__(self):
        levels = tuple(tuple(lv) for lv in self.levels)
        probs = np.asarray(self.probs)
        exact = probs.dtype == object
        if not exact:
            probs = probs.astype(float)
        problems = []
        if len(levels) != self.d:
            problems.append(f"need {self.d} level lists, got {len(levels)}")
        elif probs.shape != tuple(len(lv) for lv in levels):
            problems.append(f"probs shape {probs.shape} does not match the level grid")
        for k, lv in enumerate(levels):
            if any(not (a < b) for a, b in zip(lv[:-1], lv[1:])):
                problems.append(f"levels of coordinate {k + 1} must be strictly increasing")
        if problems:
            raise ValidationError(problems)
        if any(v < 0 for v in probs.ravel()):
            problems.append("probabilities must be nonnegative")
        total = probs.sum()
        if abs(total - 1) > 1e-12:
            problems.append(f"total mass must be 1, got {total}")
        for k in range(self.d):
            marg = self.marginal_of(probs, k)
            if any(not (v > 0) for v in marg):
                problems.append(f"every atom of coordinate {k + 1} needs positive mass")
        if problems:
            raise ValidationError(problems)
        probs.setflags(write=False)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "probs", probs)

    @staticmethod
    def marginal_of(probs, k):
        axes = tuple(a for a in range(probs.ndim) if a != k)
        return probs.sum(axis=axes) if axes else probs

    @property
    def exact(self) -> bool:
        return _maybe_exact(self.probs)

    @property
    def n_cells(self) -> int:
        return int(self.probs.size)

    @classmethod
    def from_joint(cls, pmf: JointPMF) -> "GridPMF":
        return cls(2, (tuple(pmf.x_atoms.tolist()), tuple(pmf.y_atoms.tolist())), pmf.P.copy())

    def to_joint(self) -> JointPMF:
        if self.d != 2:
            raise ValidationError("only bivariate grids convert to JointPMF")
        return JointPMF(list(self.levels[0]), list(self.levels[1]), self.probs.copy())


def independent_grid(marginals, levels=None) -> GridPMF:
    marginals = [list(m) for m in marginals]
    exact = any(isinstance(v, Fraction) for m in marginals for v in m)
    probs = np.array(1 if not exact else Fraction(1), dtype=object if exact else float)
    for m in marginals:
        probs = np.multiply.outer(probs, np.array(m, dtype=object if exact else float))
    if levels is None:
        levels = [list(range(1, len(m) + 1)) for m in marginals]
    return GridPMF(len(marginals), tuple(levels), probs)


def discrete_gamma_grid(model: GammaModel, n_levels: int) -> GridPMF:
    """Exact law of ``ceil(n X) / n`` for ``X = Gamma U``, on levels ``{1..n}/n``.

    Each block of a partition lands on one of ``n`` levels with probability ``1/n``,
    independently across blocks.
    """
    d, n = model.d, int(n_levels)
    if n < 1:
        raise ValidationError("n_levels must be positive")
    probs = np.full((n,) * d, Fraction(0), dtype=object)
    for part, w in model.components:
        w = w if isinstance(w, (int, Fraction)) else Fraction(w)
        lab = part.labels()
        cell_w = w * Fraction(1, n ** part.k)
        for assign in itertools.product(range(n), repeat=part.k):
            probs[tuple(assign[b] for b in lab)] += cell_w
    levels = tuple(tuple(Fraction(j, n) for j in range(1, n + 1)) for _ in range(d))
    return GridPMF(d, levels, probs)


# --- increasing sets --------------------------------------------------------------


def _upper_covers(shape):
    cells = list(itertools.product(*(range(s) for s in shape)))
    index = {c: k for k, c in enumerate(cells)}
    covers = []
    for c in cells:
        ups = []
        for ax in range(len(shape)):
            if c[ax] + 1 < shape[ax]:
                nxt = c[:ax] + (c[ax] + 1,) + c[ax + 1:]
                ups.append(index[nxt])
        covers.append(ups)
    return cells, covers


def enumerate_upsets(shape, max_upsets: int = DEFAULT_UPSET_CAP) -> list:
    """All up-sets of the product-order grid of the given shape, as bitmasks over cells.

    Cells are numbered in C order.  Cells are decided from the top down; a cell may
    join only when all its upper covers have joined, so every branch is valid.
    Includes the empty set and the full grid.
    """
    cells, covers = _upper_covers(tuple(shape))
    order = list(range(len(cells)))[::-1]
    out = []
    stack = [(0, 0)]
    while stack:
        pos, mask = stack.pop()
        if pos == len(order):
            out.append(mask)
            if len(out) > max_upsets:
                raise CapacityError(
                    f"more than {max_upsets} increasing sets; use is_prd_sampled instead")
            continue
        c = order[pos]
        if all(mask >> u & 1 for u in covers[c]):
            stack.append((pos + 1, mask | (1 << c)))
        stack.append((pos + 1, mask))
    return out


def _mask_rows(masks, n_cells):
    bits = np.array([[(m >> c) & 1 for c in range(n_cells)] for m in masks], dtype=np.int8)
    return bits.reshape(len(masks), n_cells)


def _upclosure(shape, seeds):
    grid = np.zeros(shape, dtype=bool)
    for s in seeds:
        grid[tuple(slice(v, None) for v in s)] = True
    return grid.ravel()


# --- regression dependence -------------------------------------------------------------


@dataclass
class PRDResult:
    holds: bool
    conditioning: str
    subset: tuple
    n_upsets: int
    exhaustive: bool = True
    witness: dict | None = None

    def to_dict(self) -> dict:
        out = {"holds": self.holds, "conditioning": self.conditioning,
               "subset": [i + 1 for i in self.subset], "n_upsets": self.n_upsets,
               "exhaustive": self.exhaustive}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def _num(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else v.numerator
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def _scan(pmf, bits, subset, conditioning, tol):
    exact = pmf.exact
    flat = pmf.probs.ravel()
    cells = list(itertools.product(*(range(len(lv)) for lv in pmf.levels)))
    coords = np.array(cells, dtype=np.int64).reshape(len(cells), pmf.d)
    if exact:
        bits = bits.astype(object)
        tol = 0 if tol is None else tol
    else:
        bits = bits.astype(float)
        tol = 1e-12 if tol is None else tol
    for i in subset:
        L = len(pmf.levels[i])
        K = np.zeros((len(cells), L), dtype=object if exact else float)
        if exact:
            K[:] = Fraction(0)
        K[np.arange(len(cells)), coords[:, i]] = flat
        mass = bits @ K
        marg = K.sum(axis=0)
        if conditioning == "less_equal":
            mass = np.cumsum(mass, axis=1)
            marg = np.cumsum(marg)
        cond = mass / marg
        drop = cond[:, :-1] - cond[:, 1:]
        bad = np.argwhere(drop > tol)
        if bad.size:
            a, k = bad[0]
            upset = [[_num(pmf.levels[ax][c]) for ax, c in enumerate(cells[j])]
                     for j in np.flatnonzero(bits[a] != 0)]
            return {"index": int(i) + 1, "upset": upset,
                    "x": _num(pmf.levels[i][k]), "x_prime": _num(pmf.levels[i][k + 1]),
                    "p_x": _num(cond[a, k]), "p_x_prime": _num(cond[a, k + 1])}
    return None


def _prep(pmf, subset, conditioning):
    if conditioning not in ("equal", "less_equal"):
        raise ValidationError("conditioning must be 'equal' or 'less_equal'")
    subset = tuple(range(pmf.d)) if subset is None else tuple(int(i) - 1 for i in subset)
    if any(not 0 <= i < pmf.d for i in subset):
        raise ValidationError(f"subset indices must lie in 1..{pmf.d}")
    return subset


def is_prd(pmf: GridPMF, subset=None, conditioning: str = "equal",
           cap: int = DEFAULT_CELL_CAP, max_upsets: int = DEFAULT_UPSET_CAP,
           tol: float | None = None) -> PRDResult:
    """Exhaustive regression-dependence check over every increasing set of the grid.

    ``subset`` holds 1-based coordinate indices (default: all).  With
    ``conditioning="equal"`` the event is ``{X_i = x}``; with ``"less_equal"`` it is
    ``{X_i <= x}``.  On failure the witness names the first violating
    ``(index, upset, x, x_prime)``.
    """
    subset = _prep(pmf, subset, conditioning)
    if pmf.n_cells > cap:
        raise CapacityError(
            f"grid has {pmf.n_cells} cells, above the cap {cap}; use is_prd_sampled instead")
    masks = enumerate_upsets(pmf.probs.shape, max_upsets)
    masks = [m for m in masks if m and m != (1 << pmf.n_cells) - 1]
    bits = _mask_rows(masks, pmf.n_cells) if masks else np.zeros((0, pmf.n_cells), np.int8)
    witness = _scan(pmf, bits, subset, conditioning, tol) if masks else None
    return PRDResult(witness is None, conditioning, subset, len(masks), True, witness)


def is_prd_sampled(pmf: GridPMF, n_sets: int, seed, subset=None,
                   conditioning: str = "equal", tol: float | None = None) -> PRDResult:
    """Randomized check over up-closures of random cell sets; a pass is not a proof."""
    subset = _prep(pmf, subset, conditioning)
    rng = np.random.default_rng(seed)
    shape = pmf.probs.shape
    rows = []
    for _ in range(n_sets):
        k = int(rng.integers(1, 4))
        seeds = [tuple(int(rng.integers(0, s)) for s in shape) for _ in range(k)]
        rows.append(_upclosure(shape, seeds))
    bits = np.array(rows, dtype=np.int8).reshape(n_sets, pmf.n_cells)
    witness = _scan(pmf, bits, subset, conditioning, tol)
    return PRDResult(witness is None, conditioning, subset, n_sets, False, witness)


# --- FGM copula ---------------------------------------------------------------------


def fgm_copula_cdf(u, theta):
    """``prod(u) + theta prod(u) prod(1 - u)``."""
    if not -1 <= theta <= 1:
        raise ValidationError(f"theta must lie in [-1, 1], got {theta}")
    u = np.asarray(u, dtype=float)
    base = np.prod(u, axis=-1)
    return base + theta * base * np.prod(1 - u, axis=-1)


def fgm_conditional_probability(s, t2, t3, theta):
    """``P(U > (0, t2, t3) | U_1 <= s)`` for the trivariate FGM copula."""
    if not 0 < s <= 1:
        raise ValidationError("s must lie in (0, 1]")
    return 1 - t2 - t3 + fgm_copula_cdf([s, t2, t3], theta) / s


def fgm_conditional_derivative_quotient(s, t2, t3, theta):
    """``(s d1C - C) / s^2`` with ``d1C`` the partial derivative in the first argument."""
    C = fgm_copula_cdf([s, t2, t3], theta)
    d1C = t2 * t3 * (1 + theta * (1 - 2 * s) * (1 - t2) * (1 - t3))
    return (s * d1C - C) / s ** 2


def fgm_conditional_derivative(theta, t2, t3):
    """Derivative of :func:`fgm_conditional_probability` in ``s``; constant in ``s``."""
    if not -1 <= theta <= 1:
        raise ValidationError(f"theta must lie in [-1, 1], got {theta}")
    if not (0 <= t2 <= 1 and 0 <= t3 <= 1):
        raise ValidationError("t2 and t3 must lie in [0, 1]")
    return -theta * t2 * t3 * (1 - t2) * (1 - t3)


# --- tail dependence ---------------------------------------------------------------


@dataclass
class TailEstimate:
    lam: float
    se: float
    n_tail: int
    count: int
    u: float
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "se": self.se, "n_tail": self.n_tail,
                "count": self.count, "u": self.u, "warnings": list(self.warnings)}


def tail_dependence_estimate(samples, u: float) -> TailEstimate:
    """Empirical lower-tail coefficient ``P(X <= u, Y <= u) / u`` on uniform margins.

    The standard error is the binomial one, ``sqrt(p(1-p)/n) / u``.  A warning is
    attached (and emitted) when ``u * count < 100``.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ValidationError("samples must be an (n, 2) array")
    if not 0 < u < 1:
        raise ValidationError("u must lie in (0, 1)")
    n = x.shape[0]
    hits = int(np.count_nonzero((x[:, 0] <= u) & (x[:, 1] <= u)))
    p = hits / n
    notes = []
    if u * n < 100:
        notes.append(f"unstable: u * count = {u * n:.1f} < 100")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    return TailEstimate(p / u, math.sqrt(p * (1 - p) / n) / u, hits, n, u, notes)

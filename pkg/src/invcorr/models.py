"""Constructive models with invariant correlation and their samplers.

Random streams
--------------
Every sampler draws from a Philox counter-based generator keyed by the seed.
Row ``i`` of the output consumes a fixed-width slice of the stream starting at
counter ``i * width / 4``, so a row's values depend only on ``(seed, i)`` and
not on how rows are batched.  Uniforms are mapped to ``(0, 1]`` so that
grid maps such as ``ceil(n x) / n`` never produce 0.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bivariate import JointPMF, correlation
from .errors import ConstructionError, StructureError, ValidationError
from .partitions import SetPartition, clique_point
from .polytope import CorrMatrix, MembershipCert

WEIGHT_TOL = 1e-12
CHUNK_ROWS = 65536


# --- random streams ------------------------------------------------------------


def _philox_key(seed) -> np.ndarray:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValidationError(f"seed must be an integer, got {seed!r}")
    return np.random.SeedSequence(int(seed)).generate_state(2, np.uint64)


def _row_width(draws_per_row: int) -> int:
    return 4 * math.ceil(draws_per_row / 4)


def row_uniforms(seed, start: int, count: int, draws_per_row: int) -> np.ndarray:
    """Uniforms on ``(0, 1]`` for rows ``start .. start+count-1``.

    Returns a ``count x draws_per_row`` array; row ``i`` is a deterministic
    function of ``(seed, start + i)``.
    """
    width = _row_width(draws_per_row)
    bg = np.random.Philox(key=_philox_key(seed))
    bg.advance(start * width // 4)
    u = np.random.Generator(bg).random((count, width))
    return 1.0 - u[:, :draws_per_row]


def _chunks(count):
    if count < 1:
        raise ValidationError(f"count must be at least 1, got {count}")
    for start in range(0, count, CHUNK_ROWS):
        yield start, min(CHUNK_ROWS, count - start)


# --- the Gamma U model ---------------------------------------------------------


@dataclass(frozen=True)
class GammaModel:
    """Law of the categorical matrix as a weighted list of set partitions of ``{1..d}``."""

    d: int
    components: tuple

    def __post_init__(self):
        comps = tuple((p, w) for p, w in self.components)
        problems = []
        if self.d < 1:
            problems.append("d must be positive")
        if not comps:
            problems.append("at least one component is required")
        for part, w in comps:
            if not isinstance(part, SetPartition) or part.d != self.d:
                problems.append(f"partition {part} does not partition {{1..{self.d}}}")
            if w < 0:
                problems.append(f"negative weight {w}")
        if comps and abs(sum(w for _, w in comps) - 1) > WEIGHT_TOL:
            problems.append(f"weights must sum to 1, got {sum(w for _, w in comps)}")
        if problems:
            raise ValidationError(problems)
        object.__setattr__(self, "components", comps)

    @property
    def partitions(self):
        return [p for p, _ in self.components]

    @property
    def weights(self) -> np.ndarray:
        return np.array([float(w) for _, w in self.components])

    def to_dict(self) -> dict:
        def enc(w):
            return str(w) if isinstance(w, Fraction) else float(w)
        return {"d": self.d,
                "weights": [{"blocks": [list(b) for b in p.blocks], "alpha": enc(w)}
                            for p, w in self.components]}

    @classmethod
    def from_dict(cls, obj) -> "GammaModel":
        """Parse model JSON; a member certificate is accepted as well."""
        if "member" in obj and not obj["member"]:
            raise StructureError("cannot build a model from a non-member certificate")
        d = int(obj["d"])
        comps = []
        for item in obj["weights"]:
            w = item["alpha"]
            w = Fraction(w) if isinstance(w, str) else w
            comps.append((SetPartition(d, tuple(tuple(b) for b in item["blocks"])), w))
        if "member" in obj:
            total = sum(w for _, w in comps)
            comps = [(p, w / total) for p, w in comps]
        return cls(d, tuple(comps))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def expected_corr(model: GammaModel) -> CorrMatrix:
    """``E[Gamma Gamma']``: the weighted sum of clique partition points."""
    exact = all(isinstance(w, (int, Fraction)) for _, w in model.components)
    if exact:
        R = np.full((model.d, model.d), Fraction(0), dtype=object)
        for part, w in model.components:
            R = R + clique_point(part).astype(object) * Fraction(w)
        R = R.astype(float)
    else:
        R = np.zeros((model.d, model.d))
        for part, w in model.components:
            R += float(w) * clique_point(part)
    np.fill_diagonal(R, 1.0)
    return CorrMatrix(np.clip(R, 0.0, 1.0))


def sample_gamma_model(model: GammaModel, count: int, seed) -> np.ndarray:
    """Draw ``count`` rows of ``X = Gamma U``.

    Per row: pick a partition by weight, draw one uniform per block and give each
    coordinate its block's uniform.  Coordinates sharing a block are bit-identical.
    """
    d = model.d
    labels = np.array([p.labels() for p in model.partitions])
    cum = np.cumsum(model.weights)
    cum /= cum[-1]
    out = np.empty((count, d))
    for start, n in _chunks(count):
        u = row_uniforms(seed, start, n, d + 1)
        choice = np.minimum(np.searchsorted(cum, 1.0 - u[:, 0], side="right"), len(cum) - 1)
        cols = labels[choice] + 1
        out[start:start + n] = np.take_along_axis(u, cols, axis=1)
    return out


def model_from_membership(cert: MembershipCert) -> GammaModel:
    if not cert.member:
        raise StructureError("certificate is not a membership certificate")
    total = sum(w for _, w in cert.weights)
    return GammaModel(cert.d, tuple((p, w / total) for p, w in cert.weights))


def positive_frechet_model(r, d: int = 2) -> GammaModel:
    """Weight ``r`` on the full partition, ``1 - r`` on singletons."""
    if not 0 <= r <= 1:
        raise ValidationError(f"r must lie in [0, 1], got {r}")
    full = SetPartition(d, (tuple(range(1, d + 1)),))
    single = SetPartition(d, tuple((i,) for i in range(1, d + 1)))
    if d == 1:
        return GammaModel(1, ((full, 1),))
    return GammaModel(d, ((full, r), (single, 1 - r)))


def _merge(d, items):
    acc = {}
    for part, w in items:
        acc[part] = acc.get(part, 0) + w
    return GammaModel(d, tuple((p, w) for p, w in acc.items() if w > 0))


def markov_gamma_model(stay_probs) -> GammaModel:
    """Interval-partition law of the stay/jump chain; weight is the product of step probabilities."""
    stay = list(stay_probs)
    d = len(stay) + 1
    items = []
    for pattern in itertools.product((True, False), repeat=d - 1):
        w = 1
        for s, keep in zip(stay, pattern):
            w = w * (s if keep else 1 - s)
        if w == 0:
            continue
        blocks, cur = [], [1]
        for i, keep in enumerate(pattern, start=2):
            if keep:
                cur.append(i)
            else:
                blocks.append(tuple(cur))
                cur = [i]
        blocks.append(tuple(cur))
        items.append((SetPartition(d, tuple(blocks)), w))
    return _merge(d, items)


def sample_markov_model(stay_probs, count: int, seed):
    """Sample the chain ``X_1 = Y_1``, ``X_i = X_{i-1}`` w.p. ``p_{i-1}`` else ``Y_i``.

    Returns ``(samples, model)`` where ``model`` is the exact :class:`GammaModel`.
    """
    stay = np.asarray(stay_probs, dtype=float)
    if stay.ndim != 1 or stay.size < 1:
        raise ValidationError("need at least one stay probability (d >= 2)")
    if np.any((stay < 0) | (stay > 1)) or not np.all(np.isfinite(stay)):
        raise ValidationError("stay probabilities must lie in [0, 1]")
    d = stay.size + 1
    out = np.empty((count, d))
    for start, n in _chunks(count):
        u = row_uniforms(seed, start, n, 2 * d - 1)
        fresh = u[:, :d]
        coins = u[:, d:]
        x = fresh[:, 0].copy()
        out[start:start + n, 0] = x
        for i in range(1, d):
            keep = coins[:, i - 1] <= stay[i - 1]
            x = np.where(keep, x, fresh[:, i])
            out[start:start + n, i] = x
    return out, markov_gamma_model(list(stay_probs))


def shared_column_model(probs) -> GammaModel:
    """Model where coordinate ``i`` joins a common block independently with probability ``probs[i]``.

    Coordinates not joining stay in singleton blocks, so
    ``expected_corr[i, j] = probs[i] * probs[j]``.
    """
    probs = list(probs)
    d = len(probs)
    if any(not 0 <= p <= 1 for p in probs):
        raise ValidationError("probabilities must lie in [0, 1]")
    items = []
    for pattern in itertools.product((1, 0), repeat=d):
        w = 1
        for p, z in zip(probs, pattern):
            w = w * (p if z else 1 - p)
        if w == 0:
            continue
        shared = tuple(i + 1 for i, z in enumerate(pattern) if z)
        rest = tuple((i + 1,) for i, z in enumerate(pattern) if not z)
        items.append((SetPartition(d, ((shared,) if shared else ()) + rest), w))
    return _merge(d, items)


# --- Frechet-family copulas -------------------------------------------------------


def frechet_copula_cdf(u, v, r, s=0.0):
    """``r min(u,v) + s max(u+v-1, 0) + (1-r-s) u v``."""
    if r < 0 or s < 0 or r + s > 1 + WEIGHT_TOL:
        raise ValidationError(f"need r, s >= 0 and r + s <= 1, got r={r}, s={s}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any((u < 0) | (u > 1) | (v < 0) | (v > 1)):
        raise ValidationError("copula arguments must lie in [0, 1]")
    out = r * np.minimum(u, v) + s * np.maximum(u + v - 1, 0.0) + (1 - r - s) * u * v
    return float(out) if out.ndim == 0 else out


def r_frechet_cdf(x, y, F, r):
    """Joint CDF ``r min(F(x),F(y)) + (1-r) F(x) F(y)``."""
    if not 0 <= r <= 1:
        raise ValidationError(f"r must lie in [0, 1], got {r}")
    a, b = F(x), F(y)
    return r * min(a, b) + (1 - r) * a * b


def _check_checkerboard(P3, tol=1e-12):
    P3 = np.asarray(P3, dtype=float)
    problems = []
    if P3.shape != (3, 3):
        raise ConstructionError(f"P3 must be 3x3, got {P3.shape}")
    if np.any(P3 < 0):
        problems.append("entries must be nonnegative")
    if np.max(np.abs(P3.sum(axis=1) - 1 / 3)) > tol:
        problems.append("row sums must be 1/3")
    if np.max(np.abs(P3.sum(axis=0) - 1 / 3)) > tol:
        problems.append("column sums must be 1/3")
    if np.max(np.abs((P3 + P3.T) / 2 - 1 / 9)) > tol:
        problems.append("(P3 + P3')/2 must equal ones/9")
    if problems:
        raise ConstructionError("; ".join(problems))
    return P3


def sample_checkerboard_quasi_frechet(P3, r, count: int, seed) -> np.ndarray:
    """Sample ``C = r M + (1-r) C_P`` with ``C_P`` the 3x3 checkerboard copula of ``P3``.

    ``P3`` is a joint pmf with row and column sums 1/3 whose symmetric part is ``ones/9``.
    """
    P3 = _check_checkerboard(P3)
    if not 0 <= r <= 1:
        raise ValidationError(f"r must lie in [0, 1], got {r}")
    cum = np.cumsum(P3.ravel())
    cum /= cum[-1]
    out = np.empty((count, 2))
    for start, n in _chunks(count):
        u = row_uniforms(seed, start, n, 4)
        comonotone = u[:, 0] <= r
        cell = np.minimum(np.searchsorted(cum, 1.0 - u[:, 1], side="right"), 8)
        i, j = np.divmod(cell, 3)
        x = (i + 1 - u[:, 2]) / 3
        y = (j + 1 - u[:, 3]) / 3
        out[start:start + n, 0] = np.where(comonotone, u[:, 2], x)
        out[start:start + n, 1] = np.where(comonotone, u[:, 2], y)
    return out


# --- conformal p-values -----------------------------------------------------------


@dataclass(frozen=True)
class ConformalSpec:
    """``n`` calibration scores and ``m`` null test points."""

    n: int
    m: int

    EXACT_LIMIT = 30

    def __post_init__(self):
        problems = []
        if not isinstance(self.n, int) or self.n < 1:
            problems.append(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.m, int) or self.m < 1:
            problems.append(f"m must be a positive integer, got {self.m!r}")
        if problems:
            raise ValidationError(problems)

    @property
    def grid(self) -> np.ndarray:
        return np.arange(1, self.n + 2) / (self.n + 1)


def _check_exact(spec):
    if spec.n + spec.m > ConformalSpec.EXACT_LIMIT:
        raise ValidationError(f"exact pmf requires n + m <= {ConformalSpec.EXACT_LIMIT}")


def conformal_joint_pmf(spec: ConformalSpec, indices) -> Fraction:
    """``P(P_i = j_i / (n+1), i = 1..m)`` as an exact rational; indices are 1-based."""
    _check_exact(spec)
    indices = list(indices)
    if len(indices) != spec.m:
        raise ValidationError(f"need {spec.m} indices, got {len(indices)}")
    if any(not 1 <= j <= spec.n + 1 for j in indices):
        raise ValidationError(f"indices must lie in 1..{spec.n + 1}")
    num = 1
    for c in np.bincount(indices).tolist():
        num *= math.factorial(c)
    den = math.prod(range(spec.n + 1, spec.n + spec.m + 1))
    return Fraction(num, den)


def conformal_pmf_table(spec: ConformalSpec) -> dict:
    """All ``(n+1)^m`` index tuples mapped to their exact probabilities."""
    _check_exact(spec)
    return {idx: conformal_joint_pmf(spec, idx)
            for idx in itertools.product(range(1, spec.n + 2), repeat=spec.m)}


def conformal_table_json(spec: ConformalSpec) -> list:
    return [{"indices": list(k), "num": v.numerator, "den": v.denominator}
            for k, v in conformal_pmf_table(spec).items()]


def conformal_corr(n: int) -> Fraction:
    if n < 1:
        raise ValidationError(f"n must be positive, got {n}")
    return Fraction(1, n + 2)


def conformal_pair_pmf(n: int) -> JointPMF:
    """Exact joint law of two null p-values on the grid ``{1..n+1}/(n+1)``."""
    spec = ConformalSpec(n, 2)
    atoms = [Fraction(j, n + 1) for j in range(1, n + 2)]
    P = [[conformal_joint_pmf(spec, (a, b)) for b in range(1, n + 2)] for a in range(1, n + 2)]
    return JointPMF(atoms, atoms, P)


def conformal_pair_corr(n: int):
    """Correlation of two null p-values computed from the exact pmf."""
    return correlation(conformal_pair_pmf(n))


def sample_conformal(spec: ConformalSpec, count: int, seed) -> np.ndarray:
    """Replicates of the ``m`` null p-values with uniform scores."""
    if count < 1:
        raise ValidationError(f"count must be at least 1, got {count}")
    n, m = spec.n, spec.m
    out = np.empty((count, m))
    rows = max(1, min(CHUNK_ROWS, 2 ** 24 // (n * m)))
    for start in range(0, count, rows):
        k = min(rows, count - start)
        s = row_uniforms(seed, start, k, n + m)
        train = s[:, :n]
        test = s[:, n:]
        ranks = (train[:, :, None] <= test[:, None, :]).sum(axis=1)
        out[start:start + k] = (1 + ranks) / (n + 1)
    return out


# --- transforms and output --------------------------------------------------------


def ceil_grid(n: int):
    """The map ``x -> ceil(n x) / n``."""
    if n < 1:
        raise ValidationError(f"n must be positive, got {n}")
    return lambda x: np.ceil(np.asarray(x) * n) / n


def apply_marginal_transform(samples, g) -> np.ndarray:
    """Apply ``g`` elementwise to every coordinate."""
    samples = np.asarray(samples, dtype=float)
    try:
        out = np.asarray(g(samples), dtype=float)
    except (TypeError, ValueError):
        out = None
    if out is None or out.shape != samples.shape:
        out = np.vectorize(g, otypes=[float])(samples)
    return out


def samples_to_csv(samples) -> str:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"X{i}" for i in range(1, samples.shape[1] + 1)])
    for row in samples:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def read_samples_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    return np.array([[float(v) for v in r] for r in rows[1:] if r])

"""Invariance oracle for finite laws (exact) and samplers (Monte Carlo).

A finite library of common transforms ``g`` is applied to both coordinates and
the resulting correlations are compared with the target.  For finite laws the
library is an independent cross-check of the structural characterization,
which is reported alongside.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from statistics import NormalDist

import numpy as np

from .bivariate import (JointPMF, correlation, is_quasi_independent, quasi_frechet_fit,
                        transform_correlation)
from .errors import AdmissibilityError, ValidationError
from .polytope import CorrMatrix

MODES = ("all", "increasing")
KINDS = ("indicator-combination", "piecewise-linear", "polynomial", "sorted-random",
         "clipped-exponential")
DEFAULT_DOMAIN = (0.0, 1.0)


@dataclass(frozen=True)
class TransformSpec:
    """A common marginal transform described by plain parameters.

    Kinds and their ``params``:

    * ``indicator-combination``: ``(thresholds, weights)``; ``g(x) = sum w_k 1{x > t_k}``
    * ``piecewise-linear``: ``(knots, values)``; linear interpolation with linear
      extrapolation from the end segments
    * ``polynomial``: ``(shift, coefficients)``; ``g(x) = sum c_k (x - shift)^k``
    * ``sorted-random``: ``(thresholds, values)``; step function taking ``values[k]``
      on the k-th cell cut out by ``thresholds``
    * ``clipped-exponential``: ``(cap,)``; ``g(x) = exp(min(x, cap))``
    """

    id: str
    kind: str
    params: tuple
    monotone: bool

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown transform kind {self.kind!r}")

    def realize(self):
        """Vectorized callable for this transform."""
        kind, prm = self.kind, self.params
        if kind == "indicator-combination":
            t = np.asarray(prm[0], dtype=float)
            w = np.asarray(prm[1], dtype=float)
            return lambda x: (np.asarray(x, dtype=float)[..., None] > t) @ w
        if kind == "piecewise-linear":
            xs = np.asarray(prm[0], dtype=float)
            ys = np.asarray(prm[1], dtype=float)
            lo = (ys[1] - ys[0]) / (xs[1] - xs[0])
            hi = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])

            def pl(x):
                x = np.asarray(x, dtype=float)
                y = np.interp(x, xs, ys)
                y = np.where(x < xs[0], ys[0] + lo * (x - xs[0]), y)
                return np.where(x > xs[-1], ys[-1] + hi * (x - xs[-1]), y)
            return pl
        if kind == "polynomial":
            shift = float(prm[0])
            coef = np.asarray(prm[1], dtype=float)
            return lambda x: np.polynomial.polynomial.polyval(np.asarray(x, dtype=float) - shift, coef)
        if kind == "sorted-random":
            t = np.asarray(prm[0], dtype=float)
            v = np.asarray(prm[1], dtype=float)
            return lambda x: v[np.searchsorted(t, np.asarray(x, dtype=float), side="right")]
        cap = float(prm[0])
        return lambda x: np.exp(np.minimum(np.asarray(x, dtype=float), cap))

    def scalar(self):
        """Scalar-in, float-out version, for mapping individual atoms."""
        f = self.realize()
        return lambda a: float(f(float(a)))

    def to_dict(self) -> dict:
        def enc(p):
            return [enc(q) for q in p] if isinstance(p, (list, tuple)) else float(p)
        return {"id": self.id, "kind": self.kind, "params": enc(self.params),
                "monotone": self.monotone}


def _canonical(mode, lo, hi, cuts):
    mid = (lo + hi) / 2
    span = hi - lo
    lib = [TransformSpec("identity", "polynomial", (0.0, (0.0, 1.0)), True)]
    lib += [TransformSpec(f"half-line-{k + 1}", "indicator-combination", ((c,), (1.0,)), True)
            for k, c in enumerate(cuts)]
    if mode == "all":
        lib.append(TransformSpec("square", "polynomial", (mid, (0.0, 0.0, 1.0)), False))
        lib.append(TransformSpec("abs", "piecewise-linear",
                                 ((mid - span, mid, mid + span), (span, 0.0, span)), False))
    else:
        lib.append(TransformSpec("cube", "polynomial", (mid, (0.0, 0.0, 0.0, 1.0)), True))
    lib.append(TransformSpec("clipped-exp", "clipped-exponential", (mid,), True))
    return lib


def _random_spec(k, mode, rng, lo, hi, cuts):
    monotone = mode == "increasing"
    kinds = ("indicator-combination", "piecewise-linear", "polynomial", "sorted-random")
    kind = kinds[k % len(kinds)]
    span = hi - lo
    ident = f"random-{k + 1}"
    if kind == "indicator-combination":
        t = tuple(float(c) for c in cuts)
        w = rng.standard_normal(len(t))
        w = np.abs(w) if monotone else w
        return TransformSpec(ident, kind, (t, tuple(float(v) for v in w)), monotone)
    if kind == "piecewise-linear":
        n = 5
        xs = np.sort(lo + span * rng.random(n - 2))
        xs = np.concatenate(([lo - 0.01 * span], xs, [hi + 0.01 * span]))
        xs = np.unique(xs)
        ys = rng.standard_normal(len(xs))
        ys = np.sort(ys) if monotone else ys
        return TransformSpec(ident, kind, (tuple(xs.tolist()), tuple(ys.tolist())), monotone)
    if kind == "polynomial":
        shift = float(lo + span * rng.random())
        if monotone:
            coef = np.zeros(6)
            coef[[1, 3, 5]] = np.abs(rng.standard_normal(3)) / np.array([span, span ** 3, span ** 5])
        else:
            coef = rng.standard_normal(5) / span ** np.arange(5)
        return TransformSpec(ident, kind, (shift, tuple(coef.tolist())), monotone)
    t = tuple(float(c) for c in cuts)
    v = rng.standard_normal(len(t) + 1)
    v = np.sort(v) if monotone else v
    return TransformSpec(ident, "sorted-random", (t, tuple(v.tolist())), monotone)


def transform_library(mode: str, count: int, seed, support=None) -> list:
    """Deterministic list of ``count`` transforms.

    Canonical transforms come first (identity, half-line indicators, a square,
    an absolute value, a clipped exponential; the non-monotone ones replaced by
    a cube in increasing mode), then seeded random ones.  Thresholds sit at
    midpoints between consecutive ``support`` atoms, or at quartiles of the
    unit interval when no support is given.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")
    if count < 1:
        raise ValidationError("count must be at least 1")
    if support is None:
        lo, hi = DEFAULT_DOMAIN
        cuts = [0.25, 0.5, 0.75]
    else:
        atoms = np.unique(np.asarray([float(a) for a in support]))
        lo, hi = float(atoms[0]), float(atoms[-1])
        if hi == lo:
            hi = lo + 1.0
        cuts = ((atoms[:-1] + atoms[1:]) / 2).tolist()
        if not cuts:
            cuts = [lo + 0.5]
    lib = _canonical(mode, lo, hi, cuts)[:count]
    rng = np.random.default_rng(seed)
    k = 0
    while len(lib) < count:
        lib.append(_random_spec(k, mode, rng, lo, hi, cuts))
        k += 1
    return lib


# --- reports -------------------------------------------------------------------------


@dataclass
class TransformRecord:
    transform_id: str
    pair: tuple
    estimate: float | None
    target: float
    se: float
    tolerance: float
    status: str
    note: str = ""

    @property
    def deviation(self):
        return None if self.estimate is None else abs(self.estimate - self.target)


@dataclass
class InvarianceReport:
    mode: str
    target_r: object
    records: list
    verdict: str
    method: str
    settings: dict = field(default_factory=dict)
    structural: dict | None = None

    @property
    def max_abs_deviation(self) -> float:
        devs = [r.deviation for r in self.records if r.deviation is not None]
        return max(devs) if devs else float("nan")

    @property
    def failing(self) -> list:
        return sorted({r.transform_id for r in self.records if r.status == "fail"})

    @property
    def skipped(self) -> list:
        return sorted({r.transform_id for r in self.records if r.status == "skipped"})

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        target = self.target_r.entries.tolist() if isinstance(self.target_r, CorrMatrix) \
            else float(self.target_r)
        rows = []
        for r in self.records:
            row = asdict(r)
            row["pair"] = list(r.pair)
            row["deviation"] = r.deviation
            rows.append(row)
        out = {"method": self.method, "mode": self.mode, "target_r": target,
               "verdict": self.verdict, "max_abs_deviation": self.max_abs_deviation,
               "failing": self.failing, "skipped": self.skipped,
               "settings": self.settings, "records": rows}
        if self.structural is not None:
            out["structural"] = self.structural
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _verdict(records, skip_threshold):
    used = [r for r in records if r.status != "skipped"]
    if not used or (len(records) - len(used)) > skip_threshold * len(records):
        return "inconclusive"
    return "pass" if all(r.status == "pass" for r in used) else "fail"


# --- exact -------------------------------------------------------------------------


def _both_biatomic(pmf):
    return len(pmf.x_atoms) == 2 and len(pmf.y_atoms) == 2


def structural_verdict(pmf: JointPMF, mode: str = "all", tol: float = 1e-12) -> dict:
    """Characterization-based answer to whether ``pmf`` has invariant correlation.

    Identical marginals: a quasi-Frechet fit.  Different marginals: quasi-independence,
    except for two bi-atomic marginals, which are invariant whenever they share a
    support, and always under increasing maps.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")
    if pmf.identical_marginals:
        r = quasi_frechet_fit(pmf, tol)
        return {"check": "quasi-frechet", "invariant": r is not None,
                "r": None if r is None else float(r)}
    if _both_biatomic(pmf):
        if np.array_equal(pmf.x_atoms.astype(float), pmf.y_atoms.astype(float)):
            return {"check": "bi-atomic-same-support", "invariant": True,
                    "r": float(correlation(pmf))}
        if mode == "increasing":
            return {"check": "bi-atomic-increasing", "invariant": True,
                    "r": float(correlation(pmf))}
    qi = is_quasi_independent(pmf, tol)
    return {"check": "quasi-independence", "invariant": qi, "r": 0.0 if qi else None}


BASIS_LIMIT = 12


def basis_transforms(mode: str, atoms, limit: int = BASIS_LIMIT) -> list:
    """Deterministic finite-support transforms that pin down the quadratic forms.

    Both the covariance and the variances are quadratic forms in ``z = g(atoms)``
    that vanish on constants, so their values on a basis and on pairwise sums of
    basis vectors determine them.  In ``"all"`` mode the basis is the single-atom
    indicators ``e_k`` (with ``e_k + e_l`` and ``e_k - e_l``); in ``"increasing"``
    mode it is the half-line indicators ``h_k`` (with ``h_k + h_l``).  Empty when
    the support has more than ``limit`` atoms.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")
    atoms = np.unique(np.asarray([float(a) for a in atoms]))
    n = len(atoms)
    if n < 2 or n > limit:
        return []
    cuts = tuple(((atoms[:-1] + atoms[1:]) / 2).tolist())

    def spec(ident, values, monotone):
        # step function with value values[k] on atom k
        return TransformSpec(ident, "sorted-random", (cuts, tuple(float(v) for v in values)),
                             monotone)

    out = []
    if mode == "all":
        eye = np.eye(n)
        out += [spec(f"basis-e{k + 1}", eye[k], False) for k in range(n)]
        for k, l in itertools.combinations(range(n), 2):
            out.append(spec(f"basis-e{k + 1}+e{l + 1}", eye[k] + eye[l], False))
            out.append(spec(f"basis-e{k + 1}-e{l + 1}", eye[k] - eye[l], False))
    else:
        H = np.tril(np.ones((n, n)))[:, 1:].T  # row k: 1 on atoms k+1..n
        out += [spec(f"basis-h{k + 2}", H[k], True) for k in range(n - 1)]
        for k, l in itertools.combinations(range(n - 1), 2):
            out.append(spec(f"basis-h{k + 2}+h{l + 2}", H[k] + H[l], True))
    return out


def verify_exact(pmf: JointPMF, mode: str = "all", n_transforms: int = 20, seed=0,
                 tol: float = 1e-12, skip_threshold: float = 0.5,
                 basis: bool = True) -> InvarianceReport:
    """Apply the transform library to a finite law and compare with its correlation.

    With ``basis`` the deterministic :func:`basis_transforms` run as well; they
    can only turn a pass into a fail, and their skips (maps constant on one
    margin) do not count toward ``skip_threshold``.
    """
    base = float(correlation(pmf))
    atoms = pmf.union_atoms().tolist()
    lib = transform_library(mode, n_transforms, seed, support=atoms)
    extra = basis_transforms(mode, atoms) if basis else []
    records = []
    for spec in lib + extra:
        try:
            est = float(transform_correlation(pmf, spec.scalar()))
        except AdmissibilityError as exc:
            records.append(TransformRecord(spec.id, (1, 2), None, base, 0.0, tol, "skipped", str(exc)))
            continue
        status = "pass" if abs(est - base) <= tol else "fail"
        records.append(TransformRecord(spec.id, (1, 2), est, base, 0.0, tol, status))
    verdict = _verdict(records[:len(lib)], skip_threshold)
    if any(r.status == "fail" for r in records[len(lib):]):
        verdict = "fail"
    structural = structural_verdict(pmf, mode, tol)
    structural["agrees"] = verdict != "inconclusive" and structural["invariant"] == (verdict == "pass")
    return InvarianceReport(mode, base, records, verdict, "exact",
                            {"tol": tol, "seed": seed, "n_transforms": n_transforms,
                             "n_basis": len(extra)}, structural)


# --- Monte Carlo -----------------------------------------------------------------


def _target_matrix(target, d):
    if isinstance(target, CorrMatrix):
        R = target.entries
    elif np.ndim(target) == 0:
        R = np.full((d, d), float(target))
        np.fill_diagonal(R, 1.0)
    else:
        R = np.asarray(target, dtype=float)
    if R.shape != (d, d):
        raise ValidationError(f"target must be {d}x{d}, got {R.shape}")
    return R


SE_METHODS = ("influence", "normal")


def correlation_se(a, b, method: str = "influence"):
    """Sample correlation of ``a`` and ``b`` and its asymptotic standard error.

    ``"influence"`` is distribution-free: the standard deviation of the influence
    function ``a' b' - r (a'^2 + b'^2) / 2`` of standardized data over ``sqrt(n)``.
    ``"normal"`` is the bivariate-normal value ``(1 - r^2) / sqrt(n)``.
    """
    n = len(a)
    za = (a - a.mean()) / a.std()
    zb = (b - b.mean()) / b.std()
    r = float(np.mean(za * zb))
    if method == "normal":
        return r, (1 - r * r) / math.sqrt(n)
    if method != "influence":
        raise ValidationError(f"se method must be one of {SE_METHODS}")
    infl = za * zb - r * (za * za + zb * zb) / 2
    return r, float(infl.std() / math.sqrt(n))


def verify_mc(sampler, target, mode: str = "all", n_transforms: int = 20,
              n_samples: int = 100_000, seed=0, alpha: float = 0.01,
              skip_threshold: float = 0.5, samples=None,
              se_method: str = "influence") -> InvarianceReport:
    """Monte Carlo check that every transformed pairwise correlation matches ``target``.

    ``sampler(count, seed)`` must return a ``count x d`` array of i.i.d. rows
    (pre-drawn ``samples`` may be passed instead).  Each estimate is accepted when
    it lies within ``z * se`` of the target, with ``z`` the two-sided Bonferroni
    quantile over all pair-transform tests and ``se`` from :func:`correlation_se`.
    The normal-theory ``se`` understates the spread for mixtures with atoms on
    the diagonal, hence the distribution-free default.
    """
    if samples is None:
        if n_samples < 10_000:
            raise ValidationError("n_samples must be at least 10^4")
        samples = sampler(n_samples, seed)
    X = np.asarray(samples, dtype=float)
    n, d = X.shape
    R = _target_matrix(target, d)
    lib = transform_library(mode, n_transforms, seed)
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    tests = len(pairs) * len(lib)
    z = NormalDist().inv_cdf(1 - alpha / (2 * tests))
    records = []
    for spec in lib:
        G = spec.realize()(X)
        for i, j in pairs:
            a, b = G[:, i], G[:, j]
            if np.ptp(a) == 0 or np.ptp(b) == 0:
                records.append(TransformRecord(spec.id, (i + 1, j + 1), None, float(R[i, j]),
                                               float("nan"), float("nan"), "skipped",
                                               "constant transformed sample"))
                continue
            r_hat, se = correlation_se(a, b, se_method)
            ok = abs(r_hat - R[i, j]) <= z * se
            records.append(TransformRecord(spec.id, (i + 1, j + 1), r_hat, float(R[i, j]),
                                           se, z * se, "pass" if ok else "fail"))
    verdict = _verdict(records, skip_threshold)
    target_out = target if isinstance(target, CorrMatrix) else (
        float(target) if np.ndim(target) == 0 else CorrMatrix(R))
    return InvarianceReport(mode, target_out, records, verdict, "monte-carlo",
                            {"alpha": alpha, "z": z, "tests": tests, "n_samples": n,
                             "seed": seed, "se": se_method, "correction": "bonferroni"})


@dataclass
class CopulaCheck:
    deviation: float
    bound: float
    grid_size: int
    n: int

    @property
    def passed(self) -> bool:
        return self.deviation <= self.bound

    def to_dict(self) -> dict:
        return {"deviation": self.deviation, "bound": self.bound, "passed": self.passed,
                "grid_size": self.grid_size, "n": self.n}


def copula_identity_check(samples, r: float, grid_size: int = 10, alpha: float = 0.01) -> CopulaCheck:
    """Sup-distance of the symmetrized empirical copula from ``r M + (1 - r) Pi``.

    Grid points are ``k / (grid_size + 1)``.  The pass bound
    ``sqrt(log(2 g^2 / alpha) / (2 n))`` is Hoeffding's inequality with a union
    bound over the ``g^2`` points.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ValidationError("samples must be an (n, 2) array")
    n = x.shape[0]
    u = np.arange(1, grid_size + 1) / (grid_size + 1)
    below_u = (x[:, 0][:, None] <= u).astype(float)
    below_v = (x[:, 1][:, None] <= u).astype(float)
    C = below_u.T @ below_v / n
    sym = (C + C.T) / 2
    model = r * np.minimum.outer(u, u) + (1 - r) * np.outer(u, u)
    dev = float(np.max(np.abs(sym - model)))
    bound = math.sqrt(math.log(2 * grid_size ** 2 / alpha) / (2 * n))
    return CopulaCheck(dev, bound, grid_size, n)

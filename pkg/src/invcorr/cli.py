"""Command-line interface.

Exit codes: 0 pass / member, 2 fail / non-member, 3 inconclusive, 1 any error.
Errors are printed to stderr as ``{"error": {"code": ..., "message": ...}}``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .bivariate import JointPMF, is_quasi_independent, quasi_frechet_fit, quasi_independence_residual
from .dependence import GridPMF, is_nqd, is_pqd, is_prd
from .errors import InvCorrError, StructureError, ValidationError
from .models import (ConformalSpec, GammaModel, conformal_corr, conformal_pair_corr,
                     conformal_table_json, expected_corr, positive_frechet_model,
                     sample_checkerboard_quasi_frechet, sample_conformal, sample_gamma_model,
                     sample_markov_model, samples_to_csv)
from .partitions import bell_number, enumerate_partitions
from .polytope import DEFAULT_TOL, CorrMatrix, membership
from .verify import MODES, SE_METHODS, verify_exact, verify_mc

EXIT_OK, EXIT_ERROR, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3
VERDICT_EXIT = {"pass": EXIT_OK, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}


class UsageError(InvCorrError):
    code = "USAGE_ERROR"


class InputError(InvCorrError):
    code = "INPUT_ERROR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- input / output -----------------------------------------------------------------


def load_input(value):
    """Parse ``--input``: inline JSON, ``-`` for stdin, or a file path."""
    if value is None:
        raise UsageError("--input is required")
    text = value
    if value == "-":
        text = sys.stdin.read()
    elif not value.lstrip().startswith(("{", "[")):
        try:
            with open(value, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read {value}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from None


def write_output(text: str, path):
    if not text.endswith("\n"):
        text += "\n"
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".invcorr-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj) -> str:
    return json.dumps(obj, indent=2)


def _require_seed(args):
    if args.seed is None:
        raise UsageError("--seed is required for sampling")
    return args.seed


def _corr_from_obj(obj) -> CorrMatrix:
    if isinstance(obj, list):
        return CorrMatrix(np.array(obj, dtype=float))
    if "rows" in obj:
        return CorrMatrix.from_dict(obj)
    raise InputError("expected a correlation matrix as {'d':..,'rows':[[..]]} or a list of rows")


def build_sampler(obj):
    """Turn a sampler description into ``(sampler(count, seed), target, d)``.

    Accepted shapes: a GammaModel or member certificate (``{"d","weights"}``),
    ``{"markov": [p_1, ..]}``, ``{"conformal": {"n", "m"}}``,
    ``{"frechet": {"r", "d"}}`` and ``{"checkerboard": {"P3", "r"}}``.
    """
    if not isinstance(obj, dict):
        raise InputError("sampler description must be a JSON object")
    if "weights" in obj:
        model = GammaModel.from_dict(obj)
        return (lambda c, s: sample_gamma_model(model, c, s)), expected_corr(model), model.d
    if "markov" in obj:
        stay = obj["markov"]
        _, model = sample_markov_model(stay, 1, 0)
        return (lambda c, s: sample_markov_model(stay, c, s)[0]), expected_corr(model), model.d
    if "conformal" in obj:
        spec = ConformalSpec(int(obj["conformal"]["n"]), int(obj["conformal"]["m"]))
        target = np.full((spec.m, spec.m), float(conformal_corr(spec.n)))
        np.fill_diagonal(target, 1.0)
        return (lambda c, s: sample_conformal(spec, c, s)), CorrMatrix(target), spec.m
    if "frechet" in obj:
        model = positive_frechet_model(float(obj["frechet"]["r"]), int(obj["frechet"].get("d", 2)))
        return (lambda c, s: sample_gamma_model(model, c, s)), expected_corr(model), model.d
    if "checkerboard" in obj:
        P3 = np.array(obj["checkerboard"]["P3"], dtype=float)
        r = float(obj["checkerboard"]["r"])
        target = CorrMatrix(np.array([[1.0, r], [r, 1.0]]))
        return (lambda c, s: sample_checkerboard_quasi_frechet(P3, r, c, s)), target, 2
    raise InputError("unrecognized sampler description")


# --- subcommands -----------------------------------------------------------------


def cmd_bell(args):
    d = args.d
    out = {"d": d, "bell": bell_number(d)}
    if args.list:
        out["partitions"] = [[list(b) for b in p.blocks] for p in enumerate_partitions(d)]
    write_output(_dump(out), args.output)
    return EXIT_OK


def cmd_membership(args):
    R = _corr_from_obj(load_input(args.input))
    tol = DEFAULT_TOL if args.tol is None else args.tol
    cert = membership(R, tol, exact=args.exact)
    write_output(cert.to_json(indent=2), args.output)
    return EXIT_OK if cert.member else EXIT_FAIL


def cmd_sample(args):
    seed = _require_seed(args)
    if args.count is None or args.count < 1:
        raise UsageError("--count must be a positive integer")
    sampler, _, _ = build_sampler(load_input(args.input))
    X = sampler(args.count, seed)
    if args.format == "json":
        text = _dump({"columns": [f"X{i + 1}" for i in range(X.shape[1])], "rows": X.tolist()})
    else:
        text = samples_to_csv(X)
    write_output(text, args.output)
    return EXIT_OK


def _pmf_from_obj(obj) -> JointPMF:
    if not isinstance(obj, dict) or "P" not in obj:
        raise InputError("expected a pmf as {'x_atoms','y_atoms','P'}")
    return JointPMF.from_dict(obj)


CHECKS = ("quasi-ind", "quasi-frechet", "pqd", "nqd", "prd")


def cmd_check(args):
    pmf = _pmf_from_obj(load_input(args.input))
    tol = 1e-12 if args.tol is None else args.tol
    which = CHECKS if args.which == "all" else (args.which,)
    out = {}
    for name in which:
        if name == "quasi-ind":
            out[name] = {"holds": is_quasi_independent(pmf, tol),
                         "residual": float(quasi_independence_residual(pmf))}
        elif name == "quasi-frechet":
            try:
                r = quasi_frechet_fit(pmf, tol)
                out[name] = {"holds": r is not None, "r": None if r is None else float(r)}
            except StructureError as exc:
                out[name] = {"holds": False, "r": None, "reason": str(exc)}
        elif name == "pqd":
            out[name] = {"holds": is_pqd(pmf)}
        elif name == "nqd":
            out[name] = {"holds": is_nqd(pmf)}
        else:
            out[name] = is_prd(GridPMF.from_joint(pmf)).to_dict()
    write_output(_dump(out), args.output)
    if args.which == "all":
        return EXIT_OK
    return EXIT_OK if out[args.which]["holds"] else EXIT_FAIL


def cmd_verify(args):
    obj = load_input(args.input)
    seed = 0 if args.seed is None else args.seed
    n_transforms = 20 if args.count is None else args.count
    if isinstance(obj, dict) and "P" in obj:
        tol = 1e-12 if args.tol is None else args.tol
        report = verify_exact(JointPMF.from_dict(obj), args.mode, n_transforms, seed, tol)
    else:
        if args.seed is None:
            raise UsageError("--seed is required for sampling")
        if not isinstance(obj, dict) or "sampler" not in obj:
            raise InputError("expected a pmf or {'sampler': ..., 'target': ...}")
        sampler, default_target, d = build_sampler(obj["sampler"])
        target = default_target
        if obj.get("target") is not None:
            t = obj["target"]
            target = float(t) if isinstance(t, (int, float)) else _corr_from_obj(t)
        report = verify_mc(sampler, target, args.mode, n_transforms, args.samples, seed,
                           args.alpha, se_method=args.se)
    write_output(report.to_json(indent=2), args.output)
    return VERDICT_EXIT[report.verdict]


def cmd_conformal(args):
    spec = ConformalSpec(args.n, args.m)
    out = {"n": spec.n, "m": spec.m,
           "corr": {"num": 1, "den": spec.n + 2}}
    if spec.m >= 2:
        c = conformal_pair_corr(spec.n)
        out["corr_from_pmf"] = {"num": c.numerator, "den": c.denominator}
    out["table"] = conformal_table_json(spec)
    write_output(_dump(out), args.output)
    return EXIT_OK


# --- parser --------------------------------------------------------------------------


def _common(p, *, seed=False, count=False, tol=False, mode=False, fmt=False, inp=True):
    if inp:
        p.add_argument("--input", help="JSON file, inline JSON, or '-' for stdin")
    if seed:
        p.add_argument("--seed", type=int, help="RNG seed (required when sampling)")
    if count:
        p.add_argument("--count", type=int)
    if tol:
        p.add_argument("--tol", type=float)
    if mode:
        p.add_argument("--mode", choices=MODES, default="all")
    if fmt:
        p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--output", help="write here (atomically) instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="invcorr", description="Invariant-correlation toolkit")
    parser.add_argument("--version", action="version", version=f"invcorr {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("bell", help="Bell number and set partitions")
    p.add_argument("d", type=int)
    p.add_argument("--list", action="store_true", help="also list the partitions")
    _common(p, inp=False)
    p.set_defaults(func=cmd_bell)

    p = sub.add_parser("membership", help="certify membership of a correlation matrix")
    _common(p, tol=True)
    p.add_argument("--exact", action="store_true", help="rational arithmetic (d <= 5)")
    p.set_defaults(func=cmd_membership)

    p = sub.add_parser("sample", help="draw samples from a model")
    _common(p, seed=True, count=True, fmt=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("check", help="structural and dependence checks on a bivariate pmf")
    _common(p, tol=True)
    p.add_argument("--which", choices=CHECKS + ("all",), default="all")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("verify", help="invariance oracle (exact pmf or Monte Carlo sampler)")
    _common(p, seed=True, count=True, tol=True, mode=True)
    p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo sample size")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--se", choices=SE_METHODS, default="influence")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("conformal", help="exact joint pmf of null conformal p-values")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=2)
    _common(p, inp=False)
    p.set_defaults(func=cmd_conformal)
    return parser


def _error_payload(exc):
    err = {"code": getattr(exc, "code", "INTERNAL_ERROR"), "message": str(exc)}
    if isinstance(exc, ValidationError):
        err["violations"] = exc.violations
    return {"error": err}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (InvCorrError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, KeyError):
            exc = InputError(f"missing field {exc.args[0]!r}")
        elif not isinstance(exc, InvCorrError):
            exc = InputError(str(exc))
        sys.stderr.write(json.dumps(_error_payload(exc)) + "\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

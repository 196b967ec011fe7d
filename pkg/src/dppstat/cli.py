"""Command-line front end: model info, simulation, fitting, and diagnostics.

Every run echoes its fully resolved configuration into the output JSON;
stochastic commands require an explicit --seed so reruns are byte-identical.
Exit codes: 0 ok, 2 parse error, 3 invalid model, 4 io error, 5 no convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DppError, InvalidModel, NoConvergence, UnsupportedFamily
from .geometry import PointPattern, Window
from .likelihood import fit_mle
from .models import (
    KernelModel,
    alpha_max,
    model_to_dict,
    parse_model_spec,
    range_of_correlation,
    repulsiveness_mu,
    rho_max,
    validate,
)
from .sampler import simulate, spawn_rngs
from .spectral import build_lattice
from .stats import envelopes, fit_minimum_contrast, lr_test, random_labelling_test

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_MODEL = 3
EXIT_IO = 4
EXIT_CONVERGENCE = 5


def _build_hash() -> str:
    """Deterministic digest over the package sources (stands in for a VCS hash)."""
    pkg = Path(__file__).parent
    h = hashlib.sha256()
    for path in sorted(pkg.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()[:12]


def version_string() -> str:
    return f"dppstat {__version__} (build {_build_hash()})"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _dump_json(data: dict, path: str | None):
    text = json.dumps(data, indent=2, default=_json_default)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _parse_model(text: str) -> KernelModel:
    try:
        return parse_model_spec(text)
    except (ValueError, UnsupportedFamily, KeyError) as exc:
        raise CliError(f"cannot parse model spec: {exc}", EXIT_PARSE) from exc


def _parse_window(text: str) -> Window:
    try:
        return Window.parse(text)
    except ValueError as exc:
        raise CliError(f"cannot parse window: {exc}", EXIT_PARSE) from exc


def _load_pattern(path: str, window: Window) -> PointPattern:
    if not os.path.exists(path):
        raise CliError(f"pattern file not found: {path}", EXIT_IO)
    try:
        return PointPattern.from_csv(path, window)
    except (ValueError, DppError) as exc:
        raise CliError(f"cannot read pattern: {exc}", EXIT_PARSE) from exc


def _resolved_config(args: argparse.Namespace) -> dict:
    skip = {"func", "dry_run"}
    out = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    out["version"] = version_string()
    return out


def _maybe_dry_run(args) -> bool:
    if getattr(args, "dry_run", False):
        _dump_json({"dry_run": True, "config": _resolved_config(args)}, None)
        return True
    return False


# ---------------------------------------------------------------------------
# commands

def cmd_info(args) -> int:
    model = _parse_model(args.model)
    if _maybe_dry_run(args):
        return EXIT_OK
    report = validate(model)
    out = {
        "config": _resolved_config(args),
        "model": model_to_dict(model),
        "valid": report.ok,
        "violations": [v.message for v in report.violations],
    }
    if not report.violations or all(v.name == "rho" for v in report.violations):
        out["rho_max"] = rho_max(model)
        try:
            out["alpha_max"] = alpha_max(model)
        except (UnsupportedFamily, ValueError):
            out["alpha_max"] = None
        try:
            out["r0"] = range_of_correlation(model)
        except UnsupportedFamily:
            out["r0"] = None
        out["mu"] = repulsiveness_mu(model) if report.ok else None
    _dump_json(out, args.out)
    if args.out:
        label = "valid" if report.ok else "INVALID"
        print(f"{model.family} model ({label}); details in {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = _parse_model(args.model)
    window = _parse_window(args.window)
    if _maybe_dry_run(args):
        return EXIT_OK
    report = validate(model)
    if not report.ok:
        raise CliError("; ".join(v.message for v in report.violations), EXIT_MODEL)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        lattice = build_lattice(model, window, args.N, mode="simulate", method=args.method)
    except (InvalidModel, DppError) as exc:
        raise CliError(str(exc), EXIT_MODEL) from exc
    if args.dump_lattice:
        lattice.dump_csv(args.dump_lattice)
    rngs = spawn_rngs(args.seed, args.n_sims)
    files = []

    def one(i):
        from .sampler import sample_pattern

        pat = sample_pattern(lattice, rngs[i])
        name = f"sim_{i:04d}.csv"
        pat.to_csv(outdir / name)
        return name, pat.n

    workers = max(1, args.threads)
    if workers > 1 and args.n_sims > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, range(args.n_sims)))
    else:
        results = [one(i) for i in range(args.n_sims)]
    files = [name for name, _ in results]
    manifest = {
        "config": _resolved_config(args),
        "model": model_to_dict(model),
        "expected_points": lattice.mass / (2 ** window.dim if args.method == "border" else 1),
        "files": files,
        "counts": [c for _, c in results],
    }
    _dump_json(manifest, str(outdir / "manifest.json"))
    print(f"wrote {len(files)} realization(s) to {outdir}")
    return EXIT_OK


def _fit_common(args):
    window = _parse_window(args.window)
    pattern = _load_pattern(args.pattern, window)
    return window, pattern


def cmd_fit(args) -> int:
    if _maybe_dry_run(args):
        return EXIT_OK
    window, pattern = _fit_common(args)
    nu = "free" if args.nu == "free" else (float(args.nu) if args.nu is not None else None)
    try:
        if args.method == "mle":
            fit = fit_mle(
                args.model_family,
                pattern,
                nu=nu,
                gamma=args.gamma,
                fit_rho=args.fit_rho,
                N_start=args.N,
                auto_N=not args.fixed_N,
            )
        else:
            stat = "K" if args.method == "mce-k" else "g"
            fit = fit_minimum_contrast(args.model_family, pattern, statistic=stat, nu=nu)
    except (UnsupportedFamily, InvalidModel) as exc:
        raise CliError(str(exc), EXIT_MODEL) from exc
    except DppError as exc:
        raise CliError(str(exc), EXIT_CONVERGENCE) from exc
    out = {
        "config": _resolved_config(args),
        "model": model_to_dict(fit.model),
        "objective": fit.objective,
        "method": fit.method,
        "N_used": fit.N_used,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "rho_source": fit.rho_source,
        "n_free": fit.n_free,
    }
    _dump_json(out, args.out)
    if args.out:
        print(f"{fit.method} fit written to {args.out}")
    if not fit.converged:
        raise CliError("fit did not converge", EXIT_CONVERGENCE)
    return EXIT_OK


def cmd_envelope(args) -> int:
    model = _parse_model(args.model)
    window = _parse_window(args.window)
    if _maybe_dry_run(args):
        return EXIT_OK
    try:
        band = envelopes(
            model, args.statistic, window, rng=args.seed, n_sim=args.n_sim, N=args.N,
            method=args.method,
        )
    except (InvalidModel, DppError) as exc:
        raise CliError(str(exc), EXIT_MODEL) from exc
    rows = ["r,lower,upper,mean"]
    for r, lo, up, me in zip(band.r, band.lower, band.upper, band.mean):
        rows.append(f"{float(r)!r},{float(lo)!r},{float(up)!r},{float(me)!r}")
    Path(args.out).write_text("\n".join(rows) + "\n")
    meta = {
        "config": _resolved_config(args),
        "statistic": args.statistic,
        "n_sim": band.n_sim,
    }
    _dump_json(meta, str(Path(args.out).with_suffix(".json")))
    print(f"envelope curve written to {args.out}")
    return EXIT_OK


def cmd_lrt(args) -> int:
    if _maybe_dry_run(args):
        return EXIT_OK
    window, pattern = _fit_common(args)
    opts = {"N_start": args.N, "auto_N": False}
    null_opts = dict(opts)
    alt_opts = {**opts, "nu": "free"}
    if args.alt_nu is not None:
        alt_opts["nu"] = float(args.alt_nu)
    try:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            res = lr_test(
                args.null_family,
                args.alt_family,
                pattern,
                rng=args.seed,
                n_sim=args.n_sim,
                null_options=null_opts,
                alt_options=alt_opts,
            )
    except DppError as exc:
        raise CliError(str(exc), EXIT_CONVERGENCE) from exc
    out = {"config": _resolved_config(args), **res.to_dict(), "seed": args.seed}
    _dump_json(out, args.out)
    if args.out:
        print(f"lrt p-value {res.p_value:.4f} written to {args.out}")
    return EXIT_OK


def cmd_rlt(args) -> int:
    if _maybe_dry_run(args):
        return EXIT_OK
    window = _parse_window(args.window)
    pattern = _load_pattern(args.pattern, window)
    if pattern.marks is None:
        raise CliError("random-labelling test needs a marked pattern CSV", EXIT_PARSE)
    try:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            res = random_labelling_test(
                pattern,
                args.model_family,
                rng=args.seed,
                n_sim=args.n_sim,
                fit_options={"N_start": args.N, "auto_N": False},
            )
    except DppError as exc:
        raise CliError(str(exc), EXIT_CONVERGENCE) from exc
    out = {"config": _resolved_config(args), **res.to_dict(), "seed": args.seed}
    _dump_json(out, args.out)
    if args.out:
        print(f"random-labelling p-value {res.p_value:.4f} written to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dppstat",
        description="Stationary determinantal point processes: simulate, fit, diagnose.",
    )
    parser.add_argument("--version", action="version", version=version_string())
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, stochastic: bool):
        p.add_argument("--dry-run", action="store_true", help="print resolved config and exit")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="replicate-level parallelism bound")
        if stochastic:
            p.add_argument("--seed", type=int, required=True, help="RNG seed (mandatory)")

    p = sub.add_parser("info", help="validity, rho_max, alpha_max, r0, mu for a model spec")
    p.add_argument("--model", required=True, help='e.g. "family=gaussian rho=100 alpha=0.05 dim=2"')
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    add_common(p, stochastic=False)
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("simulate", help="simulate realizations, one CSV each")
    p.add_argument("--model", required=True)
    p.add_argument("--window", required=True, help="x0,x1,y0,y1 (or x0,x1 for d=1)")
    p.add_argument("--method", choices=["periodic", "border"], default="periodic")
    p.add_argument("--n-sims", type=int, default=1, dest="n_sims")
    p.add_argument("--N", type=int, default=64, help="spectral truncation")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dump-lattice", default=None, help="debug CSV of (k, phi) rows")
    add_common(p, stochastic=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a kernel family by MLE or minimum contrast")
    p.add_argument("--model-family", required=True,
                   help="gaussian | wm | cauchy | powerexp | gengamma")
    p.add_argument("--pattern", required=True, help="CSV with header x,y[,mark]")
    p.add_argument("--window", required=True)
    p.add_argument("--method", choices=["mle", "mce-k", "mce-g"], default="mle")
    p.add_argument("--fit-rho", action="store_true", dest="fit_rho")
    p.add_argument("--nu", default=None, help="shape parameter value, or 'free'")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--N", type=int, default=512, help="starting truncation for MLE")
    p.add_argument("--fixed-N", action="store_true", dest="fixed_N",
                   help="skip the N-doubling stabilization")
    p.add_argument("--out", default=None)
    add_common(p, stochastic=False)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("envelope", help="pointwise 95% simulation envelopes of a statistic")
    p.add_argument("--model", required=True)
    p.add_argument("--window", required=True)
    p.add_argument("--statistic", choices=["K", "L", "L-r", "pcf", "F", "G", "J"], default="L-r")
    p.add_argument("--n-sim", type=int, default=400, dest="n_sim")
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--method", choices=["periodic", "border"], default="periodic")
    p.add_argument("--out", required=True, help="CSV path (r,lower,upper,mean)")
    add_common(p, stochastic=True)
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("lrt", help="simulation-based likelihood-ratio test")
    p.add_argument("--null-family", default="gaussian")
    p.add_argument("--alt-family", default="powerexp")
    p.add_argument("--alt-nu", default=None, help="fix the alternative's nu instead of 'free'")
    p.add_argument("--pattern", required=True)
    p.add_argument("--window", required=True)
    p.add_argument("--n-sim", type=int, default=400, dest="n_sim")
    p.add_argument("--N", type=int, default=192, help="truncation for refits")
    p.add_argument("--out", default=None)
    add_common(p, stochastic=True)
    p.set_defaults(func=cmd_lrt)

    p = sub.add_parser("rlt", help="random-labelling test for a 2-mark pattern")
    p.add_argument("--model-family", default="gaussian")
    p.add_argument("--pattern", required=True)
    p.add_argument("--window", required=True)
    p.add_argument("--n-sim", type=int, default=400, dest="n_sim")
    p.add_argument("--N", type=int, default=192)
    p.add_argument("--out", default=None)
    add_common(p, stochastic=True)
    p.set_defaults(func=cmd_rlt)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InvalidModel as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DppError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())

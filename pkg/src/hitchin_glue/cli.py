"""Command-line harness: config, dispatch, seeding, and report emission."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import ConfigError, HitchinGlueError
from .geometry import PlumbingConfig

EXIT_OK = 0
EXIT_FAIL_FLAGS = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _format_value(v):
    if isinstance(v, bool):
        return "PASS" if v else "FAIL"
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (np.floating,)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def emit_report(rows, fmt: str, path: str) -> None:
    """Write result rows to CSV or JSON with a stable column order.

    Columns are the union of row keys in first-seen order; missing cells
    are blank.  Floats carry 17 significant digits so re-emission is
    byte-identical for identical inputs.
    """
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown report format {fmt!r}")
    columns = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    if fmt == "csv":
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(
                _format_value(row[c]) if c in row else "" for c in columns))
        text = "\n".join(lines) + "\n"
    else:
        out = []
        for row in rows:
            obj = {}
            for c in columns:
                if c not in row:
                    continue
                v = row[c]
                if isinstance(v, (float, np.floating)):
                    obj[c] = float(format(float(v), ".17g"))
                elif isinstance(v, (bool, np.bool_)):
                    obj[c] = bool(v)
                elif isinstance(v, (int, np.integer)):
                    obj[c] = int(v)
                else:
                    obj[c] = str(v)
            out.append(obj)
        text = json.dumps(out, indent=2) + "\n"
    with open(path, "w") as fh:
        fh.write(text)


def module_rng(seed: int, module: str) -> np.random.Generator:
    """Per-module generator split deterministically from one root seed."""
    root = np.random.SeedSequence(seed)
    streams = {"poisson": 0, "operators": 1, "corrector": 2, "gauge": 3,
               "models": 4, "cli": 5}
    if module not in streams:
        raise ConfigError(f"unknown module stream {module!r}")
    return np.random.default_rng(root.spawn(len(streams))[streams[module]])


def _grid_metadata(extra=None):
    meta = {"boundary": "dirichlet_cap"}
    if extra:
        meta.update(extra)
    return meta


# ---------------------------------------------------------------------------
# Subcommand implementations, each returning (rows, any_fail).
# ---------------------------------------------------------------------------

def _cmd_model_check(args):
    from .models import (MATCH_TOL, ModelParams, glue_models, model_pair,
                         pair_residuals)
    params = ModelParams(alpha=args.alpha, C=complex(args.c_re, args.c_im))
    a, p = model_pair(params)
    zero = np.zeros_like(a)
    e1, e2 = pair_residuals(zero, a, p, zero, zero)
    minus = ModelParams(alpha=-args.alpha, C=-complex(args.c_re, args.c_im),
                        side="minus")
    glue_models(params, minus, PlumbingConfig.from_R(0.1))
    row = {"alpha": args.alpha, "C_re": args.c_re, "C_im": args.c_im,
           "residual_first": float(np.max(np.abs(e1))),
           "residual_second": float(np.max(np.abs(e2))),
           "match_tol": MATCH_TOL,
           "pass": bool(np.max(np.abs(e1)) < 1e-12
                        and np.max(np.abs(e2)) < 1e-12)}
    row.update(_grid_metadata())
    return [row], not row["pass"]


def _cmd_wolf_validate(args):
    from .models import (WolfFamilyParams, wolf_higgs_model_distance,
                         wolf_residual)
    params = WolfFamilyParams(args.ell)
    rows = []
    sups = []
    ns = [args.n_grid, 2 * args.n_grid, 4 * args.n_grid]
    for n in ns:
        # The family degenerates toward |z| = 1, so the refinement window
        # stops at log r = -0.3 where derivatives stay moderate.
        x = np.linspace(np.log(1e-4), -0.3, n)
        dx = x[1] - x[0]
        from .geometry import d_tau
        from .models import wolf_cylinder_fields, pair_residuals
        f = wolf_cylinder_fields(params, x)
        e1, e2 = pair_residuals(f["a_tau"], f["a_theta"], f["p"],
                                d_tau(f["a_theta"], dx, order=4),
                                d_tau(f["p"], dx, order=4))
        sup = float(max(np.max(np.abs(e1[3:-3])), np.max(np.abs(e2[3:-3]))))
        sups.append(sup)
    orders = [float(np.log2(sups[i] / sups[i + 1])) for i in range(2)]
    e1a, e2a = wolf_residual(params, np.linspace(np.log(1e-4), -0.1, 512))
    analytic = float(max(np.max(np.abs(e1a)), np.max(np.abs(e2a))))
    # Fit the decay slope deep in the neck where the subleading power
    # corrections (O(r^{2 ell})) are negligible.
    r = np.exp(np.linspace(np.log(1e-4), np.log(1e-2), 64))
    dist = wolf_higgs_model_distance(params, r)
    slope = float(np.polyfit(np.log(r), np.log(dist), 1)[0])
    row = {"ell": args.ell, "max_residual": analytic,
           "refine_order_1": orders[0], "refine_order_2": orders[1],
           "higgs_slope": slope,
           "pass": bool(min(orders) >= 1.9
                        and abs(slope - args.ell) <= 0.15 * args.ell)}
    row.update(_grid_metadata({"n_grid": args.n_grid}))
    return [row], not row["pass"]


def _cmd_poisson_solve(args):
    from .poisson import (WeightConfig, make_log_grid, mode_residual,
                          random_decaying_profile, solve_mode_j,
                          solve_mode_zero, RadialFunction)
    w = WeightConfig(args.delta, args.delta_prime, args.delta_dprime)
    x = make_log_grid(r_min=args.r_min, n=args.n_grid)
    rng = module_rng(args.seed, "poisson")
    rows = []
    any_fail = False
    for j in args.modes:
        h = RadialFunction(x, random_decaying_profile(rng, x, w.delta))
        u = solve_mode_zero(h) if j == 0 else solve_mode_j(j, h, w)
        res = mode_residual(j, u, h)
        ok = bool(res <= args.residual_tol)
        any_fail = any_fail or not ok
        row = {"mode": j, "delta": w.delta, "delta_prime": w.delta_prime,
               "residual": float(res), "pass": ok}
        row.update(_grid_metadata({"n_grid": args.n_grid,
                                   "r_min": args.r_min}))
        rows.append(row)
    return rows, any_fail


def _cmd_build_approx(args):
    from .gauge import hitchin_error, splice_exact_family
    cfg = PlumbingConfig.from_R(args.R, cap_length=args.cap_length)
    out = splice_exact_family(args.ell, cfg)
    tau = out["tau"]
    dtau = tau[1] - tau[0]
    n1, n2 = hitchin_error(out["a_tau"], out["a_theta"], out["p"], dtau,
                           full=True)
    per_node = np.maximum(n1, n2)
    inside = float(np.max(per_node[out["annulus"][3:-3]]))
    outside_mask = ~out["annulus"]
    # Dilate the annulus so stencil halos do not leak into the outside sup.
    for _ in range(3):
        outside_mask = outside_mask & np.roll(outside_mask, 1) \
            & np.roll(outside_mask, -1)
    outside = float(np.max(per_node[outside_mask[3:-3]]))
    row = {"R": args.R, "ell": args.ell, "seam_jump": float(out["seam_jump"]),
           "sup_residual_annulus": inside,
           "sup_residual_outside": outside,
           "pass": bool(outside <= 1e-10)}
    row.update(_grid_metadata({"n_tau": tau.size,
                               "cap_length": args.cap_length}))
    return [row], not row["pass"]


def _cmd_spectrum(args):
    from .models import ModelParams
    from .operators import scaling_study
    if not args.sweep:
        raise ConfigError("empty sweep")
    include = args.background != "zero-higgs"
    params = ModelParams(alpha=args.alpha, C=complex(args.c_re, args.c_im))
    rep = scaling_study(args.sweep, params, cap_length=args.cap_length,
                        n_tau=args.n_tau, n_theta_modes=args.n_theta_modes,
                        include_higgs=include)
    rows = []
    for i in range(rep.R_values.size):
        row = {"R": float(rep.R_values[i]), "T": float(rep.T_values[i]),
               "lambda1": float(rep.lambda1[i]),
               "lambda1_T2": float(rep.products[i]),
               "flatness": rep.flatness,
               "flat_pass": bool(rep.flat_pass),
               "no_small_eigenvalues": bool(rep.no_small_eigenvalues)}
        row.update(_grid_metadata({"n_tau": args.n_tau,
                                   "n_theta_modes": args.n_theta_modes,
                                   "cap_length": args.cap_length}))
        rows.append(row)
    return rows, not (rep.flat_pass and rep.no_small_eigenvalues)


def _cmd_glue(args):
    from .corrector import correct, perturbed_model_fixture
    cfg, at, ath, p = perturbed_model_fixture(
        args.R, args.n_tau, amplitude=args.amplitude, seed=args.seed)
    at2, ath2, p2, state = correct(at, ath, p, cfg)
    os.makedirs(args.out, exist_ok=True)
    summary = {
        "R": args.R,
        "residual_before": float(state.residual_history[0]),
        "residual_after": float(state.residual_history[-1]),
        "iterations": int(state.iterations),
        "contraction_factors": [float(format(v, ".17g"))
                                for v in state.contraction_ratios],
        "sigma_R": float(state.sigma_R),
        "gamma_h2b": float(state.h2b_norm),
        "converged": bool(state.converged),
    }
    with open(os.path.join(args.out, "glue_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    fields = {"a_tau": at2, "a_theta": ath2, "p": p2}
    packed = {k: {"re": np.real(v).tolist(), "im": np.imag(v).tolist()}
              for k, v in fields.items()}
    packed["grid"] = {"n_tau": cfg.n_tau, "R": args.R,
                      "boundary": "dirichlet_cap"}
    with open(os.path.join(args.out, "glue_fields.json"), "w") as fh:
        json.dump(packed, fh)
        fh.write("\n")
    row = dict(summary)
    row["contraction_factors"] = len(summary["contraction_factors"])
    row.update(_grid_metadata({"n_tau": args.n_tau}))
    row["pass"] = bool(state.converged)
    return [row], not state.converged


# ---------------------------------------------------------------------------
# Argument parsing and dispatch.
# ---------------------------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--config", default=None,
                    help="JSON file with flat keys mirroring the flags")
    sp.add_argument("--seed", type=int, default=0, help="root RNG seed")
    sp.add_argument("--out-report", default=None,
                    help="report file path (default: stdout)")
    sp.add_argument("--format", choices=("csv", "json"), default="json",
                    help="report format")
    sp.add_argument("--strict", action="store_true",
                    help="exit 1 when any row carries a FAIL flag")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hitchin-glue",
        description="Gluing studies for rank-2 self-duality fields on a "
                    "degenerating neck")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("model-check", help="residuals and matching of the "
                        "constant model pair")
    sp.add_argument("--alpha", type=float, default=0.15)
    sp.add_argument("--c-re", type=float, default=0.3)
    sp.add_argument("--c-im", type=float, default=0.2)
    _add_common(sp)
    sp.set_defaults(func=_cmd_model_check)

    sp = sub.add_parser("wolf-validate", help="residual refinement order and "
                        "Higgs decay slope of the exact family")
    sp.add_argument("--ell", type=float, default=0.5)
    sp.add_argument("--n-grid", type=int, default=512)
    _add_common(sp)
    sp.set_defaults(func=_cmd_wolf_validate)

    sp = sub.add_parser("poisson-solve", help="mode-wise radial Poisson "
                        "solves with random decaying data")
    sp.add_argument("--modes", type=int, nargs="+", default=[0, 1, 2, 3])
    sp.add_argument("--delta", type=float, default=0.5)
    sp.add_argument("--delta-prime", type=float, default=0.4)
    sp.add_argument("--delta-dprime", type=float, default=0.35)
    sp.add_argument("--r-min", type=float, default=1e-6)
    sp.add_argument("--n-grid", type=int, default=8193)
    sp.add_argument("--residual-tol", type=float, default=1e-7)
    _add_common(sp)
    sp.set_defaults(func=_cmd_poisson_solve)

    sp = sub.add_parser("build-approx", help="spliced approximate pair and "
                        "its residual localization")
    sp.add_argument("--R", type=float, default=0.1)
    sp.add_argument("--ell", type=float, default=0.5)
    sp.add_argument("--cap-length", type=float, default=2.0)
    _add_common(sp)
    sp.set_defaults(func=_cmd_build_approx)

    sp = sub.add_parser("spectrum", help="smallest-eigenvalue sweep over R")
    sp.add_argument("--sweep", type=lambda s: [float(v) for v in s.split(",")],
                    default=None, help="comma-separated R values")
    sp.add_argument("--background", choices=("model", "zero-higgs"),
                    default="model")
    sp.add_argument("--alpha", type=float, default=0.15)
    sp.add_argument("--c-re", type=float, default=0.3)
    sp.add_argument("--c-im", type=float, default=0.2)
    sp.add_argument("--n-tau", type=int, default=256)
    sp.add_argument("--n-theta-modes", type=int, default=4)
    sp.add_argument("--cap-length", type=float, default=2.0)
    _add_common(sp)
    sp.set_defaults(func=_cmd_spectrum)

    sp = sub.add_parser("glue", help="build the perturbed fixture and run "
                        "the corrector")
    sp.add_argument("--R", type=float, default=0.1)
    sp.add_argument("--fixture", choices=("perturbed-model",),
                    default="perturbed-model")
    sp.add_argument("--amplitude", type=float, default=3e-4)
    sp.add_argument("--n-tau", type=int, default=256)
    sp.add_argument("--out", default="glue_out")
    _add_common(sp)
    sp.set_defaults(func=_cmd_glue)

    return parser


def _apply_config_file(parser, args, argv):
    """Fill unset flags from the JSON config; command-line flags win."""
    if not args.config:
        return args
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a flat JSON object")
    explicit = set()
    for tok in argv:
        if tok.startswith("--"):
            explicit.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    for key, value in data.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ConfigError(f"unknown config key {key!r}")
        if attr in explicit:
            continue
        setattr(args, attr, value)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    threads = os.environ.get("HITCHIN_GLUE_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config_file(parser, args, argv)
        if args.command == "spectrum" and not args.sweep:
            raise ConfigError("spectrum requires a non-empty --sweep")
        rows, any_fail = args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HitchinGlueError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_NUMERIC
    if args.out_report:
        emit_report(rows, args.format, args.out_report)
    else:
        for row in rows:
            print(json.dumps({k: _format_value(v) for k, v in row.items()}))
    if any_fail and args.strict:
        return EXIT_FAIL_FLAGS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

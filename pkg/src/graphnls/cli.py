"""Command-line entry point ``graphnls``.

Exit codes: 0 success, 1 regime or configuration error, 2 numerical failure,
3 failed assertion in ``verify``, 4 ``evolve`` ended with a blow-up flag.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import fields

from . import __version__
from .evolution import EvolutionConfig, LinearSolveError, evolve, evolve_delta_prime
from .experiments import (
    ExperimentSpec,
    RegimeError,
    parse_config,
    run_experiment,
    spec_from_mapping,
)
from .functionals import delta_prime_functionals, functional_report, instability_threshold
from .grid import StarGraphGrid, read_snapshot, write_snapshot
from .profiles import (
    CoarseGridError,
    DeltaPrimeParams,
    WaveParams,
    build_profile_delta,
    build_profile_delta_prime,
    default_length,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ASSERT, EXIT_BLOWUP = 0, 1, 2, 3, 4

log = logging.getLogger("graphnls")


def _parse_profile(text):
    """``"N=3,alpha=1,omega=2,p=6,k=0"`` or ``"gamma=2,omega=5,p=6,branch=odd"``."""
    out = {}
    for part in text.replace(";", ",").split(","):
        if not part.strip():
            continue
        key, _, value = part.partition("=")
        out[key.strip()] = value.strip()
    return out


def _params_from(d):
    if "gamma" in d:
        return DeltaPrimeParams(float(d["gamma"]), float(d["omega"]), float(d["p"]), d.get("branch", "odd"))
    return WaveParams(int(d.get("N", 3)), float(d["alpha"]), float(d["omega"]), float(d["p"]), int(d.get("k", 0)))


def _build(params, length, h, lam=1.0):
    n = 2 if isinstance(params, DeltaPrimeParams) else params.n_edges
    if length is None:
        length = default_length(params.omega, params.p)
    grid = StarGraphGrid.from_spacing(n, length, h)
    if isinstance(params, DeltaPrimeParams):
        return build_profile_delta_prime(params, grid, lam=lam)
    return build_profile_delta(params, grid, lam=lam)


def _add_grid(p):
    p.add_argument("--L", dest="length", type=float, default=None, help="edge length (default from omega, p)")
    p.add_argument("--h", type=float, default=0.01)


def cmd_profile(args):
    if args.model == "deltaprime":
        if args.gamma is None:
            raise RegimeError("--model deltaprime needs --gamma")
        d = {"gamma": args.gamma, "omega": args.omega, "p": args.p, "branch": args.branch}
    else:
        if args.alpha is None:
            raise RegimeError("--model delta needs --alpha")
        d = {"N": args.N, "alpha": args.alpha, "omega": args.omega, "p": args.p, "k": args.k}
    params = _params_from(d)
    length = args.length
    if args.M is not None:
        if length is None:
            length = default_length(params.omega, params.p)
        h = length / (args.M - 1)
    else:
        h = args.h
    field = _build(params, length, h, args.lam)
    meta = {"version": __version__, "model": args.model, **d, "lambda": args.lam}
    write_snapshot(args.out, field, meta)
    print(f"wrote {args.out} ({field.grid.n_edges} x {field.grid.n_points}, h={field.grid.h:g})")
    return EXIT_OK


def _report_line(field, args):
    if args.gamma is not None:
        return delta_prime_functionals(field, args.gamma, args.omega, args.p)
    return functional_report(field, args.alpha, args.omega, args.p)


def cmd_functionals(args):
    field, _ = read_snapshot(args.snapshot)
    if args.gamma is None and args.alpha is None:
        raise RegimeError("give --alpha (star graph) or --gamma (line)")
    rep = _report_line(field, args)
    print("mass,energy,action,nehari,virial_p,vertex_abs2")
    print(",".join(f"{v:.17g}" for v in (rep.mass, rep.energy, rep.action, rep.nehari, rep.virial_p, rep.vertex_abs2)))
    return EXIT_OK


def cmd_threshold(args):
    res = instability_threshold(args.p, alpha=args.alpha, n_edges=args.N, gamma=args.gamma)
    print(f"# version={__version__}\n# mode={res.mode}\n# sign_changes={res.sign_changes}")
    print("p,xi,omega_star,residual")
    print(f"{res.p:.17g},{res.xi:.17g},{res.omega_star:.17g},{res.residual:.3e}")
    return EXIT_OK


def cmd_evolve(args):
    if (args.snapshot is None) == (args.profile is None):
        raise RegimeError("give exactly one of --snapshot or --profile")
    if args.snapshot:
        field, meta = read_snapshot(args.snapshot)
        const = args.gamma if args.gamma is not None else args.alpha
        omega, p = args.omega, args.p
        if const is None or omega is None or p is None:
            raise RegimeError("--snapshot needs --alpha/--gamma, --omega and --p")
        is_line = field.grid.n_edges == 2 and args.gamma is not None
    else:
        d = _parse_profile(args.profile)
        params = _params_from(d)
        field = _build(params, args.length, args.h, args.lam)
        is_line = isinstance(params, DeltaPrimeParams)
        const = params.gamma if is_line else params.alpha
        omega, p = params.omega, params.p
        meta = dict(d)
    cfg = EvolutionConfig(dt=args.dt, t_end=args.t_end, scheme=args.scheme, outer_bc=args.outer_bc,
                          monitor_stride=args.monitor_stride, refine_on_blowup=args.refine)
    run = evolve_delta_prime if is_line else evolve
    rec = run(field, cfg, const, omega, p)
    meta = {"version": __version__, **meta, "lambda": args.lam}
    if args.out_series:
        rec.to_csv(args.out_series, meta)
    if args.out_final and rec.final_state is not None:
        write_snapshot(args.out_final, rec.final_state, {**meta, "t": rec.times[-1], "status": rec.status})
    print(f"status={rec.status} t={rec.times[-1]:g} blowup_time={rec.blowup_time} reason={rec.blowup_reason}")
    if rec.status == "numerical_failure":
        return EXIT_NUMERICAL
    return EXIT_BLOWUP if rec.status == "blowup" else EXIT_OK


SPEC_FIELDS = [f for f in fields(ExperimentSpec) if f.name != "name"]


def _add_spec_flags(p):
    p.add_argument("--config", help="key=value file; flags override it")
    for f in SPEC_FIELDS:
        flag = "--" + f.name.replace("_", "-")
        if f.name == "force":
            p.add_argument(flag, action="store_true", default=None)
        else:
            p.add_argument(flag, default=None)


def _spec(args, name):
    mapping = parse_config(args.config) if args.config else {}
    for f in SPEC_FIELDS:
        v = getattr(args, f.name, None)
        if v is not None:
            mapping[f.name] = v
    if name is not None:
        mapping["name"] = name
    return spec_from_mapping(mapping)


def _run_driver(args, name, strict):
    spec = _spec(args, name)
    report = run_experiment(spec)
    sys.stdout.write(report.header())
    print(report.table())
    if strict and not report.passed:
        return EXIT_ASSERT
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="graphnls", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="sample a standing wave and write a snapshot")
    p.add_argument("--model", choices=["delta", "deltaprime"], default="delta")
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--branch", default="odd", choices=["odd", "asymmetric", "asymmetric_swapped"])
    p.add_argument("--M", type=int, help="samples per edge (overrides --h)")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--out", required=True)
    _add_grid(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("functionals", help="one-line CSV of mass, E, S, I, P for a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.set_defaults(func=cmd_functionals)

    p = sub.add_parser("threshold", help="xi and omega_1 (with --alpha --N) or omega_3 (with --gamma)")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--gamma", type=float)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("evolve", help="time-integrate from a snapshot or a profile")
    p.add_argument("--snapshot")
    p.add_argument("--profile")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--dt", type=float, default=2.5e-5)
    p.add_argument("--t-end", dest="t_end", type=float, default=1.0)
    p.add_argument("--scheme", default="strang_split", choices=["strang_split", "crank_nicolson_relaxed"])
    p.add_argument("--outer-bc", dest="outer_bc", default="dirichlet", choices=["dirichlet", "neumann"])
    p.add_argument("--monitor-stride", dest="monitor_stride", type=int, default=40)
    p.add_argument("--refine", action="store_true", help="locate the blow-up flag to a single step")
    p.add_argument("--out-series")
    p.add_argument("--out-final")
    _add_grid(p)
    p.set_defaults(func=cmd_evolve)

    for name, driver, helptext in (
        ("blowup", "blowup_scan", "evolve scaled profiles and record blow-up"),
        ("stability", "stability_demo", "perturbed profile in the stable regime"),
        ("deltaprime", "delta_prime_suite", "delta-prime profiles, sign sweep and blow-up runs"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_spec_flags(p)
        p.set_defaults(func=lambda a, d=driver: _run_driver(a, d, strict=False))

    p = sub.add_parser("verify", help="run one experiment and fail (exit 3) if any check fails")
    p.add_argument("experiment", nargs="?", default=None,
                   help="verify_profile, verify_virial, blowup_scan, stability_demo, threshold_table, delta_prime_suite")
    _add_spec_flags(p)
    p.set_defaults(func=lambda a: _run_driver(a, a.experiment, strict=True))
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (RegimeError, CoarseGridError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LinearSolveError, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

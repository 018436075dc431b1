"""Command-line entry point: ``hornlab <command> [options]``.

Exit codes: 0 when every check passes, 2 when a certification fails,
1 for usage and configuration errors. Errors are reported as JSON on stderr.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import cdtools, curvature, decay, geometry, harmonic, profiles
from .errors import CertificationError, ConfigError, DomainError, HornlabError

PARAM_KEYS = ("regime", "epsilon", "eta", "rho", "zeta", "kappa", "K", "mollifier_eps", "r_max")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _params_from(args):
    """Preset (or defaults), then config file values, then explicit flags."""
    base = dict(profiles.PRESETS[args.preset]) if args.preset else {}
    cfg = args.config_data.get("params", {})
    for key in PARAM_KEYS:
        if key in args.config_data:
            cfg.setdefault(key, args.config_data[key])
    d = {**base}
    for key, val in cfg.items():
        d["curvature_bound" if key == "K" else key] = val
    for key in PARAM_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            d["curvature_bound" if key == "K" else key] = val
    if "regime" in d and d["regime"] is not None:
        d["regime"] = profiles.Regime(d["regime"])
    # an explicit regime without explicit K picks the regime's default bound
    if getattr(args, "regime", None) and getattr(args, "K", None) is None and "K" not in cfg:
        d["curvature_bound"] = 0.01 if d["regime"] is profiles.Regime.POSITIVE_K else 0.0
    return profiles.GluingParams(**d)


def _option(args, name, default):
    val = getattr(args, name, None)
    if val is not None:
        return val
    return args.config_data.get(name, default)


def _out(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.bool_):
        return bool(v)
    return str(v)


def _write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


# -- commands ------------------------------------------------------------------

def cmd_build(args):
    params = _params_from(args)
    phi = profiles.build_warping(params)
    chi = profiles.build_weight(params)
    jw = profiles.junction_report(phi)
    jc = profiles.junction_report(chi)
    doc = {"params": params.to_dict(),
           "constants": {"a": phi.constants.a, "xi": phi.constants.xi},
           "breakpoints": phi.breakpoints, "r_max": phi.r_max,
           "weight": {"plateau_slope": chi.plateau_slope, "plateau_value": chi.plateau_value,
                      "band": list(chi.band)},
           "junctions": {"warping": jw.to_dict(), "weight": jc.to_dict()},
           "verdict": "PASS" if jw.passed and jc.passed else "FAIL"}
    _write_json(_out(args, "profile.json"), doc)
    _emit(doc)
    return 0 if doc["verdict"] == "PASS" else 2


def _metric(args, params=None):
    kind = _option(args, "metric", "glued")
    params = params or _params_from(args)
    if kind == "glued":
        return curvature.horn_metric(params)
    if kind == "pure-horn":
        return curvature.pure_horn_metric(params.epsilon, params.eta)
    if kind == "flat":
        return curvature.flat_metric()
    if kind == "cone":
        return curvature.cone_metric(_option(args, "slope", 0.5))
    raise ConfigError(f"unknown metric {kind!r}")


def cmd_certify_curvature(args):
    params = _params_from(args)
    metric = _metric(args, params)
    rep = curvature.certify_lower_bound(metric, params.K,
                                        n_points=_option(args, "n_points", 4000), strict=False)
    rep.to_csv(_out(args, "ricci.csv"))
    rep.to_json(_out(args, "ricci.json"))
    _emit(rep.summary())
    return 0 if rep.passed else 2


def cmd_check_geodesics(args):
    eps = _option(args, "epsilon", 1.0)
    radius = _option(args, "radius", 0.1)
    n_pairs = _option(args, "n_pairs", 10_000)
    sweep = geometry.avoidance_sweep(eps, radius, n_pairs, args.seed)
    geometry.write_probe_csv(_out(args, "probes.csv"), sweep)
    # exact distances on a handful of pairs for comparison
    n_exact = min(_option(args, "n_exact", 10), n_pairs)
    phi = profiles.HornWarping(eps)
    exact = []
    for i in range(n_exact):
        r1, r2, ang = sweep["r1"][i], sweep["r2"][i], sweep["angle"][i]
        x = geometry.HornPoint.from_angles(r1, 0.0)
        y = geometry.HornPoint.from_angles(r2, ang)
        exact.append(geometry.geodesic_distance(phi, x, y))
    exact = np.array(exact)
    ok_exact = bool(np.all(exact <= sweep["direct"][:n_exact] * (1 + 1e-8)))
    summary = {"epsilon": eps, "radius": radius, "n_pairs": n_pairs, "seed": args.seed,
               "all_avoid": bool(np.all(sweep["margin"] > 0)),
               "min_margin": float(sweep["margin"].min()),
               "largest_passing_radius": geometry.largest_avoidance_radius(eps, seed=args.seed),
               "exact_below_bound": ok_exact,
               "exact_distances": exact.tolist()}
    summary["verdict"] = "PASS" if summary["all_avoid"] and ok_exact else "FAIL"
    _write_json(_out(args, "geodesics.json"), summary)
    _emit(summary)
    return 0 if summary["verdict"] == "PASS" else 2


_DENSITIES = {
    "constant": (lambda eta: (lambda x: np.ones_like(x)), 1.0, 2.0),
    "linear": (lambda eta: (lambda x: x), 1.0, 2.0),
    "horn-weight": (lambda eta: (lambda x: x ** (1 - eta)), 1.0, 2.0),
    "square": (lambda eta: (lambda x: x**2), -1.0, 1.0),
}


def cmd_check_density(args):
    name = _option(args, "density", "horn-weight")
    if name not in _DENSITIES:
        raise ConfigError(f"unknown density {name!r}")
    make, x0, x1 = _DENSITIES[name]
    eta = _option(args, "eta", 0.5)
    x0 = _option(args, "x0", x0)
    x1 = _option(args, "x1", x1)
    path = cdtools.DensitySamplePath(x0, x1, make(eta), _option(args, "k", 0.0))
    rep = cdtools.density_convexity_check(path, _option(args, "t_samples", 33), seed=args.seed)
    doc = json.loads(rep.to_json())
    doc["density"] = name
    _write_json(_out(args, "density.json"), doc)
    _emit(doc)
    return 0 if rep.verdict == "PASS" else 2


def _coeffs(args):
    raw = _option(args, "coeffs", None)
    if raw is None:
        return {1: {0: 1.0}}
    data = json.loads(raw) if isinstance(raw, str) else raw
    return {int(k): {int(m): float(c) for m, c in row.items()} for k, row in data.items()}


def cmd_solve(args):
    metric = _metric(args)
    s = _option(args, "s", None) or decay.default_ball_radius(metric)
    fld = harmonic.dirichlet_solve(metric, s, _coeffs(args), k_max=_option(args, "k_max", 8),
                                   r_start=_option(args, "r_start", None))
    fld.to_json(_out(args, "field.json"))
    done = set()
    worst = 0.0
    for k, m, c, mode in fld.modes:
        if mode is not None and k not in done:
            mode.to_csv(_out(args, f"radial_k{k}.csv"))
            worst = max(worst, mode.residual())
            done.add(k)
    summary = {"s": s, "modes": fld.coefficient_table(), "max_ode_residual": worst,
               "weak_residual": harmonic.weak_residual(fld, seed=args.seed),
               "truncated": {str(k): v for k, v in fld.truncated.items()}}
    _emit(summary)
    return 0


def cmd_three_circle(args):
    params = _params_from(args) if args.preset or args.config_data or args.K is not None \
        else profiles.preset("nonpositive-k")
    metric = curvature.horn_metric(params)
    R = _option(args, "R", 80.0)
    s_exp = _option(args, "s_exponent", 4.2)
    fld = harmonic.dirichlet_solve(metric, R, _coeffs(args) if args.coeffs else
                                   {1: {0: 1.0}, 2: {0: 1e4}}, r_start=1e-6)
    radii = np.geomspace(_option(args, "r_low", 0.5), R, _option(args, "n_radii", 25))
    sweep = harmonic.three_circle_sweep(fld, radii, s_exp)
    rows = sweep["rows"]
    with open(_out(args, "three_circle.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "premise", "conclusion", "implication_holds"])
        for row in rows:
            w.writerow([repr(row["r"]), row["premise"], row["conclusion"],
                        row["implication_holds"]])
    summary = {"s_exponent": s_exp, "k0": sweep["k0"], "all_hold": sweep["all_hold"],
               "admissible": all(r["admissible"] for r in rows),
               "stated_exponent": harmonic.stated_exponent_relation(params.eta)[0],
               "cone_exponents": {k: harmonic.cone_exponent(
                   float(metric.phi(np.array([10 * R]), 1)[0]), k) for k in (1, 2)}}
    _write_json(_out(args, "three_circle.json"), summary)
    _emit(summary)
    return 0 if sweep["all_hold"] else 2


def _decay_field(args):
    kind = _option(args, "field", "horn")
    if kind == "flat-linear":
        return harmonic.dirichlet_solve(curvature.flat_metric(), 1.0, {1: {0: 1.0}}), None
    if kind == "cone":
        slope = _option(args, "slope", 0.5)
        return harmonic.dirichlet_solve(curvature.cone_metric(slope), 1.0, {1: {0: 1.0}}), None
    if kind == "horn":
        params = _params_from(args)
        metric = curvature.horn_metric(params)
        s = _option(args, "s", None) or decay.default_ball_radius(metric)
        return harmonic.dirichlet_solve(metric, s, {1: {0: 1.0}}, r_start=1e-15 * s), params
    raise ConfigError(f"unknown field {kind!r}")


def _run_decay(args, fld, eps):
    s = fld.ball_radius
    rep = decay.decay_report(fld, n=_option(args, "n_radii", 60))
    fit = decay.quasipoly_fit(rep)
    deep = np.geomspace(_option(args, "vio_depth", 1e-14) * s, s / 2, 40)
    vio = decay.vio_table(fld, deep, _option(args, "m_max", 30))
    out = {"verdict": str(fit.verdict), "vio_verdict": str(vio.verdict),
           "fit": {"A": fit.A, "B": fit.B, "c": fit.c, "r_squared": fit.r_squared},
           "annulus_sup": rep.annulus_sup}
    if eps:
        cert = decay.decay_certificate(rep, eps)
        rec = decay.recursion_check(rep, eps)
        out["certificate"] = {"holds": cert.holds, "C": cert.C, "exponent": cert.exponent,
                              "worst_margin": cert.worst_margin}
        out["recursion"] = {"C_fit": rec["C_fit"], "uniform": rec["uniform"]}
    rep.extra = {k: v for k, v in out.items() if k not in ("verdict",)}
    rep.to_csv(_out(args, "decay.csv"))
    rep.to_json(_out(args, "decay.json"))
    vio.to_csv(_out(args, "vio.csv"))
    if args.svg:
        decay.write_svg(rep, _out(args, "decay.svg"))
    return out


def cmd_decay(args):
    fld, params = _decay_field(args)
    out = _run_decay(args, fld, params.epsilon if params else None)
    _emit(out)
    return 0


def cmd_reproduce(args):
    params = _params_from(args)
    metric = curvature.horn_metric(params)
    rep = curvature.certify_lower_bound(metric, params.K, n_points=4000, strict=False)
    rep.to_csv(_out(args, "ricci.csv"))
    rep.to_json(_out(args, "ricci.json"))
    sweep = geometry.avoidance_sweep(1.0, 0.1, 10_000, args.seed)
    geometry.write_probe_csv(_out(args, "probes.csv"), sweep)
    avoid = bool(np.all(sweep["margin"] > 0))
    s = decay.default_ball_radius(metric)
    fld = harmonic.dirichlet_solve(metric, s, {1: {0: 1.0}}, r_start=1e-15 * s)
    fld.to_json(_out(args, "field.json"))
    d = _run_decay(args, fld, params.epsilon)
    claim = rep.passed and avoid and d["verdict"] == "InfiniteOrder" \
        and d["vio_verdict"] == "InfiniteOrder" and d["certificate"]["holds"]
    summary = {"curvature": rep.verdict, "min_eigen_gap": rep.worst_point[1],
               "vertex_avoidance": "PASS" if avoid else "FAIL",
               "decay": d["verdict"], "vio_table": d["vio_verdict"],
               "certificate": "PASS" if d["certificate"]["holds"] else "FAIL",
               "claim": "PASS" if claim else "FAIL", "params": params.to_dict()}
    _write_json(_out(args, "summary.json"), summary)
    _emit(summary)
    return 0 if claim else 2


COMMANDS = {
    "build": cmd_build, "certify-curvature": cmd_certify_curvature,
    "check-geodesics": cmd_check_geodesics, "check-density": cmd_check_density,
    "solve": cmd_solve, "three-circle": cmd_three_circle, "decay": cmd_decay,
    "reproduce": cmd_reproduce,
}


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with options; flags override it")
    common.add_argument("--preset", choices=sorted(profiles.PRESETS))
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--svg", action="store_true", help="also write SVG plots")
    g = common.add_argument_group("gluing parameters")
    g.add_argument("--regime", choices=[r.value for r in profiles.Regime])
    for name in ("epsilon", "eta", "rho", "zeta", "kappa", "K", "r_max"):
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=float)
    g.add_argument("--mollifier-eps", dest="mollifier_eps", type=float)

    parser = _Parser(prog="hornlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("build", parents=[common])
    p = sub.add_parser("certify-curvature", parents=[common])
    p.add_argument("--n-points", dest="n_points", type=int)
    p.add_argument("--metric", choices=["glued", "pure-horn"])
    p = sub.add_parser("check-geodesics", parents=[common])
    p.add_argument("--radius", type=float)
    p.add_argument("--n-pairs", dest="n_pairs", type=int)
    p.add_argument("--n-exact", dest="n_exact", type=int)
    p = sub.add_parser("check-density", parents=[common])
    p.add_argument("--density", choices=sorted(_DENSITIES))
    p.add_argument("--x0", type=float)
    p.add_argument("--x1", type=float)
    p.add_argument("--k", type=float)
    p.add_argument("--t-samples", dest="t_samples", type=int)
    p = sub.add_parser("solve", parents=[common])
    p.add_argument("--metric", choices=["glued", "pure-horn", "flat", "cone"])
    p.add_argument("--slope", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--r-start", dest="r_start", type=float)
    p.add_argument("--coeffs", help='JSON map degree -> {order: coefficient}')
    p = sub.add_parser("three-circle", parents=[common])
    p.add_argument("--R", type=float)
    p.add_argument("--s-exponent", dest="s_exponent", type=float)
    p.add_argument("--r-low", dest="r_low", type=float)
    p.add_argument("--n-radii", dest="n_radii", type=int)
    p.add_argument("--coeffs")
    p = sub.add_parser("decay", parents=[common])
    p.add_argument("--field", choices=["horn", "flat-linear", "cone"])
    p.add_argument("--slope", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--n-radii", dest="n_radii", type=int)
    p.add_argument("--m-max", dest="m_max", type=int)
    p.add_argument("--vio-depth", dest="vio_depth", type=float)
    p = sub.add_parser("reproduce", parents=[common])
    p.add_argument("--n-radii", dest="n_radii", type=int)
    return parser


def _error(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _error("UsageError", str(exc), 1)
    args.config_data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            return _error("ConfigError", str(exc), 1)
        args.config_data = {k.replace("-", "_"): v for k, v in data.items()}
        if args.preset is None and "preset" in args.config_data:
            args.preset = args.config_data["preset"]
        if args.seed == 0 and "seed" in args.config_data:
            args.seed = int(args.config_data["seed"])
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        return _error(type(exc).__name__, str(exc), 1)
    except (CertificationError, DomainError) as exc:
        return _error(type(exc).__name__, str(exc), 2)
    except HornlabError as exc:
        return _error(type(exc).__name__, str(exc), 2)
    except (TypeError, KeyError) as exc:
        return _error("ConfigError", str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())

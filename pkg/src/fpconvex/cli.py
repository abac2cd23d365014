"""Command-line interface: ``fpconvex <subcommand> [--config PATH] [--out DIR] [--seed N] [--jobs N]``.

Exit codes: 0 success, 1 error (bad config, IO, numerical failure),
2 estimate violation or failed convexity certificate, 3 geodesic failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import convexity, counterexample, flow, geodesics, io, means
from .errors import FPConvexError, GeodesicError

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION, EXIT_GEODESIC = 0, 1, 2, 3

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_STATE = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["uniform", "gaussian-bump", "explicit", "random", "dirichlet"]},
        "values": {"type": "array", "items": _POSITIVE, "minItems": 2},
        "normalize": {"type": "boolean"},
        "center": {"type": "number"},
        "width": _POSITIVE,
        "floor": {"type": "number", "minimum": 0},
        "amplitude": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "modes": {"type": "integer", "minimum": 1},
        "concentration": _POSITIVE,
    },
    "required": ["kind"],
    "additionalProperties": False,
}
_SYSTEM = {
    "n": {"type": "integer", "minimum": 1},
    "potential": {
        "type": "object",
        "properties": {"kind": {"enum": ["zero", "quadratic"]}, "gamma": {"type": "number", "minimum": 0}},
        "required": ["kind"],
        "additionalProperties": False,
    },
    "phi": {
        "type": "object",
        "properties": {"kind": {"enum": ["identity", "power"]}, "alpha": _POSITIVE},
        "required": ["kind"],
        "additionalProperties": False,
    },
    "density": {
        "type": "object",
        "properties": {"kind": {"enum": ["log", "power"]}, "alpha": {"type": "number", "exclusiveMinimum": 1}},
        "required": ["kind"],
        "additionalProperties": False,
    },
}


def _schema(extra):
    return {"type": "object", "properties": {**_SYSTEM, **extra}, "additionalProperties": False}


SCHEMAS = {
    "simulate": _schema({"rho0": _STATE, "t_end": _POSITIVE, "tol": _POSITIVE,
                         "samples": {"type": "integer", "minimum": 2}}),
    "convexity": _schema({
        "state": _STATE,
        "lambda": {"oneOf": [{"type": "number"}, {"enum": ["lambda_h", "zero"]}]},
        "simulation": {
            "type": "object",
            "properties": {"rho0": _STATE, "t_end": _POSITIVE, "samples": {"type": "integer", "minimum": 2},
                           "tol": _POSITIVE},
            "additionalProperties": False,
        },
    }),
    "geodesic": _schema({
        "rho0": _STATE, "rho1": _STATE, "tol": {"type": "number", "minimum": 0},
        "samples": {"type": "integer", "minimum": 3},
        "lambda": {"oneOf": [{"type": "number"}, {"enum": ["lambda_h", "zero"]}]},
    }),
    "lambda": _schema({
        "n_values": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "state": _STATE,
    }),
    "counterexample": {
        "type": "object",
        "properties": {"max_draws": {"type": "integer", "minimum": 1}, "boost": {"type": "number", "minimum": 1}},
        "additionalProperties": False,
    },
    "verify-means": {
        "type": "object",
        "properties": {
            "samples": {"type": "integer", "minimum": 1},
            "alphas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 1, "maximum": 2}},
            "tol": _POSITIVE,
        },
        "additionalProperties": False,
    },
}


class ConfigError(FPConvexError):
    pass


def validate(command, config):
    validator = jsonschema.Draft7Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            path = "config" + "".join(f"[{p!r}]" if isinstance(p, str) else f"[{p}]" for p in e.absolute_path)
            lines.append(f"{path}: {e.message}")
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))
    return config


# ---------------------------------------------------------------------------
# builders


def build_system(config, default_n=16, min_intervals=2) -> flow.FlowSystem:
    n = config.get("n", default_n)
    pot = config.get("potential", {"kind": "zero"})
    gamma = float(pot.get("gamma", 0.0)) if pot["kind"] == "quadratic" else 0.0
    phi_cfg = config.get("phi", {"kind": "identity"})
    if phi_cfg["kind"] == "power":
        if "alpha" not in phi_cfg:
            raise ConfigError("config['phi']: power nonlinearity needs 'alpha'")
        phi = flow.Nonlinearity.power(phi_cfg["alpha"])
    else:
        phi = flow.Nonlinearity.identity()
    dens_cfg = config.get("density", {"kind": "log"})
    if dens_cfg["kind"] == "power":
        if "alpha" not in dens_cfg:
            raise ConfigError("config['density']: power density needs 'alpha'")
        density = flow.PowerDensity(dens_cfg["alpha"])
    else:
        density = flow.LogDensity()
    if not phi.is_identity and not isinstance(density, flow.LogDensity):
        raise ConfigError("config['density']: nonlinear phi is only supported with the log density")
    grid = flow.markov.build_grid(n, min_intervals=min_intervals)
    potential = flow.markov.Potential.quadratic(gamma) if gamma > 0 else flow.markov.Potential.zero()
    weights = flow.markov.build_weights(grid, potential)
    return flow.FlowSystem(grid, weights, phi, density)


def build_state(spec, n, rng, where="state"):
    kind = spec["kind"]
    if kind == "uniform":
        return flow.uniform_state(n)
    if kind == "gaussian-bump":
        return flow.gaussian_bump(n, spec.get("center", 0.5), spec.get("width", 0.15), spec.get("floor", 0.2))
    if kind == "random":
        return flow.smooth_random_state(n, rng, spec.get("modes", 4), spec.get("amplitude", 0.5))
    if kind == "dirichlet":
        return flow.dirichlet_state(n, rng, spec.get("concentration", 1.0))
    values = spec.get("values")
    if values is None:
        raise ConfigError(f"config[{where!r}]: explicit state needs 'values'")
    r = np.asarray(values, dtype=float)
    if r.size != n + 1:
        raise ConfigError(f"config[{where!r}]['values']: expected {n + 1} entries, got {r.size}")
    if spec.get("normalize", False):
        r = r / r.sum()
    elif abs(r.sum() - 1.0) > 1e-9:
        raise ConfigError(f"config[{where!r}]['values']: entries must sum to 1 (or set normalize)")
    return r


def _pmap(fun, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fun, items))
    return [fun(x) for x in items]


def _resolve_lambda(sys_, rho, setting):
    if isinstance(setting, (int, float)):
        return float(setting)
    if setting == "lambda_h" or (setting is None and sys_.gamma > 0):
        return convexity.lambda_h(sys_, rho)
    return 0.0


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(config, args, rng):
    sys_ = build_system(config)
    rho0 = build_state(config.get("rho0", {"kind": "gaussian-bump"}), sys_.n, rng, "rho0")
    t_end = config.get("t_end", 0.5)
    samples = config.get("samples", 51)
    traj = flow.integrate(sys_, rho0, t_end, config.get("tol", 1e-9), np.linspace(0, t_end, samples))
    ent, lo, hi, gn = traj.entropy, traj.min_rho, traj.max_rho, traj.grad_norm
    header = ["t"] + [f"rho_{i}" for i in range(sys_.n + 1)] + ["entropy", "min_rho", "max_rho", "grad_norm"]
    rows = [[traj.t[k], *traj.rho[k], ent[k], lo[k], hi[k], gn[k]] for k in range(len(traj))]
    out = Path(args.out)
    io.write_csv(out / "simulate.csv", header, rows)
    report = {"system": sys_.describe(), "t_end": t_end, "samples": samples,
              "mass_drift": float(np.abs(traj.mass - traj.mass[0]).max()),
              "entropy_monotone": bool(np.all(np.diff(ent) <= 1e-12 * max(1.0, abs(ent[0]))))}
    code = EXIT_OK
    if sys_.potential.is_zero:
        est = flow.apriori_monitor(traj)
        report["estimates"] = est.as_dict()
        if not est.passed:
            code = EXIT_VIOLATION
    else:
        report["estimates"] = None
    io.write_json(out / "simulate.json", report)
    return code


def _certify_task(task):
    config, rho, setting = task
    sys_ = build_system(config)
    lam = _resolve_lambda(sys_, rho, setting)
    rep = convexity.certify_state(sys_, rho, lam)
    return rep.as_dict()


def cmd_convexity(config, args, rng):
    sys_ = build_system(config)
    setting = config.get("lambda")
    if "simulation" in config:
        sim = config["simulation"]
        rho0 = build_state(sim.get("rho0", {"kind": "gaussian-bump"}), sys_.n, rng, "simulation.rho0")
        t_end = sim.get("t_end", 0.5)
        times = np.linspace(0, t_end, sim.get("samples", 5))
        traj = flow.integrate(sys_, rho0, t_end, sim.get("tol", 1e-9), times)
        states, stamps = list(traj.rho), [float(t) for t in traj.t]
    else:
        states = [build_state(config.get("state", {"kind": "random"}), sys_.n, rng)]
        stamps = [None]
    results = _pmap(_certify_task, [(config, r, setting) for r in states], args.jobs)
    entries = []
    for t, r, res in zip(stamps, states, results):
        entry = {"t": t} if t is not None else {}
        entry["state"] = [float(x) for x in r]
        entry.update(res)
        entries.append(entry)
    report = {"system": sys_.describe(), "reports": entries,
              "all_certified": all(e["certificate"] != "NotPSD" for e in entries)}
    io.write_json(Path(args.out) / "convexity.json", report)
    return EXIT_OK if report["all_certified"] else EXIT_VIOLATION


def cmd_geodesic(config, args, rng):
    sys_ = build_system(config, default_n=8, min_intervals=1)
    rho0 = build_state(config.get("rho0", {"kind": "random"}), sys_.n, rng, "rho0")
    rho1 = build_state(config.get("rho1", {"kind": "random"}), sys_.n, rng, "rho1")
    tol = config.get("tol", 1e-8)
    samples = config.get("samples", 9)
    out = Path(args.out)
    steps = 128 * (samples - 1) // int(np.gcd(128, samples - 1))
    try:
        path = geodesics.shoot(sys_, rho0, rho1, tol, samples=samples, steps=steps)
    except GeodesicError as exc:
        io.write_json(out / "geodesic.json", {"system": sys_.describe(), "error": str(exc),
                                              "residuals": exc.residuals})
        print(f"geodesic failure: {exc}", file=sys.stderr)
        return EXIT_GEODESIC
    setting = config.get("lambda")
    if setting == "lambda_h" or (setting is None and sys_.gamma > 0):
        lam = min(convexity.lambda_h(sys_, r) for r in path.rho)
    else:
        lam = float(setting) if isinstance(setting, (int, float)) else 0.0
    if path.action > 0:
        check = geodesics.verify_displacement_convexity(sys_, rho0, rho1, lam, path=path).as_dict()
    else:
        check = {"passed": True, "lambda": lam, "W": 0.0}
    sp = path.speeds(sys_)
    ent = [float(np.sum(flow.node_entropy(sys_, r))) for r in path.rho]
    m = sys_.n + 1
    header = (["t"] + [f"rho_{i}" for i in range(m)] + [f"psi_{i}" for i in range(m)]
              + ["speed", "entropy"])
    rows = [[path.t[k], *path.rho[k], *path.psi[k], sp[k], ent[k]] for k in range(len(path.t))]
    io.write_csv(out / "geodesic.csv", header, rows)
    report = {"system": sys_.describe(), "W": path.distance, "action": path.action,
              "residual": path.residual, "method": path.method, "convexity_check": check}
    io.write_json(out / "geodesic.json", report)
    return EXIT_OK if check["passed"] else EXIT_VIOLATION


def cmd_lambda(config, args, rng):
    gamma = config.get("gamma", config.get("potential", {}).get("gamma", 1.0))
    ns = config.get("n_values", [config.get("n", 10)])
    rows = []
    phi_name = None
    for n in ns:
        cfg = dict(config, n=n, potential={"kind": "quadratic", "gamma": gamma})
        cfg.pop("n_values", None)
        cfg.pop("gamma", None)
        cfg.pop("state", None)
        sys_ = build_system(cfg)
        rho = build_state(config.get("state", {"kind": "uniform"}), n, rng)
        lam = convexity.lambda_h(sys_, rho)
        phi_name = sys_.phi.describe()
        rows.append({"n": n, "h": sys_.h, "gamma": gamma, "lambda_h": lam,
                     "identity_value": convexity.lambda_h_identity(gamma, sys_.h),
                     "gap_to_gamma": gamma - lam})
    io.write_json(Path(args.out) / "lambda.json", {"phi": phi_name, "rows": rows})
    return EXIT_OK


def cmd_counterexample(config, args, rng):
    comparison = counterexample.compare_with_reference()
    wit = counterexample.find_witness(args.seed, config.get("max_draws", 100_000), boost=config.get("boost", 8.0))
    report = {"expansion": comparison.as_dict()}
    code = EXIT_OK
    if wit is None:
        report["witness"] = None
    else:
        T = counterexample.em_tilde_m(wit.rho)
        cert = convexity.certify(T, counterexample.em_edge_weights(wit.rho), 0.0)
        report["witness"] = {"rho": wit.rho, "minor": wit.minor, "draws": wit.draws,
                             "certificate": cert.as_dict()}
        if not cert.certified:
            code = EXIT_VIOLATION
    io.write_json(Path(args.out) / "counterexample.json", report)
    return code


def _concavity_task(task):
    name, alpha, samples, seed = task
    m = means.LogarithmicMean() if alpha is None else flow.PowerDensity(alpha).mean()
    return means.check_concavity(m, samples, np.random.default_rng(seed)).as_dict()


def cmd_verify_means(config, args, rng):
    samples = config.get("samples", 10_000)
    tol = config.get("tol", 1e-6)
    s, t, a, b = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), size=(4, samples)))
    lemma = means.check_lemma_a1(s, t, a, b, tol=tol).as_dict()
    alphas = config.get("alphas", [1.5, 2.0])
    seeds = rng.integers(0, 2**63, size=len(alphas) + 1)
    tasks = [("log", None, samples, int(seeds[0]))] + [
        (f"power {al}", al, samples, int(sd)) for al, sd in zip(alphas, seeds[1:])]
    conc = _pmap(_concavity_task, tasks, args.jobs)
    passed = lemma["passed"] and all(c["passed"] for c in conc)
    io.write_json(Path(args.out) / "verify-means.json",
                  {"passed": passed, "lemma": lemma, "concavity": conc})
    return EXIT_OK if passed else EXIT_VIOLATION


COMMANDS = {
    "simulate": cmd_simulate,
    "convexity": cmd_convexity,
    "geodesic": cmd_geodesic,
    "lambda": cmd_lambda,
    "counterexample": cmd_counterexample,
    "verify-means": cmd_verify_means,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fpconvex", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--out", type=str, default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0, help="seed for all randomness")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_ERROR
    try:
        config = io.read_json(args.config) if args.config else {}
        if not isinstance(config, dict):
            raise ConfigError("config must be a JSON object")
        validate(args.command, config)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(args.seed)
        return COMMANDS[args.command](config, args, rng)
    except (OSError, ValueError, FPConvexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: simulate, vi, certify, gain-search, oracle-check.

Configuration comes from an optional JSON file plus flags (flags win);
the ``DUALCTL_SEED`` environment variable overrides the configured seed.
Exit codes: 0 on success with all asserted properties holding, 1 when a
property or certificate violation is the finding, 2 on invalid
configuration or arguments.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import certify, oracle, sim, vi
from .control import POLICY_NAMES, make_policy
from .errors import DivergenceError, DualctlError, PolicyFaultError
from .istate import update_magnitude
from .system import make_integrator

__all__ = ["main", "load_config", "DEFAULT_CONFIG"]


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG = {
    "gamma": 4.0,
    "seed": 0,
    "x0": 1.0,
    "horizon": 200,
    "certificate": {"p": 1.7, "q": 7.0, "k": 0.7},
    "policy": {"name": "ce-sign", "k": 0.7, "tie_sign": 1.0, "gain": 0.0},
    "disturbance": {"kind": "sinusoid", "amplitude": 1.0, "period": 20.0,
                    "bound": 1.0, "path": None},
    "vi": {"y_max": 5.0, "n_y": 51, "delta_max": 50.0, "n_delta": 101,
           "u_scale": 1.5, "n_u": 61, "n_v": 61, "v_max": None,
           "tol": 1e-6, "max_iters": 200, "value_cap": None,
           "delta_spacing": "quadratic"},
    "search": {"budget": 10000, "random_bound": 1.5},
    "output": {"trajectory": None, "grid": None, "report": None,
               "sequence": None},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"configuration key {where} must be an object")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path=None) -> dict:
    """Defaults merged with the JSON file at ``path`` (if any)."""
    config = json.loads(json.dumps(DEFAULT_CONFIG))
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        if not isinstance(user, dict):
            raise ConfigError("config file must contain a JSON object")
        config = _merge(config, user)
    env_seed = os.environ.get("DUALCTL_SEED")
    if env_seed is not None:
        try:
            config["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"DUALCTL_SEED must be an integer, got {env_seed!r}")
    return config


def _apply_flag(config, dotted, value):
    if value is None:
        return
    node = config
    *parents, leaf = dotted.split(".")
    for key in parents:
        node = node[key]
    node[leaf] = value


def _policy_from_config(config):
    p = config["policy"]
    if p["name"] not in POLICY_NAMES:
        raise ConfigError(
            f"policy.name must be one of {POLICY_NAMES}, got {p['name']!r}")
    return make_policy(p["name"], k=float(p["k"]),
                       tie_sign=float(p["tie_sign"]), gain=float(p["gain"]))


def _certificate_from_config(config):
    c = config["certificate"]
    try:
        return certify.Certificate(gamma=float(config["gamma"]),
                                   p=float(c["p"]), q=float(c["q"]),
                                   k=float(c["k"]))
    except ValueError as exc:
        raise ConfigError(f"certificate: {exc}")


def _disturbance_from_config(config):
    d = config["disturbance"]
    return sim.DisturbanceSpec(kind=d["kind"], amplitude=float(d["amplitude"]),
                               period=float(d["period"]), bound=float(d["bound"]),
                               seed=int(config["seed"]), path=d["path"])


def _out_path(args, config, key):
    return args.out if args.out is not None else config["output"][key]


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    config = _build_config(args)
    gamma = float(config["gamma"])
    n = int(config["horizon"])
    x0 = float(config["x0"])
    policy = _policy_from_config(config)
    cert = None if args.no_certificate else _certificate_from_config(config)
    spec = _disturbance_from_config(config)
    if spec.kind == "adversarial":
        settings = sim.SearchSettings(budget=int(config["search"]["budget"]),
                                      seed=int(config["seed"]),
                                      random_bound=float(config["search"]["random_bound"]))
        w_seq, _ = sim.adversarial_search(None, policy, x0, gamma, n, settings)
    else:
        w_seq = sim.generate_disturbance(spec, n)
    try:
        traj = sim.simulate(None, policy, w_seq, x0, gamma, cert=cert,
                            seed=int(config["seed"]))
    except DivergenceError as exc:
        print(f"divergence: {exc}")
        if exc.trajectory is not None and _out_path(args, config, "trajectory"):
            sim.write_trajectory_csv(exc.trajectory,
                                     _out_path(args, config, "trajectory"))
        return 1
    except PolicyFaultError as exc:
        print(f"policy fault: {exc}")
        return 1

    out = _out_path(args, config, "trajectory")
    if out:
        sim.write_trajectory_csv(traj, out)
    gain = sim.empirical_gain(traj)
    peak = sim.peak_prefix_gain(traj)
    violations = []
    if cert is not None:
        bias = cert.q * x0 * x0
        slack = traj.gamma ** 2 * traj.cum_dist + bias - traj.cum_cost
        if slack.min() < -1e-9:
            t_bad = int(np.argmin(slack))
            violations.append(
                f"gain certificate violated at t={t_bad}: slack={slack.min():.3g}")
        dv = np.diff(traj.vbar)
        if len(dv) and dv.max() > 1e-9:
            t_bad = int(np.argmax(dv)) + 1
            violations.append(
                f"certificate bound increased at t={t_bad} by {dv.max():.3g}")
    print(f"simulate policy={policy.name} gamma={gamma:g} N={n} x0={x0:g} "
          f"gain={gain:.6g} peak_prefix_gain={peak:.6g} "
          f"cert={'none' if cert is None else 'ok' if not violations else 'VIOLATED'}")
    for line in violations:
        print(line)
    return 1 if violations else 0


def cmd_vi(args) -> int:
    config = _build_config(args)
    v = config["vi"]
    grid = vi.make_value_grid(
        float(config["gamma"]), y_max=float(v["y_max"]), n_y=int(v["n_y"]),
        delta_max=float(v["delta_max"]), n_delta=int(v["n_delta"]),
        u_scale=float(v["u_scale"]), n_u=int(v["n_u"]), n_v=int(v["n_v"]),
        v_max=None if v["v_max"] is None else float(v["v_max"]),
        value_cap=None if v["value_cap"] is None else float(v["value_cap"]),
        tol=float(v["tol"]), delta_spacing=v["delta_spacing"])
    grid, verdict = vi.value_iterate(grid, max_iters=int(v["max_iters"]))
    out = _out_path(args, config, "grid")
    if out:
        vi.write_grid_csv(grid, out)
    w01 = vi.query_value(grid, (0.0, 0.0), 1.0)
    print(f"vi gamma={config['gamma']:g} verdict={verdict} "
          f"iterations={grid.iteration} residual={grid.residual:.3g} "
          f"boundary_fraction={grid.boundary_fraction:.3g} V(0,1)={w01:.6g}")
    return 0 if verdict == "converged" else 1


def cmd_certify(args) -> int:
    config = _build_config(args)
    cert = _certificate_from_config(config)
    rng = np.random.default_rng(int(config["seed"]))
    n = int(args.samples)
    deltas = rng.uniform(-float(config["vi"]["delta_max"]),
                         float(config["vi"]["delta_max"]), n)
    ys = rng.uniform(0.0, float(config["vi"]["y_max"]), n)
    samples = [((-max(d, 0.0), min(d, 0.0)), y) for d, y in zip(deltas, ys)]
    report = certify.check_dissipation(cert, samples,
                                       cross_check=not args.no_cross_check)
    text = report.format_text()
    out = _out_path(args, config, "report")
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    if not report.satisfied:
        bad = [i + 1 for i, m in enumerate(report.margins) if m <= 0]
        print(f"inequality {', '.join(map(str, bad))} violated")
    return 0 if report.passed else 1


def cmd_gain_search(args) -> int:
    config = _build_config(args)
    gamma = float(config["gamma"])
    x0 = float(config["x0"])
    n = int(config["horizon"])
    policy = _policy_from_config(config)
    settings = sim.SearchSettings(budget=int(config["search"]["budget"]),
                                  seed=int(config["seed"]),
                                  random_bound=float(config["search"]["random_bound"]))
    w_seq, value = sim.adversarial_search(None, policy, x0, gamma, n, settings)
    out = _out_path(args, config, "sequence")
    if out:
        with open(out, "w") as fh:
            for w in w_seq:
                fh.write(format(float(w), ".17g") + "\n")
    print(f"gain-search policy={policy.name} gamma={gamma:g} N={n} x0={x0:g} "
          f"budget={settings.budget} value={value:.6g}")
    if args.no_certificate:
        return 0
    cert = _certificate_from_config(config)
    bound = cert.q * x0 * x0
    if value > bound + 1e-6:
        print(f"certificate bound {bound:g} exceeded by {value - bound:.3g}")
        return 1
    return 0


def cmd_oracle_check(args) -> int:
    config = _build_config(args)
    rng = np.random.default_rng(int(config["seed"]))
    gammas = [float(g) for g in args.gammas.split(",")]
    worst = 0.0
    checked = 0
    failures = 0
    for _ in range(int(args.sequences)):
        t = int(rng.integers(1, int(args.horizon_max) + 1))
        y_seq = rng.uniform(0.0, 3.0, t + 1)
        u_seq = rng.uniform(-2.0, 2.0, t)
        gamma = gammas[int(rng.integers(len(gammas)))]
        state = oracle.InfoState((0.0, 0.0), y_seq[0])
        for step in range(t):
            state = update_magnitude(state, u_seq[step], y_seq[step + 1], gamma)
        expected = oracle.brute_force_r(y_seq, u_seq, gamma)
        err = float(np.max(np.abs(np.asarray(state.r) - expected)))
        worst = max(worst, err)
        checked += 1
        if err >= args.tol:
            failures += 1
    print(f"oracle-check sequences={checked} failures={failures} "
          f"max_error={worst:.3g} tol={args.tol:g}")
    return 0 if failures == 0 else 1


# ---------------------------------------------------------------------------
# argument plumbing


def _build_config(args) -> dict:
    config = load_config(args.config)
    for dotted, attr in [
        ("gamma", "gamma"), ("seed", "seed"), ("x0", "x0"),
        ("horizon", "horizon"),
        ("policy.name", "policy"), ("policy.k", "k"),
        ("policy.tie_sign", "tie_sign"), ("policy.gain", "gain"),
        ("certificate.p", "p"), ("certificate.q", "q"),
        ("certificate.k", "cert_k"),
        ("disturbance.kind", "disturbance"),
        ("disturbance.amplitude", "amplitude"),
        ("disturbance.period", "period"), ("disturbance.bound", "bound"),
        ("disturbance.path", "w_file"),
        ("vi.tol", "tol"), ("vi.max_iters", "max_iters"),
        ("vi.value_cap", "value_cap"), ("vi.n_y", "n_y"),
        ("vi.n_delta", "n_delta"), ("vi.n_u", "n_u"), ("vi.n_v", "n_v"),
        ("vi.y_max", "y_max"), ("vi.delta_max", "delta_max"),
        ("vi.delta_spacing", "delta_spacing"),
        ("search.budget", "budget"),
    ]:
        if hasattr(args, attr):
            _apply_flag(config, dotted, getattr(args, attr))
    return config


def _add_common(parser):
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--gamma", type=float, help="gain bound gamma")
    parser.add_argument("--seed", type=int, help="seed (DUALCTL_SEED overrides config)")
    parser.add_argument("--x0", type=float, help="initial state")
    parser.add_argument("-N", "--horizon", type=int, help="final step index N")
    parser.add_argument("--out", help="output path for this subcommand")


def _add_policy_flags(parser):
    parser.add_argument("--policy", choices=POLICY_NAMES, help="policy name")
    parser.add_argument("--k", type=float, help="sign-controller relative gain")
    parser.add_argument("--tie-sign", dest="tie_sign", type=float,
                        help="sign used when r+ == r-")
    parser.add_argument("--gain", type=float, help="proportional gain")


def _add_certificate_flags(parser):
    parser.add_argument("--p", type=float, help="certificate parameter p")
    parser.add_argument("--q", type=float, help="certificate parameter q")
    parser.add_argument("--cert-k", dest="cert_k", type=float,
                        help="certificate parameter k")
    parser.add_argument("--no-certificate", action="store_true",
                        help="do not attach or check a certificate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualctl",
        description="Minimax dual control of the magnitude-measured integrator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the closed loop and report the gain")
    _add_common(p)
    _add_policy_flags(p)
    _add_certificate_flags(p)
    p.add_argument("--disturbance",
                   choices=["sinusoid", "constant", "random-uniform", "file",
                            "adversarial"],
                   help="disturbance kind")
    p.add_argument("--amplitude", type=float, help="sinusoid/constant amplitude")
    p.add_argument("--period", type=float, help="sinusoid period")
    p.add_argument("--bound", type=float, help="random-uniform bound")
    p.add_argument("--w-file", dest="w_file", help="disturbance file (one real per line)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("vi", help="run grid value iteration")
    _add_common(p)
    p.add_argument("--tol", type=float, help="convergence threshold")
    p.add_argument("--max-iters", dest="max_iters", type=int, help="sweep cap")
    p.add_argument("--value-cap", dest="value_cap", type=float,
                   help="divergence threshold")
    p.add_argument("--n-y", dest="n_y", type=int, help="y grid points")
    p.add_argument("--n-delta", dest="n_delta", type=int, help="delta grid points")
    p.add_argument("--n-u", dest="n_u", type=int, help="u grid points")
    p.add_argument("--n-v", dest="n_v", type=int, help="v grid points")
    p.add_argument("--y-max", dest="y_max", type=float, help="y grid limit")
    p.add_argument("--delta-max", dest="delta_max", type=float,
                   help="delta grid limit")
    p.add_argument("--delta-spacing", dest="delta_spacing",
                   choices=["quadratic", "uniform"], help="delta grid spacing")
    p.set_defaults(func=cmd_vi)

    p = sub.add_parser("certify", help="check the certificate inequalities and dissipation")
    _add_common(p)
    _add_certificate_flags(p)
    p.add_argument("--samples", type=int, default=10000,
                   help="random (delta, y) samples for the dissipation check")
    p.add_argument("--no-cross-check", dest="no_cross_check",
                   action="store_true",
                   help="skip the dense numerical cross-check")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("gain-search", help="adversarial disturbance search")
    _add_common(p)
    _add_policy_flags(p)
    _add_certificate_flags(p)
    p.add_argument("--budget", type=int, help="candidate budget")
    p.set_defaults(func=cmd_gain_search)

    p = sub.add_parser("oracle-check",
                       help="recursion vs brute-force equivalence suite")
    _add_common(p)
    p.add_argument("--sequences", type=int, default=1000,
                   help="number of random (y, u) sequences")
    p.add_argument("--horizon-max", dest="horizon_max", type=int, default=10,
                   help="maximum horizon per sequence")
    p.add_argument("--gammas", default="1,2,4", help="comma-separated gammas")
    p.add_argument("--tol", type=float, default=1e-9, help="agreement tolerance")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DualctlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

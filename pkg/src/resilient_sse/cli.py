"""Command-line front end.

Exit codes: 0 success, 1 argument/validation problem, 2 numerical or
solver failure.  Results are serialized to stdout or, with --out, written
atomically (nothing is left behind on failure).  Every stochastic
subcommand is fully determined by its --seed.

A JSON config file may supply any long-option value (keys use underscores,
e.g. {"true_rate": 0.9}); explicit command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .analysis import rip_constant
from .errors import EmptyEstimate, EstimationError
from .estimation import decode, weighted_observer
from .experiments import (
    STRATEGIES,
    ScenarioAttack,
    ScenarioConfig,
    SweepConfig,
    load_surrogate,
    run_scenario,
    sweep,
)
from .fdia import random_support, synthesize_fdia
from .lti import build_horizon, load_system_csv, load_system_json
from .pruning import (
    SupportIndicator,
    SupportPrior,
    ppv,
    prune_product,
    prune_quantile,
    sample_prior,
)


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _write_output(text: str, out_path) -> None:
    if out_path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out_path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_result_")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def _parse_indices(text):
    text = text.strip()
    if not text:
        return []
    return [int(tok) for tok in text.split(",")]


def _parse_floats(text):
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _load_system(args):
    if getattr(args, "system", None):
        sys_, x0 = load_system_json(args.system)
        return sys_, x0
    if getattr(args, "system_a", None) and getattr(args, "system_c", None):
        return load_system_csv(args.system_a, args.system_c), None
    raise ValueError("provide --system (JSON) or both --system-a and --system-c (CSV)")


def _read_vector(path) -> np.ndarray:
    if str(path).endswith(".json"):
        with open(path) as fh:
            data = json.load(fh)
        return np.asarray(data, dtype=float).reshape(-1)
    from .lti import read_matrix_csv

    return read_matrix_csv(path).reshape(-1)


def _merge_config(args, parser_defaults):
    """Apply config-file values for options the command line left alone."""
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config file must hold a JSON object")
    for key, value in doc.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ValueError(f"config key {key!r} is not an option of this subcommand")
        if getattr(args, attr) == parser_defaults.get(attr):
            setattr(args, attr, value)
    return args


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_attack(args) -> str:
    _require(args.T >= 1, "T must be >= 1")
    _require(args.epsilon >= 0, "epsilon must be nonnegative")
    _require(args.cap_factor > 0, "cap-factor must be positive")
    sys_, _ = _load_system(args)
    model = build_horizon(sys_, args.T)
    if args.support is not None:
        support = _parse_indices(args.support)
    else:
        _require(args.fraction is not None, "provide --support or --fraction")
        _require(0 <= args.fraction < 1, "fraction must lie in [0, 1)")
        rng = np.random.default_rng(args.seed)
        support = random_support(model.rows, args.fraction, rng)
    plan = synthesize_fdia(model, support, args.epsilon, magnitude_cap_factor=args.cap_factor)
    return _json_dumps(
        {
            "support": [int(i) for i in plan.support],
            "epsilon": plan.epsilon,
            "z_e": list(plan.z_e),
            "e_T": list(plan.e_T),
            "alpha_guarantee": plan.alpha_guarantee,
            "feasible": plan.feasible,
            "unbounded": plan.unbounded,
        }
    )


def _cmd_estimate(args) -> str:
    _require(args.T >= 1, "T must be >= 1")
    _require(0 <= args.omega <= 1, "omega must lie in [0, 1]")
    if args.epsilon is not None:
        _require(args.epsilon > 0, "epsilon must be positive")
    sys_, _ = _load_system(args)
    model = build_horizon(sys_, args.T)
    y_T = _read_vector(args.y)
    x_true = _read_vector(args.x_true) if args.x_true else None
    if args.safe is not None:
        trusted = _parse_indices(args.safe)
        est = weighted_observer(model, y_T, trusted, args.omega, epsilon=args.epsilon, x_true=x_true)
    else:
        est = decode(model, y_T, epsilon=args.epsilon, x_true=x_true)
    return _json_dumps(
        {
            "x_hat": list(est.x_hat),
            "objective": est.objective,
            "residual_l1": est.residual_l1,
            "detector_flag": est.detector_flag,
            "error_l2": est.error_l2,
        }
    )


def _cmd_prune(args) -> str:
    _require(0 < args.eta < 1, "eta must lie in (0,1)")
    _require(args.strategy in ("product", "quantile"), "strategy must be product or quantile")
    with open(args.input) as fh:
        doc = json.load(fh)
    _require("p" in doc, "prune input needs a confidence vector 'p'")
    p = np.asarray(doc["p"], dtype=float)
    q = None
    if "q_hat" in doc:
        prior = SupportPrior(q_hat=np.asarray(doc["q_hat"], dtype=int), p=p)
        if "q" in doc:
            q = SupportIndicator(q=np.asarray(doc["q"], dtype=int))
    elif "q" in doc:
        _require("seed" in doc, "sampling an estimate from 'q' needs a 'seed'")
        q = SupportIndicator(q=np.asarray(doc["q"], dtype=int))
        prior = sample_prior(q, p, np.random.default_rng(int(doc["seed"])))
    else:
        raise ValueError("prune input needs 'q_hat' or ('q', 'seed')")

    if args.strategy == "product":
        pruned = prune_product(prior, args.eta)
    else:
        pruned = prune_quantile(prior, args.eta)
    precision, precision_pruned = None, None
    if q is not None:
        try:
            precision = ppv(q, prior)
        except EmptyEstimate:
            precision = None
        if pruned.safe_set.size:
            precision_pruned = float(np.mean(q.q[pruned.safe_set] == 1))
    return _json_dumps(
        {
            "offline_set": [int(i) for i in pruned.offline_set],
            "pruned_set": [int(i) for i in pruned.safe_set],
            "l_eta": pruned.l_eta,
            "ppv": precision,
            "ppv_pruned": precision_pruned,
            "strategy": pruned.strategy,
        }
    )


def _cmd_rip(args) -> str:
    _require(args.T >= 1, "T must be >= 1")
    _require(args.S >= 1, "S must be >= 1")
    _require(args.budget >= 1, "budget must be >= 1")
    sys_, _ = _load_system(args)
    model = build_horizon(sys_, args.T)
    est = rip_constant(model, args.S, args.budget, rng=np.random.default_rng(args.seed))
    return _json_dumps(
        {
            "S": est.S,
            "delta_S": est.delta_S,
            "exact": est.exact,
            "supports_checked": est.n_supports_checked,
        }
    )


def _cmd_sweep(args) -> str:
    cfg = SweepConfig(
        m=args.m,
        n=args.n,
        T=args.T,
        attack_grid=tuple(_parse_floats(args.grid)),
        trials=args.trials,
        true_rate=args.true_rate,
        jitter=args.jitter,
        eta=args.eta,
        omega=args.omega,
        epsilon_policy=args.epsilon_policy,
        strategies=tuple(args.strategies.split(",")),
        master_seed=args.seed,
        spectral_radius=args.spectral_radius,
        workers=args.workers,
    )
    result = sweep(cfg)
    return result.to_json() if args.format == "json" else result.to_csv()


def _cmd_scenario(args) -> str:
    if args.system or (args.system_a and args.system_c):
        sys_, x0 = _load_system(args)
        _require(x0 is not None, "scenario needs an x0 entry in the system file")
    else:
        sys_, x0 = load_surrogate()
    support = tuple(_parse_indices(args.attack_support)) if args.attack_support else None
    attack = ScenarioAttack(
        fraction=args.attack_fraction,
        magnitude=args.attack_magnitude,
        support=support,
        seed=args.seed,
    )
    _require(0 <= attack.fraction < 1, "attack-fraction must lie in [0, 1)")
    scenario = ScenarioConfig(
        steps=args.steps,
        T=args.T,
        true_rate=args.true_rate,
        jitter=args.jitter,
        eta=args.eta,
        omega=args.omega,
        prior_mode=args.prior_mode,
        prior_seed=args.prior_seed,
    )
    _require(0 < scenario.eta < 1, "eta must lie in (0,1)")
    _require(0 <= scenario.omega <= 1, "omega must lie in [0, 1]")
    observers = tuple(args.observers.split(","))
    metrics = run_scenario(sys_, x0, attack=attack, scenario=scenario, observers=observers)
    return metrics.to_json()


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------

def _add_system_flags(p):
    p.add_argument("--system", help="system JSON file with A, C and optional x0")
    p.add_argument("--system-a", help="CSV file holding A (with --system-c)")
    p.add_argument("--system-c", help="CSV file holding C (with --system-a)")
    p.add_argument("--config", help="JSON file of option defaults; flags win")
    p.add_argument("--out", help="write the result here instead of stdout")


def build_parser():
    parser = _Parser(prog="resilient-sse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    p = subparsers["attack"] = sub.add_parser("attack", help="synthesize a stealth attack")
    _add_system_flags(p)
    p.add_argument("--T", type=int, default=1)
    p.add_argument("--epsilon", type=float, required=True, help="stealth budget")
    p.add_argument("--support", help="comma-separated 0-based attacked row indices")
    p.add_argument("--fraction", type=float, help="random support of this fraction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap-factor", type=float, default=1e3)
    p.set_defaults(handler=_cmd_attack)

    p = subparsers["estimate"] = sub.add_parser("estimate", help="decode a stacked measurement window")
    _add_system_flags(p)
    p.add_argument("--T", type=int, default=1)
    p.add_argument("--y", required=True, help="stacked window (JSON list or CSV)")
    p.add_argument("--omega", type=float, default=0.01)
    p.add_argument("--safe", help="trusted rows; omitted = plain l1 decoding")
    p.add_argument("--epsilon", type=float, help="detector threshold")
    p.add_argument("--x-true", help="ground-truth state for the error field")
    p.set_defaults(handler=_cmd_estimate)

    p = subparsers["prune"] = sub.add_parser("prune", help="prune an uncertain safe-row prior")
    p.add_argument("--input", required=True, help="JSON with p and q_hat, or p, q, seed")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--strategy", default="product", choices=("product", "quantile"))
    p.add_argument("--config", help="JSON file of option defaults; flags win")
    p.add_argument("--out")
    p.set_defaults(handler=_cmd_prune)

    p = subparsers["rip"] = sub.add_parser("rip", help="isometry constant of the null-space basis")
    _add_system_flags(p)
    p.add_argument("--T", type=int, default=1)
    p.add_argument("--S", type=int, required=True)
    p.add_argument("--budget", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_rip)

    p = subparsers["sweep"] = sub.add_parser("sweep", help="Monte Carlo attack-percentage sweep")
    p.add_argument("--m", type=int, default=20, help="sensor count")
    p.add_argument("--n", type=int, default=10, help="state dimension")
    p.add_argument("--T", type=int, default=1, help="window length")
    p.add_argument("--grid", default="0.0,0.2,0.4,0.6", help="attack fractions, comma-separated")
    p.add_argument("--trials", type=int, default=100, help="paired trials per grid point")
    p.add_argument("--true-rate", type=float, default=0.6, help="oracle confidence level")
    p.add_argument("--jitter", type=float, default=0.1, help="confidence jitter half-width")
    p.add_argument("--eta", type=float, default=0.9, help="pruning reliability level")
    p.add_argument("--omega", type=float, default=0.01, help="weight on untrusted rows")
    p.add_argument("--epsilon-policy", default="rel:0.01", help="'rel:<f>' of ||y*||_1 or 'abs:<f>'")
    p.add_argument("--strategies", default=",".join(STRATEGIES),
                   help=f"comma-separated subset of {','.join(STRATEGIES)}")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--spectral-radius", type=float, default=0.95)
    p.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("--config", help="JSON file of option defaults; flags win")
    p.add_argument("--out", help="write the result here instead of stdout")
    p.set_defaults(handler=_cmd_sweep)

    p = subparsers["scenario"] = sub.add_parser("scenario", help="dynamic observer comparison")
    _add_system_flags(p)
    p.add_argument("--steps", type=int, default=60, help="trajectory length")
    p.add_argument("--T", type=int, default=3, help="moving-window length")
    p.add_argument("--attack-fraction", type=float, default=0.3,
                   help="fraction of sensors under persistent attack")
    p.add_argument("--attack-magnitude", type=float, default=3.0)
    p.add_argument("--attack-support", help="explicit attacked sensors (else: highest-gain)")
    p.add_argument("--seed", type=int, default=0, help="attack value seed")
    p.add_argument("--prior-seed", type=int, default=1, help="localization prior seed")
    p.add_argument("--true-rate", type=float, default=0.95, help="oracle confidence level")
    p.add_argument("--jitter", type=float, default=0.04)
    p.add_argument("--eta", type=float, default=0.7, help="pruning reliability level")
    p.add_argument("--omega", type=float, default=0.01, help="weight on untrusted rows")
    p.add_argument("--prior-mode", default="static", choices=("static", "per_window"),
                   help="sample the prior once, or afresh per window")
    p.add_argument("--observers", default="LO,L1O,WL1P")
    p.set_defaults(handler=_cmd_scenario)

    return parser, subparsers


def parse_and_dispatch(argv=None) -> int:
    parser, subparsers = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    defaults = {a.dest: a.default for a in subparsers[args.command]._actions}
    try:
        args = _merge_config(args, defaults)
        text = args.handler(args)
        _write_output(text, getattr(args, "out", None))
        return 0
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        return _fail(str(exc), 1)
    except EstimationError as exc:
        return _fail(str(exc), 2)


def main(argv=None) -> int:
    return parse_and_dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())

import logging
import sys
from argparse import ArgumentParser
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from ChainModel import ChainModel, Policy, SystemParams
from constants import (DEFAULT_MC_SAMPLES, DEFAULT_SEED, DEFAULT_SLOTS, DEFAULT_WARMUP_SLOTS, EXIT_NUMERICAL, EXIT_OK,
                       METRIC_FAILURE_PROB, METRIC_THROUGHPUT, METRICS, REFERENCE_PARAMS, SELF_CHECK_TOL, SOLVERS,
                       SWEEP_VARIABLES, VALIDATION_SIGMAS)
from OccupancyLP import OccupancyLP
from PhyCalculator import LinkBudget, PhyCalculator
from PolicyOptimiser import ConstraintSpec
from Simulator import SimConfig, Simulator
from TheoremChecker import TheoremChecker
from utils import (ArqPolicyError, ConfigurationError, NumericalError, exit_code_for, flatten_row, load_json_config,
                   write_csv, write_json)

logger = logging.getLogger(__name__)

"""
    Command-line driver. Every subcommand reads an optional JSON experiment config (see the
    experiments/ directory) and lets the flags override it:

    phy       failure probabilities and increasing factors of a link budget
    analyze   stationary distribution and metrics of an explicit policy
    optimize  optimal policy under a primary loss constraint
    sweep     optimal policies along one parameter, one CSV/JSON row per point
    simulate  slotted Monte Carlo run of a policy, optionally checked against the model
    verify    randomised checks of the monotonicity and exchange properties of the chain

    Results go to stdout or --out, logs to stderr. Exit codes: 0 ok, 2 usage or configuration,
    3 infeasible, 4 internal numerical failure.
"""

FORMATS = ("json", "csv")


@dataclass
class ExperimentConfig:
    params: Optional[SystemParams]
    constraint: ConstraintSpec
    solver: str = "lp"
    policy: Optional[Policy] = None
    sweep: Optional[dict] = None
    sim: Optional[SimConfig] = None
    out: Optional[str] = None
    fmt: str = "json"
    link_budget: Optional[dict] = field(default=None, repr=False)
    allow_general: bool = False
    compare_horizontal: bool = False
    workers: int = 1
    seed: int = DEFAULT_SEED
    dump_lp: Optional[str] = None

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"ERROR: unknown solver {self.solver}, expected one of {SOLVERS}. Check inputs!")
        if self.fmt not in FORMATS:
            raise ConfigurationError(f"ERROR: unknown output format {self.fmt}. Check inputs!")
        if self.workers < 1:
            raise ConfigurationError("ERROR: --workers must be >= 1. Check inputs!")
        if self.params is not None and self.policy is not None and len(self.policy) != self.params.t_max + 1:
            raise ConfigurationError(
                f"ERROR: policy has {len(self.policy)} entries, expected t_max+1={self.params.t_max + 1}. Check inputs!")

    def require_params(self):
        if self.params is None:
            raise ConfigurationError("ERROR: no system parameters, give `params` or `link_budget` in the config")
        return self.params

    def require_policy(self):
        if self.policy is None:
            raise ConfigurationError("ERROR: no policy, pass --policy or give `policy` in the config")
        return self.policy


def parse_policy(value):
    if value is None:
        return None
    if isinstance(value, str):
        try:
            value = [float(v) for v in value.split(",")]
        except ValueError:
            raise ConfigurationError(f"ERROR: malformed policy {value}, expected comma separated numbers")
    try:
        kappa = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"ERROR: malformed policy {value!r}, expected a list of numbers")
    return Policy(kappa)


def _link_budget_params(config, seed):
    budget = LinkBudget.from_dict(config["link_budget"])
    if "alpha" not in config or "t_max" not in config:
        raise ConfigurationError("ERROR: a link budget config also needs `alpha` and `t_max`. Check inputs!")
    phy = PhyCalculator(budget, fading=config.get("fading", "rayleigh"),
                        mc_samples=config.get("mc_samples", DEFAULT_MC_SAMPLES), seed=seed)
    try:
        alpha = float(config["alpha"])
    except (TypeError, ValueError):
        raise ConfigurationError(f"ERROR: alpha={config['alpha']!r} is not a number. Check inputs!")
    return phy.system_params(alpha=alpha, t_max=_integer(config["t_max"], "t_max"))


def _mapping(config, key):
    block = config.get(key, {})
    if not isinstance(block, dict):
        raise ConfigurationError(f"ERROR: `{key}` must be a JSON object, got {type(block).__name__}. Check inputs!")
    return dict(block)


def _integer(value, name):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"ERROR: {name}={value!r} is not an integer. Check inputs!")


def build_config(config, args):
    if "params" in config and "link_budget" in config:
        raise ConfigurationError("ERROR: give exactly one of `params` and `link_budget`. Check inputs!")

    sim_block = _mapping(config, "sim")
    seed = args.seed
    if seed is None:
        seed = _integer(sim_block.get("seed", config.get("seed", DEFAULT_SEED)), "seed")

    params = None
    if "params" in config:
        params = SystemParams.from_dict(config["params"])
    elif "link_budget" in config and args.command != "phy":
        params = _link_budget_params(config, seed)

    constraint = _mapping(config, "constraint")
    if args.metric is not None:
        constraint["metric"] = args.metric
    if args.epsilon is not None:
        constraint["epsilon"] = args.epsilon

    sim = None
    if sim_block or args.slots is not None or args.command == "simulate":
        sim = SimConfig(
            n_slots=args.slots if args.slots is not None else _integer(sim_block.get("n_slots", DEFAULT_SLOTS),
                                                                        "n_slots"),
            seed=seed,
            warmup_slots=_integer(sim_block.get("warmup_slots", DEFAULT_WARMUP_SLOTS), "warmup_slots"),
        )

    output = _mapping(config, "output")
    return ExperimentConfig(
        params=params,
        constraint=ConstraintSpec.from_dict(constraint),
        solver=args.solver or config.get("solver", "lp"),
        policy=parse_policy(args.policy if args.policy is not None else config.get("policy")),
        sweep=config.get("sweep"),
        sim=sim,
        out=args.out or output.get("path"),
        fmt=args.format or output.get("format", "csv" if args.command == "sweep" else "json"),
        link_budget=config.get("link_budget"),
        allow_general=args.allow_general or bool(config.get("allow_general", False)),
        compare_horizontal=args.compare_horizontal or bool(config.get("compare_horizontal", False)),
        workers=args.workers if args.workers is not None else _integer(config.get("workers", 1), "workers"),
        seed=seed,
        dump_lp=args.dump_lp or config.get("dump_lp"),
    )


def emit(exp, obj, command):
    if exp.fmt == "csv":
        write_csv(pd.DataFrame([flatten_row(obj)]), exp.out, seed=exp.seed, command=command)
    else:
        write_json(obj, exp.out)
    return obj


def cmd_phy(exp, config):
    if exp.link_budget is None:
        raise ConfigurationError("ERROR: phy needs a `link_budget` block in the config. Check inputs!")
    phy = PhyCalculator(LinkBudget.from_dict(exp.link_budget), fading=config.get("fading", "rayleigh"),
                        mc_samples=config.get("mc_samples", DEFAULT_MC_SAMPLES), seed=exp.seed)
    fp = phy.failure_probs()
    lam, lambda_s = phy.increasing_factors(fp)
    out = fp.to_dict()
    out.update({"lambda": lam, "lambda_s": lambda_s, "fading": phy.fading.value, "mc_samples": phy.mc_samples,
                "seed": exp.seed})
    return emit(exp, out, "phy")


def cmd_analyze(exp, config):
    model = ChainModel(exp.require_params())
    policy = exp.require_policy()
    out = {"params": model.params.to_dict(), "kappa": policy.to_list(),
           "pi": list(model.steady_state(policy).as_array())}
    out.update(model.metrics(policy).to_dict())
    return emit(exp, out, "analyze")


def _self_check(optimiser, exp, report):
    spec = exp.constraint
    if spec.metric not in (METRIC_THROUGHPUT, METRIC_FAILURE_PROB) or not optimiser.params.z_channel:
        return None
    vertical = optimiser.solve_vertical(spec)
    gap = abs(vertical.w_s - report.w_s)
    if gap > SELF_CHECK_TOL:
        logger.warning("LP and vertical flooding disagree: W_S %.10g vs %.10g", report.w_s, vertical.w_s)
    return gap


def cmd_optimize(exp, config):
    optimiser = OccupancyLP(exp.require_params())
    if exp.dump_lp is not None:
        with open(exp.dump_lp, "w") as fp:
            fp.write(optimiser.build_lp(exp.constraint).to_text())
        logger.debug("occupancy LP written to %s", exp.dump_lp)
    report = optimiser.solve(exp.constraint, exp.solver, allow_general=exp.allow_general)
    out = report.to_dict()
    out["params"] = optimiser.params.to_dict()
    if exp.solver == "lp":
        gap = _self_check(optimiser, exp, report)
        if gap is not None:
            out["self_check_gap"] = gap
    return emit(exp, out, "optimize")


def sweep_values(sweep):
    if not isinstance(sweep, dict):
        raise ConfigurationError("ERROR: sweep needs a `sweep` block {variable, from, to, steps}. Check inputs!")
    variable = sweep.get("variable")
    if variable not in SWEEP_VARIABLES:
        raise ConfigurationError(f"ERROR: unknown sweep variable {variable}, expected one of {SWEEP_VARIABLES}")
    try:
        lo, hi, steps = float(sweep["from"]), float(sweep["to"]), int(sweep["steps"])
    except (KeyError, TypeError, ValueError):
        raise ConfigurationError("ERROR: sweep needs numeric `from`, `to` and `steps`. Check inputs!")
    if steps < 1:
        raise ConfigurationError("ERROR: sweep steps must be >= 1. Check inputs!")
    return variable, np.sort(np.linspace(lo, hi, steps))


# One sweep point; module level so the process pool can pickle it
def sweep_point(task):
    params = SystemParams.from_dict(task["params"])
    spec = ConstraintSpec.from_dict(task["constraint"])
    variable, value = task["variable"], task["value"]
    if variable == "epsilon":
        spec = ConstraintSpec(metric=spec.metric, epsilon=value)
    else:
        params = params.replace(**{variable: value})

    optimiser = OccupancyLP(params)
    report = optimiser.solve(spec, task["solver"], allow_general=task["allow_general"])
    metrics = optimiser.metrics(report.policy)
    row = {"sweep_var": variable, "value": value}
    row.update({f"kappa_{theta}": k for theta, k in enumerate(report.kappa)})
    row.update({
        "w_s": report.w_s,
        "w_p": report.w_p,
        "j_p": metrics.j_p,
        "delta": report.delta,
        "j_fp": metrics.j_fp,
        "j_ntx": metrics.j_ntx,
        "solver": report.method,
        "binding": report.binding,
        "w_s_norm": optimiser.normalised_reward(report.policy),
        "sigma": report.sigma,
    })
    if task["compare_horizontal"]:
        horizontal = optimiser.solve_horizontal(spec)
        row["w_s_horizontal"] = horizontal.w_s
        row["kappa_horizontal"] = horizontal.kappa[1]
        row["cost_increase"] = horizontal.cost_increase_ratio(report)
    if task["sim"] is not None:
        stats = Simulator(params).simulate(report.policy, SimConfig(**task["sim"]))
        row["w_s_hat"] = stats.w_s_hat
        row["w_p_hat"] = stats.w_p_hat
    logger.debug("sweep %s=%g: kappa=%s", variable, value, report.kappa)
    return row


def cmd_sweep(exp, config):
    params = exp.require_params()
    variable, values = sweep_values(exp.sweep)
    sim = None
    if exp.sim is not None:
        sim = {"n_slots": exp.sim.n_slots, "seed": exp.sim.seed, "warmup_slots": exp.sim.warmup_slots}
    tasks = [{"params": params.to_dict(), "constraint": exp.constraint.to_dict(), "solver": exp.solver,
              "allow_general": exp.allow_general, "compare_horizontal": exp.compare_horizontal,
              "sim": sim, "variable": variable, "value": float(value)} for value in values]

    if exp.workers > 1:
        with ProcessPoolExecutor(max_workers=exp.workers) as pool:
            rows = list(pool.map(sweep_point, tasks))
    else:
        rows = [sweep_point(task) for task in tasks]

    df = pd.DataFrame(rows)
    if exp.fmt == "csv":
        write_csv(df, exp.out, seed=exp.seed, command="sweep", variable=variable, metric=exp.constraint.metric)
    else:
        write_json(rows, exp.out)
    return df


def cmd_simulate(exp, config, trace_path=None, validate=False):
    params = exp.require_params()
    policy = exp.policy
    if policy is None:
        policy = OccupancyLP(params).solve(exp.constraint, exp.solver, allow_general=exp.allow_general).policy
    simulator = Simulator(params)
    stats = simulator.simulate(policy, exp.sim, trace=trace_path is not None)
    metrics = simulator.metrics(policy)
    out = stats.to_dict()
    out.update({"kappa": policy.to_list(), "analytic": metrics.to_dict(),
                "pi": list(simulator.steady_state(policy).as_array())})
    deviation = stats.max_deviation(metrics, simulator.steady_state(policy))
    out["max_deviation"] = deviation
    if trace_path is not None:
        write_csv(stats.trace, trace_path, seed=exp.seed, command="trace")
    emit(exp, out, "simulate")
    if validate and deviation > VALIDATION_SIGMAS:
        raise NumericalError(f"ERROR: simulation deviates {deviation:.2f} standard errors from the model")
    return out


def cmd_verify(exp, config, instances):
    params = exp.params if exp.params is not None else SystemParams.from_dict(REFERENCE_PARAMS)
    report = TheoremChecker(params).run_all(n=instances, seed=exp.seed)
    emit(exp, report, "verify")
    if not report["passed"]:
        raise NumericalError(f"ERROR: verification failed: {report['failures']}")
    return report


def build_parser():
    parser = ArgumentParser(prog="run_optimiser.py", description="Optimal secondary access policies over an ARQ primary link")
    parser.add_argument("-d", "--debug", action="store_true", help="Debug mode", default=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("phy", "analyze", "optimize", "sweep", "simulate", "verify"):
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", type=str, help="JSON experiment config", default=None)
        p.add_argument("-s", "--solver", type=str, choices=SOLVERS, help="Policy solver", default=None)
        p.add_argument("-m", "--metric", type=str, choices=METRICS, help="Constrained primary metric", default=None)
        p.add_argument("-e", "--epsilon", type=float, help="Allowed relative primary loss", default=None)
        p.add_argument("--seed", type=int, help="Master seed", default=None)
        p.add_argument("--slots", type=int, help="Number of simulated slots", default=None)
        p.add_argument("-o", "--out", type=str, help="Output file, stdout when omitted", default=None)
        p.add_argument("-f", "--format", type=str, choices=FORMATS, help="Output format", default=None)
        p.add_argument("-w", "--workers", type=int, help="Worker processes for sweeps", default=None)
        p.add_argument("-p", "--policy", type=str, help="Comma separated kappa_0..kappa_T", default=None)
        p.add_argument("--validate", action="store_true", help="Fail when the simulation leaves the 5 sigma band", default=False)
        p.add_argument("--allow-general", dest="allow_general", action="store_true",
                       help="Run vertical flooding when nu* > nu", default=False)
        p.add_argument("--compare-horizontal", dest="compare_horizontal", action="store_true",
                       help="Add horizontal flooding columns to sweeps", default=False)
        p.add_argument("--trace", type=str, help="Per-slot trace CSV of the simulation", default=None)
        p.add_argument("--dump-lp", dest="dump_lp", type=str, help="Write the occupancy LP as plain text",
                       default=None)
        p.add_argument("-n", "--instances", type=int, help="Random instances for verify", default=200)
    return parser


def run(args):
    config = load_json_config(args.config)
    exp = build_config(config, args)
    if args.command == "phy":
        cmd_phy(exp, config)
    elif args.command == "analyze":
        cmd_analyze(exp, config)
    elif args.command == "optimize":
        cmd_optimize(exp, config)
    elif args.command == "sweep":
        cmd_sweep(exp, config)
    elif args.command == "simulate":
        cmd_simulate(exp, config, trace_path=args.trace, validate=args.validate)
    elif args.command == "verify":
        cmd_verify(exp, config, args.instances)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else 2
    logging.basicConfig(level=logging.DEBUG if args.debug else logging.WARNING, stream=sys.stderr)
    try:
        return run(args)
    except ArqPolicyError as err:
        logger.error(str(err))
        return exit_code_for(err)
    except Exception as err:
        logger.exception("internal failure: %s", err)
        return EXIT_NUMERICAL


if __name__=="__main__":
    sys.exit(main())

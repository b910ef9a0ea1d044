"""Command-line entry point.

Verbs: ``run``, ``sweep``, ``oracle-compare``, ``validate``. Any config field
can be overridden with a dotted flag, e.g. ``--config.num_mrs 4`` or
``--config.geometry.train_length_m=300``.

Exit codes: 0 success, 1 config error, 2 runtime error, 3 oracle-cap refusal.
"""

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import experiments
from .game import run_coalition_formation
from .oracle import OracleCapError
from .rates import per_class_throughput, system_average_throughput, total_utility
from .scenario import ConfigError, SystemConfig, apply_overrides, load_config, validate_config

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_ORACLE_CAP = 0, 1, 2, 3
OVERRIDE_PREFIX = "--config."


def split_overrides(argv):
    """Separate ``--config.<field> value`` pairs from the remaining arguments."""
    rest, overrides = [], {}
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg.startswith(OVERRIDE_PREFIX):
            key = arg[len(OVERRIDE_PREFIX):]
            if "=" in key:
                key, value = key.split("=", 1)
            else:
                if i + 1 >= len(argv):
                    raise ConfigError(f"{arg} needs a value")
                i += 1
                value = argv[i]
            overrides[key] = value
        else:
            rest.append(arg)
        i += 1
    return rest, overrides


def _base_config(args, overrides):
    config = load_config(args.config) if args.config else SystemConfig()
    return apply_overrides(config, overrides) if overrides else config


def _sweep_spec(args, overrides):
    if bool(args.spec) == bool(args.preset):
        raise ConfigError("give exactly one of a sweep file or --preset")
    if args.preset:
        if args.preset not in experiments.PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(experiments.PRESETS)}")
        spec = experiments.PRESETS[args.preset]()
    else:
        spec = experiments.load_sweep(args.spec)
    changes = {}
    if overrides:
        changes["base"] = apply_overrides(spec.base, overrides)
    if args.replications is not None:
        changes["replications"] = args.replications
    if args.output is not None:
        changes["output"] = args.output
    if getattr(args, "timing", False):
        changes["record_runtime"] = True
    return dataclasses.replace(spec, **changes) if changes else spec


def cmd_validate(args, overrides):
    config = _base_config(args, overrides)
    problems = validate_config(config)
    if problems:
        for p in problems:
            print(f"violation: {p}")
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


def cmd_run(args, overrides):
    config = _base_config(args, overrides)
    problems = validate_config(config)
    if problems:
        raise ConfigError("; ".join(problems))
    if args.seed is not None:
        config = config.replace(rng_seed=args.seed)
    scenario, partition, switches = experiments.run_scheme(config, args.scheme)
    rates = scenario.phy_rate
    bs_mean, mr_mean = per_class_throughput(partition, rates)
    report = {
        "scheme": args.scheme,
        "seed": config.rng_seed,
        "assignment": list(partition.assignment),
        "coalition_sizes": partition.sizes().tolist(),
        "objective": total_utility(partition, rates),
        "avg_system_throughput": system_average_throughput(partition, rates),
        "bs_user_throughput": bs_mean,
        "mr_user_throughput": mr_mean,
        "switch_count": switches,
    }
    if args.trace and args.scheme != "OS":
        duplex, order = experiments.SCHEMES[args.scheme]
        _, trace = run_coalition_formation(scenario, order)
        Path(args.trace).write_text(json.dumps(trace.to_dict(), indent=2) + "\n")
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        for key, value in report.items():
            print(f"{key}: {value}")
    return EXIT_OK


def cmd_sweep(args, overrides):
    spec = _sweep_spec(args, overrides)
    result = experiments.run_sweep(spec, workers=args.workers)
    out = spec.output or f"results/{args.preset or Path(args.spec).stem}"
    for path in experiments.emit(result.records, out):
        print(f"wrote {path}")
    skipped = experiments.write_skipped(result.skipped, out)
    if skipped:
        print(f"wrote {skipped} ({len(result.skipped)} skipped cells)")
    return EXIT_OK


def cmd_oracle_compare(args, overrides):
    spec = _sweep_spec(args, overrides)
    cmp = experiments.compare_with_oracle(spec, workers=args.workers)
    print(f"{cmp.parameter},os_throughput,cg_fd_throughput,deviation")
    for v, o, a, d in zip(cmp.values, cmp.os_means, cmp.alg_means, cmp.deviations):
        print(f"{v},{o!r},{a!r},{d!r}")
    print(f"average_deviation,{cmp.average_deviation!r}")
    if spec.output:
        experiments.emit(cmp.sweep.records, spec.output)
        Path(spec.output + ".deviation.json").write_text(json.dumps(cmp.to_dict(), indent=2) + "\n")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="railassoc", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config and list violations")
    p.add_argument("--config", help="TOML or JSON config file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="solve one scenario and print partition + metrics")
    p.add_argument("--config", help="TOML or JSON config file")
    p.add_argument("--scheme", default="CG-FD", choices=sorted(experiments.SCHEMES))
    p.add_argument("--seed", type=int)
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.add_argument("--trace", help="write the game trace as JSON to this path")
    p.set_defaults(func=cmd_run)

    for name, func, helptext in (("sweep", cmd_sweep, "run a parameter sweep, write CSV + JSON"),
                                 ("oracle-compare", cmd_oracle_compare,
                                  "compare CG-FD against exhaustive search")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("spec", nargs="?", help="sweep file (TOML or JSON)")
        p.add_argument("--preset", help=f"built-in sweep: {', '.join(experiments.PRESETS)}")
        p.add_argument("--output", help="output path stem (extensions are appended)")
        p.add_argument("--replications", type=int)
        p.add_argument("--workers", type=int, default=1)
        if name == "sweep":
            p.add_argument("--timing", action="store_true",
                           help="record wall time per cell (output is then not byte-stable)")
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        argv, overrides = split_overrides(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, overrides)
    except OracleCapError as exc:
        print(f"oracle refused: {exc}", file=sys.stderr)
        return EXIT_ORACLE_CAP
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - map anything else to the runtime exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

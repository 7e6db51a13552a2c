"""Command-line entry point.

Subcommands: w1, kernel eval, gram, fit, predict, mmd, simulate, label,
modulus, mcshane-check, converge, transfer, selftest. Exit codes: 0
success, 1 validation/usage error, 2 runtime or numerical error. Errors
print one machine-parseable line ``error: TAG: message`` to stderr;
results go to stdout or ``--out``. Outputs carry no timestamps, so a
rerun with the same config and seed is byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigParseError, MfkError, NumericalError, ValidationError
from . import fileio
from .kernels import estimate_modulus, eval_kernel, mmd as mmd_fn
from .basekernels import GaussianKernel, InverseMultiquadricKernel
from .measures import sample_configuration, uniform_interval
from .meanfield import (
    functional_transfer_study,
    kernel_convergence_study,
    mcshane_consistency_check,
)
from .particles import make_dataset, simulate
from .rkhs import expansion_eval_batch, gram, ridge_fit
from .transport import Euclidean, KernelMetric, w1_1d, w1_exact, w1_sinkhorn

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None


class CliUsageError(ValidationError):
    tag = "USAGE"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliUsageError(message)


def _fmt(x: float) -> str:
    return f"{x:.12f}"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _parse_metric(spec: str):
    """euclidean | kernel:gaussian:GAMMA | kernel:imq:C"""
    if spec == "euclidean":
        return Euclidean()
    parts = spec.split(":")
    if len(parts) == 3 and parts[0] == "kernel":
        if parts[1] == "gaussian":
            return KernelMetric(GaussianKernel(float(parts[2])))
        if parts[1] == "imq":
            return KernelMetric(InverseMultiquadricKernel(float(parts[2])))
    raise CliUsageError(f"unknown metric {spec!r}")


def _parse_base(spec: str):
    """gaussian:GAMMA | imq:C | path to a base-kernel or kernel-spec file"""
    parts = spec.split(":")
    if len(parts) == 2 and parts[0] == "gaussian":
        return GaussianKernel(float(parts[1]))
    if len(parts) == 2 and parts[0] == "imq":
        return InverseMultiquadricKernel(float(parts[1]))
    obj = fileio._load_json(spec)
    if "family" in obj:
        return fileio.kernel_from_dict(obj).base
    return fileio.base_kernel_from_dict(obj)


# -- config schemas (unknown keys rejected) --------------------------------

_SEEDS = {
    "oneOf": [
        {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        {
            "type": "object",
            "required": ["count"],
            "additionalProperties": False,
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "base": {"type": "integer"},
            },
        },
    ]
}

CONFIG_SCHEMAS = {
    "converge": {
        "type": "object",
        "required": ["kernel", "mu", "nu", "m_grid", "seeds"],
        "additionalProperties": False,
        "properties": {
            "kernel": {"type": "object"},
            "mu": {"type": "object"},
            "nu": {"type": "object"},
            "m_grid": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            "seeds": _SEEDS,
        },
    },
    "transfer": {
        "type": "object",
        "required": ["kernel", "observable", "train_m", "test_m", "n_train",
                     "n_test", "lambda", "seed"],
        "additionalProperties": False,
        "properties": {
            "kernel": {"type": "object"},
            "observable": {"type": "object"},
            "train_m": {"type": "integer", "minimum": 1},
            "test_m": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            "n_train": {"type": "integer", "minimum": 1},
            "n_test": {"type": "integer", "minimum": 1},
            "lambda": {"type": "number", "minimum": 0},
            "seed": {"type": "integer"},
            "source": {"type": "object"},
            "stride": {"type": "integer", "minimum": 1},
        },
    },
    "mcshane-check": {
        "type": "object",
        "required": ["kernel", "m", "n_pairs", "seed"],
        "additionalProperties": False,
        "properties": {
            "kernel": {"type": "object"},
            "m": {"type": "integer", "minimum": 1},
            "n_pairs": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer"},
            "sampler": {"type": "object"},
            "n_decoys": {"type": "integer", "minimum": 0},
        },
    },
    "modulus": {
        "type": "object",
        "required": ["kernel", "m", "sampler", "trials", "seed"],
        "additionalProperties": False,
        "properties": {
            "kernel": {"type": "object"},
            "m": {"type": "integer", "minimum": 1},
            "sampler": {"type": "object"},
            "trials": {"type": "integer", "minimum": 10},
            "seed": {"type": "integer"},
        },
    },
    "simulate": {
        "type": "object",
        "required": ["dynamics", "m", "steps", "seed"],
        "additionalProperties": False,
        "properties": {
            "dynamics": {"type": "object"},
            "m": {"type": "integer", "minimum": 1},
            "steps": {"type": "integer", "minimum": 0},
            "seed": {"type": "integer"},
            "stride": {"type": "integer", "minimum": 1},
        },
    },
}


def _load_config(path: str, command: str) -> dict:
    obj = fileio._load_json(path)
    schema = CONFIG_SCHEMAS[command]
    if jsonschema is not None:
        try:
            jsonschema.validate(obj, schema)
        except jsonschema.ValidationError as exc:
            raise ConfigParseError(f"{path}: {exc.message}") from exc
    return obj


def _resolve_seeds(obj) -> list[int]:
    if isinstance(obj, list):
        return [int(s) for s in obj]
    base = int(obj.get("base", 0))
    return [base + i for i in range(int(obj["count"]))]


# -- subcommand handlers ----------------------------------------------------


def _cmd_w1(args) -> int:
    mu = fileio.load_measure(args.mu)
    nu = fileio.load_measure(args.nu)
    metric = _parse_metric(args.metric)
    if args.solver == "exact":
        dist, plan = w1_exact(mu, nu, metric)
        if args.plan:
            np.savetxt(args.plan, plan.coupling, delimiter=",")
    elif args.solver == "1d":
        dist = w1_1d(mu, nu)
    else:
        result = w1_sinkhorn(mu, nu, metric, epsilon=args.eps, max_iters=args.max_iters)
        _emit(_fmt(result.cost), args.out)
        if not result.converged:
            print(
                f"error: NOT_CONVERGED: marginal error {result.marginal_error:.3e} "
                f"after {result.iterations} iterations",
                file=sys.stderr,
            )
            return 2
        return 0
    _emit(_fmt(dist), args.out)
    return 0


def _cmd_kernel_eval(args) -> int:
    kspec = fileio.load_kernel(args.kernel)
    mu = fileio.load_measure(args.mu)
    nu = fileio.load_measure(args.nu)
    _emit(_fmt(eval_kernel(kspec, mu, nu)), args.out)
    return 0


def _cmd_gram(args) -> int:
    kspec = fileio.load_kernel(args.kernel)
    configs = fileio.load_configurations(args.centers)
    matrix = gram(kspec, configs).entries
    text = "\n".join(",".join(repr(v) for v in row) for row in matrix.tolist())
    _emit(text, args.out)
    return 0


def _cmd_fit(args) -> int:
    kspec = fileio.load_kernel(args.kernel)
    dataset = fileio.load_dataset(args.data)
    model = ridge_fit(
        kspec,
        [c for c, _ in dataset.records],
        dataset.labels(),
        args.lam,
    )
    fileio.save_model(model, args.out)
    print(f"fitted {model.n_centers} centers -> {args.out}", file=sys.stderr)
    return 0


def _cmd_predict(args) -> int:
    model = fileio.load_model(args.model)
    configs = fileio.load_configurations(args.data)
    preds = expansion_eval_batch(model, configs)
    text = "\n".join(repr(v) for v in preds.tolist())
    _emit(text, args.out)
    return 0


def _cmd_mmd(args) -> int:
    base = _parse_base(args.base)
    mu = fileio.load_measure(args.mu)
    nu = fileio.load_measure(args.nu)
    _emit(_fmt(mmd_fn(base, mu, nu)), args.out)
    return 0


def _cmd_simulate(args) -> int:
    config = _load_config(args.config, "simulate")
    dyn = fileio.dynamics_from_dict(config["dynamics"])
    traj = simulate(dyn, config["m"], config["steps"], config["seed"])
    stride = config.get("stride", 1)
    configs = traj[:: int(stride)]
    fileio.save_configurations(
        configs, args.out,
        metadata={"dynamics": config["dynamics"], "seed": config["seed"],
                  "steps": config["steps"], "stride": stride,
                  "config_hash": fileio.config_hash(config)},
    )
    print(f"wrote {len(configs)} configurations -> {args.out}", file=sys.stderr)
    return 0


def _cmd_label(args) -> int:
    observable = fileio.observable_from_dict(fileio._load_json(args.observable))
    configs = fileio.load_configurations(args.data)
    dataset = make_dataset(configs, observable)
    fileio.save_dataset(dataset, args.out)
    print(f"labeled {len(dataset)} records -> {args.out}", file=sys.stderr)
    return 0


def _cmd_modulus(args) -> int:
    config = _load_config(args.config, "modulus")
    kspec = fileio.kernel_from_dict(config["kernel"])
    sampler = fileio.sampler_from_dict(config["sampler"])
    est = estimate_modulus(
        kspec, config["m"], sampler, config["trials"], config["seed"]
    )
    if args.format == "csv":
        lines = ["# kind: modulus_estimate",
                 "# columns: distance, deviation",
                 f"# envelope: {fileio.canonical_json(est.vertices.tolist())}",
                 f"# config_hash: {fileio.config_hash(config)}",
                 "distance,deviation"]
        lines += [f"{r!r},{s!r}" for r, s in est.samples.tolist()]
        _emit("\n".join(lines), args.out)
    else:
        _emit(json.dumps({
            "kind": "modulus_estimate",
            "samples": est.samples.tolist(),
            "envelope": est.vertices.tolist(),
            "config": config,
            "config_hash": fileio.config_hash(config),
        }, sort_keys=True, indent=2), args.out)
    return 0


def _cmd_mcshane_check(args) -> int:
    config = _load_config(args.config, "mcshane-check")
    kspec = fileio.kernel_from_dict(config["kernel"])
    sampler = (
        fileio.sampler_from_dict(config["sampler"])
        if "sampler" in config
        else uniform_interval(0.0, 1.0)
    )
    deviation = mcshane_consistency_check(
        kspec, config["m"], config["n_pairs"], config["seed"],
        sampler=sampler, n_decoys=config.get("n_decoys", 32),
    )
    _emit(_fmt(deviation), args.out)
    return 0


def _cmd_converge(args) -> int:
    config = _load_config(args.config, "converge")
    report = kernel_convergence_study(
        fileio.kernel_from_dict(config["kernel"]),
        fileio.sampler_from_dict(config["mu"]),
        fileio.sampler_from_dict(config["nu"]),
        config["m_grid"],
        _resolve_seeds(config["seeds"]),
        threads=args.threads,
    )
    report.meta["config"] = config
    _write_report(report, args)
    return 0


def _cmd_transfer(args) -> int:
    config = _load_config(args.config, "transfer")
    source = fileio.source_from_dict(config["source"]) if "source" in config else None
    report = functional_transfer_study(
        fileio.kernel_from_dict(config["kernel"]),
        fileio.observable_from_dict(config["observable"]),
        config["train_m"],
        config["test_m"],
        config["n_train"],
        config["n_test"],
        config["lambda"],
        config["seed"],
        source=source,
        stride=config.get("stride", 2),
    )
    report.meta["config"] = config
    _write_report(report, args)
    return 0


def _write_report(report, args) -> None:
    if args.out:
        fileio.write_report(report, args.out, args.format)
        print(f"wrote report -> {args.out}", file=sys.stderr)
    else:
        obj = fileio.report_to_dict(report)
        print(json.dumps(obj, sort_keys=True, indent=2))
    if getattr(args, "dat", None):
        fileio.write_dat(report, args.dat)


def _cmd_selftest(args) -> int:
    from .selftest import format_results, run_selftest

    results = run_selftest()
    print(format_results(results))
    if any(not ok for _, ok, _ in results):
        print("error: SELFTEST_FAILED: at least one invariant check failed",
              file=sys.stderr)
        return 1
    return 0


def version_and_provenance(config_path: str | None = None) -> str:
    """Version, build info, and (optionally) the hash a report produced
    from the given config file will embed."""
    lines = [
        f"mfkernels {__version__}",
        f"python {sys.version_info.major}.{sys.version_info.minor}."
        f"{sys.version_info.micro}, numpy {np.__version__}",
    ]
    if config_path:
        lines.append(f"config_hash {fileio.config_hash(fileio._load_json(config_path))}")
    return "\n".join(lines)


# -- parser -----------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="mfkernels", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="store_true",
                        help="print version, build info, and optional config hash")
    parser.add_argument("--config", default=None,
                        help="with --version: config file to hash")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker pool size for study cells")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("w1", help="Wasserstein-1 distance between two measure files")
    p.add_argument("--mu", required=True, help="first measure (json or csv)")
    p.add_argument("--nu", required=True, help="second measure (json or csv)")
    p.add_argument("--metric", default="euclidean",
                   help="euclidean | kernel:gaussian:GAMMA | kernel:imq:C")
    p.add_argument("--solver", choices=["exact", "1d", "sinkhorn"], default="exact",
                   help="exact LP, 1-d closed form, or entropic approximation")
    p.add_argument("--eps", type=float, default=0.01, help="sinkhorn regularization")
    p.add_argument("--max-iters", type=int, default=2000, help="sinkhorn iteration cap")
    p.add_argument("--plan", default=None, help="write the optimal coupling as csv")
    p.add_argument("--out", default=None, help="write the distance here instead of stdout")
    p.set_defaults(func=_cmd_w1)

    kernel = sub.add_parser("kernel", help="kernel operations")
    ksub = kernel.add_subparsers(dest="kernel_command")
    p = ksub.add_parser("eval", help="evaluate a kernel spec on two measure files")
    p.add_argument("--kernel", required=True, help="kernel spec json")
    p.add_argument("--mu", required=True, help="first measure")
    p.add_argument("--nu", required=True, help="second measure")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.set_defaults(func=_cmd_kernel_eval)

    p = sub.add_parser("gram", help="Gram matrix over a configuration dataset")
    p.add_argument("--kernel", required=True, help="kernel spec json")
    p.add_argument("--centers", required=True, help="configurations (jsonl dataset)")
    p.add_argument("--out", default=None, help="csv output (default stdout)")
    p.set_defaults(func=_cmd_gram)

    p = sub.add_parser("fit", help="kernel ridge regression on a labeled dataset")
    p.add_argument("--kernel", required=True, help="kernel spec json")
    p.add_argument("--data", required=True, help="labeled dataset (jsonl)")
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="ridge regularization")
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="evaluate a fitted model on configurations")
    p.add_argument("--model", required=True, help="model file from fit")
    p.add_argument("--data", required=True, help="configurations (jsonl dataset)")
    p.add_argument("--out", default=None, help="csv output (default stdout)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("mmd", help="maximum mean discrepancy between two measures")
    p.add_argument("--base", required=True,
                   help="gaussian:GAMMA | imq:C | base-kernel json file")
    p.add_argument("--mu", required=True, help="first measure")
    p.add_argument("--nu", required=True, help="second measure")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.set_defaults(func=_cmd_mmd)

    p = sub.add_parser("simulate", help="particle dynamics trajectory")
    p.add_argument("--config", required=True, help="simulation config json")
    p.add_argument("--out", required=True, help="configurations jsonl to write")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("label", help="label configurations with an observable")
    p.add_argument("--data", required=True, help="configurations (jsonl dataset)")
    p.add_argument("--observable", required=True, help="observable spec json")
    p.add_argument("--out", required=True, help="labeled dataset to write")
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("modulus", help="empirical modulus-of-continuity estimate")
    p.add_argument("--config", required=True, help="modulus config json")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=_cmd_modulus)

    p = sub.add_parser("mcshane-check",
                       help="extension consistency at empirical pairs")
    p.add_argument("--config", required=True, help="check config json")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.set_defaults(func=_cmd_mcshane_check)

    p = sub.add_parser("converge", help="kernel convergence study")
    p.add_argument("--config", required=True, help="study config json")
    p.add_argument("--out", default=None, help="report file (default stdout)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--dat", default=None, help="also write a gnuplot .dat file")
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("transfer", help="functional transfer study")
    p.add_argument("--config", required=True, help="study config json")
    p.add_argument("--out", default=None, help="report file (default stdout)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--dat", default=None, help="also write a gnuplot .dat file")
    p.set_defaults(func=_cmd_transfer)

    p = sub.add_parser("selftest", help="run the embedded invariant suite")
    p.set_defaults(func=_cmd_selftest)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.version:
            print(version_and_provenance(args.config))
            return 0
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return 1
        return args.func(args)
    except CliUsageError as exc:
        print(f"error: {exc.tag}: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {exc.tag}: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"error: {exc.tag}: {exc}", file=sys.stderr)
        return 2
    except MfkError as exc:
        print(f"error: {exc.tag}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: IO_ERROR: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

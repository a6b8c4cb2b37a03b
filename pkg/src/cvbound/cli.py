"""Command-line interface.

Exit codes: 0 success (any classification), 1 input error, 2 indeterminate
certification, 3 search exhausted.

Seeding: every run has one root seed (``--seed``, default 0). A stage draws
from ``derive_seed(root, stage)``, i.e. the first 64-bit word of
``numpy.random.SeedSequence([root, STAGES[stage]])``; bootstrap resample k
then uses ``default_rng([stage_seed, k])``. Each file written with ``--out``
gets a manifest ``<out>.manifest.json`` recording the command, the full
configuration, the seeds, the paths, the library version and the wall time.
"""

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import circuit as circ
from . import io
from . import search as srch
from . import tomography as tomo
from .certifier import DEFAULT_TOL, certify
from .errors import CVBoundError, Indeterminate, InvalidArgument, SearchExhausted
from .gaussian import ModePartition

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INDETERMINATE = 2
EXIT_EXHAUSTED = 3

STAGES = {"generate": 1, "bootstrap": 2, "search": 3}


def derive_seed(root, stage):
    """64-bit seed of a pipeline stage from the run's root seed."""
    seq = np.random.SeedSequence([int(root), STAGES[stage]])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


class _Run:
    """Collects outputs and seeds of one invocation for its manifest."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = argv
        self.start = time.perf_counter()
        self.seeds = {"root": args.seed}
        self.inputs = []
        self.outputs = []

    def seed(self, stage):
        value = derive_seed(self.args.seed, stage)
        self.seeds[stage] = value
        return value

    def emit_json(self, obj, path=None):
        """Write ``obj`` to ``path`` (default --out) or print it."""
        path = path or self.args.out
        if path is None:
            json.dump(obj, sys.stdout, indent=2)
            sys.stdout.write("\n")
        else:
            io.dump_json(obj, path)
            self.outputs.append(str(path))

    def add_output(self, path):
        self.outputs.append(str(path))

    def write_manifest(self):
        if not self.outputs:
            return
        config = {k: v for k, v in vars(self.args).items() if k != "func"}
        manifest = {
            "command": self.argv,
            "config": config,
            "seeds": self.seeds,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "library_version": __version__,
            "wall_time_s": time.perf_counter() - self.start,
        }
        io.dump_json(manifest, f"{self.outputs[0]}.manifest.json")


def _sidecar(run, suffix, explicit):
    if explicit:
        return explicit
    if run.args.out is None:
        return None
    return f"{Path(run.args.out).with_suffix('')}{suffix}"


def _partition(text, fallback, what="partition"):
    if text:
        return ModePartition.parse(text)
    if fallback is not None:
        return fallback
    raise io.FormatError(f"missing {what}: pass --partition or add a 'partition' field", field=what)


# commands --------------------------------------------------------------------

def cmd_certify(run):
    args = run.args
    run.inputs.append(args.cov_file)
    state, file_partition = io.read_covariance(args.cov_file)
    partition = _partition(args.partition, file_partition)
    partition.check(state.n_modes)
    report = certify(state, partition, tol=args.tol, method=args.method)
    out = report.to_dict()
    out["partition"] = partition.to_dict()
    run.emit_json(out)
    return EXIT_OK


def _load_circuit(args):
    if getattr(args, "preset", None) == "bound-state":
        return io.load_preset("bound-state")
    if getattr(args, "preset", None) == "paper-circuit":
        return circ.paper_circuit(partition=ModePartition((1, 2), (3, 4)))
    if getattr(args, "circuit_file", None):
        return io.read_circuit(args.circuit_file)
    raise InvalidArgument("give a circuit file or --preset")


def cmd_simulate(run):
    args = run.args
    spec = _load_circuit(args)
    if args.circuit_file:
        run.inputs.append(args.circuit_file)
    state = circ.simulate_circuit(spec)
    run.emit_json(io.covariance_to_dict(state, spec.partition))
    return EXIT_OK


def cmd_preset(run):
    args = run.args
    if args.name == "bound-state":
        spec = io.load_preset("bound-state")
    else:
        ratios = args.ratios or (0.5, 0.5, 0.5, 0.5)
        spec = circ.paper_circuit(ratios, partition=ModePartition((1, 2), (3, 4)))
    if args.covariance:
        run.emit_json(io.covariance_to_dict(circ.simulate_circuit(spec), spec.partition))
    else:
        run.emit_json(io.circuit_to_dict(spec))
    return EXIT_OK


def _search_result_dict(result, partition):
    out = result.to_dict()
    if "circuit" in out:
        out["circuit"] = io.circuit_to_dict(out["circuit"])
    out["covariance"] = io.covariance_to_dict(result.best_cov, partition)
    return out


def cmd_search(run):
    args = run.args
    config = srch.WalkConfig(
        step=args.step,
        rotation_angle=args.rotation_angle if args.rotation_angle is not None else args.step,
        max_steps=args.max_steps,
        seed=run.seed("search"),
        objective_floor=args.objective_floor,
        tol=args.tol,
        draw_budget=args.draw_budget,
        restarts=args.restarts,
        first_improvement=not args.best_improvement,
    )
    if args.space == "normal-form":
        result = srch.random_walk_normal_form(config)
        partition = srch.NORMAL_FORM_PARTITION
    else:
        base = _load_circuit(args) if (args.circuit_file or args.preset) else \
            circ.paper_circuit(partition=None)
        if args.circuit_file:
            run.inputs.append(args.circuit_file)
        partition = _partition(args.partition, base.partition)
        mask = [m for m in args.mask.split(",") if m] if args.mask else []
        result = srch.random_walk_circuit(base, mask, config, partition=partition)
    run.emit_json(_search_result_dict(result, partition))
    return EXIT_OK


def _dataset_source(args):
    if args.cov:
        state, partition = io.read_covariance(args.cov)
        return state
    spec = _load_circuit(args)
    return circ.simulate_circuit(spec)


def cmd_tomo_generate(run):
    args = run.args
    if args.cov:
        run.inputs.append(args.cov)
    if args.out is None:
        raise InvalidArgument("tomo generate writes a binary file; pass --out")
    state = _dataset_source(args)
    plan = tomo.default_setting_plan(state.n_modes)
    count = args.count if args.count else args.total // len(plan)
    rng = np.random.default_rng(run.seed("generate"))
    data = tomo.simulate_dataset(state, plan, count, rng)
    io.write_dataset(args.out, data)
    run.add_output(args.out)
    return EXIT_OK


def _read_data(run, path):
    run.inputs.append(path)
    return io.read_dataset(path)


def cmd_tomo_estimate(run):
    args = run.args
    data = _read_data(run, args.data)
    est = tomo.estimate_covariance(data)
    partition = ModePartition.parse(args.partition) if args.partition else None
    out = io.covariance_to_dict(est.state, partition)
    out["std_errors"] = [float(v) for v in est.std_errors.ravel()]
    if est.shot_noise_variances is not None:
        out["shot_noise_variances"] = [float(v) for v in est.shot_noise_variances]
    run.emit_json(out)
    return EXIT_OK


def cmd_tomo_bootstrap(run):
    args = run.args
    data = _read_data(run, args.data)
    partition = _partition(args.partition, None)
    report = tomo.bootstrap_certify(
        data, partition, args.resamples, seed=run.seed("bootstrap"), tol=args.tol,
        replace=not args.without_replacement, subsample_fraction=args.fraction,
        threads=args.threads,
    )
    out = report.to_dict()
    out["partition"] = partition.to_dict()
    run.emit_json(out)
    scatter = _sidecar(run, ".scatter.csv", args.scatter)
    if scatter:
        io.write_scatter_csv(scatter, report)
        run.add_output(scatter)
    return EXIT_OK


def cmd_tomo_gauss(run):
    args = run.args
    data = _read_data(run, args.data)
    report = tomo.gaussianity_tests(data, args.grid)
    run.emit_json(report.to_dict())
    qq = _sidecar(run, ".qq.csv", args.qq)
    if qq:
        io.write_qq_csv(qq, report)
        run.add_output(qq)
    return EXIT_OK


# parser ----------------------------------------------------------------------

def _ratios(text):
    vals = tuple(float(v) for v in text.split(","))
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("need four comma-separated ratios")
    return vals


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; here 2 means indeterminate."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _common_options():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="root seed (default 0)")
    common.add_argument("--tol", type=float, default=argparse.SUPPRESS,
                        help=f"certifier tolerance on E (default {DEFAULT_TOL:g})")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads for bootstrap resamples (default 1)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file (default stdout)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return common


def build_parser():
    # parents share action objects and set_defaults rewrites their defaults,
    # so the top level gets its own copy of the common options
    common = _common_options()
    parser = _Parser(prog="cvbound", parents=[_common_options()],
                                     description="Certify and synthesize bound entangled Gaussian states.")
    parser.set_defaults(seed=0, tol=DEFAULT_TOL, threads=1, out=None, verbose=False)
    parser.add_argument("--version", action="version", version=f"cvbound {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", parents=[common], help="E, P and physicality of a covariance file")
    p.add_argument("cov_file")
    p.add_argument("--partition", help='e.g. "1,2|3,4"; overrides the file')
    p.add_argument("--method", choices=("bisection", "direct"), default="bisection")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", parents=[common], help="circuit JSON to covariance JSON")
    p.add_argument("circuit_file", nargs="?")
    p.add_argument("--preset", choices=("paper-circuit", "bound-state"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("search", parents=[common], help="random-walk search for bound entanglement")
    p.add_argument("--space", choices=("normal-form", "circuit"), default="normal-form")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--rotation-angle", type=float, default=None, help="radians (default: step)")
    p.add_argument("--max-steps", type=int, default=1000)
    p.add_argument("--objective-floor", type=float, default=float("inf"))
    p.add_argument("--draw-budget", type=int, default=1_000_000)
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--best-improvement", action="store_true")
    p.add_argument("--circuit-file", help="base circuit for --space circuit")
    p.add_argument("--preset", choices=("paper-circuit", "bound-state"))
    p.add_argument("--mask", default="ratios",
                   help="comma list of ratios,variances,orientations,phases or parameter names")
    p.add_argument("--partition")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("tomo", help="synthetic tomography pipeline")
    tsub = p.add_subparsers(dest="tomo_command", required=True)
    t = tsub.add_parser("generate", parents=[common], help="sample a dataset")
    t.add_argument("--cov", help="covariance JSON to sample")
    t.add_argument("--circuit-file", help="circuit JSON to sample")
    t.add_argument("--preset", choices=("paper-circuit", "bound-state"))
    t.add_argument("--total", type=int, default=4_000_000, help="joint samples over all settings")
    t.add_argument("--count", type=int, help="samples per setting (overrides --total)")
    t.set_defaults(func=cmd_tomo_generate)
    t = tsub.add_parser("estimate", parents=[common], help="least-squares covariance")
    t.add_argument("data")
    t.add_argument("--partition")
    t.set_defaults(func=cmd_tomo_estimate)
    t = tsub.add_parser("bootstrap", parents=[common], help="bootstrap E, P, physicality")
    t.add_argument("data")
    t.add_argument("--partition")
    t.add_argument("--resamples", type=int, default=10_000)
    t.add_argument("--without-replacement", action="store_true")
    t.add_argument("--fraction", type=float, default=0.5, help="subsample share without replacement")
    t.add_argument("--scatter", help="scatter CSV path (default next to --out)")
    t.set_defaults(func=cmd_tomo_bootstrap)
    t = tsub.add_parser("gauss-test", parents=[common], help="moments, Q-Q points, chi-square")
    t.add_argument("data")
    t.add_argument("--grid", type=int, default=99)
    t.add_argument("--qq", help="Q-Q CSV path (default next to --out)")
    t.set_defaults(func=cmd_tomo_gauss)

    p = sub.add_parser("preset", parents=[common], help="shipped circuits")
    p.add_argument("name", choices=("paper-circuit", "bound-state"))
    p.add_argument("--ratios", type=_ratios, help="paper-circuit splitting ratios")
    p.add_argument("--covariance", action="store_true", help="emit the simulated covariance")
    p.set_defaults(func=cmd_preset)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    run = _Run(args, argv)
    try:
        code = args.func(run)
    except Indeterminate as exc:
        print(f"cvbound: indeterminate: {exc}", file=sys.stderr)
        return EXIT_INDETERMINATE
    except SearchExhausted as exc:
        print(f"cvbound: search exhausted after {exc.draws} draws: {exc}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except (CVBoundError, ValueError, OSError) as exc:
        print(f"cvbound: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    run.write_manifest()
    return code


if __name__ == "__main__":
    sys.exit(main())

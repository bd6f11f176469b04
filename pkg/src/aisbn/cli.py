"""Command line interface.

Results go to standard output, diagnostics to standard error.  Exit
codes: 0 success, 1 usage error, 2 invalid input, 3 infeasible
computation (state-space cap, zero-probability evidence).
"""

from __future__ import annotations

import argparse
import sys

from .adaptive import AisConfig, ais_run, estimate_evidence_priors
from .baselines import likelihood_weighting, logic_sampling, self_importance_sampling
from .bench import experiment_from_json, GeneratorParams, generate_network, report_to_csv, run_experiment, summary_to_csv
from .engine import RngStream, relative_error_bound
from .errors import (
    InvalidNetworkError,
    NetworkFormatError,
    NoEffectiveSamplesError,
    StateSpaceCapError,
    ZeroEvidenceProbabilityError,
)
from .exact import exact_icpt, exact_posterior_marginals, exact_pr_evidence
from .fileio import load_network, parse_evidence, save_network
from .model import evidence_ancestor_set, validate_network

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID_INPUT = 2
EXIT_INFEASIBLE = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _add_evidence_flag(parser):
    parser.add_argument(
        "--evidence",
        "-e",
        action="append",
        default=[],
        metavar="NODE=LABEL",
        help="observed outcome, ,-separated or repeated (e.g. C=true)",
    )


def _add_ais_flags(parser):
    group = parser.add_argument_group("adaptive sampler tuning")
    group.add_argument("--stage-size", type=int, default=2500,
                       help="samples per learning stage (default 2500)")
    group.add_argument("--stages", type=int, default=10,
                       help="number of learning stages (default 10)")
    group.add_argument("--rate-initial", type=float, default=0.4,
                       help="learning rate at stage 0 (default 0.4)")
    group.add_argument("--rate-final", type=float, default=0.14,
                       help="learning rate at the last stage (default 0.14)")
    group.add_argument("--theta", type=float, default=0.04,
                       help="initialization floor for small probabilities (default 0.04)")
    group.add_argument("--prob-floor", type=float, default=1e-3,
                       help="runtime floor for importance entries (default 1e-3)")
    group.add_argument("--weight-mode", choices=("last-stage-only", "inverse-sigma"),
                       default="last-stage-only",
                       help="stage weighting scheme (default last-stage-only)")
    group.add_argument("--zero-weight-stages", default=None, metavar="K,K,...",
                       help="stages weighted zero (default: all learning stages)")
    group.add_argument("--delta", type=float, default=0.05,
                       help="error-bound confidence parameter (default 0.05)")
    group.add_argument("--no-uniform-heuristic", action="store_true",
                       help="skip uniformizing parents of unlikely evidence")
    group.add_argument("--no-threshold-heuristic", action="store_true",
                       help="skip raising small initial probabilities to theta")


def _ais_config(args, total_samples: int) -> AisConfig:
    zero = None
    if args.zero_weight_stages is not None:
        zero = tuple(int(k) for k in args.zero_weight_stages.split(",") if k.strip())
    return AisConfig(
        total_samples=total_samples,
        stage_size=args.stage_size,
        stages=args.stages,
        rate_initial=args.rate_initial,
        rate_final=args.rate_final,
        theta=args.theta,
        prob_floor=args.prob_floor,
        weight_mode=args.weight_mode,
        zero_weight_stages=zero,
        delta=args.delta,
        uniform_parents_heuristic=not args.no_uniform_heuristic,
        small_prob_heuristic=not args.no_threshold_heuristic,
    )


def _format_distribution(values, precision: int) -> str:
    return "/".join(f"{v:.{precision}f}" for v in values)


def _print_marginals(net, marginals, precision: int) -> None:
    for node in net.nodes:
        if node.id in marginals:
            print(f"{node.id}: {_format_distribution(marginals[node.id], precision)}")


def build_parser() -> _Parser:
    parser = _Parser(prog="aisbn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a network file")
    p.add_argument("network")

    p = sub.add_parser("infer", help="exact evidence probability and posteriors")
    p.add_argument("--network", "-n", required=True)
    _add_evidence_flag(p)
    p.add_argument("--method", choices=("auto", "enumerate", "eliminate"), default="auto")
    p.add_argument("--cap", type=int, default=2**24,
                   help="state-space cap for enumeration (default 2^24)")
    p.add_argument("--precision", type=int, default=5)

    p = sub.add_parser("sample", help="estimate posteriors by sampling")
    p.add_argument("--network", "-n", required=True)
    _add_evidence_flag(p)
    p.add_argument("--algorithm", "-a", choices=("logic", "lw", "sis", "ais"), default="ais")
    p.add_argument("--samples", type=int, default=125_000,
                   help="total sample budget (default 125000)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads; 1 runs the deterministic single-stream mode")
    p.add_argument("--update-interval", type=int, default=2500,
                   help="samples between table updates (sis; default 2500)")
    p.add_argument("--precision", type=int, default=5)
    _add_ais_flags(p)

    p = sub.add_parser("benchmark", help="run an experiment file")
    p.add_argument("--spec", required=True, help="experiment JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-plots", action="store_true",
                   help="skip figure rendering; CSV output only")

    p = sub.add_parser("gen", help="generate a random network file")
    p.add_argument("--out", required=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--max-parents", type=int, default=3)
    p.add_argument("--max-outcomes", type=int, default=2)
    p.add_argument("--min-probability", type=float, default=0.0)
    p.add_argument("--concentration", type=float, default=0.3,
                   help="Dirichlet spread of rows; below 1 gives extreme tables")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("icpt-dump", help="learned importance tables next to exact ones")
    p.add_argument("--network", "-n", required=True)
    _add_evidence_flag(p)
    p.add_argument("--samples", type=int, default=125_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--precision", type=int, default=5)
    _add_ais_flags(p)
    return parser


def _cmd_validate(args) -> int:
    net = load_network(args.network)
    problems = validate_network(net)
    if problems:
        for problem in problems:
            print(problem, file=sys.stderr)
        return EXIT_INVALID_INPUT
    print(f"ok: {net.name} ({len(net)} nodes)")
    return EXIT_OK


def _cmd_infer(args) -> int:
    net = load_network(args.network)
    evidence = parse_evidence(net, args.evidence)
    pr = exact_pr_evidence(net, evidence, method=args.method, cap=args.cap)
    print(f"pr_evidence: {pr:.{args.precision}g}")
    if evidence:
        marginals = exact_posterior_marginals(net, evidence, method=args.method, cap=args.cap)
    else:
        marginals = exact_posterior_marginals(net, {}, method=args.method, cap=args.cap)
    _print_marginals(net, marginals, args.precision)
    return EXIT_OK


def _cmd_sample(args) -> int:
    net = load_network(args.network)
    evidence = parse_evidence(net, args.evidence)
    stream = RngStream(args.seed, 0)
    if args.algorithm == "logic":
        result = logic_sampling(net, evidence, args.samples, stream)
    elif args.algorithm == "lw":
        result = likelihood_weighting(
            net, evidence, args.samples, stream, n_threads=args.threads
        )
    elif args.algorithm == "sis":
        result = self_importance_sampling(
            net, evidence, args.samples, stream, update_interval=args.update_interval
        )
    else:
        cfg = _ais_config(args, args.samples)
        result = ais_run(net, evidence, cfg, stream)
        for stage in result.stages:
            print(
                f"stage {stage.k}: n={stage.n} estimate={stage.pr_estimate:.6g} "
                f"sigma={stage.sigma_hat:.6g} weight={stage.weight:.6g}",
                file=sys.stderr,
            )
    print(f"algorithm: {args.algorithm}")
    print(f"samples: {args.samples}")
    print(f"pr_evidence_estimate: {result.pr_estimate:.{args.precision}g}")
    print(f"variance: {result.pr_variance:.{args.precision}g}")
    if result.pr_estimate > 0.0:
        delta = getattr(args, "delta", 0.05)
        bound = relative_error_bound(result.pr_estimate, result.pr_variance, delta)
        print(f"relative_error_bound: {bound:.{args.precision}g} (delta={delta})")
    for flag in result.flags:
        print(f"flag: {flag}", file=sys.stderr)
    if result.marginals is None:
        print("marginals unavailable: every sample scored zero", file=sys.stderr)
        return EXIT_INFEASIBLE
    _print_marginals(net, result.marginals, args.precision)
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    import os

    spec = experiment_from_json(args.spec)
    base_dir = os.path.dirname(os.path.abspath(args.spec))
    report = run_experiment(spec, base_dir=base_dir, n_threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    rows_path = os.path.join(args.out, "runs.csv")
    summary_path = os.path.join(args.out, "summary.csv")
    report_to_csv(report, rows_path)
    summary_to_csv(report, summary_path)
    written = [rows_path, summary_path]
    if not args.no_plots:
        from .figures import render_report_figures

        written.extend(render_report_figures(report, args.out))
    for path in written:
        print(path)
    return EXIT_OK


def _cmd_gen(args) -> int:
    params = GeneratorParams(
        node_count=args.nodes,
        max_parents=args.max_parents,
        max_outcomes=args.max_outcomes,
        min_probability=args.min_probability,
        seed=args.seed,
        concentration=args.concentration,
    )
    net = generate_network(params)
    save_network(net, args.out)
    print(f"{args.out}: {len(net)} nodes")
    return EXIT_OK


def _cmd_icpt_dump(args) -> int:
    net = load_network(args.network)
    evidence = parse_evidence(net, args.evidence)
    cfg = _ais_config(args, args.samples)
    result = ais_run(net, evidence, cfg, RngStream(args.seed, 0))
    ancestors = sorted(evidence_ancestor_set(net, evidence))
    precision = args.precision

    lines = []
    for node_id in ancestors:
        node = net.node(node_id)
        learned = result.store.tables[node_id]
        try:
            exact = exact_icpt(net, evidence, node_id)
        except StateSpaceCapError:
            exact = None
        cpt = net.cpt(node_id).table
        for row in range(learned.shape[0]):
            label = _row_label(net, node, row)
            parts = [
                f"node {node_id} row {label}:",
                f"learned {_format_distribution(learned[row], precision)}",
            ]
            if exact is not None:
                if exact.reachable[row]:
                    parts.append(f"exact {_format_distribution(exact.table[row], precision)}")
                else:
                    parts.append("exact unreachable")
            parts.append(f"cpt {_format_distribution(cpt[row], precision)}")
            lines.append(" ".join(parts))

    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _row_label(net, node, row: int) -> str:
    if not node.parents:
        return "-"
    parts = []
    remainder = row
    for parent in reversed(node.parents):
        size = net.outcome_count(parent)
        parts.append(f"{parent}={net.node(parent).outcomes[remainder % size]}")
        remainder //= size
    return ",".join(reversed(parts))


_COMMANDS = {
    "validate": _cmd_validate,
    "infer": _cmd_infer,
    "sample": _cmd_sample,
    "benchmark": _cmd_benchmark,
    "gen": _cmd_gen,
    "icpt-dump": _cmd_icpt_dump,
}


def parse_and_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (NetworkFormatError, InvalidNetworkError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except (StateSpaceCapError, ZeroEvidenceProbabilityError, NoEffectiveSamplesError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT


def main(argv=None) -> int:
    return parse_and_dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())

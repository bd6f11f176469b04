"""Benchmark harness: synthetic networks, error metrics, and batch runs.

An experiment is a grid of cases (network plus evidence), algorithms,
and seeded repetitions.  Each run is scored against the exact oracle
with a root mean squared error over all non-evidence posterior
entries.  Results land in two CSV files, one row per run and one of
per-algorithm aggregates; per-case figures can be rendered alongside
them.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .adaptive import AisConfig, AisResult, ais_run, estimate_evidence_priors, floor_rows
from .baselines import (
    SamplerResult,
    likelihood_weighting,
    logic_sampling,
    self_importance_sampling,
)
from .engine import RngStream
from .errors import StateSpaceCapError, ZeroEvidenceProbabilityError
from .exact import DEFAULT_STATE_CAP, exact_posterior_marginals, exact_pr_evidence
from .fileio import load_network
from .model import (
    BayesianNetwork,
    Cpt,
    Evidence,
    MarginalTable,
    Node,
    normalize_rows,
)

FAILED_RUN_MSE = 1.0
ALGORITHM_NAMES = ("logic", "lw", "sis", "ais")


def mse(exact: MarginalTable, estimated: MarginalTable) -> float:
    """Root mean squared error over every posterior entry.

    Both tables must cover the same nodes with the same outcome
    counts; the mean runs over all outcomes of all nodes.
    """
    if set(exact) != set(estimated):
        raise ValueError("marginal tables cover different node sets")
    total = 0.0
    count = 0
    for node_id, row in exact.items():
        other = np.asarray(estimated[node_id], dtype=np.float64)
        row = np.asarray(row, dtype=np.float64)
        if row.shape != other.shape:
            raise ValueError(f"outcome count mismatch for node {node_id!r}")
        diff = other - row
        total += float(diff @ diff)
        count += row.shape[0]
    return math.sqrt(total / count)


@dataclass(frozen=True)
class GeneratorParams:
    """Knobs for random network generation.

    ``concentration`` is the Dirichlet parameter for CPT rows; values
    below 1 produce the skewed rows that make evidence unlikely and
    importance sampling hard.  ``min_probability`` > 0 lifts every
    entry to at least that value at the expense of each row's largest
    entry.
    """

    node_count: int
    max_parents: int = 3
    max_outcomes: int = 2
    min_probability: float = 0.0
    seed: int = 0
    concentration: float = 0.3

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("node_count must be positive")
        if self.max_parents < 0:
            raise ValueError("max_parents must be non-negative")
        if self.max_outcomes < 2:
            raise ValueError("max_outcomes must be at least 2")
        if not 0.0 <= self.min_probability < 0.5:
            raise ValueError("min_probability must be in [0, 0.5)")
        if self.concentration <= 0.0:
            raise ValueError("concentration must be positive")


def generate_network(params: GeneratorParams) -> BayesianNetwork:
    """Random DAG with skewed CPTs, deterministic in the seed.

    Node ids are zero-padded so lexicographic order matches generation
    order, which is already topological.
    """
    rng = np.random.default_rng(np.random.SeedSequence([params.seed, 0x6E65]))
    width = len(str(params.node_count - 1))
    ids = [f"n{i:0{width}d}" for i in range(params.node_count)]
    outcome_counts = rng.integers(2, params.max_outcomes + 1, size=params.node_count)

    nodes = []
    cpts = []
    for i in range(params.node_count):
        cap = min(params.max_parents, i)
        n_parents = int(rng.integers(0, cap + 1))
        parents = sorted(rng.choice(i, size=n_parents, replace=False).tolist())
        rows = 1
        for p in parents:
            rows *= int(outcome_counts[p])
        table = rng.dirichlet(
            np.full(int(outcome_counts[i]), params.concentration), size=rows
        )
        if params.min_probability > 0.0:
            table = floor_rows(table, params.min_probability)
        table = normalize_rows(table)
        outcomes = tuple(f"s{j}" for j in range(int(outcome_counts[i])))
        nodes.append(Node(ids[i], outcomes, tuple(ids[p] for p in parents)))
        cpts.append(Cpt(ids[i], table))
    return BayesianNetwork(f"random-{params.seed}", nodes, cpts)


def random_leaf_evidence(
    net: BayesianNetwork,
    count: int,
    seed: int,
    *,
    require_positive: bool = True,
    max_attempts: int = 50,
) -> Evidence:
    """Observed outcomes for ``count`` childless nodes, drawn without
    replacement; re-drawn if the evidence has probability zero."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6576]))
    with_children = {p for n in net.nodes for p in n.parents}
    leaves = [n.id for n in net.nodes if n.id not in with_children]
    count = min(count, len(leaves))
    for _ in range(max_attempts):
        chosen = rng.choice(len(leaves), size=count, replace=False)
        evidence = {
            leaves[int(i)]: int(rng.integers(0, net.outcome_count(leaves[int(i)])))
            for i in chosen
        }
        if not require_positive:
            return evidence
        try:
            if exact_pr_evidence(net, evidence) > 0.0:
                return evidence
        except StateSpaceCapError:
            return evidence
    raise ZeroEvidenceProbabilityError(
        f"could not find positive-probability evidence in {max_attempts} attempts"
    )


@dataclass(frozen=True)
class AlgorithmSpec:
    """One algorithm entry in an experiment: name, options, display label.

    Options for ``sis``: update_interval.  Options for ``ais``: any
    AisConfig field.  The sample budget always comes from the caller
    so that algorithms compete at equal budgets.
    """

    name: str
    options: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.name not in ALGORITHM_NAMES:
            raise ValueError(f"unknown algorithm {self.name!r}")
        if not self.label:
            object.__setattr__(self, "label", self.name)

    def ais_config(self, n_samples: int) -> AisConfig:
        options = {k: v for k, v in self.options.items() if k != "budget_mode"}
        if "zero_weight_stages" in options and options["zero_weight_stages"] is not None:
            options["zero_weight_stages"] = tuple(options["zero_weight_stages"])
        cfg = AisConfig(total_samples=n_samples, **options)
        if self.options.get("budget_mode") == "post-learning":
            cfg = replace(
                cfg, total_samples=cfg.stages * cfg.stage_size + n_samples
            )
        return cfg

    def run(
        self,
        net: BayesianNetwork,
        evidence: Evidence,
        n_samples: int,
        stream: RngStream,
        evidence_priors: dict[str, float] | None = None,
    ) -> SamplerResult | AisResult:
        if self.name == "logic":
            return logic_sampling(net, evidence, n_samples, stream)
        if self.name == "lw":
            return likelihood_weighting(net, evidence, n_samples, stream)
        if self.name == "sis":
            interval = int(self.options.get("update_interval", 2500))
            return self_importance_sampling(
                net, evidence, n_samples, stream, update_interval=interval
            )
        return ais_run(
            net,
            evidence,
            self.ais_config(n_samples),
            stream,
            evidence_priors=evidence_priors,
        )


@dataclass(frozen=True)
class CaseSpec:
    """A network with its evidence.

    Exactly one of ``network_file`` or ``generate`` names the network;
    exactly one of ``evidence_labels`` or ``evidence_policy_*`` names
    the evidence.
    """

    case_id: str
    network_file: str | None = None
    generate: GeneratorParams | None = None
    evidence_labels: dict[str, str] | None = None
    evidence_leaf_count: int = 0
    evidence_seed: int = 0

    def __post_init__(self):
        if (self.network_file is None) == (self.generate is None):
            raise ValueError(
                f"case {self.case_id!r}: exactly one of network_file or "
                "generate is required"
            )
        if (self.evidence_labels is None) == (self.evidence_leaf_count == 0):
            raise ValueError(
                f"case {self.case_id!r}: exactly one of evidence or an "
                "evidence policy is required"
            )


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    cases: tuple[CaseSpec, ...]
    algorithms: tuple[AlgorithmSpec, ...]
    repetitions: int = 1
    base_seed: int = 0
    budget_samples: int | None = None
    budget_seconds: float | None = None
    oracle_method: str = "auto"
    oracle_cap: int = DEFAULT_STATE_CAP

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")
        if (self.budget_samples is None) == (self.budget_seconds is None):
            raise ValueError("exactly one of budget_samples or budget_seconds is required")
        if self.budget_samples is not None and self.budget_samples < 1:
            raise ValueError("budget_samples must be positive")
        if self.budget_seconds is not None and self.budget_seconds <= 0:
            raise ValueError("budget_seconds must be positive")


@dataclass(frozen=True)
class RunRecord:
    case_id: str
    algorithm: str
    repetition: int
    seed: int
    n_samples: int
    pr_evidence_exact: float | None
    pr_evidence_est: float
    mse: float | None
    elapsed_ms: float
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class SummaryRow:
    """Aggregates of case-level mean MSE for one algorithm.

    ``effective`` rows average only repetitions that produced
    marginals; ``all`` rows charge failed repetitions the metric
    maximum of 1.  Cases without a feasible oracle are skipped.
    """

    algorithm: str
    scope: str
    cases: int
    runs: int
    effective_runs: int
    mse_mean: float
    mse_sd: float
    mse_min: float
    mse_median: float
    mse_max: float


@dataclass
class ExperimentReport:
    spec_name: str
    rows: list[RunRecord]
    summary: list[SummaryRow]

    def rows_without_timing(self) -> list[RunRecord]:
        """Rows with wall-clock fields zeroed, for determinism checks."""
        return [replace(r, elapsed_ms=0.0) for r in self.rows]


def summarize(rows: list[RunRecord]) -> list[SummaryRow]:
    by_algorithm: dict[str, dict[str, list[RunRecord]]] = {}
    for row in rows:
        by_algorithm.setdefault(row.algorithm, {}).setdefault(row.case_id, []).append(row)

    summary: list[SummaryRow] = []
    for algorithm in sorted(by_algorithm):
        cases = by_algorithm[algorithm]
        for scope in ("effective", "all"):
            case_means = []
            runs = 0
            effective_runs = 0
            for case_rows in cases.values():
                scored = [r for r in case_rows if r.pr_evidence_exact is not None]
                if not scored:
                    continue
                runs += len(scored)
                effective = [r.mse for r in scored if r.mse is not None]
                effective_runs += len(effective)
                if scope == "effective":
                    values = effective
                else:
                    values = effective + [FAILED_RUN_MSE] * (len(scored) - len(effective))
                if values:
                    case_means.append(float(np.mean(values)))
            if not case_means:
                continue
            arr = np.array(case_means)
            summary.append(
                SummaryRow(
                    algorithm,
                    scope,
                    len(case_means),
                    runs,
                    effective_runs,
                    float(arr.mean()),
                    float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
                    float(arr.min()),
                    float(np.median(arr)),
                    float(arr.max()),
                )
            )
    return summary


def _resolve_case(case: CaseSpec, base_dir: str) -> tuple[BayesianNetwork, Evidence]:
    if case.network_file is not None:
        path = case.network_file
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        net = load_network(path)
    else:
        net = generate_network(case.generate)
    if case.evidence_labels is not None:
        from .model import evidence_from_labels

        evidence = evidence_from_labels(net, case.evidence_labels)
    else:
        evidence = random_leaf_evidence(
            net, case.evidence_leaf_count, case.evidence_seed
        )
    return net, evidence


def _budget_for(spec: ExperimentSpec, algorithm: AlgorithmSpec, net, evidence) -> int:
    if spec.budget_samples is not None:
        return spec.budget_samples
    # Wall-time budgets convert to a sample count through a short
    # timing probe, so every repetition still runs a fixed, seeded
    # sample count.  The conversion is approximate by design.
    probe = 2000
    start = time.perf_counter()
    algorithm.run(net, evidence, probe, RngStream(0, 0))
    per_sample = max(time.perf_counter() - start, 1e-9) / probe
    return max(probe, int(spec.budget_seconds / per_sample))


def run_experiment(
    spec: ExperimentSpec,
    *,
    base_dir: str = ".",
    n_threads: int = 1,
) -> ExperimentReport:
    """Run the full grid and return rows plus per-algorithm aggregates.

    Every repetition draws from RngStream(base_seed + repetition,
    case index), so reports are reproducible run to run; with
    ``n_threads`` > 1 whole cases run concurrently and the report is
    assembled in case order, leaving the output unchanged.
    """

    def run_case(case_index: int) -> list[RunRecord]:
        case = spec.cases[case_index]
        net, evidence = _resolve_case(case, base_dir)
        try:
            pr_exact = exact_pr_evidence(
                net, evidence, method=spec.oracle_method, cap=spec.oracle_cap
            )
            exact_marginals = exact_posterior_marginals(
                net, evidence, method=spec.oracle_method, cap=spec.oracle_cap
            )
        except StateSpaceCapError:
            pr_exact = None
            exact_marginals = None
        priors = estimate_evidence_priors(net, evidence, rng=RngStream(spec.base_seed, 0))
        records = []
        for algorithm in spec.algorithms:
            n_samples = _budget_for(spec, algorithm, net, evidence)
            for repetition in range(spec.repetitions):
                seed = spec.base_seed + repetition
                stream = RngStream(seed, case_index)
                start = time.perf_counter()
                result = algorithm.run(net, evidence, n_samples, stream, priors)
                elapsed_ms = (time.perf_counter() - start) * 1000.0
                if result.marginals is not None and exact_marginals is not None:
                    run_mse = mse(exact_marginals, result.marginals)
                else:
                    run_mse = None
                records.append(
                    RunRecord(
                        case.case_id,
                        algorithm.label,
                        repetition,
                        seed,
                        n_samples,
                        pr_exact,
                        result.pr_estimate,
                        run_mse,
                        elapsed_ms,
                        tuple(result.flags),
                    )
                )
        return records

    if n_threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            blocks = list(pool.map(run_case, range(len(spec.cases))))
    else:
        blocks = [run_case(i) for i in range(len(spec.cases))]
    rows = [record for block in blocks for record in block]
    return ExperimentReport(spec.name, rows, summarize(rows))


def convergence_ratio(
    net: BayesianNetwork,
    evidence: Evidence,
    algorithm: AlgorithmSpec,
    n_samples: int,
    seeds,
    *,
    exact_marginals: MarginalTable | None = None,
    stream_id: int = 0,
) -> float:
    """Mean MSE at ``n_samples`` divided by mean MSE at four times as
    many, averaged over a seed batch.  Near 2 when the error decays at
    the canonical square-root rate."""
    if exact_marginals is None:
        exact_marginals = exact_posterior_marginals(net, evidence)
    priors = estimate_evidence_priors(net, evidence, rng=RngStream(0, stream_id))
    errors = {1: [], 4: []}
    for seed in seeds:
        for factor in (1, 4):
            result = algorithm.run(
                net, evidence, factor * n_samples, RngStream(seed, stream_id), priors
            )
            if result.marginals is None:
                raise ZeroEvidenceProbabilityError(
                    f"seed {seed} produced no effective samples"
                )
            errors[factor].append(mse(exact_marginals, result.marginals))
    return float(np.mean(errors[1]) / np.mean(errors[4]))


# Experiment files are JSON with the same field names as the spec
# dataclasses; see the README for a worked example.


def experiment_from_json(path: str | os.PathLike) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return experiment_from_dict(data)


def experiment_from_dict(data: dict) -> ExperimentSpec:
    cases = []
    for entry in data.get("cases", []):
        generate = entry.get("generate")
        policy = entry.get("evidence_policy") or {}
        cases.append(
            CaseSpec(
                case_id=entry["id"],
                network_file=entry.get("network_file"),
                generate=GeneratorParams(**generate) if generate else None,
                evidence_labels=entry.get("evidence"),
                evidence_leaf_count=int(policy.get("leaf_count", 0)),
                evidence_seed=int(policy.get("seed", 0)),
            )
        )
    algorithms = tuple(
        AlgorithmSpec(
            name=entry["name"],
            options=entry.get("options", {}),
            label=entry.get("label", ""),
        )
        for entry in data.get("algorithms", [])
    )
    budget = data.get("budget", {})
    oracle = data.get("oracle", {})
    return ExperimentSpec(
        name=data.get("name", "experiment"),
        cases=tuple(cases),
        algorithms=algorithms,
        repetitions=int(data.get("repetitions", 1)),
        base_seed=int(data.get("base_seed", 0)),
        budget_samples=budget.get("samples"),
        budget_seconds=budget.get("seconds"),
        oracle_method=oracle.get("method", "auto"),
        oracle_cap=int(oracle.get("cap", DEFAULT_STATE_CAP)),
    )


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_to_csv(report: ExperimentReport, path: str | os.PathLike) -> None:
    import csv

    columns = [
        "case_id",
        "algorithm",
        "repetition",
        "seed",
        "n_samples",
        "pr_evidence_exact",
        "pr_evidence_est",
        "mse",
        "elapsed_ms",
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in report.rows:
            writer.writerow([_format_value(getattr(row, c)) for c in columns])


def summary_to_csv(report: ExperimentReport, path: str | os.PathLike) -> None:
    import csv

    columns = [
        "algorithm",
        "scope",
        "cases",
        "runs",
        "effective_runs",
        "mse_mean",
        "mse_sd",
        "mse_min",
        "mse_median",
        "mse_max",
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in report.summary:
            writer.writerow([_format_value(getattr(row, c)) for c in columns])

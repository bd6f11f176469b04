import csv
import json

import numpy as np
import pytest

from aisbn import (
    AlgorithmSpec,
    CaseSpec,
    ExperimentSpec,
    GeneratorParams,
    convergence_ratio,
    exact_posterior_marginals,
    exact_pr_evidence,
    generate_network,
    mse,
    random_leaf_evidence,
    run_experiment,
    validate_network,
)
from aisbn.bench import (
    FAILED_RUN_MSE,
    RunRecord,
    experiment_from_dict,
    experiment_from_json,
    report_to_csv,
    summarize,
    summary_to_csv,
)


class TestMse:
    def test_identical_tables(self):
        tables = {"X": np.array([0.3, 0.7]), "Y": np.array([0.2, 0.5, 0.3])}
        assert mse(tables, tables) == 0.0

    def test_uniform_small_offset(self):
        exact = {"X": np.array([0.5, 0.5]), "Y": np.array([0.5, 0.5])}
        est = {"X": np.array([0.51, 0.49]), "Y": np.array([0.49, 0.51])}
        assert mse(exact, est) == pytest.approx(0.01, abs=1e-12)

    def test_maximum(self):
        assert mse({"X": np.array([0.0, 1.0])}, {"X": np.array([1.0, 0.0])}) == \
            pytest.approx(1.0, abs=1e-12)

    def test_mismatched_nodes_rejected(self):
        with pytest.raises(ValueError):
            mse({"X": np.array([1.0, 0.0])}, {"Y": np.array([1.0, 0.0])})
        with pytest.raises(ValueError):
            mse({"X": np.array([1.0, 0.0])}, {"X": np.array([1.0, 0.0, 0.0])})


class TestGenerateNetwork:
    def test_deterministic_per_seed(self):
        params = GeneratorParams(node_count=15, max_outcomes=3, seed=4)
        first = generate_network(params)
        second = generate_network(params)
        assert [n.id for n in first.nodes] == [n.id for n in second.nodes]
        for a, b in zip(first.nodes, second.nodes):
            assert a.parents == b.parents
        for a, b in zip(first.cpts, second.cpts):
            np.testing.assert_array_equal(a.table, b.table)
        other = generate_network(GeneratorParams(node_count=15, max_outcomes=3, seed=5))
        assert any(
            not np.array_equal(a.table, b.table)
            for a, b in zip(first.cpts, other.cpts)
        )

    def test_respects_limits_and_validates(self):
        params = GeneratorParams(
            node_count=25, max_parents=2, max_outcomes=4, seed=7
        )
        net = generate_network(params)
        assert validate_network(net) == []
        assert all(len(n.parents) <= 2 for n in net.nodes)
        assert all(2 <= len(n.outcomes) <= 4 for n in net.nodes)

    def test_ids_sort_topologically(self):
        from aisbn import topological_order

        net = generate_network(GeneratorParams(node_count=12, seed=0))
        ids = [n.id for n in net.nodes]
        assert ids == sorted(ids)
        assert topological_order(net) == ids

    def test_min_probability_floor(self):
        params = GeneratorParams(node_count=20, min_probability=1e-4, seed=3)
        net = generate_network(params)
        smallest = min(float(c.table.min()) for c in net.cpts)
        assert smallest >= 1e-4 - 1e-12

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"node_count": 0},
            {"node_count": 5, "max_parents": -1},
            {"node_count": 5, "max_outcomes": 1},
            {"node_count": 5, "min_probability": 0.5},
            {"node_count": 5, "concentration": 0.0},
        ],
    )
    def test_rejects_bad_params(self, kwargs):
        with pytest.raises(ValueError):
            GeneratorParams(**kwargs)


class TestRandomLeafEvidence:
    def test_deterministic_and_leaf_only(self):
        net = generate_network(GeneratorParams(node_count=20, seed=9))
        first = random_leaf_evidence(net, 4, seed=2)
        second = random_leaf_evidence(net, 4, seed=2)
        assert first == second
        with_children = {p for n in net.nodes for p in n.parents}
        assert all(node_id not in with_children for node_id in first)
        assert exact_pr_evidence(net, first) > 0.0

    def test_count_capped_at_leaf_count(self, chain3):
        evidence = random_leaf_evidence(chain3, 5, seed=0)
        assert list(evidence) == ["C"]


class TestAlgorithmSpec:
    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            AlgorithmSpec("gibbs")

    def test_label_defaults_to_name(self):
        assert AlgorithmSpec("lw").label == "lw"
        assert AlgorithmSpec("lw", label="baseline").label == "baseline"

    def test_ais_config_budget(self):
        spec = AlgorithmSpec("ais", {"stage_size": 100, "stages": 4})
        assert spec.ais_config(5000).total_samples == 5000
        post = AlgorithmSpec(
            "ais", {"stage_size": 100, "stages": 4, "budget_mode": "post-learning"}
        )
        assert post.ais_config(5000).total_samples == 5400

    def test_ais_config_zero_weight_list(self):
        spec = AlgorithmSpec("ais", {"zero_weight_stages": [0, 1]})
        assert spec.ais_config(1000).zero_weight_stages == (0, 1)


class TestSpecValidation:
    def test_case_needs_exactly_one_network_source(self):
        with pytest.raises(ValueError):
            CaseSpec("c", evidence_leaf_count=1)
        with pytest.raises(ValueError):
            CaseSpec(
                "c",
                network_file="x.bn",
                generate=GeneratorParams(node_count=3),
                evidence_leaf_count=1,
            )

    def test_case_needs_exactly_one_evidence_source(self):
        with pytest.raises(ValueError):
            CaseSpec("c", network_file="x.bn")
        with pytest.raises(ValueError):
            CaseSpec(
                "c",
                network_file="x.bn",
                evidence_labels={"A": "t"},
                evidence_leaf_count=2,
            )

    def test_experiment_needs_exactly_one_budget(self):
        case = CaseSpec("c", network_file="x.bn", evidence_leaf_count=1)
        algorithms = (AlgorithmSpec("lw"),)
        with pytest.raises(ValueError):
            ExperimentSpec("e", (case,), algorithms)
        with pytest.raises(ValueError):
            ExperimentSpec(
                "e", (case,), algorithms, budget_samples=10, budget_seconds=1.0
            )


def _record(case_id, algorithm, repetition, mse_value, pr_exact=0.4):
    return RunRecord(
        case_id, algorithm, repetition, repetition, 100, pr_exact, 0.41,
        mse_value, 5.0,
    )


class TestSummarize:
    def test_case_means_and_scopes(self):
        rows = [
            _record("c1", "lw", 0, 0.1),
            _record("c1", "lw", 1, 0.3),
            _record("c2", "lw", 0, 0.2),
            _record("c2", "lw", 1, None),
        ]
        by_scope = {s.scope: s for s in summarize(rows)}
        effective = by_scope["effective"]
        assert effective.cases == 2
        assert effective.runs == 4
        assert effective.effective_runs == 3
        assert effective.mse_mean == pytest.approx(0.2)
        everything = by_scope["all"]
        # The failed repetition is charged the metric maximum of 1.
        assert everything.mse_mean == pytest.approx(
            np.mean([0.2, (0.2 + FAILED_RUN_MSE) / 2])
        )

    def test_oracle_less_cases_skipped(self):
        rows = [
            _record("c1", "lw", 0, 0.1),
            _record("c2", "lw", 0, None, pr_exact=None),
        ]
        summary = summarize(rows)
        assert all(s.cases == 1 and s.runs == 1 for s in summary)

    def test_empty_when_nothing_scored(self):
        assert summarize([_record("c", "lw", 0, None, pr_exact=None)]) == []


@pytest.fixture(scope="module")
def small_spec(request):
    fixture_dir = request.config.rootpath / "tests" / "fixtures"
    cases = (
        CaseSpec(
            "chain",
            network_file=str(fixture_dir / "chain3.bn"),
            evidence_labels={"C": "true"},
        ),
        CaseSpec(
            "synthetic",
            generate=GeneratorParams(node_count=12, min_probability=1e-3, seed=5),
            evidence_leaf_count=2,
            evidence_seed=5,
        ),
    )
    algorithms = (
        AlgorithmSpec("logic"),
        AlgorithmSpec("lw"),
        AlgorithmSpec("sis", {"update_interval": 200}),
        AlgorithmSpec("ais", {"stage_size": 50, "stages": 4}),
    )
    return ExperimentSpec(
        "small", cases, algorithms, repetitions=2, base_seed=3, budget_samples=800
    )


class TestRunExperiment:
    def test_row_grid_and_oracle(self, small_spec):
        report = run_experiment(small_spec)
        assert len(report.rows) == 2 * 4 * 2
        chain_rows = [r for r in report.rows if r.case_id == "chain"]
        for row in chain_rows:
            assert row.pr_evidence_exact == pytest.approx(0.417)
            assert row.n_samples == 800
            assert row.mse is not None
        assert {r.seed for r in report.rows} == {3, 4}

    def test_deterministic_and_thread_invariant(self, small_spec):
        first = run_experiment(small_spec)
        second = run_experiment(small_spec)
        threaded = run_experiment(small_spec, n_threads=2)
        assert first.rows_without_timing() == second.rows_without_timing()
        assert first.rows_without_timing() == threaded.rows_without_timing()
        assert first.summary == threaded.summary

    def test_summary_consistent_with_rows(self, small_spec):
        report = run_experiment(small_spec)
        assert report.summary == summarize(report.rows)
        assert {s.algorithm for s in report.summary} == {"logic", "lw", "sis", "ais"}

    def test_wall_time_budget(self, chain3_file):
        spec = ExperimentSpec(
            "timed",
            (CaseSpec("c", network_file=str(chain3_file), evidence_labels={"C": "true"}),),
            (AlgorithmSpec("lw"),),
            budget_seconds=0.05,
        )
        report = run_experiment(spec)
        assert len(report.rows) == 1
        assert report.rows[0].n_samples >= 2000


class TestCsv:
    def test_report_columns_and_values(self, small_spec, tmp_path):
        report = run_experiment(small_spec)
        runs_path = tmp_path / "runs.csv"
        report_to_csv(report, runs_path)
        with open(runs_path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "case_id", "algorithm", "repetition", "seed", "n_samples",
            "pr_evidence_exact", "pr_evidence_est", "mse", "elapsed_ms",
        ]
        assert len(rows) == len(report.rows) + 1
        first = report.rows[0]
        assert rows[1][0] == first.case_id
        assert float(rows[1][6]) == first.pr_evidence_est

    def test_none_serializes_empty(self, tmp_path):
        report_rows = [_record("c", "lw", 0, None, pr_exact=None)]
        from aisbn.bench import ExperimentReport

        report = ExperimentReport("x", report_rows, summarize(report_rows))
        path = tmp_path / "runs.csv"
        report_to_csv(report, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[1][5] == ""
        assert rows[1][7] == ""

    def test_summary_csv(self, small_spec, tmp_path):
        report = run_experiment(small_spec)
        path = tmp_path / "summary.csv"
        summary_to_csv(report, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][:3] == ["algorithm", "scope", "cases"]
        assert len(rows) == len(report.summary) + 1


class TestExperimentFromJson:
    def test_full_round_trip(self, tmp_path):
        data = {
            "name": "demo",
            "repetitions": 3,
            "base_seed": 11,
            "budget": {"samples": 5000},
            "oracle": {"method": "eliminate", "cap": 1024},
            "cases": [
                {"id": "file-case", "network_file": "net.bn", "evidence": {"A": "t"}},
                {
                    "id": "gen-case",
                    "generate": {"node_count": 30, "min_probability": 1e-4, "seed": 2},
                    "evidence_policy": {"leaf_count": 5, "seed": 8},
                },
            ],
            "algorithms": [
                {"name": "lw"},
                {"name": "ais", "options": {"stages": 5}, "label": "ais-5"},
            ],
        }
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(data))
        spec = experiment_from_json(path)
        assert spec.name == "demo"
        assert spec.repetitions == 3
        assert spec.base_seed == 11
        assert spec.budget_samples == 5000
        assert spec.budget_seconds is None
        assert spec.oracle_method == "eliminate"
        assert spec.oracle_cap == 1024
        assert spec.cases[0].network_file == "net.bn"
        assert spec.cases[0].evidence_labels == {"A": "t"}
        assert spec.cases[1].generate.node_count == 30
        assert spec.cases[1].evidence_leaf_count == 5
        assert spec.cases[1].evidence_seed == 8
        assert spec.algorithms[1].label == "ais-5"
        assert spec.algorithms[1].options == {"stages": 5}

    def test_missing_budget_rejected(self):
        with pytest.raises(ValueError):
            experiment_from_dict(
                {
                    "cases": [
                        {"id": "c", "network_file": "x.bn", "evidence": {"A": "t"}}
                    ],
                    "algorithms": [{"name": "lw"}],
                }
            )


def test_convergence_ratio_near_two(chain3):
    exact = exact_posterior_marginals(chain3, {"C": 1})
    ratio = convergence_ratio(
        chain3,
        {"C": 1},
        AlgorithmSpec("lw"),
        400,
        seeds=range(12),
        exact_marginals=exact,
    )
    assert 1.2 < ratio < 3.2

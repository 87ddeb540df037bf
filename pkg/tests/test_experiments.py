"""Learning-curve plumbing: seed grids, sweep execution, result output."""

import json

import pytest

from trajstitch import ConfigurationError
from trajstitch.experiments import (
    LearningCurveConfig,
    QuerySpec,
    intensity_seed_grid,
    learning_curve,
    summarize,
    write_results_csv,
    write_results_json,
)


class TestSeedGrid:
    def test_count_and_ranges(self):
        grid = intensity_seed_grid(9)
        assert len(grid) == 9
        for lo, hi, day in grid:
            assert 0.0 < lo < 100.0
            assert hi == 100.0
            assert 0.0 < day < 180.0

    def test_non_square_counts(self):
        assert len(intensity_seed_grid(6)) == 6
        assert len(intensity_seed_grid(7)) == 7
        assert len(intensity_seed_grid(1)) == 1

    def test_distinct_cells(self):
        grid = intensity_seed_grid(12)
        assert len(set(grid)) == 12

    def test_invalid_count(self):
        with pytest.raises(ConfigurationError):
            intensity_seed_grid(0)


class TestConfigValidation:
    def test_defaults_valid(self):
        LearningCurveConfig().validate()

    def test_unknown_algorithm(self):
        with pytest.raises(ConfigurationError, match="warp"):
            LearningCurveConfig(algorithms=("warp",)).validate()

    def test_size_below_one_trajectory(self):
        with pytest.raises(ConfigurationError, match="below one seed trajectory"):
            LearningCurveConfig(db_sizes=(5,), horizon=20).validate()

    def test_query_spec_builder(self, ember_mdp):
        spec = QuerySpec("fuel", (0.25,), feature="canopy")
        policy = spec.build(ember_mdp)
        assert policy.feature == "canopy"
        assert spec.params_label == "0.25"
        # multi-parameter labels must stay one CSV cell
        assert QuerySpec("intensity", (75.0, 95.0, 120.0)).params_label == "75/95/120"


@pytest.fixture(scope="module")
def micro_rows():
    config = LearningCurveConfig(
        mdp_params={"horizon": 4}, db_sizes=(16, 32), horizon=4, n=2,
        seeds=(0, 1), algorithms=("mfmci", "mfmci_biased"),
        queries=(QuerySpec("location", (0.5,)),),
        truth_n=3, bootstrap_reps=2,
    )
    return learning_curve(config)


class TestSweep:
    def test_row_grid_is_complete(self, micro_rows):
        assert len(micro_rows) == 2 * 2 * 1 * 2  # seeds x sizes x queries x algs
        cells = {(r["seed"], r["db_size"], r["algorithm"]) for r in micro_rows}
        assert len(cells) == len(micro_rows)

    def test_rows_carry_floor_and_baseline(self, micro_rows):
        for row in micro_rows:
            assert row["weighted_error"] >= 0.0
            assert row["bootstrap_floor"] >= 0.0
            assert row["random_baseline"] >= 0.0
            assert row["n_used"] >= 1

    def test_rerun_reproduces_rows(self, micro_rows):
        config = LearningCurveConfig(
            mdp_params={"horizon": 4}, db_sizes=(16, 32), horizon=4, n=2,
            seeds=(0, 1), algorithms=("mfmci", "mfmci_biased"),
            queries=(QuerySpec("location", (0.5,)),),
            truth_n=3, bootstrap_reps=2,
        )
        assert learning_curve(config) == micro_rows

    def test_on_row_streams_results(self):
        config = LearningCurveConfig(
            mdp_params={"horizon": 4}, db_sizes=(16,), horizon=4, n=2,
            seeds=(0,), algorithms=("mfmci",),
            queries=(QuerySpec("location", (0.5,)),),
            truth_n=2, bootstrap_reps=2,
        )
        seen = []
        rows = learning_curve(config, on_row=seen.append)
        assert seen == rows


class TestResultOutput:
    def test_summarize_groups_by_cell(self, micro_rows):
        cells = summarize(micro_rows)["cells"]
        assert len(cells) == 4  # 2 sizes x 2 algorithms, seeds averaged
        for cell in cells:
            assert cell["seeds"] == [0, 1]
            assert cell["mean_weighted_error"] >= 0.0

    def test_csv_layout(self, micro_rows, tmp_path):
        path = tmp_path / "results.csv"
        write_results_csv(micro_rows, str(path))
        lines = path.read_text().splitlines()
        assert lines[0].split(",")[0] == "algorithm"
        assert len(lines) == 1 + len(micro_rows)
        assert lines[1].split(",")[0] == "mfmci"

    def test_json_payload(self, micro_rows, tmp_path):
        path = tmp_path / "summary.json"
        write_results_json(micro_rows, str(path), status="complete")
        payload = json.loads(path.read_text())
        assert payload["status"] == "complete"
        assert len(payload["rows"]) == len(micro_rows)
        assert "error" not in payload

    def test_json_failure_status(self, micro_rows, tmp_path):
        path = tmp_path / "failed.json"
        write_results_json(micro_rows[:1], str(path), status="failed", error="boom")
        payload = json.loads(path.read_text())
        assert payload["status"] == "failed"
        assert payload["error"] == "boom"

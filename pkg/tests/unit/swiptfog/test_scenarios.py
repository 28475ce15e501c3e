import math
import os

import pandas as pd
import pytest

from swiptfog.models import LinkGains
from swiptfog.scenarios import (MAP_CSI_ERROR, MISMATCH_COLUMNS, SCENARIOS, SWEEP_COLUMNS, THREADS_ENV, ScenarioRunner,
                                aggregate, crossovers, mode_energies, run_named, worker_count)


@pytest.mark.unit
class TestHelpers:
    @pytest.fixture(autouse=True)
    def setup_and_teardown(self):
        self.original_env = os.environ.copy()
        os.environ.pop(THREADS_ENV, None)
        yield
        os.environ.clear()
        os.environ.update(self.original_env)

    def test_worker_count(self, small_run):
        run = small_run.model_copy(update={"threads": 4})
        assert worker_count(run) == 4
        os.environ[THREADS_ENV] = "2"
        assert worker_count(run) == 2
        os.environ[THREADS_ENV] = "0"
        assert worker_count(run) == 1
        os.environ[THREADS_ENV] = "many"
        assert worker_count(run) == 4

    def test_mode_energies_selects_cheaper(self, table_params, reference_gains):
        row = mode_energies(table_params, reference_gains)
        assert row["e_selected"] == min(row["e_local"], row["e_offload"])
        assert row["mode"] == ("offload" if row["e_offload"] < row["e_local"] else "local")

    def test_mode_energies_infeasible(self, moderate_params):
        row = mode_energies(moderate_params, LinkGains(g_ap_u=1e-10, g_uf=1e-3, g_fu=1e-3))
        assert row["mode"] == "harvest_only"
        assert all(math.isnan(row[key]) for key in ("e_local", "e_offload", "e_selected"))

    def test_aggregate_skips_missing(self):
        samples = [
            {**dict.fromkeys(SWEEP_COLUMNS, math.nan), "e_local": 1.0, "e_offload": 3.0, "mode": "local"},
            {**dict.fromkeys(SWEEP_COLUMNS, math.nan), "e_local": math.nan, "e_offload": 1.0, "mode": "offload"},
        ]
        row = aggregate(samples)
        assert row["e_local"] == 1.0
        assert row["e_offload"] == 2.0
        assert math.isnan(row["e_cpt"])
        assert row["feasible_local"] == 0.5
        assert row["feasible_offload"] == 1.0
        assert row["frac_offload"] == 0.5
        assert row["frac_harvest_only"] == 0.0

    def test_crossovers(self):
        assert crossovers([1.0, 2.0, 3.0], [0.0, 2.0, 4.0], [1.0, 1.0, 1.0]) == [1.5]
        assert crossovers([1.0, 100.0], [0.0, 2.0], [1.0, 1.0], log_x=True) == pytest.approx([10.0])
        assert crossovers([1.0, 2.0], [1.0, 5.0], [1.0, 1.0]) == [1.0]
        assert crossovers([1.0, 2.0, 3.0], [0.0, math.nan, 4.0], [1.0, 1.0, 1.0]) == []
        assert crossovers([1.0, 2.0], [0.0, 1.0], [1.0, 1.0]) == [2.0]


@pytest.mark.slow
class TestScenarios:
    def test_registry(self):
        assert set(SCENARIOS) == {"sweep-k", "sweep-dist", "line-placement", "placement-grid", "sweep-pap",
                                  "sweep-beta", "frames", "multiuser", "csi-error"}
        with pytest.raises(KeyError):
            run_named("sweep-q", None, None)

    def test_sweep_k_table(self, table_params, small_run):
        result = run_named("sweep-k", table_params, small_run)
        table = result.tables[0]
        assert table.name == "sweep-k"
        assert list(table.frame.columns) == ["k_ops", *SWEEP_COLUMNS]
        assert len(table.frame) == small_run.sweep_points
        assert table.frame["k_ops"].iloc[0] == pytest.approx(1e2)
        assert table.frame["k_ops"].iloc[-1] == pytest.approx(1e5)
        assert set(result.crossovers) == {"k_ops"}

    def test_local_energy_rises_with_complexity(self, table_params, small_run):
        frame = run_named("sweep-k", table_params, small_run).tables[0].frame
        local = frame["e_local"].dropna().tolist()
        assert local == sorted(local)

    def test_reruns_are_identical(self, table_params, small_run):
        first = run_named("sweep-dist", table_params, small_run).tables[0].frame
        second = run_named("sweep-dist", table_params, small_run).tables[0].frame
        pd.testing.assert_frame_equal(first, second)

    def test_threads_do_not_change_results(self, table_params, small_run):
        serial = ScenarioRunner(table_params, small_run, threads=1).csi_error().tables[0].frame
        pooled = ScenarioRunner(table_params, small_run, threads=3).csi_error().tables[0].frame
        pd.testing.assert_frame_equal(serial, pooled)

    def test_placement_grid_skips_hap_and_fs(self, table_params, small_run):
        result = run_named("placement-grid", table_params, small_run)
        frame = result.tables[0].frame
        assert len(frame) == small_run.grid_res ** 2 - 2
        assert sum(result.summary[label] for label in ("local", "offload", "infeasible")) == len(frame)
        assert set(frame["mode"]) <= {"local", "offload", "infeasible"}

    def test_frames_tables(self, table_params, small_run):
        result = run_named("frames", table_params, small_run)
        names = [t.name for t in result.tables]
        assert names == ["frames", "frames-trace-18", "frames-trace-20"]
        assert len(result.tables[0].frame) == small_run.n_frames * len(small_run.frame_distances)
        assert set(result.summary) == {"18", "20"}

    def test_multiuser_best_order_dominates(self, table_params, small_run):
        result = run_named("multiuser", table_params, small_run)
        frame = result.tables[0].frame
        assert frame["n_mu"].tolist() == small_run.mu_counts
        assert (frame["exhaustive_le_greedy"] == 1.0).all()
        assert (frame["exhaustive"] <= frame["greedy"]).all()
        assert (frame["exhaustive"] <= frame["random"]).all()
        assert set(result.timings["mean_schedule_seconds"]) == {"2", "3"}

    def test_perfect_csi_costs_nothing(self, table_params, small_run):
        frame = run_named("csi-error", table_params, small_run).tables[0].frame
        exact = frame[frame["eps"] == 0.0].iloc[0]
        assert exact["rel_increase"] == pytest.approx(0.0, abs=1e-9)
        assert exact["outage_rate"] == 0.0
        assert exact["mode_mismatch_rate"] == 0.0

    def test_csi_error_has_no_false_outages(self, table_params, small_run):
        result = run_named("csi-error", table_params, small_run)
        frame = result.tables[0].frame
        assert (frame["outage_rate"] == 0.0).all()
        assert result.summary["both_infeasible"] == 0

    def test_csi_error_mismatch_map(self, table_params, small_run):
        result = run_named("csi-error", table_params, small_run)
        assert [t.name for t in result.tables] == ["csi-error", "csi-error-map"]
        grid = result.tables[1]
        assert list(grid.frame.columns) == list(MISMATCH_COLUMNS)
        assert len(grid.frame) == 9
        assert (grid.frame["eps"] == MAP_CSI_ERROR).all()
        assert grid.frame["mismatch_rate"].dropna().between(0.0, 1.0).all()
        assert set(grid.frame["mode"]) <= {"local", "offload", "infeasible"}


@pytest.mark.slow
class TestReferenceCrossovers:
    """Where the mode preference flips at the reference deployment, and where it cannot."""

    @pytest.fixture
    def run(self, small_run):
        return small_run.model_copy(update={"realizations": 50, "sweep_points": 31, "n_frames": 100})

    def test_beta_crossover_with_weak_feedback_link(self, table_params, run):
        params = table_params.model_copy(update={"p_fu_max": 4e-11})
        found = run_named("sweep-beta", params, run).crossovers["beta"]
        assert len(found) == 1
        assert 50.0 <= found[0] <= 200.0

    def test_beta_crossover_at_default_feedback_power(self, table_params, run):
        found = run_named("sweep-beta", table_params, run).crossovers["beta"]
        assert len(found) == 1
        assert 500.0 <= found[0] <= 1000.0

    @pytest.mark.parametrize("name, axis", [("sweep-k", "k_ops"), ("sweep-dist", "d_ap_u"),
                                            ("line-placement", "d_ap_u")])
    def test_offload_preferred_at_reference_complexity(self, table_params, run, name, axis):
        result = run_named(name, table_params, run)
        frame = result.tables[0].frame.dropna(subset=["e_local", "e_offload"])
        assert len(frame) > 0
        assert (frame["e_offload"] < frame["e_local"]).all()
        assert result.crossovers[axis] == []

    def test_frames_at_eighteen_meters_accumulate(self, table_params, run):
        summary = run_named("frames", table_params, run.model_copy(update={"realizations": 20})).summary["18"]
        assert summary["seeds_with_harvest_only"] == 0.0
        assert summary["mean_storage_nondecreasing"]

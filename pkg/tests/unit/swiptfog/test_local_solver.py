import math

import numpy as np
import pytest

from swiptfog.exceptions import InfeasibleModeError
from swiptfog.local_solver import (computing_time, local_energy, local_feasible, local_rho, reception_time,
                                   solve_local)
from swiptfog.oracle import grid_search_local

G_MODERATE = 1e-6


@pytest.mark.solver
class TestLocalClosedForm:
    def test_reception_and_computing_split_the_block(self, moderate_params):
        assert reception_time(moderate_params) == pytest.approx(0.8)
        assert computing_time(moderate_params) == pytest.approx(0.2)

    def test_rho_meets_rate_exactly(self, moderate_params):
        rho = local_rho(moderate_params, G_MODERATE)
        assert rho == pytest.approx(2.0 ** 0.25 - 1.0)
        tau = reception_time(moderate_params)
        rate = moderate_params.bandwidth * tau * math.log2(1.0 + rho * moderate_params.p_ap * G_MODERATE
                                                           / moderate_params.noise_n)
        assert rate == pytest.approx(moderate_params.bits_per_block)

    def test_solution_ledger(self, moderate_params):
        solution = solve_local(moderate_params, G_MODERATE)
        assert solution.mode == "local"
        assert solution.e_id == pytest.approx(2e-6)
        assert solution.e_cpt == pytest.approx(1.8e-9)
        assert solution.e_eh == pytest.approx(0.6 * (1.0 - solution.rho) * 1e-6 * 0.8)
        assert solution.e_u == pytest.approx(solution.e_id + solution.e_cpt - solution.e_eh)
        assert solution.time_used == pytest.approx(moderate_params.t_b)

    def test_matches_energy_function(self, moderate_params):
        solution = solve_local(moderate_params, G_MODERATE, iota=1e-7, e_s=2e-7)
        assert local_energy(moderate_params, G_MODERATE, 1e-7, 2e-7) == pytest.approx(solution.e_u, rel=1e-12)

    def test_credit_and_storage_shift_energy(self, moderate_params):
        base = solve_local(moderate_params, G_MODERATE)
        shifted = solve_local(moderate_params, G_MODERATE, iota=1e-7, e_s=3e-7)
        assert shifted.e_u == pytest.approx(base.e_u - 4e-7)
        assert shifted.rho == base.rho
        assert shifted.tau_ipt == base.tau_ipt

    def test_energy_falls_with_gain(self, table_params):
        energies = [solve_local(table_params, g).e_u for g in (1e-7, 1e-6, 1e-5, 1e-4)]
        assert energies == sorted(energies, reverse=True)

    def test_strong_channel_pushes_rho_to_zero(self, table_params):
        assert local_rho(table_params, 1.0) < 1e-12


@pytest.mark.solver
class TestLocalFeasibility:
    def test_compute_too_slow(self, moderate_params):
        params = moderate_params.model_copy(update={"k_ops": 5e4})
        verdict = local_feasible(params, G_MODERATE)
        assert not verdict
        assert verdict.reason == "compute_too_slow"
        assert math.isinf(local_energy(params, G_MODERATE))

    def test_channel_too_weak(self, moderate_params):
        verdict = local_feasible(moderate_params, 1e-8)
        assert verdict.reason == "channel_too_weak"
        with pytest.raises(InfeasibleModeError) as exc_info:
            solve_local(moderate_params, 1e-8)
        assert exc_info.value.verdict.reason == "channel_too_weak"

    def test_feasible(self, moderate_params):
        verdict = local_feasible(moderate_params, G_MODERATE)
        assert verdict
        assert verdict.reason is None


@pytest.mark.solver
class TestLocalAgainstGrid:
    def test_never_worse_than_grid(self, moderate_params):
        solution = solve_local(moderate_params, G_MODERATE)
        best = grid_search_local(moderate_params, G_MODERATE, n_grid=200)
        assert solution.e_u <= best.e_u + 1e-12 * abs(best.e_u)

    def test_close_to_grid(self, moderate_params):
        solution = solve_local(moderate_params, G_MODERATE)
        best = grid_search_local(moderate_params, G_MODERATE, n_grid=400)
        assert best.e_u == pytest.approx(solution.e_u, rel=0.1)

    def test_refinement_never_worsens_grid(self, moderate_params):
        coarse = grid_search_local(moderate_params, G_MODERATE, n_grid=100)
        fine = grid_search_local(moderate_params, G_MODERATE, n_grid=200)
        assert fine.e_u <= coarse.e_u

    @pytest.mark.parametrize("g", [2e-7, 5e-7, 1e-6, 3e-6, 1e-5])
    def test_dominance_across_gains(self, moderate_params, g):
        solution = solve_local(moderate_params, g)
        best = grid_search_local(moderate_params, g, iota=5e-8, n_grid=100)
        assert solution.e_u - 5e-8 <= best.e_u + 1e-12 * abs(best.e_u)

    @pytest.mark.slow
    def test_random_instances_match_refined_grid(self, moderate_params):
        rng = np.random.default_rng(2019)
        for _ in range(100):
            params = moderate_params.model_copy(update={"k_ops": 10.0 ** rng.uniform(3.0, 4.5),
                                                        "xi": 10.0 ** rng.uniform(-9.0, -8.0)})
            g = 10.0 ** rng.uniform(-5.7, -4.7)
            solution = solve_local(params, g)
            best = grid_search_local(params, g, n_grid=400, zoom=12)
            assert solution.e_u <= best.e_u + 1e-9 * abs(best.e_u)
            assert abs(solution.e_u - best.e_u) <= 1e-3 * abs(solution.e_u)


@pytest.mark.solver
class TestLocalMonotonicity:
    def test_energy_rises_with_rate_requirement(self, table_params, reference_gains):
        energies = [local_energy(table_params.model_copy(update={"r_th": r}), reference_gains.g_ap_u)
                    for r in (5e3, 1e4, 2e4, 3e4, 4e4)]
        assert energies == sorted(energies)
        assert energies[0] < energies[-1]

import logging
import math

import numpy as np
import pytest
from scipy.special import lambertw

from swiptfog import analysis
from swiptfog.analysis import (beta_threshold, k_threshold, lambert_w, max_distance, max_path_loss,
                               max_path_loss_high_snr)
from swiptfog.channel import path_loss_db
from swiptfog.exceptions import DomainError, NoCrossoverError
from swiptfog.local_solver import local_energy
from swiptfog.models import LinkGains
from swiptfog.offload_solver import feedback_rate, offload_energy


@pytest.mark.analysis
class TestLambertW:
    @pytest.mark.parametrize("x", [-0.36, -0.3, -0.1, -1e-6, 1e-6, 0.5, 1.0, math.e, 10.0, 1e3, 1e10, 1e100])
    def test_principal_branch(self, x):
        assert lambert_w(x) == pytest.approx(lambertw(x, 0).real, rel=1e-12, abs=1e-15)

    @pytest.mark.parametrize("x", [-0.36, -0.3, -0.1, -1e-3, -1e-6, -1e-30])
    def test_lower_branch(self, x):
        assert lambert_w(x, "lower") == pytest.approx(lambertw(x, -1).real, rel=1e-12)

    @pytest.mark.parametrize("branch", ["principal", "lower"])
    def test_near_branch_point(self, branch):
        x = -math.exp(-1.0) + 1e-10
        w = lambert_w(x, branch)
        assert w * math.exp(w) == pytest.approx(x, rel=1e-9)
        assert (w > -1.0) if branch == "principal" else (w < -1.0)

    def test_special_values(self):
        assert lambert_w(0.0) == 0.0
        assert lambert_w(-math.exp(-1.0)) == -1.0
        assert lambert_w(math.e) == pytest.approx(1.0)

    def test_outside_domain(self):
        with pytest.raises(DomainError):
            lambert_w(-0.5)
        with pytest.raises(DomainError):
            lambert_w(0.5, "lower")
        with pytest.raises(DomainError):
            lambert_w(1.0, "upper")
        with pytest.raises(DomainError):
            lambert_w(math.inf)

    @pytest.mark.parametrize("log_x", [-5.0, 0.0, 10.0, 699.0, 701.0, 1e4, 1e6])
    def test_argument_given_by_its_logarithm(self, log_x):
        w = analysis._lambert_w_of_exp(log_x)
        assert w + math.log(w) == pytest.approx(log_x, rel=1e-12, abs=1e-12)


@pytest.mark.analysis
class TestPathLossBound:
    def test_closed_form_matches_oracle(self, table_params, reference_gains):
        report = max_path_loss(table_params, reference_gains)
        assert report.kind == "l_max"
        assert report.branch_used in ("local", "offload")
        assert report.rel_gap <= 1e-6
        assert 45.0 < report.value < 65.0

    def test_local_break_even(self, table_params, reference_gains):
        report = max_path_loss(table_params.model_copy(update={"beta": 1e4}), reference_gains)
        assert report.branch_used == "local"
        g = 10.0 ** (-report.value / 10.0)
        scale = table_params.xi * table_params.bits_per_block
        assert abs(local_energy(table_params, g)) <= 1e-9 * scale
        assert local_energy(table_params, 1.01 * g) < 0.0

    def test_credit_extends_reach(self, table_params, reference_gains):
        plain = max_path_loss(table_params, reference_gains).value
        assert max_path_loss(table_params, reference_gains, iota=1e-6).value > plain
        assert max_path_loss(table_params, reference_gains, e_s=1e-6).value > plain

    def test_noiseless_bound_is_looser(self, table_params, reference_gains):
        assert (max_path_loss_high_snr(table_params, reference_gains).value
                >= max_path_loss(table_params, reference_gains).value)

    def test_noiseless_bound_needs_fast_cpu(self, table_params, reference_gains):
        with pytest.raises(DomainError):
            max_path_loss_high_snr(table_params.model_copy(update={"k_ops": 1e5}), reference_gains)

    def test_max_distance_inverts_path_loss(self, table_params):
        d = max_distance(table_params, 60.0, array_gain=1.0)
        assert path_loss_db(d, table_params.carrier_mhz, table_params.pl_coeff) == pytest.approx(60.0)
        assert max_distance(table_params, 60.0) > d
        assert math.isinf(max_distance(table_params, math.inf))

    def test_reach_shrinks_with_rate(self, table_params, reference_gains):
        losses = [max_path_loss(table_params.model_copy(update={"r_th": r}), reference_gains).value
                  for r in (5e3, 1e4, 2e4, 4e4)]
        assert losses == sorted(losses, reverse=True)

    def test_reach_grows_with_hap_power(self, table_params, reference_gains):
        losses = [max_path_loss(table_params.model_copy(update={"p_ap": p}), reference_gains).value
                  for p in (0.5, 1.0, 2.0, 5.0)]
        assert losses == sorted(losses)

    def test_break_even_distance_at_reference(self, table_params, reference_gains):
        d = max_distance(table_params, max_path_loss(table_params, reference_gains).value)
        assert 25.0 < d < 32.0


@pytest.mark.analysis
class TestThresholds:
    def test_k_threshold_matches_oracle(self, table_params, reference_gains):
        report = k_threshold(table_params, reference_gains)
        assert report.kind == "k0"
        assert report.rel_gap <= 1e-6
        assert 1.0 < report.value < table_params.f_op / table_params.r_th

    def test_k_oracle_is_a_crossing(self, table_params, reference_gains):
        k0 = k_threshold(table_params, reference_gains).oracle_value

        def gap(k):
            p = table_params.model_copy(update={"k_ops": k})
            return local_energy(p, reference_gains.g_ap_u) - offload_energy(p, reference_gains)

        assert gap(0.9 * k0) < 0.0 < gap(1.1 * k0)

    def test_beta_oracle_is_a_crossing(self, table_params, reference_gains):
        report = beta_threshold(table_params, reference_gains)
        beta0 = report.oracle_value
        e_loc = local_energy(table_params, reference_gains.g_ap_u)

        def gap(beta):
            return offload_energy(table_params.model_copy(update={"beta": beta}), reference_gains) - e_loc

        assert report.kind == "beta0"
        assert gap(0.9 * beta0) < 0.0 < gap(1.1 * beta0)

    def test_disagreement_is_logged(self, caplog):
        with caplog.at_level(logging.WARNING, logger="swiptfog.analysis"):
            report = analysis._report("k0", 110.0, "principal", 100.0)
        assert report.rel_gap == pytest.approx(0.1)
        assert "disagrees" in caplog.text

    def test_printed_forms_are_reported(self, caplog, table_params, reference_gains):
        with caplog.at_level(logging.WARNING, logger="swiptfog.analysis"):
            k_report = k_threshold(table_params, reference_gains)
            beta_report = beta_threshold(table_params, reference_gains)
        for report in (k_report, beta_report):
            assert report.printed_value is not None
            assert report.printed_gap > 1e-6
        assert "k0 printed closed form" in caplog.text
        assert "beta0 printed closed form" in caplog.text

    def test_branch_is_fixed(self, table_params, reference_gains):
        assert analysis.DEFAULT_LAMBERT_BRANCH == "principal"
        assert k_threshold(table_params, reference_gains).branch_used == "principal"
        with pytest.raises(DomainError):
            k_threshold(table_params, reference_gains, branch="upper")

    def test_other_branch_has_no_root_at_reference(self, table_params, reference_gains):
        report = k_threshold(table_params, reference_gains, branch="lower")
        assert math.isnan(report.value)
        assert math.isinf(report.rel_gap)

    @pytest.mark.parametrize("g_ap_u", [1e-8, 1e-7, 1e-6, 1e-5, 3.8e-5, 1e-4, 1e-3])
    def test_complexity_threshold_stays_small_for_any_hap_gain(self, table_params, reference_gains, g_ap_u):
        gains = reference_gains.model_copy(update={"g_ap_u": g_ap_u})
        assert 1.0 < k_threshold(table_params, gains).oracle_value < 60.0

    @pytest.mark.parametrize("g_ap_u", [1e-8, 1e-6, 3.8e-5, 1e-3])
    def test_offload_wins_at_reference_complexity_for_any_hap_gain(self, table_params, reference_gains, g_ap_u):
        gains = reference_gains.model_copy(update={"g_ap_u": g_ap_u})
        assert offload_energy(table_params, gains) < local_energy(table_params, g_ap_u)

    def test_beta_threshold_tracks_feedback_efficiency(self, table_params, reference_gains):
        per_block = table_params.k_ops * feedback_rate(table_params, reference_gains.g_fu) / table_params.f_op
        beta0 = beta_threshold(table_params, reference_gains).oracle_value
        assert beta0 == pytest.approx(per_block, rel=0.05)

    def test_weak_feedback_puts_beta_threshold_near_one_hundred(self, table_params, reference_gains):
        params = table_params.model_copy(update={"p_fu_max": 4e-11})
        assert 50.0 <= beta_threshold(params, reference_gains).oracle_value <= 200.0

    @pytest.mark.slow
    def test_closed_forms_match_oracle_on_random_instances(self, table_params):
        rng = np.random.default_rng(2019)
        converged = 0
        for _ in range(50):
            gains = LinkGains(g_ap_u=10.0 ** rng.uniform(-5.0, -4.0), g_uf=10.0 ** rng.uniform(-7.0, -5.0),
                              g_fu=10.0 ** rng.uniform(-7.0, -5.0))
            try:
                reports = [k_threshold(table_params, gains), beta_threshold(table_params, gains)]
            except NoCrossoverError:
                continue
            if any(math.isnan(r.value) for r in reports):
                continue
            converged += 1
            for report in reports:
                assert report.rel_gap <= 1e-6
        assert converged >= 40

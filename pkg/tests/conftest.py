import pytest

from swiptfog.channel import mean_path_gain
from swiptfog.models import Geometry, LinkGains, RunConfig, SystemParams


@pytest.fixture
def table_params() -> SystemParams:
    """Reference deployment: 8 antennas, 2 MHz, -140 dBm noise, K = 1e4 ops/bit."""
    return SystemParams()


@pytest.fixture
def moderate_params() -> SystemParams:
    """Low-SNR instance whose optima are resolvable on a coarse lattice.

    B = 100 kHz and R_th = 20 kbit/s give R_th*T_b/B = 0.2; with 1 uW noise
    and g_ap_u = 1e-6 the decoder SNR is 1.
    """
    return SystemParams(bandwidth=1e5, noise_n=1e-6, noise_s=1e-6, noise_f=1e-6, p_uf_max=1e-2)


@pytest.fixture
def moderate_gains() -> LinkGains:
    return LinkGains(g_ap_u=1e-6, g_uf=1e-3, g_fu=1e-3)


@pytest.fixture
def reference_gains(table_params) -> LinkGains:
    """Mean gains at d_AP-u = 10 m and d_uf = d_fu = 8 m, MRT array gain included."""
    return LinkGains(
        g_ap_u=table_params.n_antennas * mean_path_gain(table_params, 10.0),
        g_uf=mean_path_gain(table_params, 8.0),
        g_fu=mean_path_gain(table_params, 8.0),
    )


@pytest.fixture
def reference_geometry() -> Geometry:
    return Geometry.single(10.0, 8.0)


@pytest.fixture
def small_run() -> RunConfig:
    """Run settings small enough for a unit test."""
    return RunConfig(realizations=4, seed=7, grid_res=5, sweep_points=5, n_frames=6, mu_counts=[2, 3],
                     csi_errors=[0.0, 0.1], p_ap_values=[1.0, 2.0], threads=1)

import logging
import math
from typing import Tuple

import numpy as np

from .exceptions import DomainError
from .models import ChannelRealization, Geometry, SystemParams
from .utils import D_MIN

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1


def path_loss_db(d: float, f_c: float, n_coeff: float) -> float:
    """ITU indoor path loss in dB at distance d (m), carrier f_c (MHz)."""
    if not d >= D_MIN:
        raise DomainError(f"distance {d} m is below the model minimum {D_MIN} m")
    if f_c <= 0 or n_coeff <= 0:
        raise DomainError("carrier frequency and loss coefficient must be positive")
    return 20.0 * math.log10(f_c) + n_coeff * math.log10(d) - 28.0


def gain_from_db(loss_db: float) -> float:
    return 10.0 ** (-loss_db / 10.0)


def mean_path_gain(params: SystemParams, d: float) -> float:
    return gain_from_db(path_loss_db(d, params.carrier_mhz, params.pl_coeff))


def rician_weights(k_db: float) -> Tuple[float, float]:
    """Amplitude weights of the LoS and scattered parts; +inf dB is pure LoS, -inf dB Rayleigh."""
    kr = 10.0 ** (k_db / 10.0)
    if math.isinf(kr):
        return 1.0, 0.0
    return math.sqrt(kr / (kr + 1.0)), math.sqrt(1.0 / (kr + 1.0))


def stream(seed: int, *counters: int) -> np.random.Generator:
    """Counter-based generator: the same (seed, counters) always yields the same draws."""
    sequence = np.random.SeedSequence(seed & SEED_MASK, spawn_key=tuple(int(c) for c in counters))
    return np.random.Generator(np.random.Philox(sequence))


def rician_coefficients(rng: np.random.Generator, mean_gain: float, size: int, k_db: float) -> np.ndarray:
    los, scattered = rician_weights(k_db)
    z = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)
    # all-ones LoS phase
    return math.sqrt(mean_gain) * (los * np.ones(size) + scattered * z)


def mrt_effective_gain(h) -> float:
    """|h^H w|^2 under w = h/||h||, which is ||h||^2."""
    h = np.asarray(h, dtype=np.complex128)
    if not np.any(h):
        raise DomainError("MRT is undefined for an all-zero channel")
    return float(np.vdot(h, h).real)


def beamformed_gain(h, h_est) -> float:
    """|h^H w|^2 for the MRT beam w = h_est/||h_est|| steered on an estimate of h."""
    h = np.asarray(h, dtype=np.complex128)
    h_est = np.asarray(h_est, dtype=np.complex128)
    if not np.any(h_est):
        raise DomainError("MRT is undefined for an all-zero channel")
    return float(abs(np.vdot(h, h_est)) ** 2 / np.vdot(h_est, h_est).real)


class ChannelModel:
    """Block-fading channels of one deployment, split into independent streams.

    Each (realization, block, MU) triple owns its own stream, so draws do not
    depend on the order or the thread in which they are requested.
    """

    def __init__(self, params: SystemParams, geometry: Geometry, seed: int):
        self.params = params
        self.geometry = geometry
        self.seed = seed
        self._mean_gains = [
            (mean_path_gain(params, geometry.d_ap_u(m)), mean_path_gain(params, geometry.d_uf(m)),
             mean_path_gain(params, geometry.d_fu(m)))
            for m in range(geometry.n_mu)
        ]

    def draw(self, mu_index: int, block: int = 0, realization: int = 0) -> ChannelRealization:
        pl_ap_u, pl_uf, pl_fu = self._mean_gains[mu_index]
        rng = stream(self.seed, realization, block, mu_index)
        k_db = self.params.rician_k_db
        h_ap_u = rician_coefficients(rng, pl_ap_u, self.params.n_antennas, k_db)
        h_uf = rician_coefficients(rng, pl_uf, 1, k_db)[0]
        h_fu = rician_coefficients(rng, pl_fu, 1, k_db)[0]
        return ChannelRealization(
            h_ap_u=h_ap_u,
            h_uf=complex(h_uf),
            h_fu=complex(h_fu),
            g_ap_u=mrt_effective_gain(h_ap_u),
            g_uf=abs(h_uf) ** 2,
            g_fu=abs(h_fu) ** 2,
        )

    def draw_all(self, block: int = 0, realization: int = 0):
        return [self.draw(m, block, realization) for m in range(self.geometry.n_mu)]


def gen_channel(params: SystemParams, geometry: Geometry, mu_index: int, seed: int,
                block: int = 0, realization: int = 0) -> ChannelRealization:
    return ChannelModel(params, geometry, seed).draw(mu_index, block, realization)


def perturb_csi(ch: ChannelRealization, eps: float, seed: int, counter: int = 0) -> ChannelRealization:
    """Channel estimate with every coefficient scaled by (1 + eps*u), u ~ U[-1, 1]."""
    if not 0.0 <= eps < 1.0:
        raise DomainError(f"CSI error factor {eps} must lie in [0, 1)")
    if eps == 0.0:
        return ch
    n = ch.h_ap_u.size
    factors = 1.0 + eps * stream(seed, counter).uniform(-1.0, 1.0, size=n + 2)
    return ChannelRealization.from_coefficients(ch.h_ap_u * factors[:n], ch.h_uf * factors[n], ch.h_fu * factors[n + 1])

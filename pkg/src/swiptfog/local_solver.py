"""Closed-form minimum-energy operating point of the local computing mode."""
import logging
import math

from .exceptions import InfeasibleModeError
from .models import Feasibility, ModeSolution, SystemParams
from .utils import RHO_MARGIN, exp2m1

logger = logging.getLogger(__name__)


def reception_time(params: SystemParams) -> float:
    """Longest reception window that still leaves the CPU time to process the block."""
    return params.t_b * (params.f_op - params.k_ops * params.r_th) / params.f_op


def computing_time(params: SystemParams) -> float:
    return params.k_ops * params.r_th * params.t_b / params.f_op


def local_rho(params: SystemParams, g_ap_u: float) -> float:
    """PS ratio that decodes exactly R_th within the reception window."""
    tau = reception_time(params)
    if tau <= 0:
        return math.inf
    return params.noise_n / (params.p_ap * g_ap_u) * exp2m1(params.spectral_load / tau)


def local_feasible(params: SystemParams, g_ap_u: float) -> Feasibility:
    if not params.k_ops * params.r_th < params.f_op:
        return Feasibility(mode="local", feasible=False, reason="compute_too_slow")
    if not local_rho(params, g_ap_u) <= 1.0 - RHO_MARGIN:
        return Feasibility(mode="local", feasible=False, reason="channel_too_weak")
    return Feasibility(mode="local", feasible=True)


def local_energy(params: SystemParams, g_ap_u: float, iota: float = 0.0, e_s: float = 0.0) -> float:
    """E_u of the local mode, continued past rho = 1; inf once the CPU is too slow."""
    tau = reception_time(params)
    if tau <= 0:
        return math.inf
    e_fixed = (params.xi + params.k_ops * params.energy_per_op) * params.bits_per_block
    e_eh = params.eta * tau * (params.p_ap * g_ap_u - params.noise_n * exp2m1(params.spectral_load / tau))
    return e_fixed - e_eh - iota - e_s


def solve_local(params: SystemParams, g_ap_u: float, iota: float = 0.0, e_s: float = 0.0) -> ModeSolution:
    verdict = local_feasible(params, g_ap_u)
    if not verdict:
        raise InfeasibleModeError(verdict)

    tau_ipt = reception_time(params)
    rho = local_rho(params, g_ap_u)
    e_id = params.xi * params.bits_per_block
    e_cpt = params.energy_per_op * params.k_ops * params.bits_per_block
    e_eh = params.eta * (1.0 - rho) * params.p_ap * g_ap_u * tau_ipt + iota
    logger.debug("local optimum: tau_ipt=%.6g s, rho=%.6g", tau_ipt, rho)
    return ModeSolution(
        mode="local",
        tau_ipt=tau_ipt,
        tau_cpt=computing_time(params),
        rho=rho,
        e_id=e_id,
        e_cpt=e_cpt,
        e_eh=e_eh,
        e_s=e_s,
        e_u=e_id + e_cpt - e_eh - e_s,
    )

import logging
import math
from typing import Optional, Tuple

from scipy import optimize

from .exceptions import BothModesInfeasibleError, InfeasibleModeError
from .local_solver import local_feasible, reception_time, solve_local
from .models import Feasibility, LinkGains, ModeSolution, SystemParams
from .offload_solver import (feedback_rate, min_offload_time, min_reception_time, offload_budget, offload_feasible,
                             solve_offload)
from .utils import LN2, RHO_MARGIN, exp2m1

logger = logging.getLogger(__name__)


def _offload_verdict(params: SystemParams, gains: LinkGains) -> Feasibility:
    try:
        budget = offload_budget(params, gains.g_fu)
    except InfeasibleModeError as e:
        return e.verdict
    return offload_feasible(params, gains.g_uf, budget, gains.g_ap_u)


def select_mode(params: SystemParams, gains: LinkGains, iota: float = 0.0, e_s: float = 0.0) -> ModeSolution:
    """Cheaper of the two modes; local wins ties."""
    local_verdict = local_feasible(params, gains.g_ap_u)
    offload_verdict = _offload_verdict(params, gains)
    if not local_verdict and not offload_verdict:
        raise BothModesInfeasibleError(local_verdict, offload_verdict)

    local = solve_local(params, gains.g_ap_u, iota, e_s) if local_verdict else None
    offload = solve_offload(params, gains, iota, e_s) if offload_verdict else None
    if offload is None:
        return local
    if local is None:
        return offload
    return local if local.e_u <= offload.e_u else offload


def _uplink_stationarity(u: float, a: float, b: float, c: float, d: float, t_frak: float) -> float:
    """d/du of uplink cost minus harvest when the uplink takes u seconds of the window."""
    tau = t_frak - u
    ku, kt = b / u, b / tau
    uplink = a * (exp2m1(ku) - ku * LN2 * 2.0 ** ku)
    harvest = c * (1.0 - d * exp2m1(kt) + d * kt * LN2 * 2.0 ** kt)
    return uplink + harvest


def _offload_closed_form(params: SystemParams, gains: LinkGains) -> Tuple[str, float, float]:
    budget = offload_budget(params, gains.g_fu)
    t_frak = budget.t_frak
    a = params.noise_s / gains.g_uf
    b = params.spectral_load
    c = params.eta * params.p_ap * gains.g_ap_u
    d = params.noise_n / (params.p_ap * gains.g_ap_u)
    u_hi = t_frak - min_reception_time(params, gains.g_ap_u)
    u_lo = min(b / 1000.0, min_offload_time(params, gains.g_uf))
    if _uplink_stationarity(u_lo, a, b, c, d, t_frak) >= 0:
        u = u_lo
    elif _uplink_stationarity(u_hi, a, b, c, d, t_frak) <= 0:
        u = u_hi
    else:
        u = optimize.brentq(_uplink_stationarity, u_lo, u_hi, args=(a, b, c, d, t_frak), xtol=1e-15 * params.t_b)
    if a * exp2m1(b / u) <= params.p_uf_max:
        return "offload", u, a * exp2m1(b / u) * u
    u = min_offload_time(params, gains.g_uf)
    return "offload_clamped", u, params.p_uf_max * u


def energy_branch(params: SystemParams, gains: LinkGains, iota: float = 0.0, e_s: float = 0.0) -> Tuple[str, float]:
    """Minimal E_u re-derived from the piecewise closed form, with the branch that produced it.

    Branches are ``local``, ``offload`` (uplink power below its cap) and
    ``offload_clamped``. The offload branch solves its own stationarity
    condition in the uplink time.
    """
    b = params.spectral_load
    g = params.p_ap * gains.g_ap_u
    candidates = []
    if local_feasible(params, gains.g_ap_u):
        tau = reception_time(params)
        e = (params.xi * params.bits_per_block + params.energy_per_op * params.k_ops * params.bits_per_block
             - params.eta * (g - params.noise_n * exp2m1(b / tau)) * tau - iota - e_s)
        candidates.append(("local", e))
    if _offload_verdict(params, gains):
        branch, tau_uf, e_uf = _offload_closed_form(params, gains)
        tau = offload_budget(params, gains.g_fu).t_frak - tau_uf
        e = params.xi * params.bits_per_block + e_uf - params.eta * (g - params.noise_n * exp2m1(b / tau)) * tau - iota - e_s
        candidates.append((branch, e))
    if not candidates:
        raise BothModesInfeasibleError(local_feasible(params, gains.g_ap_u), _offload_verdict(params, gains))
    return min(candidates, key=lambda item: item[1])


def evaluate_operating_point(params: SystemParams, solution: ModeSolution, true_gains: LinkGains,
                             iota: float = 0.0, e_s: float = 0.0) -> Optional[ModeSolution]:
    """Run a mode chosen on estimated CSI over the true channel.

    The PS ratio and the uplink power are re-tuned so the block still meets
    R_th. In offload mode the split is re-fitted around the true feedback
    time: the uplink keeps its planned length unless the true link needs
    longer at full power, and reception takes what is left of the window,
    never less than the true channel needs to decode. Returns None only when
    no split of the block works on the true channel.
    """
    if solution.mode == "harvest_only":
        return solution
    b = params.spectral_load
    g = params.p_ap * true_gains.g_ap_u
    if solution.mode == "local":
        rho = params.noise_n / g * exp2m1(b / solution.tau_ipt)
        if not rho <= 1.0 - RHO_MARGIN:
            return None
        e_eh = params.eta * (1.0 - rho) * g * solution.tau_ipt + iota
        return solution.model_copy(update={"rho": rho, "e_eh": e_eh, "e_s": e_s,
                                           "e_u": solution.e_id + solution.e_cpt - e_eh - e_s})

    rate = feedback_rate(params, true_gains.g_fu)
    tau_fu = params.beta * params.bits_per_block / rate if rate > 0 else math.inf
    window = params.t_b - solution.tau_fogcpt - tau_fu
    lo = min_reception_time(params, true_gains.g_ap_u)
    hi = window - min_offload_time(params, true_gains.g_uf)
    if not lo < hi:
        return None
    tau_uf = max(solution.tau_uf, min_offload_time(params, true_gains.g_uf))
    tau_ipt = window - tau_uf
    if tau_ipt < lo:
        tau_ipt, tau_uf = lo, window - lo
    rho = min(params.noise_n / g * exp2m1(b / tau_ipt), 1.0 - RHO_MARGIN)
    p_uf = min(params.noise_s / true_gains.g_uf * exp2m1(b / tau_uf), params.p_uf_max)
    e_eh = params.eta * (1.0 - rho) * g * tau_ipt + iota
    e_uf = p_uf * tau_uf
    if tau_ipt != solution.tau_ipt:
        logger.debug("re-fitted reception window %.6g s -> %.6g s", solution.tau_ipt, tau_ipt)
    return solution.model_copy(update={"tau_ipt": tau_ipt, "tau_uf": tau_uf, "tau_fu": tau_fu, "rho": rho,
                                       "p_uf": p_uf, "e_uf": e_uf, "e_eh": e_eh, "e_s": e_s,
                                       "e_u": solution.e_id + e_uf - e_eh - e_s})

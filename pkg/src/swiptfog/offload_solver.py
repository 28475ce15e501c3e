"""Minimum-energy operating point of the fog offloading mode.

Once the fog computing and feedback slots are pinned to their minima, the
energy left to minimise is a convex function of the reception time alone
(``vartheta``). Its derivative is monotone, so the optimum is found by
bisection, after which the MU transmit power is clamped to its maximum when
the unconstrained optimum would exceed it.
"""
import logging
import math
from dataclasses import dataclass

from scipy import optimize

from .exceptions import DomainError, InfeasibleModeError
from .models import Feasibility, LinkGains, ModeSolution, OffloadBudget, SystemParams
from .utils import LN2, RHO_MARGIN, exp2m1

logger = logging.getLogger(__name__)

BRACKET_EPS = 1e-9
BISECT_MAXITER = 500


def feedback_rate(params: SystemParams, g_fu: float) -> float:
    return params.bandwidth * math.log2(1.0 + g_fu * params.p_fu_max / params.noise_f)


def offload_budget(params: SystemParams, g_fu: float) -> OffloadBudget:
    """Time left for reception and uplink once fog compute and feedback are served."""
    tau_fogcpt = params.k_ops * params.bits_per_block / params.f_fogop
    rate = feedback_rate(params, g_fu)
    tau_fu = params.beta * params.bits_per_block / rate if rate > 0 else math.inf
    t_frak = params.t_b - tau_fogcpt - tau_fu
    if not t_frak > 0:
        verdict = Feasibility(mode="offload", feasible=False, reason="budget_exhausted")
        raise InfeasibleModeError(verdict, f"fog compute and feedback leave no time in the block ({t_frak:.3g} s)")
    return OffloadBudget(t_frak=t_frak, tau_fogcpt=tau_fogcpt, tau_fu=tau_fu)


def min_offload_time(params: SystemParams, g_uf: float) -> float:
    """Uplink time needed at full MU power."""
    rate = params.bandwidth * math.log2(1.0 + g_uf * params.p_uf_max / params.noise_s)
    if rate <= 0:
        return math.inf
    return params.bits_per_block / rate


def min_reception_time(params: SystemParams, g_ap_u: float) -> float:
    """Shortest reception window that decodes R_th with rho just below one."""
    snr = (1.0 - RHO_MARGIN) * params.p_ap * g_ap_u / params.noise_n
    return params.spectral_load / math.log2(1.0 + snr)


def offload_feasible(params: SystemParams, g_uf: float, budget: OffloadBudget, g_ap_u: float = None) -> Feasibility:
    tau_uf_min = min_offload_time(params, g_uf)
    if not tau_uf_min < budget.t_frak:
        return Feasibility(mode="offload", feasible=False, reason="link_too_weak")
    if g_ap_u is not None and not min_reception_time(params, g_ap_u) < budget.t_frak - tau_uf_min:
        return Feasibility(mode="offload", feasible=False, reason="channel_too_weak")
    return Feasibility(mode="offload", feasible=True)


@dataclass(frozen=True)
class _Coefficients:
    a: float
    b: float
    c: float
    d: float
    t_frak: float

    @classmethod
    def of(cls, params: SystemParams, gains: LinkGains, t_frak: float) -> "_Coefficients":
        return cls(
            a=params.noise_s / gains.g_uf,
            b=params.spectral_load,
            c=params.eta * params.p_ap * gains.g_ap_u,
            d=params.noise_n / (params.p_ap * gains.g_ap_u),
            t_frak=t_frak,
        )


def _phi(y: float) -> float:
    # y*e^y - (e^y - 1)
    if y > 700.0:
        return math.inf
    return y * math.exp(y) - math.expm1(y)


def _value(k: _Coefficients, tau: float) -> float:
    rest = k.t_frak - tau
    return rest * k.a * exp2m1(k.b / rest) - k.c * tau * (1.0 - k.d * exp2m1(k.b / tau))


def _prime(k: _Coefficients, tau: float) -> float:
    return k.a * _phi(k.b * LN2 / (k.t_frak - tau)) - k.c * k.d * _phi(k.b * LN2 / tau) - k.c


def _second(k: _Coefficients, tau: float) -> float:
    rest = k.t_frak - tau
    y = k.b * LN2 / rest
    w = k.b * LN2 / tau
    return k.a * math.exp(min(y, 700.0)) * y * y / rest + k.c * k.d * math.exp(min(w, 700.0)) * w * w / tau


def _check_domain(budget: OffloadBudget, tau_ipt: float) -> None:
    if not 0.0 < tau_ipt < budget.t_frak:
        raise DomainError(f"tau_ipt={tau_ipt} outside (0, {budget.t_frak})")


def vartheta(params: SystemParams, gains: LinkGains, tau_ipt: float, iota: float = 0.0, e_s: float = 0.0) -> float:
    """Offload energy as a function of the reception time, uplink filling the rest of the budget."""
    budget = offload_budget(params, gains.g_fu)
    _check_domain(budget, tau_ipt)
    k = _Coefficients.of(params, gains, budget.t_frak)
    return params.xi * params.bits_per_block + _value(k, tau_ipt) - iota - e_s


def vartheta_prime(params: SystemParams, gains: LinkGains, tau_ipt: float) -> float:
    budget = offload_budget(params, gains.g_fu)
    _check_domain(budget, tau_ipt)
    return _prime(_Coefficients.of(params, gains, budget.t_frak), tau_ipt)


def vartheta_second(params: SystemParams, gains: LinkGains, tau_ipt: float) -> float:
    budget = offload_budget(params, gains.g_fu)
    _check_domain(budget, tau_ipt)
    return _second(_Coefficients.of(params, gains, budget.t_frak), tau_ipt)


@dataclass(frozen=True)
class OffloadOptimum:
    """Operating point of the offload mode before the energy ledger is assembled.

    ``required_power`` is the uplink power the unconstrained minimiser of
    vartheta would need; the power clamp is active iff it exceeds p_uf_max.
    """
    budget: OffloadBudget
    tau_ipt: float
    tau_uf: float
    p_uf: float
    rho: float
    required_power: float
    clamped: bool


def _minimise(k: _Coefficients, lo: float, hi: float, xtol: float) -> float:
    f_lo = _prime(k, lo)
    f_hi = _prime(k, hi)
    if f_lo < 0.0 < f_hi:
        return optimize.bisect(lambda t: _prime(k, t), lo, hi, xtol=xtol, maxiter=BISECT_MAXITER)
    # Convex with no interior stationary point: the better end wins.
    return lo if _value(k, lo) <= _value(k, hi) else hi


def offload_optimum(params: SystemParams, gains: LinkGains) -> OffloadOptimum:
    budget = offload_budget(params, gains.g_fu)
    verdict = offload_feasible(params, gains.g_uf, budget, gains.g_ap_u)
    if not verdict:
        raise InfeasibleModeError(verdict)

    k = _Coefficients.of(params, gains, budget.t_frak)
    xtol = 1e-12 * params.t_b
    tau_uf_min = min_offload_time(params, gains.g_uf)
    lo = max(BRACKET_EPS * budget.t_frak, min_reception_time(params, gains.g_ap_u))
    hi_free = (1.0 - BRACKET_EPS) * budget.t_frak
    hi = min(hi_free, budget.t_frak - tau_uf_min)

    tau = _minimise(k, lo, hi, xtol)
    clamped = hi < hi_free and tau == hi and _prime(k, hi) < 0.0
    if clamped:
        tau_free = _minimise(k, hi, hi_free, xtol)
        required = k.a * exp2m1(k.b / (budget.t_frak - tau_free))
        tau_uf = tau_uf_min
        tau = budget.t_frak - tau_uf_min
        p_uf = params.p_uf_max
        logger.debug("uplink power clamped: %.4g W required, %.4g W allowed", required, p_uf)
    else:
        tau_uf = budget.t_frak - tau
        required = k.a * exp2m1(k.b / tau_uf)
        p_uf = min(required, params.p_uf_max)

    rho = min(k.d * exp2m1(k.b / tau), 1.0 - RHO_MARGIN)
    return OffloadOptimum(budget=budget, tau_ipt=tau, tau_uf=tau_uf, p_uf=p_uf, rho=rho,
                          required_power=required, clamped=clamped)


def solve_offload(params: SystemParams, gains: LinkGains, iota: float = 0.0, e_s: float = 0.0) -> ModeSolution:
    opt = offload_optimum(params, gains)
    e_id = params.xi * params.bits_per_block
    e_uf = opt.p_uf * opt.tau_uf
    e_eh = params.eta * (1.0 - opt.rho) * params.p_ap * gains.g_ap_u * opt.tau_ipt + iota
    return ModeSolution(
        mode="offload",
        tau_ipt=opt.tau_ipt,
        tau_uf=opt.tau_uf,
        tau_fogcpt=opt.budget.tau_fogcpt,
        tau_fu=opt.budget.tau_fu,
        rho=opt.rho,
        p_uf=opt.p_uf,
        e_id=e_id,
        e_uf=e_uf,
        e_eh=e_eh,
        e_s=e_s,
        e_u=e_id + e_uf - e_eh - e_s,
    )


def offload_energy(params: SystemParams, gains: LinkGains, iota: float = 0.0, e_s: float = 0.0) -> float:
    """E_u of the offload mode, or inf where the mode is infeasible."""
    try:
        return solve_offload(params, gains, iota, e_s).e_u
    except InfeasibleModeError:
        return math.inf

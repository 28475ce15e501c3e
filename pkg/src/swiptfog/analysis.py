"""Deployment and threshold analytics.

Closed forms for the largest tolerable HAP->MU path loss and for the
complexity (K_0) and result-scaling (beta_0) thresholds at which both modes
cost the same energy. Each closed form is paired with a root-finding oracle
on the underlying energy balance; the report carries both.
"""
import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import optimize

from .exceptions import DomainError, InfeasibleModeError, NoCrossoverError
from .local_solver import local_energy, reception_time
from .models import LinkGains, SystemParams, ThresholdReport
from .offload_solver import feedback_rate, min_offload_time, offload_budget, offload_energy, offload_optimum
from .utils import LN2, exp2m1

logger = logging.getLogger(__name__)

BRANCH_POINT = -math.exp(-1.0)
LAMBERT_BRANCHES = ("principal", "lower")
DEFAULT_LAMBERT_BRANCH = "principal"
HALLEY_MAXITER = 100
FIXED_POINT_MAXITER = 20
AGREEMENT_TOL = 1e-6


def _initial_guess(x: float, branch: str) -> float:
    if math.e * x + 1.0 < 0.3:
        # series about the branch point
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        sign = 1.0 if branch == "principal" else -1.0
        return -1.0 + sign * p - p * p / 3.0 + sign * 11.0 / 72.0 * p ** 3
    if branch == "principal":
        ln1 = math.log1p(x)
        return ln1 * (1.0 - math.log1p(ln1) / (2.0 + ln1))
    l1 = math.log(-x)
    l2 = math.log(-l1)
    return l1 - l2 + l2 / l1


def lambert_w(x: float, branch: str = "principal") -> float:
    """Real Lambert W by Halley iteration; ``lower`` is the W_{-1} branch."""
    if branch not in LAMBERT_BRANCHES:
        raise DomainError(f"unknown Lambert W branch {branch!r}")
    if not math.isfinite(x):
        raise DomainError("Lambert W needs a finite argument")
    if x < BRANCH_POINT:
        if x < BRANCH_POINT - 1e-15:
            raise DomainError(f"Lambert W is not real below -1/e (got {x})")
        x = BRANCH_POINT
    if branch == "lower" and x >= 0.0:
        raise DomainError("the lower branch is only defined on [-1/e, 0)")
    if x == 0.0:
        return 0.0
    if x == BRANCH_POINT:
        return -1.0

    w = _initial_guess(x, branch)
    for _ in range(HALLEY_MAXITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


def _reciprocal_roots(p: float, s: float, q: float, big_q: float) -> List[Tuple[str, float]]:
    """Positive roots v of p*exp(s*v) = q + Q*v, labelled by the Lambert branch used."""
    if big_q == 0.0:
        return [("none", math.log(q / p) / s)] if q > p else []
    log_mag = math.log(s * p / abs(big_q)) - s * q / big_q
    if log_mag > 700.0:
        return []
    x = -math.copysign(math.exp(log_mag), big_q)
    if x < BRANCH_POINT - 1e-15:
        return []
    branches = ["principal"] if x >= 0.0 else list(LAMBERT_BRANCHES)
    roots = []
    for branch in branches:
        v = -lambert_w(x, branch) / s - q / big_q
        if v > 0.0:
            roots.append((branch, v))
    return roots


def _harvest_terms(params: SystemParams) -> Tuple[float, float]:
    """(p, s) of the reception-time balance p*exp(s/u)*u - q*u = Q."""
    return params.eta * params.noise_n, LN2 * params.spectral_load


def _on_branch(candidates: List[Tuple[str, float]], branch: str) -> Tuple[str, float]:
    for used, value in candidates:
        if used in (branch, "none"):
            return used, value
    return branch, math.nan


def _relative_gap(value: float, oracle: float) -> float:
    if math.isinf(value) and value == oracle:
        return 0.0
    if math.isfinite(value) and math.isfinite(oracle) and oracle != 0.0:
        return abs(value - oracle) / abs(oracle)
    return math.inf


def _report(kind: str, value: float, branch: str, oracle: float, printed: Optional[float] = None) -> ThresholdReport:
    gap = _relative_gap(value, oracle)
    if gap > AGREEMENT_TOL:
        logger.warning("%s closed form %.9g disagrees with the energy-balance root %.9g", kind, value, oracle)
    printed_gap = None
    if printed is not None:
        printed_gap = _relative_gap(printed, oracle)
        if printed_gap > AGREEMENT_TOL:
            logger.warning("%s printed closed form %.9g disagrees with the energy-balance root %.9g",
                           kind, printed, oracle)
    return ThresholdReport(kind=kind, value=value, branch_used=branch, oracle_value=oracle, rel_gap=gap,
                           printed_value=printed, printed_gap=printed_gap)


def _bisect_sign_change(fn: Callable[[float], float], lo: float, hi: float, xtol: float) -> float:
    # inf-tolerant plain bisection
    return optimize.bisect(fn, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)


# --- path loss ---------------------------------------------------------------

def _min_gain_local(params: SystemParams, noise_n: float, iota: float, e_s: float) -> Optional[Callable[[float], float]]:
    if not params.k_ops * params.r_th < params.f_op:
        return None
    tau = reception_time(params)
    c = exp2m1(params.spectral_load / tau)
    required = (params.xi + params.k_ops * params.energy_per_op) * params.bits_per_block

    def balance(g: float) -> float:
        return required + params.eta * noise_n * c * tau - params.eta * params.p_ap * g * tau - iota - e_s

    return balance


def _min_gain_offload(params: SystemParams, gains: LinkGains, noise_n: float,
                      iota: float, e_s: float) -> Optional[Callable[[float], float]]:
    try:
        budget = offload_budget(params, gains.g_fu)
    except InfeasibleModeError:
        return None
    tau_uf = min_offload_time(params, gains.g_uf)
    window = budget.t_frak - tau_uf
    if not window > 0:
        return None
    d = exp2m1(params.spectral_load / window)
    required = params.p_uf_max * tau_uf + params.xi * params.bits_per_block

    def balance(g: float) -> float:
        return required + params.eta * noise_n * d * window - params.eta * params.p_ap * g * window - iota - e_s

    return balance


def _loss_from_balance(balance: Callable[[float], float]) -> float:
    """Closed-form loss: the balance is affine in g."""
    g_min = balance(0.0) / (balance(0.0) - balance(1.0))
    return math.inf if g_min <= 0.0 else -10.0 * math.log10(g_min)


def _loss_oracle(balance: Callable[[float], float]) -> float:
    """Root of the balance in the dB domain by bracketing and bisection."""
    if balance(0.0) <= 0.0:
        return math.inf
    fn = lambda loss_db: balance(10.0 ** (-loss_db / 10.0))  # noqa: E731
    lo, hi = -50.0, 50.0
    while fn(lo) > 0.0 and lo > -1000.0:
        lo -= 50.0
    while fn(hi) < 0.0 and hi < 1000.0:
        hi += 50.0
    return _bisect_sign_change(fn, lo, hi, xtol=1e-12)


def _path_loss_report(params: SystemParams, gains: LinkGains, noise_n: float,
                      iota: float, e_s: float) -> ThresholdReport:
    bounds = []
    local = _min_gain_local(params, noise_n, iota, e_s)
    if local is not None:
        bounds.append(("local", local))
    offload = _min_gain_offload(params, gains, noise_n, iota, e_s)
    if offload is not None:
        bounds.append(("offload", offload))
    if not bounds:
        raise DomainError("neither mode can operate at any path loss with these parameters")
    branch, balance = max(bounds, key=lambda b: _loss_from_balance(b[1]))
    return _report("l_max", _loss_from_balance(balance), branch, _loss_oracle(balance))


def max_path_loss(params: SystemParams, gains_uf_fu: LinkGains, iota: float = 0.0, e_s: float = 0.0) -> ThresholdReport:
    """Largest loss of the beamformed HAP->MU gain (dB) at which some mode still breaks even."""
    return _path_loss_report(params, gains_uf_fu, params.noise_n, iota, e_s)


def max_path_loss_high_snr(params: SystemParams, gains: LinkGains, iota: float = 0.0, e_s: float = 0.0) -> ThresholdReport:
    if not params.f_op > params.k_ops * params.r_th:
        raise DomainError("the high-SNR bound needs f_op > K * R_th")
    return _path_loss_report(params, gains, 0.0, iota, e_s)


def max_distance(params: SystemParams, l_max_db: float, array_gain: Optional[float] = None) -> float:
    """HAP->MU distance at which the mean beamformed gain falls to the tolerable loss."""
    if math.isinf(l_max_db):
        return math.inf
    array_gain = params.n_antennas if array_gain is None else array_gain
    per_antenna_db = l_max_db + 10.0 * math.log10(array_gain)
    return 10.0 ** ((per_antenna_db + 28.0 - 20.0 * math.log10(params.carrier_mhz)) / params.pl_coeff)


# --- thresholds --------------------------------------------------------------

def _lambert_w_of_exp(log_x: float) -> float:
    """Principal W(e^log_x), also where e^log_x overflows a float."""
    if log_x < 700.0:
        return lambert_w(math.exp(log_x))
    w = log_x - math.log(log_x)
    for _ in range(HALLEY_MAXITER):
        step = (w + math.log(w) - log_x) / (1.0 + 1.0 / w)
        w -= step
        if abs(step) <= 1e-15 * w:
            break
    return w


def _signed_lambert(sign: float, log_mag: float, branch: str) -> float:
    """W(sign * e^log_mag) on ``branch``; NaN where that value is not real."""
    if sign > 0.0:
        return _lambert_w_of_exp(log_mag) if branch == "principal" else math.nan
    if log_mag < -745.0:
        return 0.0 if branch == "principal" else math.nan
    x = -math.exp(log_mag)
    return lambert_w(x, branch) if x >= BRANCH_POINT - 1e-15 else math.nan


def _printed_k0(params: SystemParams, gains: LinkGains, branch: str) -> float:
    """Published closed form of K_0, evaluated term by term (ignores iota and E_s)."""
    rt = params.bits_per_block
    a = params.energy_per_op
    g = params.p_ap * gains.g_ap_u
    f = params.bandwidth * math.log2(1.0 + gains.g_uf * params.p_uf_max / params.noise_s)
    h = rt / f
    x = (a * params.f_op + params.eta * g + params.eta * params.noise_n) * LN2 * rt
    gh = g * h
    log_mag = math.log(params.eta * params.noise_n * LN2 * rt / gh) - x / gh
    w = _signed_lambert(-1.0, log_mag, branch)
    head = x + w * gh
    if math.isnan(w) or head == 0.0:
        return math.nan
    return params.f_op * (head + LN2 * params.r_th * h) / (params.r_th * head)


def _printed_beta0(params: SystemParams, gains: LinkGains, branch: str) -> float:
    """Published closed form of beta_0, evaluated term by term (ignores iota and E_s)."""
    if not params.f_op > params.k_ops * params.r_th:
        return math.nan
    rt = params.bits_per_block
    k = params.k_ops
    a = params.energy_per_op
    g = params.p_ap * gains.g_ap_u
    f = params.bandwidth * math.log2(1.0 + gains.g_uf * params.p_uf_max / params.noise_s)
    h = rt / f
    c = exp2m1(params.r_th * params.f_op / (params.bandwidth * (params.f_op - k * params.r_th)))
    i = (k * a * rt - params.eta * g * (params.t_b - k * rt / params.f_op) * (1.0 - params.noise_n * c / g)
         - params.p_uf_max * h)
    j = params.t_b - h - k * rt / params.f_fogop
    per_bit = feedback_rate(params, gains.g_fu) / rt
    ij = i * j
    if ij == 0.0:
        return math.nan
    sn = params.eta * params.noise_n * LN2 * rt
    log_mag = math.log(sn / abs(ij)) - params.eta * (g + params.noise_n) * LN2 * rt / ij
    w = _signed_lambert(-math.copysign(1.0, ij), log_mag, branch)
    denominator = params.eta * g * LN2 * rt + sn + w * ij
    if math.isnan(w) or denominator == 0.0:
        return math.nan
    return per_bit * (g + i * LN2 * rt / denominator)


def _k_oracle(params: SystemParams, gains: LinkGains, iota: float, e_s: float) -> float:
    def gap(k: float) -> float:
        p = params.model_copy(update={"k_ops": k})
        return local_energy(p, gains.g_ap_u, iota, e_s) - offload_energy(p, gains, iota, e_s)

    lo, hi = 1.0, params.f_op / params.r_th - 1.0
    if not hi > lo:
        raise NoCrossoverError("the MU CPU cannot process a single operation per bit")
    g_lo, g_hi = gap(lo), gap(hi)
    if not (g_lo <= 0.0 <= g_hi) or math.isnan(g_lo) or math.isnan(g_hi):
        raise NoCrossoverError(f"mode energies do not cross for K in [{lo:g}, {hi:g}]")
    return _bisect_sign_change(gap, lo, hi, xtol=1e-12 * hi)


def k_threshold(params: SystemParams, gains: LinkGains, iota: float = 0.0, e_s: float = 0.0,
                branch: str = DEFAULT_LAMBERT_BRANCH) -> ThresholdReport:
    """Complexity (ops/bit) above which offloading becomes the cheaper mode.

    ``value`` solves the reception-time energy balance in Lambert W on a fixed
    branch, iterating because the offload energy depends weakly on K through
    the fog computing time. ``printed_value`` is the published closed form.
    Both are checked against the bisection root of the balance.
    """
    if branch not in LAMBERT_BRANCHES:
        raise DomainError(f"unknown Lambert W branch {branch!r}")
    oracle = _k_oracle(params, gains, iota, e_s)
    p, s = _harvest_terms(params)
    g = params.p_ap * gains.g_ap_u
    a_fop = params.energy_per_op * params.f_op
    q = a_fop + params.eta * (g + params.noise_n)

    k, used = params.k_ops, branch
    for _ in range(FIXED_POINT_MAXITER):
        e_off = offload_energy(params.model_copy(update={"k_ops": k}), gains, iota, e_s)
        if math.isinf(e_off):
            k = math.nan
            break
        big_q = e_off - params.xi * params.bits_per_block - a_fop * params.t_b + iota + e_s
        roots = [(b, 1.0 / v) for b, v in _reciprocal_roots(p, s, q, big_q) if 1.0 / v < params.t_b]
        ks = [(b, params.f_op * (params.t_b - u) / (params.r_th * params.t_b)) for b, u in roots]
        used, k_next = _on_branch(ks, branch)
        if math.isnan(k_next):
            k = math.nan
            break
        done = abs(k_next - k) <= 1e-13 * abs(k_next)
        k = k_next
        if done:
            break
    if k * params.bits_per_block / params.f_fogop > 1e-3 * params.t_b:
        logger.warning("fog capacity assumption is weak at K_0=%.4g", k)
    return _report("k0", k, used, oracle, _printed_k0(params, gains, branch))


def _beta_oracle(params: SystemParams, gains: LinkGains, e_loc: float, iota: float, e_s: float) -> float:
    def gap(log_beta: float) -> float:
        p = params.model_copy(update={"beta": 10.0 ** log_beta})
        return offload_energy(p, gains, iota, e_s) - e_loc

    grid = np.linspace(-4.0, 4.0, 81)
    values = [gap(x) for x in grid]
    for x_lo, x_hi, v_lo, v_hi in zip(grid, grid[1:], values, values[1:]):
        if v_lo <= 0.0 < v_hi:
            return 10.0 ** _bisect_sign_change(gap, float(x_lo), float(x_hi), xtol=1e-13)
    raise NoCrossoverError("mode energies do not cross for beta in [1e-4, 1e4]")


def beta_threshold(params: SystemParams, gains: LinkGains, iota: float = 0.0, e_s: float = 0.0,
                   branch: str = DEFAULT_LAMBERT_BRANCH) -> ThresholdReport:
    """Result-scaling factor above which local computing becomes the cheaper mode.

    Near the reference point beta_0 is close to K * F_fu / f_op, the ratio at
    which the feedback slot costs as much reception time as local computing.
    """
    if branch not in LAMBERT_BRANCHES:
        raise DomainError(f"unknown Lambert W branch {branch!r}")
    e_loc = local_energy(params, gains.g_ap_u, iota, e_s)
    if not math.isfinite(e_loc):
        raise NoCrossoverError("local computing is unavailable, so no beta threshold exists")
    oracle = _beta_oracle(params, gains, e_loc, iota, e_s)

    p, s = _harvest_terms(params)
    q = params.eta * (params.p_ap * gains.g_ap_u + params.noise_n)
    per_beta = feedback_rate(params, gains.g_fu) / params.bits_per_block
    j_prime = params.t_b - params.k_ops * params.bits_per_block / params.f_fogop

    beta, used = params.beta, branch
    for _ in range(FIXED_POINT_MAXITER):
        try:
            opt = offload_optimum(params.model_copy(update={"beta": beta}), gains)
        except InfeasibleModeError:
            beta = math.nan
            break
        big_q = e_loc - params.xi * params.bits_per_block - opt.p_uf * opt.tau_uf + iota + e_s
        window = j_prime - opt.tau_uf
        betas = [(b, per_beta * (window - 1.0 / v)) for b, v in _reciprocal_roots(p, s, q, big_q) if 1.0 / v < window]
        used, beta_next = _on_branch(betas, branch)
        if math.isnan(beta_next) or beta_next <= 0.0:
            beta = math.nan
            break
        done = abs(beta_next - beta) <= 1e-13 * abs(beta_next)
        beta = beta_next
        if done:
            break
    return _report("beta0", beta, used, oracle, _printed_beta0(params, gains, branch))

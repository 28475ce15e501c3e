"""Brute-force lattice scans used to validate the closed-form solvers.

Lattices have ``n_grid`` cells per axis and are evaluated at the interior
nodes only, so open-interval constraints are never touched and refining by
an even factor keeps every previous node. With ``zoom`` > 0 the scan is
repeated on a window half as wide per axis, centred on the best point so
far, so a few rounds resolve the optimum far below the coarse cell size.
"""
import logging
import math
from typing import Tuple

import numpy as np

from .exceptions import DomainError, InfeasibleModeError, NoFeasiblePointError
from .models import GridPoint, LinkGains, SystemParams
from .offload_solver import offload_budget

logger = logging.getLogger(__name__)

MIN_GRID = 50
# relative slack on constraints that the optimum meets with equality
CONSTRAINT_SLACK = 1e-12


def _interior_nodes(n_grid: int) -> np.ndarray:
    if n_grid < MIN_GRID:
        raise DomainError(f"n_grid must be at least {MIN_GRID}")
    return np.arange(1, n_grid) / n_grid


def _window(lo: float, hi: float, center: float, width: float) -> Tuple[float, float]:
    width = min(width, hi - lo)
    start = min(max(center - 0.5 * width, lo), hi - width)
    return start, start + width


def _scan_local(params: SystemParams, g_ap_u: float, taus: np.ndarray, rhos: np.ndarray,
                iota: float, e_s: float) -> GridPoint:
    tau, rho = np.meshgrid(taus, rhos, indexing="ij")
    rate = params.bandwidth * tau / params.t_b * np.log2(1.0 + rho * params.p_ap * g_ap_u / params.noise_n)
    ops_needed = params.k_ops * rate * params.t_b
    ops_available = (params.t_b - tau) * params.f_op
    feasible = (rate >= params.r_th * (1.0 - CONSTRAINT_SLACK)) & (ops_needed <= ops_available * (1.0 + CONSTRAINT_SLACK))
    if not feasible.any():
        raise NoFeasiblePointError("no lattice point meets the rate and computing constraints")

    energy = ((params.xi + params.k_ops * params.energy_per_op) * rate * params.t_b
              - params.eta * (1.0 - rho) * params.p_ap * g_ap_u * tau - iota - e_s)
    energy = np.where(feasible, energy, np.inf)
    i, j = np.unravel_index(np.argmin(energy), energy.shape)
    return GridPoint(mode="local", tau_ipt=float(tau[i, j]), rho=float(rho[i, j]), e_u=float(energy[i, j]),
                     n_feasible=int(feasible.sum()))


def grid_search_local(params: SystemParams, g_ap_u: float, iota: float = 0.0, e_s: float = 0.0,
                      n_grid: int = 200, zoom: int = 0) -> GridPoint:
    nodes = _interior_nodes(n_grid)
    tau_win, rho_win = (0.0, params.t_b), (0.0, 1.0)
    best = first = _scan_local(params, g_ap_u, nodes * params.t_b, nodes, iota, e_s)
    for level in range(zoom):
        tau_win = _window(0.0, params.t_b, best.tau_ipt, 0.5 * (tau_win[1] - tau_win[0]))
        rho_win = _window(0.0, 1.0, best.rho, 0.5 * (rho_win[1] - rho_win[0]))
        taus = tau_win[0] + nodes * (tau_win[1] - tau_win[0])
        rhos = rho_win[0] + nodes * (rho_win[1] - rho_win[0])
        try:
            point = _scan_local(params, g_ap_u, taus, rhos, iota, e_s)
        except NoFeasiblePointError:
            logger.debug("zoom level %d has no feasible node", level + 1)
            break
        if point.e_u <= best.e_u:
            best = point
    return best.model_copy(update={"n_feasible": first.n_feasible})


def _scan_offload(params: SystemParams, gains: LinkGains, t_frak: float, taus: np.ndarray, powers: np.ndarray,
                  iota: float, e_s: float) -> GridPoint:
    tau, p_uf = np.meshgrid(taus, powers, indexing="ij")
    with np.errstate(all="ignore"):
        tau_uf = params.bits_per_block / (params.bandwidth * np.log2(1.0 + gains.g_uf * p_uf / params.noise_s))
        rho = params.noise_n / (params.p_ap * gains.g_ap_u) * np.expm1(math.log(2.0) * params.spectral_load / tau)
        energy = (params.xi * params.bits_per_block + p_uf * tau_uf
                  - params.eta * (1.0 - rho) * params.p_ap * gains.g_ap_u * tau - iota - e_s)
    feasible = (tau + tau_uf <= t_frak * (1.0 + CONSTRAINT_SLACK)) & (rho < 1.0)
    if not feasible.any():
        raise NoFeasiblePointError("no lattice point fits reception and uplink into the budget")

    energy = np.where(feasible, energy, np.inf)
    i, j = np.unravel_index(np.argmin(energy), energy.shape)
    return GridPoint(mode="offload", tau_ipt=float(tau[i, j]), rho=float(rho[i, j]), p_uf=float(p_uf[i, j]),
                     tau_uf=float(tau_uf[i, j]), e_u=float(energy[i, j]), n_feasible=int(feasible.sum()))


def grid_search_offload(params: SystemParams, gains: LinkGains, iota: float = 0.0, e_s: float = 0.0,
                        n_grid: int = 150, zoom: int = 0) -> GridPoint:
    """Scan (tau_ipt, P_uf); rho and tau_uf follow from meeting R_th exactly on both links."""
    if not math.isfinite(params.p_uf_max):
        raise DomainError("the power lattice needs a finite p_uf_max")
    try:
        budget = offload_budget(params, gains.g_fu)
    except InfeasibleModeError as e:
        raise NoFeasiblePointError(str(e)) from e

    t_frak, p_max = budget.t_frak, params.p_uf_max
    nodes = _interior_nodes(n_grid)
    # power nodes include the cap itself
    steps = np.arange(1, n_grid + 1) / n_grid
    tau_win, p_win = (0.0, t_frak), (0.0, p_max)
    best = first = _scan_offload(params, gains, t_frak, nodes * t_frak, steps * p_max, iota, e_s)
    for level in range(zoom):
        tau_win = _window(0.0, t_frak, best.tau_ipt, 0.5 * (tau_win[1] - tau_win[0]))
        p_win = _window(0.0, p_max, best.p_uf, 0.5 * (p_win[1] - p_win[0]))
        taus = tau_win[0] + nodes * (tau_win[1] - tau_win[0])
        powers = p_win[0] + steps * (p_win[1] - p_win[0])
        try:
            point = _scan_offload(params, gains, t_frak, taus, powers, iota, e_s)
        except NoFeasiblePointError:
            logger.debug("zoom level %d has no feasible node", level + 1)
            break
        if point.e_u <= best.e_u:
            best = point
    return best.model_copy(update={"n_feasible": first.n_feasible})

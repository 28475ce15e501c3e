"""Monte Carlo experiment scenarios.

Each scenario averages the closed-form solvers over ``RunConfig.realizations``
channel draws. Realizations run on a thread pool; results are collected in
realization order and reduced in a fixed order so reruns are byte-identical.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from time import perf_counter
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .channel import ChannelModel, beamformed_gain, perturb_csi, stream
from .exceptions import BothModesInfeasibleError, InfeasibleModeError
from .frame_sim import run_frames
from .local_solver import solve_local
from .mode_selector import evaluate_operating_point, select_mode
from .models import TRACE_COLUMNS, Geometry, LinkGains, RunConfig, SystemParams
from .offload_solver import solve_offload
from .scheduler import UserScheduler
from .utils import D_MIN

logger = logging.getLogger(__name__)

THREADS_ENV = "SWIPT_FOG_THREADS"
# radius band (m) around the HAP where multiuser MUs are dropped
MU_RING = (2.0, 15.0)
PLACEMENT_STREAM = 0x504C
MAP_CSI_ERROR = 0.05

ENERGY_COLUMNS = {
    "e_local": "mean E_u of local computing over realizations where it is feasible (J)",
    "e_offload": "mean E_u of fog offloading over realizations where it is feasible (J)",
    "e_selected": "mean E_u of the cheaper feasible mode (J)",
    "e_cpt": "mean local computing energy (J)",
    "e_uf": "mean uplink transmit energy of offloading (J)",
    "e_eh_local": "mean harvested energy in local mode (J)",
    "e_eh_offload": "mean harvested energy in offload mode (J)",
}
SHARE_COLUMNS = {
    "feasible_local": "share of realizations where local computing is feasible",
    "feasible_offload": "share of realizations where offloading is feasible",
    "frac_offload": "share of realizations selecting offloading",
    "frac_harvest_only": "share of realizations where neither mode is feasible",
}
SWEEP_COLUMNS = {**ENERGY_COLUMNS, **SHARE_COLUMNS}
PLACEMENT_COLUMNS = {
    "x": "MU x coordinate (m), HAP at the origin",
    "y": "MU y coordinate (m), fog server at (0, d_ap_f)",
    **SWEEP_COLUMNS,
    "mode": "mode with the lower mean E_u (local, offload or infeasible)",
    "accumulate": "1 when every feasible mode needs a positive net energy from storage",
}
MISMATCH_COLUMNS = {
    "x": "MU x coordinate (m), HAP at the origin",
    "y": "MU y coordinate (m), fog server at (0, d_ap_f)",
    "mode": "mode with the lower mean E_u under perfect CSI (local, offload or infeasible)",
    "eps": "relative CSI error bound of the estimate",
    "mismatch_rate": "share of realizations where the estimate selects a different mode",
}
TRACE_COLUMN_DOCS = {
    "frame": "frame index",
    "mu": "MU index",
    "mode": "mode served in the block (local, offload or harvest_only)",
    "e_s": "stored energy after the block (J)",
    "e_u": "net energy drawn from storage (J)",
    "e_eh": "energy harvested in the block including the broadcast credit (J)",
}


@dataclass
class Table:
    name: str
    frame: pd.DataFrame
    columns: Dict[str, str]


@dataclass
class ScenarioResult:
    tables: List[Table] = field(default_factory=list)
    crossovers: Dict[str, List[float]] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    timings: Dict[str, Any] = field(default_factory=dict)


def worker_count(run: RunConfig) -> int:
    """Threads for the realization pool: RunConfig.threads or the CPU count, capped by SWIPT_FOG_THREADS."""
    wanted = run.threads or os.cpu_count() or 1
    raw = os.getenv(THREADS_ENV)
    if raw is None:
        return wanted
    try:
        cap = int(raw)
    except ValueError:
        logger.warning("Ignoring %s=%r, not an integer", THREADS_ENV, raw)
        return wanted
    return max(1, min(wanted, cap))


def mode_energies(params: SystemParams, gains: LinkGains, iota: float = 0.0, e_s: float = 0.0) -> Dict[str, Any]:
    """Both mode optima for one channel; an infeasible mode leaves NaN in its columns."""
    row: Dict[str, Any] = dict.fromkeys(ENERGY_COLUMNS, math.nan)
    try:
        local = solve_local(params, gains.g_ap_u, iota, e_s)
        row.update(e_local=local.e_u, e_cpt=local.e_cpt, e_eh_local=local.e_eh)
    except InfeasibleModeError:
        pass
    try:
        offload = solve_offload(params, gains, iota, e_s)
        row.update(e_offload=offload.e_u, e_uf=offload.e_uf, e_eh_offload=offload.e_eh)
    except InfeasibleModeError:
        pass

    # same tie rule as select_mode
    if not math.isnan(row["e_local"]) and not row["e_offload"] < row["e_local"]:
        row.update(mode="local", e_selected=row["e_local"])
    elif not math.isnan(row["e_offload"]):
        row.update(mode="offload", e_selected=row["e_offload"])
    else:
        row["mode"] = "harvest_only"
    return row


def _mean(values: Sequence[float]) -> float:
    arr = np.asarray(values, dtype=float)
    arr = arr[~np.isnan(arr)]
    return float(arr.mean()) if arr.size else math.nan


def aggregate(samples: Sequence[Dict[str, Any]]) -> Dict[str, float]:
    n = len(samples)
    row = {key: _mean([s[key] for s in samples]) for key in ENERGY_COLUMNS}
    row["feasible_local"] = sum(not math.isnan(s["e_local"]) for s in samples) / n
    row["feasible_offload"] = sum(not math.isnan(s["e_offload"]) for s in samples) / n
    row["frac_offload"] = sum(s["mode"] == "offload" for s in samples) / n
    row["frac_harvest_only"] = sum(s["mode"] == "harvest_only" for s in samples) / n
    return row


def crossovers(x: Sequence[float], a: Sequence[float], b: Sequence[float], log_x: bool = False) -> List[float]:
    """Points where curve ``a`` crosses ``b``, by linear interpolation (in log10(x) when ``log_x``)."""
    x = np.asarray(x, dtype=float)
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    axis = np.log10(x) if log_x else x
    found = []
    for i in range(len(x) - 1):
        d0, d1 = diff[i], diff[i + 1]
        if not (np.isfinite(d0) and np.isfinite(d1)):
            continue
        if d0 == 0.0:
            found.append(float(x[i]))
        elif d0 * d1 < 0.0:
            t = d0 / (d0 - d1)
            value = axis[i] + t * (axis[i + 1] - axis[i])
            found.append(float(10.0 ** value if log_x else value))
    if len(x) and diff[-1] == 0.0:
        found.append(float(x[-1]))
    return found


def _placement_label(row: Dict[str, float]) -> Tuple[str, int]:
    e_local, e_offload = row["e_local"], row["e_offload"]
    if math.isnan(e_local) and math.isnan(e_offload):
        return "infeasible", 0
    mode = "local" if not math.isnan(e_local) and not e_offload < e_local else "offload"
    return mode, int(np.nanmin([e_local, e_offload]) > 0.0)


class ScenarioRunner:
    """Runs the named experiments for one (SystemParams, RunConfig) pair."""

    def __init__(self, params: SystemParams, run: RunConfig, threads: Optional[int] = None):
        self.params = params
        self.run = run
        self.threads = threads or worker_count(run)

    def _map(self, fn: Callable[[int], Any], n: int) -> List[Any]:
        if self.threads == 1:
            return [fn(r) for r in range(n)]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, range(n)))

    def _sweep(self, setups: Sequence[Tuple[SystemParams, Geometry]]) -> List[Dict[str, float]]:
        """Aggregated mode energies per setup; realization r sees the same fading at every setup."""
        models = [ChannelModel(p, g, self.run.seed) for p, g in setups]

        def one(r: int):
            return [mode_energies(p, model.draw(0, realization=r).gains) for (p, _), model in zip(setups, models)]

        per_realization = self._map(one, self.run.realizations)
        return [aggregate([sample[i] for sample in per_realization]) for i in range(len(setups))]

    def _sweep_table(self, name: str, axis: str, axis_doc: str, xs: np.ndarray,
                     setups: Sequence[Tuple[SystemParams, Geometry]], log_x: bool = False) -> ScenarioResult:
        logger.info("Sweeping %s over %d points and %d realizations", axis, len(xs), self.run.realizations)
        rows = [{axis: float(x), **row} for x, row in zip(xs, self._sweep(setups))]
        frame = pd.DataFrame(rows, columns=[axis, *SWEEP_COLUMNS])
        found = crossovers(xs, frame["e_local"], frame["e_offload"], log_x=log_x)
        logger.info("Mode crossovers in %s: %s", axis, found or "none")
        return ScenarioResult(tables=[Table(name, frame, {axis: axis_doc, **SWEEP_COLUMNS})],
                              crossovers={axis: found})

    def sweep_k(self) -> ScenarioResult:
        ks = np.logspace(2.0, 5.0, self.run.sweep_points)
        geometry = Geometry.single(self.run.d_ap_u, self.run.d_uf)
        setups = [(self.params.model_copy(update={"k_ops": float(k)}), geometry) for k in ks]
        return self._sweep_table("sweep-k", "k_ops", "computational complexity K (ops/bit)", ks, setups, log_x=True)

    def sweep_dist(self) -> ScenarioResult:
        ds = np.linspace(2.0, 30.0, self.run.sweep_points)
        setups = [(self.params, Geometry.single(float(d), self.run.d_uf)) for d in ds]
        return self._sweep_table("sweep-dist", "d_ap_u", "HAP to MU distance (m), d_uf fixed", ds, setups)

    def line_placement(self) -> ScenarioResult:
        edge = max(0.5, D_MIN)
        ds = np.linspace(edge, self.run.d_ap_f - edge, self.run.sweep_points)
        setups = [(self.params, Geometry.on_segment(float(d), self.run.d_ap_f)) for d in ds]
        return self._sweep_table("line-placement", "d_ap_u", "HAP to MU distance along the HAP-FS segment (m)",
                                 ds, setups)

    def sweep_beta(self) -> ScenarioResult:
        betas = np.logspace(-2.0, 4.0, self.run.sweep_points)
        geometry = Geometry.single(self.run.d_ap_u, self.run.d_uf)
        setups = [(self.params.model_copy(update={"beta": float(b)}), geometry) for b in betas]
        return self._sweep_table("sweep-beta", "beta", "result-to-input size ratio", betas, setups, log_x=True)

    def _placement_rows(self, params: SystemParams, n: int) -> List[Dict[str, Any]]:
        span = self.run.d_ap_f
        fs = (0.0, span)
        points = [(float(x), float(y))
                  for y in np.linspace(-0.5 * span, 1.5 * span, n)
                  for x in np.linspace(-span, span, n)
                  if math.hypot(x, y) >= D_MIN and math.hypot(x - fs[0], y - fs[1]) >= D_MIN]
        setups = [(params, Geometry(fs_pos=fs, mu_pos=[p])) for p in points]
        rows = []
        for (x, y), row in zip(points, self._sweep(setups)):
            mode, accumulate = _placement_label(row)
            rows.append({"x": x, "y": y, **row, "mode": mode, "accumulate": accumulate})
        return rows

    def placement_grid(self) -> ScenarioResult:
        n = self.run.grid_res
        logger.info("Mapping modes on a %dx%d placement grid", n, n)
        frame = pd.DataFrame(self._placement_rows(self.params, n), columns=list(PLACEMENT_COLUMNS))
        counts = frame["mode"].value_counts()
        summary = {label: int(counts.get(label, 0)) for label in ("local", "offload", "infeasible")}
        summary["accumulate"] = int(frame["accumulate"].sum())
        return ScenarioResult(tables=[Table("placement-grid", frame, PLACEMENT_COLUMNS)], summary=summary)

    def sweep_pap(self) -> ScenarioResult:
        n = max(3, self.run.grid_res // 2 + 1)
        rows, areas = [], []
        for p_ap in self.run.p_ap_values:
            logger.info("Mapping modes at P=%.3g W", p_ap)
            cells = self._placement_rows(self.params.model_copy(update={"p_ap": float(p_ap)}), n)
            rows.extend({"p_ap": float(p_ap), **cell} for cell in cells)
            total = len(cells)
            areas.append({
                "p_ap": float(p_ap),
                "feasible_area": sum(c["mode"] != "infeasible" for c in cells) / total,
                "offload_area": sum(c["mode"] == "offload" for c in cells) / total,
                "accumulate_area": sum(c["accumulate"] for c in cells) / total,
            })
        p_doc = {"p_ap": "HAP transmit power (W)"}
        area_docs = {
            **p_doc,
            "feasible_area": "share of grid cells where some mode is feasible",
            "offload_area": "share of grid cells where offloading is cheaper",
            "accumulate_area": "share of grid cells that draw energy from storage",
        }
        return ScenarioResult(tables=[
            Table("sweep-pap", pd.DataFrame(rows, columns=["p_ap", *PLACEMENT_COLUMNS]), {**p_doc, **PLACEMENT_COLUMNS}),
            Table("sweep-pap-areas", pd.DataFrame(areas, columns=list(area_docs)), area_docs),
        ])

    def frames(self) -> ScenarioResult:
        n_frames = self.run.n_frames
        result = ScenarioResult()
        rows = []
        for d in self.run.frame_distances:
            geometry = Geometry.single(d, self.run.d_uf)
            logger.info("Simulating %d frames at d=%.3g m over %d seeds", n_frames, d, self.run.realizations)

            def one(r: int, geometry=geometry):
                return run_frames(self.params, geometry, n_frames, self.run.seed, realization=r)

            traces = self._map(one, self.run.realizations)
            storage = np.array([[levels[0] for levels in t.storage_by_frame()] for t in traces])
            harvest = np.array([
                np.bincount(np.array([r.frame for r in t.records if r.mode == "harvest_only"], dtype=np.int64),
                            minlength=n_frames)
                for t in traces
            ])
            mean_storage = storage.mean(axis=0)
            for frame in range(n_frames):
                rows.append({"d_ap_u": float(d), "frame": frame, "mean_e_s": float(mean_storage[frame]),
                             "harvest_only_rate": float(harvest[:, frame].mean())})
            result.summary[f"{d:g}"] = {
                "seeds_with_harvest_only": float(np.mean(harvest.sum(axis=1) > 0)),
                "mean_harvest_only_blocks": float(harvest.sum(axis=1).mean()),
                "mean_storage_nondecreasing": bool(np.all(np.diff(mean_storage) >= 0.0)),
            }
            result.tables.append(Table(f"frames-trace-{d:g}", traces[0].to_dataframe()[TRACE_COLUMNS],
                                       TRACE_COLUMN_DOCS))

        docs = {
            "d_ap_u": "HAP to MU distance (m)",
            "frame": "frame index",
            "mean_e_s": "stored energy at the end of the frame, averaged over seeds (J)",
            "harvest_only_rate": "share of seeds spending the frame's block harvesting",
        }
        result.tables.insert(0, Table("frames", pd.DataFrame(rows, columns=list(docs)), docs))
        return result

    def _mu_geometry(self, n_mu: int, realization: int) -> Geometry:
        rng = stream(self.run.seed, realization, n_mu, 0, PLACEMENT_STREAM)
        fs = (0.0, self.run.d_ap_f)
        positions = []
        while len(positions) < n_mu:
            radius = rng.uniform(*MU_RING)
            angle = rng.uniform(0.0, 2.0 * math.pi)
            p = (radius * math.cos(angle), radius * math.sin(angle))
            if math.hypot(p[0] - fs[0], p[1] - fs[1]) >= D_MIN:
                positions.append(p)
        return Geometry(fs_pos=fs, mu_pos=positions)

    def multiuser(self) -> ScenarioResult:
        with_credit = UserScheduler(self.params)
        without_credit = UserScheduler(self.params, broadcast_credit=False)
        methods = {
            "greedy": lambda ch, e_s, r: with_credit.greedy(ch, e_s),
            "random": lambda ch, e_s, r: with_credit.random(ch, e_s, self.run.seed, r, len(ch)),
            "exhaustive": lambda ch, e_s, r: with_credit.exhaustive(ch, e_s),
            "greedy_no_credit": lambda ch, e_s, r: without_credit.greedy(ch, e_s),
        }
        rows, timings = [], {}
        for n_mu in self.run.mu_counts:
            logger.info("Scheduling %d MUs over %d realizations", n_mu, self.run.realizations)

            def one(r: int, n_mu=n_mu):
                geometry = self._mu_geometry(n_mu, r)
                channels = [c.gains for c in ChannelModel(self.params, geometry, self.run.seed).draw_all(realization=r)]
                e_s = [0.0] * n_mu
                totals, elapsed = {}, {}
                for name, method in methods.items():
                    start = perf_counter()
                    totals[name] = method(channels, e_s, r).total_e_u
                    elapsed[name] = perf_counter() - start
                return totals, elapsed

            outcomes = self._map(one, self.run.realizations)
            totals = {name: np.array([o[0][name] for o in outcomes]) for name in methods}
            rows.append({
                "n_mu": n_mu,
                **{name: float(values.mean()) for name, values in totals.items()},
                "exhaustive_le_greedy": float(np.mean(totals["exhaustive"] <= totals["greedy"])),
            })
            timings[str(n_mu)] = {name: float(np.mean([o[1][name] for o in outcomes])) for name in methods}

        docs = {
            "n_mu": "number of MUs in the frame",
            "greedy": "mean total E_u of the greedy order (J)",
            "random": "mean total E_u of a random order (J)",
            "exhaustive": "mean total E_u of the best order (J)",
            "greedy_no_credit": "mean total E_u of the greedy order without the broadcast credit (J)",
            "exhaustive_le_greedy": "share of realizations where the best order is no worse than greedy",
        }
        return ScenarioResult(tables=[Table("multiuser", pd.DataFrame(rows, columns=list(docs)), docs)],
                              timings={"mean_schedule_seconds": timings})

    def _realized_gains(self, true, estimate) -> LinkGains:
        """Gains the true channel delivers when the HAP beam is steered on the estimate."""
        if estimate is true:
            return true.gains
        return LinkGains(g_ap_u=beamformed_gain(true.h_ap_u, estimate.h_ap_u), g_uf=true.g_uf, g_fu=true.g_fu)

    def _mismatch_map(self, eps: float) -> pd.DataFrame:
        n = max(3, self.run.grid_res // 2 + 1)
        cells = self._placement_rows(self.params, n)
        fs = (0.0, self.run.d_ap_f)
        models = [ChannelModel(self.params, Geometry(fs_pos=fs, mu_pos=[(c["x"], c["y"])]), self.run.seed)
                  for c in cells]

        def one(r: int):
            flags = []
            for model in models:
                true = model.draw(0, realization=r)
                try:
                    optimal = select_mode(self.params, true.gains).mode
                except BothModesInfeasibleError:
                    flags.append(math.nan)
                    continue
                try:
                    chosen = select_mode(self.params, perturb_csi(true, eps, self.run.seed, counter=r).gains).mode
                except BothModesInfeasibleError:
                    chosen = "harvest_only"
                flags.append(float(chosen != optimal))
            return flags

        per_realization = np.array(self._map(one, self.run.realizations), dtype=float)
        rows = []
        for i, cell in enumerate(cells):
            rows.append({"x": cell["x"], "y": cell["y"], "mode": cell["mode"], "eps": float(eps),
                         "mismatch_rate": _mean(per_realization[:, i])})
        return pd.DataFrame(rows, columns=list(MISMATCH_COLUMNS))

    def csi_error(self) -> ScenarioResult:
        model = ChannelModel(self.params, Geometry.single(self.run.d_ap_u, self.run.d_uf), self.run.seed)
        errors = self.run.csi_errors

        def one(r: int):
            true = model.draw(0, realization=r)
            try:
                optimal = select_mode(self.params, true.gains)
            except BothModesInfeasibleError:
                return None
            outcomes = []
            for eps in errors:
                estimate = perturb_csi(true, eps, self.run.seed, counter=r)
                try:
                    chosen = select_mode(self.params, estimate.gains)
                except BothModesInfeasibleError:
                    outcomes.append((math.nan, True, True))
                    continue
                realized = evaluate_operating_point(self.params, chosen, self._realized_gains(true, estimate))
                e_u = math.nan if realized is None else realized.e_u
                outcomes.append((e_u, realized is None, chosen.mode != optimal.mode))
            return optimal.e_u, outcomes

        logger.info("Evaluating %d CSI error levels over %d realizations", len(errors), self.run.realizations)
        drawn = self._map(one, self.run.realizations)
        samples = [s for s in drawn if s is not None]
        rows = []
        for i, eps in enumerate(errors):
            optimal = np.array([s[0] for s in samples])
            realized = np.array([s[1][i][0] for s in samples])
            served = ~np.isnan(realized)
            increase = math.nan
            if served.any():
                increase = float(np.mean(realized[served] - optimal[served]) / np.mean(np.abs(optimal[served])))
            rows.append({
                "eps": float(eps),
                "e_optimal": _mean(optimal),
                "e_realized": _mean(realized[served]),
                "rel_increase": increase,
                "outage_rate": float(np.mean([s[1][i][1] for s in samples])) if samples else math.nan,
                "mode_mismatch_rate": float(np.mean([s[1][i][2] for s in samples])) if samples else math.nan,
            })
        docs = {
            "eps": "relative CSI error bound",
            "e_optimal": "mean E_u with perfect CSI (J)",
            "e_realized": "mean E_u of the estimated-CSI decision run on the true channel, served blocks only (J)",
            "rel_increase": "mean extra energy over served blocks relative to the perfect-CSI magnitude",
            "outage_rate": "share of realizations where no split of the block works on the true channel",
            "mode_mismatch_rate": "share of realizations where estimation changes the selected mode",
        }
        logger.info("Mapping mode mismatch at eps=%.3g", MAP_CSI_ERROR)
        tables = [Table("csi-error", pd.DataFrame(rows, columns=list(docs)), docs),
                  Table("csi-error-map", self._mismatch_map(MAP_CSI_ERROR), MISMATCH_COLUMNS)]
        return ScenarioResult(tables=tables, summary={"served_realizations": len(samples),
                                                      "both_infeasible": len(drawn) - len(samples)})


SCENARIOS: Dict[str, Callable[[ScenarioRunner], ScenarioResult]] = {
    "sweep-k": ScenarioRunner.sweep_k,
    "sweep-dist": ScenarioRunner.sweep_dist,
    "line-placement": ScenarioRunner.line_placement,
    "placement-grid": ScenarioRunner.placement_grid,
    "sweep-pap": ScenarioRunner.sweep_pap,
    "sweep-beta": ScenarioRunner.sweep_beta,
    "frames": ScenarioRunner.frames,
    "multiuser": ScenarioRunner.multiuser,
    "csi-error": ScenarioRunner.csi_error,
}


def run_named(name: str, params: SystemParams, run: RunConfig, threads: Optional[int] = None) -> ScenarioResult:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}")
    return SCENARIOS[name](ScenarioRunner(params, run, threads))

import math
import os
from typing import List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .utils import D_MIN

Mode = Literal["local", "offload", "harvest_only"]
InfeasibleReason = Literal["compute_too_slow", "channel_too_weak", "budget_exhausted", "link_too_weak"]

ENV_PREFIX = "SWIPT_FOG_"


class SystemParams(BaseModel):
    """Every physical constant of the system, with the reference deployment as defaults."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    p_ap: float = Field(default=1.0, gt=0)
    n_antennas: int = Field(default=8, ge=1)
    bandwidth: float = Field(default=2e6, gt=0)
    noise_n: float = Field(default=1e-17, gt=0)
    noise_s: float = Field(default=1e-17, gt=0)
    noise_f: float = Field(default=1e-17, gt=0)
    rician_k_db: float = 3.5
    carrier_mhz: float = Field(default=915.0, gt=0)
    pl_coeff: float = Field(default=22.0, gt=0)
    r_th: float = Field(default=2e4, gt=0)
    t_b: float = Field(default=1.0, gt=0)
    k_ops: float = Field(default=1e4, ge=0)
    eta: float = Field(default=0.6, gt=0, lt=1)
    xi: float = Field(default=1e-10, ge=0)
    p_uf_max: float = Field(default=1e-3, gt=0)
    f_op: float = Field(default=1e9, gt=0)
    f_fogop: float = Field(default=1e15, gt=0)
    m_c: float = Field(default=1e4, gt=0)
    act: float = Field(default=0.1, gt=0)
    fanout: float = Field(default=3.0, gt=0)
    n0_ln2: float = Field(default=3e-21, gt=0)
    beta: float = Field(default=1e-2, gt=0)
    # Feedback power of the FS; defaults to the HAP power. The size-ratio crossover sits near
    # k_ops * feedback_rate / f_op, so about 790 at 1 W and about 100 at 4e-11 W.
    p_fu_max: float = Field(default=1.0, gt=0)
    battery_cap: Optional[float] = Field(default=None, gt=0)

    @classmethod
    def from_env(cls) -> "SystemParams":
        """Build parameters from SWIPT_FOG_<FIELD> variables, defaults elsewhere."""
        load_dotenv()

        def safe_number(name, default):
            value = os.getenv(ENV_PREFIX + name.upper())
            if value is None:
                return default
            try:
                return int(value) if isinstance(default, int) else float(value)
            except ValueError:
                return default

        values = {}
        for name, field in cls.model_fields.items():
            default = field.default
            if default is None:
                number = safe_number(name, math.nan)
                if not math.isnan(number):
                    values[name] = number
            else:
                values[name] = safe_number(name, default)
        return cls(**values)

    @property
    def energy_per_op(self) -> float:
        """F_0 * alpha * M_c * N_0 ln2, joules per logic operation."""
        return self.fanout * self.act * self.m_c * self.n0_ln2

    @property
    def bits_per_block(self) -> float:
        return self.r_th * self.t_b

    @property
    def spectral_load(self) -> float:
        """R_th * T_b / B, the bit-seconds per hertz every link must carry."""
        return self.r_th * self.t_b / self.bandwidth


class RunConfig(BaseModel):
    """Knobs of a scenario run, separate from the physics."""
    model_config = ConfigDict(extra="forbid")

    realizations: int = Field(default=200, gt=0)
    seed: int = 2019
    grid_res: int = Field(default=21, ge=3)
    sweep_points: int = Field(default=31, ge=2)
    d_ap_u: float = Field(default=10.0, ge=D_MIN)
    d_uf: float = Field(default=8.0, ge=D_MIN)
    d_ap_f: float = Field(default=20.0, gt=2 * D_MIN)
    n_frames: int = Field(default=100, ge=1)
    frame_distances: List[float] = Field(default_factory=lambda: [18.0, 20.0])
    mu_counts: List[int] = Field(default_factory=lambda: [2, 3, 4, 5, 6])
    csi_errors: List[float] = Field(default_factory=lambda: [0.0, 0.02, 0.04, 0.06, 0.08, 0.10])
    p_ap_values: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 5.0, 10.0])
    threads: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_lists(self):
        if not all(0.0 <= eps < 1.0 for eps in self.csi_errors):
            raise ValueError("csi_errors must lie in [0, 1)")
        if not all(1 <= m <= 9 for m in self.mu_counts):
            raise ValueError("mu_counts must lie in 1..9")
        if not all(p > 0 for p in self.p_ap_values):
            raise ValueError("p_ap_values must be positive")
        if not all(d >= D_MIN for d in self.frame_distances):
            raise ValueError(f"frame_distances must be at least {D_MIN} m")
        return self


Point = Tuple[float, float]


class Geometry(BaseModel):
    """Planar positions of the HAP, the fog server and every MU, in meters."""
    model_config = ConfigDict(frozen=True)

    hap_pos: Point = (0.0, 0.0)
    fs_pos: Point
    mu_pos: List[Point] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_distances(self):
        for m in range(len(self.mu_pos)):
            if self.d_ap_u(m) < D_MIN or self.d_uf(m) < D_MIN:
                raise ValueError(f"MU {m} lies closer than {D_MIN} m to the HAP or the FS")
        return self

    @classmethod
    def single(cls, d_ap_u: float, d_uf: float) -> "Geometry":
        """One MU at d_ap_u from the HAP, FS at d_uf from the MU at a right angle."""
        return cls(hap_pos=(0.0, 0.0), mu_pos=[(d_ap_u, 0.0)], fs_pos=(d_ap_u, d_uf))

    @classmethod
    def on_segment(cls, d_ap_u: float, d_ap_f: float) -> "Geometry":
        """One MU on the straight line between the HAP and the FS."""
        return cls(hap_pos=(0.0, 0.0), mu_pos=[(d_ap_u, 0.0)], fs_pos=(d_ap_f, 0.0))

    @property
    def n_mu(self) -> int:
        return len(self.mu_pos)

    def d_ap_u(self, m: int) -> float:
        return math.dist(self.hap_pos, self.mu_pos[m])

    def d_uf(self, m: int) -> float:
        return math.dist(self.mu_pos[m], self.fs_pos)

    def d_fu(self, m: int) -> float:
        return self.d_uf(m)


class LinkGains(BaseModel):
    """Linear power gains of one block: beamformed HAP->MU, MU->FS and FS->MU."""
    model_config = ConfigDict(frozen=True)

    g_ap_u: float = Field(gt=0)
    g_uf: float = Field(gt=0)
    g_fu: float = Field(gt=0)


class ChannelRealization(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    h_ap_u: np.ndarray
    h_uf: complex
    h_fu: complex
    g_ap_u: float = Field(gt=0)
    g_uf: float = Field(gt=0)
    g_fu: float = Field(gt=0)

    @classmethod
    def from_coefficients(cls, h_ap_u, h_uf, h_fu) -> "ChannelRealization":
        h_ap_u = np.asarray(h_ap_u, dtype=np.complex128)
        return cls(
            h_ap_u=h_ap_u,
            h_uf=complex(h_uf),
            h_fu=complex(h_fu),
            g_ap_u=float(np.vdot(h_ap_u, h_ap_u).real),
            g_uf=abs(complex(h_uf)) ** 2,
            g_fu=abs(complex(h_fu)) ** 2,
        )

    @property
    def gains(self) -> LinkGains:
        return LinkGains(g_ap_u=self.g_ap_u, g_uf=self.g_uf, g_fu=self.g_fu)


class Feasibility(BaseModel):
    """Verdict of a mode feasibility check."""
    mode: Literal["local", "offload"]
    feasible: bool
    reason: Optional[InfeasibleReason] = None

    def __bool__(self) -> bool:
        return self.feasible


class OffloadBudget(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_frak: float
    tau_fogcpt: float = Field(ge=0)
    tau_fu: float = Field(ge=0)


class ModeSolution(BaseModel):
    """One MU's operating point in one block and its energy ledger."""
    model_config = ConfigDict(frozen=True)

    mode: Mode
    tau_ipt: float = Field(ge=0)
    tau_cpt: float = Field(default=0.0, ge=0)
    tau_uf: float = Field(default=0.0, ge=0)
    tau_fogcpt: float = Field(default=0.0, ge=0)
    tau_fu: float = Field(default=0.0, ge=0)
    rho: float = Field(ge=0, lt=1)
    p_uf: float = Field(default=0.0, ge=0)
    e_id: float = Field(default=0.0, ge=0)
    e_cpt: float = Field(default=0.0, ge=0)
    e_uf: float = Field(default=0.0, ge=0)
    e_eh: float = Field(ge=0)
    e_s: float = Field(default=0.0, ge=0)
    e_u: float

    @model_validator(mode="after")
    def _check_ledger(self):
        if self.mode == "harvest_only":
            if self.e_u != 0.0 or self.e_consumed != 0.0:
                raise ValueError("harvest-only blocks consume nothing")
            return self
        if self.mode == "local" and (self.tau_uf or self.p_uf or self.e_uf):
            raise ValueError("local solutions carry no offloading terms")
        if self.mode == "offload" and (self.tau_cpt or self.e_cpt):
            raise ValueError("offload solutions carry no local computing terms")
        expected = self.e_consumed - self.e_eh - self.e_s
        scale = max(abs(self.e_consumed), abs(self.e_eh), abs(self.e_s), 1e-300)
        if abs(self.e_u - expected) > 1e-12 * scale:
            raise ValueError(f"e_u {self.e_u} disagrees with its ledger {expected}")
        return self

    @property
    def e_consumed(self) -> float:
        return self.e_id + self.e_cpt + self.e_uf

    @property
    def demand(self) -> float:
        """Net energy the block draws from storage, ignoring what is already stored."""
        return self.e_consumed - self.e_eh

    @property
    def time_used(self) -> float:
        return self.tau_ipt + self.tau_cpt + self.tau_uf + self.tau_fogcpt + self.tau_fu


class Schedule(BaseModel):
    psi: List[List[int]]
    order: List[int]
    solutions: List[ModeSolution]
    iota_trace: List[float]
    total_e_u: float

    @model_validator(mode="after")
    def _check_assignment(self):
        m = len(self.order)
        if sorted(self.order) != list(range(m)):
            raise ValueError("order must be a permutation of the MU indices")
        if len(self.psi) != m or any(len(row) != m for row in self.psi):
            raise ValueError("psi must be square with one row per MU")
        if any(sum(row) != 1 for row in self.psi) or any(sum(col) != 1 for col in zip(*self.psi)):
            raise ValueError("psi must assign exactly one block per MU and one MU per block")
        if any(b < a for a, b in zip(self.iota_trace, self.iota_trace[1:])):
            raise ValueError("accumulated broadcast energy cannot decrease")
        return self

    @staticmethod
    def assignment_matrix(order: List[int]) -> List[List[int]]:
        psi = [[0] * len(order) for _ in order]
        for block, mu in enumerate(order):
            psi[mu][block] = 1
        return psi

    @property
    def n_harvest_only(self) -> int:
        return sum(1 for s in self.solutions if s.mode == "harvest_only")


class BatteryState(BaseModel):
    model_config = ConfigDict(frozen=True)

    e_s: float = Field(default=0.0, ge=0)
    cap: Optional[float] = Field(default=None, gt=0)

    def with_level(self, level: float) -> Tuple["BatteryState", float]:
        """New state holding `level` joules, clipped to the cap; returns the spill too."""
        level = max(level, 0.0)
        spilled = 0.0
        if self.cap is not None and level > self.cap:
            spilled = level - self.cap
            level = self.cap
        return BatteryState(e_s=level, cap=self.cap), spilled


class BlockOutcome(BaseModel):
    frame: int = Field(default=0, ge=0)
    block: int = Field(default=0, ge=0)
    mu: int = Field(default=0, ge=0)
    mode: Mode
    e_s: float = Field(ge=0)
    e_u: float
    e_eh: float = Field(ge=0)
    e_consumed: float = Field(ge=0)
    e_spilled: float = Field(default=0.0, ge=0)
    tau_ipt: float = Field(ge=0)


TRACE_COLUMNS = ["frame", "mu", "mode", "e_s", "e_u", "e_eh"]


class FrameTrace(BaseModel):
    initial_e_s: List[float]
    records: List[BlockOutcome] = Field(default_factory=list)

    @property
    def n_mu(self) -> int:
        return len(self.initial_e_s)

    @property
    def final_e_s(self) -> List[float]:
        levels = list(self.initial_e_s)
        for record in self.records:
            levels[record.mu] = record.e_s
        return levels

    @property
    def harvest_only_count(self) -> int:
        return sum(1 for r in self.records if r.mode == "harvest_only")

    def storage_by_frame(self) -> List[List[float]]:
        """Per-frame battery levels of every MU at the end of the frame."""
        levels = list(self.initial_e_s)
        frames: List[List[float]] = []
        current = None
        for record in self.records:
            if current is not None and record.frame != current:
                frames.append(list(levels))
            current = record.frame
            levels[record.mu] = record.e_s
        if current is not None:
            frames.append(list(levels))
        return frames

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.records], columns=list(BlockOutcome.model_fields))

    def to_csv(self, path) -> None:
        self.to_dataframe()[TRACE_COLUMNS].to_csv(path, index=False, na_rep="nan")


class ThresholdReport(BaseModel):
    kind: Literal["k0", "beta0", "l_max"]
    value: float
    branch_used: str
    oracle_value: float
    rel_gap: float = Field(ge=0)
    printed_value: Optional[float] = None
    printed_gap: Optional[float] = Field(default=None, ge=0)


class GridPoint(BaseModel):
    """Best lattice point found by a brute-force scan."""
    mode: Literal["local", "offload"]
    tau_ipt: float
    rho: float
    p_uf: float = 0.0
    tau_uf: float = 0.0
    e_u: float
    n_feasible: int = Field(ge=1)

import logging
from typing import Optional, Sequence, Tuple

from .channel import ChannelModel
from .exceptions import BothModesInfeasibleError
from .mode_selector import select_mode
from .models import BatteryState, BlockOutcome, FrameTrace, Geometry, SystemParams
from .scheduler import Channel, UserScheduler, _as_gains, broadcast_increment

logger = logging.getLogger(__name__)


def step_block(params: SystemParams, battery: BatteryState, channel: Channel,
               iota: float = 0.0) -> Tuple[BlockOutcome, BatteryState]:
    """Serve the MU if its battery covers the block, otherwise spend the block harvesting."""
    gains = _as_gains(channel)
    try:
        candidate = select_mode(params, gains, iota, 0.0)
    except BothModesInfeasibleError:
        candidate = None

    if candidate is not None and max(candidate.e_u, 0.0) <= battery.e_s:
        state, spilled = battery.with_level(battery.e_s - candidate.e_u)
        outcome = BlockOutcome(mode=candidate.mode, e_s=state.e_s, e_u=candidate.e_u, e_eh=candidate.e_eh,
                               e_consumed=candidate.e_consumed, e_spilled=spilled, tau_ipt=candidate.tau_ipt)
        return outcome, state

    harvested = params.eta * params.p_ap * gains.g_ap_u * params.t_b + iota
    state, spilled = battery.with_level(battery.e_s + harvested)
    outcome = BlockOutcome(mode="harvest_only", e_s=state.e_s, e_u=0.0, e_eh=harvested, e_consumed=0.0,
                           e_spilled=spilled, tau_ipt=params.t_b)
    return outcome, state


class FrameSimulator:
    """Runs frames back to back with every MU's battery carried across frames.

    Each frame draws a fresh block-fading channel per MU, orders the MUs with
    the greedy scheduler and then serves them block by block.
    """

    def __init__(self, params: SystemParams, geometry: Geometry, seed: int,
                 initial_e_s: Optional[Sequence[float]] = None, realization: int = 0):
        self.params = params
        self.channels = ChannelModel(params, geometry, seed)
        self.scheduler = UserScheduler(params)
        self.realization = realization
        levels = list(initial_e_s) if initial_e_s is not None else [0.0] * geometry.n_mu
        self.batteries = [BatteryState(e_s=level, cap=params.battery_cap) for level in levels]
        self.trace = FrameTrace(initial_e_s=[b.e_s for b in self.batteries])

    def run_frame(self, frame: int) -> None:
        channels = self.channels.draw_all(block=frame, realization=self.realization)
        schedule = self.scheduler.greedy(channels, [b.e_s for b in self.batteries])
        iota = 0.0
        for block, m in enumerate(schedule.order):
            outcome, self.batteries[m] = step_block(self.params, self.batteries[m], channels[m], iota)
            self.trace.records.append(outcome.model_copy(update={"frame": frame, "block": block, "mu": m}))
            iota += broadcast_increment(self.params, channels[m].g_ap_u, outcome.tau_ipt)

    def run(self, n_frames: int) -> FrameTrace:
        if n_frames < 1:
            raise ValueError("n_frames must be at least 1")
        for frame in range(n_frames):
            self.run_frame(frame)
        logger.debug("simulated %d frames, %d harvest-only blocks", n_frames, self.trace.harvest_only_count)
        return self.trace


def run_frames(params: SystemParams, geometry: Geometry, n_frames: int, seed: int,
               initial_e_s: Optional[Sequence[float]] = None, realization: int = 0) -> FrameTrace:
    return FrameSimulator(params, geometry, seed, initial_e_s, realization).run(n_frames)

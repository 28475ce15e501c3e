import logging
from typing import List, Optional, Sequence, Tuple, Union

from .channel import stream
from .exceptions import BothModesInfeasibleError, ScheduleTooLargeError
from .mode_selector import select_mode
from .models import ChannelRealization, LinkGains, ModeSolution, Schedule, SystemParams

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_MU = 9

Channel = Union[ChannelRealization, LinkGains]


def broadcast_increment(params: SystemParams, g_ap_u_prev: float, tau_ipt_prev: float) -> float:
    """Energy later MUs collect from one served block's beamformed transmission."""
    return params.eta * params.p_ap * g_ap_u_prev * tau_ipt_prev


def _as_gains(channel: Channel) -> LinkGains:
    return channel.gains if isinstance(channel, ChannelRealization) else channel


class UserScheduler:
    """Assigns the MUs of one frame to its TDMA blocks.

    Every MU served in an earlier block adds its broadcast energy to the
    credit (iota) of all MUs still waiting; ``broadcast_credit=False`` turns
    that credit off for comparison runs. The credit only enters the energy
    ledger, so each MU is solved once per call and shifted by its credit.
    """

    def __init__(self, params: SystemParams, broadcast_credit: bool = True):
        self.params = params
        self.broadcast_credit = broadcast_credit

    def harvest_only(self, gains: LinkGains, iota: float, e_s: float) -> ModeSolution:
        e_eh = self.params.eta * self.params.p_ap * gains.g_ap_u * self.params.t_b + iota
        return ModeSolution(mode="harvest_only", tau_ipt=self.params.t_b, rho=0.0, e_eh=e_eh, e_s=e_s, e_u=0.0)

    def _base(self, gains: Sequence[LinkGains], e_s: Sequence[float]) -> List[Optional[ModeSolution]]:
        bases: List[Optional[ModeSolution]] = []
        for g, level in zip(gains, e_s):
            try:
                bases.append(select_mode(self.params, g, 0.0, level))
            except BothModesInfeasibleError:
                bases.append(None)
        return bases

    @staticmethod
    def _credited(base: ModeSolution, iota: float) -> ModeSolution:
        if iota == 0.0:
            return base
        e_eh = base.e_eh + iota
        return base.model_copy(update={"e_eh": e_eh, "e_u": base.e_consumed - e_eh - base.e_s})

    def _solution(self, gains: LinkGains, base: Optional[ModeSolution], iota: float, e_s: float) -> ModeSolution:
        if base is None:
            return self.harvest_only(gains, iota, e_s)
        return self._credited(base, iota)

    def _increment(self, gains: LinkGains, tau_ipt: float) -> float:
        if not self.broadcast_credit:
            return 0.0
        return broadcast_increment(self.params, gains.g_ap_u, tau_ipt)

    def _build(self, order, solutions, iota_trace) -> Schedule:
        total = 0.0
        for solution in solutions:
            total += solution.e_u
        return Schedule(psi=Schedule.assignment_matrix(order), order=list(order), solutions=solutions,
                        iota_trace=iota_trace, total_e_u=total)

    def _walk(self, gains, bases, e_s, order) -> Schedule:
        iota = 0.0
        solutions, iota_trace = [], []
        for m in order:
            solution = self._solution(gains[m], bases[m], iota, e_s[m])
            solutions.append(solution)
            iota_trace.append(iota)
            iota += self._increment(gains[m], solution.tau_ipt)
        return self._build(order, solutions, iota_trace)

    def evaluate_order(self, channels: Sequence[Channel], e_s: Sequence[float], order: Sequence[int]) -> Schedule:
        gains = [_as_gains(c) for c in channels]
        return self._walk(gains, self._base(gains, e_s), e_s, order)

    def greedy(self, channels: Sequence[Channel], e_s: Sequence[float]) -> Schedule:
        gains = [_as_gains(c) for c in channels]
        bases = self._base(gains, e_s)
        remaining = [m for m in range(len(gains)) if bases[m] is not None]
        iota = 0.0
        order = []
        while remaining:
            best: Optional[Tuple[int, float]] = None
            for m in remaining:
                e_u = bases[m].e_consumed - (bases[m].e_eh + iota) - bases[m].e_s
                if best is None or e_u < best[1]:
                    best = (m, e_u)
            m = best[0]
            order.append(m)
            remaining.remove(m)
            iota += self._increment(gains[m], bases[m].tau_ipt)

        unserved = [m for m in range(len(gains)) if bases[m] is None]
        if unserved:
            logger.debug("%d MU(s) cannot be served and harvest only", len(unserved))
        return self._walk(gains, bases, e_s, order + unserved)

    def exhaustive(self, channels: Sequence[Channel], e_s: Sequence[float]) -> Schedule:
        n_mu = len(channels)
        if n_mu > MAX_EXHAUSTIVE_MU:
            raise ScheduleTooLargeError(
                f"exhaustive search visits {n_mu}! orders; it is limited to {MAX_EXHAUSTIVE_MU} MUs, "
                "use the greedy scheduler for larger frames")
        gains = [_as_gains(c) for c in channels]
        bases = self._base(gains, e_s)
        best: List = [None, None]

        # Depth-first over prefixes in lexicographic order; strict improvement keeps the first optimum.
        def visit(prefix, remaining, iota, partial):
            if not remaining:
                if best[0] is None or partial < best[0]:
                    best[0], best[1] = partial, list(prefix)
                return
            for m in remaining:
                base = bases[m]
                if base is None:
                    e_u, tau_ipt = 0.0, self.params.t_b
                else:
                    e_u, tau_ipt = base.e_consumed - (base.e_eh + iota) - base.e_s, base.tau_ipt
                prefix.append(m)
                visit(prefix, [r for r in remaining if r != m], iota + self._increment(gains[m], tau_ipt),
                      partial + e_u)
                prefix.pop()

        visit([], list(range(n_mu)), 0.0, 0.0)
        return self._walk(gains, bases, e_s, best[1])

    def random(self, channels: Sequence[Channel], e_s: Sequence[float], seed: int, *counters: int) -> Schedule:
        """Uniformly random order drawn from the (seed, counters) stream."""
        order = [int(m) for m in stream(seed, *counters).permutation(len(channels))]
        return self.evaluate_order(channels, e_s, order)


def greedy_schedule(params: SystemParams, channels: Sequence[Channel], e_s: Sequence[float],
                    broadcast_credit: bool = True) -> Schedule:
    return UserScheduler(params, broadcast_credit).greedy(channels, e_s)


def exhaustive_schedule(params: SystemParams, channels: Sequence[Channel], e_s: Sequence[float],
                        broadcast_credit: bool = True) -> Schedule:
    return UserScheduler(params, broadcast_credit).exhaustive(channels, e_s)


def random_schedule(params: SystemParams, channels: Sequence[Channel], e_s: Sequence[float], seed: int,
                    broadcast_credit: bool = True) -> Schedule:
    return UserScheduler(params, broadcast_credit).random(channels, e_s, seed)

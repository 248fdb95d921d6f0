"""TTI-stepped MAC: link adaptation, slice quotas and intra-slice scheduling.

Channel power gain maps to SNR, CQI and MCS once per run (channels are
static within a run); the per-TTI work is PRB dealing against RLC buffer
backlog under the slice's scheduling policy.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from .core import PRB_TOTAL, Slice, SchedulingPolicy, CARRIER_BANDWIDTH_HZ
from .metrics import KpmRecord
from .traffic import RlcBuffer

TX_POWER_DBM = 13.0
NOISE_FIGURE_DB = 7.0
THERMAL_NOISE_DBM_PER_HZ = -174.0

# 15 uniform CQI steps from -6 dB to +22 dB, boundary inclusive-lower
CQI_SNR_THRESHOLDS_DB = tuple(2 * k - 8 for k in range(1, 16))

# monotone CQI-to-MCS table, round(cqi * 28 / 15)
MCS_BY_CQI = (0, 2, 4, 6, 7, 9, 11, 13, 15, 17, 19, 21, 22, 24, 26, 28)

MCS_MAX = 28
SE_MIN = 0.15          # spectral-efficiency ramp endpoints, bits/s/Hz
SE_MAX = 5.4
TBS_OVERHEAD = 0.9     # control/pilot overhead factor

PF_EWMA_ALPHA = 0.01
PF_EWMA_FLOOR_BPS = 1.0


def spectral_efficiency(mcs: int) -> float:
    """Linear ramp from SE(0)=0.15 to SE(28)=5.4 bits/s/Hz."""
    if not 0 <= mcs <= MCS_MAX:
        raise ValueError(f"mcs must be in [0, {MCS_MAX}], got {mcs}")
    return SE_MIN + (mcs / MCS_MAX) * (SE_MAX - SE_MIN)


# bytes per PRB per TTI for each MCS: floor(SE * 180 kHz * 1 ms * 0.9 / 8)
BYTES_PER_PRB = tuple(
    math.floor(spectral_efficiency(m) * 180e3 * 1e-3 * TBS_OVERHEAD / 8.0)
    for m in range(MCS_MAX + 1)
)


def snr_from_gain(gain: float, tx_power_dbm: float = TX_POWER_DBM,
                  bandwidth_hz: float = CARRIER_BANDWIDTH_HZ) -> float:
    """Receiver SNR in dB for a linear channel power gain; -inf when gain is 0."""
    if gain < 0:
        raise ValueError(f"gain must be >= 0, got {gain}")
    if bandwidth_hz <= 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth_hz}")
    if gain == 0:
        return float("-inf")
    noise_dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz) + NOISE_FIGURE_DB
    return tx_power_dbm + 10.0 * math.log10(gain) - noise_dbm


def cqi_from_snr(snr_db: float) -> int:
    return bisect_right(CQI_SNR_THRESHOLDS_DB, snr_db)


def mcs_from_cqi(cqi: int) -> int:
    if not 0 <= cqi <= 15:
        raise ValueError(f"cqi must be in [0, 15], got {cqi}")
    return MCS_BY_CQI[cqi]


def tbs(mcs: int, prb_count: int) -> int:
    """Transport block size in bytes for one TTI."""
    if not 0 <= mcs <= MCS_MAX:
        raise ValueError(f"mcs must be in [0, {MCS_MAX}], got {mcs}")
    if prb_count < 0:
        raise ValueError(f"prb_count must be >= 0, got {prb_count}")
    return BYTES_PER_PRB[mcs] * prb_count


@dataclass(frozen=True)
class SlicingConfig:
    """PRB quota per slice; quotas must fit in the 50-PRB carrier."""

    slice_quotas: dict

    def __post_init__(self):
        total = 0
        for sl, quota in self.slice_quotas.items():
            if not isinstance(sl, Slice):
                raise ValueError(f"unknown slice id {sl!r}")
            if quota < 0:
                raise ValueError(f"{sl} quota must be >= 0, got {quota}")
            total += quota
        if total > PRB_TOTAL:
            raise ValueError(f"slice quotas sum to {total}, exceeding {PRB_TOTAL} PRBs")

    def quota(self, sl: Slice) -> int:
        return self.slice_quotas.get(sl, 0)


@dataclass
class UeContext:
    """Per-UE MAC state; link adaptation is fixed while the channel is static."""

    ue_id: int
    slice: Slice
    channel_power_gain: float
    snr_db: float
    cqi: int
    mcs: int
    buffer: RlcBuffer = field(default_factory=RlcBuffer)
    ewma_throughput_bps: float = PF_EWMA_FLOOR_BPS
    rr_cursor_rank: int = 0

    def __post_init__(self):
        self._wf_marginals: list[float] = []

    @classmethod
    def from_gain(cls, ue_id: int, sl: Slice, gain: float,
                  tx_power_dbm: float = TX_POWER_DBM,
                  bandwidth_hz: float = CARRIER_BANDWIDTH_HZ) -> "UeContext":
        snr = snr_from_gain(gain, tx_power_dbm, bandwidth_hz)
        cqi = cqi_from_snr(snr)
        return cls(ue_id=ue_id, slice=sl, channel_power_gain=gain,
                   snr_db=snr, cqi=cqi, mcs=mcs_from_cqi(cqi))

    @property
    def bytes_per_prb(self) -> int:
        return BYTES_PER_PRB[self.mcs]

    @property
    def prb_rate_bps(self) -> float:
        """Instantaneous rate of one PRB at the current MCS."""
        return self.bytes_per_prb * 8000.0

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    def demand_prbs(self) -> int:
        """PRBs needed to drain the buffer at the current MCS."""
        return -(-self.buffer.queued_bytes // self.bytes_per_prb)

    def wf_marginal(self, k: int) -> float:
        """Utility increase of the (k+1)-th PRB: log(1+(k+1) snr) - log(1+k snr).

        The channel is static per run, so the sequence is memoized.
        """
        table = self._wf_marginals
        if k >= len(table):
            s = self.snr_linear
            for j in range(len(table), k + 1):
                table.append(math.log1p((j + 1) * s) - math.log1p(j * s))
        return table[k]


@dataclass(frozen=True)
class TtiAllocation:
    """Per-TTI grants plus per-slice PRB accounting.

    requested_prbs is the backlog-derived demand capped at the slice quota
    (the PRB-Ratio denominator); demand_prbs keeps the uncapped figure.
    """

    tti_index: int
    grants: dict
    requested_prbs: dict
    granted_prbs: dict
    demand_prbs: dict


def schedule_rr(ues: list[UeContext], quota: int, cursor: int):
    """Deal PRBs one at a time in cyclic UE order starting at the cursor.

    UEs whose demand is met (or whose buffers are empty) are skipped.  The
    returned cursor points at the successor of the last UE reached by the
    deal, so the rotation resumes where this TTI left off.
    """
    if quota < 0:
        raise ValueError(f"quota must be >= 0, got {quota}")
    grants = {ue.ue_id: 0 for ue in ues}
    if not ues or quota == 0:
        return grants, cursor
    n = len(ues)
    demand = {ue.ue_id: ue.demand_prbs() for ue in ues}
    cursor %= n
    pos = cursor
    remaining = quota
    misses = 0
    furthest_offset = None
    while remaining > 0 and misses < n:
        ue_id = ues[pos].ue_id
        if grants[ue_id] < demand[ue_id]:
            grants[ue_id] += 1
            remaining -= 1
            misses = 0
            offset = (pos - cursor) % n
            if furthest_offset is None or offset > furthest_offset:
                furthest_offset = offset
        else:
            misses += 1
        pos = (pos + 1) % n
    if furthest_offset is None:
        return grants, cursor
    return grants, (cursor + furthest_offset + 1) % n


def schedule_wf(ues: list[UeContext], quota: int) -> dict:
    """Greedy water-filling: each PRB goes to the largest marginal utility.

    The per-UE utility of k PRBs is log(1 + k * snr_linear), so marginals
    diminish with the allocation and favour better channels first.  Ties
    break toward the lowest ue_id.
    """
    if quota < 0:
        raise ValueError(f"quota must be >= 0, got {quota}")
    grants = {ue.ue_id: 0 for ue in ues}
    if not ues or quota == 0:
        return grants
    ordered = sorted(ues, key=lambda u: u.ue_id)
    counts = [0] * len(ordered)
    demand = [ue.demand_prbs() for ue in ordered]
    for _ in range(quota):
        best = -1
        best_delta = 0.0
        for i, ue in enumerate(ordered):
            if counts[i] >= demand[i]:
                continue
            delta = ue.wf_marginal(counts[i])
            if best < 0 or delta > best_delta:
                best, best_delta = i, delta
        if best < 0:
            break
        counts[best] += 1
    for ue, got in zip(ordered, counts):
        grants[ue.ue_id] = got
    return grants


def schedule_pf(ues: list[UeContext], quota: int) -> dict:
    """Proportional fair: argmax of instantaneous rate over EWMA throughput.

    The metric is fixed within a TTI (the EWMA updates afterwards), so the
    argmax UE absorbs PRBs until its demand is met; ties break toward the
    lowest ue_id.
    """
    if quota < 0:
        raise ValueError(f"quota must be >= 0, got {quota}")
    grants = {ue.ue_id: 0 for ue in ues}
    if not ues or quota == 0:
        return grants
    ordered = sorted(ues, key=lambda u: u.ue_id)
    counts = [0] * len(ordered)
    demand = [ue.demand_prbs() for ue in ordered]
    metric = [ue.prb_rate_bps / ue.ewma_throughput_bps for ue in ordered]
    remaining = quota
    while remaining > 0:
        best = -1
        best_metric = 0.0
        for i in range(len(ordered)):
            if counts[i] >= demand[i]:
                continue
            if best < 0 or metric[i] > best_metric:
                best, best_metric = i, metric[i]
        if best < 0:
            break
        take = min(remaining, demand[best] - counts[best])
        counts[best] += take
        remaining -= take
    for ue, got in zip(ordered, counts):
        grants[ue.ue_id] = got
    return grants


class RanState:
    """MAC-layer state: UE contexts, RR rotation cursors and the TTI clock."""

    def __init__(self, ues: list[UeContext]):
        ids = [ue.ue_id for ue in ues]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate ue_id in RAN state")
        self.ues = sorted(ues, key=lambda u: u.ue_id)
        self.by_slice = {sl: [u for u in self.ues if u.slice is sl] for sl in Slice}
        for members in self.by_slice.values():
            for rank, ue in enumerate(members):
                ue.rr_cursor_rank = rank
        self.rr_cursors = {sl: 0 for sl in Slice}
        self.tti_index = 0


def run_tti(state: RanState, slicing: SlicingConfig, policies: dict) -> tuple:
    """Advance the MAC by one TTI: schedule, serve buffers and emit KPMs."""
    tti = state.tti_index
    grants_all: dict[int, int] = {}
    requested, granted, demand_raw = {}, {}, {}
    records = []
    total_granted = 0
    one_minus_alpha = 1.0 - PF_EWMA_ALPHA
    for sl in Slice:
        members = state.by_slice[sl]
        quota = slicing.quota(sl)
        policy = policies.get(sl, SchedulingPolicy.RR)
        demands = [ue.demand_prbs() for ue in members]
        if policy is SchedulingPolicy.RR:
            grants, state.rr_cursors[sl] = schedule_rr(members, quota, state.rr_cursors[sl])
        elif policy is SchedulingPolicy.WF:
            grants = schedule_wf(members, quota)
        elif policy is SchedulingPolicy.PF:
            grants = schedule_pf(members, quota)
        else:
            raise ValueError(f"unknown scheduling policy {policy!r}")
        slice_granted = sum(grants.values())
        if slice_granted > quota:
            raise RuntimeError(f"scheduler overran {sl} quota: {slice_granted} > {quota}")
        raw = sum(demands)
        demand_raw[sl] = raw
        requested[sl] = raw if raw < quota else quota
        granted[sl] = slice_granted
        total_granted += slice_granted
        for ue, demand in zip(members, demands):
            got = grants[ue.ue_id]
            buffer = ue.buffer
            served = BYTES_PER_PRB[ue.mcs] * got
            if served > buffer.queued_bytes:
                served = buffer.queued_bytes
            buffer.queued_bytes -= served
            served_rate = served * 8000.0  # bits/s over the 1 ms TTI
            ewma = one_minus_alpha * ue.ewma_throughput_bps + PF_EWMA_ALPHA * served_rate
            ue.ewma_throughput_bps = ewma if ewma > PF_EWMA_FLOOR_BPS else PF_EWMA_FLOOR_BPS
            grants_all[ue.ue_id] = got
            records.append(KpmRecord(
                timestamp_ms=tti + 1, ue_id=ue.ue_id, slice=sl,
                throughput_bps=served * 8000, buffer_bytes=buffer.queued_bytes,
                cqi=ue.cqi, mcs=ue.mcs, granted_prbs=got, requested_prbs=demand))
    if total_granted > PRB_TOTAL:
        raise RuntimeError(f"total grants {total_granted} exceed the {PRB_TOTAL}-PRB carrier")
    state.tti_index += 1
    allocation = TtiAllocation(tti_index=tti, grants=grants_all, requested_prbs=requested,
                               granted_prbs=granted, demand_prbs=demand_raw)
    return allocation, records

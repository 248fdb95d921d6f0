"""Slice traffic generation and RLC buffer accounting.

CBR arrivals are computed in exact integer arithmetic (bits accumulated per
TTI, emitted as whole bytes), so totals over any whole-second window match
the configured rate with zero drift.  Poisson traffic arrives as fixed-size
packets whose per-TTI counts are drawn from an independent counter-based
stream, making arrivals a pure function of (seed, tti_index).
"""

import enum
from dataclasses import dataclass

import numpy as np

POISSON_PACKET_BYTES = 125
_TTIS_PER_SECOND = 1000
_BITS_PER_BYTE = 8


class TrafficKind(enum.Enum):
    CONSTANT_BITRATE = "cbr"
    POISSON = "poisson"


@dataclass(frozen=True)
class TrafficProfile:
    kind: TrafficKind
    rate_bps: int

    def __post_init__(self):
        if self.rate_bps <= 0:
            raise ValueError(f"rate must be > 0 bits/s, got {self.rate_bps}")
        if int(self.rate_bps) != self.rate_bps:
            raise ValueError("rate must be an integer number of bits/s")


def _packet_lambda(profile: TrafficProfile) -> float:
    return profile.rate_bps / (_BITS_PER_BYTE * POISSON_PACKET_BYTES * _TTIS_PER_SECOND)


def generate_arrivals(profile: TrafficProfile, tti_index: int, seed: int) -> int:
    """Bytes arriving during the given TTI.

    CBR: cumulative-bit bookkeeping, exact for integer rates.  Poisson:
    125-byte packets with a per-TTI Poisson count at the profile's mean
    rate (equivalent in distribution to exponential inter-arrivals).  The
    Poisson stream is the canonical per-seed sequence, so random access at
    tti_index costs tti_index + 1 draws; use TrafficSource for long runs.
    """
    if tti_index < 0:
        raise ValueError(f"tti_index must be >= 0, got {tti_index}")
    if profile.kind is TrafficKind.CONSTANT_BITRATE:
        denom = _TTIS_PER_SECOND * _BITS_PER_BYTE
        before = profile.rate_bps * tti_index // denom
        after = profile.rate_bps * (tti_index + 1) // denom
        return after - before
    counts = np.random.default_rng(seed).poisson(_packet_lambda(profile), size=tti_index + 1)
    return int(counts[-1]) * POISSON_PACKET_BYTES


class TrafficSource:
    """Sequential per-TTI arrival stream for one UE, seeded and replayable."""

    def __init__(self, profile: TrafficProfile, seed: int):
        self.profile = profile
        self.seed = seed
        self._next_tti = 0
        self._rng = np.random.default_rng(seed)

    def arrivals(self) -> int:
        """Bytes for the next TTI; matches generate_arrivals at the same index."""
        tti = self._next_tti
        self._next_tti += 1
        if self.profile.kind is TrafficKind.CONSTANT_BITRATE:
            return generate_arrivals(self.profile, tti, self.seed)
        return int(self._rng.poisson(_packet_lambda(self.profile))) * POISSON_PACKET_BYTES

    def pregenerate(self, tti_count: int) -> np.ndarray:
        """Arrivals for TTIs [0, tti_count); identical to repeated arrivals()."""
        if self.profile.kind is TrafficKind.CONSTANT_BITRATE:
            denom = _TTIS_PER_SECOND * _BITS_PER_BYTE
            ttis = np.arange(tti_count + 1, dtype=np.int64)
            cumulative = self.profile.rate_bps * ttis // denom
            return np.diff(cumulative)
        counts = np.random.default_rng(self.seed).poisson(_packet_lambda(self.profile),
                                                          size=tti_count)
        return counts.astype(np.int64) * POISSON_PACKET_BYTES


@dataclass
class RlcBuffer:
    """Unbounded transmit queue; occupancy doubles as the latency proxy."""

    queued_bytes: int = 0
    high_water_mark: int = 0

    def enqueue(self, arrived: int) -> None:
        if arrived < 0:
            raise ValueError(f"cannot enqueue {arrived} bytes")
        self.queued_bytes += arrived
        if self.queued_bytes > self.high_water_mark:
            self.high_water_mark = self.queued_bytes

    def drain(self, served: int) -> None:
        if served < 0:
            raise ValueError(f"cannot drain {served} bytes")
        if served > self.queued_bytes:
            raise ValueError(
                f"over-drain: asked to serve {served} bytes with {self.queued_bytes} queued")
        self.queued_bytes -= served

    def update(self, arrived: int, served: int) -> "RlcBuffer":
        """Apply one TTI's arrivals then service; returns self."""
        self.enqueue(arrived)
        self.drain(served)
        return self

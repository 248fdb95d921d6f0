"""Shared domain vocabulary: slices, scheduling policies, radio constants."""

import enum

SPEED_OF_LIGHT = 299792458.0  # m/s

PRB_TOTAL = 50                # 10 MHz carrier
PRB_BANDWIDTH_HZ = 180e3
TTI_SECONDS = 1e-3
CARRIER_BANDWIDTH_HZ = 10e6


class Slice(enum.Enum):
    EMBB = "eMBB"
    URLLC = "URLLC"

    def __str__(self):
        return self.value


class SchedulingPolicy(enum.IntEnum):
    """Intra-slice schedulers, ordered for the xApp's lexicographic cycle."""

    RR = 0
    WF = 1
    PF = 2

    def __str__(self):
        return self.name


def parse_slice(text: str) -> Slice:
    for s in Slice:
        if s.value.lower() == text.strip().lower():
            return s
    raise ValueError(f"unknown slice {text!r} (expected eMBB or URLLC)")


def parse_policy(text: str) -> SchedulingPolicy:
    try:
        return SchedulingPolicy[text.strip().upper()]
    except KeyError:
        raise ValueError(f"unknown scheduling policy {text!r} (expected RR, WF or PF)") from None

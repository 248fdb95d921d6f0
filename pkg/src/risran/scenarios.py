"""Scenario catalog and the flat key-value scenario file format.

The built-in catalog encodes the eight reference network configurations:
single-UE runs at 3.6 MHz with growing RIS panels, the two-slice 5+5 MHz
split, and the xApp-controlled 9+1 MHz split.  Scenario files are flat
``key = value`` text; see README for the key reference.
"""

import math
from dataclasses import dataclass, replace, field

from .core import PRB_TOTAL, Slice, SchedulingPolicy, parse_policy, parse_slice
from .traffic import TrafficKind, TrafficProfile

# fixed deployment geometry [m]; UE ids 1..5 sit at the listed distances
# from the RIS reference point, evenly spaced in azimuth at the RIS height
BS_POSITION = (25.0, 50.0, 25.0)
RIS_REFERENCE_POSITION = (30.0, 40.0, 20.0)
UE_RIS_DISTANCES = {1: 20.0, 2: 27.0, 3: 37.0, 4: 58.0, 5: 66.0}
CARRIER_FREQUENCY_HZ = 5.9e9

TRAFFIC_BY_SLICE = {
    Slice.EMBB: TrafficProfile(TrafficKind.CONSTANT_BITRATE, 4_000_000),
    Slice.URLLC: TrafficProfile(TrafficKind.POISSON, 89_300),
}

DEFAULT_DURATION_S = 60
DEFAULT_SEED = 1


def bandwidth_to_prbs(bandwidth_mhz: float) -> int:
    """PRB quota for a slice bandwidth: round(MHz / 10 * 50)."""
    return round(bandwidth_mhz / 10.0 * PRB_TOTAL)


def ue_position(ue_id: int) -> tuple:
    """Deterministic placement: catalog distance, evenly spaced azimuth.

    UE 1's azimuth points away from the BS, putting the constellation on
    the far side of the RIS: the layout a reflecting surface serves.
    """
    if ue_id not in UE_RIS_DISTANCES:
        raise ValueError(f"unknown ue_id {ue_id}; catalog ids are 1..5")
    x0, y0, z0 = RIS_REFERENCE_POSITION
    away_from_bs = math.atan2(y0 - BS_POSITION[1], x0 - BS_POSITION[0])
    azimuth = away_from_bs + 2.0 * math.pi * (ue_id - 1) / len(UE_RIS_DISTANCES)
    d = UE_RIS_DISTANCES[ue_id]
    return (x0 + d * math.cos(azimuth), y0 + d * math.sin(azimuth), z0)


@dataclass(frozen=True)
class ScenarioConfig:
    config_id: str
    ue_ids: tuple
    slice_of: dict                      # ue_id -> Slice
    bandwidth_mhz: dict                 # Slice -> MHz
    ris_elements: int
    xapp_enabled: bool
    duration_s: int = DEFAULT_DURATION_S
    seed: int = DEFAULT_SEED
    default_policy: SchedulingPolicy = SchedulingPolicy.RR
    slice_policies: dict | None = None  # optional per-slice overrides

    def __post_init__(self):
        if not self.ue_ids:
            raise ValueError("ue_ids: scenario needs at least one UE")
        if len(set(self.ue_ids)) != len(self.ue_ids):
            raise ValueError(f"ue_ids: duplicates in {self.ue_ids}")
        object.__setattr__(self, "ue_ids", tuple(sorted(self.ue_ids)))
        for ue in self.ue_ids:
            if ue not in UE_RIS_DISTANCES:
                raise ValueError(f"ue_ids: unknown UE id {ue}")
            if ue not in self.slice_of:
                raise ValueError(f"slice_of: missing slice assignment for UE {ue}")
        if self.ris_elements < 0:
            raise ValueError(f"ris_elements: must be >= 0, got {self.ris_elements}")
        if self.duration_s < 0:
            raise ValueError(f"duration_s: must be >= 0, got {self.duration_s}")
        quotas = self.slice_quotas()
        if sum(quotas.values()) > PRB_TOTAL:
            raise ValueError(
                f"bandwidth_mhz: quotas {quotas} sum beyond {PRB_TOTAL} PRBs")
        for sl in {self.slice_of[u] for u in self.ue_ids}:
            if sl not in self.bandwidth_mhz:
                raise ValueError(f"bandwidth_mhz: no bandwidth for populated slice {sl}")

    def slice_quotas(self) -> dict:
        return {sl: bandwidth_to_prbs(mhz) for sl, mhz in self.bandwidth_mhz.items()}

    def policy_for(self, sl: Slice) -> SchedulingPolicy:
        if self.slice_policies and sl in self.slice_policies:
            return self.slice_policies[sl]
        return self.default_policy


def _single_ue(config_id, ue_id, ris_elements):
    return ScenarioConfig(
        config_id=config_id, ue_ids=(ue_id,), slice_of={ue_id: Slice.EMBB},
        bandwidth_mhz={Slice.EMBB: 3.6}, ris_elements=ris_elements, xapp_enabled=False)


def _multi_ue(config_id, embb_mhz, urllc_mhz, ris_elements, xapp, policies=None):
    return ScenarioConfig(
        config_id=config_id, ue_ids=(1, 2, 3, 4, 5),
        slice_of={1: Slice.EMBB, 2: Slice.EMBB, 3: Slice.URLLC, 4: Slice.URLLC, 5: Slice.URLLC},
        bandwidth_mhz={Slice.EMBB: embb_mhz, Slice.URLLC: urllc_mhz},
        ris_elements=ris_elements, xapp_enabled=xapp, slice_policies=policies)


# slice split follows the traffic demands; the no-xApp multi-UE rows pin
# water-filling on eMBB and round robin on URLLC
CATALOG = {
    "I": _single_ue("I", 5, 0),
    "II": _single_ue("II", 5, 100),
    "III": _single_ue("III", 1, 10),
    "IV": _single_ue("IV", 1, 1000),
    "V": _multi_ue("V", 5.0, 5.0, 0, False,
                   {Slice.EMBB: SchedulingPolicy.WF, Slice.URLLC: SchedulingPolicy.RR}),
    "VI": _multi_ue("VI", 5.0, 5.0, 100, False,
                    {Slice.EMBB: SchedulingPolicy.WF, Slice.URLLC: SchedulingPolicy.RR}),
    "VII": _multi_ue("VII", 9.0, 1.0, 0, True),
    "VIII": _multi_ue("VIII", 9.0, 1.0, 100, True),
}


def serialize_scenario(cfg: ScenarioConfig) -> str:
    """Scenario file text that load_scenario parses back to an equal config."""
    lines = [
        f"config_id = {cfg.config_id}",
        "ue_ids = " + ",".join(str(u) for u in cfg.ue_ids),
        "slices = " + ",".join(f"{u}:{cfg.slice_of[u]}" for u in cfg.ue_ids),
        "bandwidth_mhz = " + ",".join(
            f"{sl}:{mhz:g}" for sl, mhz in sorted(cfg.bandwidth_mhz.items(),
                                                  key=lambda kv: kv[0].value)),
        f"ris_elements = {cfg.ris_elements}",
        f"xapp_enabled = {'true' if cfg.xapp_enabled else 'false'}",
        f"duration_s = {cfg.duration_s}",
        f"seed = {cfg.seed}",
        f"default_policy = {cfg.default_policy}",
    ]
    if cfg.slice_policies:
        lines.append("slice_policies = " + ",".join(
            f"{sl}:{pol}" for sl, pol in sorted(cfg.slice_policies.items(),
                                                key=lambda kv: kv[0].value)))
    return "\n".join(lines) + "\n"


def _parse_mapping(value, key_parser, value_parser, field_name):
    result = {}
    for item in value.split(","):
        if ":" not in item:
            raise ValueError(f"{field_name}: expected key:value pairs, got {item!r}")
        k, v = item.split(":", 1)
        result[key_parser(k.strip())] = value_parser(v.strip())
    return result


def parse_scenario_text(text: str) -> ScenarioConfig:
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in entries:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value

    known = {"config_id", "ue_ids", "slices", "bandwidth_mhz", "ris_elements",
             "xapp_enabled", "duration_s", "seed", "default_policy", "slice_policies"}
    unknown = set(entries) - known
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    for required in ("ue_ids", "slices", "bandwidth_mhz", "ris_elements"):
        if required not in entries:
            raise ValueError(f"{required}: missing required key")

    bools = {"true": True, "false": False}
    xapp = entries.get("xapp_enabled", "false").lower()
    if xapp not in bools:
        raise ValueError(f"xapp_enabled: expected true/false, got {entries['xapp_enabled']!r}")

    return ScenarioConfig(
        config_id=entries.get("config_id", "custom"),
        ue_ids=tuple(int(u) for u in entries["ue_ids"].split(",")),
        slice_of=_parse_mapping(entries["slices"], int, parse_slice, "slices"),
        bandwidth_mhz=_parse_mapping(entries["bandwidth_mhz"], parse_slice, float,
                                     "bandwidth_mhz"),
        ris_elements=int(entries["ris_elements"]),
        xapp_enabled=bools[xapp],
        duration_s=int(entries.get("duration_s", DEFAULT_DURATION_S)),
        seed=int(entries.get("seed", DEFAULT_SEED)),
        default_policy=parse_policy(entries.get("default_policy", "RR")),
        slice_policies=_parse_mapping(entries["slice_policies"], parse_slice, parse_policy,
                                      "slice_policies") if "slice_policies" in entries else None,
    )


def load_scenario(source: str, seed: int | None = None,
                  duration_s: int | None = None) -> ScenarioConfig:
    """Resolve a catalog id (I..VIII) or scenario file path, with overrides."""
    if source in CATALOG:
        cfg = CATALOG[source]
    else:
        try:
            with open(source) as fh:
                text = fh.read()
        except OSError as exc:
            raise ValueError(f"{source!r} is neither a catalog id "
                             f"({', '.join(CATALOG)}) nor a readable file: {exc}") from exc
        cfg = parse_scenario_text(text)
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if duration_s is not None:
        overrides["duration_s"] = duration_s
    return replace(cfg, **overrides) if overrides else cfg

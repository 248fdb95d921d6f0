"""Geometry-based multipath channel generation for RIS-assisted links.

Each link is built in five steps: draw multipath components, combine them
coherently into a complex gain, average the gains over independent
realizations, impose the array steering structure on RIS-touching links,
and evaluate the overall power gain of the direct-plus-cascaded path.

Conventions: phases are referenced to the line-of-sight path, so the
dominant component of a LoS link has phase 0 and the averaged gain of a
LoS link is close to the real axis.  The RIS array axis points along +x.
"""

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .core import SPEED_OF_LIGHT

# Log-distance path loss with a free-space intercept at 1 m and 5.9 GHz.
# The exponents approximate an urban-macro setting at desk scale while
# keeping the generator self-contained and seedable.
REFERENCE_DISTANCE_M = 1.0
INTERCEPT_FREQUENCY_HZ = 5.9e9
PATH_LOSS_EXPONENT_LOS = 2.0
PATH_LOSS_EXPONENT_NLOS = 3.2
RICIAN_K_DB = 10.0            # LoS dominant-to-scattered power ratio

LOS_MPC_COUNT = 8             # 1 dominant + 7 scattered
NLOS_MPC_COUNT = 8
DEFAULT_REALIZATIONS = 100

TWO_PI = 2.0 * math.pi


class LinkKind(enum.Enum):
    UE_TO_BS = "UE_to_BS"
    UE_TO_RIS = "UE_to_RIS"
    RIS_TO_BS = "RIS_to_BS"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class MultipathComponent:
    """One propagation path: linear amplitude and phase in [0, 2pi)."""

    magnitude: float
    phase: float

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError(f"MultipathComponent magnitude must be >= 0, got {self.magnitude}")


@dataclass(frozen=True)
class SteeringVector:
    """Unit-modulus per-element phase progression for a given direction cosine."""

    entries: np.ndarray
    direction_cosine: float


@dataclass(frozen=True)
class LinkChannel:
    """Final channel gain of one link.

    Direct (UE_to_BS) links carry a scalar gain and are NLoS; RIS-touching
    links carry one complex gain per RIS element and are LoS.
    """

    kind: LinkKind
    los: bool
    scalar_gain: complex | None = None
    element_gains: np.ndarray | None = None

    def __post_init__(self):
        if self.kind is LinkKind.UE_TO_BS:
            if self.los:
                raise ValueError("UE_to_BS links are NLoS")
            if self.scalar_gain is None or self.element_gains is not None:
                raise ValueError("UE_to_BS links carry a scalar gain only")
        else:
            if not self.los:
                raise ValueError(f"{self.kind} links are LoS")
            if self.element_gains is None or self.scalar_gain is not None:
                raise ValueError(f"{self.kind} links carry per-element gains only")


@dataclass(frozen=True)
class NodeGeometry:
    """Deployment geometry: BS, RIS reference element and UE positions [m]."""

    bs_position: tuple
    ris_reference_position: tuple
    ue_positions: tuple
    carrier_frequency: float
    ris_element_count: int
    element_separation: float | None = None  # defaults to lambda/2

    def __post_init__(self):
        if self.carrier_frequency <= 0:
            raise ValueError("carrier_frequency must be > 0")
        if self.ris_element_count < 1:
            raise ValueError("ris_element_count must be >= 1")
        if self.element_separation is None:
            object.__setattr__(self, "element_separation", self.wavelength / 2.0)
        if self.element_separation <= 0:
            raise ValueError("element_separation must be > 0")
        nodes = [np.asarray(self.bs_position, float), np.asarray(self.ris_reference_position, float)]
        nodes += [np.asarray(p, float) for p in self.ue_positions]
        for i in range(len(nodes)):
            for j in range(i + 1, len(nodes)):
                if np.linalg.norm(nodes[i] - nodes[j]) <= 0:
                    raise ValueError("all pairwise node distances must be strictly positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency


def path_loss_db(distance: float, los: bool) -> float:
    """Log-distance path loss PL(d) = PL(1 m) + 10 n log10(d)."""
    if distance <= 0:
        raise ValueError(f"distance must be > 0, got {distance}")
    wavelength = SPEED_OF_LIGHT / INTERCEPT_FREQUENCY_HZ
    fspl_1m = 20.0 * math.log10(4.0 * math.pi * REFERENCE_DISTANCE_M / wavelength)
    exponent = PATH_LOSS_EXPONENT_LOS if los else PATH_LOSS_EXPONENT_NLOS
    return fspl_1m + 10.0 * exponent * math.log10(distance / REFERENCE_DISTANCE_M)


def mean_link_power(distance: float, los: bool) -> float:
    """Total mean MPC power (linear) for a link of the given length."""
    return 10.0 ** (-path_loss_db(distance, los) / 10.0)


def generate_mpcs(link_kind: LinkKind, distance: float, los: bool,
                  mpc_count: int, seed: int) -> list[MultipathComponent]:
    """Draw one realization of a link's multipath components.

    The ensemble mean of the total power sum(magnitude^2) equals
    mean_link_power(distance, los).  LoS links place K/(K+1) of the power
    in a deterministic zero-phase dominant component (all of it when
    mpc_count == 1); the remainder is Rayleigh-scattered with uniform
    phases.  NLoS links are fully scattered.  Deterministic per seed.
    """
    if distance <= 0:
        raise ValueError(f"distance must be > 0, got {distance}")
    if mpc_count < 1:
        raise ValueError(f"mpc_count must be >= 1, got {mpc_count}")
    del link_kind  # labelling only; the statistics depend on distance and los
    total = mean_link_power(distance, los)
    rng = np.random.default_rng(seed)
    comps = []
    if los:
        k_lin = 10.0 ** (RICIAN_K_DB / 10.0)
        dominant = total if mpc_count == 1 else total * k_lin / (k_lin + 1.0)
        comps.append(MultipathComponent(math.sqrt(dominant), 0.0))
        n_scatter = mpc_count - 1
        scatter_power = total / (k_lin + 1.0)
    else:
        n_scatter = mpc_count
        scatter_power = total
    if n_scatter:
        per = scatter_power / n_scatter
        mags = rng.rayleigh(scale=math.sqrt(per / 2.0), size=n_scatter)
        phases = rng.uniform(0.0, TWO_PI, size=n_scatter)
        comps += [MultipathComponent(float(m), float(p)) for m, p in zip(mags, phases)]
    return comps


def combine_mpcs(mpcs: list[MultipathComponent]) -> complex:
    """Coherent sum of the components: sum |h| e^{j phi}."""
    if not mpcs:
        raise ValueError("cannot combine an empty MPC list")
    return complex(sum(c.magnitude * np.exp(1j * c.phase) for c in mpcs))


def _realization_seeds(seed: int, count: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(count, np.uint64)


def average_realizations(link_kind: LinkKind, distance: float, los: bool,
                         mpc_count: int, realization_count: int = DEFAULT_REALIZATIONS,
                         seed: int = 0, average: str = "complex") -> complex:
    """Mean link gain over independent channel realizations.

    average="complex" takes the arithmetic mean of the complex gains;
    average="magnitude" keeps the mean of the magnitudes and attaches the
    phase of the complex mean.
    """
    if realization_count < 1:
        raise ValueError(f"realization_count must be >= 1, got {realization_count}")
    if average not in ("complex", "magnitude"):
        raise ValueError(f"unknown averaging mode {average!r}")
    gains = np.empty(realization_count, dtype=complex)
    for i, s in enumerate(_realization_seeds(seed, realization_count)):
        gains[i] = combine_mpcs(generate_mpcs(link_kind, distance, los, mpc_count, int(s)))
    mean = complex(gains.mean())
    if average == "magnitude":
        modulus = float(np.abs(gains).mean())
        phase = np.angle(mean) if mean != 0 else 0.0
        return complex(modulus * np.exp(1j * phase))
    return mean


def steering_vector(element_count: int, separation: float, wavelength: float,
                    direction_cosine: float) -> SteeringVector:
    """Plane-wave steering vector: entry m is e^{-j (2 pi / lambda) (m-1) d phi}."""
    if element_count < 1:
        raise ValueError(f"element_count must be >= 1, got {element_count}")
    if wavelength <= 0:
        raise ValueError(f"wavelength must be > 0, got {wavelength}")
    m = np.arange(element_count)
    entries = np.exp(-1j * TWO_PI / wavelength * m * separation * direction_cosine)
    entries[0] = 1.0 + 0.0j
    return SteeringVector(entries=entries, direction_cosine=direction_cosine)


def apply_steering(averaged_gain: complex, steering: SteeringVector) -> np.ndarray:
    """Per-element link gains: the averaged scalar times the steering entries."""
    return averaged_gain * steering.entries


def overall_gain(h_direct: complex, ris_to_bs, theta, ue_to_ris) -> float:
    """Overall channel power gain |h_iA + h_RA^H Theta h_iR|^2.

    theta may be a phase array or any object with a .phases attribute.
    """
    h_rb = np.asarray(ris_to_bs, dtype=complex)
    h_ur = np.asarray(ue_to_ris, dtype=complex)
    phases = np.asarray(getattr(theta, "phases", theta), dtype=float)
    if not (h_rb.shape == h_ur.shape == phases.shape):
        raise ValueError(
            f"element count mismatch: ris_to_bs {h_rb.shape}, theta {phases.shape}, ue_to_ris {h_ur.shape}")
    cascaded = np.sum(np.conj(h_rb) * np.exp(1j * phases) * h_ur)
    return float(np.abs(h_direct + cascaded) ** 2)


def array_direction_cosine(ris_reference_position, counterpart_position) -> float:
    """Cosine between the RIS array axis (+x) and the direction to a node."""
    ris = np.asarray(ris_reference_position, float)
    other = np.asarray(counterpart_position, float)
    delta = other - ris
    dist = np.linalg.norm(delta)
    if dist <= 0:
        raise ValueError("counterpart coincides with the RIS reference point")
    return float(delta[0] / dist)


@dataclass(frozen=True)
class UeLinkSet:
    """The three links that define one UE's propagation environment."""

    direct: LinkChannel
    ue_to_ris: LinkChannel
    ris_to_bs: LinkChannel


def build_ue_links(geometry: NodeGeometry, ue_index: int, seed_direct: int,
                   seed_ue_ris: int, seed_ris_bs: int,
                   realization_count: int = DEFAULT_REALIZATIONS,
                   average: str = "complex") -> UeLinkSet:
    """Run the five-step flow up to the steering stage for one UE."""
    ue = np.asarray(geometry.ue_positions[ue_index], float)
    bs = np.asarray(geometry.bs_position, float)
    ris = np.asarray(geometry.ris_reference_position, float)
    d_ue_bs = float(np.linalg.norm(ue - bs))
    d_ue_ris = float(np.linalg.norm(ue - ris))
    d_ris_bs = float(np.linalg.norm(ris - bs))

    h_direct = average_realizations(LinkKind.UE_TO_BS, d_ue_bs, False, NLOS_MPC_COUNT,
                                    realization_count, seed_direct, average)
    g_ue_ris = average_realizations(LinkKind.UE_TO_RIS, d_ue_ris, True, LOS_MPC_COUNT,
                                    realization_count, seed_ue_ris, average)
    g_ris_bs = average_realizations(LinkKind.RIS_TO_BS, d_ris_bs, True, LOS_MPC_COUNT,
                                    realization_count, seed_ris_bs, average)

    m = geometry.ris_element_count
    lam = geometry.wavelength
    sep = geometry.element_separation
    sv_ue = steering_vector(m, sep, lam, array_direction_cosine(ris, ue))
    sv_bs = steering_vector(m, sep, lam, array_direction_cosine(ris, bs))

    return UeLinkSet(
        direct=LinkChannel(LinkKind.UE_TO_BS, los=False, scalar_gain=h_direct),
        ue_to_ris=LinkChannel(LinkKind.UE_TO_RIS, los=True,
                              element_gains=apply_steering(g_ue_ris, sv_ue)),
        ris_to_bs=LinkChannel(LinkKind.RIS_TO_BS, los=True,
                              element_gains=apply_steering(g_ris_bs, sv_bs)),
    )


def export_channels_csv(links: list[LinkChannel], path) -> None:
    """Dump link gains as CSV rows: link_kind, element_index, real, imag."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["link_kind", "element_index", "real", "imag"])
        for link in links:
            if link.scalar_gain is not None:
                writer.writerow([str(link.kind), 0,
                                 repr(link.scalar_gain.real), repr(link.scalar_gain.imag)])
            else:
                for idx, g in enumerate(link.element_gains):
                    writer.writerow([str(link.kind), idx, repr(float(g.real)), repr(float(g.imag))])

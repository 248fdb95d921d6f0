"""RIS element phase-shift selection.

Single-UE alignment has a closed form: rotate every cascaded term onto the
direct path's phase so the magnitudes add.  The multi-UE configuration is a
weighted combination of the per-UE alignment vectors; the weights live on
the probability simplex and are found by exhaustive grid search for up to
three UEs and projected-gradient ascent beyond that.  A final per-element
coordinate-ascent pass polishes the combined phases against the true
aggregate-gain objective.  A quantized exhaustive search is provided as an
independent verification oracle.
"""

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import NodeGeometry, overall_gain

TWO_PI = 2.0 * math.pi

_GRID_MAX_UES = 3          # exhaustive simplex grid up to this many UEs
_BRUTE_FORCE_LIMIT = 10_000_000


def _wrap_phase(theta):
    """Reduce phases into [0, 2pi); 2pi is admitted as equal to 0."""
    return np.mod(np.asarray(theta, dtype=float), TWO_PI)


@dataclass(frozen=True)
class RisConfiguration:
    """Per-element phase shifts; the reflection matrix diag(e^{j theta}) is implied."""

    phases: np.ndarray

    def __post_init__(self):
        phases = _wrap_phase(self.phases)
        object.__setattr__(self, "phases", phases)

    @property
    def element_count(self) -> int:
        return len(self.phases)


@dataclass(frozen=True)
class ReflectionCoefficientVector:
    """Complex per-element reflection coefficients.

    Per-UE vectors are unit-modulus; weighted combinations may have entries
    anywhere in the closed unit disk.  degenerate marks the no-op vector
    returned when every cascaded element channel is zero.
    """

    entries: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class WeightVector:
    """Per-UE combination weights on the probability simplex."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if np.any(w < -1e-12) or np.any(w > 1 + 1e-12):
            raise ValueError(f"weights must lie in [0, 1], got {w}")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1 within 1e-9, got sum {w.sum()!r}")


@dataclass(frozen=True)
class UeChannelSet:
    """One UE's channels: scalar direct gain plus per-element RIS links."""

    direct: complex
    ue_to_ris: np.ndarray
    ris_to_bs: np.ndarray

    def __post_init__(self):
        ur = np.asarray(self.ue_to_ris, dtype=complex)
        rb = np.asarray(self.ris_to_bs, dtype=complex)
        if ur.shape != rb.shape:
            raise ValueError(f"element count mismatch: ue_to_ris {ur.shape}, ris_to_bs {rb.shape}")
        object.__setattr__(self, "ue_to_ris", ur)
        object.__setattr__(self, "ris_to_bs", rb)

    @property
    def element_count(self) -> int:
        return len(self.ue_to_ris)


@dataclass(frozen=True)
class WeightSearchSettings:
    grid_step: float = 0.01
    restarts: int = 16           # random starts for the gradient path
    max_iterations: int = 150
    polish_sweeps: int = 200
    seed: int = 0


def single_ue_phases(direct_phase: float, element_phases, geometry: NodeGeometry,
                     ris_to_bs_cosine: float) -> RisConfiguration:
    """Closed-form single-UE phase shifts for steering-structured channels.

    element_phases are the per-element phases of the UE-to-RIS link; the
    RIS-to-BS link is assumed to carry its steering ramp at the given
    direction cosine with a zero reference phase.  The signs are fixed so
    that every cascaded term lands exactly on the direct path's phase.
    """
    omega = np.asarray(element_phases, dtype=float)
    if len(omega) != geometry.ris_element_count:
        raise ValueError(
            f"expected {geometry.ris_element_count} element phases, got {len(omega)}")
    m = np.arange(len(omega))
    ramp = TWO_PI / geometry.wavelength * geometry.element_separation * m * ris_to_bs_cosine
    return RisConfiguration(phases=direct_phase - omega - ramp)


def per_ue_reflection(h_direct: complex, ue_to_ris, ris_to_bs) -> ReflectionCoefficientVector:
    """Unit-modulus reflection vector that maximizes one UE's power gain.

    Aligns each cascaded term conj(h_RA[m]) e^{j theta_m} h_iR[m] with the
    direct path, so the achieved gain is (|h_iA| + sum |h_RA[m]||h_iR[m]|)^2.
    The angle of a zero entry is taken as 0.
    """
    ur = np.asarray(ue_to_ris, dtype=complex)
    rb = np.asarray(ris_to_bs, dtype=complex)
    if ur.shape != rb.shape:
        raise ValueError(f"element count mismatch: ue_to_ris {ur.shape}, ris_to_bs {rb.shape}")
    if np.all(np.abs(ur) * np.abs(rb) == 0):
        return ReflectionCoefficientVector(entries=np.ones(len(ur), dtype=complex), degenerate=True)
    theta = np.angle(h_direct) + np.angle(rb) - np.angle(ur)
    return ReflectionCoefficientVector(entries=np.exp(1j * theta))


def combine_reflections(per_ue: list[ReflectionCoefficientVector],
                        weights: WeightVector) -> ReflectionCoefficientVector:
    """Weighted combination v = sum_i w_i v_i of per-UE reflection vectors."""
    if len(per_ue) != len(weights.weights):
        raise ValueError(f"{len(per_ue)} reflection vectors but {len(weights.weights)} weights")
    lengths = {len(v.entries) for v in per_ue}
    if len(lengths) != 1:
        raise ValueError(f"reflection vectors disagree on element count: {sorted(lengths)}")
    combined = np.zeros(lengths.pop(), dtype=complex)
    for w, v in zip(weights.weights, per_ue):
        combined = combined + w * np.asarray(v.entries, dtype=complex)
    return ReflectionCoefficientVector(entries=combined)


def phases_from_reflection(vector: ReflectionCoefficientVector) -> RisConfiguration:
    """Element phases angle(v); zero entries map to phase 0."""
    entries = np.asarray(vector.entries, dtype=complex)
    phases = np.where(entries == 0, 0.0, np.angle(entries))
    return RisConfiguration(phases=phases)


def aggregate_gain(theta, channel_sets: list[UeChannelSet]) -> float:
    """Sum of per-UE overall power gains under a common phase configuration."""
    return sum(overall_gain(cs.direct, cs.ris_to_bs, theta, cs.ue_to_ris) for cs in channel_sets)


def _simplex_grid(n_ues: int, step: float):
    """All weight vectors with coordinates on a step grid summing to 1."""
    levels = int(round(1.0 / step))
    for combo in itertools.combinations_with_replacement(range(n_ues), levels):
        counts = [0] * n_ues
        for c in combo:
            counts[c] += 1
        yield np.array(counts, dtype=float) / levels


def _project_to_simplex(w: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(w) + 1) > (css - 1.0))[0][-1]
    tau = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(w - tau, 0.0)


def _coordinate_polish(theta0: np.ndarray, channel_sets: list[UeChannelSet],
                       sweeps: int) -> np.ndarray:
    """Per-element coordinate ascent on the aggregate gain.

    Holding the other elements fixed, the best phase for element m has the
    closed form -angle(sum_i conj(c_i) a_{i,m}) where a_{i,m} is UE i's
    cascaded coefficient and c_i its current total channel.  Each step is
    monotone, so the pass never degrades the starting configuration.
    """
    theta = np.array(theta0, dtype=float)
    coeff = np.array([np.conj(cs.ris_to_bs) * cs.ue_to_ris for cs in channel_sets])  # (I, M)
    totals = np.array([cs.direct for cs in channel_sets]) + coeff @ np.exp(1j * theta)
    for _ in range(sweeps):
        moved = 0.0
        for m in range(len(theta)):
            a_m = coeff[:, m]
            unit_old = np.exp(1j * theta[m])
            residuals = totals - a_m * unit_old
            score = np.conj(residuals) @ a_m
            if score == 0:
                continue
            new = -np.angle(score) % TWO_PI
            unit_new = np.exp(1j * new)
            delta = abs(unit_new - unit_old)
            if delta > moved:
                moved = delta
            theta[m] = new
            totals = residuals + a_m * unit_new
        if moved < 1e-13:
            break
    return theta


def optimize_weights(channel_sets: list[UeChannelSet],
                     search: WeightSearchSettings | None = None):
    """Choose combination weights and RIS phases maximizing the aggregate gain.

    Returns (WeightVector, RisConfiguration, aggregate_gain).  The weights
    identify the best weighted combination of the per-UE alignment vectors;
    the returned phases additionally carry the coordinate polish, so their
    gain is at least the best weighted candidate's and at least the gain of
    every pure single-UE alignment.
    """
    if not channel_sets:
        raise ValueError("optimize_weights requires at least one UE")
    search = search or WeightSearchSettings()
    vectors = [per_ue_reflection(cs.direct, cs.ue_to_ris, cs.ris_to_bs) for cs in channel_sets]
    n = len(channel_sets)

    def family(w: np.ndarray):
        wv = WeightVector(weights=w)
        theta = phases_from_reflection(combine_reflections(vectors, wv))
        return wv, theta, aggregate_gain(theta, channel_sets)

    # deterministic tie-break: higher gain first, then lexicographically
    # smaller weights
    def better(gain, w, best_gain, best_w):
        if gain != best_gain:
            return gain > best_gain
        return best_w is None or tuple(w) < tuple(best_w)

    best_w = None
    best_gain = -1.0
    if n <= _GRID_MAX_UES:
        candidates = _simplex_grid(n, search.grid_step)
    else:
        rng = np.random.default_rng(search.seed)
        starts = [np.full(n, 1.0 / n)] + [np.eye(n)[i] for i in range(n)]
        starts += [_project_to_simplex(rng.dirichlet(np.ones(n))) for _ in range(search.restarts)]
        candidates = (_gradient_ascent(w0, family, search) for w0 in starts)
    for w in candidates:
        _, _, gain = family(w)
        if better(gain, w, best_gain, best_w):
            best_gain, best_w = gain, w

    weights, theta_family, family_gain = family(best_w)

    # polish the family optimum and every single-UE alignment, keep the best
    best_theta = theta_family.phases
    best_gain = family_gain
    seeds = [theta_family.phases] + [phases_from_reflection(v).phases for v in vectors]
    for theta0 in seeds:
        theta = _coordinate_polish(theta0, channel_sets, search.polish_sweeps)
        gain = aggregate_gain(theta, channel_sets)
        if gain > best_gain:
            best_gain, best_theta = gain, theta
    return weights, RisConfiguration(phases=best_theta), float(best_gain)


def _gradient_ascent(w0, family, search: WeightSearchSettings) -> np.ndarray:
    """Projected-gradient ascent of the family objective over the simplex."""
    w = _project_to_simplex(np.asarray(w0, dtype=float))
    value = family(w)[2]
    step = 0.1
    eps = 1e-5
    for _ in range(search.max_iterations):
        grad = np.zeros_like(w)
        for i in range(len(w)):
            bumped = w.copy()
            bumped[i] += eps
            grad[i] = (family(_project_to_simplex(bumped))[2] - value) / eps
        norm = np.linalg.norm(grad)
        if norm < 1e-12:
            break
        improved = False
        trial_step = step
        for _ in range(20):
            cand = _project_to_simplex(w + trial_step * grad / norm)
            cand_value = family(cand)[2]
            if cand_value > value + 1e-15:
                w, value, step = cand, cand_value, trial_step * 1.5
                improved = True
                break
            trial_step /= 2.0
        if not improved:
            break
    return w


def brute_force_phase_search(channel_sets: list[UeChannelSet], quantization_step: float):
    """Exhaustive search over quantized phase vectors; verification oracle.

    Enumerates every combination of phases from the grid
    {0, step, 2 step, ...} below 2 pi and returns the best configuration
    and its aggregate gain.  Refuses search spaces above 10^7 points.
    """
    if not channel_sets:
        raise ValueError("brute_force_phase_search requires at least one UE")
    if quantization_step <= 0:
        raise ValueError("quantization_step must be > 0")
    m = channel_sets[0].element_count
    levels = int(round(TWO_PI / quantization_step))
    if levels < 1:
        raise ValueError("quantization_step exceeds 2 pi")
    if levels ** m > _BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"search space {levels}^{m} exceeds the {_BRUTE_FORCE_LIMIT} point guard")
    grid = np.arange(levels) * quantization_step
    coeff = [np.conj(cs.ris_to_bs) * cs.ue_to_ris for cs in channel_sets]
    directs = [cs.direct for cs in channel_sets]

    best_gain = -1.0
    best = None
    chunk = 1 << 14
    combos = itertools.product(grid, repeat=m)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)))
        if block.size == 0:
            break
        unit = np.exp(1j * block)                      # (chunk, m)
        gains = np.zeros(len(block))
        for h_d, a in zip(directs, coeff):
            gains += np.abs(h_d + unit @ a) ** 2
        idx = int(np.argmax(gains))
        if gains[idx] > best_gain:
            best_gain = float(gains[idx])
            best = block[idx]
    return RisConfiguration(phases=best), best_gain


def export_optimizer_csv(rows: list[dict], path) -> None:
    """Optimizer summaries: ue_count, ris_elements, weights, aggregate_gain_db."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ue_count", "ris_elements", "weights", "aggregate_gain_db"])
        for row in rows:
            weights = ";".join(f"{w:.6g}" for w in row["weights"])
            writer.writerow([row["ue_count"], row["ris_elements"], weights,
                             f"{row['aggregate_gain_db']:.6g}"])

"""Shot sampling, efficiency estimation, randomized-phase mitigation, and the
obstructed-versus-unobstructed baseline comparison.

The mitigation pipeline prepares M copies of a circuit that differ only by
uniformly random phases appended to every mode just before detection.  Those
phases leave the ideal distribution untouched, so averaging the per-copy
probability estimates (each copy carrying its own hardware-noise realization)
suppresses coherent compilation error while the spread across copies yields
the standard error of the mean.

Dark counts are not modeled; ``DARK_COUNT_RATE`` exists as an explicit no-op
hook in the noise configuration.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mesh import decompose, perturb_mesh, reconstruct
from .optics import CircuitSpec, PhaseShifter, clamp_probabilities, compose, single_photon_distribution
from .schemes import (
    SchemeDescriptor,
    classify,
    detector_classes,
    scheme_circuit,
)
from .seeds import child_seed

# No-op hook: detector dark counts are left unmodeled on purpose.
DARK_COUNT_RATE = 0.0

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ShotRecord:
    """Counts per detector from one batch of single-photon trials."""

    counts: tuple
    shots: int
    seed: object = None

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        shots = int(self.shots)
        if any(c < 0 for c in counts):
            raise ValueError(f"counts must be nonnegative, got {counts}")
        if sum(counts) != shots:
            raise ValueError(f"counts sum to {sum(counts)}, expected {shots}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "shots", shots)

    def probabilities(self) -> np.ndarray:
        if self.shots == 0:
            raise ValueError("no shots recorded")
        return np.asarray(self.counts, dtype=np.float64) / self.shots


@dataclass(frozen=True)
class EfficiencyEstimate:
    """Point estimate of the efficiency with provenance.

    ``flagged`` marks the sentinel returned when no conditioned events
    (IFM or absorption) were observed, in which case eta_hat and std_error
    are zero and carry no information.  ``shots_per_circuit`` of 0 means the
    estimate was computed from exact probabilities.
    """

    eta_hat: float
    std_error: float
    m_circuits: int
    shots_per_circuit: int
    flagged: bool = False

    def __post_init__(self):
        eta = float(self.eta_hat)
        se = float(self.std_error)
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"eta_hat {eta!r} outside [0, 1]")
        if not math.isfinite(se) or se < 0.0:
            raise ValueError(f"std_error {se!r} must be finite and nonnegative")
        object.__setattr__(self, "eta_hat", eta)
        object.__setattr__(self, "std_error", se)
        object.__setattr__(self, "m_circuits", int(self.m_circuits))
        object.__setattr__(self, "shots_per_circuit", int(self.shots_per_circuit))


def sample_counts(dist, shots: int, seed) -> ShotRecord:
    """Multinomial detector counts for a probability vector.

    Deterministic given the seed; the expectation of counts/shots is the
    distribution itself.
    """
    shots = int(shots)
    if shots < 0:
        raise ValueError(f"shots must be nonnegative, got {shots}")
    p = clamp_probabilities(dist)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, p / p.sum()) if shots else np.zeros(len(p), dtype=int)
    return ShotRecord(tuple(int(c) for c in counts), shots, seed)


def estimate_eta(record: ShotRecord, scheme: SchemeDescriptor) -> EfficiencyEstimate:
    """Efficiency estimate c_ifm / (c_ifm + c_abs) with binomial standard error.

    The estimate conditions on the object having been measured at all (an IFM
    or absorption event); zero conditioned counts yield a flagged sentinel
    rather than a division by zero.
    """
    if len(record.counts) != scheme.modes:
        raise ValueError(
            f"record has {len(record.counts)} detectors, scheme has {scheme.modes}"
        )
    _null, _partial, ifm_idx, abs_idx = detector_classes(scheme)
    c_ifm = sum(record.counts[i] for i in ifm_idx)
    c_abs = sum(record.counts[i] for i in abs_idx)
    conditioned = c_ifm + c_abs
    if conditioned == 0:
        return EfficiencyEstimate(0.0, 0.0, 1, record.shots, flagged=True)
    p = c_ifm / conditioned
    se = math.sqrt(p * (1.0 - p) / conditioned)
    return EfficiencyEstimate(p, se, 1, record.shots)


def randomized_phase_ensemble(circuit: CircuitSpec, m_copies: int, seed) -> list:
    """M copies of a circuit with independent uniform final phases per mode.

    Each copy appends a phase drawn uniformly from [0, 2 pi) on every mode as
    its final elements, which leaves the noiseless output distribution
    unchanged.  Copies get independent derived seeds, so the ensemble is the
    same regardless of evaluation order.
    """
    m_copies = int(m_copies)
    if m_copies < 1:
        raise ValueError(f"need at least one circuit, got {m_copies}")
    out = []
    for idx in range(m_copies):
        rng = np.random.default_rng(child_seed(seed, idx))
        phases = rng.uniform(0.0, TWO_PI, circuit.modes)
        tail = tuple(PhaseShifter(i, p) for i, p in enumerate(phases))
        out.append(circuit.extended(tail))
    return out


def mitigate(per_circuit: Sequence, shots_per_circuit: int = 0) -> EfficiencyEstimate:
    """Combine per-circuit (p_ifm, p_abs) estimates into one efficiency.

    Each probability is averaged over the M circuits and the spread across
    circuits gives the standard deviation of the mean, sigma / sqrt(M).  The
    efficiency is computed from the averaged probabilities and its standard
    error by first-order propagation for eta = a / (a + b):

        sigma_eta^2 = (b^2 sigma_a^2 + a^2 sigma_b^2) / (a + b)^4

    treating sigma_a and sigma_b as independent (they are mildly
    anticorrelated through the shared counts; the independent form is used as
    an approximation).  ``p_abs`` entries may be scalars or per-object
    sequences, which are summed.
    """
    pairs = list(per_circuit)
    m = len(pairs)
    if m < 2:
        raise ValueError(f"need at least 2 circuits for a variance estimate, got {m}")
    a_vals = np.empty(m)
    b_vals = np.empty(m)
    for i, (p_ifm, p_abs) in enumerate(pairs):
        a_vals[i] = float(p_ifm)
        b_vals[i] = float(np.sum(p_abs))
    a, b = float(a_vals.mean()), float(b_vals.mean())
    sigma_a = float(a_vals.std(ddof=1)) / math.sqrt(m)
    sigma_b = float(b_vals.std(ddof=1)) / math.sqrt(m)
    if a + b == 0.0:
        return EfficiencyEstimate(0.0, 0.0, m, shots_per_circuit, flagged=True)
    eta = a / (a + b)
    var = (b * b * sigma_a * sigma_a + a * a * sigma_b * sigma_b) / (a + b) ** 4
    return EfficiencyEstimate(eta, math.sqrt(var), m, shots_per_circuit)


def _noisy_distribution(circuit: CircuitSpec, input_mode: int, mesh_sigma: float, noise_seed):
    """Distribution of a circuit compiled to a mesh and perturbed in phase space."""
    program = decompose(compose(circuit))
    program = perturb_mesh(program, mesh_sigma, noise_seed)
    return single_photon_distribution(reconstruct(program), input_mode)


def run_mitigated(
    scheme: SchemeDescriptor,
    shots: int,
    m_circuits: int,
    mesh_sigma: float,
    seed,
) -> EfficiencyEstimate:
    """Full mitigation pipeline for one scheme configuration.

    Builds the scheme circuit, prepares the randomized-phase ensemble,
    compiles each copy to a mesh, perturbs the mesh phases independently per
    copy, estimates per-copy probabilities (from ``shots`` multinomial trials,
    or exactly when shots is 0), and mitigates.  With m_circuits = 1 the
    single estimate is returned directly.
    """
    circuit = scheme_circuit(scheme)
    input_mode = scheme.input_mode
    copies = randomized_phase_ensemble(circuit, m_circuits, child_seed(seed, 0))
    per = []
    for idx, copy in enumerate(copies):
        dist = _noisy_distribution(copy, input_mode, mesh_sigma, child_seed(seed, 1, idx))
        if shots:
            record = sample_counts(dist, shots, child_seed(seed, 2, idx))
            dist = record.probabilities()
        out = classify(scheme, dist)
        per.append((out.p_ifm, out.p_abs))
    if m_circuits == 1:
        p_ifm, p_abs = per[0]
        denom = p_ifm + float(np.sum(p_abs))
        if denom == 0.0:
            return EfficiencyEstimate(0.0, 0.0, 1, shots, flagged=True)
        eta = p_ifm / denom
        n_cond = denom * shots
        se = math.sqrt(eta * (1.0 - eta) / n_cond) if n_cond else 0.0
        return EfficiencyEstimate(eta, se, 1, shots)
    return mitigate(per, shots_per_circuit=shots)


@dataclass(frozen=True)
class BaselineComparison:
    """Paired probabilities with objects present and absent under identical noise.

    ``p_abs`` entries are the average absorber-detector probability over all
    objects.  Ratios of present to absent separate real detection events from
    noise-induced leakage.
    """

    p_ifm_present: float
    p_abs_present: float
    p_ifm_absent: float
    p_abs_absent: float

    def ifm_ratio(self) -> float:
        if self.p_ifm_absent == 0.0:
            return math.inf
        return self.p_ifm_present / self.p_ifm_absent

    def abs_ratio(self) -> float:
        if self.p_abs_absent == 0.0:
            return math.inf
        return self.p_abs_present / self.p_abs_absent


def baseline_compare(
    scheme: SchemeDescriptor, mesh_sigma: float, shots: int, seed
) -> BaselineComparison:
    """Run a scheme with objects present and absent under the same mesh noise.

    The present and absent circuits compile to meshes with identical parameter
    counts, so one derived noise seed perturbs both the same way.  With
    ``shots`` > 0 probabilities are estimated from multinomial counts (shot
    streams differ per side); shots = 0 uses exact probabilities.
    """
    noise_seed = child_seed(seed, 0)
    sides = {}
    for tag, present in (("present", True), ("absent", False)):
        circuit = scheme_circuit(scheme, override_presence=present)
        dist = _noisy_distribution(circuit, scheme.input_mode, mesh_sigma, noise_seed)
        if shots:
            record = sample_counts(
                dist, shots, child_seed(seed, 1 if present else 2)
            )
            dist = record.probabilities()
        out = classify(scheme, dist)
        sides[tag] = (out.p_ifm, out.p_abs_total() / len(out.p_abs))
    return BaselineComparison(
        p_ifm_present=sides["present"][0],
        p_abs_present=sides["present"][1],
        p_ifm_absent=sides["absent"][0],
        p_abs_absent=sides["absent"][1],
    )

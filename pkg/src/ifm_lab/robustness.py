"""Monte Carlo robustness of chained-beamsplitter interferometers.

A chain of m-1 beamsplitters spreads the photon over m modes before the last
mode is probed by the object; the mirrored chain then refocuses it.  Every
physical coupler fluctuates on its own, so each trial draws 2(m-1)
independent reflectivities - one per beamsplitter in the spreading half and
one per beamsplitter in the refocusing half.  Mismatch between the halves
leaks amplitude out of the bright port into the dark detectors, which is the
error mechanism under study: near the efficiency ceiling the conditional
probabilities are tiny and the leakage dominates, so small-m interferometers
fluctuate wildly while larger meshes average the errors out.

Efficiencies are computed from exact probabilities (no shot noise); the only
randomness is in the reflectivities.
"""

from dataclasses import dataclass

import numpy as np

from .optics import BeamSplitter, CircuitSpec, Reflectivity, swap_permutation
from .seeds import child_rng

# Gaussian draws are clipped into (CLIP, 1 - CLIP) to keep circuits valid;
# at sigma = 0.03 the clipped mass is negligible.
CLIP = 1e-9

ETA_CEILING = 0.5
CANONICAL_FRACTIONS = (0.90, 0.95, 0.99)


@dataclass(frozen=True)
class RobustnessConfig:
    """One cell of the robustness study.

    ``eta_target_fraction`` is the fraction of the 1/2 efficiency ceiling to
    aim for; the study grid uses 0.90, 0.95, and 0.99.  ``sigma_r`` is the
    standard deviation of the Gaussian noise on each reflectivity.
    """

    m: int
    eta_target_fraction: float
    sigma_r: float
    trials: int
    seed: object

    def __post_init__(self):
        m = int(self.m)
        if not 2 <= m <= 6:
            raise ValueError(f"modes must lie in 2..6, got {m}")
        frac = float(self.eta_target_fraction)
        if not 0.0 < frac < 1.0:
            raise ValueError(f"target fraction must lie in (0, 1), got {frac!r}")
        sigma = float(self.sigma_r)
        if sigma < 0.0:
            raise ValueError(f"sigma_r must be nonnegative, got {sigma!r}")
        trials = int(self.trials)
        if trials < 1:
            raise ValueError(f"trials must be >= 1, got {trials}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "eta_target_fraction", frac)
        object.__setattr__(self, "sigma_r", sigma)
        object.__setattr__(self, "trials", trials)

    @property
    def eta_target(self) -> float:
        return ETA_CEILING * self.eta_target_fraction


def build_chain(
    m: int, reflectivities, object_present: bool, inverse_reflectivities=None
) -> CircuitSpec:
    """Beamsplitter chain, optional diversion of the last mode, mirrored chain.

    The circuit lives on m+1 modes; mode m is the absorber emulating the
    object.  For m = 2 this is exactly the two-beamsplitter interferometer.
    ``inverse_reflectivities`` detunes the refocusing half; by default it
    reuses the spreading half's values, which makes the mirrored chain the
    exact inverse.
    """
    m = int(m)
    if m < 2:
        raise ValueError(f"need at least 2 modes, got {m}")
    rs = tuple(Reflectivity(float(r)) for r in reflectivities)
    if len(rs) != m - 1:
        raise ValueError(f"need {m - 1} reflectivities for {m} modes, got {len(rs)}")
    if inverse_reflectivities is None:
        rps = rs
    else:
        rps = tuple(Reflectivity(float(r)) for r in inverse_reflectivities)
        if len(rps) != m - 1:
            raise ValueError(
                f"need {m - 1} inverse reflectivities, got {len(rps)}"
            )
    elements = [BeamSplitter((i, i + 1), r) for i, r in enumerate(rs)]
    if object_present:
        elements.append(swap_permutation(m + 1, m - 1, m))
    elements.extend(
        BeamSplitter((i, i + 1), rps[i]) for i in reversed(range(m - 1))
    )
    return CircuitSpec(m + 1, tuple(elements))


def chain_eta_from_circuit(m: int, reflectivities, inverse_reflectivities=None) -> float:
    """Chain efficiency via full circuit simulation (cross-check path)."""
    from .optics import compose, single_photon_distribution

    circuit = build_chain(
        m, reflectivities, object_present=True,
        inverse_reflectivities=inverse_reflectivities,
    )
    dist = single_photon_distribution(compose(circuit), 0)
    p_abs = float(dist[m])
    p_ifm = float(np.sum(dist[1:m]))
    return p_ifm / (p_ifm + p_abs)


def target_reflectivity(m: int, eta_target: float) -> Reflectivity:
    """Equal per-coupler reflectivity hitting a requested efficiency.

    Inverts eta = (1 - T_eff) / (2 - T_eff) to T_eff = (1 - 2 eta) / (1 - eta)
    and spreads it evenly: T = T_eff^(1 / (m-1)), R = 1 - T.
    """
    m = int(m)
    if m < 2:
        raise ValueError(f"need at least 2 modes, got {m}")
    eta = float(eta_target)
    if not 0.0 < eta < ETA_CEILING:
        raise ValueError(f"eta_target must lie in (0, 0.5), got {eta!r}")
    t_eff = (1.0 - 2.0 * eta) / (1.0 - eta)
    t = t_eff ** (1.0 / (m - 1))
    return Reflectivity(1.0 - t)


def _chain_eta_vectorized(r_fwd: np.ndarray, r_inv: np.ndarray) -> np.ndarray:
    """Exact chain efficiency for stacked reflectivity draws.

    ``r_fwd`` and ``r_inv`` have shape (trials, m-1).  Amplitudes after the
    spreading chain have the closed form a_i = sqrt(R_{i+1}) prod_{l<=i}
    sqrt(T_l); the last mode's amplitude is diverted to the absorber and the
    rest is pushed through the detuned refocusing chain pair by pair.  All
    amplitudes are real in this convention.
    """
    trials, width = r_fwd.shape
    m = width + 1
    sq_t = np.sqrt(1.0 - r_fwd)
    cum = np.cumprod(sq_t, axis=1)
    amp = np.empty((trials, m))
    amp[:, 0] = np.sqrt(r_fwd[:, 0])
    for i in range(1, m - 1):
        amp[:, i] = np.sqrt(r_fwd[:, i]) * cum[:, i - 1]
    p_abs = cum[:, m - 2] ** 2
    amp[:, m - 1] = 0.0
    for i in range(m - 2, -1, -1):
        upper = amp[:, i].copy()
        lower = amp[:, i + 1].copy()
        sq_r = np.sqrt(r_inv[:, i])
        sq_tp = np.sqrt(1.0 - r_inv[:, i])
        amp[:, i] = sq_r * upper + sq_tp * lower
        amp[:, i + 1] = sq_tp * upper - sq_r * lower
    p_ifm = np.sum(amp[:, 1:] ** 2, axis=1)
    return p_ifm / (p_ifm + p_abs)


def robustness_histogram(config: RobustnessConfig) -> np.ndarray:
    """Efficiency samples under Gaussian reflectivity noise.

    Per trial, all 2(m-1) coupler reflectivities are drawn independently
    around the common target, clipped into (0, 1), and the exact efficiency
    of the resulting detuned chain is evaluated.  Half-mismatch can push raw
    efficiencies past the 1/2 ceiling (bright-port leakage masquerades as
    dark-port clicks), so samples are clamped into [0, 0.5]; deterministic
    given the config seed.
    """
    r_target = target_reflectivity(config.m, config.eta_target).value
    rng = child_rng(config.seed)
    draws = rng.normal(
        r_target, config.sigma_r, size=(config.trials, 2 * (config.m - 1))
    )
    np.clip(draws, CLIP, 1.0 - CLIP, out=draws)
    eta = _chain_eta_vectorized(draws[:, : config.m - 1], draws[:, config.m - 1 :])
    return np.clip(eta, 0.0, ETA_CEILING)


def summarize_std(samples) -> float:
    """Sample standard deviation (n-1 denominator) of an efficiency sample set."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < 2:
        raise ValueError(f"need at least 2 samples, got {samples.size}")
    return float(samples.std(ddof=1))

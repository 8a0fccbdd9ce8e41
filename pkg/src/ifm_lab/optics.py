"""Exact single-photon linear optics: element unitaries, circuits, distributions.

A circuit is an ordered list of beamsplitter, phase-shifter, and permutation
elements acting on m optical modes.  Elements listed left to right are applied
first to last, so the total transfer matrix is U_total = U_last @ ... @ U_first.
All probabilities are computed from amplitudes, never from sampled counts.

Everything here is pure and operates on immutable values.  Matrices are dense
complex128 numpy arrays; the supported circuit width is 1..32 modes.
"""

import json
import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

# Contracts, not suggestions: every composed unitary and every distribution
# must satisfy these.
UNITARITY_TOL = 1e-10
PROB_SUM_TOL = 1e-12
PROB_CLAMP_FLOOR = -1e-15
MAX_MODES = 32


def unitarity_residual(mat) -> float:
    """Max-norm of (U^dagger U - I); zero for an exact unitary."""
    mat = np.asarray(mat, dtype=np.complex128)
    eye = np.eye(mat.shape[0])
    return float(np.max(np.abs(mat.conj().T @ mat - eye)))


def clamp_probabilities(p, check_sum: bool = True) -> np.ndarray:
    """Clamp rounding noise in a probability vector.

    Entries in [-1e-15, 0) are treated as rounding noise and clamped to zero;
    anything more negative is a genuine bug and raises.  With ``check_sum``
    the vector must sum to 1 within 1e-12.
    """
    p = np.asarray(p, dtype=np.float64)
    lowest = float(p.min()) if p.size else 0.0
    if lowest < PROB_CLAMP_FLOOR:
        raise ValueError(f"probability entry {lowest!r} below clamp floor")
    p = np.where(p < 0.0, 0.0, p)
    if check_sum and abs(float(p.sum()) - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"probabilities sum to {float(p.sum())!r}, expected 1")
    return p


@dataclass(frozen=True)
class Reflectivity:
    """Beamsplitter reflectivity R in [0, 1]; transmission is T = 1 - R."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v) or not 0.0 <= v <= 1.0:
            raise ValueError(f"reflectivity must lie in [0, 1], got {self.value!r}")
        object.__setattr__(self, "value", v)

    @property
    def transmission(self) -> float:
        return 1.0 - self.value


def _as_reflectivity(r) -> Reflectivity:
    return r if isinstance(r, Reflectivity) else Reflectivity(float(r))


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    """Dense m x m complex transfer matrix on mode creation operators."""

    mat: np.ndarray

    def __post_init__(self):
        mat = np.array(self.mat, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        residual = unitarity_residual(mat)
        if residual >= UNITARITY_TOL:
            raise ValueError(f"matrix is not unitary (residual {residual:.3e})")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def dagger(self) -> "UnitaryMatrix":
        return UnitaryMatrix(self.mat.conj().T)


@dataclass(frozen=True, eq=False)
class PhotonState:
    """Single-photon amplitude vector over the input-mode basis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=np.complex128)
        if amp.ndim != 1 or amp.size < 1:
            raise ValueError("amplitudes must be a nonempty vector")
        norm2 = float(np.sum(np.abs(amp) ** 2))
        if abs(norm2 - 1.0) > 1e-12:
            raise ValueError(f"squared norm is {norm2!r}, expected 1 within 1e-12")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def basis(cls, modes: int, mode: int) -> "PhotonState":
        amp = np.zeros(modes, dtype=np.complex128)
        amp[mode] = 1.0
        return cls(amp)

    def apply(self, u: UnitaryMatrix) -> "PhotonState":
        return PhotonState(u.mat @ self.amplitudes)

    def distribution(self) -> np.ndarray:
        return clamp_probabilities(np.abs(self.amplitudes) ** 2)


@dataclass(frozen=True)
class BeamSplitter:
    """Two-mode beamsplitter of reflectivity r on a mode pair."""

    modes: Tuple[int, int]
    r: Reflectivity

    def __post_init__(self):
        a, b = (int(m) for m in self.modes)
        if a == b:
            raise ValueError("beamsplitter modes must be distinct")
        object.__setattr__(self, "modes", (a, b))
        object.__setattr__(self, "r", _as_reflectivity(self.r))


@dataclass(frozen=True)
class PhaseShifter:
    """Single-mode phase shift of phi radians."""

    mode: int
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "mode", int(self.mode))
        phi = float(self.phi)
        if not math.isfinite(phi):
            raise ValueError(f"phase must be finite, got {self.phi!r}")
        object.__setattr__(self, "phi", phi)


@dataclass(frozen=True)
class Permutation:
    """Mode relabeling; ``mapping[i]`` is the destination of mode i."""

    mapping: Tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(m) for m in self.mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise ValueError(f"mapping {mapping!r} is not a bijection")
        object.__setattr__(self, "mapping", mapping)


Element = Union[BeamSplitter, PhaseShifter, Permutation]


def swap_permutation(modes: int, a: int, b: int) -> Permutation:
    """Full-width permutation exchanging modes a and b."""
    mapping = list(range(modes))
    mapping[a], mapping[b] = mapping[b], mapping[a]
    return Permutation(tuple(mapping))


@dataclass(frozen=True)
class CircuitSpec:
    """Ordered list of optical elements on a fixed number of modes.

    Serializes to the JSON object
    ``{"modes": m, "elements": [{"kind": "bs", ...}, ...]}`` with element
    order significant; this format is the contract between all modules and
    the command-line harness.
    """

    modes: int
    elements: Tuple[Element, ...] = ()

    def __post_init__(self):
        modes = int(self.modes)
        if not 1 <= modes <= MAX_MODES:
            raise ValueError(f"modes must lie in 1..{MAX_MODES}, got {modes}")
        elements = tuple(self.elements)
        for el in elements:
            if isinstance(el, BeamSplitter):
                if not all(0 <= m < modes for m in el.modes):
                    raise ValueError(f"beamsplitter modes {el.modes} out of range")
            elif isinstance(el, PhaseShifter):
                if not 0 <= el.mode < modes:
                    raise ValueError(f"phase-shifter mode {el.mode} out of range")
            elif isinstance(el, Permutation):
                if len(el.mapping) != modes:
                    raise ValueError(
                        f"permutation acts on {len(el.mapping)} modes, circuit has {modes}"
                    )
            else:
                raise ValueError(f"unknown circuit element {el!r}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "elements", elements)

    def extended(self, more: Sequence[Element]) -> "CircuitSpec":
        return CircuitSpec(self.modes, self.elements + tuple(more))

    def to_dict(self) -> dict:
        out = []
        for el in self.elements:
            if isinstance(el, BeamSplitter):
                out.append({"kind": "bs", "modes": list(el.modes), "r": el.r.value})
            elif isinstance(el, PhaseShifter):
                out.append({"kind": "ps", "mode": el.mode, "phi": el.phi})
            else:
                out.append({"kind": "perm", "map": list(el.mapping)})
        return {"modes": self.modes, "elements": out}

    @classmethod
    def from_dict(cls, data: dict) -> "CircuitSpec":
        elements = []
        for entry in data["elements"]:
            kind = entry["kind"]
            if kind == "bs":
                a, b = entry["modes"]
                elements.append(BeamSplitter((a, b), Reflectivity(entry["r"])))
            elif kind == "ps":
                elements.append(PhaseShifter(entry["mode"], entry["phi"]))
            elif kind == "perm":
                elements.append(Permutation(tuple(entry["map"])))
            else:
                raise ValueError(f"unknown element kind {kind!r}")
        return cls(data["modes"], tuple(elements))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "CircuitSpec":
        return cls.from_dict(json.loads(text))


def bs_unitary(r) -> UnitaryMatrix:
    """Beamsplitter transfer matrix [[sqrt(R), sqrt(T)], [sqrt(T), -sqrt(R)]].

    Real and symmetric, hence self-inverse: applying the same beamsplitter
    twice is the identity.
    """
    r = _as_reflectivity(r)
    sr = math.sqrt(r.value)
    st = math.sqrt(r.transmission)
    return UnitaryMatrix(np.array([[sr, st], [st, -sr]], dtype=np.complex128))


def phase_unitary(phi: float) -> UnitaryMatrix:
    """1x1 transfer matrix e^{i phi}."""
    phi = float(phi)
    if not math.isfinite(phi):
        raise ValueError(f"phase must be finite, got {phi!r}")
    return UnitaryMatrix(np.array([[np.exp(1j * phi)]]))


def embed(small: UnitaryMatrix, target_modes: Sequence[int], m: int) -> UnitaryMatrix:
    """Insert a small unitary on the listed modes of an m-mode identity."""
    idx = [int(t) for t in target_modes]
    if len(set(idx)) != len(idx):
        raise ValueError(f"target modes {idx} contain duplicates")
    if any(not 0 <= t < m for t in idx):
        raise ValueError(f"target modes {idx} out of range for m={m}")
    if small.dim != len(idx):
        raise ValueError(f"matrix dim {small.dim} != number of target modes {len(idx)}")
    out = np.eye(m, dtype=np.complex128)
    out[np.ix_(idx, idx)] = small.mat
    return UnitaryMatrix(out)


def element_unitary(element: Element, m: int) -> UnitaryMatrix:
    """Full m-mode transfer matrix of a single circuit element."""
    if isinstance(element, BeamSplitter):
        return embed(bs_unitary(element.r), element.modes, m)
    if isinstance(element, PhaseShifter):
        return embed(phase_unitary(element.phi), [element.mode], m)
    if isinstance(element, Permutation):
        out = np.zeros((m, m), dtype=np.complex128)
        for src, dst in enumerate(element.mapping):
            out[dst, src] = 1.0
        return UnitaryMatrix(out)
    raise ValueError(f"unknown circuit element {element!r}")


def compose(circuit: CircuitSpec) -> UnitaryMatrix:
    """Total transfer matrix of a circuit.

    Elements listed left to right are applied first to last, so the result is
    U_last @ ... @ U_first acting on input amplitudes.
    """
    total = np.eye(circuit.modes, dtype=np.complex128)
    for el in circuit.elements:
        total = element_unitary(el, circuit.modes).mat @ total
    return UnitaryMatrix(total)


def single_photon_distribution(u: UnitaryMatrix, input_mode: int) -> np.ndarray:
    """Detector click probabilities p_i = |U_{i, j}|^2 for one photon in mode j."""
    j = int(input_mode)
    if not 0 <= j < u.dim:
        raise ValueError(f"input mode {j} out of range for dim {u.dim}")
    col = u.mat[:, j]
    return clamp_probabilities((col.conj() * col).real)

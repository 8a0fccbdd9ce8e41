"""Interaction-free measurement schemes: circuit builders, outcome classes,
and closed-form efficiencies.

An opaque object is always emulated by diverting one internal mode to a
dedicated absorber mode whose detector heralds absorption.  Detector classes
per scheme:

* two-beamsplitter interferometer: mode 0 is the light (null) port, mode 1
  the dark (IFM) port, mode 2 the absorber;
* generic-unitary scheme on m+1 modes: the photon re-enters at mode j when no
  object is present, so mode j is null, every other signal mode is an IFM
  port, mode m is the absorber;
* n-stage cascade on 2n+1 modes: signal modes 0..n are the stage light ports
  D_0..D_{n-1} (D_0 is null, D_1..D_{n-1} partial) and the final dark port
  D_n (the all-objects IFM port); absorber for stage i is mode n+i.

Efficiency is eta = P_IFM / (P_IFM + P_abs), the fraction of object-presence
detections that were interaction free.
"""

import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from .mesh import decompose, mesh_to_circuit
from .optics import (
    BeamSplitter,
    CircuitSpec,
    Reflectivity,
    UnitaryMatrix,
    _as_reflectivity,
    swap_permutation,
)

PROB_TOL = 1e-12


@dataclass(frozen=True)
class EVScheme:
    """Mach-Zehnder bomb-tester interferometer with one object slot."""

    r: float

    def __post_init__(self):
        object.__setattr__(self, "r", _as_reflectivity(self.r).value)

    @property
    def modes(self) -> int:
        return 3

    @property
    def input_mode(self) -> int:
        return 0

    @property
    def n_objects(self) -> int:
        return 1


@dataclass(frozen=True, eq=False)
class MultimodeScheme:
    """Generic unitary followed by its inverse, with one object slot."""

    unitary: UnitaryMatrix
    input_mode: int
    object_mode: int

    def __post_init__(self):
        m = self.unitary.dim
        j, k = int(self.input_mode), int(self.object_mode)
        if not (0 <= j < m and 0 <= k < m):
            raise ValueError(f"input/object modes ({j}, {k}) out of range for dim {m}")
        object.__setattr__(self, "input_mode", j)
        object.__setattr__(self, "object_mode", k)

    @property
    def modes(self) -> int:
        return self.unitary.dim + 1

    @property
    def n_objects(self) -> int:
        return 1


@dataclass(frozen=True)
class CascadeScheme:
    """Sequential chain of interferometer stages, one object slot per stage."""

    reflectivities: Tuple[float, ...]
    presence: Tuple[bool, ...]

    def __post_init__(self):
        rs = tuple(_as_reflectivity(r).value for r in self.reflectivities)
        if len(rs) < 1:
            raise ValueError("cascade needs at least one stage")
        presence = tuple(bool(p) for p in self.presence)
        if len(presence) != len(rs):
            raise ValueError(
                f"{len(rs)} reflectivities but {len(presence)} presence entries"
            )
        object.__setattr__(self, "reflectivities", rs)
        object.__setattr__(self, "presence", presence)

    @property
    def n_objects(self) -> int:
        return len(self.reflectivities)

    @property
    def modes(self) -> int:
        return 2 * self.n_objects + 1

    @property
    def input_mode(self) -> int:
        return 0


@dataclass(frozen=True)
class TreeScheme:
    """Binary-tree arrangement of interferometer stages.

    A k-layer tree interrogates 2^k - 1 objects on 2^k modes with circuit
    depth 2k.  Node ids are heap indices: node v's dark output continues to
    child 2v, its light output starts a new chain at child 2v+1.
    """

    layers: int

    def __post_init__(self):
        k = int(self.layers)
        if k < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers!r}")
        object.__setattr__(self, "layers", k)

    @property
    def modes(self) -> int:
        return 2 ** self.layers

    @property
    def depth(self) -> int:
        return 2 * self.layers

    @property
    def n_objects(self) -> int:
        return 2 ** self.layers - 1

    @property
    def chains(self) -> Tuple[Tuple[int, ...], ...]:
        return tree_chains(self.layers)


SchemeDescriptor = Union[EVScheme, MultimodeScheme, CascadeScheme, TreeScheme]


@dataclass(frozen=True)
class OutcomeDistribution:
    """Detector probabilities partitioned into outcome classes.

    ``p_abs`` holds one entry per object; ``p_partial`` the intermediate
    light ports D_1..D_{n-1} of a cascade.  Entries must form a probability
    distribution: each in [0, 1], total 1 within 1e-12.
    """

    p_ifm: float
    p_abs: Tuple[float, ...]
    p_null: float
    p_partial: Tuple[float, ...] = ()

    def __post_init__(self):
        ifm = float(self.p_ifm)
        null = float(self.p_null)
        p_abs = tuple(float(p) for p in self.p_abs)
        partial = tuple(float(p) for p in self.p_partial)
        for p in (ifm, null) + p_abs + partial:
            if not -1e-15 <= p <= 1.0 + 1e-12:
                raise ValueError(f"probability {p!r} outside [0, 1]")
        total = ifm + null + sum(p_abs) + sum(partial)
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"outcome probabilities sum to {total!r}, expected 1")
        object.__setattr__(self, "p_ifm", max(ifm, 0.0))
        object.__setattr__(self, "p_null", max(null, 0.0))
        object.__setattr__(self, "p_abs", tuple(max(p, 0.0) for p in p_abs))
        object.__setattr__(self, "p_partial", tuple(max(p, 0.0) for p in partial))

    def p_abs_total(self) -> float:
        return sum(self.p_abs)

    def efficiency(self) -> float:
        denom = self.p_ifm + self.p_abs_total()
        if denom == 0.0:
            raise ValueError("efficiency undefined: no IFM or absorption mass")
        return self.p_ifm / denom

    def to_dict(self) -> dict:
        return {
            "ifm": self.p_ifm,
            "abs": list(self.p_abs),
            "partial": list(self.p_partial),
            "null": self.p_null,
        }


def build_ev(r, object_present: bool) -> CircuitSpec:
    """Two-beamsplitter interferometer on 3 modes; mode 2 is the absorber.

    Without the object the second beamsplitter undoes the first and the
    photon always returns to mode 0.
    """
    r = _as_reflectivity(r)
    elements = [BeamSplitter((0, 1), r)]
    if object_present:
        elements.append(swap_permutation(3, 1, 2))
    elements.append(BeamSplitter((0, 1), r))
    return CircuitSpec(3, tuple(elements))


def build_mismatched_ev(r, eps: float, sign: int, object_present: bool = True) -> CircuitSpec:
    """Interferometer whose second beamsplitter is detuned to R(1 +/- eps)."""
    r = _as_reflectivity(r)
    eps = float(eps)
    if eps < 0.0:
        raise ValueError(f"eps must be nonnegative, got {eps!r}")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    r2 = (1.0 + sign * eps) * r.value
    elements = [BeamSplitter((0, 1), r)]
    if object_present:
        elements.append(swap_permutation(3, 1, 2))
    elements.append(BeamSplitter((0, 1), Reflectivity(r2)))
    return CircuitSpec(3, tuple(elements))


def build_multimode(
    u: UnitaryMatrix, input_mode: int, object_mode: int, object_present: bool
) -> CircuitSpec:
    """Generic unitary, optional diversion of the object mode, then the inverse.

    The unitary and its inverse are compiled through the rectangular mesh so
    the circuit contains only beamsplitter/phase/permutation elements; the
    compilation is exact to numerical precision.  The absorber is mode m.
    """
    if not isinstance(u, UnitaryMatrix):
        u = UnitaryMatrix(np.asarray(u, dtype=np.complex128))
    m = u.dim
    j, k = int(input_mode), int(object_mode)
    if not (0 <= j < m and 0 <= k < m):
        raise ValueError(f"input/object modes ({j}, {k}) out of range for dim {m}")
    forward = mesh_to_circuit(decompose(u), total_modes=m + 1)
    backward = mesh_to_circuit(decompose(u.dagger()), total_modes=m + 1)
    elements = forward.elements
    if object_present:
        elements = elements + (swap_permutation(m + 1, k, m),)
    return CircuitSpec(m + 1, elements + backward.elements)


def build_cascade(reflectivities: Sequence, presence: Sequence[bool]) -> CircuitSpec:
    """Chain of interferometer stages on 2n+1 modes.

    Stage i (1-based) acts on signal modes (i-1, i); its dark output feeds
    stage i+1 and its light output terminates at detector D_{i-1}.  A present
    object in stage i diverts the stage's lower internal arm to absorber mode
    n+i between the stage's two beamsplitters.
    """
    scheme = CascadeScheme(tuple(reflectivities), tuple(presence))
    n = scheme.n_objects
    modes = scheme.modes
    elements = []
    for i in range(1, n + 1):
        r = Reflectivity(scheme.reflectivities[i - 1])
        elements.append(BeamSplitter((i - 1, i), r))
        if scheme.presence[i - 1]:
            elements.append(swap_permutation(modes, i, n + i))
        elements.append(BeamSplitter((i - 1, i), r))
    return CircuitSpec(modes, tuple(elements))


def build_tree(layers: int) -> TreeScheme:
    """Binary-tree scheme descriptor; chains via ``TreeScheme.chains``."""
    return TreeScheme(layers)


def tree_chains(layers: int) -> Tuple[Tuple[int, ...], ...]:
    """Enumerate the simultaneously interrogable chains of a k-layer tree.

    Each chain follows dark outputs from its head to a leaf; heads are the
    root plus every light child, so the chains partition all 2^k - 1 nodes.
    For example k=4 yields one chain of length 4, one of 3, two of 2, and
    four of 1, covering all 15 nodes.
    """
    k = TreeScheme(layers).layers
    last = 2 ** k - 1
    chains = []
    heads = [1]
    while heads:
        node = heads.pop(0)
        chain = []
        while node <= last:
            chain.append(node)
            if 2 * node + 1 <= last:
                heads.append(2 * node + 1)
            node = 2 * node
        chains.append(tuple(chain))
    return tuple(chains)


def chain_multiset(chains: Sequence[Sequence[int]]) -> Dict[int, int]:
    """Histogram of chain lengths."""
    out: Dict[int, int] = {}
    for chain in chains:
        out[len(chain)] = out.get(len(chain), 0) + 1
    return out


def scheme_circuit(scheme: SchemeDescriptor, override_presence=None) -> CircuitSpec:
    """Circuit for a scheme descriptor.

    ``override_presence`` of True/False forces every object present/absent;
    None keeps the descriptor's own configuration (present for single-object
    schemes).
    """
    if isinstance(scheme, EVScheme):
        present = True if override_presence is None else bool(override_presence)
        return build_ev(scheme.r, present)
    if isinstance(scheme, MultimodeScheme):
        present = True if override_presence is None else bool(override_presence)
        return build_multimode(
            scheme.unitary, scheme.input_mode, scheme.object_mode, present
        )
    if isinstance(scheme, CascadeScheme):
        if override_presence is None:
            presence = scheme.presence
        else:
            presence = (bool(override_presence),) * scheme.n_objects
        return build_cascade(scheme.reflectivities, presence)
    raise ValueError(f"no circuit form for scheme {scheme!r}")


def detector_classes(scheme: SchemeDescriptor):
    """Detector indices per outcome class: (null, partial, ifm, abs).

    ``ifm`` may span several modes (generic-unitary scheme); ``abs`` lists one
    mode per object.
    """
    if isinstance(scheme, EVScheme):
        return (0,), (), (1,), (2,)
    if isinstance(scheme, MultimodeScheme):
        m = scheme.unitary.dim
        j = scheme.input_mode
        ifm = tuple(i for i in range(m) if i != j)
        return (j,), (), ifm, (m,)
    if isinstance(scheme, CascadeScheme):
        n = scheme.n_objects
        return (0,), tuple(range(1, n)), (n,), tuple(range(n + 1, 2 * n + 1))
    raise ValueError(f"no detector classes for scheme {scheme!r}")


def classify(scheme: SchemeDescriptor, dist) -> OutcomeDistribution:
    """Partition a detector distribution into outcome classes."""
    dist = np.asarray(dist, dtype=np.float64)
    if isinstance(scheme, TreeScheme):
        raise ValueError("tree schemes are descriptors only and are not classified")
    if dist.shape != (scheme.modes,):
        raise ValueError(f"expected {scheme.modes} probabilities, got shape {dist.shape}")
    null_idx, partial_idx, ifm_idx, abs_idx = detector_classes(scheme)
    return OutcomeDistribution(
        p_ifm=float(sum(dist[i] for i in ifm_idx)),
        p_abs=tuple(float(dist[i]) for i in abs_idx),
        p_null=float(sum(dist[i] for i in null_idx)),
        p_partial=tuple(float(dist[i]) for i in partial_idx),
    )


def scheme_id(scheme: SchemeDescriptor) -> str:
    if isinstance(scheme, EVScheme):
        return "ev"
    if isinstance(scheme, MultimodeScheme):
        return "multimode"
    if isinstance(scheme, CascadeScheme):
        return "cascade"
    if isinstance(scheme, TreeScheme):
        return "tree"
    raise ValueError(f"unknown scheme {scheme!r}")


def scheme_to_dict(scheme: SchemeDescriptor) -> dict:
    """JSON form of a scheme descriptor."""
    if isinstance(scheme, EVScheme):
        return {"scheme": "ev", "r": scheme.r}
    if isinstance(scheme, MultimodeScheme):
        mat = scheme.unitary.mat
        return {
            "scheme": "multimode",
            "unitary": [[[float(z.real), float(z.imag)] for z in row] for row in mat],
            "input_mode": scheme.input_mode,
            "object_mode": scheme.object_mode,
        }
    if isinstance(scheme, CascadeScheme):
        return {
            "scheme": "cascade",
            "r": list(scheme.reflectivities),
            "presence": list(scheme.presence),
        }
    if isinstance(scheme, TreeScheme):
        return {"scheme": "tree", "layers": scheme.layers}
    raise ValueError(f"unknown scheme {scheme!r}")


def scheme_from_dict(data: dict) -> SchemeDescriptor:
    kind = data["scheme"]
    if kind == "ev":
        return EVScheme(data["r"])
    if kind == "multimode":
        mat = np.array(
            [[complex(re, im) for re, im in row] for row in data["unitary"]]
        )
        return MultimodeScheme(UnitaryMatrix(mat), data["input_mode"], data["object_mode"])
    if kind == "cascade":
        return CascadeScheme(tuple(data["r"]), tuple(data["presence"]))
    if kind == "tree":
        return TreeScheme(data["layers"])
    raise ValueError(f"unknown scheme kind {kind!r}")


def _check_open_unit(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {value!r}")
    return value


def eta_ev(r) -> float:
    """Efficiency R / (R + 1) of the two-beamsplitter scheme.

    Boundary reflectivities are rejected: at R = 0 the photon is always
    absorbed and at R = 1 it never reaches the object, so no interaction-free
    measurement happens either way.
    """
    r = _check_open_unit(r if not isinstance(r, Reflectivity) else r.value, "reflectivity")
    return r / (r + 1.0)


def eta_ev_t(t) -> float:
    """Same efficiency expressed in the transmission, (1 - T) / (2 - T)."""
    t = _check_open_unit(t, "transmission")
    return (1.0 - t) / (2.0 - t)


def eta_multimode(t) -> float:
    """Efficiency of the generic-unitary scheme, (1 - t) / (2 - t).

    ``t`` is the squared modulus of the transfer-matrix element linking the
    input mode to the object mode; only that element matters.  Coincides with
    eta_ev_t on the open interval and extends to t = 0 (efficiency 1/2).
    """
    t = float(t)
    if not 0.0 <= t < 1.0:
        raise ValueError(f"|U_kj|^2 must lie in [0, 1), got {t!r}")
    return (1.0 - t) / (2.0 - t)


def cascade_distribution(reflectivities: Sequence) -> OutcomeDistribution:
    """Closed-form outcome distribution of an all-objects-present cascade.

    The photon enters stage i with probability prod_{l<i} R_l T_l; there it is
    absorbed with conditional probability T_i, exits the stage's light port
    with R_i^2, and continues dark with R_i T_i.
    """
    rs = [_check_open_unit(_as_reflectivity(r).value, "reflectivity") for r in reflectivities]
    if not rs:
        raise ValueError("cascade needs at least one stage")
    prefix = 1.0
    p_abs = []
    light = []
    for r in rs:
        t = 1.0 - r
        p_abs.append(prefix * t)
        light.append(prefix * r * r)
        prefix *= r * t
    return OutcomeDistribution(
        p_ifm=prefix,
        p_abs=tuple(p_abs),
        p_null=light[0],
        p_partial=tuple(light[1:]),
    )


def eta_cascade(reflectivities: Sequence) -> float:
    """Closed-form cascade efficiency P_IFM / (P_IFM + sum_i P_abs^i)."""
    return cascade_distribution(reflectivities).efficiency()


def eta_cascade_uniform(n: int, r: float = 0.5) -> float:
    """Cascade efficiency with n equal stages; at r = 1/2 this equals
    1 / (1 + (2/3) (4^n - 1))."""
    if int(n) < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    return eta_cascade((r,) * int(n))


def eta_zeno(n: int) -> float:
    """Efficiency cos^{2N}(pi / 2N) of the N-pass discrete-rotation scheme."""
    n = int(n)
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n!r}")
    if n == 1:
        # A single pass rotates the photon fully into the absorbing arm, so
        # no interaction-free event can occur; return the exact zero that
        # float cos(pi/2) misses by ~1e-17.
        return 0.0
    return math.cos(math.pi / (2 * n)) ** (2 * n)


def zeno_absorption(n: int) -> float:
    """Per-round absorption probability sin^2(pi / 2N) of the N-pass scheme."""
    n = int(n)
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n!r}")
    return math.sin(math.pi / (2 * n)) ** 2


def eta_mismatch(r, eps: float, sign: int) -> float:
    """Efficiency with the second beamsplitter detuned to R' = (1 +/- eps) R.

    Evaluates R (1 - R') / (R (1 - R') - R + 1); eps = 0 recovers eta_ev(R).
    """
    r = _check_open_unit(r if not isinstance(r, Reflectivity) else r.value, "reflectivity")
    eps = float(eps)
    if eps < 0.0:
        raise ValueError(f"eps must be nonnegative, got {eps!r}")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    r2 = (1.0 + sign * eps) * r
    if r2 > 1.0:
        raise ValueError(f"detuned reflectivity {r2!r} exceeds 1")
    num = r * (1.0 - r2)
    return num / (num - r + 1.0)

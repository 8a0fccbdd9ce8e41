"""Rectangular-mesh compilation of m-mode unitaries into Mach-Zehnder units.

Any m-mode unitary factors into m(m-1)/2 two-parameter units on neighbouring
mode pairs plus one output phase per mode.  The unit acting on modes
(n, n+1) has the transfer matrix

    T(theta, phi) = [[exp(i phi) cos(theta), -sin(theta)],
                     [exp(i phi) sin(theta),  cos(theta)]]

with mixing angle theta in [0, pi/2] and input phase phi in [0, 2 pi).  At
theta = 0 the unit leaves the pair uncoupled; cos(theta)^2 is the weight kept
on the unit's own mode.  This convention is pinned by the round-trip test:
reconstruct(decompose(U)) == U within 1e-9 in max-norm.

The factoring nulls matrix elements on alternating anti-diagonals, multiplying
inverse units on the right and units on the left, then commutes the leftover
diagonal through the left factors so the result reads as
U = diag(output phases) @ T_k @ ... @ T_1 in application order.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .optics import (
    BeamSplitter,
    CircuitSpec,
    PhaseShifter,
    Reflectivity,
    UnitaryMatrix,
    unitarity_residual,
)

DECOMPOSE_INPUT_TOL = 1e-8
ROUNDTRIP_TOL = 1e-9
TWO_PI = 2.0 * math.pi


def _wrap_phase(phi: float) -> float:
    """Map a phase into [0, 2 pi); guards the float quirk where x % 2pi == 2pi."""
    out = float(phi) % TWO_PI
    return 0.0 if out >= TWO_PI else out


def _fold_theta(theta: float) -> float:
    """Triangle-fold an angle into the canonical mixing range [0, pi/2]."""
    out = float(theta) % math.pi
    return math.pi - out if out > math.pi / 2 else out


@dataclass(frozen=True)
class MeshProgram:
    """Parameters of a compiled rectangular mesh.

    ``mzi`` lists (row, col, theta, phi) per unit in application order: row is
    the upper mode of the pair the unit acts on, col its column in the
    rectangular grid.  An m-mode mesh has exactly m(m-1)/2 units.  Phases are
    wrapped into [0, 2 pi) on construction (a pure 2 pi shift does not change
    the transfer matrix); mixing angles outside [0, pi/2] are rejected because
    folding them silently would alter the unitary.
    """

    dim: int
    mzi: Tuple[Tuple[int, int, float, float], ...]
    out_phases: Tuple[float, ...]

    def __post_init__(self):
        dim = int(self.dim)
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        expected = dim * (dim - 1) // 2
        mzi = tuple(
            (int(row), int(col), float(theta), float(phi))
            for row, col, theta, phi in self.mzi
        )
        if len(mzi) != expected:
            raise ValueError(f"expected {expected} mesh units for dim {dim}, got {len(mzi)}")
        cleaned = []
        for row, col, theta, phi in mzi:
            if not 0 <= row < dim - 1:
                raise ValueError(f"unit row {row} out of range for dim {dim}")
            if col < 0:
                raise ValueError(f"unit column {col} must be nonnegative")
            if not -1e-12 <= theta <= math.pi / 2 + 1e-12:
                raise ValueError(f"mixing angle {theta!r} outside [0, pi/2]")
            theta = min(max(theta, 0.0), math.pi / 2)
            cleaned.append((row, col, theta, _wrap_phase(phi)))
        out_phases = tuple(_wrap_phase(p) for p in self.out_phases)
        if len(out_phases) != dim:
            raise ValueError(f"expected {dim} output phases, got {len(out_phases)}")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "mzi", tuple(cleaned))
        object.__setattr__(self, "out_phases", out_phases)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "mzi": [[row, col, theta, phi] for row, col, theta, phi in self.mzi],
            "out_phases": list(self.out_phases),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeshProgram":
        return cls(
            data["dim"],
            tuple(tuple(entry) for entry in data["mzi"]),
            tuple(data["out_phases"]),
        )


def _apply_unit_rows(v: np.ndarray, n: int, theta: float, phi: float) -> None:
    """v <- T(theta, phi) on modes (n, n+1) @ v, in place."""
    c, s = math.cos(theta), math.sin(theta)
    eip = complex(math.cos(phi), math.sin(phi))
    top = eip * c * v[n, :] - s * v[n + 1, :]
    bot = eip * s * v[n, :] + c * v[n + 1, :]
    v[n, :] = top
    v[n + 1, :] = bot


def _apply_unit_inverse_columns(v: np.ndarray, n: int, theta: float, phi: float) -> None:
    """v <- v @ T(theta, phi)^{-1} on modes (n, n+1), in place."""
    c, s = math.cos(theta), math.sin(theta)
    emip = complex(math.cos(phi), -math.sin(phi))
    left = emip * c * v[:, n] - s * v[:, n + 1]
    right = emip * s * v[:, n] + c * v[:, n + 1]
    v[:, n] = left
    v[:, n + 1] = right


def _nulling_params(target, reference, extra_phase: float):
    """Angles that null ``target`` against ``reference``.

    An exactly zero target emits a pass-through unit (theta = phi = 0) so
    that identity-like inputs compile to an all-zero program.
    """
    mag = abs(target)
    if mag == 0.0:
        return 0.0, 0.0
    theta = math.atan2(mag, abs(reference))
    phi = _wrap_phase(np.angle(target) - np.angle(reference) + extra_phase)
    return theta, phi


def decompose(u) -> MeshProgram:
    """Factor a unitary into a rectangular mesh program.

    Accepts a UnitaryMatrix or a raw square array; raw input must be unitary
    within max-norm residual 1e-8.  The round-trip residual of
    reconstruct(decompose(U)) tracks the input's own unitarity residual, so
    the 1e-9 round-trip contract presumes numerically unitary input
    (residual at the 1e-10 level or better, as QR-based sampling gives).
    """
    if isinstance(u, UnitaryMatrix):
        mat = u.mat
    else:
        mat = np.asarray(u, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        residual = unitarity_residual(mat)
        if residual >= DECOMPOSE_INPUT_TOL:
            raise ValueError(f"input is not unitary (residual {residual:.3e})")
    n = mat.shape[0]
    v = mat.astype(np.complex128).copy()

    right_ops = []  # units multiplied as inverses on the right, application order
    left_ops = []  # units multiplied on the left, application order
    for diag in range(1, n):
        if diag % 2 == 1:
            for j in range(diag):
                row, col = n - 1 - j, diag - 1 - j
                theta, phi = _nulling_params(v[row, col], v[row, col + 1], 0.0)
                _apply_unit_inverse_columns(v, col, theta, phi)
                v[row, col] = 0.0
                right_ops.append((col, theta, phi))
        else:
            for j in range(1, diag + 1):
                row, col = n + j - diag - 1, j - 1
                theta, phi = _nulling_params(v[row, col], v[row - 1, col], math.pi)
                _apply_unit_rows(v, row - 1, theta, phi)
                v[row, col] = 0.0
                left_ops.append((row - 1, theta, phi))

    # v is now diagonal up to the input's unitarity residual; commute each
    # left factor's inverse through the diagonal:
    #   T^{-1}(theta, phi) D(psi1, psi2) = D(psi2 - phi + pi, psi2)
    #                                      @ T(theta, psi1 - psi2 + pi)
    # with the theta == 0 case kept exact so identity input stays all zeros.
    psi = np.angle(np.diagonal(v)).copy()
    units = list(right_ops)
    for mode, theta, phi in reversed(left_ops):
        p1, p2 = psi[mode], psi[mode + 1]
        if theta == 0.0:
            psi[mode] = p1 - phi
            units.append((mode, 0.0, 0.0))
        else:
            psi[mode] = p2 - phi + math.pi
            units.append((mode, theta, _wrap_phase(p1 - p2 + math.pi)))

    # Greedy earliest-column placement reproduces the rectangular grid.
    depth = [0] * n
    placed = []
    for mode, theta, phi in units:
        col = max(depth[mode], depth[mode + 1])
        placed.append((mode, col, theta, phi))
        depth[mode] = depth[mode + 1] = col + 1
    return MeshProgram(n, tuple(placed), tuple(_wrap_phase(p) for p in psi))


def reconstruct(mesh: MeshProgram) -> UnitaryMatrix:
    """Transfer matrix of a mesh program; unitary for any parameter values."""
    v = np.eye(mesh.dim, dtype=np.complex128)
    for row, _col, theta, phi in mesh.mzi:
        _apply_unit_rows(v, row, theta, phi)
    phases = np.exp(1j * np.asarray(mesh.out_phases))
    return UnitaryMatrix(phases[:, None] * v)


def perturb_mesh(mesh: MeshProgram, phase_sigma: float, rng_seed) -> MeshProgram:
    """Add independent Gaussian phase noise to every mesh parameter.

    Every mixing angle, unit phase, and output phase receives independent
    N(0, phase_sigma) noise; angles are then renormalized into their
    canonical ranges (triangle fold for theta, wrap for phases).  The result
    is deterministic given the seed, and phase_sigma = 0 returns the input
    program unchanged.
    """
    sigma = float(phase_sigma)
    if sigma < 0.0:
        raise ValueError(f"phase_sigma must be nonnegative, got {sigma!r}")
    if sigma == 0.0:
        return mesh
    rng = np.random.default_rng(rng_seed)
    k = len(mesh.mzi)
    noise = rng.normal(0.0, sigma, size=2 * k + mesh.dim)
    mzi = tuple(
        (row, col, _fold_theta(theta + noise[i]), _wrap_phase(phi + noise[k + i]))
        for i, (row, col, theta, phi) in enumerate(mesh.mzi)
    )
    outs = tuple(
        _wrap_phase(p + noise[2 * k + i]) for i, p in enumerate(mesh.out_phases)
    )
    return MeshProgram(mesh.dim, mzi, outs)


def mesh_to_circuit(mesh: MeshProgram, total_modes: int = 0, offset: int = 0) -> CircuitSpec:
    """Expand a mesh program into beamsplitter and phase-shifter elements.

    Each unit T(theta, phi) becomes phase phi on its upper mode, phase pi on
    its lower mode, then a beamsplitter of reflectivity cos(theta)^2; output
    phases follow as final phase shifters.  With ``total_modes``/``offset``
    the mesh can be placed on a contiguous block of a wider circuit.
    """
    total = int(total_modes) if total_modes else mesh.dim + offset
    elements = []
    for row, _col, theta, phi in mesh.mzi:
        a, b = offset + row, offset + row + 1
        elements.append(PhaseShifter(a, phi))
        elements.append(PhaseShifter(b, math.pi))
        elements.append(BeamSplitter((a, b), Reflectivity(math.cos(theta) ** 2)))
    for i, p in enumerate(mesh.out_phases):
        elements.append(PhaseShifter(offset + i, p))
    return CircuitSpec(total, tuple(elements))

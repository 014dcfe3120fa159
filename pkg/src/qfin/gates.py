"""Gate matrices and constructors (angles in radians)."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

UNITARY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class GateMatrix:
    """A labelled unitary. ``params`` are the angles the label was built with."""

    matrix: np.ndarray
    label: str
    params: tuple[float, ...] = field(default=())

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] & (m.shape[0] - 1):
            raise ValueError(f"gate matrix must be square with power-of-two size, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def dagger(self) -> "GateMatrix":
        return GateMatrix(self.matrix.conj().T, f"{self.label}^dg", self.params)

    def __matmul__(self, other: "GateMatrix") -> "GateMatrix":
        return GateMatrix(self.matrix @ other.matrix, f"{self.label}*{other.label}")

    def __repr__(self) -> str:
        if self.params:
            return f"GateMatrix({self.label}({', '.join(f'{p:.6g}' for p in self.params)}))"
        return f"GateMatrix({self.label})"


_S2 = 1 / math.sqrt(2)


def _rx(a):
    c, s = math.cos(a / 2), math.sin(a / 2)
    return [[c, -1j * s], [-1j * s, c]]


def _ry(a):
    c, s = math.cos(a / 2), math.sin(a / 2)
    return [[c, -s], [s, c]]


def _rz(a):
    return [[cmath.exp(-0.5j * a), 0], [0, cmath.exp(0.5j * a)]]


def _u3(theta, phi, lam):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return [
        [c, -cmath.exp(1j * lam) * s],
        [cmath.exp(1j * phi) * s, cmath.exp(1j * (phi + lam)) * c],
    ]


def _u2(phi, lam):
    return [
        [_S2, -cmath.exp(1j * lam) * _S2],
        [cmath.exp(1j * phi) * _S2, cmath.exp(1j * (phi + lam)) * _S2],
    ]


def _perm(dim: int, mapping: dict[int, int]) -> np.ndarray:
    m = np.eye(dim, dtype=np.complex128)
    for a, b in mapping.items():
        m[a, :] = 0
        m[a, b] = 1
    return m


_FIXED: dict[str, np.ndarray] = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]]),
    "SX": 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]),
    "H": _S2 * np.array([[1, 1], [1, -1]]),
    "S": np.array([[1, 0], [0, 1j]]),
    "T": np.array([[1, 0], [0, cmath.exp(0.25j * math.pi)]]),
    "SDG": np.array([[1, 0], [0, -1j]]),
    "TDG": np.array([[1, 0], [0, cmath.exp(-0.25j * math.pi)]]),
    "CNOT": _perm(4, {2: 3, 3: 2}),
    "CZ": np.diag([1, 1, 1, -1]),
    "SWAP": _perm(4, {1: 2, 2: 1}),
    "CCNOT": _perm(8, {6: 7, 7: 6}),
    "CSWAP": _perm(8, {5: 6, 6: 5}),
}

_PARAMETRIC: dict[str, tuple[int, Callable]] = {
    "RX": (1, _rx),
    "RY": (1, _ry),
    "RZ": (1, _rz),
    "U1": (1, lambda lam: [[1, 0], [0, cmath.exp(1j * lam)]]),
    "U2": (2, _u2),
    "U3": (3, _u3),
}

_ALIASES = {"CX": "CNOT", "CCX": "CCNOT", "TOFFOLI": "CCNOT", "FREDKIN": "CSWAP", "ID": "I",
            "SQRTX": "SX", "P": "U1", "PHASE": "U1", "SDAG": "SDG", "TDAG": "TDG"}

GATE_NAMES = tuple(sorted(_FIXED) + sorted(_PARAMETRIC))


def standard_gate(name: str, params: Sequence[float] = ()) -> GateMatrix:
    """Look up a named gate, e.g. ``standard_gate("RY", [0.3])``."""
    key = name.upper()
    key = _ALIASES.get(key, key)
    params = tuple(params)
    if key in _FIXED:
        if params:
            raise ValueError(f"gate {key} takes no parameters, got {len(params)}")
        return GateMatrix(_FIXED[key], key)
    if key in _PARAMETRIC:
        arity, build = _PARAMETRIC[key]
        if len(params) != arity:
            raise ValueError(f"gate {key} takes {arity} parameter(s), got {len(params)}")
        return GateMatrix(np.array(build(*params), dtype=np.complex128), key, params)
    raise ValueError(f"unknown gate {name!r}")


def rk_gate(k: int) -> GateMatrix:
    """diag(1, exp(2*pi*i / 2^k)), the rotation used inside the QFT."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return GateMatrix(np.diag([1, cmath.exp(2j * math.pi / 2**k)]), f"R{k}")


def tensor(a: GateMatrix, b: GateMatrix) -> GateMatrix:
    """Kronecker product; ``a`` acts on the leading qubits."""
    return GateMatrix(np.kron(a.matrix, b.matrix), f"{a.label}(x){b.label}")


def controlled(gate: GateMatrix, num_controls: int = 1) -> GateMatrix:
    """Block matrix [[I, 0], [0, gate]], nested ``num_controls`` times."""
    if num_controls < 1:
        raise ValueError("num_controls must be >= 1")
    m = gate.matrix
    for _ in range(num_controls):
        d = m.shape[0]
        block = np.eye(2 * d, dtype=np.complex128)
        block[d:, d:] = m
        m = block
    return GateMatrix(m, "C" * num_controls + gate.label, gate.params)


def check_unitary(gate: GateMatrix | np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(getattr(gate, "matrix", gate), dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("check_unitary needs a square matrix")
    return bool(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))) < tol)


def equal_up_to_global_phase(a, b, tol: float = 1e-10) -> bool:
    """True if a = exp(i*phi) * b for some phi."""
    ma = np.asarray(getattr(a, "matrix", a), dtype=np.complex128)
    mb = np.asarray(getattr(b, "matrix", b), dtype=np.complex128)
    if ma.shape != mb.shape:
        return False
    k = np.unravel_index(np.argmax(np.abs(mb)), mb.shape)
    if abs(mb[k]) < tol:
        return bool(np.max(np.abs(ma)) < tol)
    phase = ma[k] / mb[k]
    if abs(abs(phase) - 1) > tol:
        return False
    return bool(np.max(np.abs(ma - phase * mb)) < tol)

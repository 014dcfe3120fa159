"""Gray code, multiplexed y-rotations and amplitude encoding of distributions.

A multiplexed rotation applies Ry(alpha_i) to a target qubit when its control
register holds the integer ``i`` (first control = most significant bit). It is
realized as an alternating ladder of 2^k single-qubit Ry gates and 2^k CNOTs;
the ladder angles ``theta`` are obtained from ``alpha`` with the sign matrix
``M_ij = 2^-k (-1)^(b(j) . g(i))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuits import CircuitSpec
from .gates import standard_gate


@dataclass(frozen=True)
class GrayWord:
    bits: str

    def __post_init__(self):
        if not self.bits or set(self.bits) - {"0", "1"}:
            raise ValueError(f"not a bit word: {self.bits!r}")

    def __str__(self) -> str:
        return self.bits

    def __int__(self) -> int:
        return int(self.bits, 2)

    def __len__(self) -> int:
        return len(self.bits)


def _word(b: str | int, width: int | None) -> str:
    if isinstance(b, GrayWord):
        return b.bits
    if isinstance(b, str):
        if not b or set(b) - {"0", "1"}:
            raise ValueError(f"not a bit word: {b!r}")
        return b
    if width is None:
        width = max(1, int(b).bit_length())
    if b < 0 or b >= 1 << width:
        raise ValueError(f"{b} does not fit in {width} bits")
    return format(int(b), f"0{width}b")


def to_gray(b: str | int, width: int | None = None) -> GrayWord:
    """Binary word -> Gray code: g = b XOR (b >> 1), width preserved."""
    bits = _word(b, width)
    n = int(bits, 2)
    return GrayWord(format(n ^ (n >> 1), f"0{len(bits)}b"))


def from_gray(g: GrayWord | str) -> str:
    """Inverse mapping: each binary bit is the XOR of all Gray bits to its left (inclusive)."""
    bits = g.bits if isinstance(g, GrayWord) else _word(g, None)
    out, acc = [], 0
    for ch in bits:
        acc ^= int(ch)
        out.append(str(acc))
    return "".join(out)


def gray_dot(b: str | int, g: GrayWord | str | int, width: int | None = None) -> int:
    """Parity of the bitwise AND of two equal-width words."""
    bb = _word(b, width)
    gg = _word(g, width if width is not None else len(bb))
    if len(bb) != len(gg):
        raise ValueError(f"width mismatch: {len(bb)} vs {len(gg)}")
    return bin(int(bb, 2) & int(gg, 2)).count("1") & 1


def angle_transform_matrix(n: int) -> np.ndarray:
    """2^n x 2^n matrix with entries 2^-n * (-1)^(b(j) . g(i))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    size = 1 << n
    i = np.arange(size)
    g = i ^ (i >> 1)
    anded = g[:, None] & i[None, :]
    parity = np.vectorize(lambda v: bin(v).count("1") & 1)(anded)
    return np.where(parity == 1, -1.0, 1.0) / size


def transform_angles(alphas: Sequence[float]) -> np.ndarray:
    a = np.asarray(alphas, dtype=float)
    n = a.size.bit_length() - 1
    if a.size < 1 or (1 << n) != a.size:
        raise ValueError(f"angle count must be a power of two, got {a.size}")
    if n == 0:
        return a.copy()
    return angle_transform_matrix(n) @ a


def _ladder_controls(k: int) -> list[int]:
    """Index (into the control list) of the CNOT control after each Ry of a k-control ladder."""
    size = 1 << k
    out = []
    for i in range(size):
        changed = (i ^ (i >> 1)) ^ (((i + 1) % size) ^ (((i + 1) % size) >> 1))
        out.append(k - changed.bit_length())  # Gray bit p (LSB = 0) lives on control k-1-p
    return out


def uniform_controlled_ry(
    thetas: Sequence[float],
    controls: Sequence[int],
    target: int,
    num_qubits: int | None = None,
) -> CircuitSpec:
    """Ry/CNOT ladder for already-transformed angles ``thetas``."""
    controls = [int(c) for c in controls]
    k = len(controls)
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size != 1 << k:
        raise ValueError(f"{k} controls need {1 << k} angles, got {thetas.size}")
    if num_qubits is None:
        num_qubits = max(controls + [target]) + 1
    circ = CircuitSpec(num_qubits)
    if k == 0:
        return circ.add("RY", target, params=[thetas[0]])
    for theta, c in zip(thetas, _ladder_controls(k)):
        circ.add("RY", target, params=[theta])
        circ.add("X", target, controls=controls[c])
    return circ


def multiplexed_ry(
    alphas: Sequence[float],
    controls: Sequence[int],
    target: int,
    num_qubits: int | None = None,
) -> CircuitSpec:
    """Ry(alphas[i]) on ``target`` whenever the controls read ``i``."""
    return uniform_controlled_ry(transform_angles(alphas), controls, target, num_qubits)


def multiplexed_ry_matrix(alphas: Sequence[float]) -> np.ndarray:
    """Block-diagonal reference operator diag(Ry(alpha_0), ..., Ry(alpha_{N-1})), target last."""
    blocks = [standard_gate("RY", [a]).matrix for a in alphas]
    size = 2 * len(blocks)
    out = np.zeros((size, size), dtype=np.complex128)
    for i, b in enumerate(blocks):
        out[2 * i:2 * i + 2, 2 * i:2 * i + 2] = b
    return out


def _validate_distribution(p: Sequence[float]) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    n = arr.size.bit_length() - 1
    if arr.size < 2 or (1 << n) != arr.size:
        raise ValueError(f"distribution length must be a power of two >= 2, got {arr.size}")
    if np.any(arr < 0):
        raise ValueError("probabilities must be non-negative")
    if abs(arr.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {arr.sum():.12g}, not 1")
    return arr


def state_prep_angles(p: Sequence[float]) -> list[np.ndarray]:
    """Ry angles per level: entry ``m`` holds 2^m angles for target qubit ``m``.

    An angle splits the mass of a block between its upper and lower halves;
    empty blocks (0/0) get angle 0.
    """
    arr = _validate_distribution(p)
    n = arr.size.bit_length() - 1
    levels = []
    for m in range(n):
        block = 1 << (n - m)
        sums = arr.reshape(1 << m, block)
        total = sums.sum(axis=1)
        upper = sums[:, block // 2:].sum(axis=1)
        ratio = np.divide(upper, total, out=np.zeros_like(total), where=total > 0)
        levels.append(2 * np.arcsin(np.sqrt(np.clip(ratio, 0.0, 1.0))))
    return levels


def prepare_distribution(p: Sequence[float], num_qubits: int | None = None) -> CircuitSpec:
    """Circuit mapping |0...0> to sum_i sqrt(p_i) |i> on qubits 0..n-1 (phases all zero)."""
    levels = state_prep_angles(p)
    n = len(levels)
    circ = CircuitSpec(num_qubits or n)
    for m, alphas in enumerate(levels):
        circ.extend(multiplexed_ry(alphas, list(range(m)), m, circ.num_qubits))
    return circ


def table_one_schedule(n: int = 3) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """f(i) = i/(N-1), alpha_i = 2 asin(sqrt f(i)), theta = M alpha."""
    size = 1 << n
    f = np.arange(size) / (size - 1)
    alphas = 2 * np.arcsin(np.sqrt(f))
    return f, alphas, transform_angles(alphas)


__all__ = [
    "GrayWord", "to_gray", "from_gray", "gray_dot", "angle_transform_matrix", "transform_angles",
    "uniform_controlled_ry", "multiplexed_ry", "multiplexed_ry_matrix", "state_prep_angles",
    "prepare_distribution", "table_one_schedule",
]

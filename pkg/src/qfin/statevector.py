"""Dense statevector simulator.

Bit ordering: basis index ``i`` has qubit 0 as its MOST significant bit, so
``|q0 q1 ... q_{n-1}>`` reads left to right and ``|5>`` on three qubits is
``|101>`` (qubit 0 = 1, qubit 1 = 0, qubit 2 = 1). Every bitstring produced or
consumed by this package uses the same order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_QUBITS = 20
RNG_ALGORITHM = "numpy.random.PCG64"

_NORM_TOL = 1e-12
_NORM_BUG = 1e-9


class CapacityError(ValueError):
    """Requested register size is outside the simulator's range."""


class PostSelectionError(RuntimeError):
    """Post-selection on a branch that has (numerically) zero probability."""


class NormDriftError(RuntimeError):
    """A state lost normalization by more than rounding can explain."""


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator used everywhere shots are drawn."""
    return np.random.Generator(np.random.PCG64(seed))


def _check_qubit_count(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 1 or n > MAX_QUBITS:
        raise CapacityError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")


class StateVector:
    """Normalized amplitudes of an n-qubit register.

    Instances are treated as immutable: every operation returns a new state.
    """

    __slots__ = ("_amps", "_n")

    def __init__(self, amplitudes: Sequence[complex] | np.ndarray, *, normalize: bool = False):
        amps = np.array(amplitudes, dtype=np.complex128).reshape(-1)
        size = amps.size
        n = size.bit_length() - 1
        if size < 2 or (1 << n) != size:
            raise ValueError(f"amplitude count must be a power of two >= 2, got {size}")
        _check_qubit_count(n)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("zero vector is not a quantum state")
        if normalize:
            amps = amps / norm
        elif abs(norm - 1.0) > 1e-9:
            raise ValueError(f"amplitudes are not normalized (norm={norm:.12g})")
        self._amps = amps
        self._n = n
        self._settle()
        self._amps.setflags(write=False)

    @classmethod
    def _wrap(cls, amps: np.ndarray) -> "StateVector":
        obj = cls.__new__(cls)
        obj._amps = amps
        obj._n = amps.size.bit_length() - 1
        obj._settle()
        obj._amps.setflags(write=False)
        return obj

    def _settle(self) -> None:
        drift = abs(np.linalg.norm(self._amps) - 1.0)
        if drift > _NORM_BUG:
            raise NormDriftError(f"norm drifted by {drift:.3e}")
        if drift > _NORM_TOL:
            self._amps = self._amps / np.linalg.norm(self._amps)

    @property
    def num_qubits(self) -> int:
        return self._n

    @property
    def amplitudes(self) -> np.ndarray:
        """Read-only view of the amplitude array."""
        return self._amps

    def __len__(self) -> int:
        return self._amps.size

    def __repr__(self) -> str:
        return f"StateVector(num_qubits={self._n})"

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        if other.num_qubits != self._n:
            raise ValueError("qubit counts differ")
        return complex(np.vdot(self._amps, other._amps))

    def tensor(self, other: "StateVector") -> "StateVector":
        """|self> (x) |other>; ``self`` occupies the leading (most significant) qubits."""
        _check_qubit_count(self._n + other.num_qubits)
        return StateVector._wrap(np.kron(self._amps, other._amps))


@dataclass(frozen=True)
class MeasurementCounts:
    """Histogram of sampled bitstrings."""

    counts: dict[str, int]
    shots: int
    seed: int
    rng: str = field(default=RNG_ALGORITHM)

    def frequency(self, bitstring: str) -> float:
        return self.counts.get(bitstring, 0) / self.shots

    def to_dict(self) -> dict:
        return {"counts": dict(self.counts), "shots": self.shots, "seed": self.seed, "rng": self.rng}


def zero_state(n: int) -> StateVector:
    _check_qubit_count(n)
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector._wrap(amps)


def basis_state(n: int, index: int | str) -> StateVector:
    """Computational basis state ``|index>``; a string is read as a bitstring."""
    _check_qubit_count(n)
    if isinstance(index, str):
        if len(index) != n or set(index) - {"0", "1"}:
            raise ValueError(f"bad bitstring {index!r} for {n} qubits")
        index = int(index, 2)
    if not 0 <= index < (1 << n):
        raise ValueError(f"basis index {index} out of range")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector._wrap(amps)


def _check_indices(n: int, qubits: Sequence[int], what: str) -> list[int]:
    qs = [int(q) for q in qubits]
    for q in qs:
        if not 0 <= q < n:
            raise ValueError(f"{what} qubit {q} out of range for {n} qubits")
    if len(set(qs)) != len(qs):
        raise ValueError(f"duplicate {what} qubits: {qs}")
    return qs


def _apply_on_tensor(psi: np.ndarray, matrix: np.ndarray, axes: list[int]) -> np.ndarray:
    """Contract ``matrix`` into the given axes of ``psi`` (shape (2,)*m)."""
    k = len(axes)
    g = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(g, psi, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the k output axes first
    return np.moveaxis(out, list(range(k)), axes)


def _gate_matrix(gate) -> np.ndarray:
    m = np.asarray(getattr(gate, "matrix", gate), dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"gate must be a square matrix, got shape {m.shape}")
    if np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))) >= 1e-10:
        raise ValueError("gate is not unitary")
    return m


def apply_unitary(state: StateVector, gate, targets: Sequence[int]) -> StateVector:
    """Apply a 2^k x 2^k unitary to ``targets`` (first target = most significant)."""
    n = state.num_qubits
    ts = _check_indices(n, targets, "target")
    m = _gate_matrix(gate)
    if m.shape != (1 << len(ts), 1 << len(ts)):
        raise ValueError(f"gate shape {m.shape} does not match {len(ts)} target qubit(s)")
    psi = state.amplitudes.reshape((2,) * n)
    out = _apply_on_tensor(psi, m, ts)
    return StateVector._wrap(np.ascontiguousarray(out).reshape(-1))


def apply_controlled(
    state: StateVector, gate, controls: Sequence[int], targets: Sequence[int]
) -> StateVector:
    """Apply ``gate`` to ``targets`` on the subspace where every control is 1."""
    n = state.num_qubits
    cs = _check_indices(n, controls, "control")
    ts = _check_indices(n, targets, "target")
    if set(cs) & set(ts):
        raise ValueError(f"controls {cs} and targets {ts} overlap")
    if not cs:
        return apply_unitary(state, gate, ts)
    m = _gate_matrix(gate)
    if m.shape != (1 << len(ts), 1 << len(ts)):
        raise ValueError(f"gate shape {m.shape} does not match {len(ts)} target qubit(s)")
    psi = state.amplitudes.reshape((2,) * n).copy()
    sel = tuple(1 if ax in cs else slice(None) for ax in range(n))
    sub = psi[sel]
    # axes of ``sub`` are the non-control qubits in increasing order
    remaining = [ax for ax in range(n) if ax not in cs]
    sub_axes = [remaining.index(t) for t in ts]
    psi[sel] = _apply_on_tensor(sub, m, sub_axes)
    return StateVector._wrap(psi.reshape(-1))


def probabilities(state: StateVector) -> np.ndarray:
    p = np.abs(state.amplitudes) ** 2
    return p / p.sum()


def _bit_mask(n: int, qubit: int) -> np.ndarray:
    idx = np.arange(1 << n)
    return (idx >> (n - 1 - qubit)) & 1


def marginal_probability(state: StateVector, qubit: int, value: int) -> float:
    """P(qubit == value)."""
    n = state.num_qubits
    _check_indices(n, [qubit], "measured")
    if value not in (0, 1):
        raise ValueError("value must be 0 or 1")
    p = probabilities(state)
    return float(p[_bit_mask(n, qubit) == value].sum())


def post_select(state: StateVector, qubit: int, value: int) -> tuple[StateVector, float]:
    """Project ``qubit`` onto ``value`` and renormalize; returns (state, probability)."""
    prob = marginal_probability(state, qubit, value)
    if prob <= 1e-12:
        raise PostSelectionError(f"P(q{qubit}={value}) = {prob:.3e} is too small to post-select")
    amps = np.where(_bit_mask(state.num_qubits, qubit) == value, state.amplitudes, 0.0)
    return StateVector._wrap(amps / np.sqrt(prob)), prob


def sample(state: StateVector, shots: int, seed: int) -> MeasurementCounts:
    """Measure every qubit ``shots`` times with a seeded PCG64 stream."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = probabilities(state)
    draws = make_rng(seed).multinomial(shots, p)
    n = state.num_qubits
    counts = {format(i, f"0{n}b"): int(c) for i, c in enumerate(draws) if c}
    return MeasurementCounts(counts=counts, shots=shots, seed=seed)


def sample_marginal(state: StateVector, qubit: int, shots: int, seed: int) -> int:
    """Number of shots (out of ``shots``) in which ``qubit`` reads 1."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p1 = min(max(marginal_probability(state, qubit, 1), 0.0), 1.0)
    return int(make_rng(seed).binomial(shots, p1))

"""Circuit containers, execution, QFT and the swap test."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import statevector as sv
from .gates import GateMatrix, standard_gate
from .statevector import StateVector

_SELF_INVERSE = {"I", "X", "Y", "Z", "H", "CNOT", "CZ", "SWAP", "CCNOT", "CSWAP"}
_DAGGER_NAME = {"S": "SDG", "SDG": "S", "T": "TDG", "TDG": "T"}


@dataclass(frozen=True)
class Instruction:
    """One gate application. ``matrix`` is set only for non-library unitaries."""

    label: str
    params: tuple[float, ...] = ()
    controls: tuple[int, ...] = ()
    targets: tuple[int, ...] = ()
    matrix: np.ndarray | None = field(default=None, compare=False, repr=False)

    def gate(self) -> GateMatrix:
        if self.matrix is not None:
            return GateMatrix(self.matrix, self.label, self.params)
        return standard_gate(self.label, self.params)

    def inverse(self) -> "Instruction":
        if self.matrix is not None:
            m = np.asarray(self.matrix).conj().T
            label = self.label[:-3] if self.label.endswith("^dg") else self.label + "^dg"
            return Instruction(label, self.params, self.controls, self.targets, m)
        name = self.label.upper()
        if name in _SELF_INVERSE:
            return self
        if name in _DAGGER_NAME:
            return Instruction(_DAGGER_NAME[name], (), self.controls, self.targets)
        if name in ("RX", "RY", "RZ", "U1"):
            return Instruction(name, (-self.params[0],), self.controls, self.targets)
        if name == "U3":
            t, p, l = self.params
            return Instruction("U3", (-t, -l, -p), self.controls, self.targets)
        if name == "U2":
            p, l = self.params
            return Instruction("U3", (-math.pi / 2, -l, -p), self.controls, self.targets)
        g = self.gate().dagger()
        return Instruction(g.label, (), self.controls, self.targets, g.matrix)


class CircuitSpec:
    """Ordered gate list over a fixed register."""

    def __init__(self, num_qubits: int, instructions: Iterable[Instruction] = ()):
        if num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        self.num_qubits = num_qubits
        self.instructions: list[Instruction] = []
        for ins in instructions:
            self.append(ins)

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def __repr__(self) -> str:
        return f"CircuitSpec(num_qubits={self.num_qubits}, gates={len(self)})"

    def append(self, ins: Instruction) -> "CircuitSpec":
        qs = ins.controls + ins.targets
        if not ins.targets:
            raise ValueError(f"{ins.label}: no target qubits")
        for q in qs:
            if not 0 <= q < self.num_qubits:
                raise ValueError(f"{ins.label}: qubit {q} out of range for {self.num_qubits} qubits")
        if len(set(qs)) != len(qs):
            raise ValueError(f"{ins.label}: controls/targets must be distinct, got {qs}")
        self.instructions.append(ins)
        return self

    def add(self, label: str, targets: Sequence[int] | int, params: Sequence[float] = (),
            controls: Sequence[int] | int = ()) -> "CircuitSpec":
        if isinstance(targets, (int, np.integer)):
            targets = (targets,)
        if isinstance(controls, (int, np.integer)):
            controls = (controls,)
        return self.append(Instruction(label.upper(), tuple(float(p) for p in params),
                                       tuple(int(c) for c in controls), tuple(int(t) for t in targets)))

    def add_unitary(self, matrix: np.ndarray, targets: Sequence[int], label: str = "UNITARY",
                    controls: Sequence[int] = ()) -> "CircuitSpec":
        m = np.array(matrix, dtype=np.complex128)
        return self.append(Instruction(label, (), tuple(int(c) for c in controls),
                                       tuple(int(t) for t in targets), m))

    def extend(self, other: "CircuitSpec", offset: int = 0) -> "CircuitSpec":
        """Append ``other``'s gates, shifting its qubit indices by ``offset``."""
        if other.num_qubits + offset > self.num_qubits:
            raise ValueError("sub-circuit does not fit")
        for ins in other:
            self.append(Instruction(ins.label, ins.params,
                                    tuple(c + offset for c in ins.controls),
                                    tuple(t + offset for t in ins.targets), ins.matrix))
        return self

    def remap(self, qubits: Sequence[int], num_qubits: int) -> "CircuitSpec":
        """Copy with qubit ``i`` relabelled as ``qubits[i]`` inside a ``num_qubits`` register."""
        if len(qubits) != self.num_qubits:
            raise ValueError("need one destination per qubit")
        out = CircuitSpec(num_qubits)
        for ins in self:
            out.append(Instruction(ins.label, ins.params,
                                   tuple(qubits[c] for c in ins.controls),
                                   tuple(qubits[t] for t in ins.targets), ins.matrix))
        return out

    def inverse(self) -> "CircuitSpec":
        return CircuitSpec(self.num_qubits, (ins.inverse() for ins in reversed(self.instructions)))

    @property
    def gate_count(self) -> int:
        return len(self.instructions)

    @property
    def width(self) -> int:
        """Largest number of gates touching any single qubit (controls included)."""
        lanes = [0] * self.num_qubits
        for ins in self:
            for q in ins.controls + ins.targets:
                lanes[q] += 1
        return max(lanes)

    def to_text(self) -> str:
        """One instruction per line: ``LABEL | params | controls | targets [| matrix-json]``."""
        lines = [f"# qubits {self.num_qubits}"]
        for ins in self:
            cols = [
                ins.label,
                ",".join(repr(p) for p in ins.params),
                ",".join(map(str, ins.controls)),
                ",".join(map(str, ins.targets)),
            ]
            if ins.matrix is not None:
                m = np.asarray(ins.matrix)
                cols.append(json.dumps([[[z.real, z.imag] for z in row] for row in m]))
            lines.append(" | ".join(cols))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CircuitSpec":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split()
        if header[:2] != ["#", "qubits"]:
            raise ValueError("missing '# qubits N' header")
        circ = cls(int(header[2]))

        def ints(s):
            return tuple(int(x) for x in s.split(",") if x.strip())

        for ln in lines[1:]:
            cols = [c.strip() for c in ln.split("|", 4)]
            params = tuple(float(x) for x in cols[1].split(",") if x.strip())
            matrix = None
            if len(cols) == 5:
                matrix = np.array([[complex(re, im) for re, im in row] for row in json.loads(cols[4])])
            circ.append(Instruction(cols[0], params, ints(cols[2]), ints(cols[3]), matrix))
        return circ

    def unitary(self) -> np.ndarray:
        """Full 2^n x 2^n matrix, built column by column (test helper; small n only)."""
        dim = 1 << self.num_qubits
        cols = [run(self, sv.basis_state(self.num_qubits, i)).amplitudes for i in range(dim)]
        return np.stack(cols, axis=1)


def run(circuit: CircuitSpec, state: StateVector | None = None) -> StateVector:
    """Apply every instruction in order, starting from |0...0> if no state is given."""
    if state is None:
        state = sv.zero_state(circuit.num_qubits)
    if state.num_qubits != circuit.num_qubits:
        raise ValueError(f"circuit has {circuit.num_qubits} qubits, state has {state.num_qubits}")
    for ins in circuit:
        state = sv.apply_controlled(state, ins.gate(), ins.controls, ins.targets)
    return state


def bell_circuit() -> CircuitSpec:
    """CNOT . (H (x) I)."""
    return CircuitSpec(2).add("H", 0).add("X", 1, controls=0)


def ghz_circuit(n: int) -> CircuitSpec:
    c = CircuitSpec(n).add("H", 0)
    for q in range(1, n):
        c.add("X", q, controls=q - 1)
    return c


def qft(n: int) -> CircuitSpec:
    """QFT|x> = 2^{-n/2} sum_k exp(2 pi i x k / 2^n) |k>, including the final qubit reversal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    c = CircuitSpec(n)
    for j in range(n):
        c.add("H", j)
        for m in range(j + 1, n):
            # controlled R_k with k = m - j + 1, i.e. U1(2 pi / 2^k)
            c.add("U1", j, params=[2 * math.pi / 2 ** (m - j + 1)], controls=m)
    for j in range(n // 2):
        c.add("SWAP", [j, n - 1 - j])
    return c


def inverse_qft(n: int) -> CircuitSpec:
    """QFT run backwards with every rotation angle negated."""
    return qft(n).inverse()


def swap_test_circuit(n: int) -> CircuitSpec:
    """Control qubit 0; first state on 1..n, second on n+1..2n."""
    c = CircuitSpec(2 * n + 1).add("H", 0)
    for i in range(n):
        c.add("SWAP", [1 + i, 1 + n + i], controls=0)
    return c.add("H", 0)


def swap_test_state(psi: StateVector, phi: StateVector) -> StateVector:
    if psi.num_qubits != phi.num_qubits:
        raise ValueError("swap test needs states of equal size")
    n = psi.num_qubits
    sv._check_qubit_count(2 * n + 1)
    start = sv.zero_state(1).tensor(psi).tensor(phi)
    return run(swap_test_circuit(n), start)


def swap_test_p0(psi: StateVector, phi: StateVector) -> float:
    """Exact probability of reading 0 on the control qubit, (1 + |<psi|phi>|^2) / 2."""
    return sv.marginal_probability(swap_test_state(psi, phi), 0, 0)


def swap_test(psi: StateVector, phi: StateVector, shots: int, seed: int) -> float:
    """Sampled estimate of |<psi|phi>| = sqrt(2 P0 - 1), clamped at 0."""
    state = swap_test_state(psi, phi)
    ones = sv.sample_marginal(state, 0, shots, seed)
    p0 = 1.0 - ones / shots
    return math.sqrt(max(0.0, 2.0 * p0 - 1.0))

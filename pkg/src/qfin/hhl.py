"""HHL linear-system solver on the statevector simulator, plus portfolio helpers.

Register layout of the general solver (qubit 0 first):
    clock[0..t-1] | system[0..m-1] | ancilla
Clock qubit j controls U^(2^(t-1-j)) with U = exp(i A tau), so after the
inverse QFT the clock holds round(lambda tau 2^t / 2pi) mod 2^t. The value is
read in two's complement, which admits negative eigenvalues as long as
|lambda| tau / 2pi < 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import statevector as sv
from .circuits import CircuitSpec, inverse_qft, run, swap_test
from .encoding import multiplexed_ry
from .statevector import CapacityError, PostSelectionError, StateVector

EXACT = "exact"
SAMPLED = "sampled"
HERMITIAN_TOL = 1e-10
MIN_SUCCESS_PROBABILITY = 1e-6
C_SAFETY = 0.9


class SingularSystemError(ArithmeticError):
    """The linear system has no unique solution."""


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """A x = b. ``answer`` is the (start, stop) slice of x that callers care about.

    Padding rows and the unused half of a Hermitian embedding sit outside it.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    answer: tuple[int, int] | None = None

    def __post_init__(self):
        a = np.array(self.matrix, dtype=np.complex128)
        b = np.array(self.rhs, dtype=np.complex128).reshape(-1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got shape {a.shape}")
        if b.size != a.shape[0]:
            raise ValueError(f"rhs has length {b.size}, matrix has size {a.shape[0]}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "rhs", b)
        if self.answer is None:
            object.__setattr__(self, "answer", (0, a.shape[0]))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def hermitian(self) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) < HERMITIAN_TOL)

    @property
    def is_real(self) -> bool:
        return not np.any(self.matrix.imag) and not np.any(self.rhs.imag)


@dataclass(frozen=True)
class PortfolioSpec:
    covariance: np.ndarray
    returns: np.ndarray
    prices: np.ndarray
    gain: float
    budget: float

    def __post_init__(self):
        c = np.array(self.covariance, dtype=float)
        r = np.array(self.returns, dtype=float).reshape(-1)
        p = np.array(self.prices, dtype=float).reshape(-1)
        n = r.size
        if c.shape != (n, n) or p.size != n:
            raise ValueError(f"dimension mismatch: covariance {c.shape}, returns {r.size}, prices {p.size}")
        if np.max(np.abs(c - c.T)) > 1e-12:
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "covariance", c)
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "prices", p)


@dataclass(frozen=True)
class ClassicalSolution:
    solution: np.ndarray
    normalized: np.ndarray
    eigenvalues: np.ndarray
    condition_number: float

    @property
    def signed_spread_ratio(self) -> float:
        """lambda_max / |lambda_min| using signed extremes (not a condition number)."""
        return float(self.eigenvalues.max() / abs(self.eigenvalues.min()))


@dataclass
class HhlResult:
    solution: np.ndarray
    success_probability: float
    clock_qubits: int
    time_scale: float
    constant: float
    mode: str = EXACT
    shots: int | None = None
    seed: int | None = None
    rhs_norm: float = 1.0
    register: StateVector | None = field(default=None, repr=False)
    answer_offset: int = 0

    def __post_init__(self):
        norm = np.linalg.norm(self.solution)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"solution must be normalized, norm={norm}")

    def to_dict(self) -> dict:
        sol = self.solution
        return {
            "solution": [float(x) for x in sol.real] if not np.any(np.abs(sol.imag) > 1e-12)
            else [[float(x.real), float(x.imag)] for x in sol],
            "success_probability": self.success_probability,
            "clock_qubits": self.clock_qubits,
            "time_scale": self.time_scale,
            "constant": self.constant,
            "mode": self.mode,
            "shots": self.shots,
            "seed": self.seed,
            "rhs_norm": self.rhs_norm,
        }


# ---------------------------------------------------------------- systems

def pad_system(sys: LinearSystem) -> LinearSystem:
    """Pad to the next power of two with identity rows and zero rhs."""
    n = sys.size
    size = 1 << max(1, (n - 1).bit_length())
    if size == n:
        return sys
    a = np.eye(size, dtype=np.complex128)
    a[:n, :n] = sys.matrix
    b = np.zeros(size, dtype=np.complex128)
    b[:n] = sys.rhs
    return LinearSystem(a, b, sys.answer)


def build_portfolio_system(spec: PortfolioSpec) -> LinearSystem:
    """Stationarity conditions of the Lagrangian, unknowns (lambda, mu, w_1..w_n).

    Rows: [0 0 R^T; 0 0 P^T; R P C] with right side (G, B, 0...).
    """
    n = spec.returns.size
    size = n + 2
    a = np.zeros((size, size))
    a[0, 2:] = spec.returns
    a[1, 2:] = spec.prices
    a[2:, 0] = spec.returns
    a[2:, 1] = spec.prices
    a[2:, 2:] = spec.covariance
    b = np.zeros(size)
    b[0], b[1] = spec.gain, spec.budget
    return pad_system(LinearSystem(a, b, (0, size)))


def portfolio_weights(solution: Sequence[float], num_assets: int) -> np.ndarray:
    """Weights (entries 2..) of a (lambda, mu, w...) solution, rescaled to sum to 1."""
    w = np.real_if_close(np.asarray(solution)[2:2 + num_assets])
    return np.asarray(w, dtype=float) / np.sum(w)


def hermitian_embed(sys: LinearSystem) -> LinearSystem:
    """[[0, A], [A^dag, 0]] (y, x) = (b, 0); the answer is the x block."""
    if sys.hermitian:
        return sys
    n = sys.size
    a = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    a[:n, n:] = sys.matrix
    a[n:, :n] = sys.matrix.conj().T
    b = np.concatenate([sys.rhs, np.zeros(n)])
    lo, hi = sys.answer
    return LinearSystem(a, b, (n + lo, n + hi))


def classical_solve(sys: LinearSystem) -> ClassicalSolution:
    """Direct solve plus the spectrum of A (Hermitian) or its singular values."""
    a, b = sys.matrix, sys.rhs
    if sys.hermitian:
        eig = np.linalg.eigvalsh(a)
        mags = np.abs(eig)
    else:
        eig = np.linalg.eigvals(a)
        mags = np.linalg.svd(a, compute_uv=False)
    if mags.min() <= 1e-12 * max(mags.max(), 1.0):
        raise SingularSystemError("matrix is singular or numerically rank deficient")
    kappa = float(mags.max() / mags.min())
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    lo, hi = sys.answer
    x = x[lo:hi]
    if not np.any(x.imag) or np.max(np.abs(x.imag)) < 1e-14:
        x = x.real
    eig = np.sort(eig.real) if sys.hermitian else eig
    return ClassicalSolution(x, x / np.linalg.norm(x), eig, kappa)


# ---------------------------------------------------------------- circuits

def _state_prep_unitary(b: np.ndarray) -> np.ndarray:
    """Unitary whose first column is the unit vector ``b`` (Householder reflection)."""
    b = np.asarray(b, dtype=np.complex128)
    phase = np.exp(1j * np.angle(b[0])) if abs(b[0]) > 0 else 1.0
    w = b / phase
    v = -w.copy()
    v[0] += 1.0
    nv = np.vdot(v, v).real
    h = np.eye(b.size, dtype=np.complex128)
    if nv > 1e-30:
        h -= 2.0 * np.outer(v, v.conj()) / nv
    return phase * h


def evolution_unitary(matrix: np.ndarray, time: float) -> np.ndarray:
    """exp(i A time) from the Hermitian eigendecomposition."""
    lam, vecs = np.linalg.eigh(matrix)
    return (vecs * np.exp(1j * lam * time)) @ vecs.conj().T


def gershgorin_bound(matrix: np.ndarray) -> float:
    """Upper bound on |lambda|: the largest absolute row sum."""
    return float(np.max(np.sum(np.abs(matrix), axis=1)))


def default_time_scale(matrix: np.ndarray, t: int) -> float:
    """tau with every |lambda| tau / 2pi <= (2^(t-1) - 1) / 2^t, so no eigenvalue wraps."""
    bound = gershgorin_bound(matrix)
    if bound == 0:
        raise SingularSystemError("zero matrix")
    return 2 * math.pi * ((1 << (t - 1)) - 1) / (1 << t) / bound


def clock_eigenvalues(t: int, time_scale: float) -> np.ndarray:
    """Eigenvalue estimate for each clock value s (two's complement)."""
    s = np.arange(1 << t)
    signed = np.where(s < (1 << (t - 1)), s, s - (1 << t))
    return signed * 2 * math.pi / (time_scale * (1 << t))


def inversion_angles(t: int, time_scale: float, constant: float) -> np.ndarray:
    """2 asin(C / lambda_s) per clock value; 0 for s = 0."""
    lam = clock_eigenvalues(t, time_scale)
    ratio = np.divide(constant, lam, out=np.zeros_like(lam), where=lam != 0)
    return 2 * np.arcsin(np.clip(ratio, -1.0, 1.0))


def phase_estimation_circuit(unitary: np.ndarray, t: int, num_qubits: int | None = None) -> CircuitSpec:
    """Hadamards, controlled U^(2^(t-1-j)) from clock j, inverse QFT; system after the clock."""
    m = unitary.shape[0].bit_length() - 1
    total = num_qubits or t + m
    circ = CircuitSpec(total)
    for j in range(t):
        circ.add("H", j)
    system = list(range(t, t + m))
    power = unitary
    powers = []
    for _ in range(t):
        powers.append(power)
        power = power @ power
    for j in range(t):
        circ.add_unitary(powers[t - 1 - j], system, label=f"U^{1 << (t - 1 - j)}", controls=[j])
    return circ.extend(inverse_qft(t))


def phase_estimate(matrix: np.ndarray, state: Sequence[complex], t: int, time_scale: float) -> np.ndarray:
    """Distribution of the clock register after phase estimation of exp(i A tau) on ``state``."""
    u = evolution_unitary(np.asarray(matrix, dtype=np.complex128), time_scale)
    m = u.shape[0].bit_length() - 1
    start = sv.zero_state(t).tensor(StateVector(state, normalize=True))
    out = run(phase_estimation_circuit(u, t), start)
    probs = sv.probabilities(out).reshape(1 << t, 1 << m)
    return probs.sum(axis=1)


def hhl_circuit(sys: LinearSystem, t: int, time_scale: float, constant: float) -> CircuitSpec:
    """Full HHL circuit (prepare b, estimate, invert, uncompute); measurement is left to the caller."""
    m = sys.size.bit_length() - 1
    total = t + m + 1
    system = list(range(t, t + m))
    ancilla = t + m
    b = sys.rhs / np.linalg.norm(sys.rhs)
    circ = CircuitSpec(total)
    circ.add_unitary(_state_prep_unitary(b), system, label="PREP_B")
    qpe = phase_estimation_circuit(evolution_unitary(sys.matrix, time_scale), t, total)
    circ.extend(qpe)
    circ.extend(multiplexed_ry(inversion_angles(t, time_scale, constant), list(range(t)), ancilla, total))
    circ.extend(qpe.inverse())
    return circ


def _check_hhl_input(sys: LinearSystem, t: int) -> int:
    if not sys.hermitian:
        raise ValueError("HHL needs a Hermitian matrix; call hermitian_embed first")
    n = sys.size
    if n < 2 or n & (n - 1):
        raise ValueError(f"system size must be a power of two, got {n}; call pad_system first")
    if t < 2:
        raise ValueError("need at least 2 clock qubits")
    if not np.any(sys.rhs):
        raise ValueError("rhs must be nonzero")
    m = n.bit_length() - 1
    if t + m + 1 > sv.MAX_QUBITS:
        raise CapacityError(f"{t + m + 1} qubits exceed the simulator cap of {sv.MAX_QUBITS}")
    return m


def hhl_solve(
    sys: LinearSystem,
    t: int,
    time_scale: float | None = None,
    mode: str = EXACT,
    shots: int | None = None,
    seed: int = 0,
    constant: float | None = None,
) -> HhlResult:
    """Run HHL and post-select ancilla = 1 with the clock back at 0.

    Exact mode returns signed amplitudes of the post-selected system register.
    Sampled mode estimates magnitudes from the post-selected counts.
    """
    m = _check_hhl_input(sys, t)
    if mode not in (EXACT, SAMPLED):
        raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    if mode == SAMPLED and (shots is None or shots < 1):
        raise ValueError("sampled mode needs shots >= 1")
    if time_scale is None:
        time_scale = default_time_scale(sys.matrix, t)
    if constant is None:
        constant = C_SAFETY * 2 * math.pi / (time_scale * (1 << t))
    state = run(hhl_circuit(sys, t, time_scale, constant))
    amps = state.amplitudes.reshape(1 << t, 1 << m, 2)
    branch = amps[0, :, 1]
    success = float(np.vdot(branch, branch).real)
    if success < MIN_SUCCESS_PROBABILITY:
        raise PostSelectionError(f"HHL success probability {success:.3e} is below {MIN_SUCCESS_PROBABILITY}")
    if mode == EXACT:
        vec = branch / math.sqrt(success)
    else:
        counts = sv.sample(state, shots, seed)
        hits = np.zeros(1 << m)
        prefix = "0" * t
        for key, c in counts.counts.items():
            if key.startswith(prefix) and key[-1] == "1":
                hits[int(key[t:t + m], 2)] += c
        if hits.sum() == 0:
            raise PostSelectionError("no shot survived post-selection")
        vec = np.sqrt(hits / hits.sum()).astype(np.complex128)
    if np.max(np.abs(vec.imag)) < 1e-12:
        vec = vec.real
    lo, hi = sys.answer
    sol = vec[lo:hi]
    sol = sol / np.linalg.norm(sol)
    register = StateVector(vec, normalize=True)
    return HhlResult(sol, success, t, time_scale, constant, mode,
                     shots if mode == SAMPLED else None, seed if mode == SAMPLED else None,
                     float(np.linalg.norm(sys.rhs)), register, lo)


def expected_success_probability(sys: LinearSystem, constant: float) -> float:
    """sum_i |beta_i C / lambda_i|^2 for b = sum_i beta_i |u_i>."""
    lam, vecs = np.linalg.eigh(sys.matrix)
    beta = vecs.conj().T @ (sys.rhs / np.linalg.norm(sys.rhs))
    return float(np.sum(np.abs(beta * constant / lam) ** 2))


# ---------------------------------------------------------------- 2x2 reference

REFERENCE_R = 2.65


def hhl_2x2_circuit(theta: float, r: float = REFERENCE_R) -> CircuitSpec:
    """Hand-built circuit for [[1.5, 0.5], [0.5, 1.5]] x = (cos theta, sin theta).

    q0, q1: clock; q2: b / x; q3: ancilla; q4: unused.
    exp(i pi A) = exp(i 3pi/2) Rx(-pi): a U1 phase on the control plus a controlled Rx.
    """
    c = CircuitSpec(5)
    c.add("H", 0).add("H", 1)
    c.add("RY", 2, [2 * theta])
    c.add("U1", 0, [3 * math.pi / 2]).add("RX", 2, [-math.pi], controls=0)
    c.add("U1", 1, [3 * math.pi / 4]).add("RX", 2, [-math.pi / 2], controls=1)
    # inverse QFT on the clock
    c.add("SWAP", [0, 1]).add("H", 1).add("U1", 1, [-math.pi / 2], controls=0).add("H", 0)
    # eigenvalue inversion
    c.add("SWAP", [0, 1])
    c.add("RY", 3, [2 * math.pi / 2**r], controls=0)
    c.add("RY", 3, [math.pi / 2**r], controls=1)
    # uncompute
    c.add("SWAP", [0, 1])
    c.add("H", 0).add("U1", 1, [math.pi / 2], controls=0).add("H", 1).add("SWAP", [0, 1])
    c.add("RX", 2, [math.pi / 2], controls=1).add("U1", 1, [-3 * math.pi / 4])
    c.add("RX", 2, [math.pi], controls=0).add("U1", 0, [-3 * math.pi / 2])
    c.add("H", 0).add("H", 1)
    return c


def hhl_2x2_reference(theta: float, mode: str = SAMPLED, shots: int | None = 8192, seed: int = 0) -> HhlResult:
    """Normalized (|x0|, |x1|) from the fixed circuit, post-selecting q3 = 1 and q0 = q1 = 0."""
    if not 0 < theta < math.pi / 2:
        raise ValueError("theta must lie in (0, pi/2)")
    state = run(hhl_2x2_circuit(theta))
    p = sv.probabilities(state)
    keep = {0b00010: 0, 0b00110: 1}  # q0 q1 q2 q3 q4 with q3 = 1
    success = float(p[0b00010] + p[0b00110])
    if mode == EXACT:
        weights = np.array([p[0b00010], p[0b00110]])
    elif mode == SAMPLED:
        if shots is None or shots < 1:
            raise ValueError("sampled mode needs shots >= 1")
        counts = sv.sample(state, shots, seed)
        weights = np.zeros(2)
        for key, idx in keep.items():
            weights[idx] = counts.counts.get(format(key, "05b"), 0)
    else:
        raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    if weights.sum() == 0:
        raise PostSelectionError("no shot survived post-selection")
    sol = np.sqrt(weights / weights.sum())
    return HhlResult(sol, success, 2, math.pi, 2 * math.pi / 2**REFERENCE_R, mode,
                     shots if mode == SAMPLED else None, seed if mode == SAMPLED else None,
                     1.0, StateVector(sol), 0)


# ---------------------------------------------------------------- consumers

def _register(result: HhlResult) -> StateVector:
    if result.register is None:
        return StateVector(result.solution, normalize=True)
    return result.register


def extract_component(result: HhlResult, index: int, shots: int | None = None, seed: int = 0) -> float:
    """|x_index| of the normalized solution, via a swap test against |index> when shots are given."""
    if not 0 <= index < result.solution.size:
        raise ValueError(f"index {index} out of range for {result.solution.size} components")
    reg = _register(result)
    target = sv.basis_state(reg.num_qubits, index + result.answer_offset)
    scale = np.linalg.norm(reg.amplitudes[result.answer_offset:result.answer_offset + result.solution.size])
    if shots is None:
        return abs(reg.inner(target)) / scale
    return swap_test(reg, target, shots, seed) / scale


def portfolio_similarity(result: HhlResult, current: Sequence[complex], shots: int | None = None,
                         seed: int = 0) -> float:
    """|<x_opt|x_current>|; 1 means identical composition, 0 orthogonal."""
    cur = np.asarray(current, dtype=np.complex128).reshape(-1)
    if cur.size != result.solution.size:
        raise ValueError(f"current portfolio has {cur.size} entries, solution has {result.solution.size}")
    if abs(np.linalg.norm(cur) - 1.0) > 1e-9:
        raise ValueError("current portfolio state must be normalized")
    opt = np.zeros(1 << max(1, (result.solution.size - 1).bit_length()), dtype=np.complex128)
    opt[:result.solution.size] = result.solution
    other = np.zeros_like(opt)
    other[:cur.size] = cur
    if shots is None:
        return abs(np.vdot(opt, other))
    return swap_test(StateVector(opt), StateVector(other), shots, seed)

"""QUBO models, their Ising form, and a sampled QAOA loop.

Bitstrings are read with variable 0 first (leftmost), matching qubit 0.
A spin z_i = +1 corresponds to x_i = 0, i.e. x = (1 - z) / 2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import statevector as sv
from .circuits import CircuitSpec, run
from .statevector import CapacityError, MeasurementCounts

MAX_BRUTE_FORCE = 24


@dataclass(frozen=True, eq=False)
class QuboTask:
    """f(x) = x^T A x + b^T x + c over x in {0,1}^n."""

    quadratic: np.ndarray
    linear: np.ndarray
    constant: float = 0.0
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        a = np.array(self.quadratic, dtype=float)
        b = np.array(self.linear, dtype=float).reshape(-1)
        n = b.size
        if n < 1:
            raise ValueError("need at least one variable")
        if a.shape != (n, n):
            raise ValueError(f"quadratic has shape {a.shape}, expected ({n}, {n})")
        labels = tuple(self.labels) or tuple(f"x{i}" for i in range(n))
        if len(labels) != n:
            raise ValueError("one label per variable")
        object.__setattr__(self, "quadratic", a)
        object.__setattr__(self, "linear", b)
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "labels", labels)

    @property
    def num_vars(self) -> int:
        return self.linear.size

    def value(self, x: Sequence[int] | str) -> float:
        v = _bits(x, self.num_vars).astype(float)
        return float(v @ self.quadratic @ v + self.linear @ v + self.constant)

    def values(self, xs: np.ndarray) -> np.ndarray:
        """Objective for each row of a 0/1 matrix."""
        xs = np.asarray(xs, dtype=float)
        return np.einsum("ki,ij,kj->k", xs, self.quadratic, xs) + xs @ self.linear + self.constant


@dataclass(frozen=True, eq=False)
class IsingModel:
    """E(z) = sum_{i<j} Q_ij z_i z_j + sum_i h_i z_i + offset, z in {-1,+1}^n."""

    couplings: np.ndarray
    fields: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        q = np.array(self.couplings, dtype=float)
        h = np.array(self.fields, dtype=float).reshape(-1)
        if q.shape != (h.size, h.size):
            raise ValueError("couplings must be n x n")
        if np.any(np.tril(q) != 0):
            raise ValueError("couplings must be strictly upper triangular")
        object.__setattr__(self, "couplings", q)
        object.__setattr__(self, "fields", h)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def num_spins(self) -> int:
        return self.fields.size

    def energy(self, z: Sequence[int]) -> float:
        s = np.asarray(z, dtype=float)
        return float(s @ self.couplings @ s + self.fields @ s + self.offset)

    def energy_of_bits(self, x: Sequence[int] | str) -> float:
        return self.energy(1 - 2 * _bits(x, self.num_spins))


@dataclass(frozen=True)
class QaoaConfig:
    depth: int = 1
    shots: int = 1024
    seed: int = 0
    max_iterations: int = 200
    tolerance: float = 1e-3
    restarts: int = 3
    method: str = "COBYLA"

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.shots < 1 or self.restarts < 1 or self.max_iterations < 1:
            raise ValueError("shots, restarts and max_iterations must be positive")


@dataclass
class QaoaResult:
    bitstring: str
    objective: float
    iterations: int
    trace: list[dict] = field(default_factory=list)
    converged: bool = True
    best_parameters: tuple[list[float], list[float]] = ((), ())

    def to_dict(self) -> dict:
        return {
            "bitstring": self.bitstring,
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "best_parameters": {"betas": list(self.best_parameters[0]),
                                "gammas": list(self.best_parameters[1])},
            "trace": self.trace,
        }


@dataclass
class BruteForceTable:
    bitstrings: list[str]
    objectives: np.ndarray
    feasible: np.ndarray | None
    optimum: tuple[str, float]
    feasible_optimum: tuple[str, float] | None = None

    def rows(self) -> list[dict]:
        out = []
        for i, (s, v) in enumerate(zip(self.bitstrings, self.objectives)):
            row = {"index": i, "bitstring": s, "objective": float(v)}
            if self.feasible is not None:
                row["feasible"] = bool(self.feasible[i])
            out.append(row)
        return out


def _bits(x: Sequence[int] | str, n: int) -> np.ndarray:
    if isinstance(x, str):
        if len(x) != n or set(x) - {"0", "1"}:
            raise ValueError(f"bad bitstring {x!r} for {n} variables")
        return np.array([int(c) for c in x])
    v = np.asarray(x, dtype=int).reshape(-1)
    if v.size != n or np.any((v != 0) & (v != 1)):
        raise ValueError(f"expected {n} binary values, got {x!r}")
    return v


# ---------------------------------------------------------------- modelling

def build_portfolio_qubo(
    returns: Sequence[float],
    covariance: np.ndarray,
    m: int,
    lambdas: tuple[float, float, float] = (1.0, 4.0, 1.0),
    labels: Sequence[str] = (),
) -> QuboTask:
    """-l1 r.x + l2 x^T C x + l3 (sum x - m)^2, expanded into (A, b, c)."""
    r = np.asarray(returns, dtype=float).reshape(-1)
    cov = np.asarray(covariance, dtype=float)
    n = r.size
    if cov.shape != (n, n):
        raise ValueError(f"covariance has shape {cov.shape}, expected ({n}, {n})")
    if np.max(np.abs(cov - cov.T)) > 1e-12:
        raise ValueError("covariance must be symmetric")
    if not 0 <= m <= n:
        raise ValueError(f"m must lie in [0, {n}]")
    l1, l2, l3 = lambdas
    a = l2 * cov + l3 * np.ones((n, n))
    b = -(l1 * r + 2 * m * l3 * np.ones(n))
    return QuboTask(a, b, l3 * m**2, tuple(labels))


def exactly_m_ones(m: int) -> Callable[[str], bool]:
    return lambda bits: bits.count("1") == m


def qubo_to_ising(task: QuboTask) -> IsingModel:
    """Substitute x = (1 - z)/2 after folding x_i^2 = x_i and A + A^T into the upper triangle."""
    n = task.num_vars
    a = task.quadratic
    lin = task.linear + np.diag(a)
    upper = np.triu(a + a.T, k=1)
    q = upper / 4
    h = -lin / 2 - (upper.sum(axis=1) + upper.sum(axis=0)) / 4
    offset = task.constant + lin.sum() / 2 + upper.sum() / 4
    return IsingModel(q, h.reshape(n), offset)


# ---------------------------------------------------------------- circuits

def qaoa_ansatz(ising: IsingModel, betas: Sequence[float], gammas: Sequence[float]) -> CircuitSpec:
    """H layer, then per depth: ZZ terms as CNOT-Rz-CNOT, Z terms as Rz, and an Rx mixer."""
    betas, gammas = list(betas), list(gammas)
    if len(betas) != len(gammas) or not betas:
        raise ValueError("betas and gammas must have the same nonzero length")
    n = ising.num_spins
    circ = CircuitSpec(n)
    for q in range(n):
        circ.add("H", q)
    for beta, gamma in zip(betas, gammas):
        for i, j in itertools.combinations(range(n), 2):
            w = ising.couplings[i, j]
            if w != 0:
                circ.add("X", j, controls=i)
                circ.add("RZ", j, [2 * gamma * w])
                circ.add("X", j, controls=i)
        for i in range(n):
            if ising.fields[i] != 0:
                circ.add("RZ", i, [2 * gamma * ising.fields[i]])
        for q in range(n):
            circ.add("RX", q, [2 * beta])
    return circ


def expected_energy(ising: IsingModel, counts: MeasurementCounts) -> float:
    """Shot-weighted mean Ising energy of the sampled bitstrings."""
    if not counts.counts:
        raise ValueError("empty counts")
    total = sum(counts.counts.values())
    return sum(c * ising.energy_of_bits(s) for s, c in counts.counts.items()) / total


# ---------------------------------------------------------------- solvers

def brute_force(task: QuboTask, feasibility: Callable[[str], bool] | None = None) -> BruteForceTable:
    """Evaluate every bitstring; row k is the binary expansion of k with variable 0 leftmost."""
    n = task.num_vars
    if n > MAX_BRUTE_FORCE:
        raise CapacityError(f"brute force is limited to {MAX_BRUTE_FORCE} variables")
    total = 1 << n
    shifts = np.arange(n - 1, -1, -1)
    values = np.empty(total)
    chunk = 1 << 16
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        xs = (idx[:, None] >> shifts) & 1
        values[start:start + idx.size] = task.values(xs)
    strings = [format(k, f"0{n}b") for k in range(total)]
    best = int(np.argmin(values))
    feas = None
    feasible_best = None
    if feasibility is not None:
        feas = np.array([bool(feasibility(s)) for s in strings])
        if feas.any():
            k = int(np.flatnonzero(feas)[np.argmin(values[feas])])
            feasible_best = (strings[k], float(values[k]))
    return BruteForceTable(strings, values, feas, (strings[best], float(values[best])), feasible_best)


def _eval_seed(seed: int, restart: int, evaluation: int) -> int:
    return int(np.random.SeedSequence([seed, restart, evaluation]).generate_state(1, dtype=np.uint64)[0])


def qaoa_solve(task: QuboTask, config: QaoaConfig = QaoaConfig()) -> QaoaResult:
    """Minimize the sampled Ising energy over (beta, gamma); report the best string ever sampled.

    Each restart starts from a seeded random point in [0, pi]^(2p).
    """
    n = task.num_vars
    if n > sv.MAX_QUBITS:
        raise CapacityError(f"{n} variables exceed the simulator cap of {sv.MAX_QUBITS}")
    ising = qubo_to_ising(task)
    p = config.depth
    starts = np.random.Generator(np.random.PCG64(config.seed)).uniform(0, math.pi, size=(config.restarts, 2 * p))
    best = {"bits": None, "value": math.inf, "params": None}
    trace: list[dict] = []
    cache: dict[str, float] = {}
    iterations = 0
    converged = False

    for restart, x0 in enumerate(starts):
        counter = [0]

        def objective(params, restart=restart, counter=counter):
            betas, gammas = params[:p], params[p:]
            state = run(qaoa_ansatz(ising, betas, gammas))
            counts = sv.sample(state, config.shots, _eval_seed(config.seed, restart, counter[0]))
            counter[0] += 1
            energy = expected_energy(ising, counts)
            for s in counts.counts:
                if s not in cache:
                    cache[s] = task.value(s)
                if cache[s] < best["value"] or (cache[s] == best["value"] and s < best["bits"]):
                    best.update(bits=s, value=cache[s], params=(list(map(float, betas)), list(map(float, gammas))))
            trace.append({"restart": restart, "evaluation": counter[0], "betas": list(map(float, betas)),
                          "gammas": list(map(float, gammas)), "energy": energy,
                          "best_objective": best["value"]})
            return energy

        res = minimize(objective, x0, method=config.method,
                       options={"maxiter": config.max_iterations, "rhobeg": 0.5, "tol": config.tolerance}
                       if config.method.upper() == "COBYLA"
                       else {"maxiter": config.max_iterations})
        iterations += counter[0]
        converged = converged or bool(res.success)

    return QaoaResult(best["bits"], float(best["value"]), iterations, trace, converged,
                      best["params"] or ([], []))


# ---------------------------------------------------------------- integer weights

@dataclass(frozen=True)
class IntegerEncoding:
    """w_i = sum_j 2^j x_(i*m + j)."""

    num_assets: int
    bits_per_weight: int

    @property
    def num_vars(self) -> int:
        return self.num_assets * self.bits_per_weight

    @property
    def max_weight(self) -> int:
        return (1 << self.bits_per_weight) - 1

    def index(self, asset: int, bit: int) -> int:
        if not (0 <= asset < self.num_assets and 0 <= bit < self.bits_per_weight):
            raise ValueError("asset or bit out of range")
        return asset * self.bits_per_weight + bit

    def matrix(self) -> np.ndarray:
        """E with w = E x."""
        e = np.zeros((self.num_assets, self.num_vars))
        for i in range(self.num_assets):
            for j in range(self.bits_per_weight):
                e[i, self.index(i, j)] = 1 << j
        return e

    def decode(self, x: Sequence[int] | str) -> np.ndarray:
        return (self.matrix() @ _bits(x, self.num_vars)).astype(int)

    def expand(self, quadratic: np.ndarray, linear: Sequence[float], constant: float = 0.0) -> QuboTask:
        """Rewrite w^T A w + b^T w + c as a QUBO over the bits."""
        e = self.matrix()
        a = np.asarray(quadratic, dtype=float)
        b = np.asarray(linear, dtype=float)
        labels = tuple(f"w{i}_b{j}" for i in range(self.num_assets) for j in range(self.bits_per_weight))
        return QuboTask(e.T @ a @ e, e.T @ b, constant, labels)


def encode_integer_weights(num_assets: int, bits_per_weight: int) -> IntegerEncoding:
    if num_assets < 1 or bits_per_weight < 1:
        raise ValueError("num_assets and bits_per_weight must be positive")
    if num_assets * bits_per_weight > sv.MAX_QUBITS:
        raise CapacityError(f"{num_assets * bits_per_weight} binary variables exceed {sv.MAX_QUBITS} qubits")
    return IntegerEncoding(num_assets, bits_per_weight)

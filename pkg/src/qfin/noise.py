"""Shot-level T1 relaxation and T2 dephasing during idle (identity) steps.

Each shot is an independent trajectory. Relaxation: start in |1>, every idle
step decays |1> -> |0> with probability 1 - exp(-tau/T1). Dephasing: start in
|+>, every step applies Z with probability (1 - exp(-tau/T2)) / 2, finish with
H and measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .statevector import make_rng


@dataclass(frozen=True)
class NoiseParams:
    """Times in microseconds."""

    t1: float
    t2: float
    idle_step: float = 0.1

    def __post_init__(self):
        if self.t1 <= 0 or self.t2 <= 0 or self.idle_step <= 0:
            raise ValueError("T1, T2 and idle_step must be positive")


@dataclass
class DecoherenceCurve:
    idles: np.ndarray
    p1: np.ndarray
    expected: np.ndarray
    shots: int
    seed: int
    channel: str

    def std_errors(self) -> np.ndarray:
        return np.sqrt(self.expected * (1 - self.expected) / self.shots)

    def max_z(self) -> float:
        """Largest |observed - expected| in binomial standard errors (0/0 counts as 0)."""
        se = self.std_errors()
        dev = np.abs(self.p1 - self.expected)
        z = np.divide(dev, se, out=np.where(dev > 0, np.inf, 0.0), where=se > 0)
        return float(z.max())

    def to_csv(self) -> str:
        lines = ["k,p1,expected"]
        lines += [f"{k},{p:.6f},{e:.6f}" for k, p, e in zip(self.idles, self.p1, self.expected)]
        return "\n".join(lines) + "\n"


def decay_probability(t: float, T: float) -> float:
    """1 - exp(-t/T)."""
    if t < 0 or T <= 0:
        raise ValueError("need t >= 0 and T > 0")
    return -math.expm1(-t / T)


def _check(max_idles: int, shots: int) -> None:
    if max_idles < 0:
        raise ValueError("max_idles must be >= 0")
    if shots < 1:
        raise ValueError("shots must be >= 1")


def relaxation_experiment(params: NoiseParams, max_idles: int, shots: int = 8192, seed: int = 0) -> DecoherenceCurve:
    """P(1) after k = 0..max_idles idle steps, a fresh batch of shots per k."""
    _check(max_idles, shots)
    p = decay_probability(params.idle_step, params.t1)
    rng = make_rng(seed)
    ks = np.arange(max_idles + 1)
    p1 = np.empty(ks.size)
    for k in ks:
        if p == 0:
            survived = np.ones(shots, dtype=bool)
        else:
            # step at which each shot first decays; it still reads 1 if that is after step k
            first_decay = rng.geometric(p, size=shots)
            survived = first_decay > k
        p1[k] = survived.mean()
    expected = np.exp(-ks * params.idle_step / params.t1)
    return DecoherenceCurve(ks, p1, expected, shots, seed, "relaxation")


def dephasing_experiment(params: NoiseParams, max_idles: int, shots: int = 8192, seed: int = 0) -> DecoherenceCurve:
    """P(1) after |+>, k idle steps, H; an odd number of phase flips reads 1."""
    _check(max_idles, shots)
    q = decay_probability(params.idle_step, params.t2) / 2
    rng = make_rng(seed)
    ks = np.arange(max_idles + 1)
    p1 = np.empty(ks.size)
    for k in ks:
        flips = rng.binomial(k, q, size=shots)
        p1[k] = (flips % 2 == 1).mean()
    expected = (1 - np.exp(-ks * params.idle_step / params.t2)) / 2
    return DecoherenceCurve(ks, p1, expected, shots, seed, "dephasing")

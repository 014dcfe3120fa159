from __future__ import annotations

import numpy as np
from scipy.stats import chi2


def chi_square_ok(counts: dict[str, int], probs: np.ndarray, shots: int, quantile: float = 0.999) -> bool:
    """Pearson test of sampled counts against ``probs``; cells with expectation < 5 are pooled."""
    n = int(np.log2(probs.size))
    observed = np.array([counts.get(format(i, f"0{n}b"), 0) for i in range(probs.size)], dtype=float)
    expected = probs * shots
    big = expected >= 5
    obs = list(observed[big])
    exp = list(expected[big])
    if (~big).any():
        obs.append(observed[~big].sum())
        exp.append(expected[~big].sum())
    obs, exp = np.array(obs), np.array(exp)
    keep = exp > 0
    if np.any(obs[~keep] > 0):
        return False
    obs, exp = obs[keep], exp[keep]
    if obs.size < 2:
        return True
    stat = float(((obs - exp) ** 2 / exp).sum())
    return stat < chi2.ppf(quantile, obs.size - 1)


def random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))

"""Risk metrics of a discretized P/L distribution via amplitude encoding.

The distribution is loaded on qubits 0..n-1 and a multiplexed Ry writes
f(i) into the ancilla (qubit n), so that P(ancilla = 1) = sum_i p_i f(i).
Results are expressed in bin units; bin 0 holds the worst losses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from . import statevector as sv
from .circuits import CircuitSpec, run
from .encoding import multiplexed_ry, prepare_distribution

EXACT = "exact"
SAMPLED = "sampled"

# width of one bin in bp: 65/3 for 8 bins and 65/7 for 16 bins
FIXTURE_RANGES = {8: (-4 * 65 / 3, 4 * 65 / 3), 16: (-8 * 65 / 7, 8 * 65 / 7)}


@dataclass(frozen=True)
class DiscreteDistribution:
    probabilities: np.ndarray
    bin_edges: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float).reshape(-1)
        n = p.size.bit_length() - 1
        if p.size < 2 or (1 << n) != p.size:
            raise ValueError(f"number of bins must be a power of two >= 2, got {p.size}")
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum():.12g}, expected 1")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)
        if self.bin_edges is not None:
            e = np.array(self.bin_edges, dtype=float).reshape(-1)
            if e.size != p.size + 1 or np.any(np.diff(e) <= 0):
                raise ValueError("bin_edges must be increasing with one more entry than bins")
            e.setflags(write=False)
            object.__setattr__(self, "bin_edges", e)

    @property
    def num_bins(self) -> int:
        return self.probabilities.size

    @property
    def num_qubits(self) -> int:
        return self.num_bins.bit_length() - 1

    @property
    def bin_width(self) -> float | None:
        if self.bin_edges is None:
            return None
        return float(self.bin_edges[1] - self.bin_edges[0])

    @classmethod
    def from_weights(cls, weights: Sequence[float], bin_edges=None, label: str = "") -> "DiscreteDistribution":
        """Accept weights that sum to 1 or to 100 (percent), up to rounding of 1e-3 relative."""
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if abs(total - 100.0) <= 0.1:
            w = w / 100.0
        elif abs(total - 1.0) > 1e-3:
            raise ValueError(f"weights sum to {total:.9g}; expected 1 or 100")
        # absorb the rounding of published percentages
        return cls(w / w.sum(), bin_edges, label)


@dataclass
class RiskReport:
    expected_value_bins: float
    std_dev_bins: float
    var_bins: dict[float, int]
    cvar_bins: dict[float, float]
    shots: int | None = None
    seed: int | None = None
    backend: str = EXACT
    variance_clamped: bool = False
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "expected_value_bins": self.expected_value_bins,
            "std_dev_bins": self.std_dev_bins,
            "var_bins": {f"{a:g}": v for a, v in self.var_bins.items()},
            "cvar_bins": {f"{a:g}": v for a, v in self.cvar_bins.items()},
            "variance_clamped": self.variance_clamped,
            "shots": self.shots,
            "seed": self.seed,
            "bounds": {k: list(v) for k, v in self.bounds.items()},
        }


# ---------------------------------------------------------------- inputs

def parse_probability_array(text: str) -> np.ndarray:
    """Whitespace/comma separated reals; lines starting with '#' are ignored."""
    vals = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        vals.extend(float(tok) for tok in line.replace(",", " ").split())
    if not vals:
        raise ValueError("no probabilities found")
    return np.array(vals)


def load_fixture(num_bins: int) -> DiscreteDistribution:
    """Shipped 8- or 16-bin USD fixed-income P/L distribution with bp edges."""
    if num_bins not in FIXTURE_RANGES:
        raise ValueError("fixtures exist for 8 and 16 bins only")
    text = resources.files("qfin.data").joinpath(f"usd_fi_pl_{num_bins}bin.txt").read_text()
    lo, hi = FIXTURE_RANGES[num_bins]
    edges = np.linspace(lo, hi, num_bins + 1)
    return DiscreteDistribution.from_weights(parse_probability_array(text), edges, f"usd-fi-{num_bins}")


def discretize(
    pl_series: Iterable[float],
    num_bins: int,
    value_range: tuple[float, float],
    outlier_policy: str = "clip",
    label: str = "",
) -> DiscreteDistribution:
    """Histogram of a P/L series (bp) over uniform bins; bin 0 is the lowest P/L.

    ``outlier_policy`` is "clip" (pile outliers into the end bins) or "drop".
    """
    x = np.asarray(list(pl_series), dtype=float)
    if x.size == 0:
        raise ValueError("empty P/L series")
    if num_bins < 2 or num_bins & (num_bins - 1):
        raise ValueError(f"num_bins must be a power of two >= 2, got {num_bins}")
    lo, hi = map(float, value_range)
    if not lo < hi:
        raise ValueError("range must satisfy lo < hi")
    if outlier_policy == "clip":
        x = np.clip(x, lo, hi)
    elif outlier_policy == "drop":
        x = x[(x >= lo) & (x <= hi)]
        if x.size == 0:
            raise ValueError("every observation lies outside the range")
    else:
        raise ValueError(f"unknown outlier policy {outlier_policy!r}")
    edges = np.linspace(lo, hi, num_bins + 1)
    counts, _ = np.histogram(x, bins=edges)
    return DiscreteDistribution(counts / counts.sum(), edges, label)


# ---------------------------------------------------------------- circuits

def _check_mode(mode: str, shots: int | None) -> None:
    if mode not in (EXACT, SAMPLED):
        raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    if mode == SAMPLED and (shots is None or shots < 1):
        raise ValueError("sampled mode needs shots >= 1")


def _probe_seed(seed: int, *key: int) -> int:
    """Independent seed per probe circuit, derived from the user seed."""
    return int(np.random.SeedSequence([seed, *key]).generate_state(1, dtype=np.uint64)[0])


def function_circuit(dist: DiscreteDistribution, alphas: Sequence[float]) -> CircuitSpec:
    """State preparation followed by Ry(alphas[i]) on the ancilla when the data register holds i."""
    n = dist.num_qubits
    circ = prepare_distribution(dist.probabilities, num_qubits=n + 1)
    return circ.extend(multiplexed_ry(alphas, list(range(n)), n, n + 1))


def ancilla_one_probability(dist, alphas, mode=EXACT, shots=None, seed=0, probe=0) -> float:
    _check_mode(mode, shots)
    state = run(function_circuit(dist, alphas))
    n = dist.num_qubits
    if mode == EXACT:
        return sv.marginal_probability(state, n, 1)
    return sv.sample_marginal(state, n, shots, _probe_seed(seed, probe)) / shots


def _schedule(f: np.ndarray) -> np.ndarray:
    return 2 * np.arcsin(np.sqrt(np.clip(f, 0.0, 1.0)))


_PROBE_MEAN, _PROBE_SECOND, _PROBE_CVAR = 1, 2, 3
_PROBE_VAR = 1000


def expected_value(dist: DiscreteDistribution, mode: str = EXACT, shots: int | None = None,
                   seed: int = 0) -> float:
    """E[X] = P1 (N-1) with f(i) = i/(N-1)."""
    top = dist.num_bins - 1
    alphas = _schedule(np.arange(dist.num_bins) / top)
    return ancilla_one_probability(dist, alphas, mode, shots, seed, _PROBE_MEAN) * top


def second_moment(dist: DiscreteDistribution, mode: str = EXACT, shots: int | None = None,
                  seed: int = 0) -> float:
    """E[X^2] = P1 (N-1)^2 with f(i) = i^2/(N-1)^2."""
    top = dist.num_bins - 1
    alphas = _schedule((np.arange(dist.num_bins) / top) ** 2)
    return ancilla_one_probability(dist, alphas, mode, shots, seed, _PROBE_SECOND) * top**2


def _std_dev(dist, mode, shots, seed) -> tuple[float, bool]:
    mean = expected_value(dist, mode, shots, seed)
    var = second_moment(dist, mode, shots, seed) - mean**2
    if var < 0:
        # sampling noise (or rounding) can push the estimate just below zero
        return 0.0, True
    return math.sqrt(var), False


def std_dev(dist: DiscreteDistribution, mode: str = EXACT, shots: int | None = None,
            seed: int = 0) -> float:
    """sqrt(E[X^2] - E[X]^2), clamped at 0."""
    return _std_dev(dist, mode, shots, seed)[0]


def _var_search(dist, alpha, mode, shots, seed) -> tuple[int, dict[int, float]]:
    """Bisection over the threshold l; returns (VaR, measured P[X <= l] per probe)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    _check_mode(mode, shots)
    level = 1.0 - alpha
    p = dist.probabilities
    if level <= p[0]:
        return 0, {}
    probes: dict[int, float] = {}
    a, b = 0, dist.num_bins - 1
    while b - a > 1:
        mid = (a + b) // 2
        alphas = np.where(np.arange(dist.num_bins) <= mid, math.pi, 0.0)
        probes[mid] = ancilla_one_probability(dist, alphas, mode, shots, seed, _PROBE_VAR + mid)
        if probes[mid] >= level:
            b = mid
        else:
            a = mid
    return b, probes


def value_at_risk(dist: DiscreteDistribution, alpha: float, mode: str = EXACT,
                  shots: int | None = None, seed: int = 0) -> int:
    """Smallest bin l with P[X <= l] >= 1 - alpha, found by bisection on comparator probes."""
    return _var_search(dist, alpha, mode, shots, seed)[0]


def conditional_var(dist: DiscreteDistribution, alpha: float, mode: str = EXACT,
                    shots: int | None = None, seed: int = 0) -> float:
    """CVaR = P1 VaR / P[X <= VaR] with f(i) = i/VaR below VaR and 0 above."""
    var, probes = _var_search(dist, alpha, mode, shots, seed)
    if var == 0:
        return 0.0
    idx = np.arange(dist.num_bins)
    alphas = np.where(idx <= var, _schedule(idx / var), 0.0)
    p1 = ancilla_one_probability(dist, alphas, mode, shots, seed, _PROBE_CVAR)
    if mode == EXACT:
        tail = float(dist.probabilities[: var + 1].sum())
    elif var in probes:
        tail = probes[var]
    else:
        # VaR = N-1 is never probed, and P[X <= N-1] = 1
        tail = 1.0
    return p1 * var / tail


def quantum_risk_report(dist: DiscreteDistribution, alphas: Sequence[float] = (0.95, 0.99),
                        mode: str = EXACT, shots: int | None = None, seed: int = 0) -> RiskReport:
    sigma, clamped = _std_dev(dist, mode, shots, seed)
    report = RiskReport(
        expected_value_bins=expected_value(dist, mode, shots, seed),
        std_dev_bins=sigma,
        var_bins={a: value_at_risk(dist, a, mode, shots, seed) for a in alphas},
        cvar_bins={a: conditional_var(dist, a, mode, shots, seed) for a in alphas},
        shots=shots if mode == SAMPLED else None,
        seed=seed if mode == SAMPLED else None,
        backend=mode,
        variance_clamped=clamped,
    )
    report.bounds = report_bounds(report, dist)
    return report


# ---------------------------------------------------------------- classical

def classical_risk_oracle(dist: DiscreteDistribution, alphas: Sequence[float] = (0.95, 0.99)) -> RiskReport:
    """Closed-form sums over the bins."""
    p = dist.probabilities
    i = np.arange(dist.num_bins)
    mean = float(i @ p)
    var = float((i**2) @ p) - mean**2
    cdf = np.cumsum(p)
    vars_, cvars = {}, {}
    for a in alphas:
        level = 1.0 - a
        l = 0 if level <= p[0] else int(np.argmax(cdf >= level - 1e-15))
        vars_[a] = l
        cvars[a] = 0.0 if l == 0 else float(i[: l + 1] @ p[: l + 1] / cdf[l])
    report = RiskReport(mean, math.sqrt(max(var, 0.0)), vars_, cvars, backend="classical")
    report.bounds = report_bounds(report, dist)
    return report


def continuous_risk(pl_series: Iterable[float], alphas: Sequence[float] = (0.95, 0.99)) -> dict:
    """Mean, std, empirical VaR and CVaR of the raw series (bp), for side-by-side display."""
    x = np.sort(np.asarray(list(pl_series), dtype=float))
    if x.size == 0:
        raise ValueError("empty P/L series")
    out = {"expected_value": float(x.mean()), "std_dev": float(x.std(ddof=1)) if x.size > 1 else 0.0,
           "var": {}, "cvar": {}}
    for a in alphas:
        q = float(np.quantile(x, 1 - a))
        out["var"][f"{a:g}"] = q
        out["cvar"][f"{a:g}"] = float(x[x <= q].mean())
    return out


def bins_to_units(value_bins: float, edges: Sequence[float] | None) -> tuple[float, float]:
    """(lower edge of bin floor(v), upper edge of bin ceil(v)) in bp."""
    if edges is None:
        raise ValueError("distribution has no bin edges")
    e = np.asarray(edges, dtype=float)
    nb = e.size - 1
    if not -1e-9 <= value_bins <= nb - 1 + 1e-9:
        raise ValueError(f"bin value {value_bins} outside [0, {nb - 1}]")
    lo = min(max(math.floor(value_bins + 1e-9), 0), nb - 1)
    hi = min(max(math.ceil(value_bins - 1e-9), 0), nb - 1)
    return float(e[lo]), float(e[hi + 1])


def report_bounds(report: RiskReport, dist: DiscreteDistribution) -> dict[str, tuple[float, float]]:
    if dist.bin_edges is None:
        return {}
    e = dist.bin_edges
    out = {"expected_value": bins_to_units(report.expected_value_bins, e)}
    width = dist.bin_width
    out["std_dev"] = (report.std_dev_bins * width, report.std_dev_bins * width)
    for a, v in report.var_bins.items():
        out[f"var_{a:g}"] = bins_to_units(v, e)
    for a, v in report.cvar_bins.items():
        out[f"cvar_{a:g}"] = bins_to_units(v, e)
    return out

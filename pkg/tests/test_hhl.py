from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_unitary
from qfin.hhl import (
    EXACT,
    SAMPLED,
    LinearSystem,
    PortfolioSpec,
    SingularSystemError,
    build_portfolio_system,
    classical_solve,
    clock_eigenvalues,
    default_time_scale,
    expected_success_probability,
    extract_component,
    gershgorin_bound,
    hermitian_embed,
    hhl_2x2_reference,
    hhl_solve,
    inversion_angles,
    pad_system,
    phase_estimate,
    portfolio_similarity,
    portfolio_weights,
)
from qfin.statevector import CapacityError

TAU4 = 2 * math.pi / 16
BALANCE_EIGENVALUES = [-16.90792562, -0.36203117, 1.03367322, 18.84628357]


def balance_spec(gain=7.0):
    # percent units: returns in %, covariance in %^2 scaled to match the published spectrum
    return PortfolioSpec([[0.15, -0.43], [-0.43, 2.46]], [5.86, 16.78], [1, 1], gain, 1.0)


def diag_demo():
    return LinearSystem(np.diag([1.0, 2, 3, 4]), np.full(4, 0.5))


def hadamard_demo():
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    hh = np.kron(h, h)
    return LinearSystem(hh @ np.diag([1.0, 2, 3, 4]) @ hh, np.array([0, 1, 1, 0]) / math.sqrt(2))


def two_by_two(theta):
    return LinearSystem([[1.5, 0.5], [0.5, 1.5]], [math.cos(theta), math.sin(theta)])


# ---------------------------------------------------------------- classical side

def test_portfolio_system_layout():
    sys = build_portfolio_system(balance_spec())
    expected = np.array([[0, 0, 5.86, 16.78], [0, 0, 1, 1], [5.86, 1, 0.15, -0.43], [16.78, 1, -0.43, 2.46]])
    assert np.allclose(sys.matrix, expected)
    assert np.allclose(sys.rhs, [7, 1, 0, 0])
    assert sys.hermitian


def test_portfolio_eigenvalues_and_weights():
    sol = classical_solve(build_portfolio_system(balance_spec()))
    assert np.allclose(sol.eigenvalues, BALANCE_EIGENVALUES, atol=1e-6)
    w = portfolio_weights(sol.solution, 2)
    # the budget and gain rows alone pin the weights: w_fix = (16.78 - 7) / (16.78 - 5.86)
    assert w[0] == pytest.approx(9.78 / 10.92, abs=1e-12)
    assert w == pytest.approx([0.8953, 0.1047], abs=1e-3)
    assert sol.signed_spread_ratio == pytest.approx(1.11, abs=0.01)
    assert sol.condition_number == pytest.approx(18.84628357 / 0.36203117, rel=1e-6)


def test_portfolio_padding_for_three_assets():
    cov = np.eye(3) * 0.1
    sys = build_portfolio_system(PortfolioSpec(cov, [1, 2, 3], [1, 1, 1], 2.0, 1.0))
    assert sys.size == 8 and sys.answer == (0, 5)
    assert np.allclose(sys.matrix[5:, 5:], np.eye(3)) and not np.any(sys.rhs[5:])
    x = classical_solve(sys).solution
    assert x.size == 5 and np.sum(x[2:]) == pytest.approx(1.0)


def test_degenerate_portfolio_is_singular():
    spec = PortfolioSpec([[0.15, -0.43], [-0.43, 2.46]], [1, 1], [1, 1], 0.0, 1.0)
    with pytest.raises(SingularSystemError):
        classical_solve(build_portfolio_system(spec))


def test_portfolio_spec_validation():
    with pytest.raises(ValueError):
        PortfolioSpec([[1, 0], [0.5, 1]], [1, 2], [1, 1], 1, 1)
    with pytest.raises(ValueError):
        PortfolioSpec(np.eye(2), [1, 2, 3], [1, 1], 1, 1)


def test_classical_two_by_two():
    sol = classical_solve(two_by_two(math.pi / 4))
    assert sol.normalized == pytest.approx([1 / math.sqrt(2)] * 2)
    assert sol.condition_number == pytest.approx(2.0)
    # independent closed form: A^-1 = [[1.5, -0.5], [-0.5, 1.5]] / 2
    for theta in (math.pi / 6, math.pi / 3, math.pi / 7):
        b = np.array([math.cos(theta), math.sin(theta)])
        x = np.array([1.5 * b[0] - 0.5 * b[1], -0.5 * b[0] + 1.5 * b[1]])
        assert classical_solve(two_by_two(theta)).normalized == pytest.approx(x / np.linalg.norm(x), abs=1e-12)


def test_classical_two_by_two_frozen_values():
    assert classical_solve(two_by_two(math.pi / 6)).normalized == pytest.approx([0.95725, 0.28925], abs=1e-4)
    assert classical_solve(two_by_two(math.pi / 3)).normalized == pytest.approx([0.28925, 0.95725], abs=1e-4)


def test_hermitian_embed_examples():
    herm = diag_demo()
    assert hermitian_embed(herm) is herm
    emb = hermitian_embed(LinearSystem([[0, 1], [0, 0]], [1, 0]))
    assert emb.size == 4 and emb.hermitian and emb.answer == (2, 4)
    rng = np.random.default_rng(3)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    e = hermitian_embed(LinearSystem(a, [1, 0]))
    sv_ = np.linalg.svd(a, compute_uv=False)
    assert np.allclose(np.sort(np.linalg.eigvalsh(e.matrix)), np.sort(np.concatenate([sv_, -sv_])))


def test_linear_system_validation():
    with pytest.raises(ValueError):
        LinearSystem(np.ones((2, 3)), [1, 1])
    with pytest.raises(ValueError):
        LinearSystem(np.eye(2), [1, 1, 1])
    assert pad_system(LinearSystem(np.eye(3), [1, 0, 0])).size == 4


# ---------------------------------------------------------------- quantum side

def test_clock_helpers():
    lam = clock_eigenvalues(3, 2 * math.pi / 8)
    assert np.allclose(lam, [0, 1, 2, 3, -4, -3, -2, -1])
    angles = inversion_angles(3, 2 * math.pi / 8, 0.9)
    assert angles[0] == 0
    assert angles[1] == pytest.approx(2 * math.asin(0.9))
    assert angles[7] == pytest.approx(-2 * math.asin(0.9))
    m = np.diag([1.0, -3.0])
    tau = default_time_scale(m, 4)
    assert gershgorin_bound(m) == 3
    assert 3 * tau / (2 * math.pi) <= 7 / 16 + 1e-15


def test_diag_demo():
    r = hhl_solve(diag_demo(), 4, TAU4)
    assert r.solution == pytest.approx([0.8381, 0.4190, 0.2794, 0.2095], abs=1e-3)
    assert r.success_probability == pytest.approx(
        expected_success_probability(diag_demo(), r.constant), abs=1e-6)


def test_hadamard_demo():
    r = hhl_solve(hadamard_demo(), 4, TAU4)
    target = np.array([3, 5, 5, 3]) / np.linalg.norm([3, 5, 5, 3])
    assert r.solution == pytest.approx(target, abs=1e-3)


def test_extract_component_and_similarity():
    r = hhl_solve(diag_demo(), 4, TAU4)
    assert extract_component(r, 0) == pytest.approx(0.8381, abs=1e-3)
    assert extract_component(r, 0, shots=8192, seed=1) == pytest.approx(0.8381, abs=0.03)
    zero = hhl_solve(LinearSystem(np.diag([1.0, 2.0]), [1, 0]), 4, TAU4)
    assert extract_component(zero, 1) == pytest.approx(0, abs=1e-9)
    assert extract_component(zero, 1, shots=8192, seed=0) < 0.05
    with pytest.raises(ValueError):
        extract_component(r, 4)
    assert portfolio_similarity(r, r.solution) == pytest.approx(1.0)
    assert portfolio_similarity(r, r.solution, shots=8192, seed=2) == pytest.approx(1.0, abs=0.03)
    ortho = np.array([0.4190, -0.8381, 0, 0]) / np.linalg.norm([0.4190, -0.8381])
    assert portfolio_similarity(r, ortho) == pytest.approx(0, abs=1e-3)
    with pytest.raises(ValueError):
        portfolio_similarity(r, [1, 0])


def test_balance_components_and_similarity():
    sys = build_portfolio_system(balance_spec())
    cls = classical_solve(sys)
    r = hhl_solve(sys, 8)
    assert extract_component(r, 2) == pytest.approx(abs(r.solution[2]))
    assert abs(r.solution[2]) == pytest.approx(abs(cls.normalized[2]), abs=0.01)
    equal = np.full(4, 0.5)
    assert portfolio_similarity(r, equal) == pytest.approx(abs(np.vdot(cls.normalized, equal)), abs=0.02)


def test_balance_resolution_scaling():
    sys = build_portfolio_system(balance_spec())
    target = classical_solve(sys).normalized
    errors = [np.linalg.norm(hhl_solve(sys, t).solution - target) for t in range(4, 9)]
    assert all(b < a for a, b in zip(errors, errors[1:])), errors


def test_phase_estimation_reads_eigenvalue():
    a = np.diag([3.0, -3.0, 5.0, 1.0])
    for k, lam in enumerate([3, -3, 5, 1]):
        u = np.zeros(4)
        u[k] = 1
        dist = phase_estimate(a, u, 4, TAU4)
        assert dist[lam % 16] == pytest.approx(1.0, abs=1e-10)


def test_hhl_input_errors():
    with pytest.raises(ValueError):
        hhl_solve(LinearSystem([[0, 1], [0, 0]], [1, 0]), 4)
    with pytest.raises(ValueError):
        hhl_solve(LinearSystem(np.eye(3), [1, 0, 0]), 4)
    with pytest.raises(ValueError):
        hhl_solve(diag_demo(), 1)
    with pytest.raises(ValueError):
        hhl_solve(LinearSystem(np.eye(2), [0, 0]), 4)
    with pytest.raises(CapacityError):
        hhl_solve(diag_demo(), 18)
    with pytest.raises(ValueError):
        hhl_solve(diag_demo(), 4, mode=SAMPLED)


def test_sampled_hhl_magnitudes():
    r = hhl_solve(diag_demo(), 4, TAU4, mode=SAMPLED, shots=20000, seed=0)
    assert r.solution == pytest.approx([0.8381, 0.4190, 0.2794, 0.2095], abs=0.03)
    again = hhl_solve(diag_demo(), 4, TAU4, mode=SAMPLED, shots=20000, seed=0)
    assert np.array_equal(r.solution, again.solution)
    assert r.to_dict()["shots"] == 20000


def test_reference_circuit_exact_output():
    # the fixed inversion constant biases the result slightly away from the exact solve
    r = hhl_2x2_reference(math.pi / 4, mode=EXACT)
    assert r.solution == pytest.approx([1 / math.sqrt(2)] * 2, abs=1e-9)
    r6 = hhl_2x2_reference(math.pi / 6, mode=EXACT)
    assert r6.solution == pytest.approx([0.95339, 0.30173], abs=1e-4)
    assert 0.03 < r6.success_probability < 0.1


def test_reference_circuit_symmetric_case_sampled():
    r = hhl_2x2_reference(math.pi / 4, shots=8192, seed=0)
    assert r.solution == pytest.approx([0.7071, 0.7071], abs=0.02)


def test_reference_circuit_validation():
    with pytest.raises(ValueError):
        hhl_2x2_reference(0.0)
    with pytest.raises(ValueError):
        hhl_2x2_reference(math.pi / 4, mode="fast")


# ---------------------------------------------------------------- properties

seeds = st.integers(0, 2**32 - 1)
eigs = st.sampled_from([-7, -6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6, 7])


@given(seeds, st.sampled_from([2, 4]), st.lists(eigs, min_size=4, max_size=4))
@settings(max_examples=25)
def test_oracle_equivalence_representable(seed, n, lams):
    rng = np.random.default_rng(seed)
    u = random_unitary(rng, n)
    a = u @ np.diag(np.array(lams[:n], dtype=float)) @ u.conj().T
    a = (a + a.conj().T) / 2
    b = rng.normal(size=n) + 1j * rng.normal(size=n)
    sys = LinearSystem(a, b)
    r = hhl_solve(sys, 4, TAU4)
    assert np.allclose(r.solution, classical_solve(sys).normalized, atol=1e-6)
    assert r.success_probability == pytest.approx(expected_success_probability(sys, r.constant), abs=1e-6)


@given(seeds, st.lists(st.sampled_from([1, 2, 3, 4, 5, 6, 7]), min_size=2, max_size=2, unique=True))
@settings(max_examples=20)
def test_embedding_recovers_solution(seed, singular):
    rng = np.random.default_rng(seed)
    u, v = random_unitary(rng, 2), random_unitary(rng, 2)
    a = u @ np.diag(np.array(singular, dtype=float)) @ v.conj().T
    b = rng.normal(size=2) + 1j * rng.normal(size=2)
    sys = LinearSystem(a, b)
    assert not sys.hermitian
    r = hhl_solve(hermitian_embed(sys), 4, TAU4)
    assert r.solution.size == 2
    assert np.allclose(r.solution, classical_solve(sys).normalized, atol=1e-6)


@given(seeds)
@settings(max_examples=15)
def test_success_probability_accounting_on_diagonal(seed):
    rng = np.random.default_rng(seed)
    lams = rng.choice([-5, -3, -1, 1, 2, 4, 6], size=4, replace=False).astype(float)
    sys = LinearSystem(np.diag(lams), rng.normal(size=4))
    r = hhl_solve(sys, 4, TAU4)
    assert r.success_probability == pytest.approx(expected_success_probability(sys, r.constant), abs=1e-6)

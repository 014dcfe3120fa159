from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import random_state
from qfin.circuits import (
    CircuitSpec,
    bell_circuit,
    ghz_circuit,
    inverse_qft,
    qft,
    run,
    swap_test,
    swap_test_p0,
)
from qfin.gates import check_unitary, equal_up_to_global_phase, standard_gate
from qfin.statevector import StateVector, basis_state, zero_state

S2 = 1 / math.sqrt(2)
seeds = st.integers(0, 2**32 - 1)


def qft_reference(n, x):
    dim = 1 << n
    k = np.arange(dim)
    return np.exp(2j * math.pi * x * k / dim) / math.sqrt(dim)


def test_bell_from_00_and_10():
    assert np.allclose(run(bell_circuit()).amplitudes, [S2, 0, 0, S2])
    assert np.allclose(run(bell_circuit(), basis_state(2, "10")).amplitudes, [S2, 0, 0, -S2])


def test_empty_circuit_is_identity():
    psi = StateVector(random_state(np.random.default_rng(1), 3))
    assert np.array_equal(run(CircuitSpec(3), psi).amplitudes, psi.amplitudes)


def test_run_rejects_size_mismatch():
    with pytest.raises(ValueError):
        run(CircuitSpec(2), zero_state(3))


def test_instruction_validation():
    c = CircuitSpec(2)
    with pytest.raises(ValueError):
        c.add("X", 2)
    with pytest.raises(ValueError):
        c.add("X", 0, controls=0)
    with pytest.raises(ValueError):
        CircuitSpec(0)


def test_metadata():
    c = ghz_circuit(3)
    assert c.gate_count == 3
    assert c.width == 2
    assert np.allclose(run(c).amplitudes, [S2, 0, 0, 0, 0, 0, 0, S2])


def test_text_round_trip():
    c = qft(3)
    c.add_unitary(standard_gate("RY", [0.3]).matrix, [1], label="CUSTOM", controls=[0])
    back = CircuitSpec.from_text(c.to_text())
    assert back.to_text() == c.to_text()
    assert np.allclose(back.unitary(), c.unitary(), atol=1e-15)


def test_qft_one_qubit_is_h():
    assert np.allclose(qft(1).unitary(), standard_gate("H").matrix)
    assert np.allclose(inverse_qft(1).unitary(), standard_gate("H").matrix)


def test_qft_on_zero():
    out = run(qft(3)).amplitudes
    assert np.allclose(out, np.full(8, 1 / math.sqrt(8)), atol=1e-10)


def test_qft_on_five():
    out = run(qft(3), basis_state(3, 5)).amplitudes
    assert np.allclose(out, qft_reference(3, 5), atol=1e-10)


def test_inverse_qft_examples():
    six = basis_state(3, 6)
    assert np.allclose(run(inverse_qft(3), run(qft(3), six)).amplitudes, six.amplitudes, atol=1e-10)
    phased = StateVector(qft_reference(3, 5))
    assert np.allclose(run(inverse_qft(3), phased).amplitudes, basis_state(3, 5).amplitudes, atol=1e-10)


@pytest.mark.parametrize("n", range(1, 6))
def test_qft_matches_definition_and_is_unitary(n):
    u = qft(n).unitary()
    assert check_unitary(u)
    dim = 1 << n
    expected = np.stack([qft_reference(n, x) for x in range(dim)], axis=1)
    assert np.allclose(u, expected, atol=1e-10)


@pytest.mark.parametrize("n", range(1, 6))
def test_inverse_qft_round_trip_on_basis(n):
    forward, back = qft(n), inverse_qft(n)
    for x in range(1 << n):
        b = basis_state(n, x)
        assert np.allclose(run(back, run(forward, b)).amplitudes, b.amplitudes, atol=1e-10)


def test_circuit_inverse_general():
    c = CircuitSpec(2).add("U3", 0, [0.3, 0.2, -0.5]).add("T", 1).add("U2", 1, [0.4, 0.1], controls=0)
    c.add("SX", 0)
    assert np.allclose(c.inverse().unitary() @ c.unitary(), np.eye(4), atol=1e-12)


def test_swap_test_examples():
    a, b = zero_state(1), basis_state(1, 1)
    assert swap_test_p0(a, b) == pytest.approx(0.5, abs=1e-12)
    assert swap_test(a, a, 1024, 0) == pytest.approx(1.0)
    phi_plus = StateVector([S2, 0, 0, S2])
    psi_plus = StateVector([0, S2, S2, 0])
    assert swap_test_p0(phi_plus, psi_plus) == pytest.approx(0.5, abs=1e-12)
    assert swap_test(phi_plus, psi_plus, 8192, 2) < 0.05
    rot = StateVector([math.cos(math.pi / 8), math.sin(math.pi / 8)])
    assert swap_test(a, rot, 8192, 0) == pytest.approx(math.cos(math.pi / 8), abs=0.02)


@given(seeds, st.integers(1, 3))
def test_swap_test_concentration(seed, n):
    rng = np.random.default_rng(seed)
    psi = StateVector(random_state(rng, n))
    phi = StateVector(random_state(rng, n))
    shots = 8192
    p0 = swap_test_p0(psi, phi)
    overlap = abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2
    assert p0 == pytest.approx((1 + overlap) / 2, abs=1e-12)
    est = swap_test(psi, phi, shots, seed)
    # compare in P0 space where the binomial standard error is defined;
    # clamping only moves p0_hat toward p0 >= 1/2
    p0_hat = (1 + est**2) / 2
    se = math.sqrt(p0 * (1 - p0) / shots)
    assert abs(p0_hat - p0) <= 3 * se


@given(seeds, st.integers(1, 4))
def test_inverse_cancels_random_circuit(seed, n):
    rng = np.random.default_rng(seed)
    c = CircuitSpec(n)
    for _ in range(10):
        name = str(rng.choice(["H", "T", "S", "RX", "RY", "U3"]))
        params = {"RX": 1, "RY": 1, "U3": 3}.get(name, 0)
        q = int(rng.integers(n))
        others = [i for i in range(n) if i != q]
        ctrl = [int(rng.choice(others))] if others and rng.random() < 0.5 else []
        c.add(name, q, rng.uniform(-3, 3, params), controls=ctrl)
    psi = StateVector(random_state(rng, n))
    assert np.allclose(run(c.inverse(), run(c, psi)).amplitudes, psi.amplitudes, atol=1e-10)
    assert equal_up_to_global_phase(c.unitary() @ c.inverse().unitary(), np.eye(1 << n))

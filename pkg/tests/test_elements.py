import math

import numpy as np
import pytest

from dcphase.circuit import BeamSplitter, Circuit, CircuitError, Loss, PhaseShift, inverse_beam_splitter
from dcphase.elements import (
    BeamSplitterParams,
    amplitude_via_permanent,
    apply_element,
    beam_splitter,
    compile_mode_unitary,
    evolve_via_permanent,
    loss_channel,
    nonlinear_phase,
    permanent,
    phase_shift,
)
from dcphase.fock import SparseState, make_state


def random_circuit(rng, modes, depth=6):
    els = []
    for _ in range(depth):
        if rng.random() < 0.6 and modes > 1:
            m1, m2 = rng.choice(modes, 2, replace=False)
            els.append(BeamSplitter(int(m1), int(m2), float(rng.uniform(0, 1))))
        else:
            els.append(PhaseShift(int(rng.integers(modes)), float(rng.uniform(0, 2 * np.pi))))
    return Circuit(modes, els)


def random_state(rng, modes, photons, cutoff=4):
    from dcphase.elements import _patterns

    occs = list(_patterns(photons, modes))
    pick = rng.choice(len(occs), size=min(3, len(occs)), replace=False)
    st = make_state(modes, [(occs[i], complex(*rng.normal(size=2))) for i in pick], cutoff)
    return st.normalized()


def run_sparse(circ, state):
    for el in circ.elements:
        state = apply_element(state, el)
    return state


def test_single_photon_convention():
    out = beam_splitter(SparseState.basis((1, 0)), 0, 1, 0.6)
    assert out[(1, 0)] == pytest.approx(0.6)
    assert out[(0, 1)] == pytest.approx(0.8j)
    out = beam_splitter(SparseState.basis((0, 1)), 0, 1, 0.6)
    assert out[(1, 0)] == pytest.approx(0.8j)
    assert out[(0, 1)] == pytest.approx(0.6)


def test_hong_ou_mandel():
    out = beam_splitter(SparseState.basis((1, 1)), 0, 1, 1 / math.sqrt(2))
    assert abs(out[(1, 1)]) <= 1e-12
    assert out[(2, 0)] == pytest.approx(1j / math.sqrt(2))
    assert out[(0, 2)] == pytest.approx(1j / math.sqrt(2))


def test_unitarity_on_random_states():
    rng = np.random.default_rng(1)
    for _ in range(30):
        modes = int(rng.integers(2, 5))
        s = random_state(rng, modes, int(rng.integers(1, 4)))
        out = run_sparse(random_circuit(rng, modes), s)
        assert out.norm2() == pytest.approx(1.0, abs=1e-12)


def test_inverse_splitter_undoes_splitter():
    rng = np.random.default_rng(2)
    s = random_state(rng, 2, 3)
    for t in (0.1, 1 / math.sqrt(2), 0.93):
        out = beam_splitter(s, 0, 1, t)
        for el in inverse_beam_splitter(0, 1, t):
            out = apply_element(out, el)
        assert out.allclose(s, atol=1e-12)


def test_phase_and_nonlinear_phase():
    s = make_state(1, [((0,), 0.6), ((2,), 0.8)])
    p = phase_shift(s, 0, 0.5)
    assert p[(2,)] == pytest.approx(0.8 * np.exp(1j))
    nl = nonlinear_phase(s, 0, (1, 1))
    assert nl[(0,)] == pytest.approx(0.6) and nl[(2,)] == 0


@pytest.mark.parametrize("n,eta", [(1, 0.7), (2, 0.5), (3, 0.9)])
def test_loss_branch_weights_binomial(n, eta):
    branches = loss_channel(SparseState.basis((n, 0)), 0, eta)
    for b, lost in branches:
        expect = math.comb(n, lost) * (1 - eta) ** lost * eta ** (n - lost)
        assert b.norm2() == pytest.approx(expect, abs=1e-12)
        assert b[(n - lost, 0)] != 0
    assert sum(b.norm2() for b, _ in branches) == pytest.approx(1.0)


def test_loss_is_not_a_pure_element():
    with pytest.raises(CircuitError):
        apply_element(SparseState.vacuum(1), Loss(0, 0.5))


def test_splitter_params():
    assert BeamSplitterParams(0.6).r == pytest.approx(0.8)
    with pytest.raises(ValueError):
        BeamSplitterParams(1.2)


def test_permanent_small_cases():
    A = np.array([[1, 2], [3, 4]])
    assert permanent(A) == pytest.approx(10)
    assert permanent(np.ones((4, 4))) == pytest.approx(24)
    assert permanent(np.zeros((0, 0))) == 1


def test_compiled_unitary_is_unitary():
    rng = np.random.default_rng(3)
    U = compile_mode_unitary(random_circuit(rng, 4, 10))
    assert np.allclose(U.conj().T @ U, np.eye(4), atol=1e-12)
    with pytest.raises(CircuitError):
        compile_mode_unitary(Circuit(1, (Loss(0, 0.5),)))


def test_photon_mismatch():
    with pytest.raises(ValueError):
        amplitude_via_permanent(np.eye(2), (1, 0), (1, 1))


def test_permanent_matches_sparse_evolution():
    rng = np.random.default_rng(4)
    for _ in range(100):
        modes = int(rng.integers(1, 5))
        photons = int(rng.integers(1, 4))
        circ = random_circuit(rng, modes, int(rng.integers(1, 8)))
        s = random_state(rng, modes, photons)
        a = run_sparse(circ, s)
        b = evolve_via_permanent(compile_mode_unitary(circ), s)
        assert a.allclose(b, atol=1e-10)

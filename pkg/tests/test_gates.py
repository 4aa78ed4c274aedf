import cmath
import math

import numpy as np
import pytest

from dcphase.analysis import sign_ns_params
from dcphase.fock import make_state
from dcphase.gates import (
    NS_SPANNING_INPUTS,
    AncillaCostModel,
    DestructiveGateParams,
    GateError,
    build_cphase_destructive,
    build_cphase_klm,
    check_destructive_params,
    constrained_params,
    effective_success,
    eq3_amplitudes,
    ideal_ns_element,
    ns_amplitudes,
    ns_apply,
    ns_circuit,
    ns_element,
    ns_residual,
    ns_success,
    solve_constraints,
)
from dcphase.herald import run

NS = sign_ns_params()
S2 = 1 / math.sqrt(2)


@pytest.fixture(scope="module")
def dgate():
    return build_cphase_destructive(constrained_params(S2, NS), "klm")


@pytest.fixture(scope="module")
def kgate():
    return build_cphase_klm(math.pi, NS, "klm")


def test_ns_sign_flip_amplitudes():
    c = ns_amplitudes(NS, 3)
    assert c[0] == pytest.approx(0.5j, abs=1e-12)
    assert c[1] == pytest.approx(0.5j, abs=1e-12)
    assert c[2] == pytest.approx(-0.5j, abs=1e-12)
    assert ns_residual(NS) <= 1e-12
    assert ns_success(NS) == pytest.approx(0.25, abs=1e-12)


def test_ns_success_is_input_independent():
    for a, b, g in NS_SPANNING_INPUTS:
        n = math.sqrt(abs(a) ** 2 + abs(b) ** 2 + abs(g) ** 2)
        r = ns_apply(NS, a / n, b / n, g / n)
        assert r.prob == pytest.approx(0.25, abs=1e-12)


def test_ns_apply_output():
    a, b, g = 0.6, 0.48j, 0.64
    r = ns_apply(NS, a, b, g)
    s = r.state.scale(1 / 0.5j)
    assert s[(0,)] == pytest.approx(a) and s[(1,)] == pytest.approx(b) and s[(2,)] == pytest.approx(-g)


def test_ns_circuit_detector_layout():
    circ, spec = ns_circuit(NS)
    assert circ.sources == ((2, 1),)
    assert [(d.mode, d.count) for d in spec.detectors] == [(1, 1), (2, 0)]


def test_compiled_and_ideal_ns_elements():
    el = ns_element(NS, 0, 3)
    assert el.coeffs[:3] == pytest.approx(ns_amplitudes(NS, 2))
    ideal = ideal_ns_element(0, math.pi / 2)
    assert ideal.coeffs[2] == pytest.approx(1j)


def test_klm_gate(kgate):
    assert kgate.action_residual() <= 1e-12
    assert kgate.prefactor() == pytest.approx(-0.25, abs=1e-12)
    assert kgate.average_success_closed_form() == pytest.approx(0.0625, abs=1e-12)
    assert kgate.leakage() <= 1e-12
    assert kgate.ancilla_count == 2


def test_klm_without_ns_is_identity():
    g = build_cphase_klm(math.pi, NS, "none")
    assert np.allclose(g.logical_map(), np.eye(4), atol=1e-12)


def test_klm_both_zero_untouched(kgate):
    r = kgate.herald((1, 0), (1, 0))
    assert r.prob == pytest.approx(0.0625)
    assert r.state[kgate.output_basis[0]] == pytest.approx(-0.25, abs=1e-12)
    assert len(r.state) == 1


def test_klm_phase_mismatch_rejected():
    with pytest.raises(GateError):
        build_cphase_klm(math.pi / 2, NS)


@pytest.mark.parametrize("model", ["ideal", "klm", "compiled"])
def test_destructive_gate_models(model):
    g = build_cphase_destructive(constrained_params(S2, NS), model)
    assert g.action_residual() <= 1e-12
    expect = 0.125 if model == "ideal" else 0.03125
    assert g.average_success_closed_form() == pytest.approx(expect, abs=1e-12)


def test_compiled_matches_embedded(dgate):
    other = build_cphase_destructive(constrained_params(S2, NS), "compiled")
    assert np.allclose(dgate.transfer[1], other.transfer[1], atol=1e-12)


def test_destructive_constraints_enforced():
    with pytest.raises(GateError):
        build_cphase_destructive(DestructiveGateParams(0.5, 0.5, 0.5, NS))
    with pytest.raises(GateError):
        check_destructive_params(DestructiveGateParams(1.0, 0.5, 0.5, NS))


def test_photon_bookkeeping(dgate):
    n_in = 1 + 1 + 1  # target, control, NS ancilla
    out = run(dgate.circuit, dgate.input_state((0, 1), (0, 1)))
    for k, _ in out.items():
        assert sum(k) == n_in
    dets = dgate.spec.detectors
    accepted = [k for k, _ in out.items() if all(d.accepts(k[d.mode]) for d in dets)]
    assert accepted
    for k in accepted:
        readout = sum(k[d.mode] for d in dets)
        assert readout + k[0] == n_in


def test_eq3_matches_brute_force_ideal_ns():
    rng = np.random.default_rng(7)
    for _ in range(25):
        t1, t2, t3 = rng.uniform(0.05, 0.95, 3)
        z = rng.normal(size=4) + 1j * rng.normal(size=4)
        a, b = z[:2] / np.linalg.norm(z[:2])
        g, d = z[2:] / np.linalg.norm(z[2:])
        gate = build_cphase_destructive(DestructiveGateParams(t1, t2, t3, NS), "ideal", check=False)
        out = gate.herald((a, b), (g, d)).state
        c = eq3_amplitudes(t1, t2, t3, a, b, g, d)
        assert out[(0,)] == pytest.approx(c[0] + c[2], abs=1e-10)
        assert out[(1,)] == pytest.approx(c[1] + c[3], abs=1e-10)


def test_eq3_general_phase():
    ph = math.pi / 2
    t1, t2, t3 = 0.7, 0.8, 0.6
    ns = NS.__class__(NS.t_b1, NS.t_b2, NS.t_b3, NS.phi4, ph)
    gate = build_cphase_destructive(DestructiveGateParams(t1, t2, t3, ns), "ideal", check=False)
    out = gate.herald((0.6, 0.8), (0.8, 0.6j)).state
    c = eq3_amplitudes(t1, t2, t3, 0.6, 0.8, 0.8, 0.6j, phase=ph)
    assert out[(1,)] == pytest.approx(c[1] + c[3], abs=1e-12)


def test_solve_constraints():
    for t3 in (0.3, 0.5, 1.0, 1.2):
        assert solve_constraints(t3) is None
    for t3 in np.linspace(0.501, 0.999, 50):
        p = constrained_params(float(t3), NS)
        assert max(abs(x) for x in p.constraint_residuals()) <= 1e-12
    t1, t2 = solve_constraints(S2)
    assert t1 == pytest.approx(math.sqrt(2 / 3)) and t2 == pytest.approx(math.sqrt(3) / 2)
    with pytest.raises(GateError):
        constrained_params(0.4, NS)


def test_effective_success():
    assert effective_success(0.0625, AncillaCostModel(2, 0.01)) == pytest.approx(6.25e-6)
    assert effective_success(0.5, AncillaCostModel(3, 1.0)) == 0.5
    with pytest.raises(ValueError):
        AncillaCostModel(1, 0.0)


def test_output_and_target_states(dgate):
    tgt = dgate.target_state((S2, S2), (0, 1))
    assert tgt[(0,)] == pytest.approx(S2) and tgt[(1,)] == pytest.approx(-S2)
    vec = dgate.logical_vector((1, 0), (0, 1))
    assert np.allclose(vec, [0, 1, 0, 0])
    inp = dgate.input_state((0, 1), (1, 0))
    assert inp.photon_numbers() == {2}
    assert isinstance(make_state(1, [((0,), 1)]), type(tgt))


def test_relative_phase_from_herald(dgate):
    out = dgate.herald((S2, S2), (0, 1)).state.normalized()
    assert cmath.phase(out[(1,)] / out[(0,)]) == pytest.approx(math.pi, abs=1e-12)

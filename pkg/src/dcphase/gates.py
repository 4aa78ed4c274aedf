"""Heralded gate builders.

* Nonlinear sign gate: three splitters, one ancilla photon, two detectors.
* KLM controlled phase: dual-rail control and target, two NS gates between a
  50/50 splitter and its inverse.
* Destructive controlled phase: dual-rail control adds a photon to the
  single-rail target either before (logical 1) or after (logical 0) one NS gate,
  and a splitter with a one-photon herald removes it again.
* N-path version of the destructive gate for multiphoton targets.

Logical inputs are always ordered (target, control); the logical vector is
``kron(target, control)``, so index ``2*a + c`` is target bit ``a``, control bit ``c``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .circuit import (
    BeamSplitter,
    Circuit,
    CircuitBuilder,
    NonlinearPhase,
    PhaseShift,
    inverse_beam_splitter,
)
from .fock import FockError, Occupation, SparseState, make_state
from .herald import PNR, ConditionalResult, Detector, HeraldSpec, herald_ideal, run, simulate_heralded

NS_TOL = 1e-9
CONSTRAINT_TOL = 1e-9


class GateError(ValueError):
    """Gate parameters fail their verification or constraints."""


@dataclass(frozen=True)
class NsGateParams:
    """Splitter transmissions, signal phase ``phi4`` and the herald-arm phase ``phi_aux``.

    Layout (modes: signal, herald arm ``h``, ancilla arm ``a``; one photon enters ``a``):
    ``ps(signal, phi4)``, ``bs(h, a, t_b1)``, ``ps(h, phi_aux)``, ``bs(signal, h, t_b2)``,
    ``bs(h, a, t_b3)``; success is one photon on ``h`` and none on ``a``.
    """

    t_b1: float
    t_b2: float
    t_b3: float
    phi4: float
    target_phase: float = math.pi
    phi_aux: float = 0.0

    def __post_init__(self):
        for t in (self.t_b1, self.t_b2, self.t_b3):
            if not 0 <= t <= 1:
                raise GateError(f"transmission {t} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "t_b1": self.t_b1,
            "t_b2": self.t_b2,
            "t_b3": self.t_b3,
            "phi4": self.phi4,
            "phi_aux": self.phi_aux,
            "target_phase": self.target_phase,
        }


@dataclass(frozen=True)
class DestructiveGateParams:
    t1: float
    t2: float
    t3: float
    ns: NsGateParams
    aux_phases: tuple[tuple[str, float], ...] = (("c0", math.pi), ("c1", math.pi))
    # phase shifts on the target just before and after the NS gate
    target_phases: tuple[float, float] = (0.0, 0.0)

    @property
    def r1(self) -> float:
        return math.sqrt(max(0.0, 1 - self.t1**2))

    @property
    def r2(self) -> float:
        return math.sqrt(max(0.0, 1 - self.t2**2))

    @property
    def r3(self) -> float:
        return math.sqrt(max(0.0, 1 - self.t3**2))

    def constraint_residuals(self) -> tuple[float, float]:
        return (2 * self.t1 * self.t2 * self.t3 - 1, self.r2 - self.r1 * self.t2)

    def to_dict(self) -> dict:
        return {
            "t1": self.t1,
            "t2": self.t2,
            "t3": self.t3,
            "aux_phases": [list(p) for p in self.aux_phases],
            "target_phases": list(self.target_phases),
            "ns": self.ns.to_dict(),
        }


@dataclass(frozen=True)
class AncillaCostModel:
    ancilla_count: int
    p_herald: float = 0.01

    def __post_init__(self):
        if not 0 < self.p_herald <= 1:
            raise ValueError(f"p_herald {self.p_herald} outside (0, 1]")


def effective_success(p_intrinsic: float, cost: AncillaCostModel) -> float:
    """Success including heralded generation of every ancilla photon."""
    return p_intrinsic * cost.p_herald**cost.ancilla_count


# nonlinear sign gate


def ns_circuit(params: NsGateParams) -> tuple[Circuit, HeraldSpec]:
    b = CircuitBuilder()
    sig, h, a = b.add_mode("sig"), b.add_mode("ns_h"), b.add_mode("ns_a")
    b.inject(a, 1)
    b.add(
        PhaseShift(sig, params.phi4),
        BeamSplitter(h, a, params.t_b1),
        PhaseShift(h, params.phi_aux),
        BeamSplitter(sig, h, params.t_b2),
        BeamSplitter(h, a, params.t_b3),
    )
    spec = HeraldSpec((Detector(h, 1), Detector(a, 0)), (sig,))
    return b.build(), spec


def ns_amplitudes(params: NsGateParams, nmax: int = 2) -> tuple[complex, ...]:
    """Heralded amplitudes ``c_n`` with ``|n> -> c_n |n>`` for n = 0..nmax."""
    circ, spec = ns_circuit(params)
    out = []
    for n in range(nmax + 1):
        res = herald_ideal(run(circ, make_state(3, [((n, 0, 0), 1)], cutoff=n + 1)), spec)
        out.append(res.state[(n,)])
    return tuple(out)


def ns_apply(params: NsGateParams, alpha: complex, beta: complex, gamma: complex) -> ConditionalResult:
    circ, spec = ns_circuit(params)
    psi = make_state(3, [((0, 0, 0), alpha), ((1, 0, 0), beta), ((2, 0, 0), gamma)], cutoff=3)
    return herald_ideal(run(circ, psi), spec)


NS_SPANNING_INPUTS = (
    (1, 0, 0),
    (0, 1, 0),
    (0, 0, 1),
    (1 / math.sqrt(2), 0, 1 / math.sqrt(2)),
    (1 / math.sqrt(3), 1j / math.sqrt(3), -1 / math.sqrt(3)),
)


def ns_residual(params: NsGateParams, phase: float | None = None) -> float:
    """Worst deviation from ``c * (a|0> + b|1> + e^{i phase} g|2>)`` over spanning inputs.

    ``c`` is the vacuum amplitude; deviations are relative to ``|c|``.
    """
    phase = params.target_phase if phase is None else phase
    c = ns_apply(params, 1, 0, 0).state[(0,)]
    if abs(c) < 1e-12:
        return math.inf
    worst = 0.0
    for a, b, g in NS_SPANNING_INPUTS:
        got = ns_apply(params, a, b, g).state
        want = (a * c, b * c, g * c * cmath.exp(1j * phase))
        worst = max(worst, max(abs(got[(n,)] - want[n]) for n in range(3)) / abs(c))
        worst = max(worst, max((abs(v) for k, v in got.terms.items() if k[0] > 2), default=0.0))
    return worst


def ns_success(params: NsGateParams) -> float:
    return abs(ns_amplitudes(params, 0)[0]) ** 2


def ns_element(params: NsGateParams, mode: int, nmax: int) -> NonlinearPhase:
    """The NS gate's exact lossless heralded action, as a single-mode element."""
    return NonlinearPhase(mode, ns_amplitudes(params, nmax), "ns")


def ideal_ns_element(mode: int, phase: float, amplitude: complex = 1.0) -> NonlinearPhase:
    """``|0>, |1> -> amplitude``, ``|2> -> amplitude * e^{i phase}``; higher n rejected."""
    return NonlinearPhase(mode, (amplitude, amplitude, amplitude * cmath.exp(1j * phase)), "ns-ideal")


def _place_ns(b: CircuitBuilder, mode: int, ns: NsGateParams, model: str, prefix: str, nmax: int):
    """Insert an NS gate acting on ``mode``; returns the extra detectors it needs."""
    if model == "klm":
        sub, _ = ns_circuit(ns)
        h, a = b.add_mode(f"{prefix}ns_h"), b.add_mode(f"{prefix}ns_a")
        b.embed(sub, [mode, h, a])
        return [Detector(h, 1), Detector(a, 0)]
    if model == "compiled":
        b.add(ns_element(ns, mode, nmax))
        return []
    if model == "ideal":
        b.add(ideal_ns_element(mode, ns.target_phase))
        return []
    raise ValueError(f"unknown NS model {model!r}")


# heralded gate container


@dataclass
class HeraldedGate:
    """A circuit, its herald, and the maps between logical qubits and Fock states."""

    name: str
    circuit: Circuit
    spec: HeraldSpec
    phase: float
    ancilla_count: int
    encode_basis: Callable[[tuple[int, ...]], Occupation]
    output_basis: tuple[Occupation, ...]
    ideal_map: np.ndarray
    n_qubits: int = 2
    params: object = None

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def logical_vector(self, *qubits) -> np.ndarray:
        vec = np.ones(1, dtype=complex)
        for q in qubits:
            a0, a1 = q.as_tuple() if hasattr(q, "as_tuple") else q
            vec = np.kron(vec, np.array([a0, a1], dtype=complex))
        return vec

    def _bits(self, index: int) -> tuple[int, ...]:
        return tuple((index >> (self.n_qubits - 1 - j)) & 1 for j in range(self.n_qubits))

    def input_state(self, *qubits) -> SparseState:
        x = self.logical_vector(*qubits)
        return self.input_from_vector(x)

    def input_from_vector(self, x) -> SparseState:
        entries = [(self.encode_basis(self._bits(i)), x[i]) for i in range(self.dim) if x[i] != 0]
        cutoff = max(self.n_qubits, 1) + self.circuit.source_photons
        if not entries:
            entries = [((0,) * self.circuit.modes, 0)]
        return make_state(self.circuit.modes, entries, cutoff=cutoff)

    def herald(self, *qubits) -> ConditionalResult:
        return simulate_heralded(self.circuit, self.input_state(*qubits), self.spec)

    def success_prob(self, *qubits) -> float:
        return self.herald(*qubits).prob

    @cached_property
    def transfer(self) -> tuple[tuple[Occupation, ...], np.ndarray]:
        """Heralded output amplitudes for each logical basis input.

        Returns ``(keys, M)`` with ``M[:, i]`` the output for basis input ``i`` over
        output occupations ``keys`` (logical outputs first, then any leakage).
        """
        cols = []
        for i in range(self.dim):
            x = np.zeros(self.dim, dtype=complex)
            x[i] = 1
            cols.append(simulate_heralded(self.circuit, self.input_from_vector(x), self.spec).state)
        keys = list(self.output_basis)
        extra = sorted({k for s in cols for k in s.terms} - set(keys))
        keys.extend(extra)
        M = np.array([[s[k] for s in cols] for k in keys], dtype=complex)
        return tuple(keys), M

    def logical_map(self) -> np.ndarray:
        """Heralded map restricted to logical outputs."""
        keys, M = self.transfer
        return M[: len(self.output_basis)]

    def leakage(self) -> float:
        keys, M = self.transfer
        return float(np.abs(M[len(self.output_basis):]).max(initial=0.0))

    def prefactor(self) -> complex:
        """Least-squares ``k`` with ``logical_map ≈ k * ideal_map``."""
        M = self.logical_map()
        return complex(np.vdot(self.ideal_map, M) / np.vdot(self.ideal_map, self.ideal_map))

    def action_residual(self) -> float:
        """Relative distance of the heralded map from a multiple of the ideal map."""
        keys, M = self.transfer
        k = self.prefactor()
        full_ideal = np.zeros_like(M)
        full_ideal[: len(self.output_basis)] = self.ideal_map
        if abs(k) < 1e-15:
            return math.inf
        return float(np.abs(M - k * full_ideal).max() / abs(k))

    def average_success_closed_form(self) -> float:
        """Mean success over independent Haar-random qubits: ``||M||_F^2 / dim``."""
        keys, M = self.transfer
        return float(np.sum(np.abs(M) ** 2) / self.dim)

    def output_state(self, amplitudes: Sequence[complex]) -> SparseState:
        """State on the output modes with the given logical-output amplitudes."""
        return SparseState(
            len(self.output_basis[0]),
            {k: complex(a) for k, a in zip(self.output_basis, amplitudes)},
            cutoff=max(sum(k) for k in self.output_basis) + 1,
        )

    def target_state(self, *qubits) -> SparseState:
        return self.output_state(self.ideal_map @ self.logical_vector(*qubits)).normalized()


# KLM controlled phase


def build_cphase_klm(phi: float, ns: NsGateParams, ns_model: str = "klm", check: bool = True) -> HeraldedGate:
    """Controlled phase from two NS gates between a 50/50 splitter and its inverse.

    ``ns_model="none"`` omits both NS gates (the splitters then cancel).
    """
    if check and ns_model != "none":
        if not math.isclose(math.remainder(ns.target_phase - phi, 2 * math.pi), 0, abs_tol=1e-12):
            raise GateError(f"NS phase {ns.target_phase} does not match gate phase {phi}")
        res = ns_residual(ns)
        if res > NS_TOL:
            raise GateError(f"NS parameters unverified: residual {res:.3e}")
    b = CircuitBuilder()
    c0, c1, t0, t1 = (b.add_mode(x) for x in ("c0", "c1", "t0", "t1"))
    s = 1 / math.sqrt(2)
    b.add(BeamSplitter(c1, t1, s))
    dets: list[Detector] = []
    if ns_model != "none":
        dets += _place_ns(b, c1, ns, ns_model, "A_", 2)
        dets += _place_ns(b, t1, ns, ns_model, "B_", 2)
    b.add(*inverse_beam_splitter(c1, t1, s))
    circ = b.build()
    outputs = (c0, c1, t0, t1)
    spec = HeraldSpec(tuple(dets), outputs)

    def encode(bits):
        a, c = bits
        occ = [0] * circ.modes
        occ[t1 if a else t0] = 1
        occ[c1 if c else c0] = 1
        return tuple(occ)

    out_basis = tuple(tuple(encode(_bits2(i))[m] for m in outputs) for i in range(4))
    ideal = np.diag([1, 1, 1, cmath.exp(1j * phi)]).astype(complex)
    return HeraldedGate(
        "cphase-klm", circ, spec, phi, 2 if ns_model != "none" else 0,
        encode, out_basis, ideal, params=ns,
    )


def _bits2(i: int) -> tuple[int, int]:
    return (i >> 1) & 1, i & 1


# destructive controlled phase


def _destructive_into(
    b: CircuitBuilder,
    target: int,
    t1: float,
    t2: float,
    t3: float,
    ns: NsGateParams,
    ns_model: str,
    aux_phases: Sequence[tuple[str, float]],
    prefix: str = "",
    nmax: int = 3,
    target_phases: Sequence[float] = (0.0, 0.0),
) -> tuple[int, int, list[Detector]]:
    c0 = b.add_mode(f"{prefix}c0")
    c1 = b.add_mode(f"{prefix}c1")
    d3 = b.add_mode(f"{prefix}d3")
    rails = {"c0": c0, "c1": c1}
    for rail, phi in aux_phases:
        b.add(PhaseShift(rails[rail], phi))
    # photon addition from the logical-1 rail before the NS gate
    b.add(BeamSplitter(target, c1, t1))
    dets = [Detector(c1, 0)]
    if target_phases[0]:
        b.add(PhaseShift(target, target_phases[0]))
    dets += _place_ns(b, target, ns, ns_model, prefix, nmax)
    if target_phases[1]:
        b.add(PhaseShift(target, target_phases[1]))
    # addition from the logical-0 rail after it
    b.add(BeamSplitter(target, c0, t2))
    dets.append(Detector(c0, 0))
    # subtraction, heralded on exactly one photon
    b.add(BeamSplitter(target, d3, t3))
    dets.append(Detector(d3, 1, PNR))
    return c0, c1, dets


def check_destructive_params(params: DestructiveGateParams) -> None:
    for t in (params.t1, params.t2, params.t3):
        if not 0 < t < 1:
            raise GateError(f"transmission {t} outside (0, 1)")
    res = max(abs(x) for x in params.constraint_residuals())
    if res > CONSTRAINT_TOL:
        raise GateError(f"constraints 2 t1 t2 t3 = 1, r2 = r1 t2 violated by {res:.3e}")


def build_cphase_destructive(
    params: DestructiveGateParams, ns_model: str = "klm", check: bool = True
) -> HeraldedGate:
    """Single-rail target, dual-rail control; the control is consumed.

    Output is the single target mode. ``check`` enforces the splitter constraints
    that make the map a controlled phase (skip it to study arbitrary splitters).
    """
    if check:
        check_destructive_params(params)
        if ns_model == "klm" and ns_residual(params.ns) > NS_TOL:
            raise GateError("NS parameters unverified")
    b = CircuitBuilder()
    t = b.add_mode("t")
    c0, c1, dets = _destructive_into(
        b, t, params.t1, params.t2, params.t3, params.ns, ns_model, params.aux_phases,
        target_phases=params.target_phases,
    )
    circ = b.build()
    spec = HeraldSpec(tuple(dets), (t,))

    def encode(bits):
        a, c = bits
        occ = [0] * circ.modes
        occ[t] = a
        occ[c1 if c else c0] = 1
        return tuple(occ)

    phi = params.ns.target_phase
    ideal = np.array([[1, 1, 0, 0], [0, 0, 1, cmath.exp(1j * phi)]], dtype=complex)
    return HeraldedGate(
        "cphase-destructive", circ, spec, phi, 1 if ns_model == "klm" else 0,
        encode, ((0,), (1,)), ideal, params=params,
    )


def eq3_amplitudes(t1, t2, t3, alpha, beta, gamma, delta, phase: float = math.pi):
    """Heralded output of the destructive gate with an ideal NS gate, per branch.

    Returns ``(c0_gamma, c1_gamma, c0_delta, c1_delta)``: the |0>/|1> target
    amplitudes contributed by the control's logical-0 and logical-1 components.
    ``phase`` generalizes the NS sign flip ``-1`` to ``e^{i phase}``.
    """
    r1, r2, r3 = (math.sqrt(max(0.0, 1 - t * t)) for t in (t1, t2, t3))
    k = 2 * t1 * t2 * t3
    return (
        gamma * r2 * r3 * alpha,
        gamma * r2 * r3 * beta * k,
        delta * r1 * r3 * t2 * alpha,
        delta * r1 * r3 * t2 * beta * k * cmath.exp(1j * phase),
    )


def solve_constraints(t3: float) -> tuple[float, float] | None:
    """``(t1, t2)`` with ``2 t1 t2 t3 = 1`` and ``r2 = r1 t2``; None unless 0.5 < t3 < 1."""
    if not 0.5 < t3 < 1:
        return None
    u = 1 + 4 * t3 * t3
    return math.sqrt(2 / u), math.sqrt(u / (8 * t3 * t3))


def constrained_params(t3: float, ns: NsGateParams) -> DestructiveGateParams:
    sol = solve_constraints(t3)
    if sol is None:
        raise GateError(f"no constrained solution for t3 = {t3}")
    return DestructiveGateParams(sol[0], sol[1], t3, ns)


# N-path extension


@dataclass
class NPathGate:
    """Target split over ``N`` paths, one destructive gate per path, then recombined.

    The ``N`` control qubits are supplied already GHZ-correlated:
    ``gamma |0...0> + delta |1...1>``.
    """

    N: int
    n_max: int
    circuit: Circuit
    spec: HeraldSpec
    rails: list[tuple[int, int]] = field(default_factory=list)
    cutoff: int = 6

    def input_state(self, target: Sequence[complex], control: tuple[complex, complex]) -> SparseState:
        """``target[n]`` is the amplitude of n photons in the input port."""
        gamma, delta = control
        entries = []
        for n, amp in enumerate(target):
            if amp == 0:
                continue
            if n > self.n_max:
                raise FockError(f"{n} target photons exceed n_max = {self.n_max}")
            for bit, cval in ((0, gamma), (1, delta)):
                if cval == 0:
                    continue
                occ = [0] * self.circuit.modes
                occ[0] = n
                for r0, r1 in self.rails:
                    occ[r1 if bit else r0] = 1
                entries.append((tuple(occ), amp * cval))
        return make_state(self.circuit.modes, entries, cutoff=self.cutoff)

    def herald(self, target, control) -> ConditionalResult:
        return simulate_heralded(self.circuit, self.input_state(target, control), self.spec)


def splitter_tree(N: int) -> list[float]:
    """Transmissions of the cascade that splits mode 0 evenly over N paths."""
    return [math.sqrt(1 - 1 / (N - k + 1)) for k in range(1, N)]


def build_npath(
    N: int,
    per_path: DestructiveGateParams,
    n_max: int,
    cutoff: int = 6,
    ns_model: str = "compiled",
) -> NPathGate:
    if N < 1:
        raise GateError("N must be at least 1")
    need = n_max + N + (N if ns_model == "klm" else 0)
    if need > cutoff:
        raise GateError(f"cutoff {cutoff} too small: need {need} photons")
    b = CircuitBuilder()
    paths = [b.add_mode(f"p{j}") for j in range(N)]
    ts = splitter_tree(N)
    for k, t in enumerate(ts, start=1):
        b.add(BeamSplitter(paths[0], paths[k], t))
    dets: list[Detector] = []
    rails = []
    for j, p in enumerate(paths):
        c0, c1, d = _destructive_into(
            b, p, per_path.t1, per_path.t2, per_path.t3, per_path.ns, ns_model,
            per_path.aux_phases, prefix=f"g{j}_", nmax=n_max + 1,
        )
        rails.append((c0, c1))
        dets.extend(d)
    for k in range(N - 1, 0, -1):
        b.add(*inverse_beam_splitter(paths[0], paths[k], ts[k - 1]))
    dets.extend(Detector(p, 0) for p in paths[1:])
    circ = b.build()
    return NPathGate(N, n_max, circ, HeraldSpec(tuple(dets), (paths[0],)), rails, cutoff)

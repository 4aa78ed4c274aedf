"""Success probabilities, input averages, parameter sweeps and fidelity curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .fock import QubitAmplitudes
from .gates import (
    AncillaCostModel,
    DestructiveGateParams,
    GateError,
    HeraldedGate,
    NsGateParams,
    build_cphase_destructive,
    build_cphase_klm,
    constrained_params,
    effective_success,
    ns_success,
    solve_constraints,
)
from .herald import Detector, HeraldSpec, lossy_branches

VERIFY_TOL = 1e-9
MEASURE_KINDS = ("haar-product", "real-amplitudes", "real-imaginary", "fixed")


@dataclass(frozen=True)
class InputMeasure:
    """Distribution of (target, control) qubit pairs.

    ``haar-product``: independent Haar-random qubits. ``real-amplitudes``: both
    qubits uniform on the real great circle. ``real-imaginary``: real ``|0>``
    amplitude and imaginary ``|1>`` amplitude, both uniform in angle. ``fixed``:
    always ``(target, control)``.
    """

    kind: str = "haar-product"
    samples: int = 10_000
    seed: int = 0
    target: tuple[complex, complex] | None = None
    control: tuple[complex, complex] | None = None

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ValueError(f"unknown measure {self.kind!r}")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if self.kind == "fixed" and (self.target is None or self.control is None):
            raise ValueError("fixed measure needs target and control")

    def sample(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays ``(T, C)`` of shape ``(samples, 2)``, each row normalized."""
        rng = np.random.default_rng(self.seed)
        n = self.samples
        if self.kind == "fixed":
            T = np.tile(QubitAmplitudes(*self.target).as_tuple(), (n, 1)).astype(complex)
            C = np.tile(QubitAmplitudes(*self.control).as_tuple(), (n, 1)).astype(complex)
            return T, C
        if self.kind == "haar-product":
            z = rng.normal(size=(2, n, 2)) + 1j * rng.normal(size=(2, n, 2))
            z /= np.linalg.norm(z, axis=2, keepdims=True)
            return z[0], z[1]
        theta = rng.uniform(0, 2 * np.pi, size=(2, n))
        second = np.sin(theta) * (1j if self.kind == "real-imaginary" else 1)
        z = np.stack([np.cos(theta) + 0j, second], axis=2)
        return z[0], z[1]


@dataclass(frozen=True)
class SweepRow:
    """One row of a sweep; ``names`` label ``values`` in column order."""

    names: tuple[str, ...]
    values: tuple[float, ...]
    flag: str = ""

    def __getitem__(self, name: str) -> float:
        return self.values[self.names.index(name)]

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values))


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float = 0.0
    method: str = "closed-form"
    samples: int = 0


@dataclass(frozen=True)
class TableRecord:
    phase: float
    p_d: float
    p_klm: float
    p_d_eff: float
    p_klm_eff: float
    p_nsg: float = field(default=float("nan"))

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "p_d": self.p_d,
            "p_klm": self.p_klm,
            "p_d_eff": self.p_d_eff,
            "p_klm_eff": self.p_klm_eff,
            "p_nsg": self.p_nsg,
        }


# reference gates


def sign_ns_params() -> NsGateParams:
    """Closed-form NS parameters for a sign flip with success 1/4."""
    return NsGateParams(math.cos(3 * math.pi / 8), math.sqrt(2) - 1, math.cos(math.pi / 8), math.pi)


@lru_cache(maxsize=8)
def reference_params(phase: float, seed: int = 0) -> tuple[NsGateParams, DestructiveGateParams]:
    """Verified NS and destructive-gate parameters for ``phase``.

    The sign-flip case uses closed forms; any other phase is searched for.
    """
    if math.isclose(phase, math.pi, abs_tol=1e-12):
        ns = sign_ns_params()
        return ns, constrained_params(1 / math.sqrt(2), ns)
    from .optimize import find_destructive_params, find_ns_params

    ns = find_ns_params(phase, seed=seed)
    return ns, find_destructive_params(phase, ns=ns, seed=seed)


def reference_gates(phase: float = math.pi, seed: int = 0) -> tuple[HeraldedGate, HeraldedGate]:
    """(destructive, KLM) gates with embedded linear-optics NS gates."""
    ns, dp = reference_params(phase, seed)
    return build_cphase_destructive(dp, "klm"), build_cphase_klm(phase, ns, "klm")


def _verified(gate: HeraldedGate) -> HeraldedGate:
    res = gate.action_residual()
    if res > VERIFY_TOL:
        raise GateError(f"{gate.name}: action residual {res:.3e} exceeds {VERIFY_TOL}")
    return gate


# success probabilities


def success_prob(gate: HeraldedGate, psi_t, psi_c) -> float:
    """Brute-force herald probability for target ``psi_t`` and control ``psi_c``."""
    _verified(gate)
    return gate.success_prob(_qubit(psi_t), _qubit(psi_c))


def _qubit(q) -> tuple[complex, complex]:
    if isinstance(q, QubitAmplitudes):
        return q.as_tuple()
    return QubitAmplitudes(*q).as_tuple()


def eq5_success(params: DestructiveGateParams, psi_t, psi_c) -> float:
    """Closed-form success of the sign-flip destructive gate on constrained splitters."""
    a, b = _qubit(psi_t)
    g, d = _qubit(psi_c)
    p_nsg = ns_success(params.ns)
    cross = 2 * (abs(a) ** 2 - abs(b) ** 2) * (g.conjugate() * d).real
    return p_nsg * params.r2**2 * params.r3**2 * (1 + cross)


def success_batch(gate: HeraldedGate, T: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Herald probabilities for many input pairs, from the brute-force transfer matrix."""
    keys, M = gate.transfer
    X = np.einsum("si,sj->sij", T, C).reshape(len(T), 4)
    return np.sum(np.abs(X @ M.T) ** 2, axis=1)


def average_success(gate: HeraldedGate, measure: InputMeasure | None = None) -> Estimate:
    """Input-averaged success; closed form for the Haar product measure.

    For independent Haar qubits the average of ``|M x|^2`` is ``||M||_F^2 / 4``.
    Other measures are sampled and reported with their standard error.
    """
    measure = measure or InputMeasure()
    _verified(gate)
    if measure.kind == "haar-product":
        return Estimate(gate.average_success_closed_form())
    return monte_carlo_success(gate, measure)


def monte_carlo_success(gate: HeraldedGate, measure: InputMeasure) -> Estimate:
    T, C = measure.sample()
    p = success_batch(gate, T, C)
    err = float(p.std(ddof=1) / math.sqrt(len(p))) if len(p) > 1 else 0.0
    return Estimate(float(p.mean()), err, "monte-carlo", len(p))


# sweeps


def t3_grid(lo: float = 0.501, hi: float = 0.999, step: float = 0.002) -> list[float]:
    n = int(round((hi - lo) / step))
    return [round(lo + k * step, 12) for k in range(n + 1)]


def sweep_constraint_curve(grid: Sequence[float]) -> list[SweepRow]:
    """Rows ``(t3, t1, t2, r2r3)`` along the constraint curve, in ascending ``t3``.

    Grid points without a solution are kept as NaN rows flagged ``no-solution``.
    """
    names = ("t3", "t1", "t2", "r2r3")
    rows = []
    for t3 in sorted(grid):
        sol = solve_constraints(t3)
        if sol is None:
            rows.append(SweepRow(names, (t3, math.nan, math.nan, math.nan), "no-solution"))
            continue
        t1, t2 = sol
        r2r3 = math.sqrt(max(0.0, 1 - t2 * t2)) * math.sqrt(max(0.0, 1 - t3 * t3))
        rows.append(SweepRow(names, (t3, t1, t2, r2r3)))
    return rows


def success_surface(
    alpha_grid: Sequence[float],
    gamma_grid: Sequence[float],
    phase_config: str = "real",
    gate: HeraldedGate | None = None,
) -> list[SweepRow]:
    """Brute-force success over real ``alpha`` and ``gamma``.

    ``beta = sqrt(1 - alpha^2)`` and ``delta = sqrt(1 - gamma^2)``, multiplied by
    ``i`` when ``phase_config`` is ``imaginary``.
    """
    if phase_config not in ("real", "imaginary"):
        raise ValueError(f"unknown phase config {phase_config!r}")
    gate = _verified(gate or reference_gates()[0])
    ph = 1j if phase_config == "imaginary" else 1.0
    pts = [(a, g) for a in sorted(alpha_grid) for g in sorted(gamma_grid)]
    for a, g in pts:
        if not (0 <= a <= 1 and 0 <= g <= 1):
            raise ValueError("grid values must lie in [0, 1]")
    T = np.array([[a, ph * math.sqrt(max(0.0, 1 - a * a))] for a, _ in pts], dtype=complex)
    C = np.array([[g, ph * math.sqrt(max(0.0, 1 - g * g))] for _, g in pts], dtype=complex)
    p = success_batch(gate, T, C)
    return [SweepRow(("alpha", "gamma", "p"), (a, g, float(v))) for (a, g), v in zip(pts, p)]


def unit_grid(n: int = 21) -> list[float]:
    return [k / (n - 1) for k in range(n)]


# fidelity under detector loss


def lossy_spec(spec: HeraldSpec, eta: float, which: str = "all") -> HeraldSpec:
    """Detectors behind efficiency ``eta``; ``which`` picks all, null-herald or photon-herald ones."""
    if which not in ("all", "null", "photon"):
        raise ValueError(f"unknown detector subset {which!r}")

    def hit(d):
        return which == "all" or (which == "null") == (d.count == 0)

    dets = tuple(Detector(d.mode, d.count, d.kind, eta if hit(d) else 1.0, d.dark) for d in spec.detectors)
    return HeraldSpec(dets, spec.outputs)


def branch_maps(gate: HeraldedGate, spec: HeraldSpec):
    """Linear maps of every accepted loss branch, stacked as ``(branches, keys, 4)``.

    Returned with the output keys. Each branch is linear in the logical input, so
    four basis evolutions determine the output for any input.
    """
    per: dict[tuple, dict[int, object]] = {}
    for i in range(gate.dim):
        x = np.zeros(gate.dim, dtype=complex)
        x[i] = 1
        for pat, st in lossy_branches(gate.circuit, gate.input_from_vector(x), spec).items():
            per.setdefault(pat, {})[i] = st
    keys = sorted(set(gate.output_basis) | {k for d in per.values() for s in d.values() for k in s.terms})
    idx = {k: j for j, k in enumerate(keys)}
    maps = np.zeros((len(per), len(keys), gate.dim), dtype=complex)
    for b, (pat, d) in enumerate(sorted(per.items())):
        for i, s in d.items():
            for k, a in s.terms.items():
                maps[b, idx[k], i] = a
    return keys, maps


def mean_fidelity(gate: HeraldedGate, eta: float, X: np.ndarray, which: str = "all") -> float:
    """Average over the rows of ``X`` (logical input vectors) of the heralded-output fidelity."""
    keys, maps = branch_maps(gate, lossy_spec(gate.spec, eta, which))
    idx = {k: j for j, k in enumerate(keys)}
    ideal = np.zeros((len(keys), gate.dim), dtype=complex)
    for j, k in enumerate(gate.output_basis):
        ideal[idx[k]] = gate.ideal_map[j]
    tv = X @ ideal.T
    tv /= np.linalg.norm(tv, axis=1, keepdims=True)
    num = np.zeros(len(X))
    den = np.zeros(len(X))
    for M in maps:
        v = X @ M.T
        num += np.abs(np.sum(tv.conj() * v, axis=1)) ** 2
        den += np.sum(np.abs(v) ** 2, axis=1)
    ok = den > 0
    f = np.where(ok, num / np.where(ok, den, 1.0), 0.0)
    return float(np.clip(f[ok].mean(), 0.0, 1.0)) if ok.any() else 0.0


def eta_grid(lo: float = 0.5, hi: float = 1.0, step: float = 0.01) -> list[float]:
    n = int(round((hi - lo) / step))
    return [round(lo + k * step, 12) for k in range(n + 1)]


def fidelity_curve(
    gate_pair: tuple[HeraldedGate, HeraldedGate] | None = None,
    etas: Sequence[float] | None = None,
    measure: InputMeasure | None = None,
    which: str = "all",
) -> list[SweepRow]:
    """Rows ``(eta, f_d, f_klm)``: average fidelity of each gate's heralded output.

    The same input samples are used at every ``eta``, so the curves are smooth in
    ``eta`` and their differences are not dominated by sampling noise.
    """
    d_gate, k_gate = gate_pair or reference_gates()
    etas = eta_grid() if etas is None else list(etas)
    for e in etas:
        if not 0 < e <= 1:
            raise ValueError(f"efficiency {e} outside (0, 1]")
    T, C = (measure or InputMeasure()).sample()
    X = np.einsum("si,sj->sij", T, C).reshape(len(T), 4)
    rows = []
    for e in sorted(etas):
        fd = mean_fidelity(d_gate, e, X, which)
        fk = mean_fidelity(k_gate, e, X, which)
        rows.append(SweepRow(("eta", "f_d", "f_klm"), (e, fd, fk)))
    return rows


def infidelity_slopes(rows: Sequence[SweepRow]) -> tuple[float, float]:
    """``(1 - F) / (1 - eta)`` for both gates at the last row with ``eta < 1``."""
    row = [r for r in rows if r["eta"] < 1][-1]
    gap = 1 - row["eta"]
    return (1 - row["f_d"]) / gap, (1 - row["f_klm"]) / gap


# tables


def emit_tables(
    cost: AncillaCostModel | float = 0.01,
    phases: Sequence[float] = (math.pi, math.pi / 2),
    seed: int = 0,
) -> list[TableRecord]:
    """Average success of both gates per phase, raw and discounted for ancilla heralding."""
    p_herald = cost.p_herald if isinstance(cost, AncillaCostModel) else float(cost)
    out = []
    for phase in phases:
        d_gate, k_gate = reference_gates(phase, seed)
        p_d = average_success(d_gate).value
        p_k = average_success(k_gate).value
        out.append(
            TableRecord(
                phase,
                p_d,
                p_k,
                effective_success(p_d, AncillaCostModel(d_gate.ancilla_count, p_herald)),
                effective_success(p_k, AncillaCostModel(k_gate.ancilla_count, p_herald)),
                ns_success(d_gate.params.ns),
            )
        )
    return out

"""Linear-optical elements acting on sparse Fock states, plus a permanent oracle.

Beam splitters use one convention throughout: real transmission ``t`` and a
factor ``i`` on reflection. The permanent route (``compile_mode_unitary`` +
``amplitude_via_permanent``) is kept independent of the Fock-space route so the
two can be checked against each other.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .circuit import BeamSplitter, Circuit, CircuitError, Loss, NonlinearPhase, PhaseShift
from .fock import FockError, Occupation, SparseState, _merge


@dataclass(frozen=True)
class BeamSplitterParams:
    t: float

    def __post_init__(self):
        if not 0 <= self.t <= 1:
            raise ValueError(f"transmission {self.t} outside [0, 1]")

    @property
    def r(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.t**2))


@lru_cache(maxsize=4096)
def _bs_table(n1: int, n2: int, t: float) -> tuple[tuple[int, complex], ...]:
    """Output ``(p, amplitude)`` pairs for |n1, n2> -> sum amp |p, n1+n2-p>."""
    r = math.sqrt(max(0.0, 1.0 - t * t))
    ir = 1j * r
    out: dict[int, complex] = {}
    for k in range(n1 + 1):
        ck = math.comb(n1, k) * t**k * ir ** (n1 - k)
        for l in range(n2 + 1):
            cl = math.comb(n2, l) * ir**l * t ** (n2 - l)
            p = k + l
            out[p] = out.get(p, 0j) + ck * cl
    n = n1 + n2
    norm = math.sqrt(math.factorial(n1) * math.factorial(n2))
    return tuple(
        (p, a * math.sqrt(math.factorial(p) * math.factorial(n - p)) / norm)
        for p, a in sorted(out.items())
        if abs(a) > 0
    )


def _check_mode(state: SparseState, m: int) -> None:
    if not 0 <= m < state.modes:
        raise FockError(f"mode {m} out of range for {state.modes} modes")


def beam_splitter(state: SparseState, m1: int, m2: int, p: BeamSplitterParams | float) -> SparseState:
    t = p.t if isinstance(p, BeamSplitterParams) else float(p)
    _check_mode(state, m1)
    _check_mode(state, m2)
    if m1 == m2:
        raise FockError("beam splitter needs two distinct modes")
    out: dict[Occupation, complex] = {}
    for k, a in state.terms.items():
        n1, n2 = k[m1], k[m2]
        base = list(k)
        for p_out, c in _bs_table(n1, n2, t):
            base[m1] = p_out
            base[m2] = n1 + n2 - p_out
            key = tuple(base)
            out[key] = out.get(key, 0j) + a * c
    return SparseState(state.modes, out, state.cutoff)


def phase_shift(state: SparseState, m: int, phi: float) -> SparseState:
    _check_mode(state, m)
    return SparseState(
        state.modes,
        {k: a * cmath.exp(1j * k[m] * phi) for k, a in state.terms.items()},
        state.cutoff,
    )


def nonlinear_phase(state: SparseState, m: int, coeffs) -> SparseState:
    _check_mode(state, m)
    return SparseState(
        state.modes,
        {k: a * coeffs[k[m]] for k, a in state.terms.items() if k[m] < len(coeffs)},
        state.cutoff,
    )


def loss_channel(state: SparseState, m: int, eta: float) -> list[tuple[SparseState, int]]:
    """Split ``state`` into pure branches by the number of photons lost from mode ``m``.

    Loss is a splitter with ``t = sqrt(eta)`` onto a fresh environment mode; each
    branch is the (unnormalized) system state for one environment photon count.
    """
    _check_mode(state, m)
    if eta >= 1.0:
        return [(state, 0)]
    padded = SparseState(state.modes + 1, {k + (0,): a for k, a in state.terms.items()}, state.cutoff)
    mixed = beam_splitter(padded, m, state.modes, math.sqrt(max(eta, 0.0)))
    groups: dict[int, dict[Occupation, complex]] = {}
    for k, a in mixed.terms.items():
        groups.setdefault(k[-1], {})[k[:-1]] = a
    return [(SparseState(state.modes, groups[n], state.cutoff), n) for n in sorted(groups)]


def apply_element(state: SparseState, el) -> SparseState:
    if isinstance(el, BeamSplitter):
        return beam_splitter(state, el.m1, el.m2, el.t)
    if isinstance(el, PhaseShift):
        return phase_shift(state, el.m, el.phi)
    if isinstance(el, NonlinearPhase):
        return nonlinear_phase(state, el.m, el.coeffs)
    if isinstance(el, Loss):
        raise CircuitError("loss is not a pure-state element; use loss_channel")
    raise CircuitError(f"unknown element {el!r}")


# permanent route


def bs_matrix(t: float) -> np.ndarray:
    r = math.sqrt(max(0.0, 1.0 - t * t))
    return np.array([[t, 1j * r], [1j * r, t]], dtype=complex)


def compile_mode_unitary(circuit: Circuit) -> np.ndarray:
    """Single-particle transfer matrix ``U`` with ``a_j† -> sum_k U[k, j] a_k†``."""
    U = np.eye(circuit.modes, dtype=complex)
    for el in circuit.elements:
        if isinstance(el, BeamSplitter):
            idx = [el.m1, el.m2]
            U[idx, :] = bs_matrix(el.t) @ U[idx, :]
        elif isinstance(el, PhaseShift):
            U[el.m, :] *= cmath.exp(1j * el.phi)
        else:
            raise CircuitError(f"{type(el).__name__} is not a linear-optical element")
    return U


def permanent(A: np.ndarray) -> complex:
    """Ryser's inclusion-exclusion formula."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if n == 0:
        return 1.0 + 0j
    total = 0j
    cols = range(n)
    for size in range(1, n + 1):
        sign = (-1) ** size
        for subset in combinations(cols, size):
            total += sign * np.prod(A[:, subset].sum(axis=1))
    return (-1) ** n * total


def amplitude_via_permanent(U: np.ndarray, n_in, n_out) -> complex:
    """<n_out| U_Fock |n_in> from the permanent of the repeated-index submatrix."""
    n_in, n_out = tuple(n_in), tuple(n_out)
    if sum(n_in) != sum(n_out):
        raise ValueError(f"photon number mismatch: {sum(n_in)} in, {sum(n_out)} out")
    cols = [j for j, n in enumerate(n_in) for _ in range(n)]
    rows = [k for k, n in enumerate(n_out) for _ in range(n)]
    norm = math.sqrt(
        math.prod(math.factorial(n) for n in n_in) * math.prod(math.factorial(n) for n in n_out)
    )
    return permanent(np.asarray(U)[np.ix_(rows, cols)]) / norm


def evolve_via_permanent(U: np.ndarray, state: SparseState) -> SparseState:
    """Apply ``U`` to every term of ``state`` by enumerating output patterns."""
    M = state.modes
    out: list[tuple[Occupation, complex]] = []
    for k, a in state.terms.items():
        n = sum(k)
        for pattern in _patterns(n, M):
            out.append((pattern, a * amplitude_via_permanent(U, k, pattern)))
    return SparseState(M, _merge(out), state.cutoff)


def _patterns(n: int, modes: int):
    if modes == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _patterns(n - first, modes - 1):
            yield (first,) + rest

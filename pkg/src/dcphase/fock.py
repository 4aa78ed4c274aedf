"""Sparse multimode Fock states.

A state is a mapping from occupation tuples (photon count per mode) to complex
amplitudes. States are treated as immutable: every operation returns a new
``SparseState``.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

DEFAULT_CUTOFF = 4
PRUNE_TOL = 1e-14

Occupation = tuple[int, ...]


class FockError(ValueError):
    """Malformed occupation vector or photon cutoff exceeded."""


def _check_occ(occ: Sequence[int], modes: int, cutoff: int) -> Occupation:
    occ = tuple(int(n) for n in occ)
    if len(occ) != modes:
        raise FockError(f"occupation {occ} has {len(occ)} modes, expected {modes}")
    if any(n < 0 for n in occ):
        raise FockError(f"negative photon count in {occ}")
    if sum(occ) > cutoff:
        raise FockError(f"occupation {occ} exceeds photon cutoff {cutoff}")
    return occ


@dataclass(frozen=True)
class SparseState:
    """Complex amplitudes over Fock basis vectors of ``modes`` modes.

    Amplitudes with magnitude below ``PRUNE_TOL`` are dropped on construction.
    The state may be unnormalized (e.g. after heralding).
    """

    modes: int
    terms: Mapping[Occupation, complex] = field(default_factory=dict)
    cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        pruned = {k: complex(v) for k, v in self.terms.items() if abs(v) >= PRUNE_TOL}
        object.__setattr__(self, "terms", pruned)

    @classmethod
    def vacuum(cls, modes: int, cutoff: int = DEFAULT_CUTOFF) -> "SparseState":
        return cls(modes, {(0,) * modes: 1.0}, cutoff)

    @classmethod
    def basis(cls, occ: Sequence[int], cutoff: int = DEFAULT_CUTOFF) -> "SparseState":
        occ = _check_occ(occ, len(occ), cutoff)
        return cls(len(occ), {occ: 1.0}, cutoff)

    def __len__(self) -> int:
        return len(self.terms)

    def __getitem__(self, occ: Sequence[int]) -> complex:
        return self.terms.get(tuple(occ), 0j)

    def items(self) -> list[tuple[Occupation, complex]]:
        """Terms in lexicographic occupation order."""
        return sorted(self.terms.items())

    def norm2(self) -> float:
        return sum(abs(a) ** 2 for a in self.terms.values())

    def is_zero(self) -> bool:
        return not self.terms

    def photon_numbers(self) -> set[int]:
        return {sum(k) for k in self.terms}

    def scale(self, c: complex) -> "SparseState":
        return SparseState(self.modes, {k: c * a for k, a in self.terms.items()}, self.cutoff)

    def normalized(self) -> "SparseState":
        n2 = self.norm2()
        if n2 == 0:
            raise FockError("cannot normalize the zero state")
        return self.scale(1 / math.sqrt(n2))

    def with_cutoff(self, cutoff: int) -> "SparseState":
        for k in self.terms:
            if sum(k) > cutoff:
                raise FockError(f"occupation {k} exceeds photon cutoff {cutoff}")
        return SparseState(self.modes, self.terms, cutoff)

    def __add__(self, other: "SparseState") -> "SparseState":
        _same_modes(self, other)
        out = dict(self.terms)
        for k, a in other.terms.items():
            out[k] = out.get(k, 0j) + a
        return SparseState(self.modes, out, max(self.cutoff, other.cutoff))

    def __sub__(self, other: "SparseState") -> "SparseState":
        return self + other.scale(-1)

    def permute_modes(self, order: Sequence[int]) -> "SparseState":
        """New state whose mode ``i`` is this state's mode ``order[i]``."""
        return SparseState(
            len(order),
            _merge((tuple(k[j] for j in order), a) for k, a in self.terms.items()),
            self.cutoff,
        )

    def allclose(self, other: "SparseState", atol: float = 1e-12) -> bool:
        _same_modes(self, other)
        keys = set(self.terms) | set(other.terms)
        return all(abs(self[k] - other[k]) <= atol for k in keys)

    def to_dict(self) -> dict:
        return {
            "modes": self.modes,
            "cutoff": self.cutoff,
            "terms": [
                {"occ": list(k), "re": a.real, "im": a.imag} for k, a in self.items()
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: Mapping) -> "SparseState":
        entries = [(t["occ"], complex(t.get("re", 0.0), t.get("im", 0.0))) for t in d["terms"]]
        return make_state(int(d["modes"]), entries, cutoff=int(d.get("cutoff", DEFAULT_CUTOFF)))

    @classmethod
    def from_json(cls, text: str) -> "SparseState":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class QubitAmplitudes:
    """Logical amplitudes (a0, a1) of a single qubit."""

    a0: complex
    a1: complex

    def __post_init__(self):
        n2 = abs(self.a0) ** 2 + abs(self.a1) ** 2
        if abs(n2 - 1) > 1e-12:
            raise FockError(f"qubit amplitudes not normalized: |a0|^2+|a1|^2 = {n2}")

    @classmethod
    def from_angles(cls, theta: float, phase: float = 0.0) -> "QubitAmplitudes":
        return cls(math.cos(theta), cmath.exp(1j * phase) * math.sin(theta))

    def as_tuple(self) -> tuple[complex, complex]:
        return (complex(self.a0), complex(self.a1))


def _same_modes(a: SparseState, b: SparseState) -> None:
    if a.modes != b.modes:
        raise FockError(f"mode mismatch: {a.modes} vs {b.modes}")


def _merge(pairs: Iterable[tuple[Occupation, complex]]) -> dict[Occupation, complex]:
    out: dict[Occupation, complex] = {}
    for k, a in pairs:
        out[k] = out.get(k, 0j) + a
    return out


def make_state(
    modes: int,
    entries: Iterable[tuple[Sequence[int], complex]],
    cutoff: int = DEFAULT_CUTOFF,
) -> SparseState:
    """Build a state from ``(occupation, amplitude)`` pairs, summing duplicates."""
    return SparseState(
        modes,
        _merge((_check_occ(occ, modes, cutoff), complex(a)) for occ, a in entries),
        cutoff,
    )


def ladder(state: SparseState, mode: int, dir: str) -> SparseState:
    """Apply the creation (``dir="raise"``) or annihilation (``"lower"``) operator."""
    if not 0 <= mode < state.modes:
        raise FockError(f"mode {mode} out of range for {state.modes} modes")
    out: dict[Occupation, complex] = {}
    if dir == "raise":
        for k, a in state.terms.items():
            if sum(k) + 1 > state.cutoff:
                raise FockError(f"raising {k} on mode {mode} exceeds cutoff {state.cutoff}")
            n = k[mode]
            out[k[:mode] + (n + 1,) + k[mode + 1 :]] = a * math.sqrt(n + 1)
    elif dir == "lower":
        for k, a in state.terms.items():
            n = k[mode]
            if n:
                out[k[:mode] + (n - 1,) + k[mode + 1 :]] = a * math.sqrt(n)
    else:
        raise ValueError(f"dir must be 'raise' or 'lower', got {dir!r}")
    return SparseState(state.modes, out, state.cutoff)


def inner(a: SparseState, b: SparseState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    _same_modes(a, b)
    if len(a.terms) > len(b.terms):
        return sum(a.terms[k].conjugate() * v for k, v in b.terms.items() if k in a.terms)
    return sum(v.conjugate() * b.terms[k] for k, v in a.terms.items() if k in b.terms)


def tensor(a: SparseState, b: SparseState, cutoff: int | None = None) -> SparseState:
    """a ⊗ b with ``a``'s modes first."""
    cutoff = max(a.cutoff, b.cutoff) if cutoff is None else cutoff
    out = {}
    for ka, va in a.terms.items():
        for kb, vb in b.terms.items():
            k = ka + kb
            if sum(k) > cutoff:
                raise FockError(f"tensor product term {k} exceeds cutoff {cutoff}")
            out[k] = va * vb
    return SparseState(a.modes + b.modes, out, cutoff)


def project_mode(state: SparseState, mode: int, n: int) -> SparseState:
    """Keep terms with ``n`` photons in ``mode`` and drop that mode."""
    return SparseState(
        state.modes - 1,
        {k[:mode] + k[mode + 1 :]: a for k, a in state.terms.items() if k[mode] == n},
        state.cutoff,
    )

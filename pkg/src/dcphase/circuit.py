"""Circuit description: an ordered list of optical elements over indexed modes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Union


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class BeamSplitter:
    """Two-mode splitter, ``a1† -> t a1† + i r a2†``, ``a2† -> i r a1† + t a2†``."""

    m1: int
    m2: int
    t: float

    def __post_init__(self):
        if self.m1 == self.m2:
            raise CircuitError("beam splitter needs two distinct modes")
        if not -1e-12 <= self.t <= 1 + 1e-12:
            raise CircuitError(f"transmission {self.t} outside [0, 1]")

    @property
    def r(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.t * self.t))

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.m1, self.m2)


@dataclass(frozen=True)
class PhaseShift:
    m: int
    phi: float

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.m,)


@dataclass(frozen=True)
class Loss:
    m: int
    eta: float

    def __post_init__(self):
        if not 0 <= self.eta <= 1:
            raise CircuitError(f"efficiency {self.eta} outside [0, 1]")

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.m,)


@dataclass(frozen=True)
class NonlinearPhase:
    """Number-diagonal map ``|n> -> coeffs[n] |n>`` on one mode.

    Photon numbers beyond ``len(coeffs)`` are mapped to zero. This stands in for
    a heralded nonlinear sign gate whose ancilla modes have been traced out.
    """

    m: int
    coeffs: tuple[complex, ...]
    label: str = "ns"

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.m,)


Element = Union[BeamSplitter, PhaseShift, Loss, NonlinearPhase]


@dataclass(frozen=True)
class Circuit:
    """Elements applied in order, after ``sources`` photons are injected.

    ``sources`` holds ``(mode, count)`` pairs; each injects ``count`` photons into
    a mode assumed empty at the input.
    """

    modes: int
    elements: tuple[Element, ...] = ()
    sources: tuple[tuple[int, int], ...] = ()
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "sources", tuple((int(m), int(n)) for m, n in self.sources))
        object.__setattr__(self, "labels", tuple(self.labels))
        for el in self.elements:
            for m in el.modes:
                if not 0 <= m < self.modes:
                    raise CircuitError(f"{el} addresses mode {m} of {self.modes}")
        for m, n in self.sources:
            if not 0 <= m < self.modes or n < 0:
                raise CircuitError(f"bad source ({m}, {n})")
        if self.labels and len(self.labels) != self.modes:
            raise CircuitError("labels must name every mode")

    def mode(self, label: str) -> int:
        return self.labels.index(label)

    @property
    def source_photons(self) -> int:
        return sum(n for _, n in self.sources)

    def has_loss(self) -> bool:
        return any(isinstance(el, Loss) for el in self.elements)

    def then(self, *elements: Element) -> "Circuit":
        return Circuit(self.modes, self.elements + tuple(elements), self.sources, self.labels)

    def to_dict(self) -> dict:
        return {
            "modes": self.modes,
            "labels": list(self.labels),
            "sources": [list(s) for s in self.sources],
            "elements": [element_to_dict(el) for el in self.elements],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Circuit":
        return cls(
            modes=int(d["modes"]),
            elements=tuple(element_from_dict(e) for e in d.get("elements", [])),
            sources=tuple(tuple(s) for s in d.get("sources", [])),
            labels=tuple(d.get("labels", [])),
        )


def element_to_dict(el: Element) -> dict:
    if isinstance(el, BeamSplitter):
        return {"bs": {"m1": el.m1, "m2": el.m2, "t": el.t}}
    if isinstance(el, PhaseShift):
        return {"ps": {"m": el.m, "phi": el.phi}}
    if isinstance(el, Loss):
        return {"loss": {"m": el.m, "eta": el.eta}}
    if isinstance(el, NonlinearPhase):
        coeffs = [[complex(c).real, complex(c).imag] for c in el.coeffs]
        return {"nl": {"m": el.m, "coeffs": coeffs, "label": el.label}}
    raise CircuitError(f"unknown element {el!r}")


def element_from_dict(d: dict) -> Element:
    if len(d) != 1:
        raise CircuitError(f"element must have exactly one kind key: {d}")
    (kind, p), = d.items()
    if kind == "bs":
        return BeamSplitter(int(p["m1"]), int(p["m2"]), float(p["t"]))
    if kind == "ps":
        return PhaseShift(int(p["m"]), float(p["phi"]))
    if kind == "loss":
        return Loss(int(p["m"]), float(p["eta"]))
    if kind == "nl":
        coeffs = tuple(complex(re, im) for re, im in p["coeffs"])
        return NonlinearPhase(int(p["m"]), coeffs, p.get("label", "ns"))
    raise CircuitError(f"unknown element kind {kind!r}")


def inverse_beam_splitter(m1: int, m2: int, t: float) -> list[Element]:
    """Adjoint of ``BeamSplitter(m1, m2, t)`` built from the same primitive."""
    return [PhaseShift(m2, math.pi), BeamSplitter(m1, m2, t), PhaseShift(m2, math.pi)]


def concat(circuits: Sequence[Circuit]) -> Circuit:
    """Place circuits side by side on disjoint mode blocks."""
    elements, sources, labels = [], [], []
    offset = 0
    for c in circuits:
        for el in c.elements:
            elements.append(_shift(el, offset))
        sources.extend((m + offset, n) for m, n in c.sources)
        labels.extend(c.labels or [f"m{offset + i}" for i in range(c.modes)])
        offset += c.modes
    return Circuit(offset, tuple(elements), tuple(sources), tuple(labels))


def _shift(el: Element, k: int) -> Element:
    if isinstance(el, BeamSplitter):
        return BeamSplitter(el.m1 + k, el.m2 + k, el.t)
    if isinstance(el, PhaseShift):
        return PhaseShift(el.m + k, el.phi)
    if isinstance(el, Loss):
        return Loss(el.m + k, el.eta)
    return NonlinearPhase(el.m + k, el.coeffs, el.label)


def relabel(el: Element, mapping: Sequence[int]) -> Element:
    """Move ``el`` so that its mode ``i`` becomes ``mapping[i]``."""
    if isinstance(el, BeamSplitter):
        return BeamSplitter(mapping[el.m1], mapping[el.m2], el.t)
    if isinstance(el, PhaseShift):
        return PhaseShift(mapping[el.m], el.phi)
    if isinstance(el, Loss):
        return Loss(mapping[el.m], el.eta)
    return NonlinearPhase(mapping[el.m], el.coeffs, el.label)


@dataclass
class CircuitBuilder:
    """Accumulates named modes, sources and elements."""

    labels: list[str] = field(default_factory=list)
    elements: list[Element] = field(default_factory=list)
    sources: list[tuple[int, int]] = field(default_factory=list)

    def add_mode(self, label: str) -> int:
        if label in self.labels:
            raise CircuitError(f"duplicate mode label {label!r}")
        self.labels.append(label)
        return len(self.labels) - 1

    def __getitem__(self, label: str) -> int:
        return self.labels.index(label)

    def add(self, *elements: Element) -> None:
        self.elements.extend(elements)

    def inject(self, mode: int, n: int = 1) -> None:
        self.sources.append((mode, n))

    def embed(self, sub: Circuit, mapping: Sequence[int]) -> None:
        """Append ``sub``'s elements and sources with its modes mapped onto ours."""
        self.elements.extend(relabel(el, mapping) for el in sub.elements)
        self.sources.extend((mapping[m], n) for m, n in sub.sources)

    def build(self) -> Circuit:
        return Circuit(len(self.labels), tuple(self.elements), tuple(self.sources), tuple(self.labels))

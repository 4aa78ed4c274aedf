"""Circuit execution, detector heralding and fidelities of heralded outputs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

from .circuit import Circuit, CircuitError
from .elements import apply_element, loss_channel
from .fock import FockError, Occupation, SparseState, inner, ladder

PNR = "pnr"
THRESHOLD = "threshold"


@dataclass(frozen=True)
class Detector:
    """Detector on ``mode`` that heralds success when it reads ``count``.

    For threshold detectors ``count`` is 0 (no click) or 1 (click, any n >= 1).
    ``dark`` is the probability of one spurious count per heralded event.
    """

    mode: int
    count: int
    kind: str = PNR
    eta: float = 1.0
    dark: float = 0.0

    def __post_init__(self):
        if self.kind not in (PNR, THRESHOLD):
            raise ValueError(f"unknown detector kind {self.kind!r}")
        if self.kind == THRESHOLD and self.count not in (0, 1):
            raise ValueError("threshold detectors herald on 0 (no click) or 1 (click)")
        if not 0 <= self.eta <= 1:
            raise ValueError(f"efficiency {self.eta} outside [0, 1]")
        if not 0 <= self.dark < 1:
            raise ValueError(f"dark-count probability {self.dark} outside [0, 1)")

    def accepts(self, n: int) -> bool:
        if self.kind == THRESHOLD:
            return (n >= 1) == (self.count >= 1)
        return n == self.count


@dataclass(frozen=True)
class HeraldSpec:
    detectors: tuple[Detector, ...]
    outputs: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(self.detectors))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        dmodes = [d.mode for d in self.detectors]
        if len(set(dmodes)) != len(dmodes):
            raise ValueError("two detectors on one mode")
        if set(dmodes) & set(self.outputs):
            raise ValueError("detector modes overlap output modes")

    def output_modes(self, modes: int) -> tuple[int, ...]:
        if self.outputs:
            return self.outputs
        dmodes = {d.mode for d in self.detectors}
        return tuple(m for m in range(modes) if m not in dmodes)

    def with_efficiency(self, eta: float) -> "HeraldSpec":
        dets = tuple(Detector(d.mode, d.count, d.kind, eta, d.dark) for d in self.detectors)
        return HeraldSpec(dets, self.outputs)

    def to_dict(self) -> dict:
        return {
            "detectors": [
                {"m": d.mode, "n": d.count, "kind": d.kind, "eta": d.eta, "dark": d.dark}
                for d in self.detectors
            ],
            "outputs": list(self.outputs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HeraldSpec":
        dets = tuple(
            Detector(
                int(x["m"]),
                int(x["n"]),
                x.get("kind", PNR),
                float(x.get("eta", 1.0)),
                float(x.get("dark", 0.0)),
            )
            for x in d["detectors"]
        )
        return cls(dets, tuple(int(m) for m in d.get("outputs", [])))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class ConditionalResult:
    """Unnormalized heralded output ``state`` and its success probability."""

    state: SparseState
    prob: float

    def to_dict(self) -> dict:
        return {"prob": self.prob, "state": self.state.to_dict()}


@dataclass(frozen=True)
class MixedResult:
    """Heralded output as a mixture of normalized pure branches.

    ``patterns[k]`` records, per detector, how many photons were lost before it
    (and whether a dark count was needed) for branch ``k``.
    """

    branches: tuple[tuple[float, SparseState], ...]
    herald_prob: float
    patterns: tuple[tuple, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "herald_prob": self.herald_prob,
            "branches": [
                {"weight": w, "pattern": list(p), "state": s.to_dict()}
                for (w, s), p in zip(self.branches, self.patterns)
            ],
        }


def inject_sources(circuit: Circuit, state: SparseState, cutoff: int | None = None) -> SparseState:
    need = max(state.photon_numbers(), default=0) + circuit.source_photons
    cutoff = max(state.cutoff, need) if cutoff is None else cutoff
    state = state.with_cutoff(cutoff)
    for m, n in circuit.sources:
        for _ in range(n):
            state = ladder(state, m, "raise")
        state = state.scale(1 / math.sqrt(math.factorial(n)))
    return state


def run(circuit: Circuit, input: SparseState, cutoff: int | None = None) -> SparseState:
    """Inject the circuit's source photons into ``input``, then apply every element."""
    if input.modes != circuit.modes:
        raise FockError(f"input has {input.modes} modes, circuit has {circuit.modes}")
    if circuit.has_loss():
        raise CircuitError("circuit contains loss; use herald_lossy")
    state = inject_sources(circuit, input, cutoff)
    for el in circuit.elements:
        state = apply_element(state, el)
    return state


def _strip(terms, outputs: Sequence[int]) -> dict[Occupation, complex]:
    out: dict[Occupation, complex] = {}
    for k, a in terms:
        key = tuple(k[m] for m in outputs)
        out[key] = out.get(key, 0j) + a
    return out


def herald_ideal(state: SparseState, spec: HeraldSpec) -> ConditionalResult:
    """Post-select on perfect detectors; the result lives on the output modes only."""
    outputs = spec.output_modes(state.modes)
    kept = [(k, a) for k, a in state.terms.items() if all(d.accepts(k[d.mode]) for d in spec.detectors)]
    for d in spec.detectors:
        if d.kind == THRESHOLD and len({k[d.mode] for k, _ in kept}) > 1:
            raise ValueError(
                f"threshold click on mode {d.mode} mixes photon numbers; use herald_lossy"
            )
    out = SparseState(len(outputs), _strip(kept, outputs), state.cutoff)
    return ConditionalResult(out, out.norm2())


def simulate_heralded(circuit: Circuit, input: SparseState, spec: HeraldSpec) -> ConditionalResult:
    """Same result as ``herald_ideal(run(circuit, input), spec)``.

    Each detector mode is projected right after the last element that touches
    it, which keeps the intermediate state small in wide circuits.
    """
    if input.modes != circuit.modes:
        raise FockError(f"input has {input.modes} modes, circuit has {circuit.modes}")
    if circuit.has_loss():
        raise CircuitError("circuit contains loss; use herald_lossy")
    last = {d.mode: -1 for d in spec.detectors}
    for i, el in enumerate(circuit.elements):
        for m in el.modes:
            if m in last:
                last[m] = i
    due: dict[int, list] = {}
    for d in spec.detectors:
        due.setdefault(last[d.mode], []).append(d)

    def project(state, dets):
        return SparseState(
            state.modes,
            {k: a for k, a in state.terms.items() if all(d.accepts(k[d.mode]) for d in dets)},
            state.cutoff,
        )

    state = project(inject_sources(circuit, input), due.get(-1, []))
    for i, el in enumerate(circuit.elements):
        state = apply_element(state, el)
        if i in due:
            state = project(state, due[i])
    return herald_ideal(state, spec)


def _dark_options(d: Detector):
    """(accepted true count predicate, classical weight, dark flag) per dark-count case."""
    if d.kind == PNR:
        opts = [(lambda n, k=d.count: n == k, 1 - d.dark, 0)]
        if d.count >= 1 and d.dark > 0:
            opts.append((lambda n, k=d.count: n == k - 1, d.dark, 1))
        return opts
    if d.count == 0:
        return [(lambda n: n == 0, 1 - d.dark, 0)]
    opts = [(lambda n: n >= 1, 1.0, 0)]
    if d.dark > 0:
        opts.append((lambda n: n == 0, d.dark, 1))
    return opts


def lossy_branches(circuit: Circuit, input: SparseState, spec: HeraldSpec) -> dict[tuple, SparseState]:
    """Unnormalized accepted branches keyed by per-detector (lost, read, dark) records.

    Every branch is a linear function of ``input``; the mixture of branches is the
    heralded output when each detector is an ideal counter behind loss ``eta``.
    """
    state = run(circuit, input)
    outputs = spec.output_modes(circuit.modes)
    branches: dict[tuple, SparseState] = {(): state}
    for d in spec.detectors:
        nxt = {}
        for pat, st in branches.items():
            for b, lost in loss_channel(st, d.mode, d.eta):
                nxt[pat + (lost,)] = b
        branches = nxt
    result: dict[tuple, SparseState] = {}
    for pat, st in sorted(branches.items()):
        split: dict[tuple, list] = {(): [(k, a, 1.0) for k, a in st.terms.items()]}
        for d in spec.detectors:
            nxt = {}
            for key, terms in split.items():
                for pred, w, dark in _dark_options(d):
                    for k, a, wt in terms:
                        n = k[d.mode]
                        if pred(n):
                            read = n if d.kind == PNR else 0
                            nxt.setdefault(key + ((read, dark),), []).append((k, a, wt * w))
            split = nxt
        for key, terms in split.items():
            if not terms:
                continue
            amps = _strip(((k, a * math.sqrt(w)) for k, a, w in terms), outputs)
            bstate = SparseState(len(outputs), amps, st.cutoff)
            if not bstate.is_zero():
                full = tuple((lost,) + extra for lost, extra in zip(pat, key))
                result[full] = bstate
    return result


def herald_lossy(circuit: Circuit, input: SparseState, spec: HeraldSpec) -> MixedResult:
    branches = lossy_branches(circuit, input, spec)
    total = sum(b.norm2() for b in branches.values())
    if total == 0:
        return MixedResult((), 0.0, ())
    items = sorted(branches.items())
    return MixedResult(
        tuple((b.norm2() / total, b.normalized()) for _, b in items),
        total,
        tuple(p for p, _ in items),
    )


def fidelity_mixed(result: MixedResult, target: SparseState) -> float:
    """Sum over branches of ``weight * |<target|branch>|^2``."""
    f = 0.0
    for w, s in result.branches:
        if s.modes != target.modes:
            raise FockError(f"branch has {s.modes} modes, target has {target.modes}")
        f += w * abs(inner(target, s)) ** 2
    return min(max(f, 0.0), 1.0)

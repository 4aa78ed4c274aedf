"""Command-line front end.

Every subcommand writes its artifacts under ``--out`` and prints their paths.
Settings come from defaults, then an optional ``--config`` key=value file, then
flags. Exit status: 0 on success, 2 on usage errors, 1 when an optimization is
infeasible or a gate fails verification.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from .gates import AncillaCostModel, GateError, build_npath
from .herald import HeraldSpec, herald_lossy, run, simulate_heralded
from .circuit import Circuit, CircuitError
from .fock import FockError, SparseState

SUBCOMMANDS = ("tables", "fig5", "fig6", "fig7", "fig8", "fig9", "optimize-ns", "optimize-dcz", "npath", "simulate")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    samples: int = 10_000
    cutoff: int = 4
    phase: str = ""
    eta_min: float = 0.5
    eta_max: float = 1.0
    eta_step: float = 0.01
    out: str = "."
    p_herald: float = 0.01
    starts: int = 32
    grid: int = 21
    detectors: str = "all"
    variant: str = "ns-phase"
    n_max: int = 4

    def validate(self) -> None:
        if self.cutoff < 3:
            raise UsageError("cutoff must be at least 3")
        if self.samples < 1:
            raise UsageError("samples must be at least 1")
        if not 0 < self.p_herald <= 1:
            raise UsageError("p-herald must lie in (0, 1]")
        if not 0 < self.eta_min <= self.eta_max <= 1 or self.eta_step <= 0:
            raise UsageError("need 0 < eta-min <= eta-max <= 1 and eta-step > 0")
        if self.starts < 1 or self.grid < 2:
            raise UsageError("starts must be >= 1 and grid >= 2")
        if self.detectors not in ("all", "null", "photon"):
            raise UsageError(f"unknown detector subset {self.detectors!r}")
        if self.phase:
            parse_phase(self.phase)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_PHASE_RE = re.compile(r"^\s*(?:([0-9.]+)\s*\*?\s*)?pi\s*(?:/\s*([0-9.]+))?\s*$")


def parse_phase(text: str) -> float:
    """``pi``, ``pi/2``, ``3pi/4``, ``2*pi/3`` or a plain number of radians."""
    m = _PHASE_RE.match(str(text))
    try:
        if m:
            num = float(m.group(1)) if m.group(1) else 1.0
            den = float(m.group(2)) if m.group(2) else 1.0
            val = num * math.pi / den
        else:
            val = float(text)
    except ValueError:
        raise UsageError(f"cannot parse phase {text!r}") from None
    if not 0 < val < 2 * math.pi:
        raise UsageError(f"phase {text} outside (0, 2 pi)")
    return val


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, dashes in keys become underscores."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        out[key] = _coerce(key, val)
    return out


def _coerce(key: str, val):
    typ = _FIELD_TYPES[key]
    try:
        if typ == "int":
            return int(val)
        if typ == "float":
            return float(val)
    except ValueError:
        raise UsageError(f"bad value for {key}: {val!r}") from None
    return str(val)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    sup = argparse.SUPPRESS
    common.add_argument("--config", default=sup, help="key=value file; flags override it")
    common.add_argument("--seed", type=int, default=sup)
    common.add_argument("--samples", type=int, default=sup)
    common.add_argument("--cutoff", type=int, default=sup)
    common.add_argument("--phase", default=sup, help="pi, pi/2 or radians")
    common.add_argument("--eta-min", dest="eta_min", type=float, default=sup)
    common.add_argument("--eta-max", dest="eta_max", type=float, default=sup)
    common.add_argument("--eta-step", dest="eta_step", type=float, default=sup)
    common.add_argument("--out", default=sup, help="output directory")
    common.add_argument("--p-herald", dest="p_herald", type=float, default=sup)
    common.add_argument("--starts", type=int, default=sup, help="optimizer multistarts")
    common.add_argument("--grid", type=int, default=sup, help="points per axis for fig7/fig8")
    common.add_argument("--detectors", default=sup, help="fig9 lossy detectors: all, null or photon")
    common.add_argument("--variant", default=sup, help="optimize-dcz: ns-phase or splitters-only")
    common.add_argument("--n-max", dest="n_max", type=int, default=sup, help="npath: largest N")

    parser = argparse.ArgumentParser(prog="dcphase", parents=[common], description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "tables": "average success tables (JSON and text)",
        "fig5": "constraint curve t1, t2 against t3",
        "fig6": "r2 r3 along the constraint curve",
        "fig7": "success surface, real amplitudes",
        "fig8": "success surface, imaginary |1> amplitudes",
        "fig9": "fidelity against detector efficiency",
        "optimize-ns": "search NS gate parameters",
        "optimize-dcz": "search destructive-gate parameters",
        "npath": "success of the N-path gate",
        "simulate": "evolve and herald a circuit from JSON",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "simulate":
            p.add_argument("circuit", help="circuit JSON file")
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    values = {}
    given = vars(ns)
    if "config" in given:
        values.update(read_config(given["config"]))
    for f in fields(RunConfig):
        if f.name in given:
            values[f.name] = given[f.name]
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# output helpers


def fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.12g}"
    return str(x)


def write_csv(path: Path, header, rows) -> Path:
    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return path


def _phases(cfg: RunConfig) -> list[float]:
    return [parse_phase(cfg.phase)] if cfg.phase else [math.pi, math.pi / 2]


# subcommands


def cmd_tables(cfg: RunConfig, out: Path) -> list[Path]:
    from .analysis import emit_tables

    recs = emit_tables(AncillaCostModel(1, cfg.p_herald), _phases(cfg), seed=cfg.seed)
    payload = {"p_herald": cfg.p_herald, "tables": [r.to_dict() for r in recs]}
    lines = [f"{'phase':>12} {'P_D':>14} {'P_KLM':>14} {'P_D_eff':>14} {'P_KLM_eff':>14}"]
    for r in recs:
        lines.append(
            f"{r.phase:>12.6f} {r.p_d:>14.6g} {r.p_klm:>14.6g} {r.p_d_eff:>14.6g} {r.p_klm_eff:>14.6g}"
        )
    txt = out / "tables.txt"
    txt.write_text("\n".join(lines) + "\n")
    return [write_json(out / "tables.json", payload), txt]


def cmd_fig5(cfg: RunConfig, out: Path) -> list[Path]:
    from .analysis import sweep_constraint_curve, t3_grid

    rows = sweep_constraint_curve(t3_grid())
    return [write_csv(out / "fig5.csv", ("t3", "t1", "t2"), [(r["t3"], r["t1"], r["t2"]) for r in rows])]


def cmd_fig6(cfg: RunConfig, out: Path) -> list[Path]:
    from .analysis import sweep_constraint_curve, t3_grid

    rows = sweep_constraint_curve(t3_grid())
    return [write_csv(out / "fig6.csv", ("t3", "r2r3"), [(r["t3"], r["r2r3"]) for r in rows])]


def _surface(cfg: RunConfig, out: Path, config: str, name: str) -> list[Path]:
    from .analysis import reference_gates, success_surface, unit_grid

    grid = unit_grid(cfg.grid)
    gate = reference_gates(parse_phase(cfg.phase) if cfg.phase else math.pi, cfg.seed)[0]
    rows = success_surface(grid, grid, config, gate)
    return [write_csv(out / name, ("alpha", "gamma", "p"), [r.values for r in rows])]


def cmd_fig7(cfg: RunConfig, out: Path) -> list[Path]:
    return _surface(cfg, out, "real", "fig7.csv")


def cmd_fig8(cfg: RunConfig, out: Path) -> list[Path]:
    return _surface(cfg, out, "imaginary", "fig8.csv")


def cmd_fig9(cfg: RunConfig, out: Path) -> list[Path]:
    from .analysis import InputMeasure, eta_grid, fidelity_curve, reference_gates

    phase = parse_phase(cfg.phase) if cfg.phase else math.pi
    etas = eta_grid(cfg.eta_min, cfg.eta_max, cfg.eta_step)
    rows = fidelity_curve(
        reference_gates(phase, cfg.seed), etas, InputMeasure("haar-product", cfg.samples, cfg.seed), cfg.detectors
    )
    return [write_csv(out / "fig9.csv", ("eta", "f_d", "f_klm"), [r.values for r in rows])]


def cmd_optimize_ns(cfg: RunConfig, out: Path) -> list[Path]:
    from .optimize import find_ns_params, ns_record

    rec = [ns_record(find_ns_params(p, cfg.starts, cfg.seed)) for p in _phases(cfg)]
    return [write_json(out / "ns.json", rec)]


def cmd_optimize_dcz(cfg: RunConfig, out: Path) -> list[Path]:
    from .optimize import destructive_record, find_destructive_params

    rec = [
        destructive_record(find_destructive_params(p, cfg.variant, cfg.starts, cfg.seed))
        for p in _phases(cfg)
    ]
    return [write_json(out / "dcz.json", rec)]


def cmd_npath(cfg: RunConfig, out: Path) -> list[Path]:
    from .analysis import reference_params

    _, per_path = reference_params(math.pi, cfg.seed)
    rows = []
    for photons in (1, 2):
        prev = None
        for N in range(1, cfg.n_max + 1):
            cutoff = max(cfg.cutoff, photons + N)
            gate = build_npath(N, per_path, photons, cutoff=cutoff)
            p = gate.herald([0] * photons + [1], (0, 1)).prob
            rows.append((N, photons, p, p / prev if prev else math.nan))
            prev = p
    return [write_csv(out / "npath.csv", ("N", "photons", "success", "ratio"), rows)]


def cmd_simulate(cfg: RunConfig, out: Path, path: str) -> list[Path]:
    """Input file: a circuit, or ``{"circuit", "input", "herald"}`` with the last two optional."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read circuit {path}: {exc}") from None
    if "circuit" not in doc:
        doc = {"circuit": doc}
    try:
        circ = Circuit.from_dict(doc["circuit"])
        if "input" in doc:
            state = SparseState.from_dict(doc["input"])
        else:
            state = SparseState.vacuum(circ.modes, cfg.cutoff)
        if "herald" in doc:
            spec = HeraldSpec.from_dict(doc["herald"])
            if any(d.eta < 1 or d.dark > 0 for d in spec.detectors):
                result = herald_lossy(circ, state, spec).to_dict()
            else:
                result = simulate_heralded(circ, state, spec).to_dict()
        else:
            result = {"state": run(circ, state, max(cfg.cutoff, state.cutoff)).to_dict()}
    except (CircuitError, FockError, KeyError, ValueError) as exc:
        raise UsageError(f"bad circuit file {path}: {exc}") from None
    return [write_json(out / "simulate.json", result)]


COMMANDS = {
    "tables": cmd_tables,
    "fig5": cmd_fig5,
    "fig6": cmd_fig6,
    "fig7": cmd_fig7,
    "fig8": cmd_fig8,
    "fig9": cmd_fig9,
    "optimize-ns": cmd_optimize_ns,
    "optimize-dcz": cmd_optimize_dcz,
    "npath": cmd_npath,
}


def main(argv=None) -> int:
    from .optimize import InfeasibleError

    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(ns)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        if ns.command == "simulate":
            written = cmd_simulate(cfg, out, ns.circuit)
        else:
            written = COMMANDS[ns.command](cfg, out)
    except UsageError as exc:
        print(f"dcphase: error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleError, GateError) as exc:
        print(f"dcphase: failed: {exc}", file=sys.stderr)
        return 1
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())

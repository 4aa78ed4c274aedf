import json
import math

import pytest

from dcphase.cli import UsageError, main, parse_phase, read_config


def _run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def _csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [[float(v) for v in ln.split(",")] for ln in lines[1:]]


def test_fig5_and_fig6(tmp_path):
    assert _run(tmp_path, "fig5") == 0
    assert _run(tmp_path, "fig6") == 0
    head, rows = _csv(tmp_path / "fig5.csv")
    assert head == ["t3", "t1", "t2"] and len(rows) == 250
    head, rows = _csv(tmp_path / "fig6.csv")
    assert head == ["t3", "r2r3"]
    best = max(rows, key=lambda r: r[1])
    assert best[0] == pytest.approx(0.707, abs=2e-3)
    assert best[1] == pytest.approx(1 / (2 * math.sqrt(2)), abs=1e-5)


def test_tables_json(tmp_path):
    assert _run(tmp_path, "tables", "--phase", "pi") == 0
    doc = json.loads((tmp_path / "tables.json").read_text())
    (rec,) = doc["tables"]
    assert rec["p_d"] == pytest.approx(0.03125, abs=1e-12)
    assert rec["p_klm"] == pytest.approx(0.0625, abs=1e-12)
    assert rec["p_d_eff"] == pytest.approx(3.125e-4, abs=1e-15)
    assert "P_KLM_eff" in (tmp_path / "tables.txt").read_text()


def test_fig7_fig8(tmp_path):
    assert _run(tmp_path, "fig7", "--grid", "5") == 0
    assert _run(tmp_path, "fig8", "--grid", "5") == 0
    _, real = _csv(tmp_path / "fig7.csv")
    _, imag = _csv(tmp_path / "fig8.csv")
    assert len(real) == 25 and len(imag) == 25
    assert all(r[2] == pytest.approx(0.03125, abs=1e-12) for r in imag)
    assert real[0][:2] == [0, 0] and real[0][2] == pytest.approx(0.03125, abs=1e-12)
    assert real[-1][2] == pytest.approx(0.03125, abs=1e-12)


def test_fig9_small(tmp_path):
    assert _run(tmp_path, "fig9", "--samples", "50", "--eta-step", "0.1") == 0
    head, rows = _csv(tmp_path / "fig9.csv")
    assert head == ["eta", "f_d", "f_klm"]
    assert len(rows) == 6
    assert rows[-1][1] == pytest.approx(1, abs=1e-9)


def test_simulate_empty_circuit_echoes_input(tmp_path):
    state = {"modes": 2, "cutoff": 4, "terms": [{"occ": [1, 0], "re": 0.6, "im": 0}, {"occ": [0, 1], "re": 0, "im": 0.8}]}
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"circuit": {"modes": 2, "elements": []}, "input": state}))
    assert _run(tmp_path, "simulate", str(f)) == 0
    out = json.loads((tmp_path / "simulate.json").read_text())["state"]
    terms = {tuple(t["occ"]): complex(t["re"], t["im"]) for t in out["terms"]}
    assert terms == {(1, 0): 0.6, (0, 1): 0.8j}


def test_simulate_with_herald(tmp_path):
    doc = {
        "circuit": {"modes": 2, "elements": [{"bs": {"m1": 0, "m2": 1, "t": math.sqrt(0.5)}}]},
        "input": {"modes": 2, "terms": [{"occ": [1, 0], "re": 1}]},
        "herald": {"detectors": [{"m": 1, "n": 0}], "outputs": [0]},
    }
    f = tmp_path / "c.json"
    f.write_text(json.dumps(doc))
    assert _run(tmp_path, "simulate", str(f)) == 0
    out = json.loads((tmp_path / "simulate.json").read_text())
    assert out["prob"] == pytest.approx(0.5)
    doc["herald"]["detectors"][0]["eta"] = 0.5
    f.write_text(json.dumps(doc))
    assert _run(tmp_path, "simulate", str(f)) == 0
    out = json.loads((tmp_path / "simulate.json").read_text())
    assert out["herald_prob"] == pytest.approx(0.75)


def test_simulate_bad_file(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text('{"modes": 1, "elements": [{"warp": {}}]}')
    assert _run(tmp_path, "simulate", str(f)) == 2
    assert _run(tmp_path, "simulate", str(tmp_path / "missing.json")) == 2


@pytest.mark.parametrize(
    "args,name",
    [
        (("fig9", "--samples", "40", "--eta-step", "0.25"), "fig9.csv"),
        (("fig7", "--grid", "4"), "fig7.csv"),
        (("tables", "--phase", "pi"), "tables.json"),
    ],
)
def test_repeat_runs_are_byte_identical(tmp_path, args, name):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([*args, "--out", str(a)]) == 0
    assert main([*args, "--out", str(b)]) == 0
    assert (a / name).read_bytes() == (b / name).read_bytes()


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\neta-step = 0.25\nsamples = 20\ngrid=3\n")
    assert _run(tmp_path, "fig9", "--config", str(cfg)) == 0
    _, rows = _csv(tmp_path / "fig9.csv")
    assert [r[0] for r in rows] == [0.5, 0.75, 1.0]
    assert _run(tmp_path, "fig9", "--config", str(cfg), "--eta-step", "0.5") == 0
    _, rows = _csv(tmp_path / "fig9.csv")
    assert [r[0] for r in rows] == [0.5, 1.0]


def test_read_config_errors(tmp_path):
    f = tmp_path / "x.cfg"
    f.write_text("colour = blue\n")
    with pytest.raises(UsageError):
        read_config(str(f))
    f.write_text("samples = many\n")
    with pytest.raises(UsageError):
        read_config(str(f))
    f.write_text("samples\n")
    with pytest.raises(UsageError):
        read_config(str(f))


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("cutoff = 1\n")
    assert _run(tmp_path, "fig5", "--config", str(bad)) == 2
    assert _run(tmp_path, "fig5", "--no-such-flag") == 2
    assert _run(tmp_path, "tables", "--phase", "7") == 2
    assert _run(tmp_path, "fig9", "--eta-min", "0") == 2
    assert main(["--help"]) == 0


def test_infeasible_exit_code(tmp_path):
    code = _run(tmp_path, "optimize-dcz", "--variant", "splitters-only", "--phase", "pi/2", "--starts", "4")
    assert code == 1


def test_optimize_ns_sign_flip(tmp_path):
    assert _run(tmp_path, "optimize-ns", "--phase", "pi") == 0
    (rec,) = json.loads((tmp_path / "ns.json").read_text())
    assert rec["success"] == pytest.approx(0.25, abs=1e-6)


@pytest.mark.parametrize(
    "text,val", [("pi", math.pi), ("pi/2", math.pi / 2), ("3pi/4", 0.75 * math.pi), ("2*pi/3", 2 * math.pi / 3), ("1.5", 1.5)]
)
def test_parse_phase(text, val):
    assert parse_phase(text) == pytest.approx(val)


@pytest.mark.parametrize("text", ["0", "tau", "2pi", "-1"])
def test_parse_phase_rejects(text):
    with pytest.raises(UsageError):
        parse_phase(text)

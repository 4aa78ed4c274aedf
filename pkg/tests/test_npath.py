import math

import numpy as np
import pytest

from dcphase.analysis import reference_params
from dcphase.circuit import BeamSplitter, Circuit
from dcphase.fock import SparseState
from dcphase.gates import GateError, build_cphase_destructive, build_npath, splitter_tree
from dcphase.herald import run

S2 = 1 / math.sqrt(2)


@pytest.fixture(scope="module")
def per_path():
    return reference_params(math.pi)[1]


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_splitter_tree_is_even(N):
    ts = splitter_tree(N)
    circ = Circuit(N, tuple(BeamSplitter(0, k, t) for k, t in enumerate(ts, start=1)))
    out = run(circ, SparseState.basis((1,) + (0,) * (N - 1)))
    probs = [abs(out[tuple(int(j == k) for j in range(N))]) ** 2 for k in range(N)]
    assert probs == pytest.approx([1 / N] * N, abs=1e-12)


@pytest.mark.parametrize("target", [(1, 0), (0, 1), (0.6, 0.8j)])
@pytest.mark.parametrize("control", [(1, 0), (0, 1), (S2, S2)])
def test_single_path_is_plain_gate(per_path, target, control):
    plain = build_cphase_destructive(per_path, "compiled").herald(target, control)
    one = build_npath(1, per_path, 1).herald(list(target), control)
    assert one.prob == pytest.approx(plain.prob, abs=1e-12)
    for n in (0, 1):
        assert one.state[(n,)] == pytest.approx(plain.state[(n,)], abs=1e-12)


@pytest.mark.parametrize("control", [(1, 0), (0, 1), (0.6, 0.8)])
def test_single_photon_decay_is_geometric(per_path, control):
    probs = [build_npath(N, per_path, 1).herald([0, 1], control).prob for N in range(1, 5)]
    for a, b in zip(probs, probs[1:]):
        assert b / a == pytest.approx(1 / 32, rel=1e-9)


def test_two_photon_bunching_model(per_path):
    # success = 32^-N |1 - (1-g)/N|^2 where g is the amplitude ratio for both photons in one path
    probs = {N: build_npath(N, per_path, 2, cutoff=6).herald([0, 0, 1], (0, 1)).prob for N in range(1, 5)}
    g = math.sqrt(probs[1] * 32)
    assert g == pytest.approx(0.4926, abs=1e-3)
    for N in (2, 3, 4):
        model = 32.0**-N * (1 - (1 - g) / N) ** 2
        assert probs[N] == pytest.approx(model, rel=1e-4)
    ratios = [probs[N + 1] / probs[N] for N in (1, 2, 3)]
    assert ratios[0] > ratios[1] > ratios[2] > 1 / 32


def test_output_keeps_phase(per_path):
    g = build_npath(2, per_path, 1)
    r0 = g.herald([S2, S2], (1, 0)).state.normalized()
    r1 = g.herald([S2, S2], (0, 1)).state.normalized()
    assert abs(r0[(0,)]) == pytest.approx(S2, abs=1e-12)
    ratio = (r1[(1,)] / r1[(0,)]) / (r0[(1,)] / r0[(0,)])
    assert ratio == pytest.approx(-1, abs=1e-12)


def test_cutoff_guard(per_path):
    with pytest.raises(GateError):
        build_npath(4, per_path, 3, cutoff=6)
    with pytest.raises(GateError):
        build_npath(0, per_path, 1)
    assert np.isfinite(build_npath(4, per_path, 2, cutoff=6).herald([0, 0, 1], (1, 0)).prob)

import math

import numpy as np
import pytest

import bfo


def test_profile_and_fields():
    c = bfo.ObservationProfile.standard()
    assert c(0.5) == pytest.approx(1.0)
    assert c(0.1) == 0.0
    f = bfo.FieldSpec.sine_sum([1.0])
    assert f(0.5) == pytest.approx(1.0)
    assert f.derivative(0.0) == pytest.approx(math.pi)


def test_generate_shapes():
    inst = bfo.default_instance(bfo.Equation.schrodinger, 16)
    trace = bfo.generate_observation(inst, refine=2)
    assert len(trace) == inst.steps + 1
    assert trace.samples.shape == (inst.steps + 1, 15)
    assert trace.samples.dtype == np.complex128
    x = inst.nodes()
    np.testing.assert_allclose(trace.samples[0].real,
                               [inst.profile(v) * inst.truth(v) for v in x], atol=1e-12)

    w = bfo.default_instance(bfo.Equation.wave, 16)
    wt = bfo.generate_observation(w)
    assert wt.samples.dtype == np.float64
    assert wt.samples.shape == (w.steps + 1, 15)


def test_trace_round_trip(tmp_path):
    inst = bfo.default_instance(bfo.Equation.wave, 8)
    trace = bfo.generate_observation(inst, noise_eps=1e-3, noise_seed=4)
    path = str(tmp_path / "t.trace")
    bfo.write_trace(path, trace)
    back = bfo.read_trace(path)
    assert back.provenance == "noisy"
    assert back.noise_eps == 1e-3
    np.testing.assert_array_equal(back.samples, trace.samples)
    assert len(bfo.file_checksum(path)) == 16


def test_eta_and_reconstruct():
    inst = bfo.default_instance(bfo.Equation.schrodinger, 32)
    eta = bfo.estimate_eta(inst)
    assert 0.0 < eta["value"] < 1.0
    assert eta["kind"] == "operator_norm"
    trace = bfo.generate_observation(inst)
    r = bfo.reconstruct(inst, trace, eta=eta["value"])
    assert r["n_used"] >= 1
    assert r["estimate"].shape == (31,)
    assert 0.0 < r["error_x"] < 1.0
    norms = r["increment_norms"]
    assert all(b <= a for a, b in zip(norms, norms[1:]))

    zero = bfo.reconstruct(inst, trace, terms=0)
    assert zero["n_used"] == 0


def test_wave_reconstruct_fields():
    inst = bfo.default_instance(bfo.Equation.wave, 16)
    r = bfo.reconstruct(inst, bfo.generate_observation(inst), terms=2)
    assert r["position"].shape == (15,)
    assert r["velocity"].shape == (15,)


def test_truncation_and_errors():
    assert bfo.choose_truncation("full", 0.01, 0.01, 1.0, 0.5) == 6
    with pytest.raises(bfo.NotContractive):
        bfo.choose_truncation("full", 0.01, 0.01, 1.0, 1.0)
    with pytest.raises(ValueError):
        bfo.choose_truncation("bogus", 0.01, 0.01, 1.0, 0.5)


def test_sweep_and_fit():
    rows = bfo.run_sweep(bfo.Equation.wave, base_cells=16, levels=3, kappa=0.1, workers=2)
    assert [r["n_cells"] for r in rows] == [16, 32, 64]
    assert all(r["ok"] for r in rows)
    errs = [r["error_x"] for r in rows]
    assert errs[0] > errs[1] > errs[2]
    fit = bfo.fit_rate(rows, "pure-power")
    assert fit["points"] >= 2
    assert fit["slope"] > 0.5

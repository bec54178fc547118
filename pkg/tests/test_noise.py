import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qecgsm.circuit import Circuit, gate, idle, measure, reset
from qecgsm.densop import DensityState, apply_channel
from qecgsm.noise import (PRESET_FIELDS, PRESETS, NoiseModel, NoisePreset, average_infidelity, bit_flip,
                          calibrate_2q_depolarizing, channel_for, compile_noisy, compose, depolarizing,
                          get_preset, idle_channel, load_preset_file, presets_from_json, presets_to_json,
                          two_qubit_idle)

TABLE = {
    "sycamore": (20, 30, 660, 1e-3, 34, 3e-3, 1e-2, 2e-2),
    "ibm_brisbane": (217, 130, 4000, 2.2e-4, 600, 7.5e-3, 1e-2, 1e-2),
    "projective": (1000, 1000, 200, 0, 20, 1e-4, 1e-3, 1e-3),
}


def choi_fidelity(ch):
    """Entanglement fidelity from the Choi state, independent of the Kraus trace formula."""
    d = ch.kraus_ops[0].shape[0]
    omega = np.eye(d).reshape(-1) / np.sqrt(d)
    choi = sum(np.kron(np.eye(d), k) @ np.outer(omega, omega) @ np.kron(np.eye(d), k).conj().T
               for k in ch.kraus_ops)
    return float(np.real(omega @ choi @ omega))


def complete(ch, tol=1e-12):
    total = sum(k.conj().T @ k for k in ch.kraus_ops)
    return np.abs(total - np.eye(len(total))).max() < tol


@pytest.mark.parametrize("name", sorted(TABLE))
def test_presets_match_table(name):
    p = get_preset(name)
    assert tuple(getattr(p, f) for f in PRESET_FIELDS) == TABLE[name]


def test_unknown_preset_lists_names():
    with pytest.raises(KeyError, match="sycamore"):
        get_preset("willow")


def test_preset_json_round_trip(tmp_path):
    text = presets_to_json()
    assert presets_from_json(text) == PRESETS
    path = tmp_path / "p.json"
    path.write_text(json.dumps(PRESETS["sycamore"].to_dict()))
    assert load_preset_file(path)["sycamore"] == PRESETS["sycamore"]


def test_preset_validation():
    with pytest.raises(ValueError, match="unknown preset field"):
        NoisePreset.from_dict({**PRESETS["sycamore"].to_dict(), "t3_us": 1})
    with pytest.raises(ValueError, match="2\\*T1"):
        PRESETS["sycamore"].replace(t2_us=100)


@given(st.floats(0, 50), st.floats(0, 50))
def test_idle_semigroup(t1, t2):
    a = compose(idle_channel(t1, 20.0, 30.0), idle_channel(t2, 20.0, 30.0))
    b = idle_channel(t1 + t2, 20.0, 30.0)
    assert np.allclose(a.superoperator(), b.superoperator(), atol=1e-12)


@given(st.floats(0, 100), st.floats(1, 500), st.floats(0.1, 2.0))
def test_idle_is_complete(t, t1, ratio):
    assert complete(idle_channel(t, t1, t1 * ratio))


def test_idle_t1_t2_decay():
    t, t1, t2 = 7.0, 20.0, 30.0
    one = apply_channel(DensityState(np.diag([0, 1]).astype(complex)), idle_channel(t, t1, t2), [0]).matrix
    assert np.isclose(one[1, 1].real, math.exp(-t / t1))
    plus = apply_channel(DensityState(np.full((2, 2), 0.5, dtype=complex)), idle_channel(t, t1, t2), [0]).matrix
    assert np.isclose(abs(plus[0, 1]), 0.5 * math.exp(-t / t2))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_depolarizing_infidelity(n):
    ch = depolarizing(n, 0.3)
    assert complete(ch)
    d = 2 ** n
    assert np.isclose(choi_fidelity(ch), 1 - 0.3)
    assert np.isclose(average_infidelity(ch), d * 0.3 / (d + 1))


def test_bit_flip_complete():
    assert complete(bit_flip(0.02))


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_two_qubit_calibration(name):
    p = get_preset(name)
    dep = calibrate_2q_depolarizing(p)
    composite = compose(two_qubit_idle(p), depolarizing(2, dep))
    r = 4 * (1 - choi_fidelity(composite)) / 5
    assert abs(r - p.err_2q) < 1e-6
    assert complete(composite)


def test_calibration_rejects_slow_gates():
    slow = PRESETS["sycamore"].replace(gate_time_2q_ns=600)
    with pytest.raises(ValueError, match="exceeds"):
        calibrate_2q_depolarizing(slow)
    assert calibrate_2q_depolarizing(slow, strict=False) == 0.0


def test_model_probabilities():
    m = NoiseModel.from_preset("sycamore")
    assert np.isclose(m.p1, 1.5e-3)
    assert m.multi_qubit_probability(3) == 2 * m.p2
    pc = NoiseModel.from_preset("sycamore", perfect_control=True)
    assert pc.p1 == pc.p2 == 0


def test_with_times_recalibrates():
    m = NoiseModel.from_preset("sycamore").with_times(readout_time_ns=100, gate_time_2q_ns=10)
    assert m.preset.readout_time_ns == 100 and m.preset.gate_time_2q_ns == 10
    assert m.p2 > NoiseModel.from_preset("sycamore").p2


def _noise(circ):
    return [i for i in circ.instructions() if i.kind == "noise"]


def test_compile_rules():
    c = Circuit(3)
    c.append(reset(0), reset(1), reset(2))
    c.append(gate("H", 0))
    c.append(gate("CX", 0, 1))
    c.append(gate("CCZ", 0, 1, 2))
    c.append(measure(2, 0, "X"))
    model = NoiseModel.from_preset("sycamore")
    out = compile_noisy(c, model)
    kinds = [(i.name, i.targets, i.params) for i in _noise(out)]
    assert kinds.count(("bitflip", (0,), (0.01,))) == 1
    assert ("depolarizing", (0,), (model.p1,)) in kinds
    assert ("depolarizing", (0, 1), (model.p2,)) in kinds
    assert ("depolarizing", (0, 1, 2), (2 * model.p2,)) in kinds
    idles = [i for i in _noise(out) if i.name == "idle"]
    assert [i.params[0] for i in idles] == [0.034, 0.068, 0.66]
    assert idles[-1].exclude == (2,)
    meas = [i for i in out.instructions() if i.kind == "measure"][0]
    assert meas.params == (0.02,)


def test_ideal_gates_stay_clean():
    c = Circuit(1)
    c.append(gate("X", 0, ideal=True))
    assert not _noise(compile_noisy(c, NoiseModel.from_preset("sycamore")))


def test_explicit_idle_and_noiseless_model():
    c = Circuit(2)
    c.append(idle([0, 1], 5.0))
    out = compile_noisy(c, NoiseModel.from_preset("ibm_brisbane"))
    (inst,) = _noise(out)
    assert inst.targets == (0, 1) and inst.params == (5.0, 217, 130)
    assert compile_noisy(c, NoiseModel.ideal()) == c


def test_channel_for_unknown():
    from qecgsm.circuit import noise

    with pytest.raises(ValueError):
        channel_for(noise("leakage", (0,), (0.1,)))


def test_single_two_qubit_layer_gets_one_global_idle():
    c = Circuit(3)
    c.append(gate("CX", 0, 1))
    out = compile_noisy(c, NoiseModel.from_preset("sycamore"))
    idles = [i for i in _noise(out) if i.name == "idle"]
    assert len(idles) == 1 and idles[0].targets == () and idles[0].exclude == ()


@pytest.mark.parametrize("method,count", [("sm", 2), ("gsm", 1)])
def test_readout_idles_per_detection_circuit(method, count):
    from qecgsm.pauli import get_code
    from qecgsm.qec import detection_circuit

    out = compile_noisy(detection_circuit(get_code("iceberg4"), method), NoiseModel.from_preset("sycamore"))
    readout = [i for i in _noise(out) if i.name == "idle" and i.params[0] == 0.66]
    assert len(readout) == count


def test_compile_is_deterministic():
    from qecgsm.pauli import get_code
    from qecgsm.qec import detection_circuit

    circ = detection_circuit(get_code("steane"), "mshot")
    model = NoiseModel.from_preset("ibm_brisbane")
    assert compile_noisy(circ, model) == compile_noisy(circ, model)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_perfect_control_stays_within_preset(name):
    p = get_preset(name)
    pc = NoiseModel.from_preset(p, perfect_control=True)
    idle_only = compose(two_qubit_idle(p), depolarizing(2, pc.p2))
    assert 4 * (1 - choi_fidelity(idle_only)) / 5 <= p.err_2q

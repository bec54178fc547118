import numpy as np
import pytest
from hypothesis import given, strategies as st

from qecgsm.circuit import (Check, Circuit, Condition, build_canonical_sm, build_gsm_pauli_rotations,
                            build_gsm_sandwich, build_iceberg_gsm, build_mshot_gsm, build_shor_style_gsm_422,
                            build_state_prep, build_steane_gsm, ccz_decomposition, circuit_unitary, cond, connectivity,
                            decompose_toffoli, depth_2q, export_text, gate, gate_matrix, idle, measure, noise,
                            parse_text, schedule_gates, toffoli_depth)
from qecgsm.circuit.builders import controlled_pauli_gates, iceberg_decoder, max_degree
from qecgsm.noise import NoiseModel, compile_noisy
from qecgsm.pauli import PauliString, five_one_three, iceberg, steane


# ---------------------------------------------------------------------------
# IR


def test_layer_rejects_overlap_and_range():
    c = Circuit(2)
    with pytest.raises(ValueError, match="overlapping"):
        c.append(gate("H", 0), gate("CX", 0, 1))
    with pytest.raises(ValueError, match="out of range"):
        c.append(gate("H", 2))


def test_gate_validation():
    with pytest.raises(ValueError):
        gate("CX", 0)
    with pytest.raises(ValueError):
        gate("FOO", 0)
    with pytest.raises(ValueError):
        gate("PAULIROT", 0, 1, params=[0.1], pauli="X")


def test_measure_counts_clbits():
    c = Circuit(1)
    c.append(measure(0, 3, "X"))
    assert c.n_clbits == 4 and c.measurement_count() == 1 and c.readout_rounds() == 1


def test_inverse_undoes_circuit():
    c = Circuit(3)
    c.append(gate("H", 0), gate("S", 1))
    c.append(gate("CX", 0, 2))
    c.append(gate("PHASE", 1, params=[0.3]), gate("CPAULIROT", 0, 2, params=[0.4], pauli="Y"))
    u = circuit_unitary(c) @ circuit_unitary(c.inverse())
    assert np.allclose(u, np.eye(8))


def test_cx_convention_control_first():
    c = Circuit(2)
    c.append(gate("X", 0))
    c.append(gate("CX", 0, 1))
    vec = circuit_unitary(c)[:, 0]
    assert np.isclose(abs(vec[3]), 1)


def test_check_and_condition_semantics():
    chk = Check((0, 1), 1)
    assert chk.flagged({0: 1, 1: 0}) and not chk.flagged({0: 1, 1: 1})
    assert Condition((Check((0,), 0), Check((1,), 0)), "all").holds({0: 0, 1: 0})
    assert not Condition((Check((0,), 0), Check((1,), 0)), "all").holds({0: 0, 1: 1})
    with pytest.raises(ValueError):
        Condition((), "most")


gate_lists = st.lists(st.one_of(
    st.tuples(st.sampled_from(["H", "S", "X"]), st.tuples(st.integers(0, 3))),
    st.tuples(st.just("CX"), st.lists(st.integers(0, 3), min_size=2, max_size=2, unique=True).map(tuple)),
), max_size=14)


@given(gate_lists)
def test_schedule_preserves_unitary(gates):
    ordered = Circuit(4)
    for name, qs in gates:
        ordered.append(gate(name, *qs))
    packed = schedule_gates(gates, 4)
    assert np.allclose(circuit_unitary(packed), circuit_unitary(ordered))
    assert len(packed.layers) <= max(len(gates), 0) + 1


def test_schedule_packs_commuting_cnots():
    c = schedule_gates([("CX", (0, 1)), ("CX", (0, 2)), ("CX", (3, 4))], 5)
    assert depth_2q(c) == 2


# ---------------------------------------------------------------------------
# builders


def test_prep_depths():
    assert depth_2q(build_state_prep(iceberg(1))) == 2
    assert depth_2q(build_state_prep(iceberg(2))) == 3
    assert depth_2q(build_state_prep(steane())) == 3


@pytest.mark.parametrize("code,depth,rounds", [(iceberg(1), 8, 2), (iceberg(2), 12, 2), (steane(), 8, 2)],
                         ids=["iceberg4", "iceberg6", "steane"])
def test_canonical_sm_structure(code, depth, rounds):
    sm = build_canonical_sm(code)
    assert depth_2q(sm) == depth
    assert sm.readout_rounds() == rounds
    assert sm.measurement_count() == code.k
    assert all(c.flag_parity == 1 for c in sm.checks)


@pytest.mark.parametrize("m,depth", [(1, 4), (2, 8)])
def test_iceberg_gsm_depth(m, depth):
    circ = build_iceberg_gsm(m)
    assert depth_2q(circ) == depth and toffoli_depth(circ) == 1
    assert circ.measurement_count() == 1


def test_iceberg_gsm_connectivity_star():
    circ = build_iceberg_gsm(2)
    anc = circ.n_qubits - 1
    graph = connectivity(circ)
    top, bottom = 0, 5
    for q in range(1, 5):
        assert graph[q] <= {top, bottom, anc}
    assert max_degree(circ, [1, 2, 3, 4]) <= 3


def test_iceberg_gsm_out_of_range():
    with pytest.raises(ValueError):
        build_iceberg_gsm(3)


def test_iceberg_decoder_check_qubits():
    gates, checks = iceberg_decoder((0, 1, 2, 3))
    assert checks == (0, 1)


def test_steane_gsm_counts():
    circ = build_steane_gsm(steane())
    assert depth_2q(circ) == 12 and toffoli_depth(circ) == 3 and circ.readout_rounds() == 1
    assert circ.measurement_count() == 3


def test_five_one_three_sandwich_and_pairs():
    code = five_one_three()
    sand = build_gsm_sandwich(code)
    assert sand.gate_count(arity=2) == 18 and depth_2q(sand) == 12
    assert sum(1 for i in sand.walk() if i.name == "MCZ") == 1
    for group in code.groupings["pairwise"]:
        part = build_mshot_gsm(code, [group])
        assert part.gate_count(arity=2) == 12 and depth_2q(part) == 6


def test_mshot_rejects_overlapping_groups():
    with pytest.raises(ValueError):
        build_mshot_gsm(steane(), [(0, 1), (1, 2)])


def test_rotation_form_instruction_count():
    circ = build_gsm_pauli_rotations(five_one_three())
    assert sum(1 for i in circ.walk() if i.name in ("PHASE", "CPAULIROT")) == 16


def test_controlled_pauli_y_and_sign():
    layers = controlled_pauli_gates(4, PauliString.from_label("-YIII"))
    names = [i.name for layer in layers for i in layer]
    assert "SDG" in names and names[-1] == "Z"


def test_shor_style_layout():
    circ = build_shor_style_gsm_422()
    assert circ.measurement_count() == 3 and circ.readout_rounds() == 1
    assert circ.checks == (Check((0, 1, 2), 0),)


def test_gate_matrices_unitary():
    for inst in [gate("CCZ", 0, 1, 2), gate("MCZ", 0, 1, 2, 3), gate("PAULIROT", 0, 1, params=[0.2], pauli="XY"),
                 gate("CPAULIROT", 0, 1, params=[0.2], pauli="Z")]:
        m = gate_matrix(inst)
        assert np.allclose(m.conj().T @ m, np.eye(len(m)))


# ---------------------------------------------------------------------------
# text export


@pytest.mark.parametrize("circ", [
    build_gsm_sandwich(iceberg(1)), build_shor_style_gsm_422(), build_canonical_sm(steane()),
    build_gsm_pauli_rotations(five_one_three()), build_gsm_sandwich(five_one_three()),
], ids=["sandwich", "shor", "steane_sm", "rotations", "mcz"])
def test_export_round_trip(circ):
    text = export_text(circ)
    assert text.startswith("OPENQASM 2.0;")
    assert parse_text(text) == circ
    assert export_text(parse_text(text)) == text


def test_export_round_trip_noisy_and_conditional():
    circ = compile_noisy(build_canonical_sm(iceberg(1)), NoiseModel.from_preset("sycamore"))
    body = [[gate("X", 0, ideal=True)], [idle([1, 2], 0.5)]]
    circ.append(cond(Condition((Check((0,), 1), Check((1,), 0)), "all"), body))
    circ.append(noise("depolarizing", (0, 1), (0.01,)))
    assert parse_text(export_text(circ)) == circ


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_text('OPENQASM 2.0;\nqreg q[1];\n// @layer\nfoo q[0];\n')


def test_ccz_decomposition_is_exact():
    c = Circuit(3)
    for layer in ccz_decomposition(2, 0, 1):
        c.append(*layer)
    assert c.gate_count(arity=2) == 5
    ref = Circuit(3)
    ref.append(gate("CCZ", 2, 0, 1))
    assert np.allclose(circuit_unitary(c), circuit_unitary(ref), atol=1e-12)


def test_decompose_toffoli_flag():
    circ = build_iceberg_gsm(1)
    flat = decompose_toffoli(circ)
    assert toffoli_depth(flat) == 0 and flat.checks == circ.checks
    assert flat.gate_count(arity=2) == circ.gate_count(arity=2) + 5
    model = NoiseModel.from_preset("sycamore")
    noisy = compile_noisy(circ, model, decompose_toffoli=True)
    assert not any(i.kind == "gate" and len(i.targets) == 3 for i in noisy.walk())
    with pytest.raises(ValueError, match="MCZ"):
        decompose_toffoli(build_gsm_sandwich(steane()))

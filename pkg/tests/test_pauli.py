import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qecgsm.circuit import circuit_unitary
from qecgsm.pauli import (PauliString, StabilizerCode, code_catalog, codespace_projector, five_one_three,
                          get_code, iceberg, projector_exponential, stabilizer_group, stabilizer_sum_expansion,
                          steane, subprojectors, synthesize_encoder)

labels = st.text(alphabet="IXYZ", min_size=1, max_size=5)
same_length_pairs = st.integers(1, 5).flatmap(
    lambda n: st.tuples(st.text("IXYZ", min_size=n, max_size=n), st.text("IXYZ", min_size=n, max_size=n)))


def test_label_order_is_qubit_order():
    p = PauliString.from_label("ZXXZI")
    assert p.factor(0) == (0, 1) and p.factor(1) == (1, 0) and p.support == (0, 1, 2, 3)


def test_signed_labels_round_trip():
    for text in ("XZ", "-XZ", "iYY", "-iZI"):
        assert PauliString.from_label(text).label == text


def test_bad_character():
    with pytest.raises(ValueError):
        PauliString.from_label("XQ")


@given(same_length_pairs)
def test_product_matches_matrices(pair):
    a, b = (PauliString.from_label(s) for s in pair)
    assert np.allclose((a * b).to_matrix(), a.to_matrix() @ b.to_matrix())


@given(same_length_pairs)
def test_commutation_matches_matrices(pair):
    a, b = (PauliString.from_label(s) for s in pair)
    ma, mb = a.to_matrix(), b.to_matrix()
    assert a.commutes(b) == np.allclose(ma @ mb, mb @ ma)


@pytest.mark.parametrize("gate,qs,u", [
    ("H", (0,), np.array([[1, 1], [1, -1]]) / np.sqrt(2)),
    ("S", (0,), np.diag([1, 1j])),
    ("SDG", (0,), np.diag([1, -1j])),
])
def test_single_qubit_conjugation(gate, qs, u):
    for c in "XYZ":
        p = PauliString.from_label(c)
        assert np.allclose(p.conjugated(gate, qs).to_matrix(), u @ p.to_matrix() @ u.conj().T)


@given(st.text("IXYZ", min_size=2, max_size=2))
def test_cx_conjugation(label):
    cx = np.zeros((4, 4))
    for i in range(4):
        c, t = i & 1, i >> 1
        cx[c | ((t ^ c) << 1), i] = 1
    p = PauliString.from_label(label)
    assert np.allclose(p.conjugated("CX", (0, 1)).to_matrix(), cx @ p.to_matrix() @ cx.T)


@pytest.mark.parametrize("name", sorted(code_catalog()))
def test_catalog_codes_are_valid(name):
    code = code_catalog()[name]
    code.validate()
    assert (code.n, code.k) in {(4, 2), (6, 2), (7, 6), (5, 4)}


def test_code_aliases_and_unknown_name():
    assert get_code("422").name == "iceberg4"
    with pytest.raises(KeyError, match="available"):
        get_code("surface17")


def test_validate_rejects_anticommuting():
    bad = StabilizerCode("bad", 2, (PauliString.from_label("XI"), PauliString.from_label("ZI")))
    with pytest.raises(ValueError, match="anticommute"):
        bad.validate()


def test_validate_rejects_minus_identity():
    bad = StabilizerCode("bad", 2, (PauliString.from_label("ZZ"), PauliString.from_label("-ZZ")))
    with pytest.raises(ValueError):
        bad.validate()


@pytest.mark.parametrize("code", [iceberg(1), iceberg(2), steane(), five_one_three()], ids=lambda c: c.name)
def test_projector_rank_and_complement(code):
    proj = codespace_projector(code)
    assert proj.rank == 2 ** (code.n - code.k)
    m = proj.matrix
    assert np.allclose(m @ m, m)
    for g in code.generators:
        assert np.allclose(g.to_matrix() @ m, m)


def test_subprojectors_multiply_to_projector():
    code = steane()
    parts = subprojectors(code, code.groupings["plaquette"])
    total = parts[0].matrix @ parts[1].matrix @ parts[2].matrix
    assert np.allclose(total, codespace_projector(code).matrix)


@pytest.mark.parametrize("name", sorted(code_catalog()))
def test_projector_exponential_identity(name):
    from scipy.linalg import expm

    code = code_catalog()[name]
    p = codespace_projector(code).matrix
    err = np.linalg.norm(expm(1j * np.pi * p) - projector_exponential(p).matrix, 2)
    assert err < 1e-10


@pytest.mark.parametrize("name", sorted(code_catalog()))
def test_rotation_product_equals_reflection_up_to_phase(name):
    code = code_catalog()[name]
    dim = 1 << code.n
    u = np.eye(dim, dtype=complex)
    for m, angle in stabilizer_sum_expansion(code):
        mm = m.to_matrix()
        u = (np.cos(angle) * np.eye(dim) + 1j * np.sin(angle) * mm) @ u
    want = np.eye(dim) - 2 * codespace_projector(code).matrix
    phase = u[0, 0] / want[0, 0] if abs(want[0, 0]) > 0.5 else np.trace(u @ want.conj().T) / dim
    assert np.linalg.norm(u - phase * want, 2) < 1e-10


def test_stabilizer_group_size():
    assert len(stabilizer_group(steane().generators)) == 64


def trivial_projector(n, check_qubits):
    """Projector onto |1> on every check qubit (stabilizers -Z there), built from basis indices."""
    dim = 1 << n
    mask = sum(1 << q for q in check_qubits)
    return np.diag([1.0 if (i & mask) == mask else 0.0 for i in range(dim)])


def assert_encodes(gens, n):
    enc = synthesize_encoder(gens)
    u = circuit_unitary(enc.circuit())
    proj = codespace_projector(list(gens)).matrix
    assert np.linalg.norm(u @ trivial_projector(n, enc.check_qubits) @ u.conj().T - proj, 2) < 1e-10
    group = [g.to_matrix() for g in stabilizer_group(list(gens))]
    for q in enc.check_qubits:
        image = u @ (-PauliString.single(n, q, "Z")).to_matrix() @ u.conj().T
        assert any(np.allclose(image, g) for g in group)


@pytest.mark.parametrize("code", [iceberg(1), iceberg(2), five_one_three(), steane()], ids=lambda c: c.name)
def test_encoder_conjugates_trivial_code_onto_codespace(code):
    assert_encodes(code.generators, code.n)


def test_iceberg_encoder_maps_each_check_to_its_generator():
    code = iceberg(1)
    enc = synthesize_encoder(code)
    u = circuit_unitary(enc.circuit())
    for g, q in zip(code.generators, enc.check_qubits):
        assert np.allclose(u @ (-PauliString.single(4, q, "Z")).to_matrix() @ u.conj().T, g.to_matrix())


def test_decoder_sends_codespace_to_flagged_check_qubits(rng):
    code = five_one_three()
    enc = synthesize_encoder(code)
    dec = circuit_unitary(enc.decoder_circuit())
    proj = codespace_projector(code).matrix
    vals, vecs = np.linalg.eigh(proj)
    triv = trivial_projector(code.n, enc.check_qubits)
    for v in vecs[:, vals > 0.5].T:
        out = dec @ v
        assert np.isclose(np.vdot(out, triv @ out).real, 1)


def test_empty_generator_list():
    assert synthesize_encoder([]).decoder_gates == ()


def test_encoder_rejects_dependent_generators():
    zz = PauliString.from_label("ZZ")
    with pytest.raises(ValueError, match="dependent"):
        synthesize_encoder([zz, zz])


def test_five_one_three_encoder_costs():
    from qecgsm.circuit import depth_2q

    enc = synthesize_encoder(five_one_three())
    dec = enc.decoder_circuit()
    assert dec.gate_count(arity=2) == 9 and depth_2q(dec) == 6


@given(st.lists(st.sampled_from(["XXXX", "ZZZZ", "XXYY", "IIZZ", "YYYY", "XZZX"]), min_size=1, max_size=3,
                unique=True))
def test_encoder_property_on_small_commuting_sets(labels):
    from qecgsm.pauli import symplectic_rank

    gens = [PauliString.from_label(s) for s in labels]
    if any(not a.commutes(b) for a, b in itertools.combinations(gens, 2)) or symplectic_rank(gens) != len(gens):
        with pytest.raises(ValueError):
            synthesize_encoder(gens)
        return
    assert_encodes(gens, 4)


@pytest.mark.parametrize("name", sorted(code_catalog()))
def test_weight_one_detectability(name):
    code = code_catalog()[name]
    proj = codespace_projector(code).matrix
    for q in range(code.n):
        for kind in "XYZ":
            e = PauliString.single(code.n, q, kind)
            detectable = any(not e.commutes(g) for g in code.generators)
            sandwiched = proj @ e.to_matrix() @ proj
            assert detectable == np.allclose(sandwiched, 0)


@pytest.mark.parametrize("name", sorted(code_catalog()))
def test_groupings_multiply_to_projector(name):
    code = code_catalog()[name]
    full = codespace_projector(code).matrix
    for grouping in code.groupings.values():
        prod = np.eye(1 << code.n)
        for part in subprojectors(code, grouping):
            prod = prod @ part.matrix
        assert np.linalg.norm(prod - full, 2) < 1e-12

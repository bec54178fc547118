import numpy as np
import pytest

from qecgsm.circuit import Circuit, build_mshot_gsm, gate, measure, reset
from qecgsm.densop import DensityState, random_density
from qecgsm.noise import NoiseModel, compile_noisy
from qecgsm.pauli import PauliString, codespace_projector, get_code, stabilizer_group
from qecgsm.qec import (QED_METHODS, BranchLimitError, detection_circuit, evaluate, ideal_logical_state,
                        qec_adaptive_circuit, run_qec_adaptive, run_qec_canonical, run_qed, run_raw, sample,
                        steane_decoder, syndrome_of)
from qecgsm.verify import gsm_variants, oracle_mismatch

SYC = NoiseModel.from_preset("sycamore")


def weight_one(n):
    return [PauliString.single(n, q, k) for q in range(n) for k in "XYZ"]


def test_unmeasured_circuit_has_one_leaf():
    c = Circuit(2)
    c.append(reset(0), reset(1))
    c.append(gate("H", 0))
    c.append(gate("CX", 0, 1))
    ev = evaluate(c)
    assert len(ev.leaves) == 1 and np.isclose(ev.total_weight, 1)
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(ev.leaves[0].state.reordered((0, 1)).matrix, np.outer(bell, bell))


def test_plus_state_z_measurement():
    c = Circuit(1)
    c.append(reset(0))
    c.append(gate("H", 0))
    c.append(measure(0, 0))
    ev = evaluate(c, keep=[0])
    assert sorted(b.record[0] for b in ev.leaves) == [0, 1]
    assert all(np.isclose(b.weight, 0.5) for b in ev.leaves)
    assert all(b.rounds == 1 and b.count == 1 for b in ev.leaves)


def test_weights_sum_to_one_minus_pruned():
    code = get_code("iceberg4")
    circ = compile_noisy(detection_circuit(code, "sm"), SYC)
    ev = evaluate(circ, DensityState.from_vector(ideal_logical_state(code)), prune=1e-2)
    assert ev.pruned_mass > 0
    assert abs(ev.total_weight + ev.pruned_mass - 1) < 1e-12


@pytest.mark.parametrize("name,method", [("iceberg4", "sm"), ("iceberg4", "mshot"), ("five_one_three", "mshot")])
def test_merging_is_exact(name, method):
    code = get_code(name)
    circ = compile_noisy(detection_circuit(code, method), SYC)
    rho = DensityState(random_density(code.n, np.random.default_rng(5)))

    def total(leaves):
        return sum(x.state.reordered(tuple(range(x.state.n_qubits))).matrix for x in leaves)

    a = evaluate(circ, rho, merge=True)
    b = evaluate(circ, rho, merge=False)
    assert np.allclose(total(a.accepted(circ.checks)), total(b.accepted(circ.checks)), atol=1e-13)
    assert np.isclose(a.mean("count"), b.mean("count"))
    a = evaluate(circ, rho, merge=True, keep=())
    assert len(a.leaves) < len(b.leaves)
    assert np.allclose(total(a.leaves), total(b.leaves), atol=1e-13)


def test_branch_limit():
    with pytest.raises(BranchLimitError):
        code = get_code("iceberg4")
        evaluate(detection_circuit(code, "sm"), DensityState(random_density(4, np.random.default_rng(0))),
                 max_leaves=1)


@pytest.mark.parametrize("name", ["iceberg4", "iceberg6", "steane", "five_one_three"])
@pytest.mark.parametrize("method", QED_METHODS)
def test_noiseless_qed_is_perfect(name, method):
    code = get_code(name)
    if method == "shor" and name != "iceberg4":
        with pytest.raises(ValueError):
            detection_circuit(code, method)
        return
    res = run_qed(code, method)
    assert abs(res.logical_error_rate) < 1e-9
    assert abs(res.postselect_success_prob - 1) < 1e-9


def test_detectable_error_is_always_rejected():
    code = get_code("iceberg4")
    psi = PauliString.single(4, 0, "X").to_matrix() @ ideal_logical_state(code)
    for method in ("sm", "gsm", "shor"):
        assert run_qed(code, method, input_state=psi).postselect_success_prob < 1e-12


@pytest.mark.parametrize("name", ["iceberg6", "steane", "five_one_three"])
def test_mshot_trigger_pattern(name):
    """Check i fires exactly when the error anticommutes with some generator of group i."""
    code = get_code(name)
    psi = ideal_logical_state(code)
    for variant, (circ, groups) in gsm_variants(code).items():
        if len(groups) < 2:
            continue
        for err in weight_one(code.n):
            want = tuple(any(not err.commutes(code.generators[g]) for g in grp) for grp in groups)
            ev = evaluate(circ, DensityState.from_vector(err.to_matrix() @ psi))
            for b in ev.leaves:
                if b.weight > 1e-12:
                    assert tuple(c.flagged(b.record) for c in circ.checks) == want, (variant, err.label)


def test_steane_decoder_table():
    code = get_code("steane")
    dec = steane_decoder()
    assert dec.correction((0,) * 6).is_identity()
    group = {(g.x_bits, g.z_bits) for g in stabilizer_group(code.generators)}
    for err in weight_one(7):
        fixed = dec.correction(syndrome_of(code, err)) * err
        assert (fixed.x_bits, fixed.z_bits) in group, err.label
    assert len(dec.lookup) == 64


@pytest.mark.parametrize("q,kind", [(0, "X"), (3, "Y"), (6, "Z")])
def test_canonical_qec_corrects_weight_one(q, kind):
    code = get_code("steane")
    psi = PauliString.single(7, q, kind).to_matrix() @ ideal_logical_state(code)
    res = run_qec_canonical(code, input_state=psi)
    assert abs(res.logical_error_rate) < 1e-9
    assert res.avg_readout_rounds == 2
    res = run_qec_adaptive(code, input_state=psi)
    assert abs(res.logical_error_rate) < 1e-9


def test_adaptive_skips_sm_when_clean():
    res = run_qec_adaptive(get_code("steane"))
    assert res.avg_readout_rounds == 1 and res.avg_readout_count == 3


def test_false_positive_triggers_harmless_sm():
    code = get_code("iceberg4")
    circ = qec_adaptive_circuit(code, None)
    (flag,) = circ.checks
    res = run_qec_adaptive(code, flip_bits=flag.bits)
    assert abs(res.logical_error_rate) < 1e-12
    assert res.avg_readout_rounds == 1 + 2 and res.avg_readout_count == 1 + 2


@pytest.mark.parametrize("name", ["iceberg4", "iceberg6"])
def test_adaptive_agrees_with_canonical_when_noiseless(name):
    code = get_code(name)
    rho = random_density(code.n, np.random.default_rng(11))
    a = run_qec_adaptive(code, input_state=rho)
    c = run_qec_canonical(code, input_state=rho)
    assert abs(a.logical_error_rate - c.logical_error_rate) < 1e-12
    assert 1 <= a.avg_readout_rounds <= c.avg_readout_rounds + 1


def test_adaptive_agrees_with_canonical_steane():
    code = get_code("steane")
    psi = ideal_logical_state(code)
    rng = np.random.default_rng(2)
    errs = [np.eye(128)] + [e.to_matrix() for e in rng.choice(weight_one(7), 3, replace=False)]
    rho = sum(w * (e @ np.outer(psi, psi.conj()) @ e.conj().T) for w, e in zip([0.7, 0.1, 0.1, 0.1], errs))
    a = run_qec_adaptive(code, input_state=rho)
    c = run_qec_canonical(code, input_state=rho)
    assert abs(a.logical_error_rate - c.logical_error_rate) < 1e-12 and abs(a.logical_error_rate) < 1e-9


def test_noisy_rounds_bounds():
    code = get_code("iceberg4")
    a = run_qec_adaptive(code, SYC, 5.0)
    c = run_qec_canonical(code, SYC, 5.0)
    assert c.avg_readout_rounds == 2
    assert 1 < a.avg_readout_rounds <= c.avg_readout_rounds + 1
    assert a.pruned_mass < 1e-9 and c.pruned_mass < 1e-9


def test_projector_weight_matches_gsm_acceptance():
    code = get_code("iceberg6")
    rho = random_density(6, np.random.default_rng(8))
    p = codespace_projector(code).matrix
    res = run_qed(code, "gsm", input_state=rho)
    assert np.isclose(res.postselect_success_prob, np.trace(p @ rho).real)


def test_raw_reference():
    assert abs(run_raw(2).logical_error_rate) < 1e-12
    errs = [run_raw(2, SYC, t).logical_error_rate for t in (0.0, 5.0, 20.0)]
    assert errs == sorted(errs) and errs[0] > 0


def test_sampling_converges():
    code = get_code("iceberg4")
    exact = run_qed(code, "sm", SYC, 3.0)
    est = run_qed(code, "sm", SYC, 3.0, shots=400, seed=1)
    assert est.branch_count == 400
    assert abs(est.postselect_success_prob - exact.postselect_success_prob) < 0.1
    assert abs(est.fidelity - exact.fidelity) < 0.05
    again = run_qed(code, "sm", SYC, 3.0, shots=400, seed=1)
    assert again == est
    with pytest.raises(ValueError):
        sample(detection_circuit(code, "sm"), shots=0)


def test_steane_single_generator_shots_match_oracle():
    # 13 qubits live at the final readout, too large for the broad oracle sweep
    code = get_code("steane")
    circ = build_mshot_gsm(code, "single")
    rng = np.random.default_rng(4)
    for _ in range(2):
        assert oracle_mismatch(code, circ, code.groupings["single"], random_density(7, rng, rank=1)) < 1e-9

"""Self-checks shared by the ``selftest`` command.

Each suite returns :class:`Finding` records; a failing finding names the
invariant it checks so a broken catalog or builder is easy to locate.
"""
from __future__ import annotations

import dataclasses
import time
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .circuit import (build_canonical_sm, build_gsm_pauli_rotations, build_gsm_sandwich, build_iceberg_gsm,
                      build_mshot_gsm, build_shor_style_gsm_422, build_state_prep, depth_2q, toffoli_depth)
from .circuit.ir import Circuit
from .densop import DensityState, random_density, trace_distance
from .noise import (PRESETS, bit_flip, calibrate_2q_depolarizing, composite_2q_infidelity, depolarizing,
                    idle_channel)
from .pauli import PauliString, StabilizerCode, code_catalog, codespace_projector, stabilizer_group
from .qec import evaluate, ideal_logical_state, steane_decoder, syndrome_of

ORACLE_TOL = 1e-9
# dense simulation limit for the oracle checks (data plus simultaneously live ancillas)
ORACLE_MAX_QUBITS = 10
REFERENCE_LABELS = {
    "iceberg4": ("XXXX", "ZZZZ"),
    "iceberg6": ("XXXXXX", "ZZZZZZ"),
    "steane": ("XXXXIII", "IXXIXXI", "IIXXIXX", "ZZZZIII", "IZZIZZI", "IIZZIZZ"),
    "five_one_three": ("ZXXZI", "IZXXZ", "ZIZXX", "XZIZX"),
}


@dataclass(frozen=True)
class Finding:
    suite: str
    invariant: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{status} [{self.suite}] {self.invariant}" + (f": {self.detail}" if self.detail else "")


def gsm_variants(code: StabilizerCode, max_qubits: int = ORACLE_MAX_QUBITS) -> dict[str, tuple[Circuit, list]]:
    """GSM constructions for ``code`` with the generator group behind each check.

    Variants needing more than ``max_qubits`` qubits at once are left out.
    """
    whole = [tuple(range(code.k))]
    out = {"sandwich": (build_gsm_sandwich(code), whole),
           "rotation": (build_gsm_pauli_rotations(code), whole)}
    for name, grouping in sorted(code.groupings.items()):
        out[f"mshot_{name}"] = (build_mshot_gsm(code, grouping), [tuple(g) for g in grouping])
    if code.name in ("iceberg4", "iceberg6"):
        out["iceberg"] = (build_iceberg_gsm(code.n // 2 - 1, code), whole)
    if code.name == "iceberg4":
        out["shor"] = (build_shor_style_gsm_422(code), whole)
    return {k: v for k, v in out.items() if v[0].n_qubits <= max_qubits}


def circuit_branches(circuit: Circuit, rho: np.ndarray, n: int) -> dict[tuple[bool, ...], np.ndarray]:
    """Unnormalized data-qubit state per check-flag pattern after noiseless evaluation."""
    ev = evaluate(circuit, DensityState(rho, tuple(range(n))))
    out: dict[tuple[bool, ...], np.ndarray] = {}
    for leaf in ev.leaves:
        pattern = tuple(c.flagged(leaf.record) for c in circuit.checks)
        mat = leaf.state.reordered(tuple(range(n))).matrix
        out[pattern] = out.get(pattern, 0) + mat
    return out


def oracle_branches(code: StabilizerCode, groups: Sequence[Sequence[int]], rho: np.ndarray):
    """Projective measurement of each group's projector; a flag means the complement outcome."""
    projs = [codespace_projector(code, g).matrix for g in groups]
    eye = np.eye(rho.shape[0])
    out = {}
    for pattern in np.ndindex(*(2,) * len(projs)):
        op = eye
        for p, flag in zip(projs, pattern):
            op = op @ (eye - p if flag else p)
        out[tuple(bool(f) for f in pattern)] = op @ rho @ op.conj().T
    return out


def oracle_mismatch(code: StabilizerCode, circuit: Circuit, groups, rho: np.ndarray) -> float:
    got = circuit_branches(circuit, rho, code.n)
    want = oracle_branches(code, groups, rho)
    zero = np.zeros_like(rho)
    keys = set(got) | set(want)
    return max(trace_distance(got.get(k, zero), want.get(k, zero)) for k in keys)


def oracle_suite(codes: Mapping[str, StabilizerCode], n_inputs: int, seed: int = 7) -> list[Finding]:
    findings = []
    rng = np.random.default_rng(seed)
    for name, code in codes.items():
        for variant, (circ, groups) in gsm_variants(code).items():
            worst = max(oracle_mismatch(code, circ, groups, random_density(code.n, rng)) for _ in range(n_inputs))
            findings.append(Finding("oracle", f"{name}/{variant} matches projective measurement",
                                    worst < ORACLE_TOL, f"max trace distance {worst:.2e}"))
    return findings


def _two_qubit_gates(circuit: Circuit) -> int:
    return circuit.gate_count(arity=2)


def depth_suite(codes: Mapping[str, StabilizerCode]) -> list[Finding]:
    expected: list[tuple[str, Callable[[], int], int]] = []
    if "iceberg4" in codes:
        c = codes["iceberg4"]
        expected += [("iceberg4 canonical SM 2Q depth", lambda: depth_2q(build_canonical_sm(c)), 8),
                     ("iceberg4 GSM 2Q depth", lambda: depth_2q(build_iceberg_gsm(1, c)), 4),
                     ("iceberg4 GSM Toffoli layers", lambda: toffoli_depth(build_iceberg_gsm(1, c)), 1)]
    if "iceberg6" in codes:
        c6 = codes["iceberg6"]
        expected += [("iceberg6 canonical SM 2Q depth", lambda: depth_2q(build_canonical_sm(c6)), 12),
                     ("iceberg6 GSM 2Q depth", lambda: depth_2q(build_iceberg_gsm(2, c6)), 8),
                     ("iceberg6 GSM Toffoli layers", lambda: toffoli_depth(build_iceberg_gsm(2, c6)), 1)]
    if "steane" in codes:
        s = codes["steane"]
        expected += [("steane canonical SM 2Q depth", lambda: depth_2q(build_canonical_sm(s)), 8),
                     ("steane GSM 2Q depth", lambda: depth_2q(build_mshot_gsm(s, "plaquette")), 12),
                     ("steane GSM Toffoli layers", lambda: toffoli_depth(build_mshot_gsm(s, "plaquette")), 3)]
    if "five_one_three" in codes:
        f = codes["five_one_three"]
        expected += [("[[5,1,3]] sandwich 2Q gates", lambda: _two_qubit_gates(build_gsm_sandwich(f)), 18),
                     ("[[5,1,3]] sandwich 2Q depth", lambda: depth_2q(build_gsm_sandwich(f)), 12)]
        for group in f.groupings["pairwise"]:
            expected += [(f"[[5,1,3]] pair {group} 2Q gates",
                          lambda g=group: _two_qubit_gates(build_mshot_gsm(f, [g])), 12),
                         (f"[[5,1,3]] pair {group} 2Q depth", lambda g=group: depth_2q(build_mshot_gsm(f, [g])), 6)]
    out = []
    for label, fn, want in expected:
        got = fn()
        out.append(Finding("depth", label, got == want, f"got {got}, expected {want}"))
    return out


def catalog_suite(codes: Mapping[str, StabilizerCode]) -> list[Finding]:
    out = []
    for name, code in codes.items():
        try:
            code.validate()
            err = ""
        except ValueError as exc:
            err = str(exc)
        out.append(Finding("catalog", f"{name} generators commute, are independent and sign-consistent",
                           not err, err))
        ref = REFERENCE_LABELS.get(name)
        if ref is not None:
            got = tuple(g.label for g in code.generators)
            out.append(Finding("catalog", f"{name} generators match the reference table", got == ref,
                               "" if got == ref else f"got {got}"))
    return out


def prep_suite(codes: Mapping[str, StabilizerCode]) -> list[Finding]:
    out = []
    for name, code in codes.items():
        ev = evaluate(build_state_prep(code))
        rho = ev.leaves[0].state.reordered(tuple(range(code.n))).matrix
        worst = max(abs(1 - np.trace(g.to_matrix() @ rho).real) for g in code.generators)
        out.append(Finding("prep", f"{name} prepared state is stabilized by every generator",
                           worst < ORACLE_TOL, f"max deviation {worst:.2e}"))
    return out


def decoder_suite(codes: Mapping[str, StabilizerCode]) -> list[Finding]:
    if "steane" not in codes:
        return []
    code = codes["steane"]
    dec = steane_decoder()
    group = {(g.x_bits, g.z_bits) for g in stabilizer_group(code.generators)}
    bad = []
    for q in range(code.n):
        for kind in "XYZ":
            err = PauliString.single(code.n, q, kind)
            fixed = dec.correction(syndrome_of(code, err)) * err
            if (fixed.x_bits, fixed.z_bits) not in group:
                bad.append(f"{kind}{q}")
    out = [Finding("decoder", "steane lookup corrects all 21 weight-1 errors", not bad,
                   "failing: " + ",".join(bad) if bad else "")]
    psi = ideal_logical_state(code)
    worst = max(abs(1 - abs(np.vdot(psi, g.to_matrix() @ psi))) for g in code.generators)
    out.append(Finding("decoder", "steane ideal logical state lies in the codespace", worst < ORACLE_TOL,
                       f"max deviation {worst:.2e}"))
    return out


def channel_suite() -> list[Finding]:
    out = []
    channels = [depolarizing(1, 0.1), depolarizing(2, 0.1), depolarizing(3, 0.1), bit_flip(0.02)]
    for p in PRESETS.values():
        channels += [idle_channel(t, p.t1_us, p.t2_us) for t in (0.02, 0.66, 4.0, 30.0)]
    worst = 0.0
    for ch in channels:
        total = sum(k.conj().T @ k for k in ch.kraus_ops)
        worst = max(worst, float(np.abs(total - np.eye(total.shape[0])).max()))
    out.append(Finding("channels", "Kraus sets are trace preserving", worst < 1e-12, f"max error {worst:.2e}"))
    for p in PRESETS.values():
        r = composite_2q_infidelity(p, calibrate_2q_depolarizing(p))
        out.append(Finding("channels", f"{p.name} calibrated 2Q infidelity equals err_2q",
                           abs(r - p.err_2q) < 1e-6, f"{r:.9g} vs {p.err_2q}"))
    return out


def corrupt_code(code: StabilizerCode, index: int = 0) -> StabilizerCode:
    """Copy of ``code`` with the sign of one generator flipped (used to exercise failure reporting)."""
    gens = list(code.generators)
    gens[index] = -gens[index]
    return dataclasses.replace(code, generators=tuple(gens))


def run_selftest(quick: bool = False, codes: Mapping[str, StabilizerCode] | None = None,
                 log: Callable[[str], None] = print) -> bool:
    codes = dict(code_catalog() if codes is None else codes)
    suites = [
        ("catalog", lambda: catalog_suite(codes)),
        ("channels", channel_suite),
        ("prep", lambda: prep_suite(codes)),
        ("depth", lambda: depth_suite(codes)),
        ("decoder", lambda: decoder_suite(codes)),
        ("oracle", lambda: oracle_suite(codes, 2 if quick else 20)),
    ]
    ok = True
    for name, fn in suites:
        start = time.perf_counter()
        try:
            findings = fn()
        except Exception as exc:  # a crashing suite is a failure, reported like the others
            findings = [Finding(name, "suite runs", False, f"{type(exc).__name__}: {exc}")]
        for f in findings:
            log(f.line())
            ok &= f.ok
        log(f"  {name}: {time.perf_counter() - start:.1f}s")
    return ok

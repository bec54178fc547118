"""Circuit builders: state preparation, canonical syndrome measurement and GSM variants.

Layout: data qubits are ``0..n-1`` and ancillas follow.  Every ancilla is
(re)initialized by a ``reset`` right before use, prepared in ``|+>`` and read
out in the X basis.  For GSM ancillas outcome bit 1 (``|->``) means "in the
codespace"; for a canonical stabilizer ancilla bit 0 means eigenvalue +1.
"""
from __future__ import annotations

import itertools
import math
from collections.abc import Sequence

from ..pauli import (STEANE_PLAQUETTES, PauliString, StabilizerCode,
                     stabilizer_sum_expansion, synthesize_encoder)
from .ir import Check, Circuit, Instruction, gate, measure, reset, schedule_gates

FORMS = ("sandwich", "rotation")


class _Builder:
    """Accumulates layers and hands out ancilla and classical-bit indices."""

    def __init__(self, n_data: int, name: str = "", anc_start: int | None = None, clbit_start: int = 0):
        self.n_data = n_data
        self.layers: list[tuple[Instruction, ...]] = []
        self.next_anc = n_data if anc_start is None else anc_start
        self.next_clbit = clbit_start
        self.checks: list[Check] = []
        self.name = name

    def ancilla(self) -> int:
        a = self.next_anc
        self.next_anc += 1
        return a

    def clbit(self) -> int:
        c = self.next_clbit
        self.next_clbit += 1
        return c

    def layer(self, *insts: Instruction) -> None:
        if insts:
            self.layers.append(tuple(insts))

    def prepare_plus(self, qubits: Sequence[int]) -> None:
        self.layer(*(reset(q) for q in qubits))
        self.layer(*(gate("H", q) for q in qubits))

    def circuit(self) -> Circuit:
        width = max(self.next_anc, self.n_data)
        for layer in self.layers:
            for inst in layer:
                width = max(width, max(inst.qubits(), default=-1) + 1)
        circ = Circuit(width, name=self.name, checks=tuple(self.checks))
        for layer in self.layers:
            circ.append(*layer)
        circ.n_clbits = max(circ.n_clbits, self.next_clbit)
        return circ


# ---------------------------------------------------------------------------
# state preparation


def _is_iceberg(code: StabilizerCode) -> bool:
    return code.name.startswith("iceberg")


def _is_steane(code: StabilizerCode) -> bool:
    return code.name == "steane"


STEANE_CZ_LAYERS = (((0, 1), (4, 2), (6, 3)), ((0, 2), (4, 1), (6, 5)), ((0, 3), (4, 5), (6, 2)))
STEANE_PREP_H = (1, 2, 3, 5)


def build_state_prep(code: StabilizerCode) -> Circuit:
    """Logical state preparation from freshly initialized qubits.

    Iceberg codes get a GHZ state grown from qubit 0 along the star layout
    (depth 2 for four qubits, 3 for six); Steane gets nine CZs in three layers
    on ``|+>^7`` followed by Hadamards on four qubits.  Other codes use the
    synthesized encoder on ``|0...0>`` with the check qubits flipped.
    """
    b = _Builder(code.n, name=f"{code.name}_prep")
    n = code.n
    if _is_iceberg(code):
        b.layer(*(reset(q) for q in range(n)))
        b.layer(gate("H", 0))
        bottom = n - 1
        b.layer(gate("CX", 0, 1))
        b.layer(gate("CX", 0, 2), gate("CX", 1, bottom))
        rest = list(range(3, n - 1))
        for i in range(0, len(rest), 2):
            b.layer(*(gate("CX", src, q) for src, q in zip((0, bottom), rest[i:i + 2])))
    elif _is_steane(code):
        b.prepare_plus(range(n))
        for layer in STEANE_CZ_LAYERS:
            b.layer(*(gate("CZ", *pair) for pair in layer))
        b.layer(*(gate("H", q) for q in STEANE_PREP_H))
    else:
        enc = synthesize_encoder(code)
        b.layer(*(reset(q) for q in range(n)))
        b.layer(*(gate("X", q) for q in enc.check_qubits))
        b.layers.extend(enc.circuit().layers)
    return b.circuit()


# ---------------------------------------------------------------------------
# canonical syndrome measurement


def controlled_pauli_gates(anc: int, pauli: PauliString) -> list[list[Instruction]]:
    """Controlled-``pauli`` as one two-qubit gate per non-identity factor.

    Entry ``j`` belongs to ``pauli.support[j]`` and groups the single-qubit
    dressing with its two-qubit gate.  A minus sign adds a trailing ``[Z(anc)]``.
    """
    if pauli.phase not in (0, 2):
        raise ValueError("controlled Pauli needs a Hermitian string")
    out = []
    for q in pauli.support:
        x, z = pauli.factor(q)
        if (x, z) == (1, 0):
            out.append([gate("CX", anc, q)])
        elif (x, z) == (0, 1):
            out.append([gate("CZ", anc, q)])
        else:
            out.append([gate("SDG", q), gate("CX", anc, q), gate("S", q)])
    if pauli.phase == 2:
        out.append([gate("Z", anc)])
    return out


def _color_edges(edges: Sequence[tuple[int, int]], n_colors: int) -> list[int] | None:
    """Proper edge coloring by backtracking (edges are (ancilla, data) pairs)."""
    colors = [-1] * len(edges)

    def ok(i, c):
        a, q = edges[i]
        return all(not (colors[j] == c and (edges[j][0] == a or edges[j][1] == q)) for j in range(i))

    def rec(i):
        if i == len(edges):
            return True
        for c in range(n_colors):
            if ok(i, c):
                colors[i] = c
                if rec(i + 1):
                    return True
        colors[i] = -1
        return False

    return colors if rec(0) else None


def default_sm_rounds(code: StabilizerCode) -> list[list[int]]:
    if _is_steane(code):
        return [[0, 1, 2], [3, 4, 5]]
    return [[i] for i in range(code.k)]


def build_canonical_sm(code: StabilizerCode, rounds: Sequence[Sequence[int]] | None = None,
                       clbit_start: int = 0, anc_start: int | None = None,
                       shared_ancillas: bool = True) -> Circuit:
    """One ``|+>`` ancilla per generator, controlled generator, X-basis readout.

    Generators listed in the same round are measured simultaneously on
    distinct ancillas; rounds run back to back and reuse the same ancilla
    register after a reset.  Iceberg codes thus use a single ancilla for two
    rounds and Steane uses three ancillas for two rounds.  Classical bit
    ``clbit_start + i`` holds the outcome for generator ``i``.
    """
    rounds = default_sm_rounds(code) if rounds is None else [list(r) for r in rounds]
    if sorted(i for r in rounds for i in r) != list(range(code.k)):
        raise ValueError("rounds must cover every generator exactly once")
    b = _Builder(code.n, name=f"{code.name}_sm", anc_start=anc_start, clbit_start=clbit_start)
    width = max(len(r) for r in rounds)
    register = [b.ancilla() for _ in range(width)] if shared_ancillas else None
    for r in rounds:
        ancs = register[: len(r)] if shared_ancillas else [b.ancilla() for _ in r]
        b.prepare_plus(ancs)
        blocks, edges, signs = {}, [], []
        for a, i in zip(ancs, r):
            gen = code.generators[i]
            parts = controlled_pauli_gates(a, gen)
            for q, block in zip(gen.support, parts):
                blocks[(a, q)] = block
                edges.append((a, q))
            if len(parts) > len(gen.support):
                signs += parts[-1]
        degree = max(max(sum(1 for e in edges if e[k] == v) for v in {e[k] for e in edges}) for k in (0, 1))
        colors = _color_edges(edges, degree)
        for c in range(degree):
            pre, mid, post = [], [], []
            for e, col in zip(edges, colors):
                if col != c:
                    continue
                block = blocks[e]
                k = next(j for j, g in enumerate(block) if len(g.targets) == 2)
                pre += block[:k]
                mid.append(block[k])
                post += block[k + 1:]
            b.layer(*pre)
            b.layer(*mid)
            b.layer(*post)
        b.layer(*signs)
        bits = [clbit_start + i for i in r]
        b.layer(*(measure(a, c, "X") for a, c in zip(ancs, bits)))
        b.checks += [Check((c,), 1) for c in bits]
    b.next_clbit = max(b.next_clbit, clbit_start + code.k)
    return b.circuit()


# ---------------------------------------------------------------------------
# projector blocks


def _iceberg_support(gens: Sequence[PauliString]) -> tuple[int, ...] | None:
    """Support ``S`` if the group is exactly ``{X^S, Z^S}`` with ``|S|`` even and >= 4."""
    if len(gens) != 2:
        return None
    labels = set()
    for g in gens:
        if g.phase != 0:
            return None
        chars = {g.label[q] for q in g.support}
        if len(chars) != 1:
            return None
        labels.add(chars.pop())
    s0, s1 = gens[0].support, gens[1].support
    if labels != {"X", "Z"} or s0 != s1 or len(s0) < 4 or len(s0) % 2:
        return None
    if gens[0].label[s0[0]] == "Z":
        return None
    return s0


def iceberg_decoder(support: Sequence[int]) -> tuple[list[tuple[str, tuple[int, ...]]], tuple[int, int]]:
    """Decoder for ``{X^S, Z^S}`` on a star layout around ``S[0]`` and ``S[-1]``.

    ``|S| - 2`` layers of two CNOTs each map ``X^S`` to ``-Z`` on ``S[0]`` and
    ``Z^S`` to ``-Z`` on ``S[1]`` (after single-qubit fixes).  Only the end
    qubits of ``S`` talk to the middle ones.
    """
    s = list(support)
    top, bottom, w = s[0], s[-1], len(s)
    gates: list[tuple[str, tuple[int, ...]]] = []
    for j in range(1, w - 2):
        gates += [("CX", (top, s[j])), ("CX", (s[j + 1], bottom))]
    gates += [("CX", (top, s[w - 2])), ("CX", (bottom, s[1]))]
    gates += [("H", (top,)), ("X", (top,)), ("X", (s[1],))]
    return gates, (top, s[1])


def _sandwich_gates(gens: Sequence[PauliString], anc: int):
    """Decoder gate list and the ancilla-controlled phase for ``controlled exp(i pi P)``."""
    support = _iceberg_support(gens)
    if support is not None:
        decoder, checks = iceberg_decoder(support)
    else:
        enc = synthesize_encoder(gens)
        decoder, checks = list(enc.decoder_gates), enc.check_qubits
    name = {1: "CZ", 2: "CCZ"}.get(len(checks), "MCZ")
    return decoder, gate(name, anc, *checks)


def _rotation_gates(gens: Sequence[PauliString], anc: int) -> list[Instruction]:
    """Identity term as an ancilla phase, then one controlled rotation per nontrivial element."""
    terms = stabilizer_sum_expansion(list(gens))
    out = [gate("PHASE", anc, params=(terms[0][1],))]
    for pauli, theta in terms[1:]:
        bare = pauli.unsigned()
        qs = bare.support
        out.append(gate("CPAULIROT", anc, *qs, params=(theta if pauli.phase == 0 else -theta,),
                        pauli="".join(bare.label[q] for q in qs)))
    return out


def _projector_block(b: _Builder, gens: Sequence[PauliString], anc: int, form: str) -> None:
    if form == "sandwich":
        decoder, phase = _sandwich_gates(gens, anc)
        dec = schedule_gates(decoder, b.n_data)
        b.layers.extend(dec.layers)
        b.layer(phase)
        b.layers.extend(dec.inverse().layers)
    elif form == "rotation":
        for g in _rotation_gates(gens, anc):
            b.layer(g)
    else:
        raise ValueError(f"unknown projector form {form!r}; choose from {FORMS}")


def build_mshot_gsm(code: StabilizerCode, grouping: Sequence[Sequence[int]] | str, form: str = "sandwich",
                    clbit_start: int = 0, anc_start: int | None = None) -> Circuit:
    """One ancilla per group measuring its subprojector, blocks applied in order.

    All ancillas are read out together in a single round; check ``i`` of the
    result is flagged when subprojector ``i`` reports an error.  Classical bit
    ``clbit_start + i`` belongs to group ``i``.
    """
    if isinstance(grouping, str):
        grouping = code.groupings[grouping]
    grouping = [tuple(g) for g in grouping]
    flat = [i for g in grouping for i in g]
    if len(set(flat)) != len(flat) or any(not 0 <= i < code.k for i in flat) or not all(grouping):
        raise ValueError(f"groups must be disjoint, non-empty and index generators 0..{code.k - 1}: {grouping}")
    b = _Builder(code.n, name=f"{code.name}_gsm{len(grouping)}", anc_start=anc_start, clbit_start=clbit_start)
    ancs = []
    for group in grouping:
        anc = b.ancilla()
        ancs.append(anc)
        b.prepare_plus([anc])
        _projector_block(b, [code.generators[i] for i in group], anc, form)
    bits = [b.clbit() for _ in grouping]
    b.layer(*(measure(a, c, "X") for a, c in zip(ancs, bits)))
    b.checks = [Check((c,), 0) for c in bits]
    return b.circuit()


def build_gsm_sandwich(code: StabilizerCode, **kw) -> Circuit:
    """One-shot GSM: decoder, ancilla-controlled phase on the check qubits, encoder."""
    return build_mshot_gsm(code, [tuple(range(code.k))], form="sandwich", **kw)


def build_gsm_pauli_rotations(code: StabilizerCode, indices: Sequence[int] | None = None, **kw) -> Circuit:
    """One-shot GSM from controlled rotations ``exp(i pi M / 2^k)`` over the stabilizer group."""
    indices = tuple(range(code.k)) if indices is None else tuple(indices)
    return build_mshot_gsm(code, [indices], form="rotation", **kw)


def build_iceberg_gsm(m: int, code: StabilizerCode | None = None, **kw) -> Circuit:
    """Iceberg projector measurement: two-qubit depth ``4m`` plus one CCZ layer."""
    from ..pauli import iceberg

    if m not in (1, 2):
        raise ValueError(f"iceberg GSM circuit is provided for m in (1, 2), got {m}")
    code = code or iceberg(m)
    return build_mshot_gsm(code, [(0, 1)], form="sandwich", **kw)


def build_steane_gsm(code: StabilizerCode, **kw) -> Circuit:
    """Three-shot GSM with one plaquette subprojector per ancilla."""
    return build_mshot_gsm(code, "plaquette", form="sandwich", **kw)


def build_shor_style_gsm_422(code: StabilizerCode | None = None) -> Circuit:
    """GSM for [[4,2,2]] with a three-qubit GHZ ancilla register.

    Each ancilla controls one nontrivial term ``exp(i pi M / 4)`` of the
    projector expansion and the identity term is a phase on the first
    ancilla.  The register ends in ``|000> + s|111>`` with ``s = -1`` exactly
    in the codespace, so the X-basis parity of the three bits is 1 there:
    the check is flagged on even parity.
    """
    from ..pauli import iceberg

    code = code or iceberg(1)
    if code.n != 4 or code.k != 2:
        raise ValueError("Shor-style GSM is defined for the [[4,2,2]] code")
    b = _Builder(4, name="iceberg4_shor_gsm")
    ancs = [b.ancilla() for _ in range(3)]
    b.layer(*(reset(a) for a in ancs))
    b.layer(gate("H", ancs[0]))
    b.layer(gate("CX", ancs[0], ancs[1]))
    b.layer(gate("CX", ancs[1], ancs[2]))
    rots = _rotation_gates(code.generators, ancs[0])
    phase, terms = rots[0], rots[1:]
    if len(terms) != 3:
        raise ValueError("expected three nontrivial terms")
    b.layer(phase)
    for a, t in zip(ancs, terms):
        b.layer(gate("CPAULIROT", a, *t.targets[1:], params=t.params, pauli=t.pauli))
    bits = [b.clbit() for _ in ancs]
    b.layer(*(measure(a, c, "X") for a, c in zip(ancs, bits)))
    b.checks = [Check(tuple(bits), 0)]
    return b.circuit()


# ---------------------------------------------------------------------------
# reports


def connectivity(circuit: Circuit) -> dict[int, set[int]]:
    """Qubit interaction graph of the multi-qubit gates."""
    graph: dict[int, set[int]] = {q: set() for q in range(circuit.n_qubits)}
    for inst in circuit.walk():
        if inst.kind == "gate" and len(inst.targets) > 1:
            for a, c in itertools.permutations(inst.targets, 2):
                graph[a].add(c)
    return graph


def max_degree(circuit: Circuit, qubits: Sequence[int] | None = None) -> int:
    graph = connectivity(circuit)
    qubits = graph.keys() if qubits is None else qubits
    return max((len(graph[q]) for q in qubits), default=0)


__all__ = [
    "STEANE_CZ_LAYERS", "STEANE_PLAQUETTES", "STEANE_PREP_H", "build_canonical_sm", "build_gsm_pauli_rotations",
    "build_gsm_sandwich", "build_iceberg_gsm", "build_mshot_gsm", "build_shor_style_gsm_422",
    "build_state_prep", "build_steane_gsm", "connectivity", "controlled_pauli_gates", "default_sm_rounds",
    "iceberg_decoder", "max_degree",
]


# ---------------------------------------------------------------------------
# optional Toffoli decomposition


def _controlled_s(ctrl: int, tgt: int, sign: int) -> list[tuple[Instruction, ...]]:
    # diag(1, 1, 1, i^sign) as a controlled Z rotation plus a phase on the control
    quarter = sign * math.pi / 4
    return [(gate("CPAULIROT", ctrl, tgt, params=[-quarter], pauli="Z"),), (gate("PHASE", ctrl, params=[quarter]),)]


def ccz_decomposition(a: int, b: int, c: int) -> list[tuple[Instruction, ...]]:
    """CCZ from five two-qubit gates: CS(b,c) CX(a,b) CS^dag(b,c) CX(a,b) CS(a,c)."""
    return (_controlled_s(b, c, 1) + [(gate("CX", a, b),)] + _controlled_s(b, c, -1)
            + [(gate("CX", a, b),)] + _controlled_s(a, c, 1))


def _decompose_layers(layers) -> list[tuple[Instruction, ...]]:
    out: list[tuple[Instruction, ...]] = []
    for layer in layers:
        keep, extra = [], []
        for inst in layer:
            if inst.kind == "gate" and inst.name == "CCZ":
                extra.extend(ccz_decomposition(*inst.targets))
            elif inst.kind == "gate" and inst.name == "MCZ":
                raise ValueError(f"no decomposition for MCZ on {len(inst.targets)} qubits")
            elif inst.kind == "cond":
                keep.append(Instruction("cond", inst.name, condition=inst.condition,
                                        body=tuple(_decompose_layers(inst.body))))
            else:
                keep.append(inst)
        if keep:
            out.append(tuple(keep))
        out.extend(extra)
    return out


def decompose_toffoli(circuit: Circuit) -> Circuit:
    """Replace every CCZ by :func:`ccz_decomposition` (each gate in its own layer)."""
    out = Circuit(circuit.n_qubits, name=circuit.name, checks=circuit.checks)
    for layer in _decompose_layers(circuit.layers):
        out.append(*layer)
    out.n_clbits = max(out.n_clbits, circuit.n_clbits)
    return out

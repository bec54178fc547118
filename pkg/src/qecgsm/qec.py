"""Exact branch-tree evaluation of noisy circuits and the QED / QEC experiments.

Every measurement splits a branch into its two classical records.  With an
assignment error ``e`` the record ``r`` branch keeps ``(1-e) rho_r + e rho_{1-r}``,
so readout flips never add branches.  States stay unnormalized; a branch's
weight is its probability.
"""
from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .circuit.builders import (build_canonical_sm, build_gsm_sandwich, build_iceberg_gsm, build_mshot_gsm,
                               build_shor_style_gsm_422, build_state_prep)
from .circuit.gates import gate_matrix
from .circuit.ir import Check, Circuit, Condition, Instruction, cond, gate, idle, reset
from .densop import (DenseOperator, DensityState, add_qubit, apply_channel, apply_matrix, fidelity_pure,
                     measure_qubit, partial_trace)
from .noise import NoiseModel, channel_for, compile_noisy
from .pauli import STEANE_PLAQUETTES, PauliString, StabilizerCode

PRUNE_TOL = 1e-12
MAX_LEAVES = 1 << 20
QED_METHODS = ("sm", "gsm", "mshot", "shor")
_ZERO = np.diag([1.0, 0.0]).astype(complex)


class BranchLimitError(RuntimeError):
    """Raised when the branch tree would exceed the leaf budget."""


@dataclass
class Branch:
    state: DensityState
    record: dict[int, int] = field(default_factory=dict)
    rounds: int = 0
    count: int = 0

    @property
    def weight(self) -> float:
        return self.state.weight


@dataclass
class Evaluation:
    leaves: list[Branch]
    pruned_mass: float

    @property
    def total_weight(self) -> float:
        return sum(b.weight for b in self.leaves)

    def accepted(self, checks: Sequence[Check]) -> list[Branch]:
        return [b for b in self.leaves if not any(c.flagged(b.record) for c in checks)]

    def mean(self, attr: str) -> float:
        total = self.total_weight
        return sum(b.weight * getattr(b, attr) for b in self.leaves) / total if total > 0 else 0.0


def _refs(items) -> set[int]:
    """Classical bits read by any condition among ``items`` (layers or instructions, nested)."""
    out: set[int] = set()
    for item in items:
        if isinstance(item, Instruction):
            if item.kind == "cond":
                out |= item.condition.bits | _refs(item.body)
        else:
            out |= _refs(item)
    return out


def _merge(branches: list[Branch], live: set[int]) -> list[Branch]:
    """Sum branches whose futures are identical: same live record bits, readout tallies and qubits."""
    groups: dict[tuple, Branch] = {}
    for br in branches:
        rec = {k: v for k, v in br.record.items() if k in live}
        key = (br.rounds, br.count, br.state.qubits, tuple(sorted(rec.items())))
        if key in groups:
            acc = groups[key]
            acc.state = DensityState(acc.state.matrix + br.state.matrix, acc.state.qubits)
        else:
            groups[key] = Branch(br.state, rec, br.rounds, br.count)
    return list(groups.values())


class _Run:
    def __init__(self, prune: float, max_leaves: int, flip_bits: frozenset[int], merge: bool):
        self.prune = prune
        self.max_leaves = max_leaves
        self.flip_bits = flip_bits
        self.merge = merge
        self.pruned = 0.0

    def layers(self, branches: list[Branch], layers, after: set[int]) -> list[Branch]:
        """Run ``layers``; ``after`` holds the bits read once these layers are done."""
        layers = list(layers)
        for i, layer in enumerate(layers):
            live = _refs(layers[i + 1:]) | after
            out = self.layer(branches, layer, live)
            branches = []
            for br in out:
                if br.weight < self.prune:
                    self.pruned += max(br.weight, 0.0)
                else:
                    branches.append(br)
            if self.merge:
                branches = _merge(branches, live)
            if len(branches) > self.max_leaves:
                raise BranchLimitError(f"branch tree exceeds {self.max_leaves} leaves")
        return branches

    def layer(self, branches: list[Branch], layer: Sequence[Instruction], after: set[int]) -> list[Branch]:
        n_meas = 0
        for j, inst in enumerate(layer):
            if inst.kind == "measure":
                n_meas += 1
                branches = [child for b in branches for child in self.measure(b, inst)]
            elif inst.kind == "cond":
                rest = _refs(layer[j + 1:]) | after
                hit = [b for b in branches if inst.condition.holds(b.record)]
                miss = [b for b in branches if not inst.condition.holds(b.record)]
                if self.merge:
                    hit = _merge(hit, _refs(inst.body) | rest)
                branches = miss + (self.layers(hit, inst.body, rest) if hit else [])
            else:
                for b in branches:
                    b.state = _apply(b.state, inst)
        if n_meas:
            for b in branches:
                b.rounds += 1
                b.count += n_meas
        return branches

    def measure(self, br: Branch, inst: Instruction) -> list[Branch]:
        b0, b1 = measure_qubit(br.state, inst.targets[0], inst.basis)
        eps = inst.params[0] if inst.params else 0.0
        if eps > 0:
            b0, b1 = (DensityState((1 - eps) * b0.matrix + eps * b1.matrix, b0.qubits),
                      DensityState((1 - eps) * b1.matrix + eps * b0.matrix, b1.qubits))
        flip = int(inst.clbit in self.flip_bits)
        out = []
        for value, st in ((0, b0), (1, b1)):
            rec = dict(br.record)
            rec[inst.clbit] = value ^ flip
            out.append(Branch(st, rec, br.rounds, br.count))
        return out


class _SampledRun(_Run):
    """Keeps one outcome per measurement, drawn with its Born probability."""

    def __init__(self, rng: np.random.Generator, flip_bits: frozenset[int]):
        super().__init__(0.0, MAX_LEAVES, flip_bits, merge=False)
        self.rng = rng

    def measure(self, br: Branch, inst: Instruction) -> list[Branch]:
        children = super().measure(br, inst)
        w = np.array([max(c.weight, 0.0) for c in children])
        pick = children[int(self.rng.random() * w.sum() >= w[0])]
        pick.state = DensityState(pick.state.matrix * (br.weight / pick.weight), pick.state.qubits)
        return [pick]


def _apply(state: DensityState, inst: Instruction) -> DensityState:
    if inst.kind == "gate":
        return apply_matrix(state, gate_matrix(inst), inst.targets)
    if inst.kind == "reset":
        q = inst.targets[0]
        if q in state.qubits:
            state = partial_trace(state, [q])
        return add_qubit(state, q, _ZERO)
    if inst.kind == "noise":
        ch = channel_for(inst)
        if inst.targets and ch.n_qubits == len(inst.targets):
            return apply_channel(state, ch, inst.targets)
        targets = inst.targets or [q for q in state.qubits if q not in inst.exclude]
        for q in targets:
            state = apply_channel(state, ch, [q])
        return state
    if inst.kind == "idle":
        return state
    raise ValueError(f"cannot apply {inst.kind} instruction")


def evaluate(circuit: Circuit, state: DensityState | None = None, *, prune: float = PRUNE_TOL,
             max_leaves: int = MAX_LEAVES, flip_bits: Iterable[int] = (), keep: Iterable[int] | None = None,
             merge: bool = True) -> Evaluation:
    """Enumerate every measurement branch of ``circuit`` acting on ``state``.

    ``state`` carries the qubits that exist before the circuit starts (default:
    none); other qubits appear at their first reset and leave at measurement.
    ``flip_bits`` inverts the stored record of the listed classical bits.

    With ``merge`` on, branches are summed once their records differ only in
    bits that no later condition reads and that are not in ``keep`` (default:
    the bits of ``circuit.checks``).  Merged leaves keep only those live bits.
    """
    if state is None:
        state = DensityState(np.ones((1, 1), dtype=complex), ())
    if keep is None:
        keep = {b for c in circuit.checks for b in c.bits}
    run = _Run(prune, max_leaves, frozenset(flip_bits), merge)
    leaves = run.layers([Branch(state)], circuit.layers, set(keep))
    return Evaluation(leaves, run.pruned)


def sample(circuit: Circuit, state: DensityState | None = None, *, shots: int, seed: int | None = 0,
           flip_bits: Iterable[int] = ()) -> Evaluation:
    """Monte Carlo alternative to :func:`evaluate`: ``shots`` trajectories of weight ``1/shots`` each.

    Noise channels stay exact on each trajectory; only measurement outcomes are
    sampled, so estimates converge to the exact values as ``shots`` grows.
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    if state is None:
        state = DensityState(np.ones((1, 1), dtype=complex), ())
    run = _SampledRun(np.random.default_rng(seed), frozenset(flip_bits))
    start = DensityState(state.matrix / shots, state.qubits)
    leaves = []
    for _ in range(shots):
        leaves += run.layers([Branch(start)], circuit.layers, set())
    return Evaluation(leaves, 0.0)


def _run(circuit: Circuit, state, shots: int | None, seed: int | None, **kw) -> Evaluation:
    if shots is None:
        return evaluate(circuit, state, **kw)
    return sample(circuit, state, shots=shots, seed=seed, flip_bits=kw.get("flip_bits", ()))


# ---------------------------------------------------------------------------
# decoding


@dataclass(frozen=True)
class SyndromeDecoder:
    """Lookup decoder split into independent parts.

    Each part maps the syndrome bits of a subset of generators (bit 1 means
    eigenvalue -1) to a correction; the total correction is the product.
    """

    n: int
    parts: tuple[tuple[tuple[int, ...], Mapping[tuple[int, ...], PauliString]], ...]

    def correction(self, syndrome: Sequence[int]) -> PauliString:
        out = PauliString.identity(self.n)
        for gens, table in self.parts:
            key = tuple(syndrome[i] for i in gens)
            out = out * table.get(key, PauliString.identity(self.n))
        return out

    @property
    def lookup(self) -> dict[tuple[int, ...], PauliString]:
        k = sum(len(g) for g, _ in self.parts)
        keys = np.ndindex(*(2,) * k)
        return {tuple(int(b) for b in key): self.correction(key) for key in keys}

    def correction_blocks(self, clbits: Sequence[int]) -> list[Instruction]:
        """Conditional blocks applying ideal Pauli corrections for every nontrivial syndrome."""
        blocks = []
        for gens, table in self.parts:
            for key, pauli in sorted(table.items()):
                if not any(key) or pauli.is_identity():
                    continue
                checks = tuple(Check((clbits[g],), v) for g, v in zip(gens, key))
                gates = [gate(pauli.label.lstrip("+-i")[q], q, ideal=True) for q in pauli.support]
                blocks.append(cond(Condition(checks, "all"), [gates]))
        return blocks


def steane_decoder() -> SyndromeDecoder:
    """X-stabilizer syndromes locate Z errors and Z-stabilizer syndromes locate X errors."""
    n = 7
    z_table, x_table = {}, {}
    for q in range(n):
        key = tuple(int(q in plaq) for plaq in STEANE_PLAQUETTES)
        z_table[key] = PauliString.single(n, q, "Z")
        x_table[key] = PauliString.single(n, q, "X")
    return SyndromeDecoder(n, (((0, 1, 2), z_table), ((3, 4, 5), x_table)))


def syndrome_of(code: StabilizerCode, error: PauliString) -> tuple[int, ...]:
    return tuple(int(not error.commutes(g)) for g in code.generators)


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class CycleResult:
    logical_error_rate: float
    fidelity: float
    avg_readout_rounds: float
    avg_readout_count: float
    postselect_success_prob: float
    branch_count: int
    pruned_mass: float = 0.0


_IDEAL_STATES: dict[tuple, np.ndarray] = {}


def ideal_logical_state(code: StabilizerCode) -> np.ndarray:
    """State vector produced by the noiseless preparation circuit."""
    key = (code.name, tuple(g.label for g in code.generators))
    if key not in _IDEAL_STATES:
        ev = evaluate(build_state_prep(code))
        rho = ev.leaves[0].state.reordered(tuple(range(code.n))).matrix
        vecs = np.linalg.eigh(rho)[1]
        vec = vecs[:, -1]
        _IDEAL_STATES[key] = vec * np.exp(-1j * np.angle(vec[np.argmax(np.abs(vec))]))
    return _IDEAL_STATES[key].copy()


def _data_state(branch: Branch, n: int) -> DensityState:
    extra = [q for q in branch.state.qubits if q >= n]
    st = partial_trace(branch.state, extra) if extra else branch.state
    return st.reordered(tuple(range(n)))


def detection_circuit(code: StabilizerCode, method: str) -> Circuit:
    method = method.lower()
    if method == "sm":
        return build_canonical_sm(code)
    if method == "gsm":
        if code.name.startswith("iceberg"):
            return build_iceberg_gsm(code.n // 2 - 1, code)
        return build_gsm_sandwich(code)
    if method == "mshot":
        grouping = next(g for g in ("plaquette", "pairwise", "full") if g in code.groupings)
        return build_mshot_gsm(code, grouping)
    if method == "shor":
        if code.n != 4 or code.k != 2:
            raise ValueError(f"method 'shor' is only available for iceberg4, not {code.name}")
        return build_shor_style_gsm_422(code)
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(QED_METHODS)}")


def _experiment(code: StabilizerCode, body: Circuit, idle_time: float, with_prep: bool) -> Circuit:
    width = max(code.n, body.n_qubits)
    circ = Circuit(width, name=body.name, checks=body.checks)
    if with_prep:
        circ.extend(build_state_prep(code))
    if idle_time > 0:
        circ.append(idle(range(code.n), idle_time))
    circ.extend(body)
    circ.checks = body.checks
    return circ


def _start(code: StabilizerCode, input_state) -> DensityState | None:
    if input_state is None:
        return None
    if isinstance(input_state, DensityState):
        return input_state
    arr = np.asarray(input_state, dtype=complex)
    if arr.ndim == 1:
        return DensityState.from_vector(arr)
    return DensityState(arr)


def _model(model: NoiseModel | None) -> NoiseModel:
    return NoiseModel.ideal() if model is None else model


def run_qed(code: StabilizerCode, method: str, model: NoiseModel | None = None, idle_time: float = 0.0,
            input_state=None, shots: int | None = None, seed: int | None = 0) -> CycleResult:
    """Prepare, idle, detect and post-select on every check passing.

    ``shots`` switches from exact branch enumeration to :func:`sample`.
    """
    model = _model(model)
    circ = compile_noisy(_experiment(code, detection_circuit(code, method), idle_time, input_state is None), model)
    ev = _run(circ, _start(code, input_state), shots, seed)
    target = ideal_logical_state(code)
    acc = ev.accepted(circ.checks)
    success = sum(b.weight for b in acc)
    overlap = sum(fidelity_pure(_data_state(b, code.n), target) for b in acc)
    fid = overlap / success if success > 0 else 0.0
    return CycleResult(1 - fid, fid, ev.mean("rounds"), ev.mean("count"), success, len(ev.leaves), ev.pruned_mass)


def _qec_result(code, circ, ev: Evaluation) -> CycleResult:
    target = ideal_logical_state(code)
    total = ev.total_weight
    fid = sum(fidelity_pure(_data_state(b, code.n), target) for b in ev.leaves) / total
    return CycleResult(1 - fid, fid, ev.mean("rounds"), ev.mean("count"), 1.0, len(ev.leaves), ev.pruned_mass)


def _correction_layers(decoder: SyndromeDecoder | None, clbits: Sequence[int]) -> list[tuple[Instruction, ...]]:
    if decoder is None:
        return []
    return [(blk,) for blk in decoder.correction_blocks(clbits)]


def qec_canonical_circuit(code: StabilizerCode, decoder: SyndromeDecoder | None) -> Circuit:
    sm = build_canonical_sm(code)
    for layer in _correction_layers(decoder, range(code.k)):
        sm.append(*layer)
    return sm


def qec_adaptive_circuit(code: StabilizerCode, decoder: SyndromeDecoder | None, grouping: str | None = None) -> Circuit:
    """GSM stage, then canonical SM and correction only when a subprojector flags."""
    if grouping is None:
        gsm = detection_circuit(code, "gsm")
    else:
        gsm = build_mshot_gsm(code, grouping)
    sm = build_canonical_sm(code, clbit_start=gsm.n_clbits)
    body = list(sm.layers) + _correction_layers(decoder, [gsm.n_clbits + i for i in range(code.k)])
    circ = Circuit(max(gsm.n_qubits, sm.n_qubits), name=f"{code.name}_adaptive", checks=gsm.checks)
    circ.extend(gsm)
    circ.append(cond(Condition(gsm.checks, "any"), body))
    return circ


def run_qec_canonical(code: StabilizerCode, model: NoiseModel | None = None, idle_time: float = 0.0,
                      decoder: SyndromeDecoder | None = None, input_state=None, shots: int | None = None,
                      seed: int | None = 0) -> CycleResult:
    """Full syndrome measurement, lookup decoding and ideal Pauli correction."""
    if decoder is None and code.name == "steane":
        decoder = steane_decoder()
    body = qec_canonical_circuit(code, decoder)
    circ = compile_noisy(_experiment(code, body, idle_time, input_state is None), _model(model))
    return _qec_result(code, circ, _run(circ, _start(code, input_state), shots, seed, keep=()))


def run_qec_adaptive(code: StabilizerCode, model: NoiseModel | None = None, idle_time: float = 0.0,
                     decoder: SyndromeDecoder | None = None, input_state=None, grouping: str | None = None,
                     flip_bits: Iterable[int] = (), shots: int | None = None, seed: int | None = 0) -> CycleResult:
    """Adaptive cycle.  Steane defaults to the three-shot plaquette GSM stage."""
    if code.name == "steane":
        decoder = decoder or steane_decoder()
        grouping = grouping or "plaquette"
    body = qec_adaptive_circuit(code, decoder, grouping)
    circ = compile_noisy(_experiment(code, body, idle_time, input_state is None), _model(model))
    return _qec_result(code, circ, _run(circ, _start(code, input_state), shots, seed,
                                          flip_bits=flip_bits, keep=()))


def run_raw(n_qubits: int, model: NoiseModel | None = None, idle_time: float = 0.0) -> CycleResult:
    """Unencoded ``|+>^n`` under the same preparation and idle noise."""
    circ = Circuit(n_qubits, name="raw")
    circ.append(*(reset(q) for q in range(n_qubits)))
    circ.append(*(gate("H", q) for q in range(n_qubits)))
    if idle_time > 0:
        circ.append(idle(range(n_qubits), idle_time))
    ev = evaluate(compile_noisy(circ, _model(model)))
    plus = np.full(1 << n_qubits, 2 ** (-n_qubits / 2), dtype=complex)
    fid = fidelity_pure(_data_state(ev.leaves[0], n_qubits), plus)
    return CycleResult(1 - fid, fid, 0.0, 0.0, 1.0, 1, ev.pruned_mass)


def projective_outcome(state: DensityState, projector: DenseOperator, n_data: int):
    """Oracle: (weight in codespace, weight outside) for the data part of ``state``."""
    rho = state.reordered(tuple(range(n_data))).matrix
    p = projector.matrix
    return float(np.trace(p @ rho).real), float(np.trace((np.eye(len(p)) - p) @ rho).real)

"""Layered circuit representation consumed by noise compilation and evaluation.

A :class:`Circuit` is a list of layers; every instruction in a layer acts on
distinct qubits and the layer is one slot of simultaneous operations.  Layers
holding only single-qubit gates, resets or noise take no time; layers with
multi-qubit gates last one gate time, and measurement layers last one readout.
"""
from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field, replace

GATE_ARITY = {
    "H": 1, "X": 1, "Y": 1, "Z": 1, "S": 1, "SDG": 1, "PHASE": 1,
    "CX": 2, "CZ": 2, "CCZ": 3,
}
VARIADIC_GATES = ("MCZ", "PAULIROT", "CPAULIROT")
CLIFFORD_INVERSE = {"H": "H", "X": "X", "Y": "Y", "Z": "Z", "S": "SDG", "SDG": "S",
                    "CX": "CX", "CZ": "CZ", "CCZ": "CCZ", "MCZ": "MCZ"}
KINDS = ("gate", "measure", "reset", "idle", "noise", "cond")


@dataclass(frozen=True)
class Check:
    """A detection check over classical bits.

    The check is *flagged* (reports an error) when the parity of ``bits``
    equals ``flag_parity``.
    """

    bits: tuple[int, ...]
    flag_parity: int

    def flagged(self, record: Mapping[int, int]) -> bool:
        return sum(record[b] for b in self.bits) % 2 == self.flag_parity


@dataclass(frozen=True)
class Condition:
    checks: tuple[Check, ...]
    mode: str = "any"

    def __post_init__(self):
        if self.mode not in ("any", "all"):
            raise ValueError(f"unknown condition mode {self.mode!r}")

    @property
    def bits(self) -> set[int]:
        return {b for c in self.checks for b in c.bits}

    def holds(self, record: Mapping[int, int]) -> bool:
        test = any if self.mode == "any" else all
        return test(c.flagged(record) for c in self.checks)


@dataclass(frozen=True)
class Instruction:
    kind: str
    name: str = ""
    targets: tuple[int, ...] = ()
    params: tuple[float, ...] = ()
    pauli: str = ""
    clbit: int = -1
    basis: str = "Z"
    ideal: bool = False
    exclude: tuple[int, ...] = ()
    condition: Condition | None = None
    body: tuple[tuple[Instruction, ...], ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown instruction kind {self.kind!r}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"duplicate targets in {self.name or self.kind}: {self.targets}")
        if self.kind == "gate":
            arity = GATE_ARITY.get(self.name)
            if arity is None and self.name not in VARIADIC_GATES:
                raise ValueError(f"unknown gate {self.name!r}")
            if arity is not None and len(self.targets) != arity:
                raise ValueError(f"gate {self.name} takes {arity} qubits, got {self.targets}")
            if self.name == "PAULIROT" and len(self.pauli) != len(self.targets):
                raise ValueError("PAULIROT label length must match targets")
            if self.name == "CPAULIROT" and len(self.pauli) != len(self.targets) - 1:
                raise ValueError("CPAULIROT label covers the targets after the control")
        if self.kind == "measure" and (self.clbit < 0 or self.basis not in ("X", "Z")):
            raise ValueError("measure needs a classical bit and basis X or Z")

    @property
    def duration_class(self) -> str:
        if self.kind == "gate":
            return {1: "oneq", 2: "twoq"}.get(len(self.targets), "toffoli")
        if self.kind == "measure":
            return "readout"
        if self.kind == "idle":
            return "explicit"
        return "zero"

    def qubits(self) -> set[int]:
        """Qubits this instruction occupies (a conditional block occupies all of its body)."""
        if self.kind == "cond":
            return {q for layer in self.body for inst in layer for q in inst.qubits()}
        return set(self.targets)

    def inverse(self) -> Instruction:
        if self.kind != "gate":
            raise ValueError(f"cannot invert a {self.kind} instruction")
        if self.name in ("PHASE", "PAULIROT", "CPAULIROT"):
            return replace(self, params=tuple(-p for p in self.params))
        return replace(self, name=CLIFFORD_INVERSE[self.name])


def gate(name: str, *targets: int, params: Sequence[float] = (), pauli: str = "",
         ideal: bool = False) -> Instruction:
    return Instruction("gate", name.upper(), tuple(targets), tuple(float(p) for p in params), pauli,
                       ideal=ideal)


def measure(qubit: int, clbit: int, basis: str = "Z") -> Instruction:
    return Instruction("measure", "measure", (qubit,), clbit=clbit, basis=basis)


def reset(qubit: int) -> Instruction:
    return Instruction("reset", "reset", (qubit,))


def idle(qubits: Sequence[int], duration_us: float) -> Instruction:
    return Instruction("idle", "idle", tuple(qubits), (float(duration_us),))


def noise(name: str, targets: Sequence[int], params: Sequence[float], exclude: Sequence[int] = ()) -> Instruction:
    """Noise channel instruction; empty ``targets`` means every live qubit except ``exclude``."""
    return Instruction("noise", name, tuple(targets), tuple(float(p) for p in params),
                       exclude=tuple(exclude))


def cond(condition: Condition, layers: Iterable[Iterable[Instruction]]) -> Instruction:
    return Instruction("cond", "if", condition=condition, body=tuple(tuple(l) for l in layers))


@dataclass
class Circuit:
    n_qubits: int
    layers: list[tuple[Instruction, ...]] = field(default_factory=list)
    n_clbits: int = 0
    checks: tuple[Check, ...] = ()
    name: str = ""

    def append(self, *instructions: Instruction) -> Circuit:
        """Append one layer; instructions must act on disjoint qubits."""
        seen: set[int] = set()
        for inst in instructions:
            qs = inst.qubits()
            if inst.kind == "cond" or (inst.kind == "noise" and not inst.targets):
                if len(instructions) > 1:
                    raise ValueError(f"{inst.kind} instruction must occupy a layer by itself")
            if qs & seen:
                raise ValueError(f"overlapping targets in layer: {sorted(qs & seen)}")
            if any(q >= self.n_qubits for q in qs):
                raise ValueError(f"qubit out of range in {inst}")
            seen |= qs
            if inst.kind == "measure":
                self.n_clbits = max(self.n_clbits, inst.clbit + 1)
            if inst.kind == "cond":
                for layer in inst.body:
                    for sub in layer:
                        if sub.kind == "measure":
                            self.n_clbits = max(self.n_clbits, sub.clbit + 1)
        if instructions:
            self.layers.append(tuple(instructions))
        return self

    def extend(self, other: Circuit) -> Circuit:
        for layer in other.layers:
            self.append(*layer)
        self.n_clbits = max(self.n_clbits, other.n_clbits)
        return self

    def instructions(self) -> list[Instruction]:
        return [inst for layer in self.layers for inst in layer]

    def walk(self) -> Iterator[Instruction]:
        """Every instruction, descending into conditional bodies."""
        for layer in self.layers:
            yield from _walk_layer(layer)

    def inverse(self) -> Circuit:
        out = Circuit(self.n_qubits, name=f"{self.name}_inv" if self.name else "")
        for layer in reversed(self.layers):
            out.append(*(inst.inverse() for inst in layer))
        return out

    def copy(self) -> Circuit:
        return Circuit(self.n_qubits, list(self.layers), self.n_clbits, self.checks, self.name)

    def gate_count(self, arity: int | None = None, min_arity: int | None = None) -> int:
        count = 0
        for inst in self.walk():
            if inst.kind != "gate":
                continue
            k = len(inst.targets)
            if (arity is None or k == arity) and (min_arity is None or k >= min_arity):
                count += 1
        return count

    def measurement_count(self) -> int:
        return sum(1 for inst in self.walk() if inst.kind == "measure")

    def readout_rounds(self) -> int:
        """Measurement layers along the longest path (conditional bodies included)."""
        return _rounds(self.layers)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Circuit):
            return NotImplemented
        return (self.n_qubits, self.layers, self.n_clbits, self.checks) == (
            other.n_qubits, other.layers, other.n_clbits, other.checks)


def _walk_layer(layer):
    for inst in layer:
        yield inst
        if inst.kind == "cond":
            for sub in inst.body:
                yield from _walk_layer(sub)


def _rounds(layers) -> int:
    total = 0
    for layer in layers:
        if any(i.kind == "measure" for i in layer):
            total += 1
        for inst in layer:
            if inst.kind == "cond":
                total += _rounds(inst.body)
    return total


def _layer_depth(layers, min_arity: int, max_arity: int | None) -> int:
    depth = 0
    for layer in layers:
        hit = any(i.kind == "gate" and len(i.targets) >= min_arity
                  and (max_arity is None or len(i.targets) <= max_arity) for i in layer)
        depth += hit
        for inst in layer:
            if inst.kind == "cond":
                depth += _layer_depth(inst.body, min_arity, max_arity)
    return depth


def depth_2q(circuit: Circuit) -> int:
    """Number of layers containing at least one two-qubit gate."""
    return _layer_depth(circuit.layers, 2, 2)


def toffoli_depth(circuit: Circuit) -> int:
    """Number of layers containing a gate on three or more qubits."""
    return _layer_depth(circuit.layers, 3, None)


def gates_commute(a: Instruction, b: Instruction) -> bool:
    """Cheap syntactic test: disjoint gates, or CNOTs sharing only controls or only targets."""
    shared = set(a.targets) & set(b.targets)
    if not shared:
        return True
    if a.name == "CX" and b.name == "CX":
        return all((q == a.targets[0]) == (q == b.targets[0]) for q in shared)
    return False


class GateScheduler:
    """Incremental layering with even slots for single-qubit gates and odd slots for the rest.

    A gate is placed in the earliest free slot after every earlier gate it does
    not commute with, so single-qubit gates never stretch the two-qubit depth.
    """

    def __init__(self, n_qubits: int):
        self.n_qubits = n_qubits
        self.placed: list[tuple[int, Instruction]] = []
        self._busy: dict[int, set[int]] = {}

    def slot_for(self, inst: Instruction) -> int:
        lo = -1
        for slot, other in self.placed:
            if slot > lo and not gates_commute(inst, other):
                lo = slot
        single = len(inst.targets) == 1
        slot = lo + 1
        while single != (slot % 2 == 0) or self._busy.get(slot, set()) & set(inst.targets):
            slot += 1
        return slot

    def put(self, inst: Instruction) -> int:
        slot = self.slot_for(inst)
        self.placed.append((slot, inst))
        self._busy.setdefault(slot, set()).update(inst.targets)
        return slot

    def depth(self, min_arity: int = 2) -> int:
        return len({slot for slot, inst in self.placed if len(inst.targets) >= min_arity})

    def circuit(self, name: str = "") -> Circuit:
        slots: dict[int, list[Instruction]] = {}
        for slot, inst in self.placed:
            slots.setdefault(slot, []).append(inst)
        circ = Circuit(self.n_qubits, name=name)
        for slot in sorted(slots):
            circ.append(*slots[slot])
        return circ


def schedule_gates(gates: Iterable[tuple[str, tuple[int, ...]] | Instruction], n_qubits: int,
                   name: str = "") -> Circuit:
    """Pack an ordered gate list into layers as early as commutation allows."""
    sched = GateScheduler(n_qubits)
    for g in gates:
        sched.put(g if isinstance(g, Instruction) else gate(g[0], *g[1]))
    return sched.circuit(name)

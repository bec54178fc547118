"""Pauli strings, stabilizer codes and code-space projectors.

Pauli strings are stored in symplectic form as integer bitmasks: bit ``q`` of
``x_bits``/``z_bits`` is the X/Z component on qubit ``q``.  The operator is
``i**phase`` times the tensor product of single-qubit ``I, X, Y, Z`` factors,
so a Hermitian string has an even ``phase``.  Labels read left to right in
qubit order: ``"ZXXZI"`` puts ``Z`` on qubit 0.
"""
from __future__ import annotations

import functools
import itertools
import sys
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .densop import DenseOperator

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_FACTORS = {(0, 0): _I2, (1, 0): _X, (1, 1): _Y, (0, 1): _Z}
_CHARS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_PHASE_PREFIX = {0: "", 1: "i", 2: "-", 3: "-i"}


def _g(x1: int, z1: int, x2: int, z2: int) -> int:
    """Exponent of ``i`` from multiplying single-qubit factors (x1,z1)*(x2,z2)."""
    if x1 == 0 and z1 == 0:
        return 0
    if x1 == 1 and z1 == 1:
        return z2 - x2
    if x1 == 1:
        return z2 * (2 * x2 - 1)
    return x2 * (1 - 2 * z2)


@dataclass(frozen=True)
class PauliString:
    n: int
    x_bits: int
    z_bits: int
    phase: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phase", self.phase % 4)
        mask = (1 << self.n) - 1
        if self.x_bits & ~mask or self.z_bits & ~mask:
            raise ValueError("bits set outside the qubit range")

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        phase = 0
        for prefix, p in (("-i", 3), ("+i", 1), ("i", 1), ("-", 2), ("+", 0)):
            if label.startswith(prefix):
                phase, label = p, label[len(prefix):]
                break
        x = z = 0
        for q, c in enumerate(label.upper()):
            if c not in _BITS:
                raise ValueError(f"bad Pauli character {c!r}")
            bx, bz = _BITS[c]
            x |= bx << q
            z |= bz << q
        return cls(len(label), x, z, phase)

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls(n, 0, 0)

    @classmethod
    def single(cls, n: int, qubit: int, kind: str) -> PauliString:
        bx, bz = _BITS[kind]
        return cls(n, bx << qubit, bz << qubit)

    @classmethod
    def on_support(cls, n: int, support: Sequence[int], kind: str) -> PauliString:
        bx, bz = _BITS[kind]
        mask = sum(1 << q for q in support)
        return cls(n, mask * bx, mask * bz)

    def factor(self, q: int) -> tuple[int, int]:
        return (self.x_bits >> q) & 1, (self.z_bits >> q) & 1

    @property
    def sign(self) -> complex:
        return 1j ** self.phase

    @property
    def label(self) -> str:
        return _PHASE_PREFIX[self.phase] + "".join(_CHARS[self.factor(q)] for q in range(self.n))

    @property
    def support(self) -> tuple[int, ...]:
        s = self.x_bits | self.z_bits
        return tuple(q for q in range(self.n) if (s >> q) & 1)

    @property
    def weight(self) -> int:
        return (self.x_bits | self.z_bits).bit_count()

    def is_identity(self) -> bool:
        return self.x_bits == 0 and self.z_bits == 0

    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    def unsigned(self) -> PauliString:
        return PauliString(self.n, self.x_bits, self.z_bits)

    def __neg__(self) -> PauliString:
        return PauliString(self.n, self.x_bits, self.z_bits, self.phase + 2)

    def __mul__(self, other: PauliString) -> PauliString:
        return multiply(self, other)

    def commutes(self, other: PauliString) -> bool:
        return commutes(self, other)

    def restricted(self, qubits: Sequence[int]) -> str:
        """Unsigned label of the factors on ``qubits`` (in that order)."""
        return "".join(_CHARS[self.factor(q)] for q in qubits)

    def to_matrix(self) -> np.ndarray:
        mat = np.ones((1, 1), dtype=complex)
        for q in reversed(range(self.n)):
            mat = np.kron(mat, _FACTORS[self.factor(q)])
        return self.sign * mat

    def conjugated(self, gate: str, qubits: Sequence[int]) -> PauliString:
        """``G P G^dagger`` for a Clifford gate ``G`` on ``qubits``."""
        return _conjugate(self, gate.upper(), tuple(qubits))

    def __str__(self) -> str:
        return self.label


def multiply(a: PauliString, b: PauliString) -> PauliString:
    if a.n != b.n:
        raise ValueError(f"cannot multiply {a.n}- and {b.n}-qubit Paulis")
    e = a.phase + b.phase
    for q in range(a.n):
        e += _g(*a.factor(q), *b.factor(q))
    return PauliString(a.n, a.x_bits ^ b.x_bits, a.z_bits ^ b.z_bits, e)


def commutes(a: PauliString, b: PauliString) -> bool:
    if a.n != b.n:
        raise ValueError(f"cannot compare {a.n}- and {b.n}-qubit Paulis")
    return ((a.x_bits & b.z_bits).bit_count() + (a.z_bits & b.x_bits).bit_count()) % 2 == 0


def _flip(p: PauliString, cond: int) -> int:
    return p.phase + 2 * cond


def _conjugate(p: PauliString, gate: str, qs: tuple[int, ...]) -> PauliString:
    if gate in ("H", "S", "SDG", "X", "Y", "Z"):
        (q,) = qs
        x, z = p.factor(q)
        if gate == "X":
            return PauliString(p.n, p.x_bits, p.z_bits, _flip(p, z))
        if gate == "Z":
            return PauliString(p.n, p.x_bits, p.z_bits, _flip(p, x))
        if gate == "Y":
            return PauliString(p.n, p.x_bits, p.z_bits, _flip(p, x ^ z))
        if gate == "H":
            xb = p.x_bits & ~(1 << q) | (z << q)
            zb = p.z_bits & ~(1 << q) | (x << q)
            return PauliString(p.n, xb, zb, _flip(p, x & z))
        if gate == "S":
            return PauliString(p.n, p.x_bits, p.z_bits ^ (x << q), _flip(p, x & z))
        # SDG: X -> -Y, Y -> X
        return PauliString(p.n, p.x_bits, p.z_bits ^ (x << q), _flip(p, x & (1 - z)))
    if gate == "CX":
        c, t = qs
        xc, zc = p.factor(c)
        xt, zt = p.factor(t)
        flip = xc & zt & (xt ^ zc ^ 1)
        return PauliString(p.n, p.x_bits ^ (xc << t), p.z_bits ^ (zt << c), _flip(p, flip))
    if gate == "CZ":
        a, b = qs
        return _conjugate(_conjugate(_conjugate(p, "H", (b,)), "CX", (a, b)), "H", (b,))
    raise ValueError(f"no Clifford conjugation rule for gate {gate!r}")


# ---------------------------------------------------------------------------
# codes


@dataclass(frozen=True)
class StabilizerCode:
    name: str
    n: int
    generators: tuple[PauliString, ...]
    logical_x: tuple[PauliString, ...] = ()
    logical_z: tuple[PauliString, ...] = ()
    groupings: dict[str, tuple[tuple[int, ...], ...]] = field(default_factory=dict)
    plaquettes: tuple[tuple[int, ...], ...] = ()

    @property
    def k(self) -> int:
        """Number of stabilizer generators (not the number of logical qubits)."""
        return len(self.generators)

    @property
    def n_logical(self) -> int:
        return self.n - self.k

    def validate(self) -> None:
        """Raise ``ValueError`` naming the first violated code invariant."""
        gens = self.generators
        for g in gens:
            if g.n != self.n or not g.is_hermitian():
                raise ValueError(f"{self.name}: generator {g} is not a Hermitian {self.n}-qubit Pauli")
        for a, b in itertools.combinations(range(len(gens)), 2):
            if not commutes(gens[a], gens[b]):
                raise ValueError(f"{self.name}: generators {a} and {b} anticommute")
        if symplectic_rank(gens) != len(gens):
            raise ValueError(f"{self.name}: generators are not independent")
        if _group_contains_minus_identity(gens):
            raise ValueError(f"{self.name}: generator signs are inconsistent (-I in the group)")
        for i, (lx, lz) in enumerate(zip(self.logical_x, self.logical_z)):
            for g in gens:
                if not (commutes(lx, g) and commutes(lz, g)):
                    raise ValueError(f"{self.name}: logical pair {i} does not commute with {g}")
            for j, (mx, mz) in enumerate(zip(self.logical_x, self.logical_z)):
                if commutes(lx, mz) != (i != j) or not commutes(lx, mx) or not commutes(lz, mz):
                    raise ValueError(f"{self.name}: logical pairs {i}, {j} have wrong commutation")
        for name, grouping in self.groupings.items():
            check_grouping(self, grouping, where=f"{self.name}: grouping {name!r}")


def check_grouping(code: StabilizerCode, grouping: Sequence[Sequence[int]], where: str = "grouping") -> None:
    flat = [i for group in grouping for i in group]
    if sorted(flat) != list(range(code.k)):
        raise ValueError(f"{where} does not partition generator indices 0..{code.k - 1}: {grouping}")


def symplectic_rank(paulis: Sequence[PauliString]) -> int:
    rows = [p.x_bits | (p.z_bits << p.n) for p in paulis]
    rank = 0
    for bit in range(2 * max((p.n for p in paulis), default=0)):
        pivot = next((r for r in rows if (r >> bit) & 1), None)
        if pivot is None:
            continue
        rows.remove(pivot)
        rows = [r ^ pivot if (r >> bit) & 1 else r for r in rows]
        rank += 1
    return rank


def _group_contains_minus_identity(gens: Sequence[PauliString]) -> bool:
    return any(el.is_identity() and el.phase != 0 for el, _ in _group_elements(tuple(gens)))


@functools.lru_cache(maxsize=64)
def _group_elements(gens: tuple[PauliString, ...]) -> tuple[tuple[PauliString, int], ...]:
    n = gens[0].n if gens else 0
    out = []
    for mask in range(1 << len(gens)):
        el = PauliString.identity(n)
        for i, g in enumerate(gens):
            if (mask >> i) & 1:
                el = el * g
        out.append((el, mask))
    return tuple(out)


def stabilizer_group(gens: Sequence[PauliString]) -> list[PauliString]:
    """All ``2^k`` products of the generators, indexed by subset bitmask."""
    return [el for el, _ in _group_elements(tuple(gens))]


def _as_generators(code_or_gens) -> tuple[tuple[PauliString, ...], int]:
    if isinstance(code_or_gens, StabilizerCode):
        return code_or_gens.generators, code_or_gens.n
    gens = tuple(code_or_gens)
    if not gens:
        raise ValueError("pass a StabilizerCode to describe an empty generator list")
    return gens, gens[0].n


@dataclass(frozen=True)
class CodespaceProjector:
    """Projector onto the joint +1 eigenspace of ``generators``."""

    generators: tuple[PauliString, ...]
    operator: DenseOperator
    indices: tuple[int, ...] = ()

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.matrix

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))


def codespace_projector(code_or_gens, indices: Sequence[int] | None = None) -> CodespaceProjector:
    gens, n = _as_generators(code_or_gens)
    if indices is not None:
        gens = tuple(gens[i] for i in indices)
    for a, b in itertools.combinations(range(len(gens)), 2):
        if not commutes(gens[a], gens[b]):
            raise ValueError(f"generators {gens[a]} and {gens[b]} anticommute; no joint eigenspace")
    dim = 1 << n
    mat = np.eye(dim, dtype=complex)
    for g in gens:
        mat = mat @ ((np.eye(dim) + g.to_matrix()) / 2)
    mat = (mat + mat.conj().T) / 2
    return CodespaceProjector(gens, DenseOperator(mat, "projector"),
                              tuple(indices) if indices is not None else tuple(range(len(gens))))


def subprojectors(code: StabilizerCode, grouping: Sequence[Sequence[int]]) -> list[CodespaceProjector]:
    check_grouping(code, grouping)
    return [codespace_projector(code, group) for group in grouping]


def projector_exponential(proj: CodespaceProjector | DenseOperator | np.ndarray) -> DenseOperator:
    """``exp(i pi P) = I - 2P`` for an orthogonal projector ``P``."""
    mat = proj.matrix if hasattr(proj, "matrix") else np.asarray(proj)
    return DenseOperator(np.eye(mat.shape[0]) - 2 * mat, "unitary")


def stabilizer_sum_expansion(code_or_gens) -> list[tuple[PauliString, float]]:
    """Terms ``(M_i, pi/K)`` with ``P = (1/K) sum M_i`` over the full stabilizer group.

    The identity term comes first and only contributes a global phase.
    """
    gens, _ = _as_generators(code_or_gens)
    group = stabilizer_group(gens)
    angle = np.pi / len(group)
    return [(m, angle) for m in group]


# ---------------------------------------------------------------------------
# encoder synthesis


@dataclass(frozen=True)
class Encoder:
    """Clifford encoder from the trivial code with ``-Z`` stabilizers on ``check_qubits``.

    ``decoder_gates`` is the gate sequence (name, qubits) of the inverse map; the
    encoder circuit is its reverse with each gate inverted.
    """

    n: int
    check_qubits: tuple[int, ...]
    decoder_gates: tuple[tuple[str, tuple[int, ...]], ...]

    @property
    def data_qubits(self) -> tuple[int, ...]:
        return tuple(q for q in range(self.n) if q not in self.check_qubits)

    @property
    def encoder_gates(self) -> tuple[tuple[str, tuple[int, ...]], ...]:
        inverse = {"S": "SDG", "SDG": "S"}
        return tuple((inverse.get(name, name), qs) for name, qs in reversed(self.decoder_gates))

    def decoder_circuit(self, qubit_map: Sequence[int] | None = None):
        from .circuit.ir import schedule_gates

        return schedule_gates(_remap(self.decoder_gates, qubit_map), n_qubits=_width(self.n, qubit_map))

    def circuit(self, qubit_map: Sequence[int] | None = None):
        return self.decoder_circuit(qubit_map).inverse()


def _remap(gates, qubit_map):
    if qubit_map is None:
        return gates
    return tuple((name, tuple(qubit_map[q] for q in qs)) for name, qs in gates)


def _width(n, qubit_map):
    return n if qubit_map is None else max(qubit_map) + 1


@dataclass(frozen=True)
class _Block:
    pivot: int
    local: tuple[tuple[str, tuple[int, ...]], ...]
    controls: tuple[int, ...]
    sign_fix: bool


def _eliminate(gens: Sequence[PauliString], choices: Sequence[int]) -> list[_Block]:
    """Fold generator ``i`` onto the ``choices[i]``-th qubit of its residual support."""
    images = list(gens)
    pivots: list[int] = []
    blocks = []

    def apply(name, qs):
        for j, img in enumerate(images):
            images[j] = img.conjugated(name, qs)

    for i, choice in enumerate(choices):
        support = [q for q in images[i].support if q not in pivots]
        if not support:
            raise ValueError("dependent generators: residual support is empty")
        pivot = support[choice]
        local = []
        for q in support:
            x, z = images[i].factor(q)
            if x:
                if z:
                    local.append(("S", (q,)))
                local.append(("H", (q,)))
        for g in local:
            apply(*g)
        controls = tuple(q for q in support if q != pivot)
        for q in controls:
            apply("CX", (q, pivot))
        sign_fix = images[i].phase == 0
        if sign_fix:
            apply("X", (pivot,))
        for j in range(len(images)):
            if j != i and images[j].factor(pivot) == (0, 1):
                images[j] = images[j] * images[i]
        pivots.append(pivot)
        blocks.append(_Block(pivot, tuple(local), controls, sign_fix))
    return blocks


def _choice_sequences(gens: Sequence[PauliString]) -> list[tuple[int, ...]]:
    out = []

    def rec(prefix):
        if len(prefix) == len(gens):
            out.append(tuple(prefix))
            return
        blocks = _eliminate(gens[: len(prefix) + 1], prefix + [0])
        for c in range(len(blocks[-1].controls) + 1):
            rec(prefix + [c])

    rec([])
    return out


def _block_gates(block: _Block, order: Sequence[int]):
    gates = list(block.local)
    gates += [("CX", (q, block.pivot)) for q in order]
    if block.sign_fix:
        gates.append(("X", (block.pivot,)))
    return gates


def _best_schedule(blocks: list[_Block], n: int, bound: int):
    from .circuit.ir import GateScheduler, gate

    best: list = [bound, None]

    def rec(i, sched, chosen):
        if sched.depth() >= best[0]:
            return
        if i == len(blocks):
            best[0], best[1] = sched.depth(), list(chosen)
            return
        for order in itertools.permutations(blocks[i].controls):
            nxt = GateScheduler(n)
            nxt.placed = list(sched.placed)
            nxt._busy = {k: set(v) for k, v in sched._busy.items()}
            for g in _block_gates(blocks[i], order):
                nxt.put(gate(g[0], *g[1]))
            rec(i + 1, nxt, chosen + [order])

    rec(0, GateScheduler(n), [])
    return best[0], best[1]


@functools.lru_cache(maxsize=32)
def _synthesize(gens: tuple[PauliString, ...], n: int) -> Encoder:
    candidates = [(c, _eliminate(gens, c)) for c in _choice_sequences(gens)]
    cost = max(sum(len(b.controls) for b in blocks) for _, blocks in candidates)
    best_depth, best_gates = sys.maxsize, None
    for _, blocks in candidates:
        if sum(len(b.controls) for b in blocks) != cost:
            continue
        depth, orders = _best_schedule(blocks, n, best_depth)
        if orders is not None:
            best_depth = depth
            best_gates = [g for b, o in zip(blocks, orders) for g in _block_gates(b, o)]
            best_pivots = tuple(b.pivot for b in blocks)
    return Encoder(n, best_pivots, tuple(best_gates))


def synthesize_encoder(code_or_gens) -> Encoder:
    """Clifford encoder found by eliminating one generator at a time.

    Each generator, already cleared of earlier pivots, is rotated to a Z-string
    by single-qubit Cliffords and folded onto a pivot qubit with a CNOT fan-in;
    the pivot becomes a check qubit carrying ``-Z``.  A generator of residual
    weight ``w`` costs ``w - 1`` CNOTs.  Pivots are chosen so that no later
    generator shrinks through the pivot clean-up (the full elimination cost),
    and among those the pivots and fan-in orders giving the smallest two-qubit
    depth under commutation-aware layering are kept.
    """
    if isinstance(code_or_gens, StabilizerCode):
        gens, n = tuple(code_or_gens.generators), code_or_gens.n
    else:
        gens = tuple(code_or_gens)
        n = gens[0].n if gens else 0
    if not gens:
        return Encoder(n, (), ())
    if n > 12 or len(gens) > 6:
        raise ValueError("encoder synthesis is limited to 12 qubits and 6 generators")
    for a, b in itertools.combinations(range(len(gens)), 2):
        if not commutes(gens[a], gens[b]):
            raise ValueError("cannot synthesize an encoder for anticommuting generators")
    if symplectic_rank(gens) != len(gens):
        raise ValueError("cannot synthesize an encoder for dependent generators")
    return _synthesize(gens, n)


# ---------------------------------------------------------------------------
# catalog

STEANE_PLAQUETTES = ((0, 1, 2, 3), (1, 2, 4, 5), (2, 3, 5, 6))


def iceberg(m: int) -> StabilizerCode:
    """The [[2m+2, 2m, 2]] Iceberg code with top qubit 0 and bottom qubit 2m+1."""
    if m < 1:
        raise ValueError("iceberg code needs m >= 1")
    n = 2 * m + 2
    top, bottom = 0, n - 1
    gens = (PauliString.on_support(n, range(n), "X"), PauliString.on_support(n, range(n), "Z"))
    lx = tuple(PauliString.on_support(n, (top, j), "X") for j in range(1, n - 1))
    lz = tuple(PauliString.on_support(n, (j, bottom), "Z") for j in range(1, n - 1))
    return StabilizerCode(f"iceberg{n}", n, gens, lx, lz,
                          groupings={"full": ((0, 1),), "single": ((0,), (1,))},
                          plaquettes=(tuple(range(n)),))


def steane() -> StabilizerCode:
    """[[7,1,3]] color code; X checks precede Z checks, plaquette order fixed."""
    n = 7
    xs = tuple(PauliString.on_support(n, p, "X") for p in STEANE_PLAQUETTES)
    zs = tuple(PauliString.on_support(n, p, "Z") for p in STEANE_PLAQUETTES)
    return StabilizerCode(
        "steane", n, xs + zs,
        (PauliString.on_support(n, range(n), "X"),),
        (PauliString.on_support(n, range(n), "Z"),),
        groupings={"full": (tuple(range(6)),), "plaquette": ((0, 3), (1, 4), (2, 5)),
                   "single": tuple((i,) for i in range(6))},
        plaquettes=STEANE_PLAQUETTES,
    )


def five_one_three() -> StabilizerCode:
    gens = tuple(PauliString.from_label(s) for s in ("ZXXZI", "IZXXZ", "ZIZXX", "XZIZX"))
    return StabilizerCode(
        "five_one_three", 5, gens,
        (PauliString.from_label("XXXXX"),), (PauliString.from_label("ZZZZZ"),),
        groupings={"full": ((0, 1, 2, 3),), "pairwise": ((0, 1), (2, 3)),
                   "single": tuple((i,) for i in range(4))},
    )


_ALIASES = {
    "iceberg4": "iceberg4", "422": "iceberg4", "iceberg1": "iceberg4",
    "iceberg6": "iceberg6", "642": "iceberg6", "iceberg2": "iceberg6",
    "steane": "steane", "713": "steane",
    "five_one_three": "five_one_three", "513": "five_one_three",
}


@functools.lru_cache(maxsize=None)
def code_catalog() -> dict[str, StabilizerCode]:
    codes = {"iceberg4": iceberg(1), "iceberg6": iceberg(2), "steane": steane(),
             "five_one_three": five_one_three()}
    for c in codes.values():
        c.validate()
    return codes


def get_code(name: str) -> StabilizerCode:
    key = _ALIASES.get(name.lower())
    if key is None:
        raise KeyError(f"unknown code {name!r}; available: {', '.join(sorted(code_catalog()))}")
    return code_catalog()[key]

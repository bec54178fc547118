"""Dense density-matrix algebra over labeled qubits.

Conventions:
    A state over qubits ``(q_0, q_1, ..., q_{n-1})`` stores its matrix in the
    computational basis with ``q_0`` as the least significant bit of the basis
    index.  Kets are written left to right in label order, so ``|10>`` over
    qubits ``(0, 1)`` means qubit 0 is set and has basis index 1.

    A local operator acting on ``targets`` follows the same rule: operator
    qubit ``j`` is ``targets[j]`` and is bit ``j`` of the operator's index.

    States are carried unnormalized inside branch trees.  ``weight`` is the
    trace of the matrix; normalization happens only when a metric is read out.
"""
from __future__ import annotations

import functools

import string
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import _kernels

STRUCT_TOL = 1e-10
ALGEBRA_TOL = 1e-12

OperatorKind = Literal["unitary", "projector", "hermitian", "general"]


class DensityState:
    """A (possibly unnormalized) density matrix over labeled qubits."""

    __slots__ = ("matrix", "qubits")

    def __init__(self, matrix: np.ndarray, qubits: Sequence[int] | None = None):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"density matrix must be square, got {matrix.shape}")
        dim = matrix.shape[0]
        n = dim.bit_length() - 1
        if dim != 1 << n:
            raise ValueError(f"dimension {dim} is not a power of two")
        if qubits is None:
            qubits = tuple(range(n))
        qubits = tuple(int(q) for q in qubits)
        if len(qubits) != n:
            raise ValueError(f"{len(qubits)} labels for a {n}-qubit matrix")
        if len(set(qubits)) != n:
            raise ValueError(f"duplicate qubit labels {qubits}")
        self.matrix = matrix
        self.qubits = qubits

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    @property
    def weight(self) -> float:
        return float(np.trace(self.matrix).real)

    @classmethod
    def from_vector(cls, vec: np.ndarray, qubits: Sequence[int] | None = None) -> DensityState:
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        return cls(np.outer(vec, vec.conj()), qubits)

    @classmethod
    def basis(cls, bits: Sequence[int], qubits: Sequence[int] | None = None) -> DensityState:
        """Computational basis state; ``bits[i]`` is the value of qubit ``i``."""
        idx = sum(int(b) << i for i, b in enumerate(bits))
        vec = np.zeros(1 << len(bits), dtype=complex)
        vec[idx] = 1.0
        return cls.from_vector(vec, qubits)

    @classmethod
    def maximally_mixed(cls, n: int, qubits: Sequence[int] | None = None) -> DensityState:
        return cls(np.eye(1 << n, dtype=complex) / (1 << n), qubits)

    def normalized(self) -> DensityState:
        w = self.weight
        if w <= 0:
            raise ValueError("cannot normalize a zero-weight state")
        return DensityState(self.matrix / w, self.qubits)

    def scaled(self, factor: float) -> DensityState:
        return DensityState(self.matrix * factor, self.qubits)

    def reordered(self, qubits: Sequence[int]) -> DensityState:
        """Same state with the labels permuted into the given order."""
        qubits = tuple(qubits)
        if sorted(qubits) != sorted(self.qubits):
            raise ValueError(f"{qubits} is not a permutation of {self.qubits}")
        if qubits == self.qubits:
            return self
        n = self.n_qubits
        t = self.matrix.reshape((2,) * (2 * n))
        pos = {q: i for i, q in enumerate(self.qubits)}
        # new axis a (ket) holds qubit qubits[n-1-a]
        ket = [n - 1 - pos[qubits[n - 1 - a]] for a in range(n)]
        t = t.transpose(ket + [n + a for a in ket])
        return DensityState(t.reshape(1 << n, 1 << n), qubits)

    def check(self, tol: float = STRUCT_TOL) -> None:
        """Raise ``ValueError`` unless Hermitian and positive semidefinite."""
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=tol, rtol=0):
            raise ValueError("state is not Hermitian")
        if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -tol:
            raise ValueError("state is not positive semidefinite")

    def __repr__(self) -> str:
        return f"DensityState(qubits={self.qubits}, weight={self.weight:.6g})"


@dataclass
class DenseOperator:
    matrix: np.ndarray
    kind: OperatorKind = "general"

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        dim = self.matrix.shape[0]
        if self.matrix.shape != (dim, dim) or dim & (dim - 1):
            raise ValueError(f"bad operator shape {self.matrix.shape}")
        if self.kind == "unitary":
            eye = np.eye(dim)
            if not np.allclose(self.matrix.conj().T @ self.matrix, eye, atol=STRUCT_TOL, rtol=0):
                raise ValueError("operator tagged unitary is not unitary")
        elif self.kind == "projector":
            m = self.matrix
            if not (np.allclose(m @ m, m, atol=STRUCT_TOL, rtol=0)
                    and np.allclose(m, m.conj().T, atol=STRUCT_TOL, rtol=0)):
                raise ValueError("operator tagged projector is not an orthogonal projector")
        elif self.kind == "hermitian":
            if not np.allclose(self.matrix, self.matrix.conj().T, atol=STRUCT_TOL, rtol=0):
                raise ValueError("operator tagged hermitian is not Hermitian")

    @property
    def n_qubits(self) -> int:
        return self.matrix.shape[0].bit_length() - 1


@dataclass
class KrausChannel:
    kraus_ops: list[np.ndarray]
    label: str = ""
    _superop: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)
    _terms: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        ops = [np.asarray(k, dtype=complex) for k in self.kraus_ops]
        if not ops:
            raise ValueError("channel needs at least one Kraus operator")
        dim = ops[0].shape[0]
        if any(k.shape != (dim, dim) for k in ops) or dim & (dim - 1):
            raise ValueError("Kraus operators must share a square power-of-two shape")
        total = sum(k.conj().T @ k for k in ops)
        err = np.abs(total - np.eye(dim)).max()
        if err > ALGEBRA_TOL:
            raise ValueError(f"channel {self.label!r} is not trace preserving (error {err:.3g})")
        self.kraus_ops = ops

    @property
    def n_qubits(self) -> int:
        return self.kraus_ops[0].shape[0].bit_length() - 1

    def superoperator(self) -> np.ndarray:
        """``S[a, c, b, d] = sum_k K[a, b] conj(K[c, d])`` so that rho'[a, c] = S[a, c, b, d] rho[b, d]."""
        if self._superop is None:
            ks = np.stack(self.kraus_ops)
            self._superop = np.einsum("kab,kcd->acbd", ks, ks.conj())
        return self._superop

    def sliced_terms(self):
        if self._terms is None:
            terms = _sliced_terms(self.superoperator())
            self._terms = (terms, _kernels.pack_terms(terms, self.kraus_ops[0].shape[0]))
        return self._terms


# ---------------------------------------------------------------------------
# tensor helpers


def _ket_axes(qubits: tuple[int, ...], targets: Sequence[int]) -> list[int]:
    n = len(qubits)
    pos = {q: i for i, q in enumerate(qubits)}
    try:
        axes = [n - 1 - pos[t] for t in targets]
    except KeyError as exc:
        raise ValueError(f"qubit {exc.args[0]} is not part of state {qubits}") from None
    if len(set(axes)) != len(axes):
        raise ValueError(f"duplicate targets {tuple(targets)}")
    return axes


def _contract(tensor: np.ndarray, op_t: np.ndarray, t: int, axes: list[int]) -> np.ndarray:
    # op_t axes: (out_{t-1} .. out_0, in_{t-1} .. in_0); operator qubit j <-> axes[j]
    op_in = [2 * t - 1 - j for j in range(t)]
    res = np.tensordot(op_t, tensor, axes=(op_in, axes))
    return np.moveaxis(res, [t - 1 - j for j in range(t)], axes)


def _apply_left_right(matrix: np.ndarray, n: int, op: np.ndarray, axes: list[int]) -> np.ndarray:
    t = len(axes)
    tensor = matrix.reshape((2,) * (2 * n))
    op_t = op.reshape((2,) * (2 * t))
    tensor = _contract(tensor, op_t, t, axes)
    tensor = _contract(tensor, op_t.conj(), t, [n + a for a in axes])
    return tensor.reshape(matrix.shape)


SLICE_MAX_QUBITS = 2
_SPARSE_TOL = 1e-14


def _sliced_terms(sup: np.ndarray) -> tuple:
    """Nonzero entries of ``S[a, c, b, d]`` grouped by output block ``(a, c)``."""
    scale = np.abs(sup).max()
    d = sup.shape[0]
    terms = []
    for a in range(d):
        for c in range(d):
            src = tuple((b, e, complex(sup[a, c, b, e])) for b in range(d) for e in range(d)
                        if abs(sup[a, c, b, e]) > _SPARSE_TOL * scale)
            if src:
                terms.append((a, c, src))
    return tuple(terms)


@functools.lru_cache(maxsize=256)
def _unitary_terms(key: bytes, dim: int) -> tuple:
    u = np.frombuffer(key, dtype=complex).reshape(dim, dim)
    terms = _sliced_terms(np.einsum("ab,cd->acbd", u, u.conj()))
    return terms, _kernels.pack_terms(terms, dim)


def _apply_local(matrix: np.ndarray, n: int, axes: list[int], terms: tuple, packed) -> np.ndarray:
    if _kernels.AVAILABLE:
        return _kernels.apply_sparse(matrix, n, [n - 1 - a for a in axes], packed)
    return _apply_sliced(matrix, n, axes, terms)


def _collapsed(n: int, axes: list[int]) -> tuple[tuple[int, ...], list[int]]:
    """Shape merging non-target axes of one index, and the dims holding each target."""
    shape, pos = [], {}
    prev = 0
    for ax in sorted(axes):
        shape.append(1 << (ax - prev))
        pos[ax] = len(shape)
        shape.append(2)
        prev = ax + 1
    shape.append(1 << (n - prev))
    return tuple(shape), [pos[ax] for ax in axes]


def _apply_sliced(matrix: np.ndarray, n: int, axes: list[int], terms: tuple) -> np.ndarray:
    """Apply a sparse local superoperator block by block on views of the density matrix."""
    half, dims = _collapsed(n, axes)
    t = matrix.reshape(half + half)
    out = np.zeros_like(t)
    m = len(half)

    def block(arr, a, c):
        idx: list = [slice(None)] * (2 * m)
        for j, dim in enumerate(dims):
            idx[dim] = (a >> j) & 1
            idx[m + dim] = (c >> j) & 1
        return arr[tuple(idx)]

    for a, c, src in terms:
        view = block(out, a, c)
        for b, e, coef in src:
            if coef == 1:
                view += block(t, b, e)
            else:
                view += coef * block(t, b, e)
    return out.reshape(matrix.shape)


def _is_diagonal(op: np.ndarray) -> bool:
    return not np.any(op - np.diag(np.diag(op)))


def _diag_tensor(diag: np.ndarray, axes: list[int], ndim: int) -> np.ndarray:
    t = len(axes)
    d_t = diag.reshape((2,) * t)  # axis t-1-j <-> operator qubit j
    order = sorted(range(t), key=lambda j: axes[j])
    d_t = d_t.transpose([t - 1 - j for j in order])
    shape = [1] * ndim
    for j in order:
        shape[axes[j]] = 2
    return d_t.reshape(shape)


def apply_matrix(state: DensityState, op: np.ndarray, targets: Sequence[int]) -> DensityState:
    """rho -> A rho A^dagger for an arbitrary local matrix ``A``."""
    op = np.asarray(op, dtype=complex)
    axes = _ket_axes(state.qubits, targets)
    if op.shape != (1 << len(axes),) * 2:
        raise ValueError(f"operator shape {op.shape} does not match {len(axes)} targets")
    n = state.n_qubits
    if _is_diagonal(op):
        tensor = state.matrix.reshape((2,) * (2 * n))
        d = np.diag(op)
        tensor = tensor * _diag_tensor(d, axes, 2 * n) * _diag_tensor(d.conj(), [n + a for a in axes], 2 * n)
        return DensityState(tensor.reshape(state.matrix.shape), state.qubits)
    if len(axes) <= SLICE_MAX_QUBITS:
        terms, packed = _unitary_terms(np.ascontiguousarray(op).tobytes(), op.shape[0])
        return DensityState(_apply_local(state.matrix, n, axes, terms, packed), state.qubits)
    return DensityState(_apply_left_right(state.matrix, n, op, axes), state.qubits)


def embed(op: DenseOperator | np.ndarray, targets: Sequence[int], n_total: int) -> DenseOperator:
    """Full ``2^n_total`` matrix acting as ``op`` on ``targets`` and identity elsewhere."""
    kind = op.kind if isinstance(op, DenseOperator) else "general"
    mat = op.matrix if isinstance(op, DenseOperator) else np.asarray(op, dtype=complex)
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {targets}")
    if any(not 0 <= t < n_total for t in targets):
        raise ValueError(f"targets {targets} out of range for {n_total} qubits")
    if mat.shape != (1 << len(targets),) * 2:
        raise ValueError(f"operator acts on {mat.shape[0].bit_length() - 1} qubits, got {len(targets)} targets")
    eye = np.eye(1 << n_total, dtype=complex).reshape((2,) * (2 * n_total))
    axes = [n_total - 1 - t for t in targets]
    out = _contract(eye, mat.reshape((2,) * (2 * len(targets))), len(targets), axes)
    return DenseOperator(out.reshape(1 << n_total, 1 << n_total), kind)


def apply_unitary(state: DensityState, op: DenseOperator, targets: Sequence[int]) -> DensityState:
    if op.kind != "unitary":
        raise ValueError(f"apply_unitary needs a unitary operator, got kind {op.kind!r}")
    return apply_matrix(state, op.matrix, targets)


def apply_channel(state: DensityState, ch: KrausChannel, targets: Sequence[int]) -> DensityState:
    """rho -> sum_k K rho K^dagger via the channel's superoperator."""
    axes = _ket_axes(state.qubits, targets)
    t = len(axes)
    if t != ch.n_qubits:
        raise ValueError(f"{ch.n_qubits}-qubit channel applied to {t} targets")
    n = state.n_qubits
    if t <= SLICE_MAX_QUBITS:
        terms, packed = ch.sliced_terms()
        return DensityState(_apply_local(state.matrix, n, axes, terms, packed), state.qubits)
    tensor = state.matrix.reshape((2,) * (2 * n))
    sup = ch.superoperator().reshape((2,) * (4 * t))
    # sup axes: out ket (t), out bra (t), in ket (t), in bra (t); each block high bit first
    in_axes = [3 * t - 1 - j for j in range(t)] + [4 * t - 1 - j for j in range(t)]
    rho_axes = axes + [n + a for a in axes]
    res = np.tensordot(sup, tensor, axes=(in_axes, rho_axes))
    out_pos = [t - 1 - j for j in range(t)] + [2 * t - 1 - j for j in range(t)]
    res = np.moveaxis(res, out_pos, rho_axes)
    return DensityState(res.reshape(state.matrix.shape), state.qubits)


def measure_effect(state: DensityState, projector: DenseOperator,
                   targets: Sequence[int]) -> tuple[DensityState, DensityState]:
    """Split into the unnormalized branches ``P rho P`` and ``(I-P) rho (I-P)``."""
    if projector.kind != "projector":
        raise ValueError(f"measure_effect needs a projector, got kind {projector.kind!r}")
    axes = _ket_axes(state.qubits, targets)
    n = state.n_qubits
    t = len(axes)
    if projector.matrix.shape != (1 << t,) * 2:
        raise ValueError("projector dimension does not match targets")
    layout = (2,) * (2 * n)
    p_t = projector.matrix.reshape((2,) * (2 * t))
    p_rho = _contract(state.matrix.reshape(layout), p_t, t, axes)
    p_rho_p = _contract(p_rho, p_t.conj(), t, [n + a for a in axes]).reshape(state.matrix.shape)
    p_rho = p_rho.reshape(state.matrix.shape)
    rest = state.matrix - p_rho - p_rho.conj().T + p_rho_p
    return DensityState(p_rho_p, state.qubits), DensityState(rest, state.qubits)


def partial_trace(state: DensityState, discard: Sequence[int]) -> DensityState:
    discard = list(discard)
    if not discard:
        return state
    axes = _ket_axes(state.qubits, discard)
    n = state.n_qubits
    if len(axes) == n:
        raise ValueError("cannot discard every qubit")
    letters = string.ascii_letters
    ket = [letters[i] for i in range(n)]
    bra = [letters[n + i] for i in range(n)]
    for a in axes:
        bra[a] = ket[a]
    keep = [a for a in range(n) if a not in axes]
    out = "".join(ket[a] for a in keep) + "".join(bra[a] for a in keep)
    res = np.einsum("".join(ket) + "".join(bra) + "->" + out, state.matrix.reshape((2,) * (2 * n)))
    m = len(keep)
    qubits = tuple(q for q in state.qubits if q not in set(discard))
    return DensityState(res.reshape(1 << m, 1 << m), qubits)


def add_qubit(state: DensityState, label: int, rho1: np.ndarray) -> DensityState:
    """Tensor a fresh single-qubit state onto ``state`` as its most significant qubit."""
    if label in state.qubits:
        raise ValueError(f"qubit {label} already present")
    return DensityState(np.kron(np.asarray(rho1, dtype=complex), state.matrix), state.qubits + (label,))


def measure_qubit(state: DensityState, label: int, basis: str = "Z") -> tuple[DensityState, DensityState]:
    """Measure one qubit and discard it; returns unnormalized data branches for outcomes 0 and 1.

    In the X basis outcome 0 is ``|+>`` and outcome 1 is ``|->``.
    """
    (a,) = _ket_axes(state.qubits, [label])
    n = state.n_qubits
    t = state.matrix.reshape((2,) * (2 * n))
    block = [[np.take(np.take(t, i, axis=a), j, axis=n - 1 + a) for j in (0, 1)] for i in (0, 1)]
    if basis == "Z":
        b0, b1 = block[0][0], block[1][1]
    elif basis == "X":
        diag = block[0][0] + block[1][1]
        off = block[0][1] + block[1][0]
        b0, b1 = (diag + off) / 2, (diag - off) / 2
    else:
        raise ValueError(f"unknown measurement basis {basis!r}")
    m = n - 1
    qubits = tuple(q for q in state.qubits if q != label)
    return (DensityState(b0.reshape(1 << m, 1 << m), qubits),
            DensityState(b1.reshape(1 << m, 1 << m), qubits))


def fidelity_pure(state: DensityState, target: np.ndarray) -> float:
    psi = np.asarray(target, dtype=complex).reshape(-1)
    return float(np.real(psi.conj() @ state.matrix @ psi))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.asarray(a) - np.asarray(b)
    return float(0.5 * np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())


def random_pure_state(n: int, rng: np.random.Generator) -> np.ndarray:
    vec = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return vec / np.linalg.norm(vec)


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    d = 1 << n
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real

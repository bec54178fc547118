"""Unitary matrices for IR gates, in the local convention of :mod:`qecgsm.densop`."""
from __future__ import annotations

import functools

import numpy as np

from ..pauli import PauliString
from .ir import Instruction

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_FIXED = {
    "H": _H,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "S": np.diag([1, 1j]),
    "SDG": np.diag([1, -1j]),
}


def _mcz(k: int) -> np.ndarray:
    d = np.ones(1 << k, dtype=complex)
    d[-1] = -1
    return np.diag(d)


def _cx() -> np.ndarray:
    # control is operator qubit 0 (low bit), target is qubit 1
    m = np.zeros((4, 4), dtype=complex)
    for idx in range(4):
        c, t = idx & 1, idx >> 1
        m[c | ((t ^ c) << 1), idx] = 1
    return m


def pauli_rotation(label: str, theta: float) -> np.ndarray:
    """``exp(i theta P)`` for an unsigned label ``P``."""
    p = PauliString.from_label(label).to_matrix()
    return np.cos(theta) * np.eye(p.shape[0]) + 1j * np.sin(theta) * p


def controlled(u: np.ndarray) -> np.ndarray:
    """Controlled-``u`` with the control as operator qubit 0."""
    d = u.shape[0]
    out = np.zeros((2 * d, 2 * d), dtype=complex)
    p0 = np.diag([1, 0]).astype(complex)
    p1 = np.diag([0, 1]).astype(complex)
    return out + np.kron(np.eye(d), p0) + np.kron(u, p1)


@functools.lru_cache(maxsize=512)
def _matrix(name: str, n: int, params: tuple[float, ...], pauli: str) -> np.ndarray:
    if name in _FIXED:
        return _FIXED[name]
    if name == "PHASE":
        return np.diag([1, np.exp(1j * params[0])])
    if name == "CX":
        return _cx()
    if name in ("CZ", "CCZ", "MCZ"):
        return _mcz(n)
    if name == "PAULIROT":
        return pauli_rotation(pauli, params[0])
    if name == "CPAULIROT":
        return controlled(pauli_rotation(pauli, params[0]))
    raise ValueError(f"no matrix for gate {name!r}")


def gate_matrix(inst: Instruction) -> np.ndarray:
    m = _matrix(inst.name, len(inst.targets), inst.params, inst.pauli)
    m.setflags(write=False)
    return m


def circuit_unitary(circuit, qubits: list[int] | None = None) -> np.ndarray:
    """Total unitary of a gate-only circuit over ``qubits`` (default: all)."""
    from ..densop import embed

    qubits = list(range(circuit.n_qubits)) if qubits is None else list(qubits)
    pos = {q: i for i, q in enumerate(qubits)}
    u = np.eye(1 << len(qubits), dtype=complex)
    for inst in circuit.instructions():
        if inst.kind == "idle":
            continue
        if inst.kind != "gate":
            raise ValueError(f"circuit_unitary cannot handle {inst.kind} instructions")
        u = embed(gate_matrix(inst), [pos[t] for t in inst.targets], len(qubits)).matrix @ u
    return u

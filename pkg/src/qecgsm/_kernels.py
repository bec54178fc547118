"""Compiled kernel for sparse local superoperators on a dense density matrix.

``packed`` holds the nonzero entries of a ``d^2 x d^2`` superoperator grouped by
output block; :func:`apply_sparse` visits every block of the full matrix once.
"""
from __future__ import annotations

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None


def pack_terms(terms: tuple, dim: int):
    """Flatten ``((a, c, ((b, e, coef), ...)), ...)`` into kernel arrays covering every output block."""
    by_out = {(a, c): src for a, c, src in terms}
    out_a, out_c, start, in_b, in_e, coef = [], [], [0], [], [], []
    for a in range(dim):
        for c in range(dim):
            out_a.append(a)
            out_c.append(c)
            for b, e, v in by_out.get((a, c), ()):
                in_b.append(b)
                in_e.append(e)
                coef.append(v)
            start.append(len(coef))
    ints = lambda xs: np.asarray(xs, dtype=np.int64)
    return ints(out_a), ints(out_c), ints(start), ints(in_b), ints(in_e), np.asarray(coef, dtype=np.complex128)


def _offsets(bits: np.ndarray) -> np.ndarray:
    d = 1 << len(bits)
    off = np.zeros(d, dtype=np.int64)
    for a in range(d):
        for j, bit in enumerate(bits):
            if (a >> j) & 1:
                off[a] |= 1 << int(bit)
    return off


def _apply_sparse_py(rho, off, rest, out_a, out_c, start, in_b, in_e, coef, out):
    # reference loop with the same semantics as the compiled kernel (used without numba)
    for r0 in rest:
        for k in range(len(out_a)):
            row = out[r0 + off[out_a[k]]]
            col = off[out_c[k]]
            s0, s1 = start[k], start[k + 1]
            if s0 == s1:
                for c0 in rest:
                    row[c0 + col] = 0
                continue
            src = rho[r0 + off[in_b[s0]]]
            cin = off[in_e[s0]]
            v = coef[s0]
            for c0 in rest:
                row[c0 + col] = v * src[c0 + cin]
            for s in range(s0 + 1, s1):
                src = rho[r0 + off[in_b[s]]]
                cin = off[in_e[s]]
                v = coef[s]
                for c0 in rest:
                    row[c0 + col] += v * src[c0 + cin]


if numba is not None:
    _kernel = numba.njit(cache=True, nogil=True)(_apply_sparse_py)
else:  # pragma: no cover
    _kernel = _apply_sparse_py

AVAILABLE = numba is not None


def _rest_indices(n: int, bits: np.ndarray) -> np.ndarray:
    mask = 0
    for b in bits:
        mask |= 1 << int(b)
    idx = np.arange(1 << n, dtype=np.int64)
    return idx[(idx & mask) == 0]


def apply_sparse(rho: np.ndarray, n: int, bits, packed) -> np.ndarray:
    """``rho' = S(rho)`` where the local superoperator acts on index bits ``bits`` (operator qubit j = bits[j])."""
    bits = np.asarray(bits, dtype=np.int64)
    out = np.empty_like(rho)
    _kernel(rho, _offsets(bits), _rest_indices(n, bits), *packed, out)
    return out

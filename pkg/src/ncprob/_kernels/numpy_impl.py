"""Vectorized (pure numpy) implementations of the two hot kernels.

* ``weighted_kpi_sum`` — accumulate sum_pi w(pi) * K_pi over a batch of
  nesting-encoded partitions, producing the dense order-n moment contribution
  on all matrix-unit tuples at once.  Partial values during the left-to-right
  scan are tensors with axes [row, slot_1, ..., slot_m, col]; a slot axis is a
  matrix-unit index p*d+q.  Appending an interleaved argument adds a slot
  axis; closing a block contracts its argument slots into a cumulant tensor.

* ``realized_moment_maps`` — moment tensors of a finite matrix model
  E(A u_1 A u_2 ... A), batched over all unit tuples by prefix products.
"""

import numpy as np


def basis_lifts(d: int, k: int) -> np.ndarray:
    """E_{pq} (x) 1_k for all d*d units, stacked along axis 0."""
    lifts = np.zeros((d * d, d * k, d * k), dtype=np.complex128)
    eye = np.eye(k)
    for p in range(d):
        for q in range(d):
            lifts[p * d + q, p * k:(p + 1) * k, q * k:(q + 1) * k] = eye
    return lifts


def _unit_append(d: int) -> np.ndarray:
    """U[c, t, k] = (E_t)[c, k]; right-multiplying by E_t adds a slot axis."""
    u = np.zeros((d, d * d, d), dtype=np.complex128)
    for p in range(d):
        for q in range(d):
            u[p, p * d + q, q] = 1.0
    return u


def _close(cum: np.ndarray, args, d: int) -> np.ndarray:
    """Cumulant applied to slot-carrying tensor arguments (first slot first)."""
    x = cum.reshape((d, d) + cum.shape[1:])
    for a in args:
        a_fused = np.moveaxis(a, -1, 1).reshape((d * d,) + a.shape[1:-1])
        x = np.tensordot(x, a_fused, axes=([2], [0]))
    return np.moveaxis(x, 1, -1)


def _kpi_tensor(first, last, sizes, cums, d, u):
    n = first.shape[0]
    eye = np.eye(d, dtype=np.complex128)
    stack = [[None, eye]]            # sentinel frame: [args, cur]
    for j in range(n):
        if first[j]:
            stack.append([[], eye])
        else:
            f = stack[-1]
            f[0].append(f[1])
            f[1] = eye
        if last[j]:
            args, _ = stack.pop()
            v = _close(cums[sizes[j] - 1], args, d)
            top = stack[-1]
            top[1] = np.tensordot(top[1], v, axes=([-1], [0]))
        if j < n - 1:
            top = stack[-1]
            top[1] = np.tensordot(top[1], u, axes=([-1], [0]))
    val = stack[0][1]                # axes [row, slot_1..slot_{n-1}, col]
    return np.moveaxis(val, -1, 1).reshape((d * d,) * n)


def weighted_kpi_sum(first, last, sizes, weights, cums, d):
    """sum_p weights[p] * K_{pi_p} as a dense (d^2,)*n tensor.

    first/last/sizes: (P, n) int arrays; cums: sequence of cumulant tensors,
    cums[s-1] of shape (d^2,)*s.
    """
    P, n = first.shape
    out = np.zeros((d * d,) * n, dtype=np.complex128)
    u = _unit_append(d)
    for p in range(P):
        if sizes[p, 0] == n:         # single-block partition: K = c_n itself
            out += weights[p] * cums[n - 1]
            continue
        out += weights[p] * _kpi_tensor(first[p], last[p], sizes[p], cums, d, u)
    return out


def _expect(words, state_kind, state_vec, d, k):
    """id_d (x) phi on a stack of (d*k) x (d*k) words."""
    blocks = words.reshape(words.shape[:-2] + (d, k, d, k))
    blocks = np.moveaxis(blocks, -3, -2)
    if state_kind == 0:              # normalized trace on the k factor
        return np.trace(blocks, axis1=-2, axis2=-1) / k
    return np.einsum("...ij,i,j->...", blocks, state_vec.conj(), state_vec)


def realized_moment_maps(A, state_kind, state_vec, N, d, k):
    """Maps m_1..m_N of the model (A, id (x) phi), each of shape (d^2,)*n."""
    d2, dk = d * d, d * k
    lifts_a = basis_lifts(d, k) @ A
    maps = []
    words = np.asarray(A, dtype=np.complex128)[np.newaxis]
    for n in range(1, N + 1):
        vals = _expect(words, state_kind, state_vec, d, k)
        vals = vals.reshape((d2,) * (n - 1) + (d, d))
        maps.append(np.ascontiguousarray(
            np.moveaxis(vals, (-2, -1), (0, 1)).reshape((d2,) * n)))
        if n < N:
            words = (words[:, np.newaxis] @ lifts_a[np.newaxis]).reshape(
                -1, dk, dk)
    return maps

"""numba twins of the hot kernels: one basis tuple per thread, small dense
matrix products unrolled by explicit loops.  Same call signatures and results
as numpy_impl; selected through NCPROB_BACKEND (see package __init__)."""

import numpy as np
from numba import njit, prange
from numba.typed import List as TypedList

from .numpy_impl import basis_lifts


@njit(cache=True)
def _eval_cumulant(cum_flat, args, base, s, d, w0, w1, val):
    # cum_flat: (d2, d2**(s-1)) row-major; args[base+r] is the r-th argument;
    # w0/w1 are caller-owned scratch rows wide enough for every cumulant
    d2 = d * d
    width = cum_flat.shape[1]
    for o in range(d2):
        for c in range(width):
            w0[o, c] = cum_flat[o, c]
    flip = False
    for r in range(s - 1):
        nw = width // d2
        src = w1 if flip else w0
        dst = w0 if flip else w1
        for o in range(d2):
            for c in range(nw):
                dst[o, c] = 0.0
        for t in range(d2):
            av = args[base + r, t // d, t % d]
            if av != 0:
                off = t * nw
                for o in range(d2):
                    for c in range(nw):
                        dst[o, c] += src[o, off + c] * av
        flip = not flip
        width = nw
    final = w1 if flip else w0
    for i in range(d):
        for j in range(d):
            val[i, j] = final[i * d + j, 0]


@njit(parallel=True, cache=True)
def _kpi_sum_kernel(first, last, sizes, weights, cum_list, d, n, out):
    d2 = d * d
    B = out.shape[0]
    P = first.shape[0]
    strides = np.empty(max(n - 1, 1), dtype=np.int64)
    acc_s = 1
    for j in range(n - 2, -1, -1):
        strides[j] = acc_s
        acc_s *= d2
    scratch_w = d2 ** max(n - 1, 1)
    for b in prange(B):
        ts = np.empty(max(n - 1, 1), dtype=np.int64)
        for j in range(n - 1):
            ts[j] = (b // strides[j]) % d2
        acc = np.empty((n + 1, d, d), dtype=np.complex128)
        args = np.empty((n, d, d), dtype=np.complex128)
        base = np.zeros(n + 2, dtype=np.int64)
        tmp = np.empty((d, d), dtype=np.complex128)
        w0 = np.empty((d2, scratch_w), dtype=np.complex128)
        w1 = np.empty((d2, scratch_w), dtype=np.complex128)
        val = np.empty((d, d), dtype=np.complex128)
        for p in range(P):
            depth = 0
            for r in range(d):
                for c in range(d):
                    acc[0, r, c] = 1.0 if r == c else 0.0
            nargs = 0
            for j in range(n):
                if first[p, j]:
                    depth += 1
                    base[depth] = nargs
                    for r in range(d):
                        for c in range(d):
                            acc[depth, r, c] = 1.0 if r == c else 0.0
                else:
                    for r in range(d):
                        for c in range(d):
                            args[nargs, r, c] = acc[depth, r, c]
                            acc[depth, r, c] = 1.0 if r == c else 0.0
                    nargs += 1
                if last[p, j]:
                    s = sizes[p, j]
                    _eval_cumulant(cum_list[s - 1], args,
                                   base[depth], s, d, w0, w1, val)
                    nargs = base[depth]
                    depth -= 1
                    for r in range(d):
                        for c in range(d):
                            z = 0.0 + 0.0j
                            for m in range(d):
                                z += acc[depth, r, m] * val[m, c]
                            tmp[r, c] = z
                    acc[depth] = tmp
                if j < n - 1:
                    t = ts[j]
                    pp = t // d
                    qq = t % d
                    for r in range(d):
                        tmp[r, qq] = acc[depth, r, pp]
                    for r in range(d):
                        for c in range(d):
                            acc[depth, r, c] = tmp[r, c] if c == qq else 0.0
            w = weights[p]
            for r in range(d):
                for c in range(d):
                    out[b, r * d + c] += w * acc[0, r, c]


def weighted_kpi_sum(first, last, sizes, weights, cums, d):
    n = first.shape[1]
    d2 = d * d
    cum_list = TypedList()
    for s in range(1, n + 1):
        cum_list.append(np.ascontiguousarray(
            cums[s - 1].reshape(d2, -1), dtype=np.complex128))
    out = np.zeros((d2 ** (n - 1), d2), dtype=np.complex128)
    _kpi_sum_kernel(np.ascontiguousarray(first, dtype=np.int8),
                    np.ascontiguousarray(last, dtype=np.int8),
                    np.ascontiguousarray(sizes, dtype=np.int64),
                    np.ascontiguousarray(weights, dtype=np.float64),
                    cum_list, d, n, out)
    return np.ascontiguousarray(
        np.moveaxis(out.reshape((d2,) * n), -1, 0))


@njit(parallel=True, cache=True)
def _word_maps_kernel(A, lifts_a, n, d, k, state_kind, v, out):
    d2 = d * d
    dk = d * k
    B = out.shape[0]
    strides = np.empty(max(n - 1, 1), dtype=np.int64)
    acc_s = 1
    for j in range(n - 2, -1, -1):
        strides[j] = acc_s
        acc_s *= d2
    for b in prange(B):
        ts = np.empty(max(n - 1, 1), dtype=np.int64)
        for j in range(n - 1):
            ts[j] = (b // strides[j]) % d2
        w = A.copy()
        nxt = np.empty((dk, dk), dtype=np.complex128)
        for j in range(n - 1):
            L = lifts_a[ts[j]]
            for r in range(dk):
                for c in range(dk):
                    z = 0.0 + 0.0j
                    for m in range(dk):
                        z += w[r, m] * L[m, c]
                    nxt[r, c] = z
            w, nxt = nxt, w
        for p in range(d):
            for q in range(d):
                z = 0.0 + 0.0j
                if state_kind == 0:
                    for i in range(k):
                        z += w[p * k + i, q * k + i]
                    z /= k
                else:
                    for i in range(k):
                        for jj in range(k):
                            z += np.conj(v[i]) * w[p * k + i, q * k + jj] * v[jj]
                out[b, p * d + q] = z


def realized_moment_maps(A, state_kind, state_vec, N, d, k):
    d2 = d * d
    a = np.ascontiguousarray(A, dtype=np.complex128)
    lifts_a = np.ascontiguousarray(basis_lifts(d, k) @ a)
    v = (np.zeros(k, dtype=np.complex128) if state_vec is None
         else np.ascontiguousarray(state_vec, dtype=np.complex128))
    maps = []
    for n in range(1, N + 1):
        out = np.empty((d2 ** (n - 1), d2), dtype=np.complex128)
        _word_maps_kernel(a, lifts_a, n, d, k, state_kind, v, out)
        maps.append(np.ascontiguousarray(
            np.moveaxis(out.reshape((d2,) * n), -1, 0)))
    return maps

"""Truncated non-commutative power series over M_d and their calculus:
generating series of a moment tensor, ordered composition (= monotone
convolution at the level of laws), reciprocal-variable F-series, its
compositional inverse, and the semigroup evolution residual.

A degree-M coefficient is an ordered M-linear map stored as a dense tensor of
shape (d^2,)*(M+1): axis 0 the flattened output, axes 1..M the flattened
matrix-unit index of each argument in order.  An optional degree-0 constant
(d x d matrix) covers the shifted series living at the reciprocal variable.
"""

from __future__ import annotations

import itertools
import string
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cumulants import (MONOTONE, _encode_noncrossing, moments_to_cumulants)
from .dist import MomentTensor, eval_multilinear
from .errors import (DimensionMismatchError, UnsupportedStructureError,
                     ValidationFailure)
from .matalg import as_cmatrix

_SLOT_LETTERS = string.ascii_uppercase + string.ascii_lowercase.replace(
    "i", "").replace("j", "").replace("m", "")


@dataclass(frozen=True)
class NCSeries:
    """coeffs[M-1] is the degree-M coefficient; truncation = len(coeffs)."""
    d: int
    coeffs: tuple[np.ndarray, ...]
    const: np.ndarray | None = None

    def __post_init__(self):
        d2 = self.d * self.d
        fixed = []
        for m, t in enumerate(self.coeffs, start=1):
            t = np.ascontiguousarray(t, dtype=np.complex128)
            if t.shape != (d2,) * (m + 1):
                raise DimensionMismatchError(
                    f"degree-{m} coefficient must have shape {(d2,) * (m + 1)}")
            fixed.append(t)
        object.__setattr__(self, "coeffs", tuple(fixed))
        if self.const is not None:
            object.__setattr__(self, "const", as_cmatrix(self.const))

    @property
    def max_degree(self) -> int:
        return len(self.coeffs)

    def coeff(self, m: int) -> np.ndarray:
        return self.coeffs[m - 1]

    def eval_diag(self, b) -> np.ndarray:
        """sum_M C_M(b, ..., b) (+ constant); truncation, not analytics."""
        b = as_cmatrix(b)
        acc = np.zeros((self.d, self.d), dtype=np.complex128)
        if self.const is not None:
            acc += self.const
        for m, t in enumerate(self.coeffs, start=1):
            acc += eval_multilinear(t, [b] * m)
        return acc

    def scaled(self, factor: complex) -> "NCSeries":
        return NCSeries(
            self.d, tuple(factor * t for t in self.coeffs),
            None if self.const is None else factor * self.const)

    def plus(self, other: "NCSeries") -> "NCSeries":
        if (self.d, self.max_degree) != (other.d, other.max_degree):
            raise DimensionMismatchError("series shapes differ")
        cs = None
        if self.const is not None or other.const is not None:
            z = np.zeros((self.d, self.d))
            cs = ((self.const if self.const is not None else z)
                  + (other.const if other.const is not None else z))
        return NCSeries(self.d, tuple(a + b for a, b in
                                      zip(self.coeffs, other.coeffs)), cs)

    def distance(self, other: "NCSeries") -> float:
        worst = max(float(np.max(np.abs(a - b)))
                    for a, b in zip(self.coeffs, other.coeffs))
        if self.const is not None or other.const is not None:
            z = np.zeros((self.d, self.d))
            ca = self.const if self.const is not None else z
            cb = other.const if other.const is not None else z
            worst = max(worst, float(np.max(np.abs(ca - cb))))
        return worst


def _unit_left(d: int) -> np.ndarray:
    """U[c, t, k] = (E_t)[c, k]; wires a matrix-unit argument into a product."""
    u = np.zeros((d, d * d, d), dtype=np.complex128)
    for p in range(d):
        for q in range(d):
            u[p, p * d + q, q] = 1.0
    return u


def lift_map(m_map: np.ndarray, d: int) -> np.ndarray:
    """(b_1..b_{n-1}) -> m tensor becomes (b_0..b_n) -> b_0 m(...) b_n."""
    u = _unit_left(d)
    x = m_map.reshape((d, d) + m_map.shape[1:])
    out = np.einsum("ipa,ab...,bqj->ijp...q", u, x, u, optimize=True)
    return np.ascontiguousarray(
        out.reshape((d * d,) + m_map.shape + (d * d,)))


def unlift_map(coeff: np.ndarray, d: int) -> np.ndarray:
    """Plug identities into the first and last slot of a degree-M coefficient."""
    eye_flat = np.eye(d, dtype=np.complex128).reshape(-1)
    x = np.tensordot(coeff, eye_flat, axes=([1], [0]))
    return np.tensordot(x, eye_flat, axes=([-1], [0]))


def _concat(a: np.ndarray, b: np.ndarray, d: int) -> np.ndarray:
    """Coefficient of the pointwise product: (A.B)(args_a ++ args_b)."""
    ar = a.reshape((d, d) + a.shape[1:])
    br = b.reshape((d, d) + b.shape[1:])
    la = _SLOT_LETTERS[:ar.ndim - 2]
    lb = _SLOT_LETTERS[ar.ndim - 2:ar.ndim - 2 + br.ndim - 2]
    out = np.einsum(f"im{la},mj{lb}->ij{la}{lb}", ar, br, optimize=True)
    return out.reshape((d * d,) + a.shape[1:] + b.shape[1:])


def _h_from_maps(maps, d: int) -> NCSeries:
    """C_1 = id, C_{n+1} = lifted order-n map."""
    coeffs = [np.eye(d * d, dtype=np.complex128)]
    for t in maps:
        coeffs.append(lift_map(t, d))
    return NCSeries(d, tuple(coeffs))


def h_series(m: MomentTensor) -> NCSeries:
    """Moment generating series; degree M coefficient is mu[b_0 X ... X b_{M-1}]."""
    return _h_from_maps(m.maps, m.d)


def series_to_moments(s: NCSeries) -> MomentTensor:
    """Inverse of h_series (discards the degree-1 identity term)."""
    d = s.d
    if s.const is not None and np.max(np.abs(s.const)) > 1e-12:
        raise UnsupportedStructureError("series with constant term is not an "
                                        "H-series")
    maps = tuple(unlift_map(s.coeffs[m], d) for m in range(1, s.max_degree))
    return MomentTensor(d, s.max_degree - 1, maps)


def _splittings(total: int, parts: int):
    """Ordered splittings of `total` into `parts` positive integers."""
    for cuts in itertools.combinations(range(1, total), parts - 1):
        bounds = (0,) + cuts + (total,)
        yield tuple(bounds[i + 1] - bounds[i] for i in range(parts))


def compose(outer: NCSeries, inner: NCSeries) -> NCSeries:
    """Ordered substitution outer(inner(b)), truncated at the common degree."""
    if outer.d != inner.d:
        raise DimensionMismatchError("series dimensions differ")
    if inner.const is not None and np.max(np.abs(inner.const)) > 0:
        raise UnsupportedStructureError(
            "inner series must not carry a degree-0 term")
    d = outer.d
    d2 = d * d
    deg = min(outer.max_degree, inner.max_degree)
    out = []
    for m in range(1, deg + 1):
        acc = np.zeros((d2,) * (m + 1), dtype=np.complex128)
        for k1 in range(1, m + 1):
            oc = outer.coeffs[k1 - 1]
            for split in _splittings(m, k1):
                acc += _plug(oc, [inner.coeffs[mi - 1] for mi in split], d)
        out.append(acc)
    return NCSeries(d, tuple(out), outer.const)


def _plug(outer_c: np.ndarray, inners, d: int) -> np.ndarray:
    """Substitute inner coefficients into the slots of an outer coefficient."""
    letters = iter(string.ascii_letters)
    out_ax = next(letters)
    slot_ax = [next(letters) for _ in inners]
    specs = [out_ax + "".join(slot_ax)]
    out_spec = out_ax
    operands = [outer_c]
    for ax, t in zip(slot_ax, inners):
        args = "".join(next(letters) for _ in range(t.ndim - 1))
        specs.append(ax + args)
        out_spec += args
        operands.append(t)
    return np.einsum(",".join(specs) + "->" + out_spec, *operands,
                     optimize=True)


def monotone_convolve(m1: MomentTensor, m2: MomentTensor) -> MomentTensor:
    """Law of X_1 + X_2 with X_2 monotonically independent over X_1."""
    if (m1.d, m1.N) != (m2.d, m2.N):
        raise DimensionMismatchError("operands must share d and N")
    return series_to_moments(compose(h_series(m1), h_series(m2)))


# --- reciprocal-variable series -------------------------------------------------

def f_series(m: MomentTensor) -> NCSeries:
    """Shifted reciprocal series Psi with F(w^{-1}) = w^{-1} + Psi(w).

    Determined degree by degree from (1 + w.Psi(w)) H(w) = w; carries a
    degree-0 constant -m_1 and coefficients up to degree N-1.
    """
    d = m.d
    h = h_series(m)
    u = _unit_left(d)
    psi = []                      # psi[j] : degree-j piece, tensor (d2,)*(j+1)
    for deg in range(2, m.N + 2):
        r = -h.coeffs[deg - 1]
        for j in range(0, deg - 2):
            wpsi = _wrap_left(psi[j], u, d)          # degree j+1
            r = r - _concat(wpsi, h.coeffs[deg - j - 2], d)
        psi.append(unlift_map(r, d))
    return NCSeries(d, tuple(psi[1:]), psi[0].reshape(d, d))


def _wrap_left(t: np.ndarray, u: np.ndarray, d: int) -> np.ndarray:
    """Degree bump w . T(args): new first argument multiplied from the left."""
    x = t.reshape((d, d) + t.shape[1:])
    out = np.einsum("ipa,aj...->ijp...", u, x)
    return out.reshape((d * d, d * d) + t.shape[1:])


def _series_mult(a: NCSeries, b: NCSeries, deg: int) -> NCSeries:
    """Concatenation (pointwise) product truncated at `deg`; no constants."""
    d = a.d
    d2 = d * d
    out = [np.zeros((d2,) * (m + 1), dtype=np.complex128)
           for m in range(1, deg + 1)]
    for ma in range(1, min(a.max_degree, deg) + 1):
        for mb in range(1, min(b.max_degree, deg - ma) + 1):
            out[ma + mb - 1] += _concat(a.coeffs[ma - 1], b.coeffs[mb - 1], d)
    return NCSeries(d, tuple(out))


def _identity_series(d: int, deg: int) -> NCSeries:
    d2 = d * d
    coeffs = [np.eye(d2, dtype=np.complex128)]
    coeffs += [np.zeros((d2,) * (m + 1), dtype=np.complex128)
               for m in range(2, deg + 1)]
    return NCSeries(d, tuple(coeffs))


def voiculescu_series(m: MomentTensor) -> NCSeries:
    """Compositional inverse shift: V(w) = F^{<-1>}(w^{-1}) - w^{-1}.

    Degree-j coefficients coincide with the order-(j+1) free cumulants; the
    degree-0 constant is m_1.  Computed by the nilpotent fixed point
    V = -Psi(w - wVw + wVwVw - ...).
    """
    d = m.d
    psi = f_series(m)
    deg = psi.max_degree          # = N - 1
    if deg < 1:
        return NCSeries(d, (), -psi.const)
    v = psi.scaled(-1.0)
    wid = _identity_series(d, deg)
    u = _unit_left(d)
    for _ in range(deg + 1):
        # w~ = sum_r (-w.V)^r . w, truncated
        wv = _lift_const_series(v, u, d, deg)        # degree of w.V terms
        wtilde = wid
        power = wid
        for _ in range(deg):
            power = _series_mult(wv.scaled(-1.0), power, deg)
            wtilde = wtilde.plus(power)
        v = compose_with_const(psi, wtilde).scaled(-1.0)
    return v


def _lift_const_series(s: NCSeries, u, d: int, deg: int) -> NCSeries:
    """w . S(w): shifts every piece (including the constant) up one degree."""
    d2 = d * d
    out = [np.zeros((d2,) * (m + 1), dtype=np.complex128)
           for m in range(1, deg + 1)]
    if s.const is not None:
        out[0] += _wrap_left(s.const.reshape(d2), u, d)
    for m in range(1, min(s.max_degree, deg - 1) + 1):
        out[m] += _wrap_left(s.coeffs[m - 1], u, d)
    return NCSeries(d, tuple(out))


def compose_with_const(outer: NCSeries, inner: NCSeries) -> NCSeries:
    """compose() that lets the outer series carry a degree-0 constant."""
    body = compose(NCSeries(outer.d, outer.coeffs), inner)
    return NCSeries(outer.d, body.coeffs, outer.const)


# --- semigroup evolution check ---------------------------------------------------

def _block_count_groups(n: int, cums, d: int):
    """j -> sum over |pi| = j of weight(pi) K_pi, monotone lattice of [n]."""
    by_j = defaultdict(list)
    for p in MONOTONE.partitions(n):
        by_j[len(p)].append(p)
    out = {}
    for j, group in by_j.items():
        f, l, s = _encode_noncrossing(group, n)
        w = np.array([float(MONOTONE.weight(p)) for p in group])
        out[j] = _kernels.weighted_kpi_sum(f, l, s, w, cums, d)
    return out


def evolution_check(m: MomentTensor, t_grid) -> float:
    """Max coefficient residual of d/dt H_t = K(H_t) over the grid.

    H_t is the generating series of the t-th monotone convolution power; its
    coefficients are polynomials in t (t^j on the j-block partition sums), so
    the left side is differentiated exactly.  K is the cumulant series of m.
    """
    if m.N > 6:
        raise ValidationFailure("evolution check is capped at N = 6")
    d = m.d
    d2 = d * d
    if not len(t_grid):
        raise ValidationFailure("need at least one grid point")
    c = moments_to_cumulants(m, MONOTONE)
    groups = {n: _block_count_groups(n, c.maps[:n], d)
              for n in range(1, m.N + 1)}
    k_coeffs = [np.zeros((d2, d2), dtype=np.complex128)]
    k_coeffs += [lift_map(c.maps[n - 1], d) for n in range(1, m.N + 1)]
    k_series = NCSeries(d, tuple(k_coeffs))
    worst = 0.0
    for t in t_grid:
        t = float(t)
        maps_t, dmaps_t = [], []
        for n in range(1, m.N + 1):
            g = groups[n]
            maps_t.append(sum(t ** j * gj for j, gj in g.items()))
            dmaps_t.append(sum(j * t ** (j - 1) * gj for j, gj in g.items()))
        h_t = _h_from_maps(maps_t, d)
        rhs = compose(k_series, h_t)
        worst = max(worst, float(np.max(np.abs(rhs.coeffs[0]))))
        for n in range(1, m.N + 1):
            lhs_c = lift_map(dmaps_t[n - 1], d)
            worst = max(worst, float(
                np.max(np.abs(rhs.coeffs[n] - lhs_c))))
    return worst

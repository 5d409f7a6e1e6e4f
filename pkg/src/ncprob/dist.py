"""Matrix-valued distributions: truncated moment tensors, finite matrix
models realizing them, completely positive word maps, and the Gram-matrix
positivity certificate.

Storage convention for a multilinear map f : (M_d)^{n-1} -> M_d — a dense
complex array of shape (d*d,) * n.  Axis 0 is the output entry (i,j) flattened
row-major to i*d+j; axis s >= 1 is the matrix-unit index of input slot s, the
unit E_{pq} flattened to p*d+q.  Evaluation on general matrices contracts each
input axis with b.ravel().  Outer (bimodule) factors b_0, b_n are never
stored: mu[b_0 X b_1 ... X b_n] = b_0 @ m_n(b_1,...,b_{n-1}) @ b_n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels.numpy_impl import basis_lifts as _basis_lifts
from .errors import (DimensionMismatchError, SizeCapError, ValidationFailure)
from .matalg import as_cmatrix, is_hermitian, op_norm

MOMENT_ORDER_CAP = 8
MODEL_DIM_CAP = 64          # d*k ceiling for realized models
_BATCH_ELEMENT_CAP = 1 << 26


def eval_multilinear(t: np.ndarray, args) -> np.ndarray:
    """Apply a stored multilinear map to matrix arguments."""
    d2 = t.shape[0]
    d = int(round(d2 ** 0.5))
    if len(args) != t.ndim - 1:
        raise DimensionMismatchError(
            f"map takes {t.ndim - 1} arguments, got {len(args)}")
    out = t
    for b in args:
        b = as_cmatrix(b)
        if b.shape != (d, d):
            raise DimensionMismatchError("argument dimension mismatch")
        # always contract the first input axis; remaining slots shift left
        out = np.tensordot(out, b.ravel(), axes=([1], [0]))
    return out.reshape(d, d)


@dataclass(frozen=True)
class MomentTensor:
    """Truncated family m_1..m_N of bimodular moment maps over M_d."""
    d: int
    N: int
    maps: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.N < 1 or self.N > MOMENT_ORDER_CAP:
            raise SizeCapError(f"need 1 <= N <= {MOMENT_ORDER_CAP}")
        if len(self.maps) != self.N:
            raise DimensionMismatchError("need one map per order 1..N")
        d2 = self.d * self.d
        fixed = []
        for n, t in enumerate(self.maps, start=1):
            t = np.ascontiguousarray(t, dtype=np.complex128)
            if t.shape != (d2,) * n:
                raise DimensionMismatchError(
                    f"order-{n} map must have shape {(d2,) * n}, got {t.shape}")
            fixed.append(t)
        object.__setattr__(self, "maps", tuple(fixed))

    def map_for(self, n: int) -> np.ndarray:
        return self.maps[n - 1]

    def m(self, n: int, *args) -> np.ndarray:
        """m_n(b_1, ..., b_{n-1}) as a d x d matrix."""
        return eval_multilinear(self.maps[n - 1], args)

    def word(self, *args) -> np.ndarray:
        """mu[b_0 X b_1 ... X b_n] for n >= 0 (n = len(args) - 1)."""
        n = len(args) - 1
        b0 = as_cmatrix(args[0])
        if n == 0:
            return b0  # state-like: mu restricted to B is the identity
        return b0 @ self.m(n, *args[1:-1]) @ as_cmatrix(args[-1])

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(t))) for t in self.maps)

    def distance(self, other: "MomentTensor") -> float:
        """Max over orders and basis tuples of the operator-norm difference."""
        if (self.d, self.N) != (other.d, other.N):
            raise DimensionMismatchError("tensor shapes differ")
        d = self.d
        worst = 0.0
        for a, b in zip(self.maps, other.maps):
            diff = (a - b).reshape(d, d, -1)
            norms = np.linalg.svd(np.moveaxis(diff, 2, 0), compute_uv=False)
            worst = max(worst, float(norms[:, 0].max()))
        return worst


def hermitian_symmetry_defect(t: MomentTensor) -> float:
    """Max deviation of m_n(b_1..b_{n-1})* = m_n(b_{n-1}*..b_1*) on units.

    On the stored tensors this is: conjugate, swap output (i,j)->(j,i), swap
    each slot unit (p,q)->(q,p), and reverse the slot order.
    """
    d = t.d
    worst = 0.0
    swap = np.arange(d * d).reshape(d, d).T.ravel()  # E_{pq} -> E_{qp}
    for n, arr in enumerate(t.maps, start=1):
        star = arr.conj()
        for ax in range(n):
            star = np.take(star, swap, axis=ax)
        star = np.transpose(star, axes=[0] + list(range(n - 1, 0, -1)))
        worst = max(worst, float(np.max(np.abs(arr - star))))
    return worst


def _phi_apply(state, blocks):
    """Apply the M_k state to a (..., k, k) stack of blocks."""
    kind = state[0]
    if kind == "trace":
        return np.trace(blocks, axis1=-2, axis2=-1) / blocks.shape[-1]
    v = state[1]
    return np.einsum("...ij,i,j->...", blocks, v.conj(), v)


@dataclass(frozen=True)
class RealizedDistribution:
    """Finite model: Hermitian A on C^d (x) C^k, E = id_d (x) phi.

    The d factor is the slow index: the (p,q) block of size k x k holds the
    entries coupling basis vectors e_p, e_q of C^d.
    """
    d: int
    k: int
    A: np.ndarray
    state: tuple = ("trace",)

    def __post_init__(self):
        a = as_cmatrix(self.A)
        if a.shape[0] != self.d * self.k:
            raise DimensionMismatchError("A must be (d*k) x (d*k)")
        if self.d * self.k > MODEL_DIM_CAP:
            raise SizeCapError(f"d*k capped at {MODEL_DIM_CAP}")
        if not is_hermitian(a, tol=1e-10):
            raise ValidationFailure("A must be Hermitian")
        object.__setattr__(self, "A", a)
        if self.state[0] == "vector":
            v = np.asarray(self.state[1], dtype=np.complex128).ravel()
            if v.shape[0] != self.k:
                raise DimensionMismatchError("state vector must live in C^k")
            nrm = np.linalg.norm(v)
            if abs(nrm - 1.0) > 1e-8:
                raise ValidationFailure("state vector must be a unit vector")
            object.__setattr__(self, "state", ("vector", v / nrm))
        elif self.state[0] != "trace":
            raise ValidationFailure(f"unknown state kind {self.state[0]!r}")

    @property
    def bound(self) -> float:
        return op_norm(self.A)

    def expectation(self, w: np.ndarray) -> np.ndarray:
        """E = id_d (x) phi on a (d*k) x (d*k) matrix (or a stack of them)."""
        d, k = self.d, self.k
        w = np.asarray(w, dtype=np.complex128)
        blocks = w.reshape(w.shape[:-2] + (d, k, d, k))
        blocks = np.moveaxis(blocks, -3, -2)  # (..., d, d, k, k)
        return _phi_apply(self.state, blocks)


def moments_of(r: RealizedDistribution, N: int) -> MomentTensor:
    """Moment tensor of a realized model: m_n(units) = E(A u_1 A ... u_{n-1} A)."""
    if not 1 <= N <= MOMENT_ORDER_CAP:
        raise SizeCapError(f"need 1 <= N <= {MOMENT_ORDER_CAP}")
    d, k = r.d, r.k
    if (d * d) ** (N - 1) * (d * k) ** 2 > _BATCH_ELEMENT_CAP:
        raise SizeCapError("basis batch would exceed the memory cap")
    kind = 0 if r.state[0] == "trace" else 1
    vec = r.state[1] if kind == 1 else None
    maps = _kernels.realized_moment_maps(r.A, kind, vec, N, d, k)
    return MomentTensor(d, N, tuple(maps))


@dataclass(frozen=True)
class RealizedCP:
    """sigma(P) = V* pi(P) V with pi(b) = b (x) 1_k, pi(X) = A."""
    d: int
    k: int
    A: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        a = as_cmatrix(self.A)
        v = np.asarray(self.V, dtype=np.complex128)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if a.shape[0] != self.d * self.k or v.shape != (self.d * self.k, self.d):
            raise DimensionMismatchError(
                "need A of dim d*k and V of shape (d*k, d)")
        if not is_hermitian(a, tol=1e-10):
            raise ValidationFailure("A must be Hermitian")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "V", v)

    @property
    def bound(self) -> float:
        return op_norm(self.A)

    def scaled(self, factor: float) -> "RealizedCP":
        """sigma -> factor*sigma, keeping the realized form (V -> sqrt(f) V)."""
        if factor < 0:
            raise ValidationFailure("scale factor must be nonnegative")
        return RealizedCP(self.d, self.k, self.A, np.sqrt(factor) * self.V)


def sigma_eval(s: RealizedCP, word) -> np.ndarray:
    """sigma[b_1 X b_2 ... X b_m] = V* (b_1 x 1_k) A ... A (b_m x 1_k) V."""
    if len(word) == 0:
        raise ValidationFailure("sigma word needs at least one coefficient")
    acc = s.V.conj().T
    for i, b in enumerate(word):
        b = as_cmatrix(b)
        if b.shape != (s.d, s.d):
            raise DimensionMismatchError("word coefficients must be d x d")
        if i > 0:
            acc = acc @ s.A
        acc = acc @ np.kron(b, np.eye(s.k))
    return acc @ s.V


def sigma_basis_tensor(s: RealizedCP, n: int) -> np.ndarray:
    """Dense tensor of sigma on all unit words of length n-1 (cumulant c_n)."""
    if n < 2:
        raise ValidationFailure("sigma fills cumulants of order >= 2 only")
    d, k = s.d, s.k
    d2, dk = d * d, d * k
    if d2 ** (n - 1) * dk * dk > _BATCH_ELEMENT_CAP:
        raise SizeCapError("basis batch would exceed the memory cap")
    lifts = _basis_lifts(d, k)
    words = lifts.copy()
    for _ in range(n - 2):
        words = (words[:, np.newaxis] @ (s.A @ lifts)[np.newaxis]).reshape(
            -1, dk, dk)
    vals = np.einsum("ia,bij,jc->bac", s.V.conj(), words, s.V)
    return np.ascontiguousarray(
        np.moveaxis(vals.reshape((d2,) * (n - 1) + (d, d)), (-2, -1), (0, 1))
        .reshape((d2,) * n))


# --- Gram-matrix positivity certificate --------------------------------------

def _monomials(d: int, degree: int):
    """Unit-coefficient monomials u_0 X u_1 ... X u_deg, lexicographic."""
    out = []
    for deg in range(degree + 1):
        for combo in np.ndindex(*([d * d] * (deg + 1))):
            out.append(tuple(int(c) for c in combo))
    return out


def cp_check(t: MomentTensor, degree: int, tol: float = 1e-8):
    """PSD test of the block Gram matrix [mu(P_i* P_j)] over unit monomials.

    Returns (verdict, smallest eigenvalue).  Needs 2*degree <= N.
    """
    if degree < 0 or 2 * degree > t.N:
        raise ValidationFailure(
            f"cp_check needs 2*degree <= N, got degree={degree}, N={t.N}")
    d = t.d
    monos = _monomials(d, degree)
    m = len(monos)
    gram = np.zeros((m * d, m * d), dtype=np.complex128)
    for i, pi in enumerate(monos):
        a = len(pi) - 1
        ua = pi[-1]
        pua, qua = divmod(ua, d)
        pu0, qu0 = divmod(pi[0], d)
        # slots contributed by P_i*: units reversed and starred
        left_slots = tuple(q * d + p for p, q in
                           (divmod(u, d) for u in pi[-2:0:-1]))
        for j, pj in enumerate(monos):
            b = len(pj) - 1
            pv0, qv0 = divmod(pj[0], d)
            if pu0 != pv0:
                continue
            pvb, qvb = divmod(pj[-1], d)
            if a == 0 and b == 0:
                val = 1.0
                x, y, e, f = qu0, qv0, None, None
            elif a == 0:
                x, y = qu0, qvb
                val = t.maps[b - 1][(qv0 * d + pvb,) + pj[1:-1]]
            elif b == 0:
                x, y = qua, qv0
                val = t.maps[a - 1][(pua * d + qu0,) + left_slots]
            else:
                x, y = qua, qvb
                slots = left_slots + (qu0 * d + qv0,) + pj[1:-1]
                val = t.maps[a + b - 1][(pua * d + pvb,) + slots]
            gram[i * d + x, j * d + y] += val
    herm_defect = float(np.max(np.abs(gram - gram.conj().T)))
    w = np.linalg.eigvalsh((gram + gram.conj().T) / 2)
    min_eig = float(w[0])
    return (min_eig >= -tol and herm_defect <= 10 * tol), min_eig


# --- randomized constructors (seeded; used by tests, CLI sweeps, limits) -----

def random_hermitian(rng: np.random.Generator, d: int, scale: float = 1.0):
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (x + x.conj().T) / 2
    nrm = op_norm(h)
    return scale * h / nrm if nrm > 0 else h


def random_realized(rng: np.random.Generator, d: int, k: int,
                    bound: float = 1.0, state: str = "trace"
                    ) -> RealizedDistribution:
    a = random_hermitian(rng, d * k, bound)
    if state == "vector":
        v = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        return RealizedDistribution(d, k, a, ("vector", v / np.linalg.norm(v)))
    return RealizedDistribution(d, k, a)


def random_cp(rng: np.random.Generator, d: int, k: int,
              a_norm: float = 1.0, v_norm: float = 1.0) -> RealizedCP:
    a = random_hermitian(rng, d * k, a_norm)
    v = rng.standard_normal((d * k, d)) + 1j * rng.standard_normal((d * k, d))
    return RealizedCP(d, k, a, v_norm * v / op_norm(v))


def scalar_atoms(atoms, weights, N: int) -> MomentTensor:
    """d = 1 law sum_i w_i delta_{x_i} as a moment tensor (unit total mass)."""
    atoms = np.asarray(atoms, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if abs(weights.sum() - 1.0) > 1e-12 or np.any(weights < 0):
        raise ValidationFailure("weights must be a probability vector")
    maps = [np.array(np.sum(weights * atoms ** n),
                     dtype=np.complex128).reshape((1,) * n)
            for n in range(1, N + 1)]
    return MomentTensor(1, N, tuple(maps))


# --- JSON ---------------------------------------------------------------------

def _nested_complex(a: np.ndarray) -> dict:
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def _complex_from(obj, shape) -> np.ndarray:
    re = np.asarray(obj["re"], dtype=np.float64)
    im = np.asarray(obj["im"], dtype=np.float64)
    if re.shape != shape or im.shape != shape:
        raise DimensionMismatchError(
            f"expected nested arrays of shape {shape}, got {re.shape}")
    return re + 1j * im


def tensor_to_json(t: MomentTensor, kind: str = "moments",
                   species: str | None = None) -> dict:
    out = {"type": kind, "d": t.d, "N": t.N,
           "maps": [_nested_complex(a) for a in t.maps]}
    if species is not None:
        out["species"] = species
    return out


def tensor_from_json(obj) -> MomentTensor:
    try:
        d, n = int(obj["d"]), int(obj["N"])
        raw = obj["maps"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationFailure(f"bad tensor object: {exc}") from exc
    if len(raw) != n:
        raise ValidationFailure("tensor needs one map per order 1..N")
    maps = tuple(_complex_from(raw[i], (d * d,) * (i + 1)) for i in range(n))
    return MomentTensor(d, n, maps)


def model_from_json(obj):
    """Dispatch {"type": "realized"|"cp"|"moments", ...} to the right object."""
    kind = obj.get("type")
    if kind == "moments":
        return tensor_from_json(obj)
    if kind == "realized":
        d, k = int(obj["d"]), int(obj["k"])
        a = _complex_from(obj["A"], (d * k, d * k))
        st = obj.get("state", {"kind": "trace"})
        if st.get("kind") == "vector":
            v = np.asarray(st["v"], dtype=np.float64)
            v = v[..., 0] + 1j * v[..., 1] if v.ndim == 2 else v
            state = ("vector", v)
        else:
            state = ("trace",)
        return RealizedDistribution(d, k, a, state)
    if kind == "cp":
        d, k = int(obj["d"]), int(obj["k"])
        a = _complex_from(obj["A"], (d * k, d * k))
        v = _complex_from(obj["V"], (d * k, d))
        gamma = _complex_from(obj["gamma"], (d, d)) if "gamma" in obj else None
        cp = RealizedCP(d, k, a, v)
        return (gamma, cp) if gamma is not None else cp
    raise ValidationFailure(f"unknown model type {kind!r}")


def load_model(path):
    with open(path) as fh:
        return model_from_json(json.load(fh))

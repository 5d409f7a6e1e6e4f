"""Species-parametric moment/cumulant transforms over M_d.

A species couples a partition family with a rational weight per partition:
classical sums all partitions with weight 1 (scalar case only), free sums the
non-crossing ones, boolean the interval ones, and monotone weights each
non-crossing partition by (number of admissible block orderings) / |pi|!.
Moments and cumulants then determine each other through

    m_n = sum_pi weight(pi) * K_pi(c),

with K_pi the nested evaluation: innermost blocks collapse first and their
values join the interleaved arguments of the enclosing block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .dist import MomentTensor, RealizedCP, sigma_basis_tensor
from .errors import (DimensionMismatchError, UnsupportedStructureError,
                     ValidationFailure)
from .matalg import as_cmatrix, is_hermitian
from .partitions import Partition, enumerate_partitions, order_count


@dataclass(frozen=True)
class Species:
    """Partition family + weight rule; use the module-level singletons."""
    tag: str

    @property
    def lattice_kind(self) -> str:
        return {"classical": "all", "free": "noncrossing",
                "boolean": "interval", "monotone": "noncrossing"}[self.tag]

    def partitions(self, n: int):
        return enumerate_partitions(n, self.lattice_kind)

    def weight(self, p: Partition) -> Fraction:
        if self.tag == "monotone":
            return Fraction(order_count(p), math.factorial(len(p)))
        return Fraction(1)


CLASSICAL = Species("classical")
FREE = Species("free")
BOOLEAN = Species("boolean")
MONOTONE = Species("monotone")
SPECIES = {s.tag: s for s in (CLASSICAL, FREE, BOOLEAN, MONOTONE)}


def species_by_name(name) -> Species:
    if isinstance(name, Species):
        return name
    try:
        return SPECIES[name]
    except KeyError:
        raise ValidationFailure(
            f"unknown species {name!r}; expected one of {sorted(SPECIES)}")


@dataclass(frozen=True)
class CumulantTensor(MomentTensor):
    """c_1..c_N in the same dense layout as MomentTensor; species-tagged."""
    species: Species = FREE

    def c(self, n: int, *args) -> np.ndarray:
        return self.m(n, *args)


def _check_species_dim(species: Species, d: int):
    if species.tag == "classical" and d != 1:
        raise UnsupportedStructureError(
            "classical species is scalar-only (d = 1)")


# --- single-partition nested evaluation ---------------------------------------

def k_pi_eval(c: CumulantTensor, p: Partition, args) -> np.ndarray:
    """Nested cumulant product over one partition, with bimodular ends.

    args = (b_0, b_1, ..., b_n) for p a partition of {1..n}; b_j sits between
    legs j and j+1, and b_0, b_n multiply from the outside.
    """
    n = p.n
    if len(args) != n + 1:
        raise DimensionMismatchError(f"need n+1 = {n + 1} arguments")
    d = c.d
    _check_species_dim(c.species, d)
    bs = [as_cmatrix(b) for b in args]
    if not p.is_noncrossing():
        if c.species.tag != "classical":
            raise UnsupportedStructureError(
                "crossing partitions occur only in the classical species")
        scal = 1.0 + 0.0j
        for blk in p.blocks:
            scal *= complex(c.maps[len(blk) - 1].reshape(-1)[0])
        for b in bs:
            scal *= complex(b[0, 0])
        return np.array([[scal]])
    first = {blk[0] for blk in p.blocks}
    last = {blk[-1] for blk in p.blocks}
    size = {leg: len(blk) for blk in p.blocks for leg in blk}
    eye = np.eye(d, dtype=np.complex128)
    stack = [[None, eye]]
    for j in range(1, n + 1):
        if j in first:
            stack.append([[], eye])
        else:
            f = stack[-1]
            f[0].append(f[1])
            f[1] = eye
        if j in last:
            blk_args, _ = stack.pop()
            v = c.m(size[j], *blk_args)
            stack[-1][1] = stack[-1][1] @ v
        if j < n:
            stack[-1][1] = stack[-1][1] @ bs[j]
    return bs[0] @ stack[0][1] @ bs[n]


# --- lattice encodings for the batch kernels ----------------------------------

def _encode_noncrossing(pis, n):
    P = len(pis)
    first = np.zeros((P, n), dtype=np.int8)
    last = np.zeros((P, n), dtype=np.int8)
    sizes = np.zeros((P, n), dtype=np.int64)
    for i, p in enumerate(pis):
        for blk in p.blocks:
            first[i, blk[0] - 1] = 1
            last[i, blk[-1] - 1] = 1
            for leg in blk:
                sizes[i, leg - 1] = len(blk)
    return first, last, sizes


def _lattice_sum(species: Species, n: int, cums, d: int,
                 skip_full_block: bool) -> np.ndarray:
    """sum over lattice(n) of weight(pi) * K_pi on all basis tuples."""
    pis = species.partitions(n)
    if skip_full_block:
        pis = tuple(p for p in pis if len(p) > 1)
    if species.tag == "classical":
        # d = 1: K_pi is the plain product of block cumulants
        scal = 0.0 + 0.0j
        for p in pis:
            v = 1.0 + 0.0j
            for blk in p.blocks:
                v *= complex(cums[len(blk) - 1].reshape(-1)[0])
            scal += v
        return np.full((1,) * n, scal, dtype=np.complex128)
    if not pis:
        return np.zeros((d * d,) * n, dtype=np.complex128)
    first, last, sizes = _encode_noncrossing(pis, n)
    weights = np.array([float(species.weight(p)) for p in pis])
    return _kernels.weighted_kpi_sum(first, last, sizes, weights, cums, d)


# --- the two transforms --------------------------------------------------------

def cumulants_to_moments(c: CumulantTensor) -> MomentTensor:
    _check_species_dim(c.species, c.d)
    maps = tuple(_lattice_sum(c.species, n, c.maps[:n], c.d, False)
                 for n in range(1, c.N + 1))
    return MomentTensor(c.d, c.N, maps)


def moments_to_cumulants(m: MomentTensor, species) -> CumulantTensor:
    species = species_by_name(species)
    _check_species_dim(species, m.d)
    cums: list[np.ndarray] = []
    d2 = m.d * m.d
    for n in range(1, m.N + 1):
        # order-n entry is never touched when the full block is skipped
        padded = tuple(cums) + (np.zeros((d2,) * n, dtype=np.complex128),)
        rest = _lattice_sum(species, n, padded, m.d, True)
        cums.append(m.maps[n - 1] - rest)
    return CumulantTensor(m.d, m.N, tuple(cums), species=species)


# --- constructors and convolution ---------------------------------------------

def nu_cumulants(gamma, sigma: RealizedCP, species, N: int) -> CumulantTensor:
    """Cumulant pair (gamma, sigma): c_1 = gamma, c_n = sigma words for n >= 2."""
    species = species_by_name(species)
    gamma = as_cmatrix(gamma)
    if gamma.shape != (sigma.d, sigma.d):
        raise DimensionMismatchError("gamma must be d x d matching sigma")
    if not is_hermitian(gamma, tol=1e-10):
        raise ValidationFailure("gamma must be Hermitian")
    maps = [gamma.reshape(-1).astype(np.complex128)]
    for n in range(2, N + 1):
        maps.append(sigma_basis_tensor(sigma, n))
    return CumulantTensor(sigma.d, N, tuple(maps), species=species)


def make_nu(gamma, sigma: RealizedCP, species, N: int) -> MomentTensor:
    """Law of the (gamma, sigma)-generated infinitely divisible element."""
    species = species_by_name(species)
    if species.tag == "classical":
        raise UnsupportedStructureError(
            "nu constructors cover the free/boolean/monotone species")
    return cumulants_to_moments(nu_cumulants(gamma, sigma, species, N))


def convolve(m1: MomentTensor, m2: MomentTensor, species) -> MomentTensor:
    """Convolution via cumulant addition (classical, free, boolean)."""
    species = species_by_name(species)
    if species.tag == "monotone":
        raise UnsupportedStructureError(
            "monotone convolution is not cumulant-additive; "
            "use ncseries.monotone_convolve")
    if (m1.d, m1.N) != (m2.d, m2.N):
        raise DimensionMismatchError("operands must share d and N")
    c1 = moments_to_cumulants(m1, species)
    c2 = moments_to_cumulants(m2, species)
    total = tuple(a + b for a, b in zip(c1.maps, c2.maps))
    return cumulants_to_moments(
        CumulantTensor(m1.d, m1.N, total, species=species))


def power_eta(m: MomentTensor, eta: np.ndarray) -> MomentTensor:
    """Monotone convolution power: eta hits each monotone cumulant's output.

    eta is the matrix of a linear map on M_d acting on column-major vec(b),
    i.e. vec(eta(b)) = eta @ vec(b) with vec stacking columns.
    """
    d = m.d
    eta = np.asarray(eta, dtype=np.complex128)
    if eta.shape != (d * d, d * d):
        raise DimensionMismatchError("eta must be d^2 x d^2")
    c = moments_to_cumulants(m, MONOTONE)
    # storage flattens the output row-major; conjugate eta accordingly
    perm = np.arange(d * d).reshape(d, d).T.ravel()
    eta_rm = eta[np.ix_(perm, perm)]
    maps = tuple(np.tensordot(eta_rm, t, axes=([1], [0])) for t in c.maps)
    return cumulants_to_moments(
        CumulantTensor(d, m.N, maps, species=MONOTONE))

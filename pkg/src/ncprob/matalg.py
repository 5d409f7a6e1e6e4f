"""Dense complex matrix helpers: half-plane/Stolz predicates, amplification,
norms, and the JSON matrix format used by the CLI.

Index convention for level-n amplification M_n(M_d) = M_{nd}: the level index
is slow — entry ((i,p),(j,q)) sits at row i*d+p, column j*d+q.  Direct sums of
level-1 points are therefore block-diagonal.  amplify(m, n) = 1_n (x) m under
this convention, i.e. n diagonal copies of m.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NumericalFailure, ValidationFailure

PD_TOL = 1e-10  # strict operator inequalities need a float threshold


def as_cmatrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValidationFailure("matrix has non-finite entries")
    return a


def real_part(b) -> np.ndarray:
    b = as_cmatrix(b)
    return (b + b.conj().T) / 2


def imag_part(b) -> np.ndarray:
    """(b - b*)/(2i); always Hermitian."""
    b = as_cmatrix(b)
    return (b - b.conj().T) / 2j


def is_hermitian(b, tol=1e-12) -> bool:
    b = as_cmatrix(b)
    return bool(np.max(np.abs(b - b.conj().T)) <= tol)


def min_eig_hermitian(h) -> float:
    return float(np.linalg.eigvalsh(as_cmatrix(h))[0])


def is_positive_definite(h, tol=PD_TOL) -> bool:
    return min_eig_hermitian(h) > tol


def in_upper_half_plane(b, epsilon: float = 0.0) -> bool:
    """Im(b) > epsilon * 1 in the positive-definite order."""
    return min_eig_hermitian(imag_part(b)) > epsilon


def in_stolz_angle(b, alpha: float, epsilon: float) -> bool:
    """Im(b) > epsilon*1 and Im(b) > alpha*Re(b), both as PD inequalities."""
    im = imag_part(b)
    if min_eig_hermitian(im) <= epsilon:
        return False
    return min_eig_hermitian(im - alpha * real_part(b)) > 0.0


def op_norm(a) -> float:
    """Operator norm = largest singular value."""
    return float(np.linalg.norm(np.asarray(a, dtype=np.complex128), 2))


def inverse_norm_bound_check(b, epsilon: float) -> bool:
    """Im(b) > eps guarantees ||b^{-1}|| <= 1/eps; returns that comparison.

    Always true on valid input; a False return means the caller handed in a
    point outside its stated domain or the solve failed numerically.
    """
    b = as_cmatrix(b)
    if epsilon <= 0:
        raise ValidationFailure("epsilon must be positive")
    try:
        inv = np.linalg.inv(b)
    except np.linalg.LinAlgError as exc:  # impossible when Im(b) > eps > 0
        raise NumericalFailure(f"singular matrix in half-plane: {exc}") from exc
    # tiny slack for the roundoff of the solve itself
    return op_norm(inv) <= (1.0 + 1e-12) / epsilon


def amplify(m, n: int) -> np.ndarray:
    """m (x) 1_n with the level index slow: block-diag(m, ..., m), n copies."""
    m = as_cmatrix(m)
    return np.kron(np.eye(n), m)


@dataclass(frozen=True)
class HalfPlanePoint:
    """A matrix upper-half-plane point b in M_n(M_d) = M_{nd}."""
    value: np.ndarray
    base_dim: int
    level: int

    def __post_init__(self):
        v = as_cmatrix(self.value)
        if v.shape[0] != self.base_dim * self.level:
            raise DimensionMismatchError(
                f"value is {v.shape[0]}x{v.shape[0]}, expected "
                f"{self.base_dim * self.level} = d*level")
        object.__setattr__(self, "value", v)

    @staticmethod
    def at(value, d: int, level: int = 1, epsilon: float = 0.0) -> "HalfPlanePoint":
        p = HalfPlanePoint(np.asarray(value, dtype=np.complex128), d, level)
        if not in_upper_half_plane(p.value, epsilon):
            raise ValidationFailure("point is not in the open upper half-plane")
        return p


# --- JSON matrix format -----------------------------------------------------

def matrix_to_json(m) -> dict:
    m = as_cmatrix(m)
    return {"dim": int(m.shape[0]),
            "re": m.real.tolist(),
            "im": m.imag.tolist()}


def matrix_from_json(obj) -> np.ndarray:
    try:
        dim = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=np.float64)
        im = np.asarray(obj["im"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationFailure(f"bad matrix object: {exc}") from exc
    if re.shape != (dim, dim) or im.shape != (dim, dim):
        raise DimensionMismatchError(
            f"matrix arrays must be {dim}x{dim}, got {re.shape} / {im.shape}")
    return re + 1j * im


def load_matrix(path) -> np.ndarray:
    with open(path) as fh:
        return matrix_from_json(json.load(fh))


def rect_to_json(m) -> dict:
    """Rectangular complex array (e.g. the V of a realized CP map)."""
    m = np.asarray(m, dtype=np.complex128)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def rect_from_json(obj) -> np.ndarray:
    try:
        re = np.asarray(obj["re"], dtype=np.float64)
        im = np.asarray(obj["im"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationFailure(f"bad array object: {exc}") from exc
    if re.shape != im.shape:
        raise DimensionMismatchError("re/im shapes differ")
    return re + 1j * im

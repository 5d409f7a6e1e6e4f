"""Triangular-array convolution limits: k-fold convolution powers of small
laws in each species, measured against the matching (gamma, sigma) limit law.

Convergence is measured on moments only (all inputs here have realized,
hence norm-bounded, models); weak-convergence statements about general
probability measures are out of scope and every report says so in its note.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cumulants import (BOOLEAN, CLASSICAL, FREE, MONOTONE, CumulantTensor,
                        cumulants_to_moments, make_nu, moments_to_cumulants,
                        nu_cumulants, power_eta, species_by_name)
from .dist import MomentTensor, RealizedCP, scalar_atoms, sigma_basis_tensor
from .errors import (DimensionMismatchError, NumericalFailure, SizeCapError,
                     ValidationFailure)
from .matalg import as_cmatrix, is_hermitian
from .ncseries import monotone_convolve

EXACT_FLOOR = 1e-13          # distances below this count as exact convergence
POWER_AGREEMENT_TOL = 1e-9   # power_eta vs iterated monotone convolution

MOMENT_NOTE = ("distances are max-over-basis-tuple operator norms of moment "
               "mismatches per order; moment convergence of norm-bounded "
               "laws, not weak convergence of general measures")

BP_SPECIES = ("free", "boolean", "monotone")


def default_schedule() -> tuple:
    return tuple(2 ** j for j in range(1, 7))


def order_distance(m1: MomentTensor, m2: MomentTensor, n: int) -> float:
    """Max over input basis tuples of the operator norm of the n-th mismatch."""
    if (m1.d, m2.d) != (m2.d, m1.d) or m1.d != m2.d:
        raise DimensionMismatchError("operands must share d")
    diff = m1.map_for(n) - m2.map_for(n)
    d = m1.d
    mats = np.moveaxis(diff.reshape(d, d, -1), 2, 0)
    return float(np.linalg.svd(mats, compute_uv=False)[..., 0].max())


@dataclass(frozen=True)
class TriangularArray:
    """Rows mu_i to be convolved k_i times; boolean_seed rows are the
    boolean (gamma/k_i, sigma/k_i) laws, custom rows are caller-supplied."""
    gamma: np.ndarray
    sigma: RealizedCP
    k_schedule: tuple
    rule: str = "boolean_seed"
    seeds: tuple = ()
    n_orders: int = 6

    def __post_init__(self):
        g = as_cmatrix(self.gamma)
        if g.shape != (self.sigma.d, self.sigma.d):
            raise DimensionMismatchError("gamma must be d x d matching sigma")
        if not is_hermitian(g, tol=1e-10):
            raise ValidationFailure("gamma must be Hermitian")
        ks = tuple(int(k) for k in self.k_schedule)
        if not ks or any(k < 1 for k in ks):
            raise ValidationFailure("k_schedule must hold positive integers")
        if self.rule not in ("boolean_seed", "custom"):
            raise ValidationFailure("rule must be boolean_seed or custom")
        if self.rule == "custom" and len(self.seeds) != len(ks):
            raise ValidationFailure("custom rule needs one seed per k_i")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "k_schedule", ks)
        object.__setattr__(self, "seeds", tuple(self.seeds))

    @property
    def d(self) -> int:
        return self.sigma.d

    def row(self, i: int) -> MomentTensor:
        if self.rule == "custom":
            return self.seeds[i]
        k = self.k_schedule[i]
        return make_nu(self.gamma / k, self.sigma.scaled(1.0 / k),
                       BOOLEAN, self.n_orders)


@dataclass(frozen=True)
class ConvergenceReport:
    schedule: tuple
    rows: tuple                 # (species, k, order, distance)
    slopes: dict                # species -> fitted log-log slope, None if exact
    exact: dict                 # species -> bool (all distances at floor)
    scaling_rows: tuple         # (k, order, distance): k*m_n vs gamma/sigma
    note: str = MOMENT_NOTE

    def species_rows(self, species: str):
        return [r for r in self.rows if r[0] == species]

    def worst(self, species: str, k: int) -> float:
        return max(r[3] for r in self.rows if r[0] == species and r[1] == k)

    def to_json(self) -> dict:
        per = {}
        for s in sorted(self.slopes):
            per[s] = {
                "slope": self.slopes[s],
                "exact": self.exact[s],
                "rows": [{"k": k, "order": n, "distance": v}
                         for (sp, k, n, v) in self.rows if sp == s],
            }
        return {
            "note": self.note,
            "schedule": list(self.schedule),
            "species": per,
            "scaling": [{"k": k, "order": n, "distance": v}
                        for (k, n, v) in self.scaling_rows],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["species", "k", "order", "distance", "slope"])
        for (sp, k, n, v) in self.rows:
            slope = self.slopes[sp]
            w.writerow([sp, k, n, format(v, ".17g"),
                        "" if slope is None else format(slope, ".17g")])
        return buf.getvalue()


def _fit_slope(ks, dists):
    pts = [(k, v) for k, v in zip(ks, dists) if v > EXACT_FLOOR]
    if len(pts) < 2:
        return None
    xs = np.log([p[0] for p in pts])
    ys = np.log([p[1] for p in pts])
    return float(np.polyfit(xs, ys, 1)[0])


def convolution_power(mu: MomentTensor, species, k: int) -> MomentTensor:
    """k-fold convolution power: cumulant scaling for the additive species,
    power_eta(k id) for the monotone one (checked against iteration below)."""
    species = species_by_name(species)
    if k == 1:
        return MomentTensor(mu.d, mu.N, mu.maps)
    if species.tag == "monotone":
        return power_eta(mu, float(k) * np.eye(mu.d * mu.d))
    c = moments_to_cumulants(mu, species)
    scaled = tuple(float(k) * t for t in c.maps)
    return cumulants_to_moments(
        CumulantTensor(mu.d, mu.N, scaled, species=species))


def _assert_monotone_power(mu: MomentTensor, k: int, fast: MomentTensor):
    walk = mu
    for _ in range(k - 1):
        walk = monotone_convolve(walk, mu)
    gap = fast.distance(walk)
    if gap > POWER_AGREEMENT_TOL:
        raise NumericalFailure(
            f"power_eta disagrees with iterated monotone convolution by "
            f"{gap:.3e} at k = {k}")


def _distance_rows(species_tag, k, powered, target, n_orders):
    return [(species_tag, k, n, order_distance(powered, target, n))
            for n in range(1, n_orders + 1)]


def _scaling_rows(arr: TriangularArray):
    """Condition-(a) surrogate: k * m_n(mu_k) against gamma (n=1) and the
    sigma word tensors (n >= 2)."""
    out = []
    for i, k in enumerate(arr.k_schedule):
        mu = arr.row(i)
        gap1 = float(np.abs(k * mu.map_for(1) - arr.gamma.reshape(-1)).max())
        out.append((k, 1, gap1))
        for n in range(2, arr.n_orders + 1):
            words = sigma_basis_tensor(arr.sigma, n)
            gap = float(np.abs(k * mu.map_for(n) - words).max())
            out.append((k, n, gap))
    return tuple(out)


def _assemble(schedule, cells, scaling, n_orders):
    rows = []
    slopes, exact = {}, {}
    for s in sorted(cells):
        per_k = cells[s]
        worst = []
        for k in schedule:
            rows.extend(per_k[k])
            worst.append(max(v for (_, _, _, v) in per_k[k]))
        slopes[s] = _fit_slope(schedule, worst)
        exact[s] = all(v <= EXACT_FLOOR for v in worst)
    return ConvergenceReport(tuple(schedule), tuple(rows), slopes, exact,
                             tuple(scaling))


def run_bp(arr: TriangularArray, species_set=BP_SPECIES, threads: int = 1
           ) -> ConvergenceReport:
    """Distances of mu_i convolved k_i times to the (gamma, sigma) law, per
    species and moment order, with fitted log-log decay slopes."""
    names = tuple(species_by_name(s).tag for s in species_set)
    if any(s not in BP_SPECIES for s in names):
        raise ValidationFailure(
            "run_bp covers free/boolean/monotone; scalar classical limits "
            "live in run_scalar_bp")
    if arr.n_orders > 6:
        raise SizeCapError("triangular arrays are capped at order 6")
    if arr.d > 2:
        raise SizeCapError("triangular arrays are capped at d = 2")
    if max(arr.k_schedule) > 64:
        raise SizeCapError("convolution powers are capped at k = 64")
    targets = {s: make_nu(arr.gamma, arr.sigma, s, arr.n_orders)
               for s in names}
    seeds = [arr.row(i) for i in range(len(arr.k_schedule))]

    def cell(job):
        s, i, k = job
        powered = convolution_power(seeds[i], s, k)
        if s == "monotone" and k <= 8:
            _assert_monotone_power(seeds[i], k, powered)
        return (s, k), _distance_rows(s, k, powered, targets[s], arr.n_orders)

    jobs = [(s, i, k) for s in names
            for i, k in enumerate(arr.k_schedule)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = dict(pool.map(cell, jobs))
    else:
        done = dict(map(cell, jobs))
    cells = {s: {k: done[(s, k)] for k in arr.k_schedule} for s in names}
    return _assemble(arr.k_schedule, cells, _scaling_rows(arr), arr.n_orders)


# --- scalar harness -----------------------------------------------------------

SCALAR_SEEDS = ("clt", "shift", "poisson")


def _scalar_seed(kind: str, k: int, shift: float, n_orders: int
                 ) -> MomentTensor:
    if kind == "clt":
        a = 1.0 / np.sqrt(k)
        return scalar_atoms((a, -a), (0.5, 0.5), n_orders)
    if kind == "shift":
        return scalar_atoms((shift / k,), (1.0,), n_orders)
    if kind == "poisson":
        return scalar_atoms((0.0, 1.0), (1.0 - 1.0 / k, 1.0 / k), n_orders)
    raise ValidationFailure(f"unknown scalar seed {kind!r}")


def _scalar_params(kind: str, shift: float):
    """Limit pair (gamma, sigma) for each built-in scalar seed family."""
    zero = RealizedCP(1, 1, np.zeros((1, 1)), np.zeros((1, 1)))
    unit_at_0 = RealizedCP(1, 1, np.zeros((1, 1)), np.ones((1, 1)))
    unit_at_1 = RealizedCP(1, 1, np.ones((1, 1)), np.ones((1, 1)))
    gamma_sigma = {
        "clt": (0.0, unit_at_0),
        "shift": (shift, zero),
        "poisson": (1.0, unit_at_1),
    }
    g, s = gamma_sigma[kind]
    return np.array([[g]], dtype=np.complex128), s


def run_scalar_bp(classical_included: bool, schedule, seed: str = "clt",
                  shift: float = 0.5, n_orders: int = 6, threads: int = 1
                  ) -> ConvergenceReport:
    """Scalar triangular arrays for the built-in seed families, with the
    all-partitions classical species optionally alongside the other three."""
    if seed not in SCALAR_SEEDS:
        raise ValidationFailure(f"seed must be one of {SCALAR_SEEDS}")
    ks = tuple(int(k) for k in schedule)
    if not ks or any(k < 1 for k in ks):
        raise ValidationFailure("schedule must hold positive integers")
    gamma, sigma = _scalar_params(seed, shift)
    names = (("classical",) if classical_included else ()) + BP_SPECIES
    targets = {}
    for s in names:
        if s == "classical":
            targets[s] = cumulants_to_moments(
                nu_cumulants(gamma, sigma, CLASSICAL, n_orders))
        else:
            targets[s] = make_nu(gamma, sigma, s, n_orders)
    seeds = {k: _scalar_seed(seed, k, shift, n_orders) for k in ks}

    def cell(job):
        s, k = job
        powered = convolution_power(seeds[k], s, k)
        if s == "monotone" and k <= 8:
            _assert_monotone_power(seeds[k], k, powered)
        return (s, k), _distance_rows(s, k, powered, targets[s], n_orders)

    jobs = [(s, k) for s in names for k in ks]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = dict(pool.map(cell, jobs))
    else:
        done = dict(map(cell, jobs))
    cells = {s: {k: done[(s, k)] for k in ks} for s in names}

    scaling = []
    for k in ks:
        mu = seeds[k]
        scaling.append((k, 1, float(abs(k * mu.map_for(1)[0]
                                        - gamma[0, 0]))))
        for n in range(2, n_orders + 1):
            word = sigma_basis_tensor(sigma, n)
            scaling.append((k, n, float(np.abs(k * mu.map_for(n)
                                               - word).max())))
    return _assemble(ks, cells, tuple(scaling), n_orders)

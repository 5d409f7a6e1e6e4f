"""Matrix upper-half-plane numerics: Cauchy transforms of realized models,
Nevanlinna-type generators Phi(b) = gamma + V*(b~ - A)^{-1}V, semigroup
integration by Picard iteration and fixed-step RK4, and the consistency
checks tying the flow back to the series/cumulant side.

Index convention at amplification level n over base M_d with internal space
C^k: vectors live in C^n (x) C^d (x) C^k with the level index slowest.  Hence
for an (n*d)-dim argument b: b~ = kron(b, 1_k), while model data lifts as
kron(1_n, A), kron(1_n, V).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .cumulants import power_eta
from .dist import MomentTensor, RealizedCP, RealizedDistribution, _phi_apply
from .errors import (DimensionMismatchError, FlowDivergenceError,
                     NumericalFailure, SizeCapError, ValidationFailure)
from .matalg import (HalfPlanePoint, as_cmatrix, imag_part, is_hermitian,
                     min_eig_hermitian, op_norm)
from .ncseries import h_series

IM_SLACK = 1e-8          # allowed dip of Im F_t below Im b_0
RK4_LOCAL_TOL = 1e-8     # Richardson-estimated local error ceiling
MAX_STEP_HALVINGS = 10


def _as_point(b, d: int) -> HalfPlanePoint:
    if isinstance(b, HalfPlanePoint):
        if b.base_dim != d:
            raise DimensionMismatchError(
                f"point has base dimension {b.base_dim}, generator has {d}")
        return b
    b = as_cmatrix(b)
    if b.shape[0] % d:
        raise DimensionMismatchError(
            f"point dimension must be a multiple of d = {d}")
    return HalfPlanePoint.at(b, d, level=b.shape[0] // d)


@dataclass(frozen=True)
class Generator:
    """Nevanlinna pair (gamma, sigma); the flow is dF_t/dt = -Phi(F_t)."""
    gamma: np.ndarray
    sigma: RealizedCP
    level: int = 1

    def __post_init__(self):
        g = as_cmatrix(self.gamma)
        if g.shape != (self.sigma.d, self.sigma.d):
            raise DimensionMismatchError("gamma must be d x d matching sigma")
        if not is_hermitian(g, tol=1e-10):
            raise ValidationFailure("gamma must be Hermitian")
        if self.level < 1:
            raise ValidationFailure("level must be a positive integer")
        object.__setattr__(self, "gamma", g)

    @property
    def d(self) -> int:
        return self.sigma.d

    @property
    def a_norm(self) -> float:
        return self.sigma.bound

    def scaled(self, factor: float) -> "Generator":
        return Generator(self.gamma * factor, self.sigma.scaled(factor),
                         self.level)

    def at_level(self, n: int) -> "Generator":
        return Generator(self.gamma, self.sigma, n)


def _lifted(g: Generator):
    """gamma, A, V amplified to the generator's level."""
    n, k = g.level, g.sigma.k
    eye_n = np.eye(n)
    return (np.kron(eye_n, g.gamma), np.kron(eye_n, g.sigma.A),
            np.kron(eye_n, g.sigma.V), k)


def phi_eval(g: Generator, b) -> np.ndarray:
    """Phi(b) = gamma + V*(b~ - A)^{-1}V at the generator's level."""
    b = as_cmatrix(b.value if isinstance(b, HalfPlanePoint) else b)
    nd = g.level * g.d
    if b.shape != (nd, nd):
        raise DimensionMismatchError(f"argument must be {nd} x {nd}")
    gam, a_l, v_l, k = _lifted(g)
    if min_eig_hermitian(imag_part(b)) <= 0:
        # outside the open half-plane: only the resolvent-ball extension works
        try:
            binv_norm = op_norm(np.linalg.inv(b))
        except np.linalg.LinAlgError:
            raise ValidationFailure("argument is singular and not half-plane")
        if binv_norm * g.a_norm >= 1.0:
            raise ValidationFailure(
                "argument neither in the upper half-plane nor in the "
                "resolvent extension ball")
    bt = np.kron(b, np.eye(k))
    try:
        x = np.linalg.solve(bt - a_l, v_l)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"resolvent is singular: {exc}") from exc
    return gam + v_l.conj().T @ x


def lambda_r_value(g: Generator, b) -> np.ndarray:
    """R(b) = Phi(b^{-1}) continued to the ball ||b|| < 1/||A||."""
    b = as_cmatrix(b)
    nd = g.level * g.d
    if b.shape != (nd, nd):
        raise DimensionMismatchError(f"argument must be {nd} x {nd}")
    if op_norm(b) * g.a_norm >= 1.0:
        raise ValidationFailure("outside the continuation ball")
    gam, a_l, v_l, k = _lifted(g)
    bt = np.kron(b, np.eye(k))
    eye = np.eye(bt.shape[0])
    return gam + v_l.conj().T @ np.linalg.solve(eye - bt @ a_l, bt @ v_l)


def cauchy_G(r: RealizedDistribution, b) -> np.ndarray:
    """(E (x) 1_n)((b~ - A~)^{-1}) for b at any amplification level."""
    b = as_cmatrix(b.value if isinstance(b, HalfPlanePoint) else b)
    if b.shape[0] % r.d:
        raise DimensionMismatchError(
            f"argument dimension must be a multiple of d = {r.d}")
    n = b.shape[0] // r.d
    if min_eig_hermitian(imag_part(b)) <= 0:
        raise ValidationFailure("argument must be in the open upper half-plane")
    bt = np.kron(b, np.eye(r.k))
    at = np.kron(np.eye(n), r.A)
    res = np.linalg.inv(bt - at)
    nd, k = n * r.d, r.k
    blocks = res.reshape(nd, k, nd, k)
    return _phi_apply(r.state, np.moveaxis(blocks, 1, 2))


@dataclass(frozen=True)
class FlowState:
    """Trajectory t -> F_t(b0) on an increasing grid starting at 0."""
    b0: HalfPlanePoint
    t_grid: np.ndarray
    values: np.ndarray
    method: str

    def __post_init__(self):
        grid = np.asarray(self.t_grid, dtype=np.float64)
        vals = np.ascontiguousarray(self.values, dtype=np.complex128)
        if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise ValidationFailure("time grid must increase from 0")
        if vals.shape[0] != grid.shape[0]:
            raise DimensionMismatchError("one value per grid point required")
        if not np.allclose(vals[0], self.b0.value, atol=1e-12):
            raise NumericalFailure("trajectory must start at b0")
        im0 = imag_part(self.b0.value)
        for w in vals:
            if min_eig_hermitian(imag_part(w) - im0) < -IM_SLACK:
                raise NumericalFailure(
                    "imaginary part dipped below its initial value")
        object.__setattr__(self, "t_grid", grid)
        object.__setattr__(self, "values", vals)

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]


def picard_flow(g: Generator, b, t_max: float, grid_steps: int = 256,
                max_iters: int = 100, tol: float = 1e-10) -> FlowState:
    """Successive approximation f_{j+1}(t) = b - int_0^t Phi(f_j(s)) ds.

    Composite-trapezoid quadrature on a fixed grid; stops when the sup-norm
    change over the whole trajectory drops below tol.
    """
    point = _as_point(b, g.d)
    if point.level != g.level:
        raise DimensionMismatchError("point level differs from generator level")
    if t_max <= 0 or grid_steps < 1:
        raise ValidationFailure("need t_max > 0 and at least one grid step")
    grid = np.linspace(0.0, t_max, grid_steps + 1)
    traj = np.broadcast_to(point.value, (grid.size,) + point.value.shape).copy()
    delta = np.inf
    for _ in range(max_iters):
        phis = np.stack([phi_eval(g, w) for w in traj])
        integral = cumulative_trapezoid(phis, grid, axis=0, initial=0)
        new = point.value[np.newaxis] - integral
        delta = float(max(op_norm(x) for x in (new - traj)))
        traj = new
        if delta < tol:
            return FlowState(point, grid, traj, "picard")
    raise FlowDivergenceError(
        f"no convergence within {max_iters} sweeps", residual=delta)


def _rk4_step(g: Generator, y: np.ndarray, dt: float, depth: int = 0):
    k1 = -phi_eval(g, y)
    k2 = -phi_eval(g, y + 0.5 * dt * k1)
    k3 = -phi_eval(g, y + 0.5 * dt * k2)
    k4 = -phi_eval(g, y + dt * k3)
    out = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if min_eig_hermitian(imag_part(out)) > 0:
        return out
    if depth >= MAX_STEP_HALVINGS:
        raise FlowDivergenceError("trajectory left the upper half-plane")
    half = _rk4_step(g, y, dt / 2, depth + 1)
    return _rk4_step(g, half, dt / 2, depth + 1)


def _rk4_run(g: Generator, b0: np.ndarray, grid: np.ndarray) -> np.ndarray:
    vals = np.empty((grid.size,) + b0.shape, dtype=np.complex128)
    vals[0] = b0
    for i in range(grid.size - 1):
        vals[i + 1] = _rk4_step(g, vals[i], grid[i + 1] - grid[i])
    return vals


def rk4_flow(g: Generator, b, t_max: float, dt: float) -> FlowState:
    """Classic fixed-step RK4 for dF/dt = -Phi(F), with a step-halved twin.

    The Richardson estimate |coarse - fine|/15 must stay below 1e-8 at every
    shared grid point or the run is refused; the fine solution is returned on
    the coarse grid.
    """
    point = _as_point(b, g.d)
    if point.level != g.level:
        raise DimensionMismatchError("point level differs from generator level")
    if t_max <= 0 or dt <= 0:
        raise ValidationFailure("need t_max > 0 and dt > 0")
    steps = max(1, int(round(t_max / dt)))
    grid = np.linspace(0.0, t_max, steps + 1)
    coarse = _rk4_run(g, point.value, grid)
    fine_grid = np.linspace(0.0, t_max, 2 * steps + 1)
    fine = _rk4_run(g, point.value, fine_grid)
    err = max(op_norm(coarse[i] - fine[2 * i]) for i in range(steps + 1)) / 15.0
    if err > RK4_LOCAL_TOL:
        raise NumericalFailure(
            f"step-halving estimate {err:.3e} exceeds {RK4_LOCAL_TOL:.0e}; "
            "reduce dt")
    return FlowState(point, grid, fine[::2], "rk4")


# --- cross-checks against the series/cumulant side ---------------------------

def truncation_tail_bound(a_norm: float, binv_norm: float, n_orders: int
                          ) -> float:
    """10 * rho^(N+2) / (1 - rho) with rho = ||A|| * ||b^{-1}||."""
    rho = a_norm * binv_norm
    if rho >= 1.0:
        raise ValidationFailure("series comparison needs ||A||*||b^-1|| < 1")
    return 10.0 * rho ** (n_orders + 2) / (1.0 - rho)


def flow_vs_series(g: Generator, m: MomentTensor, b, t: float) -> float:
    """||F_t(b) - (sum_M C_M(b^{-1},...))^{-1}|| for the t-th power's series."""
    if g.level != 1:
        raise ValidationFailure("series comparison runs at level 1")
    point = _as_point(b, g.d)
    if m.d != g.d:
        raise DimensionMismatchError("moment tensor dimension mismatch")
    w = np.linalg.inv(point.value)
    if op_norm(w) * g.a_norm >= 0.5:
        raise ValidationFailure("need ||b^{-1}|| * ||A|| < 1/2")
    flow_val = rk4_flow(g, point, t, t / 1024.0).final
    mu_t = power_eta(m, t * np.eye(m.d * m.d))
    series_val = np.linalg.inv(h_series(mu_t).eval_diag(w))
    return float(op_norm(flow_val - series_val))


def default_probe_grid(d: int):
    """Fixed well-separated points of M_d^+ with Im >= 1 (deterministic)."""
    eye = np.eye(d)
    h1 = (np.diag(np.linspace(-0.5, 0.5, d)) if d > 1
          else np.array([[0.3]]))
    h2 = np.zeros((d, d))
    for i in range(d - 1):
        h2[i, i + 1] = h2[i + 1, i] = 0.4
    if d == 1:
        h2 = np.array([[-0.8]])
    return [2j * eye, 2j * eye + h1, 2.5j * eye + h2]


@dataclass(frozen=True)
class DivisorReport:
    k_list: tuple
    sup_norms: tuple
    slope: float

    def rows(self):
        return list(zip(self.k_list, self.sup_norms))


def divisor_convergence_check(gamma, sigma: RealizedCP, k_list
                              ) -> DivisorReport:
    """sup_b ||F_{nu(gamma/k, sigma/k)}(b) - b|| over the probe grid, per k.

    The time-1 flow map of the scaled generator is that reciprocal F; the
    sups must decay like 1/k (log-log slope near -1).
    """
    ks = [int(k) for k in k_list]
    if not ks or any(k < 1 for k in ks):
        raise ValidationFailure("k_list must hold positive integers")
    base = Generator(gamma, sigma)
    probes = default_probe_grid(base.d)
    sups = []
    for k in ks:
        gk = base.scaled(1.0 / k)
        worst = 0.0
        for b in probes:
            final = rk4_flow(gk, b, 1.0, 1.0 / 64).final
            worst = max(worst, op_norm(final - b))
        sups.append(worst)
    slope = float(np.polyfit(np.log(ks), np.log(sups), 1)[0]) \
        if len(ks) > 1 else float("nan")
    return DivisorReport(tuple(ks), tuple(sups), slope)


def recover_sigma(h_values, word, d: int, radius: float = 1.0) -> np.ndarray:
    """Read sigma(b_1 X ... X b_{l+1}) off an H evaluator by nilpotent probing.

    Evaluates H on scalar multiples of the strictly-upper block matrix with
    the word on its superdiagonal; nilpotency makes t -> H(tB) a polynomial
    of degree l+1, so l+2 interpolation nodes recover the top coefficient
    exactly, whose top-right block is the requested word value.
    """
    word = [as_cmatrix(w) for w in word]
    ell = len(word) - 1
    if ell < 0:
        raise ValidationFailure("word must contain at least one matrix")
    m = ell + 2
    if m > 8:
        raise SizeCapError("word length capped at 7 (block matrix 8x8)")
    if any(w.shape != (d, d) for w in word):
        raise DimensionMismatchError("word entries must be d x d")
    big = np.zeros((m * d, m * d), dtype=np.complex128)
    for i, w in enumerate(word):
        big[i * d:(i + 1) * d, (i + 1) * d:(i + 2) * d] = w
    # keep every node inside the validity ball even for large words
    t_max = 0.5 * radius / max(1.0, op_norm(big))
    nodes = np.arange(1, m + 1) / m
    h_vals = np.stack([np.asarray(h_values(t_max * u * big),
                                  dtype=np.complex128) for u in nodes])
    if h_vals.shape[1:] != (m * d, m * d):
        raise ValidationFailure("evaluator must return matrices of block size")
    vander = np.vander(nodes, m, increasing=True)
    coeffs = np.linalg.solve(vander, h_vals.reshape(m, -1))
    top = coeffs[m - 1].reshape(m * d, m * d) / t_max ** (ell + 1)
    return np.ascontiguousarray(top[0:d, (m - 1) * d:m * d])


def h_sigma_evaluator(sigma: RealizedCP):
    """Closed-form H of a realized CP map: V*(1 - b~A)^{-1} b~ V, any level."""
    def h(b):
        b = as_cmatrix(b)
        if b.shape[0] % sigma.d:
            raise DimensionMismatchError("level must be an integer multiple")
        n = b.shape[0] // sigma.d
        bt = np.kron(b, np.eye(sigma.k))
        a_l = np.kron(np.eye(n), sigma.A)
        v_l = np.kron(np.eye(n), sigma.V)
        eye = np.eye(bt.shape[0])
        return v_l.conj().T @ np.linalg.solve(eye - bt @ a_l, bt @ v_l)
    return h


def generator_perturbation_check(g1: Generator, g2: Generator, ball) -> bool:
    """Flow stability: ||F_1(1,b) - F_2(1,b)|| <= 1.1 * (e^M - 1)/M * eps.

    eps is the measured sup of ||Phi_1 - Phi_2|| over the sample ball and M
    the measured sup of the derivative bound ||V||^2 ||(b~ - A)^{-1}||^2 of
    Phi_1 there.
    """
    if (g1.d, g1.level) != (g2.d, g2.level):
        raise DimensionMismatchError("generators must share d and level")
    pts = [as_cmatrix(b.value if isinstance(b, HalfPlanePoint) else b)
           for b in ball]
    if not pts:
        raise ValidationFailure("sample ball is empty")
    gam, a_l, v_l, k = _lifted(g1)
    del gam
    v_norm_sq = op_norm(v_l) ** 2
    eps = 0.0
    m1 = 0.0
    for b in pts:
        eps = max(eps, op_norm(phi_eval(g1, b) - phi_eval(g2, b)))
        bt = np.kron(b, np.eye(k))
        res_norm = op_norm(np.linalg.inv(bt - a_l))
        m1 = max(m1, v_norm_sq * res_norm ** 2)
    factor = float(np.expm1(m1) / m1) if m1 > 1e-12 else 1.0
    bound = 1.1 * factor * eps
    worst = 0.0
    for b in pts:
        # integrator error (~1e-9 at this step) is negligible next to the
        # perturbation scale the bound compares against
        f1 = rk4_flow(g1, b, 1.0, 1.0 / 128).final
        f2 = rk4_flow(g2, b, 1.0, 1.0 / 128).final
        worst = max(worst, op_norm(f1 - f2))
    return worst <= bound + 1e-12

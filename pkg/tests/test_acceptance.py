"""Release gate: eleven end-to-end criteria, one test (= one pass/fail line
under pytest -v) each, at the stated tolerances.  Everything here is
deterministic: fixed seeds, fixed schedules, fixed probe points."""

import math

import numpy as np
import pytest

from ncprob.cumulants import (BOOLEAN, CLASSICAL, FREE, MONOTONE,
                              CumulantTensor, cumulants_to_moments, make_nu,
                              moments_to_cumulants, power_eta,
                              species_by_name)
from ncprob.dist import (MomentTensor, RealizedCP, cp_check, moments_of,
                         random_cp, random_hermitian, random_realized,
                         scalar_atoms, sigma_eval)
from ncprob.flow import (Generator, default_probe_grid,
                         divisor_convergence_check, flow_vs_series,
                         generator_perturbation_check, h_sigma_evaluator,
                         imag_part, picard_flow, recover_sigma, rk4_flow,
                         truncation_tail_bound)
from ncprob.limits import TriangularArray, convolution_power, run_bp
from ncprob.matalg import min_eig_hermitian, op_norm
from ncprob.ncseries import evolution_check, monotone_convolve
from ncprob.partitions import (Partition, enumerate_partitions, order_count,
                               order_count_bruteforce)

UNIT_SIGMA = RealizedCP(1, 1, np.zeros((1, 1)), np.ones((1, 1)))


def test_c01_partition_and_order_suite():
    # |NC(n)| = Catalan(n), n <= 10
    for n in range(1, 11):
        cat = math.comb(2 * n, n) // (n + 1)
        assert len(list(enumerate_partitions(n, "noncrossing"))) == cat
    # hook-product order count == brute force over all NC(n), n <= 8
    for n in range(1, 9):
        for p in enumerate_partitions(n, "noncrossing"):
            assert order_count(p) == order_count_bruteforce(p)
    # order identities on 100 constructed splits: 50 fully nested wraps,
    # 50 side-by-side joins
    rng = np.random.default_rng(2024)
    pool = [p for n in range(1, 7)
            for p in enumerate_partitions(n, "noncrossing")]
    nested = 0
    while nested < 50:
        p = pool[rng.integers(len(pool))]
        m = int(rng.integers(1, 4))
        blocks = [tuple(i + m for i in b) for b in p.blocks]
        blocks += [(i, p.n + 2 * m + 1 - i) for i in range(1, m + 1)]
        s = Partition.make(p.n + 2 * m, blocks)
        chain = Partition.make(2 * m, [(i, 2 * m + 1 - i)
                                       for i in range(1, m + 1)])
        assert order_count(s) == order_count(chain) * order_count(p)
        nested += 1
    joined = 0
    while joined < 50:
        p = pool[rng.integers(len(pool))]
        q = pool[rng.integers(len(pool))]
        blocks = list(p.blocks) + [tuple(i + p.n for i in b)
                                   for b in q.blocks]
        s = Partition.make(p.n + q.n, blocks)
        mu, mv = len(p.blocks), len(q.blocks)
        assert order_count(s) == (math.comb(mu + mv, mu)
                                  * order_count(p) * order_count(q))
        joined += 1


def test_c02_species_m4_table():
    want = {"classical": 3.0, "free": 2.0, "boolean": 1.0, "monotone": 1.5}
    for tag, m4 in want.items():
        maps = tuple(np.array(1.0 if n == 2 else 0.0,
                              dtype=complex).reshape((1,) * n)
                     for n in range(1, 5))
        c = CumulantTensor(1, 4, maps, species=species_by_name(tag))
        m = cumulants_to_moments(c)
        got = m.map_for(4).reshape(-1)[0].real
        assert abs(got - m4) < 1e-12


def test_c03_round_trip_50_seeds():
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        d = 1 if seed % 2 else 2
        for tag in ("classical", "free", "boolean", "monotone"):
            dd = 1 if tag == "classical" else d
            maps = tuple((rng.normal(size=(dd * dd,) * n)
                          + 1j * rng.normal(size=(dd * dd,) * n)) * 0.5
                         for n in range(1, 7))
            c = CumulantTensor(dd, 6, maps, species=species_by_name(tag))
            back = moments_to_cumulants(cumulants_to_moments(c), tag)
            worst = max(worst, max(np.abs(a - b).max()
                                   for a, b in zip(c.maps, back.maps)))
    assert worst <= 1e-10


def test_c04_evolution_residual_20_tensors():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        d = 1 if seed % 2 else 2
        m = moments_of(random_realized(rng, d, 2 + seed % 2), 5)
        worst = max(worst, evolution_check(m, [0.3, 1.0, 2.0]))
    assert worst <= 1e-10


def test_c05_monotone_power_consistency():
    rng = np.random.default_rng(500)
    for d, k in ((1, 3), (2, 2)):
        m = moments_of(random_realized(rng, d, k), 6)
        walk = m
        for j in range(2, 9):
            walk = monotone_convolve(walk, m)
            fast = power_eta(m, float(j) * np.eye(d * d))
            assert fast.distance(walk) <= 1e-9
        half = power_eta(m, 0.5 * np.eye(d * d))
        assert monotone_convolve(half, half).distance(m) <= 1e-10


def test_c06_flow_suite():
    rng = np.random.default_rng(600)
    # (a) sigma = 0: F_t(b) = b - t gamma exactly
    d = 2
    gamma = random_hermitian(rng, d)
    drift = Generator(gamma, RealizedCP(d, 1, np.zeros((d, d)),
                                        np.zeros((d, d))))
    b = 2j * np.eye(d)
    for t in (0.3, 1.0, 2.0):
        assert op_norm(rk4_flow(drift, b, t, t / 64).final
                       - (b - t * gamma)) <= 1e-12
    # (b) arcsine generator from b = i against sqrt(b^2 - 2t)
    g = Generator(np.zeros((1, 1)), UNIT_SIGMA)
    for t in (0.25, 0.5, 1.0):
        got = rk4_flow(g, np.array([[1j]]), t, t / 512).final[0, 0]
        want = np.lib.scimath.sqrt(-1.0 - 2 * t)
        want = want if want.imag > 0 else -want
        assert abs(got - want) <= 1e-8
    # (c) semigroup defect
    gm = Generator(random_hermitian(rng, d, 0.3), random_cp(rng, d, 2))
    bb = 2.5j * np.eye(d)
    s, t = 0.5, 0.75
    two_leg = rk4_flow(gm, rk4_flow(gm, bb, s, s / 256).final, t, t / 256)
    direct = rk4_flow(gm, bb, s + t, (s + t) / 512)
    assert op_norm(two_leg.final - direct.final) <= 1e-6
    # (d) Im-monotonicity on every trajectory stored above
    for st, start in ((two_leg, two_leg.b0.value), (direct, bb)):
        im0 = imag_part(start)
        for w in st.values:
            assert min_eig_hermitian(imag_part(w) - im0) >= -1e-8
    # (e) Picard vs RK4
    pic = picard_flow(gm, bb, 1.0, grid_steps=2048)
    ref = rk4_flow(gm, bb, 1.0, 1 / 512)
    assert op_norm(pic.final - ref.final) <= 1e-6


def test_c07_series_tail_bound_20_draws():
    bound = truncation_tail_bound(4.0, 1.0 / 20.0, 6)
    for seed in range(20):
        rng = np.random.default_rng(700 + seed)
        d = 1 if seed % 2 else 2
        sigma = random_cp(rng, d, 2, a_norm=4.0, v_norm=np.sqrt(0.32))
        gamma = random_hermitian(rng, d, 0.05)
        g = Generator(gamma, sigma)
        m = make_nu(gamma, sigma, MONOTONE, 6)
        resid = flow_vs_series(g, m, 20j * np.eye(d), 1.0)
        assert resid <= bound


def test_c08_recover_sigma_20_draws():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(800 + seed)
        d = 1 if seed % 2 else 2
        sigma = random_cp(rng, d, 2 + seed % 2)
        h = h_sigma_evaluator(sigma)
        radius = 1.0 / op_norm(sigma.A)
        for ell in range(4):
            word = [random_hermitian(rng, d) for _ in range(ell + 1)]
            got = recover_sigma(h, word, d, radius=radius)
            worst = max(worst, np.abs(got - sigma_eval(sigma, word)).max())
    assert worst <= 1e-8


def test_c09_bp_harness():
    schedule = (2, 4, 8, 16, 32, 64)
    rng = np.random.default_rng(900)
    arrays = {
        1: TriangularArray(np.array([[0.3]]), UNIT_SIGMA, schedule),
        2: TriangularArray(random_hermitian(rng, 2, 0.4),
                           random_cp(rng, 2, 2), schedule),
    }
    for d, arr in arrays.items():
        rep = run_bp(arr)
        for s in ("free", "monotone"):
            assert -1.2 <= rep.slopes[s] <= -0.8, (d, s, rep.slopes[s])
        # the boolean species reassembles its own seeds: identically zero
        # distance, reported as exact instead of a fitted slope
        assert rep.exact["boolean"]
    # scalar CLT limits, extrapolated at k = 64: within 1e-3 of the m4 table
    table = {"classical": 3.0, "free": 2.0, "boolean": 1.0, "monotone": 1.5}
    m4 = {}
    for s in table:
        per_k = {}
        for k in (32, 64):
            seed = scalar_atoms([1 / np.sqrt(k), -1 / np.sqrt(k)],
                                [0.5, 0.5], 6)
            per_k[k] = convolution_power(seed, s, k)
        m4[s] = (2 * per_k[64].map_for(4).reshape(-1)[0].real
                 - per_k[32].map_for(4).reshape(-1)[0].real)
        assert abs(m4[s] - table[s]) <= 1e-3
        # same extrapolation at the cumulant level: 1e-10
        c = {k: moments_to_cumulants(per_k[k], s).maps[3].reshape(-1)[0].real
             for k in (32, 64)}
        kappa4 = 2 * c[64] - c[32]
        assert abs(kappa4 - 0.0) <= 1e-10


def test_c10_divisor_and_perturbation():
    rng = np.random.default_rng(1000)
    rep = divisor_convergence_check(random_hermitian(rng, 2, 0.5),
                                    random_cp(rng, 2, 2),
                                    [2, 4, 8, 16, 32])
    assert -1.2 <= rep.slope <= -0.8
    for seed in range(50):
        rng = np.random.default_rng(1100 + seed)
        d = 1 if seed % 2 else 2
        sigma = random_cp(rng, d, 2)
        gamma = random_hermitian(rng, d, 0.3)
        g1 = Generator(gamma, sigma)
        if seed % 3 == 0:
            g2 = Generator(gamma + 0.01 * random_hermitian(rng, d), sigma)
        else:
            bumped = RealizedCP(d, 2,
                                sigma.A + 0.005 * random_hermitian(rng, 2 * d),
                                sigma.V)
            g2 = Generator(gamma, bumped)
        assert generator_perturbation_check(g1, g2, default_probe_grid(d))


def test_c11_cp_positivity_over_corpus():
    corpus = []
    rng = np.random.default_rng(1200)
    for tag in ("free", "boolean", "monotone"):
        for d, k in ((1, 1), (1, 3), (2, 2)):
            gamma = random_hermitian(rng, d, 0.5)
            sigma = random_cp(rng, d, k)
            corpus.append(make_nu(gamma, sigma, tag, 6))
    corpus.append(make_nu(np.zeros((1, 1)), UNIT_SIGMA, MONOTONE, 6))
    corpus.append(make_nu(np.zeros((1, 1)), UNIT_SIGMA, FREE, 6))
    corpus.append(make_nu(np.zeros((1, 1)), UNIT_SIGMA, BOOLEAN, 6))
    for d, k in ((1, 3), (2, 2), (3, 2)):
        corpus.append(moments_of(random_realized(rng, d, k), 6))
        corpus.append(moments_of(random_realized(rng, d, k,
                                                 state="vector"), 6))
    corpus.append(scalar_atoms([1.0, -1.0], [0.5, 0.5], 6))
    corpus.append(scalar_atoms([0.0, 1.0], [0.75, 0.25], 6))
    for m in corpus:
        # the Gram basis grows like (d^2)^(degree+1); stay desk-scale at d=3
        degree = 3 if m.d <= 2 else 2
        verdict, smallest = cp_check(m, degree=degree)
        assert verdict and smallest >= -1e-8

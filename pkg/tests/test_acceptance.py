"""Acceptance criteria 1-9, each with its time budget.

Run just this file with ``pytest tests/test_acceptance.py -v``; the terminal
summary prints one PASS/FAIL line per criterion.
"""

import math
import time

import numpy as np
import pytest

from dwlab import boundary as bd
from dwlab import classification as cl
from dwlab import conjugation as cj
from dwlab import geometry as geo
from dwlab import harmonic as hm
from dwlab import selfmaps as sm
from conftest import GOLDEN_LOG, catalog


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s, budget {self.seconds}s"


@pytest.fixture(scope="module")
def brute_force_orbit():
    """10^6 steps of z+1-1/z from i, plain complex arithmetic, no package code."""
    z = 1j
    v = [1.0]
    for n in range(1, 1_000_001):
        z = z + 1 - 1 / z
        if n in (1000, 500_000, 1_000_000):
            v.append(z.imag)
    return {"v": v, "v_inf": z.imag}


@pytest.mark.acceptance(1)
def test_classification_suite(brute_force_orbit):
    # oracle first: v_n is bounded (the increments have died out by n = 10^6)
    v = brute_force_orbit["v"]
    assert all(b > a for a, b in zip(v, v[1:]))
    assert v[-1] < 4.0 and v[-1] - v[-2] < 1e-5

    with Budget(10):
        c = cl.classify(catalog("disk:z/2"))
        assert c.kind == "elliptic" and abs(c.multiplier - 0.5) <= 1e-9
        c = cl.classify(catalog("disk:z^2"))
        assert c.kind == "elliptic" and abs(c.multiplier) == 0
        c = cl.classify(catalog("disk:z/(2-z)"))
        assert c.kind == "elliptic" and abs(c.multiplier - 0.5) <= 1e-6
        c = cl.classify(catalog("halfplane:2z"))
        assert c.kind == "hyperbolic" and abs(c.multiplier - 2) <= 1e-6
        c = cl.classify(catalog("halfplane:2z+i"))
        assert c.kind == "hyperbolic" and abs(c.multiplier - 2) <= 1e-4
        c = cl.classify(catalog("halfplane:z+1"))
        assert c.kind == "parabolicI" and abs(c.s_inf - GOLDEN_LOG) <= 1e-6
        assert cl.classify(catalog("halfplane:z+1-1/z")).kind == "parabolicI"
        assert cl.classify(catalog("halfplane:z+i")).kind == "parabolicII"


@pytest.mark.acceptance(2)
def test_conjugation_residuals(brute_force_orbit):
    with Budget(30):
        r = np.linspace(0, 0.5, 11)[:, None] * np.exp(2j * np.pi * np.arange(24) / 24)
        z = np.unique(r.ravel())
        k = cj.koenigs(catalog("disk:z/(2-z)"), 40, test_points=z)
        assert np.max(np.abs(k(z) - z / (1 - z))) < 1e-8

        v = cj.valiron(catalog("halfplane:2z+i"), 30)
        assert v.residual_max < 1e-6

        p = cj.pommerenke(catalog("halfplane:z+1"))
        assert abs(p.parameter - 1) <= 1e-12 and p.residual_max < 1e-12

        p = cj.pommerenke(catalog("halfplane:z+1-1/z"), 1000)
        assert p.residual_max < 1e-4
        b_oracle = 1 / brute_force_orbit["v_inf"]
        assert abs(p.parameter - b_oracle) <= 0.01 * b_oracle


@pytest.mark.acceptance(3)
def test_harmonic_calibration():
    with Budget(120):
        h = 1 / 256
        arcs = (hm.Arc(0, math.pi / 2, "A1"), hm.Arc(math.pi / 2, math.pi, "A2"),
                hm.Arc(math.pi, 3 * math.pi / 2, "A3"), hm.Arc(3 * math.pi / 2, 2 * math.pi, "A4"))
        region = hm.build_grid_region(hm.RegionSpec(0j, arcs=arcs), h)
        groups = {math.pi / 2: ["A1"], math.pi: ["A1", "A2"], 3 * math.pi / 2: ["A1", "A2", "A3"]}
        for theta, tags in groups.items():
            est = hm.harmonic_measure(0, tags, region)
            assert abs(est.value - theta / (2 * math.pi)) <= 0.01
            assert est.residual < 1e-8
        for z in (0j, 0.3 + 0.4j, -0.6 + 0.1j):
            parts = [hm.harmonic_measure(z, t, region).value for t in ("A1", "A2", "A3")]
            whole = hm.harmonic_measure(z, ["A1", "A2", "A3"], region).value
            assert abs(sum(parts) - whole) <= 0.02


def _automorphism():
    return sm.from_callable(geo.disk_automorphism(0.2, 0.3), "disk", "automorphism")


@pytest.mark.acceptance(4)
def test_lemma_verifiers():
    with Budget(300):
        rng = np.random.default_rng(2024)
        r = 0.45 * np.sqrt(rng.random(50))
        cp_points = r * np.exp(2j * np.pi * rng.random(50))
        schwarz = [
            ("automorphism", _automorphism(), hm.ClosedDisk(0.4, 0.1)),
            ("z^2", catalog("disk:z^2"), hm.ClosedDisk(0.5, 0.2)),
            ("z/2", catalog("disk:z/2"), hm.ClosedDisk(0, 0.1)),
        ]
        equality_margin = {}
        for h in (1 / 128, 1 / 256):
            eps = hm.eps_grid(h)
            for name, m, E in schwarz:
                rep = hm.verify_schwarz_lemma(m, E, h=h, n_points=50, seed=1)
                assert len(rep.points) == 50 and not rep.vacuous, name
                assert rep.violations == 0, (name, h, rep.min_margin)
                if name == "automorphism":
                    equality_margin[h] = float(np.max(np.abs(rep.margins)))
                    assert equality_margin[h] <= eps

            rep = hm.verify_conditional_probability(cp_points, hm.Arc(0, math.pi / 2), hm.CircleCurve(0.5), h=h)
            assert len(rep.points) == 50 and rep.violations == 0, (h, rep.min_margin)

            rep = hm.verify_conditional_probability(0, hm.Arc(0, 2 * math.pi), hm.CircleCurve(0.9), h=h)
            assert abs(rep.min_margin) < 1e-9
        # equality case: discretisation error shrinks with h
        assert equality_margin[1 / 256] < equality_margin[1 / 128]


@pytest.mark.acceptance(5)
def test_omega_decay_and_convergence():
    with Budget(300):
        h = 1 / 256
        dec = hm.omega_decay(catalog("disk:z/(2-z)"), N=8, h=h)
        assert dec.nonincreasing_after_first_drop
        assert dec.first_below is not None and min(dec.omegas) < 0.05

        # z^2 is inner: the free boundary never loses its share of the circle.
        # From n = 8 on, z^(2^n) varies on a scale below 6h and the grid
        # level sets start touching the circle, so the check stops at n = 7.
        inner = hm.omega_decay(catalog("disk:z^2"), N=7, h=h)
        assert np.all(inner.omegas > 0.95), inner.omegas

        m = catalog("disk:z/(2-z)")
        rep = bd.convergence_experiment(m, 30, 500, cl.classify(m))
        assert rep.final["fraction_converged"] >= 0.99
        m = catalog("disk:z^2")
        rep = bd.convergence_experiment(m, 10, 500, cl.classify(m))
        assert rep.final["fraction_mod1"] >= 0.99


@pytest.mark.acceptance(6)
def test_boundary_escape():
    with Budget(60):
        m = catalog("halfplane:2z+i")
        rep = bd.convergence_experiment(m, 12, 500, cl.classify(m), seed=0, escape_modulus=1e3, min_abs_x=0.1)
        assert rep.final["fraction_converged"] == 1.0
        assert rep.final["fraction_undecided"] == 0.0
        # exact oracle: phi_12(x) = 2^12 x + (2^12 - 1) i
        for s in rep.per_sample:
            x = s["zeta"][0]
            w = complex(*s["value"])
            assert abs(w - (4096 * x + 4095j)) <= 1e-9 * abs(w)

        m = catalog("halfplane:z+1-1/z")
        rep = bd.convergence_experiment(m, 100, 500, cl.classify(m), seed=0, escape_modulus=50)
        assert rep.final["fraction_converged"] >= 0.99


@pytest.mark.acceptance(6)
def test_boundary_escape_brute_force_oracle():
    # independent route: iterate slightly above the line with plain arithmetic
    rng = np.random.default_rng(0)
    x = bd.boundary_samples("halfplane", 500, rng).real
    z = x + 1e-12j
    passed = np.zeros(len(z), dtype=bool)
    for _ in range(100):
        z = z + 1 - 1 / z
        passed |= np.abs(z) > 50
    assert np.mean(passed) >= 0.99


@pytest.mark.acceptance(7)
def test_slit_comparison():
    with Budget(120):
        arc = hm.Arc(0, math.pi / 2, "A")
        rep = hm.verify_slit_comparison(arc, [(64, 0.9), (256, 0.999)], 1 / 256)
        assert rep.passed, rep.to_dict()
        assert rep.rhs_decreasing
        assert abs(rep.configs[-1][2] - rep.lhs) <= 0.05


@pytest.mark.acceptance(8)
def test_exhaustion_invariants():
    with Budget(60):
        h = 1 / 256
        for name in ("disk:z/2", "disk:z/(2-z)"):
            m = catalog(name)
            t0 = hm.choose_t0(m, h)
            ex = hm.build_exhaustion(m, t0, 8, h)
            assert not any(ex.subset_violations.values()), (name, ex.subset_violations)
            assert not any(ex.incl_violations.values()), (name, ex.incl_violations)
            if name == "disk:z/2":
                for L in ex.levels:
                    r = 2**L.n * math.tanh(t0 / 2)
                    if r < 1 - 2 * h:
                        assert abs(L.max_radius - r) <= 2 * h
                    else:
                        assert L.n_free_cells == 0 and L.max_radius >= 1 - 2 * h


@pytest.mark.acceptance(9)
def test_type2_escape():
    with Budget(10):
        m = catalog("halfplane:z+i")
        z = 1 + 1j
        rep = cl.verify_type2_escape(m, z, 1000)
        assert rep.im_final == z.imag + 1000
        assert rep.rho_decreasing
        assert rep.rho_final < 1e-3

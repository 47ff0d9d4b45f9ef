import math

import numpy as np
import pytest
from scipy.integrate import quad

from dwlab import harmonic as hm
from dwlab import selfmaps as sm
from dwlab.errors import GridError, InvalidInput, PreconditionError
from conftest import catalog

H = 1 / 128


def poisson_arc(z, a, b):
    """Harmonic measure of the arc [a, b] at z, by quadrature of the Poisson kernel."""
    z = complex(z)
    k = lambda t: (1 - abs(z) ** 2) / abs(np.exp(1j * t) - z) ** 2 / (2 * math.pi)
    return quad(k, a, b, limit=200)[0]


@pytest.fixture(scope="module")
def disk128():
    arcs = (hm.Arc(0, math.pi / 2, "Q1"), hm.Arc(math.pi / 2, math.pi, "Q2"), hm.Arc(math.pi, 2 * math.pi, "LOW"))
    return hm.build_grid_region(hm.RegionSpec(0j, arcs=arcs), H)


def test_allowed_spacings():
    with pytest.raises(InvalidInput):
        hm.build_grid_region(hm.RegionSpec(), 0.01)
    assert hm.eps_grid(1 / 256) == 5 / 256


def test_disk_area():
    r = hm.build_grid_region(hm.RegionSpec(), 1 / 256)
    assert abs(r.n_interior * r.h**2 / math.pi - 1) < 0.02


def test_region_invariants(disk128):
    r = disk128
    assert r.interior[r.seed_index]
    # every interior node has four classified neighbours
    I, J = np.nonzero(r.interior)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = (I + di, J + dj)
        assert np.all(r.interior[nb] | (r.labels[nb] != 0))


def test_slit_nodes_are_boundary():
    slit = hm.Slit(1, 0.5, "S")
    r = hm.build_grid_region(hm.RegionSpec(-0.2j, (slit,)), H)
    on = slit.distance(r.Z) <= H / 2
    on &= np.abs(r.Z) < 1
    assert on.any() and not (on & r.interior).any()
    adjacent = on & (r.labels != 0)
    assert np.all(r.label_mask("S")[adjacent])


def test_seed_on_slit_rejected():
    with pytest.raises(InvalidInput):
        hm.build_grid_region(hm.RegionSpec(0.99, (hm.Slit(1, 0.5),)), H)
    with pytest.raises(InvalidInput):
        hm.build_grid_region(hm.RegionSpec(1.5), H)


def test_symmetric_arcs(disk128):
    r = disk128
    assert hm.harmonic_measure(0, ["Q1", "Q2", "LOW"], r).value == pytest.approx(1, abs=1e-12)
    assert hm.harmonic_measure(0, "circle", r).value == pytest.approx(1, abs=1e-12)
    assert hm.harmonic_measure(0, "LOW", r).value == pytest.approx(0.5, abs=0.01)
    assert hm.harmonic_measure(0, "Q1", r).value == pytest.approx(0.25, abs=0.01)


@pytest.mark.parametrize("z", [0.3 + 0.2j, -0.5 + 0.1j, 0.1 - 0.7j, 0.8j])
def test_poisson_oracle(disk128, z):
    got = hm.harmonic_measure(z, "Q1", disk128).value
    assert got == pytest.approx(poisson_arc(z, 0, math.pi / 2), abs=0.01)


def test_range_additivity_harmonicity(disk128):
    r = disk128
    eps = hm.eps_grid(H)
    for z in [0.2 + 0.3j, -0.6 - 0.2j, 0.05]:
        a = hm.harmonic_measure(z, "Q1", r)
        b = hm.harmonic_measure(z, "Q2", r)
        ab = hm.harmonic_measure(z, ["Q1", "Q2"], r)
        for e in (a, b, ab):
            assert 0 <= e.value <= 1
            assert e.residual < 1e-8
        assert abs(a.value + b.value - ab.value) <= 2 * eps


def test_sor_matches_direct():
    r = hm.build_grid_region(hm.RegionSpec(0j, arcs=(hm.Arc(0, math.pi),)), H)
    U, res, _ = hm.solve_field(r, "E")
    V, res2, sweeps = hm.solve_field(r, "E", method="sor")
    assert sweeps > 0 and res2 < 1e-6
    assert np.nanmax(np.abs(U - V)) < 1e-5
    assert hm.interpolate(V, r, 0) == pytest.approx(0.5, abs=0.01)


def test_interior_point_required(disk128):
    with pytest.raises(PreconditionError):
        hm.harmonic_measure(0.999, "Q1", disk128)


@pytest.mark.slow
def test_grid_convergence():
    arc = hm.Arc(0, math.pi / 2)
    z = 0.3 + 0.2j
    vals = [hm.harmonic_measure(z, "E", hm.build_grid_region(hm.RegionSpec(z, arcs=(arc,)), h)).value
            for h in hm.ALLOWED_H]
    assert abs(vals[1] - vals[2]) < abs(vals[0] - vals[1])


def test_choose_t0_examples():
    t = hm.choose_t0(catalog("disk:z/2"), 1 / 256)
    assert t >= 0.5
    # sublevel disk |z| < 2 tanh(t/2) stays 10h off the circle
    assert 2 * math.tanh(t / 2) < 1 - 10 / 256
    for name in ("disk:z/(2-z)", "disk:z^2"):
        m = catalog(name)
        t = hm.choose_t0(m, H)
        ex = hm.build_exhaustion(m, t, 1, H)
        region = ex.levels[0].region
        assert np.min(1 - np.abs(region.Z[region.interior])) >= 10 * H


def test_choose_t0_needs_elliptic():
    with pytest.raises(PreconditionError):
        hm.choose_t0(sm.conjugate(catalog("halfplane:z+1"), 1), H)


def test_exhaustion_z_half():
    m = catalog("disk:z/2")
    t0 = hm.choose_t0(m, H)
    ex = hm.build_exhaustion(m, t0, 4, H)
    assert ex.ok
    for L in ex.levels:
        assert L.omega[L.region.seed_index]
        r = 2**L.n * math.tanh(t0 / 2)
        if r < 1 - 2 * H:
            assert abs(L.max_radius - r) <= 2 * H
        else:
            assert L.n_free_cells == 0


def test_exhaustion_contains_p():
    m = catalog("disk:blaschke(0.5)")
    ex = hm.build_exhaustion(m, hm.choose_t0(m, H), 5, H)
    assert ex.ok
    assert all(L.omega[L.region.seed_index] for L in ex.levels)


def test_omega_decay_z_half():
    m = catalog("disk:z/2")
    dec = hm.omega_decay(m, N=4, h=H)
    r0 = math.tanh(dec.t0 / 2)
    for n, w, *_ in dec.series:
        if r0 * 2**n < 1 - 2 * H:
            assert w == pytest.approx(1, abs=1e-9)
        elif r0 * 2**n >= 1:
            assert w == 0


def test_omega_decay_csv(tmp_path):
    dec = hm.omega_decay(catalog("disk:z/(2-z)"), N=3, h=H)
    path = tmp_path / "o.csv"
    dec.write_csv(path)
    lines = path.read_bytes().split(b"\r\n")
    assert lines[0] == b"n,omega,residual,h" and len([x for x in lines if x]) == 4


def test_schwarz_equality_case():
    # a rotation is an automorphism: both sides coincide up to grid effects
    rot = sm.parse_map("(0.6+0.8i)*z", "disk")
    E = hm.ClosedDisk(0.5, 0.1)
    rep = hm.verify_schwarz_lemma(rot, E, h=H, n_points=10)
    assert rep.passed
    assert np.max(np.abs(rep.margins)) <= rep.eps_grid


def test_schwarz_z_half():
    rep = hm.verify_schwarz_lemma(catalog("disk:z/2"), hm.ClosedDisk(0, 0.1), h=H, n_points=20)
    assert rep.passed and len(rep.points) == 20


def test_schwarz_vacuous():
    rep = hm.verify_schwarz_lemma(catalog("disk:z/2"), hm.ClosedDisk(0.9, 0.05), h=H)
    assert rep.vacuous and rep.passed


def test_conditional_probability_examples():
    E = hm.Arc(0, math.pi / 2)
    F = hm.CircleCurve(0.5)
    rep = hm.verify_conditional_probability([0, 0.1 + 0.2j], E, F, h=H)
    assert rep.passed
    with pytest.raises(PreconditionError):
        hm.verify_conditional_probability(0.7, E, F, h=H)


def test_conditional_probability_equality():
    rep = hm.verify_conditional_probability(0, hm.Arc(0, 2 * math.pi), hm.CircleCurve(0.9), h=H)
    assert rep.lhs[0] == pytest.approx(1, abs=1e-9)
    assert rep.notes["omega_F"][0] == pytest.approx(1, abs=1e-9)
    assert rep.notes["sup_F_omega_E"] == pytest.approx(1, abs=1e-9)
    assert abs(rep.min_margin) < 1e-9


def test_slit_comparison_guards():
    arc = hm.Arc(0, math.pi / 2)
    with pytest.raises(InvalidInput):
        hm.verify_slit_comparison(arc, [], H)
    rep = hm.verify_slit_comparison(arc, [(0, 0.9), (16, 0.9)], H)
    assert rep.configs[0][4] and rep.passed


def test_pgm_export(tmp_path):
    r = hm.build_grid_region(hm.RegionSpec(0j, (hm.Slit(1j, 0.5),)), H)
    data = r.to_pgm_bytes()
    head, body = data.split(b"\n255\n", 1)
    w, h = map(int, head.split(b"\n")[1].split())
    img = np.frombuffer(body, dtype=np.uint8).reshape(h, w)
    assert set(np.unique(img)) == {0, 128, 255}
    # top row is the largest imaginary part: the slit sits in the upper half
    top = img[: h // 2]
    col = w // 2
    assert (top[:, col] == 128).any()
    assert img[h // 2, col] == 255

import math

import numpy as np
import pytest

from dwlab import conjugation as cj
from dwlab import geometry as geo
from dwlab import selfmaps as sm
from dwlab.errors import InvalidInput, MisclassificationError
from conftest import catalog


def test_grid_is_a_hyperbolic_ball():
    pts = cj.hyperbolic_ball_grid(0, "disk")
    assert len(pts) >= 100
    assert np.all(geo.hyp_dist_disk(pts, 0) <= 2 + 1e-12)
    pts = cj.hyperbolic_ball_grid(1j, "halfplane")
    assert np.all(geo.hyp_dist_halfplane(pts, 1j) <= 2 + 1e-12)


def test_koenigs_examples():
    c = cj.koenigs(catalog("disk:z/2"))
    assert c.residual_max < 1e-12
    z = np.array([0.3, -0.2j])
    np.testing.assert_allclose(c(z), z, atol=1e-12)
    with pytest.raises(cj.BottcherCase):
        cj.koenigs(catalog("disk:z^2"))


def test_koenigs_closed_form():
    m = catalog("disk:z/(2-z)")
    r = np.linspace(0, 0.5, 6)[:, None] * np.exp(1j * np.linspace(0, 2 * np.pi, 16, endpoint=False))
    z = r.ravel()
    c = cj.koenigs(m, 40, test_points=z)
    assert np.max(np.abs(c(z) - z / (1 - z))) < 1e-8
    # closed form: sigma(phi(z)) = sigma(z)/2
    s = lambda w: w / (1 - w)
    np.testing.assert_allclose(s(m(z)), s(z) / 2, atol=1e-14)
    assert c.residual_max < 1e-8


def test_koenigs_rejects_unimodular():
    with pytest.raises(InvalidInput):
        cj.koenigs(sm.parse_map("(0.6+0.8i)*z", "disk"))


def test_valiron_examples():
    c = cj.valiron(catalog("halfplane:2z"))
    assert c.residual_max < 1e-12
    c = cj.valiron(catalog("halfplane:2z+i"), 30)
    assert c.residual_max < 1e-6
    assert c.extra["isogonality"][-1][1] < 1e-3
    # sigma(z) -> (z + i)/c with c > 0
    z = np.array([1 + 1j, -2 + 0.5j])
    ratio = (z + 1j) / c(z)
    assert np.allclose(ratio, ratio[0]) and abs(ratio[0].imag) < 1e-9 and ratio[0].real > 0
    with pytest.raises(MisclassificationError):
        cj.valiron(catalog("halfplane:z+1"))


def test_pommerenke_examples():
    c = cj.pommerenke(catalog("halfplane:z+1"))
    assert c.parameter == pytest.approx(1, abs=1e-12)
    assert c.residual_max < 1e-12
    with pytest.raises(MisclassificationError):
        cj.pommerenke(catalog("halfplane:z+i"))


def test_pommerenke_normalization():
    c = cj.pommerenke(catalog("halfplane:z+1-1/z"), 1000)
    assert c.extra["sigma_at_i"] == 1j


@pytest.mark.parametrize(
    "build, name, N",
    [
        (cj.koenigs, "disk:z/(2-z)", 20),
        (cj.koenigs, "disk:blaschke(0.5)", 20),
        (cj.valiron, "halfplane:2z+i", 15),
        (cj.pommerenke, "halfplane:z+1-1/z", 500),
    ],
)
def test_residual_decay(build, name, N):
    m = catalog(name)
    a = build(m, N)
    b = build(m, 2 * N, test_points=a.test_points)
    assert b.residual_max <= 1.1 * a.residual_max + 1e-15


def test_orbit_consistency():
    m = catalog("disk:z/(2-z)")
    c = cj.koenigs(m)
    o = sm.iterate(m, 0.3 + 0.1j, 6)
    s0 = c(o.points[0])
    for k in range(1, 7):
        assert abs(c(o.points[k]) - c.parameter**k * s0) <= max(c.residual_max, 1e-15) * k * 10

    m = catalog("halfplane:2z+i")
    c = cj.valiron(m)
    o = sm.iterate(m, 1 + 1j, 5)
    s0 = c(o.points[0])
    for k in range(1, 6):
        assert abs(c(o.points[k]) - c.parameter**k * s0) <= c.residual_max * k * abs(c(o.points[k])) + 1e-12

    m = catalog("halfplane:z+1-1/z")
    c = cj.pommerenke(m)
    o = sm.iterate(m, 1j, 5)
    s0 = c(o.points[0])
    for k in range(1, 6):
        assert abs(c(o.points[k]) - (s0 + k * c.parameter)) <= c.residual_max * k


def test_polygonal_path():
    o = sm.iterate(catalog("halfplane:z+1"), 1j, 5)
    p = cj.PolygonalPath.from_orbit(-2.0, o.points)
    assert p.vertices[0] == -2 and p.vertices[1] == 1j
    assert p.arc_length[-1] == pytest.approx(math.hypot(2, 1) + 5)
    assert len(p.truncated(2).vertices) == 4
    assert np.all(p.sample().imag > 0)
    with pytest.raises(InvalidInput):
        cj.PolygonalPath(0.0, np.array([1j, 1j]))


def test_parabolic_asymptotics_translation():
    rep = cj.parabolic_asymptotics(catalog("halfplane:z+1"), 200, anchor=-1.0)
    assert rep["v_ratio_max_dev_tail"] == 0
    n = np.arange(196, 201)
    np.testing.assert_allclose(rep["v_over_u_tail"], 1 / n)
    assert rep["re_sigma_min"] >= -1 - 1 - 1e-12
    assert rep["b"] == pytest.approx(1)


def test_parabolic_asymptotics_examples():
    # Im(z + 1 - 1/z) = v (1 + 1/|z|^2), so v_{n+1}/v_n - 1 = 1/|z_n|^2 exactly
    m = catalog("halfplane:z+1-1/z")
    rep = cj.parabolic_asymptotics(m, 1000)
    z = sm.iterate(m, 1j, 1000).points
    np.testing.assert_allclose(np.array(rep["v_ratio_tail"]) - 1, 1 / np.abs(z[-6:-1]) ** 2, rtol=1e-6)
    assert rep["v_ratio_max_dev_tail"] == pytest.approx(1 / abs(z[800]) ** 2, rel=1e-6)
    assert rep["v_ratio_tail"][-1] - 1 < 1.02e-6
    rep = cj.parabolic_asymptotics(catalog("halfplane:z+i"), 100)
    n = np.arange(96, 101)
    np.testing.assert_allclose(rep["v_ratio_tail"], (n + 1) / n, rtol=1e-12)


def test_csv_export(tmp_path):
    c = cj.koenigs(catalog("disk:z/(2-z)"))
    path = tmp_path / "k.csv"
    c.write_csv(path)
    lines = path.read_bytes().split(b"\r\n")
    assert lines[0] == b"re_z,im_z,re_sigma,im_sigma,residual"
    assert len([x for x in lines[1:] if x]) == len(c.test_points)

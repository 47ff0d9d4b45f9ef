import cmath
import math

import numpy as np
import pytest

from dwlab import classification as cl
from dwlab import geometry as geo
from dwlab import selfmaps as sm
from conftest import GOLDEN_LOG, catalog

EXPECTED = {
    "disk:z/2": "elliptic",
    "disk:z^2": "elliptic",
    "disk:z/(2-z)": "elliptic",
    "disk:blaschke(0.5)": "elliptic",
    "halfplane:2z": "hyperbolic",
    "halfplane:2z+i": "hyperbolic",
    "halfplane:z+1": "parabolicI",
    "halfplane:z+1-1/z": "parabolicI",
    "halfplane:z+i": "parabolicII",
}


def test_denjoy_wolff_examples():
    assert cl.find_denjoy_wolff(catalog("disk:z/2")).point == 0
    p, loc = cl.find_denjoy_wolff(catalog("disk:z^2"))
    assert p == 0 and loc == "interior"
    p, loc = cl.find_denjoy_wolff(catalog("halfplane:2z"))
    assert p is geo.INF and loc == "boundary"


def test_multiplier_examples():
    m = catalog("disk:z/(2-z)")
    assert cl.multiplier(m, cl.find_denjoy_wolff(m)).value == pytest.approx(0.5, abs=1e-12)
    m = catalog("halfplane:2z")
    assert cl.multiplier(m, cl.find_denjoy_wolff(m)).value == pytest.approx(2, abs=1e-12)
    m = catalog("halfplane:z+1")
    assert cl.multiplier(m, cl.find_denjoy_wolff(m)).value == pytest.approx(1, abs=1e-12)


def test_classify_examples():
    c = cl.classify(catalog("halfplane:z+1"))
    assert c.kind == "parabolicI"
    assert c.s_inf == pytest.approx(GOLDEN_LOG, abs=1e-6)
    assert cl.classify(catalog("halfplane:z+i")).kind == "parabolicII"
    c = cl.classify(catalog("disk:z/(2-z)"))
    assert c.kind == "elliptic" and abs(c.dw_point) < 1e-10
    assert c.multiplier == pytest.approx(0.5)


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_catalog_kinds(name):
    c = cl.classify(catalog(name))
    assert c.kind == EXPECTED[name]
    if c.kind == "hyperbolic":
        assert c.multiplier > 1 + c.thresholds["tau_A"]
    if c.kind.startswith("parabolic"):
        assert abs(c.multiplier - 1) <= c.thresholds["tau_A"]
    if c.kind == "parabolicI":
        assert c.s_inf > c.thresholds["tau_s"]


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_base_point_independence(name):
    m = catalog(name)
    rng = np.random.default_rng(7)
    pts = sm.sample_domain(m.domain, 5, rng)
    if m.domain == "disk":
        pts = 0.9 * pts
    kinds = {cl.classify(m, z0=complex(z)).kind for z in pts}
    assert kinds == {EXPECTED[name]}


@pytest.mark.parametrize("name", ["halfplane:2z+i", "halfplane:z+1", "halfplane:z+i", "halfplane:z+1-1/z"])
@pytest.mark.parametrize("p", [1, cmath.exp(0.7j)])
def test_conjugation_invariance(name, p):
    hp = catalog(name)
    disk = sm.conjugate(hp, p)
    a, b = cl.classify(hp), cl.classify(disk)
    assert a.kind == b.kind
    assert abs(complex(b.dw_point) - p) < 1e-6
    tol = 3 * (a.multiplier_error + b.multiplier_error) + 1e-9
    assert abs(a.multiplier - b.multiplier) <= max(tol, 1e-6)


def test_elliptic_automorphism_rejected():
    rot = sm.parse_map("(0.6+0.8i)*z", "disk")
    assert cl.classify(rot).kind == "elliptic_automorphism"


@pytest.mark.parametrize("name, lam", [("disk:z/2", 0.5), ("disk:z/(2-z)", 0.5), ("disk:blaschke(0.5)", 0.5)])
def test_elliptic_geometric_rate(name, lam):
    m = catalog(name)
    o = sm.iterate(m, 0.6, 40)
    d = geo.hyp_dist_disk(o.points, 0, check=False)
    ratios = d[1:] / d[:-1]
    good = d[1:] > 1e-12
    assert abs(ratios[good][-1] - lam) < 1e-3


def test_type2_escape_examples():
    m = catalog("halfplane:z+i")
    rep = cl.verify_type2_escape(m, 1 + 1j, 1000)
    assert rep.precondition_ok
    assert rep.im_final == pytest.approx(1001)
    n, rho = rep.rho_to_base[-1]
    t = 1 / math.sqrt(1 + 4 * (n + 1) ** 2)
    assert rho == pytest.approx(math.log((1 + t) / (1 - t)), rel=1e-9)
    assert rep.rho_decreasing
    assert not cl.verify_type2_escape(catalog("halfplane:z+1"), 1 + 1j, 100).precondition_ok


def test_report_is_json_ready():
    import json

    c = cl.classify(catalog("halfplane:z+1-1/z"))
    d = json.loads(json.dumps(c.to_dict()))
    assert d["kind"] == "parabolicI" and d["dw_point"] == "inf"
    assert d["thresholds"] == {"tau_A": 1e-4, "tau_s": 1e-3, "N_max": 100000}

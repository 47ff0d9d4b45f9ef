"""Koenigs, Valiron and Pommerenke conjugations built from truncated iterates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import classification as cl
from . import geometry as geo
from . import selfmaps as sm
from .errors import InvalidInput, MisclassificationError

KOENIGS_N = 40
VALIRON_N = 30
POMMERENKE_N = 1000
B_TOL = 1e-3
TAIL_FRACTION = 0.2


class BottcherCase(InvalidInput):
    """phi'(p) = 0: the linearising map does not exist, a Boettcher coordinate would be needed."""


@dataclass
class Conjugation:
    kind: str  # koenigs | valiron | pommerenke
    evaluator: Callable
    parameter: complex | float
    N: int
    residual_max: float
    residual_mean: float
    test_points: np.ndarray = field(repr=False, default=None)
    residuals: np.ndarray = field(repr=False, default=None)
    extra: dict = field(default_factory=dict)

    def __call__(self, z):
        return self.evaluator(z)

    def to_dict(self):
        param = self.parameter
        if isinstance(param, complex):
            param = [param.real, param.imag]
        return {
            "kind": self.kind,
            "parameter": param,
            "N": self.N,
            "residual_max": self.residual_max,
            "residual_mean": self.residual_mean,
            "test_points": int(len(self.test_points)),
            "extra": cl._jsonable(self.extra),
        }

    def write_csv(self, path):
        values = self.evaluator(self.test_points)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["re_z", "im_z", "re_sigma", "im_sigma", "residual"])
            for z, s, r in zip(self.test_points, values, self.residuals):
                w.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(s.real)), repr(float(s.imag)),
                            repr(float(r))])


def hyperbolic_ball_grid(center, domain: str, radius: float = 2.0, n_radial: int = 10, n_angular: int = 12
                         ) -> np.ndarray:
    """Center plus n_radial x n_angular points on hyperbolic circles of radius up to ``radius``."""
    rhos = np.linspace(radius / n_radial, radius, n_radial)
    r = np.tanh(rhos / 2)
    th = 2 * np.pi * np.arange(n_angular) / n_angular
    pts = np.concatenate([[0j], (r[:, None] * np.exp(1j * th[None, :])).ravel()])
    c = complex(center)
    if domain == "disk":
        return geo.Mobius(1, c, c.conjugate(), 1)(pts)
    to_h, _ = geo.cayley(1)
    return c.real + c.imag * to_h(pts)


def iterate_array(m: sm.SelfMap, z, n: int):
    z = np.asarray(z, dtype=complex)
    for _ in range(n):
        z = m.fn(z)
    return z


def _elliptic_context(m, classification):
    if classification is None:
        classification = cl.classify(m)
    if classification.kind == "elliptic_automorphism":
        raise InvalidInput("|phi'(p)| = 1: no Koenigs linearisation")
    if classification.kind != "elliptic":
        raise MisclassificationError(f"Koenigs conjugation needs an elliptic map, got {classification.kind}")
    return classification


def koenigs(m: sm.SelfMap, N: int = KOENIGS_N, classification=None, test_points=None) -> Conjugation:
    """sigma_N(z) = lambda^-N (phi_N(z) - p), so sigma_N o phi ~ lambda sigma_N."""
    c = _elliptic_context(m, classification)
    lam = complex(c.multiplier)
    p = complex(c.dw_point)
    if abs(lam) == 0.0:
        raise BottcherCase("phi'(p) = 0: super-attracting fixed point, Koenigs map undefined")
    if abs(lam) >= 1.0:
        raise InvalidInput("|phi'(p)| = 1: no Koenigs linearisation")
    scale = lam**-N

    def sigma(z):
        return (iterate_array(m, z, N) - p) * scale

    pts = hyperbolic_ball_grid(p, m.domain) if test_points is None else np.asarray(test_points, dtype=complex)
    res = np.abs(sigma(m.fn(pts)) - lam * sigma(pts))
    return Conjugation("koenigs", sigma, lam, N, float(res.max()), float(res.mean()), pts, res,
                       {"p": p})


def valiron(m: sm.SelfMap, N: int = VALIRON_N, classification=None, test_points=None) -> Conjugation:
    """sigma_N(z) = phi_N(z) / Im phi_N(i) on the standard form, so sigma_N o phi ~ A sigma_N."""
    if classification is None:
        classification = cl.classify(m)
    if classification.kind != "hyperbolic":
        raise MisclassificationError(f"Valiron conjugation needs a hyperbolic map, got {classification.kind}")
    A = float(classification.multiplier)
    std = classification.standard_form or m
    v_N = float(iterate_array(std, 1j, N).imag)

    def sigma(z):
        return iterate_array(std, z, N) / v_N

    pts = hyperbolic_ball_grid(1j, "halfplane") if test_points is None else np.asarray(test_points, dtype=complex)
    s = sigma(pts)
    res = np.abs(sigma(std.fn(pts)) - A * s) / np.abs(s)
    iso = []
    for y in (1e2, 1e3, 1e4):
        w = complex(sigma(np.array([1j * y]))[0])
        iso.append((y, abs(math.atan2(w.real, w.imag))))
    return Conjugation("valiron", sigma, A, N, float(res.max()), float(res.mean()), pts, res,
                       {"v_N": v_N, "isogonality": iso})


def _b_series(orbit: sm.Orbit):
    return np.diff(orbit.u) / orbit.v[:-1]


def pommerenke(m: sm.SelfMap, N: int = POMMERENKE_N, classification=None, test_points=None) -> Conjugation:
    """sigma_N = M_N o phi_N with M_N(z) = (z - u_N)/v_N, so sigma_N o phi ~ sigma_N + b.

    b is the mean of (u_{n+1} - u_n)/v_n over the last 20% of the orbit of i.
    A b-estimate below 1e-3 that keeps shrinking is taken as evidence of a
    zero-step map and raised as MisclassificationError.
    """
    if classification is not None and classification.kind != "parabolicI":
        raise MisclassificationError(f"Pommerenke conjugation needs a type I parabolic map, "
                                     f"got {classification.kind}")
    if classification is not None and classification.standard_form is not None:
        std = classification.standard_form
    elif m.domain == "halfplane":
        std = m
    else:
        std = cl.classify(m).standard_form
    orbit = sm.iterate(std, 1j, N)
    if orbit.escaped or orbit.stride != 1:
        raise InvalidInput("orbit of i did not stay representable for N steps")
    q = _b_series(orbit)
    start = int((1 - TAIL_FRACTION) * len(q))
    b = float(np.mean(q[start:]))
    b_half = float(np.mean(q[int(0.4 * len(q)): int(0.5 * len(q))]))
    if abs(b) < B_TOL and abs(b) <= abs(b_half):
        raise MisclassificationError(
            "b-estimate vanishes: the map behaves as zero-step (type II)",
            {"b": b, "b_half": b_half, "N": N},
        )
    u_N, v_N = orbit.u[-1], orbit.v[-1]

    def sigma(z):
        return (iterate_array(std, z, N) - u_N) / v_N

    pts = hyperbolic_ball_grid(1j, "halfplane") if test_points is None else np.asarray(test_points, dtype=complex)
    res = np.abs(sigma(std.fn(pts)) - sigma(pts) - b)
    return Conjugation("pommerenke", sigma, b, N, float(res.max()), float(res.mean()), pts, res,
                       {"u_N": u_N, "v_N": v_N, "b_half_window": b_half, "sigma_at_i": sigma(np.array([1j]))[0]})


# ---------------------------------------------------------------------------
# asymptotics along the orbit of i


@dataclass
class PolygonalPath:
    """[x, i] u [i, z_1] u [z_1, z_2] u ... for a real anchor x."""

    anchor: float
    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=complex)
        if v[0] != self.anchor:
            v = np.concatenate([[complex(self.anchor)], v])
        if np.any(np.abs(np.diff(v)) == 0):
            raise InvalidInput("consecutive path vertices must be distinct")
        if np.any(v[1:].imag < 0):
            raise InvalidInput("path vertices must lie in the closed upper half-plane")
        self.vertices = v

    @classmethod
    def from_orbit(cls, x: float, orbit_points) -> "PolygonalPath":
        return cls(float(x), np.asarray(orbit_points, dtype=complex))

    @property
    def lengths(self) -> np.ndarray:
        return np.abs(np.diff(self.vertices))

    @property
    def arc_length(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.lengths)])

    def truncated(self, depth: int) -> "PolygonalPath":
        """Keep x, i and the first ``depth`` orbit vertices."""
        return PolygonalPath(self.anchor, self.vertices[: depth + 2])

    def sample(self, per_segment: int = 8, t_min: float = 1e-3) -> np.ndarray:
        """Points along every segment; the anchor itself (on the real line) is skipped."""
        t = np.linspace(0, 1, per_segment, endpoint=False)
        a, b = self.vertices[:-1], self.vertices[1:]
        pts = a[:, None] + t[None, :] * (b - a)[:, None]
        pts[0, 0] = a[0] + t_min * (b[0] - a[0])
        return np.concatenate([pts.ravel(), self.vertices[-1:]])


def parabolic_asymptotics(m: sm.SelfMap, N: int = POMMERENKE_N, classification=None, anchor: float = 0.0,
                          fixed_n: int = 10) -> dict:
    if classification is None:
        classification = cl.classify(m)
    if classification.kind not in ("parabolicI", "parabolicII"):
        raise MisclassificationError(f"parabolic asymptotics need a parabolic map, got {classification.kind}")
    std = classification.standard_form or m
    orbit = sm.iterate(std, 1j, N)
    u, v = orbit.u, orbit.v
    ratio = v[1:] / v[:-1]
    tail = slice(int(0.8 * len(ratio)), len(ratio))
    report = {
        "kind": classification.kind,
        "N": N,
        "v_ratio_tail": ratio[-5:].tolist(),
        "v_ratio_max_dev_tail": float(np.max(np.abs(ratio[tail] - 1))),
    }
    with np.errstate(divide="ignore"):
        vu = np.where(u != 0, v / np.where(u != 0, u, 1), np.inf)
    report["v_over_u_tail"] = [float(x) if math.isfinite(x) else None for x in vu[-5:]]

    if classification.kind == "parabolicI":
        conj = pommerenke(m, N, classification)
        path = PolygonalPath.from_orbit(anchor, orbit.points)
        depths = [max(2, N // 8), max(4, N // 4), max(8, N // 2)]
        mins = []
        for depth in depths:
            pts = path.truncated(depth).sample()
            mins.append(float(np.min(conj(pts).real)))
        report["re_sigma_min_by_depth"] = list(zip(depths, mins))
        report["re_sigma_min"] = mins[-1]
        report["re_sigma_stabilized"] = bool(abs(mins[-1] - mins[-2]) <= 1e-6 * max(1.0, abs(mins[-1])))
        verts = path.vertices[1: min(len(path.vertices), 200)]
        growth = np.abs(iterate_array(std, verts, fixed_n))
        report["phi_n_growth"] = {"n": fixed_n, "first": float(growth[0]), "last": float(growth[-1]),
                                  "nondecreasing": bool(np.all(np.diff(growth) >= -1e-9 * growth[1:]))}
        report["b"] = conj.parameter
    return report

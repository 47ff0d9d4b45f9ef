"""Moebius transforms, the disk/half-plane change of variables and hyperbolic distance."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

EXACT_TOL = 1e-12


class _Infinity:
    """The point at infinity of the Riemann sphere.

    Kept as a singleton so that ``z is INF`` is the membership test; it is
    never encoded as a NaN or a float infinity.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


def is_inf(z) -> bool:
    return z is INF


def _as_array(z):
    return np.asarray(z, dtype=complex)


def _two_prod(a, b):
    # Dekker: a*b == p + e exactly
    p = a * b
    c = 134217729.0 * a
    ah = c - (c - a)
    al = a - ah
    c = 134217729.0 * b
    bh = c - (c - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def one_minus_abs2(z):
    """1 - |z|^2 without cancellation loss near the unit circle."""
    z = _as_array(z)
    px, ex = _two_prod(z.real, z.real)
    py, ey = _two_prod(z.imag, z.imag)
    s, e1 = _two_sum(1.0, -px)
    s, e2 = _two_sum(s, -py)
    return s + (e1 + e2 - ex - ey)


def _check_disk(z, name="z"):
    if np.any(np.abs(_as_array(z)) >= 1.0):
        raise InvalidInput(f"{name} must lie in the open unit disk")


def _check_halfplane(z, name="z"):
    if np.any(np.imag(_as_array(z)) <= 0.0):
        raise InvalidInput(f"{name} must lie in the upper half-plane")


def hyp_dist_disk(z, w, check=True):
    """Hyperbolic distance in the unit disk, log((1+d)/(1-d)).

    Evaluated as ``2*log1p(d) - log(1 - d**2)`` where ``1 - d**2`` comes from
    the identity (1-|z|^2)(1-|w|^2)/|1-conj(w)z|^2, with 1-|z|^2 formed from
    error-free products, so points within 1e-12 of the circle keep relative
    accuracy.
    """
    if check:
        _check_disk(z, "z")
        _check_disk(w, "w")
    z = _as_array(z)
    w = _as_array(w)
    den = np.abs(1.0 - np.conj(w) * z)
    d = np.abs(z - w) / den
    one_minus_d2 = (one_minus_abs2(z) / den) * (one_minus_abs2(w) / den)
    out = 2.0 * np.log1p(d) - np.log(one_minus_d2)
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def hyp_dist_halfplane(z, w, check=True):
    """Hyperbolic distance in the upper half-plane (same normalisation as the disk)."""
    if check:
        _check_halfplane(z, "z")
        _check_halfplane(w, "w")
    z = _as_array(z)
    w = _as_array(w)
    den = np.abs(z - np.conj(w))
    t = np.abs(z - w) / den
    one_minus_t2 = 4.0 * (z.imag / den) * (w.imag / den)
    out = 2.0 * np.log1p(t) - np.log(one_minus_t2)
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def hyp_dist(z, w, domain: str, check=True):
    if domain == "disk":
        return hyp_dist_disk(z, w, check=check)
    if domain == "halfplane":
        return hyp_dist_halfplane(z, w, check=check)
    raise InvalidInput(f"unknown domain {domain!r}")


def dist_to_boundary(z, domain: str):
    """Euclidean distance from z to the boundary of its model domain."""
    z = _as_array(z)
    if domain == "disk":
        out = 1.0 - np.abs(z)
    else:
        out = z.imag
    return float(out) if out.ndim == 0 else out


def in_domain(z, domain: str):
    z = _as_array(z)
    return np.abs(z) < 1.0 if domain == "disk" else z.imag > 0.0


@dataclass(frozen=True)
class Mobius:
    """z -> (a z + b) / (c z + d)."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        if abs(self.det) <= EXACT_TOL:
            raise InvalidInput("singular Moebius transform (|ad - bc| <= 1e-12)")

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def __call__(self, z):
        return mobius_apply(self, z)

    def derivative(self, z):
        z = _as_array(z)
        out = self.det / (self.c * z + self.d) ** 2
        return complex(out) if out.ndim == 0 else out

    def normalized(self) -> "Mobius":
        """Scale to determinant 1 with the first nonzero of (a, c) given positive real part."""
        s = cmath.sqrt(self.det)
        a, b, c, d = self.a / s, self.b / s, self.c / s, self.d / s
        lead = a if abs(a) > EXACT_TOL else c
        if lead.real < 0 or (lead.real == 0 and lead.imag < 0):
            a, b, c, d = -a, -b, -c, -d
        return Mobius(a, b, c, d)

    def coefficients(self):
        return (self.a, self.b, self.c, self.d)


IDENTITY = Mobius(1, 0, 0, 1)


def mobius_apply(m: Mobius, z):
    """Apply m to a point, an array of points, or INF."""
    if z is INF:
        if m.c == 0:
            return INF
        return m.a / m.c
    if np.ndim(z) == 0:
        z = complex(z)
        den = m.c * z + m.d
        if den == 0:
            return INF
        return (m.a * z + m.b) / den
    z = _as_array(z)
    return (m.a * z + m.b) / (m.c * z + m.d)


def mobius_compose(f: Mobius, g: Mobius) -> Mobius:
    """The transform z -> f(g(z))."""
    return Mobius(
        f.a * g.a + f.b * g.c,
        f.a * g.b + f.b * g.d,
        f.c * g.a + f.d * g.c,
        f.c * g.b + f.d * g.d,
    )


def mobius_invert(f: Mobius) -> Mobius:
    return Mobius(f.d, -f.b, -f.c, f.a)


def cayley(p) -> tuple[Mobius, Mobius]:
    """Transform z -> i(p+z)/(p-z) taking the disk onto the half-plane with p -> INF.

    Returns the pair (to_halfplane, to_disk).
    """
    p = complex(p)
    if abs(abs(p) - 1.0) > EXACT_TOL:
        raise InvalidInput(f"Cayley anchor must be unimodular, got |p| = {abs(p)!r}")
    fwd = Mobius(1j, 1j * p, -1, p)
    return fwd, mobius_invert(fwd)


def disk_automorphism(a, theta: float = 0.0) -> Mobius:
    """z -> e^{i theta} (z - a) / (1 - conj(a) z), |a| < 1."""
    a = complex(a)
    if abs(a) >= 1:
        raise InvalidInput("automorphism parameter must lie in the disk")
    rot = cmath.exp(1j * theta)
    return Mobius(rot, -rot * a, -a.conjugate(), 1)


def halfplane_normalizer(u: float, v: float) -> Mobius:
    """M(z) = (z - u) / v, the half-plane automorphism sending u + iv to i."""
    if v <= 0:
        raise InvalidInput("normaliser needs v > 0")
    return Mobius(1, -u, 0, v)


@dataclass(frozen=True)
class Horodisk:
    """{Im z > t} in the upper half-plane."""

    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise InvalidInput("horodisk height must be positive")

    def __contains__(self, z) -> bool:
        return complex(z).imag > self.t


def disk_ball_radius(rho: float) -> float:
    """Euclidean radius of the hyperbolic ball of radius rho about 0."""
    return math.tanh(rho / 2.0)

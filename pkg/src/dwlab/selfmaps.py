"""Holomorphic self-maps: representation, catalog, evaluation and iteration."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import geometry as geo
from .errors import EvaluationError, InvalidInput
from .parser import ExprNode, parse_expression, to_string

DOMAINS = ("disk", "halfplane")

ESCAPE_MODULUS = 1e300
BOUNDARY_EPS = 1e-15
DENSE_LIMIT = 100_000
FD_SCALE = 1e-6
FD_MIN_DIST = 1e-10


@dataclass(frozen=True, eq=False)
class SelfMap:
    """An evaluable self-map of the disk or the upper half-plane.

    ``fn`` and ``dfn`` accept scalars or numpy arrays. ``body`` records how
    the map was built: ("catalog", name, params), ("expr", tree),
    ("compose", maps) or ("cayley", inner, p).
    """

    domain: str
    fn: Callable
    name: str
    body: tuple
    dfn: Optional[Callable] = None
    # conjugated maps lose precision near their Denjoy-Wolff point
    max_modulus: float = ESCAPE_MODULUS

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise InvalidInput(f"domain must be one of {DOMAINS}, got {self.domain!r}")

    def __call__(self, z):
        return self.fn(z)

    def __repr__(self):
        return f"SelfMap({self.domain}:{self.name})"

    @property
    def slug(self) -> str:
        s = self.name.replace("+", "p").replace("-", "m").replace("/", "d").replace("*", "x").replace("^", "e")
        return f"{self.domain}-" + re.sub(r"[^A-Za-z0-9_.]+", "_", s).strip("_")

    @property
    def has_closed_derivative(self) -> bool:
        return self.dfn is not None


def _wrap_array(out):
    if isinstance(out, np.ndarray) and out.ndim == 0:
        return complex(out)
    return out


def from_callable(fn, domain, name="callable", derivative=None) -> SelfMap:
    return SelfMap(domain, fn, name, ("callable", name), derivative)


def from_expression(tree: ExprNode, domain: str, name: str | None = None) -> SelfMap:
    def fn(z):
        return _broadcast(tree.evaluate(z), z)

    def dfn(z):
        return _broadcast(tree.evaluate_with_derivative(z)[1], z)

    return SelfMap(domain, fn, name or to_string(tree), ("expr", tree), dfn)


def _broadcast(value, z):
    if isinstance(z, np.ndarray):
        return np.broadcast_to(np.asarray(value, dtype=complex), z.shape).copy()
    return complex(value)


def parse_map(text: str, domain: str) -> SelfMap:
    """Parse an expression in z into a SelfMap on the given domain."""
    if domain not in DOMAINS:
        raise InvalidInput(f"domain must be one of {DOMAINS}, got {domain!r}")
    tree = parse_expression(text)
    return from_expression(tree, domain)


def compose(*maps: SelfMap) -> SelfMap:
    """compose(f, g, h) is f o g o h."""
    if not maps:
        raise InvalidInput("nothing to compose")
    domain = maps[0].domain
    if any(m.domain != domain for m in maps):
        raise InvalidInput("cannot compose maps on different domains")
    chain = tuple(reversed(maps))

    def fn(z):
        for m in chain:
            z = m.fn(z)
        return z

    dfn = None
    if all(m.dfn is not None for m in maps):

        def dfn(z):
            d = 1.0
            for m in chain:
                d = d * m.dfn(z)
                z = m.fn(z)
            return d

    name = " o ".join(m.name for m in maps)
    return SelfMap(domain, fn, name, ("compose", maps), dfn, min(m.max_modulus for m in maps))


def conjugate(inner: SelfMap, p=1.0, max_modulus: float | None = None) -> SelfMap:
    """Cayley conjugate anchored at the unimodular point p.

    A half-plane map becomes the disk map C^-1 o inner o C; a disk map becomes
    the half-plane map C o inner o C^-1, with C(z) = i(p+z)/(p-z).
    """
    to_h, to_d = geo.cayley(p)
    if inner.domain == "halfplane":
        outer, inner_t, domain = to_d, to_h, "disk"
    else:
        outer, inner_t, domain = to_h, to_d, "halfplane"

    def fn(z):
        return outer(inner.fn(inner_t(z)))

    dfn = None
    if inner.dfn is not None:

        def dfn(z):
            w = inner_t(z)
            fw = inner.fn(w)
            return outer.derivative(fw) * inner.dfn(w) * inner_t.derivative(z)

    if max_modulus is None:
        max_modulus = 1e8 if domain == "halfplane" else ESCAPE_MODULUS
    name = f"cayley[{complex(p):.6g}]({inner.name})"
    return SelfMap(domain, fn, name, ("cayley", inner, complex(p)), dfn, max_modulus)


def mobius_conjugate(inner: SelfMap, T: geo.Mobius, domain: str, name: str | None = None,
                     max_modulus: float = ESCAPE_MODULUS) -> SelfMap:
    """T o inner o T^-1 for a Moebius T carrying inner's domain onto ``domain``."""
    Ti = geo.mobius_invert(T)

    def fn(z):
        return T(inner.fn(Ti(z)))

    dfn = None
    if inner.dfn is not None:

        def dfn(z):
            w = Ti(z)
            return T.derivative(inner.fn(w)) * inner.dfn(w) * Ti.derivative(z)

    return SelfMap(domain, fn, name or f"conj({inner.name})", ("mobius", inner, T.coefficients()), dfn,
                   max_modulus)


# ---------------------------------------------------------------------------
# catalog


def _blaschke(a: float) -> tuple[Callable, Callable]:
    if not 0 < a < 1:
        raise InvalidInput("Blaschke parameter must satisfy 0 < a < 1")

    def fn(z):
        return z * (z + a) / (1 + a * z)

    def dfn(z):
        return (z * z * a + 2 * z + a) / (1 + a * z) ** 2

    return fn, dfn


def _hp_pole(z):
    if np.any(np.asarray(z) == 0):
        raise EvaluationError("evaluation at the pole z = 0")
    return z


_CATALOG = {
    ("disk", "z/2"): (lambda z: z / 2, lambda z: 0.5 + 0 * z),
    ("disk", "z^2"): (lambda z: z * z, lambda z: 2 * z),
    ("disk", "z/(2-z)"): (lambda z: z / (2 - z), lambda z: 2 / (2 - z) ** 2),
    ("halfplane", "2z"): (lambda z: 2 * z, lambda z: 2 + 0 * z),
    ("halfplane", "2z+i"): (lambda z: 2 * z + 1j, lambda z: 2 + 0 * z),
    ("halfplane", "z+1"): (lambda z: z + 1, lambda z: 1 + 0 * z),
    ("halfplane", "z+i"): (lambda z: z + 1j, lambda z: 1 + 0 * z),
    ("halfplane", "z+1-1/z"): (
        lambda z: z + 1 - 1 / _hp_pole(z),
        lambda z: 1 + 1 / _hp_pole(z) ** 2,
    ),
}

CATALOG_NAMES = sorted(f"{d}:{n}" for d, n in _CATALOG) + ["disk:blaschke(a)"]


def catalog(domain: str, name: str) -> SelfMap:
    """Built-in map by name, e.g. ``catalog("halfplane", "z+1-1/z")`` or ``catalog("disk", "blaschke(0.5)")``."""
    key = (domain, name.replace(" ", ""))
    if key in _CATALOG:
        fn, dfn = _CATALOG[key]
        return SelfMap(domain, _vectorized(fn), key[1], ("catalog", key[1], ()), _vectorized(dfn))
    m = re.fullmatch(r"blaschke\((?:a=)?([0-9.eE+-]+)\)|blaschke:([0-9.eE+-]+)", key[1])
    if domain == "disk" and m:
        a = float(m.group(1) or m.group(2))
        fn, dfn = _blaschke(a)
        return SelfMap("disk", fn, f"blaschke({a:g})", ("catalog", "blaschke", (a,)), dfn)
    raise InvalidInput(f"unknown catalog map {domain}:{name}")


def _vectorized(f):
    def g(z):
        return _wrap_array(f(z))

    return g


def resolve_map(source: str, domain: str | None = None) -> SelfMap:
    """Resolve ``catalog:<domain>:<name>`` or a bare expression (needs ``domain``)."""
    if source.startswith("catalog:"):
        parts = source.split(":", 2)
        if len(parts) != 3:
            raise InvalidInput(f"catalog reference must look like catalog:<domain>:<name>, got {source!r}")
        return catalog(parts[1], parts[2])
    return parse_map(source, domain or "disk")


# ---------------------------------------------------------------------------
# evaluation


def evaluate(m: SelfMap, z):
    out = m.fn(z)
    if not isinstance(out, np.ndarray):
        out = complex(out)
    return out


def eval_derivative(m: SelfMap, z, method: str = "auto"):
    """Derivative of m at z; closed form when attached, else central differences.

    The finite-difference step is 1e-6 times the distance from z to the
    domain boundary, averaged over the real and imaginary directions.
    """
    if method not in ("auto", "closed", "fd"):
        raise InvalidInput(f"unknown derivative method {method!r}")
    if method != "fd" and m.dfn is not None:
        return m.dfn(z)
    if method == "closed":
        raise InvalidInput(f"{m!r} has no closed-form derivative")
    dist = geo.dist_to_boundary(z, m.domain)
    if np.any(np.asarray(dist) <= FD_MIN_DIST):
        raise EvaluationError("derivative requested too close to the domain boundary")
    h = FD_SCALE * np.asarray(dist)
    if m.domain == "halfplane":
        # keep the step relative to |z| as well, so huge points stay above roundoff
        h = np.minimum(h, FD_SCALE * np.maximum(1.0, np.abs(z)))
    dx = (m.fn(z + h) - m.fn(z - h)) / (2 * h)
    dy = (m.fn(z + 1j * h) - m.fn(z - 1j * h)) / (2j * h)
    out = 0.5 * (dx + dy)
    return _wrap_array(out)


# ---------------------------------------------------------------------------
# orbits


@dataclass
class Orbit:
    map_name: str
    domain: str
    z0: complex
    points: np.ndarray
    indices: np.ndarray
    steps: np.ndarray  # steps[j] = rho(z_n, z_{n+1}) for n = indices[j]
    escaped: bool = False
    escape_reason: str = ""
    stride: int = 1

    @property
    def n_iterations(self) -> int:
        return int(self.indices[-1])

    @property
    def last(self) -> complex:
        return complex(self.points[-1])

    @property
    def u(self) -> np.ndarray:
        return self.points.real

    @property
    def v(self) -> np.ndarray:
        return self.points.imag

    def to_rows(self):
        for j, n in enumerate(self.indices):
            s = self.steps[j] if j < len(self.steps) else float("nan")
            z = complex(self.points[j])
            yield int(n), z.real, z.imag, s


def iterate(m: SelfMap, z0, N: int, dense_limit: int = DENSE_LIMIT) -> Orbit:
    """Forward orbit z_0, ..., z_N of m with hyperbolic steps.

    Stops early (``escaped=True``) once |z| exceeds the map's representable
    range or a disk point comes within 1e-15 of the circle. Beyond
    ``dense_limit`` points only every ``stride``-th point is stored.
    """
    if N < 1:
        raise InvalidInput("N must be >= 1")
    z = complex(z0)
    if not geo.in_domain(z, m.domain):
        raise InvalidInput(f"z0 = {z0!r} is outside the {m.domain}")
    stride = 1 if N <= dense_limit else math.ceil(N / dense_limit)
    pts = [z]
    idx = [0]
    steps = []
    fn = m.fn
    disk = m.domain == "disk"
    cap = m.max_modulus
    escaped = False
    reason = ""
    for n in range(1, N + 1):
        try:
            w = complex(fn(z))
        except (ZeroDivisionError, OverflowError, EvaluationError) as exc:
            escaped, reason = True, f"evaluation failed: {exc}"
            break
        if not (math.isfinite(w.real) and math.isfinite(w.imag)):
            escaped, reason = True, "non-finite value"
            break
        if disk:
            if 1.0 - abs(w) < BOUNDARY_EPS:
                escaped, reason = True, "reached the unit circle"
                break
        elif w.imag <= 0:
            escaped, reason = True, "left the half-plane"
            break
        if abs(w) > cap:
            escaped, reason = True, "exceeded representable modulus"
            break
        if (n - 1) % stride == 0:
            steps.append(geo.hyp_dist(z, w, m.domain, check=False))
        if n % stride == 0:
            pts.append(w)
            idx.append(n)
        z = w
    last_index = n - 1 if escaped else n
    if idx[-1] != last_index:
        pts.append(z)
        idx.append(last_index)
    points = np.array(pts, dtype=complex)
    steps_arr = np.array(steps[: len(pts) - 1] if len(steps) >= len(pts) - 1 else steps, dtype=float)
    return Orbit(m.name, m.domain, complex(z0), points, np.array(idx), steps_arr, escaped, reason, stride)


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    samples: int
    worst_domain_violation: float
    worst_domain_point: complex | None
    worst_contraction_violation: float
    worst_contraction_pair: tuple | None
    tolerance: float = 1e-9

    @property
    def domain_ok(self) -> bool:
        return self.worst_domain_violation <= self.tolerance

    @property
    def contraction_ok(self) -> bool:
        return self.worst_contraction_violation <= self.tolerance

    @property
    def ok(self) -> bool:
        return self.domain_ok and self.contraction_ok

    def to_dict(self):
        return {
            "samples": self.samples,
            "worst_domain_violation": self.worst_domain_violation,
            "worst_domain_point": _cjson(self.worst_domain_point),
            "worst_contraction_violation": self.worst_contraction_violation,
            "ok": self.ok,
        }


def _cjson(z):
    if z is None:
        return None
    z = complex(z)
    return [z.real, z.imag]


def sample_domain(domain: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random points: area-uniform in the disk, log-uniform heights in the half-plane."""
    if domain == "disk":
        r = np.sqrt(rng.uniform(0, 1, n)) * (1 - 1e-9)
        return r * np.exp(2j * np.pi * rng.uniform(0, 1, n))
    x = rng.uniform(-10, 10, n)
    y = np.exp(rng.uniform(math.log(1e-3), math.log(1e3), n))
    return x + 1j * y


def validate_selfmap(m: SelfMap, sample_count: int = 1000, seed: int = 0) -> ValidationReport:
    if sample_count < 1:
        raise InvalidInput("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    z = sample_domain(m.domain, sample_count, rng)
    w = sample_domain(m.domain, sample_count, rng)
    with np.errstate(all="ignore"):
        fz = np.asarray(m.fn(z), dtype=complex)
        fw = np.asarray(m.fn(w), dtype=complex)
    if m.domain == "disk":
        viol = np.abs(fz) - 1.0
    else:
        viol = -fz.imag
    viol = np.where(np.isfinite(viol), viol, np.inf)
    k = int(np.argmax(viol))
    worst_dom = max(float(viol[k]), 0.0)
    worst_dom_pt = complex(z[k]) if viol[k] > 0 else None

    ok = geo.in_domain(fz, m.domain) & geo.in_domain(fw, m.domain)
    worst_c, pair = 0.0, None
    if np.any(ok):
        before = geo.hyp_dist(z[ok], w[ok], m.domain, check=False)
        after = geo.hyp_dist(fz[ok], fw[ok], m.domain, check=False)
        gap = np.asarray(after - before)
        j = int(np.argmax(gap))
        if gap[j] > 0:
            worst_c = float(gap[j])
            pair = (complex(z[ok][j]), complex(w[ok][j]))
    return ValidationReport(sample_count, worst_dom, worst_dom_pt, worst_c, pair)

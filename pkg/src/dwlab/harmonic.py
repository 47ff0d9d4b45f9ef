"""Discrete harmonic measure on lattice regions of the unit disk.

Regions are built on the lattice h*Z^2 restricted to the disk, minus
removed features (slits, closed disks, thickened circles, arbitrary cell
masks). Every non-interior lattice node adjacent to the region carries a
bitmask of the features it touches; the Dirichlet data for a target set E is
1 on nodes whose mask intersects E and 0 elsewhere, so a node touching both E
and another feature counts as E.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import splu

from . import geometry as geo
from . import selfmaps as sm
from .errors import GridError, InvalidInput, PreconditionError, SolverDidNotConverge

ALLOWED_H = (1 / 128, 1 / 256, 1 / 512)
SOLVER_TOL = 1e-8
SOR_OMEGA = 1.9
SOR_MAX_SWEEPS = 100_000
EPS_GRID_FACTOR = 5.0
CIRCLE = "circle"
_FOUR = ndimage.generate_binary_structure(2, 1)
_EIGHT = ndimage.generate_binary_structure(2, 2)


def check_h(h: float) -> float:
    for a in ALLOWED_H:
        if abs(h - a) < 1e-12:
            return a
    raise InvalidInput(f"grid spacing must be one of 1/128, 1/256, 1/512, got {h!r}")


def eps_grid(h: float) -> float:
    return EPS_GRID_FACTOR * h


def worker_count() -> int:
    try:
        n = int(os.environ.get("DWLAB_THREADS", "0"))
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, n)


# ---------------------------------------------------------------------------
# region features


def _segment_distance(W, a, b):
    d = b - a
    s = np.clip(((W - a) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
    return np.abs(W - (a + s * d))


@dataclass(frozen=True)
class Arc:
    """Boundary arc {e^{i theta}: start <= theta < end} used as a label, not removed."""

    start: float
    end: float
    tag: str = "E"

    def contains_angle(self, theta):
        span = self.end - self.start
        if span >= 2 * math.pi:
            return np.ones(np.shape(theta), dtype=bool)
        return np.mod(np.asarray(theta) - self.start, 2 * math.pi) < span

    @property
    def angle(self) -> float:
        return min(self.end - self.start, 2 * math.pi)


class Feature:
    """A closed set removed from the disk; nodes within ``tolerance`` of it are removed."""

    tag: str

    def distance(self, W):
        raise NotImplementedError

    def tolerance(self, h):
        return h / 2

    def removed(self, Z, h):
        return self.distance(Z) <= self.tolerance(h)

    def touches(self, W, h):
        """Boundary nodes within h of the feature carry its label."""
        return self.distance(W) <= h


@dataclass(frozen=True)
class Slit(Feature):
    """Radial slit [r zeta, zeta)."""

    zeta: complex
    r: float
    tag: str = "E"

    def __post_init__(self):
        if abs(abs(self.zeta) - 1) > 1e-12:
            raise InvalidInput("slit direction must be unimodular")

    def distance(self, W):
        return _segment_distance(np.asarray(W, dtype=complex), self.r * self.zeta, self.zeta)


@dataclass(frozen=True)
class SlitFan(Feature):
    """n radial slits [r zeta_k, zeta_k) at the midpoints of n equal pieces of an arc."""

    arc: Arc
    n: int
    r: float
    tag: str = "E"

    @property
    def angles(self) -> np.ndarray:
        step = self.arc.angle / self.n
        return self.arc.start + (np.arange(self.n) + 0.5) * step

    def distance(self, W):
        W = np.asarray(W, dtype=complex)
        if self.n == 0:
            return np.full(W.shape, np.inf)
        step = self.arc.angle / self.n
        k0 = np.floor(np.mod(np.angle(W) - self.arc.start, 2 * math.pi) / step - 0.5).astype(np.int64)
        out = np.full(W.shape, np.inf)
        for off in (-1, 0, 1, 2):
            k = np.clip(k0 + off, 0, self.n - 1)
            zeta = np.exp(1j * (self.arc.start + (k + 0.5) * step))
            s = np.clip((W * np.conj(zeta)).real, self.r, 1.0)
            out = np.minimum(out, np.abs(W - s * zeta))
        # far side of the disk: fall back to the two extreme slits
        for k in (0, self.n - 1):
            zeta = np.exp(1j * (self.arc.start + (k + 0.5) * step))
            out = np.minimum(out, _segment_distance(W, self.r * zeta, zeta))
        return out


@dataclass(frozen=True)
class ClosedDisk(Feature):
    center: complex
    radius: float
    tag: str = "E"

    def distance(self, W):
        return np.maximum(np.abs(np.asarray(W, dtype=complex) - self.center) - self.radius, 0.0)

    def tolerance(self, h):
        return 0.0


@dataclass(frozen=True)
class CircleCurve(Feature):
    """Thickened circle |z - center| = radius."""

    radius: float
    center: complex = 0j
    tag: str = "F"

    def distance(self, W):
        return np.abs(np.abs(np.asarray(W, dtype=complex) - self.center) - self.radius)


@dataclass(frozen=True)
class CellMask(Feature):
    """Arbitrary removed set given as a predicate on lattice nodes."""

    predicate: Callable
    tag: str = "F"

    def removed(self, Z, h):
        inside = np.abs(Z) < 1
        out = np.zeros(Z.shape, dtype=bool)
        out[inside] = np.asarray(self.predicate(Z[inside]), dtype=bool)
        return out

    def touches(self, W, h):
        return np.zeros(np.shape(W), dtype=bool)


@dataclass(frozen=True)
class Preimage(Feature):
    """{z : phi(z) within h/2 of E}."""

    phi: Callable
    target: Feature
    tag: str = "E"

    def removed(self, Z, h):
        inside = np.abs(Z) < 1
        out = np.zeros(Z.shape, dtype=bool)
        with np.errstate(all="ignore"):
            W = self.phi(Z[inside])
        out[inside] = self.target.distance(W) <= h / 2
        return out

    def touches(self, W, h):
        return np.zeros(np.shape(W), dtype=bool)


@dataclass(frozen=True)
class RegionSpec:
    seed: complex = 0j
    features: tuple = ()
    arcs: tuple = ()

    def tags(self) -> list[str]:
        out = [CIRCLE]
        for f in list(self.arcs) + list(self.features):
            if f.tag not in out:
                out.append(f.tag)
        return out


# ---------------------------------------------------------------------------
# grid region


def lattice(h: float):
    K = int(round(1 / h)) + 2
    x = np.arange(-K, K + 1) * h
    X, Y = np.meshgrid(x, x)
    return X + 1j * Y, K


@dataclass(eq=False)
class GridRegion:
    h: float
    K: int
    Z: np.ndarray = field(repr=False)
    interior: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)  # feature bitmask on boundary nodes, 0 elsewhere
    tags: dict
    seed: complex
    seed_index: tuple
    component_id: int
    n_components: int
    _lu: object = field(default=None, repr=False)
    _index: np.ndarray = field(default=None, repr=False)

    @property
    def bounding_box(self):
        return (-self.K * self.h, self.K * self.h, -self.K * self.h, self.K * self.h)

    @property
    def boundary(self) -> np.ndarray:
        return self.labels != 0

    @property
    def n_interior(self) -> int:
        return int(self.interior.sum())

    def bits(self, target) -> int:
        if isinstance(target, str):
            target = [target]
        b = 0
        for t in target:
            if t not in self.tags:
                raise InvalidInput(f"unknown boundary label {t!r}; region has {sorted(self.tags)}")
            b |= self.tags[t]
        return b

    def label_mask(self, target) -> np.ndarray:
        return (self.labels & self.bits(target)) != 0

    def node_index(self, z) -> tuple:
        z = complex(z)
        j = int(round(z.real / self.h)) + self.K
        i = int(round(z.imag / self.h)) + self.K
        if not (0 <= i < self.Z.shape[0] and 0 <= j < self.Z.shape[1]):
            raise InvalidInput(f"point {z} outside the lattice")
        return i, j

    def contains(self, z) -> bool:
        if abs(complex(z)) >= 1:
            return False
        return bool(self.interior[self.node_index(z)])

    def to_pgm_bytes(self) -> bytes:
        img = np.zeros(self.interior.shape, dtype=np.uint8)
        img[self.boundary] = 128
        img[self.interior] = 255
        img = img[::-1]  # row 0 at the top: largest imaginary part
        head = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
        return head + img.tobytes()

    def write_pgm(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_pgm_bytes())


def build_grid_region(spec: RegionSpec, h: float) -> GridRegion:
    h = check_h(h)
    Z, K = lattice(h)
    tags = {t: 1 << k for k, t in enumerate(spec.tags())}
    outside = np.abs(Z) >= 1
    removed = outside.copy()
    feature_bits = np.zeros(Z.shape, dtype=np.int64)
    for f in spec.features:
        m = f.removed(Z, h)
        removed |= m
        feature_bits[m] |= tags[f.tag]
    seed = complex(spec.seed)
    if abs(seed) >= 1:
        raise InvalidInput("seed outside the unit disk")
    i0 = int(round(seed.imag / h)) + K
    j0 = int(round(seed.real / h)) + K
    if removed[i0, j0]:
        raise InvalidInput(f"seed {seed} lies on a removed feature or outside the region")
    comp, ncomp = ndimage.label(~removed, structure=_FOUR)
    cid = int(comp[i0, j0])
    interior = comp == cid
    if not interior.any():
        raise GridError("empty region")
    adj = ndimage.binary_dilation(interior, structure=_FOUR) & ~interior
    labels = np.zeros(Z.shape, dtype=np.int64)
    ext = adj & outside
    labels[ext] |= tags[CIRCLE]
    theta = np.angle(Z)
    for a in spec.arcs:
        labels[ext & a.contains_angle(theta)] |= tags[a.tag]
    labels[adj] |= feature_bits[adj]
    for f in spec.features:
        near = np.zeros(Z.shape, dtype=bool)
        near[adj] = f.touches(Z[adj], h)
        labels[near] |= tags[f.tag]
    if np.any(adj & (labels == 0)):
        raise GridError("unlabelled boundary node")
    return GridRegion(h, K, Z, interior, labels, tags, seed, (i0, j0), cid, int(ncomp))


# ---------------------------------------------------------------------------
# solvers


@dataclass
class HarmonicEstimate:
    value: float
    h: float
    residual: float
    z: complex = 0j
    target: tuple = ()
    method: str = "direct"
    sweeps: int = 0
    richardson: float | None = None

    def to_dict(self):
        return {"value": self.value, "h": self.h, "residual": self.residual, "z": [self.z.real, self.z.imag],
                "target": list(self.target), "method": self.method, "richardson": self.richardson}


def _neighbour_sum(U):
    S = np.zeros_like(U)
    S[1:, :] += U[:-1, :]
    S[:-1, :] += U[1:, :]
    S[:, 1:] += U[:, :-1]
    S[:, :-1] += U[:, 1:]
    return S


def _system(region: GridRegion):
    if region._lu is None:
        idx = np.full(region.interior.shape, -1, dtype=np.int64)
        n = region.n_interior
        idx[region.interior] = np.arange(n)
        rows, cols = [np.arange(n)], [np.arange(n)]
        vals = [np.full(n, 4.0)]
        I, J = np.nonzero(region.interior)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nb = idx[I + di, J + dj]
            ok = nb >= 0
            rows.append(idx[I[ok], J[ok]])
            cols.append(nb[ok])
            vals.append(-np.ones(ok.sum()))
        A = sparse.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        region._lu = splu(A)
        region._index = idx
    return region._lu


def discrete_residual(U, region: GridRegion) -> float:
    """max |u - mean of its 4 neighbours| over interior nodes."""
    S = _neighbour_sum(U)
    return float(np.max(np.abs(U[region.interior] - S[region.interior] / 4)))


def solve_field(region: GridRegion, target, method: str = "direct", omega: float = SOR_OMEGA,
                tol: float = SOLVER_TOL, max_sweeps: int = SOR_MAX_SWEEPS):
    """Return (U, residual, sweeps): U holds the solution on interior nodes, the data on boundary nodes, NaN elsewhere."""
    g = region.label_mask(target).astype(float)
    U = np.where(region.boundary, g, 0.0)
    sweeps = 0
    if method == "direct":
        lu = _system(region)
        b = _neighbour_sum(U)[region.interior]
        U[region.interior] = lu.solve(b)
    elif method == "sor":
        U, sweeps = _sor(U, region.interior, omega, tol, max_sweeps)
    else:
        raise InvalidInput(f"unknown solver {method!r}")
    res = discrete_residual(U, region)
    out = np.where(region.interior | region.boundary, U, np.nan)
    return out, res, sweeps


def _sor(U, interior, omega, tol, max_sweeps):
    I, J = np.indices(U.shape)
    colours = [interior & ((I + J) % 2 == 0), interior & ((I + J) % 2 == 1)]
    for sweep in range(1, max_sweeps + 1):
        worst = 0.0
        for mask in colours:
            # red-black: nodes of one colour only read nodes of the other
            delta = omega * (_neighbour_sum(U)[mask] / 4 - U[mask])
            U[mask] += delta
            if delta.size:
                worst = max(worst, float(np.max(np.abs(delta))))
        if worst < tol:
            return U, sweep
    raise SolverDidNotConverge(f"SOR did not reach max update {tol} after {max_sweeps} sweeps")


def interpolate(U, region: GridRegion, z) -> float:
    """Bilinear interpolation of a nodal field, ignoring nodes outside the closure of the region."""
    z = complex(z)
    x = z.real / region.h + region.K
    y = z.imag / region.h + region.K
    j, i = int(math.floor(x)), int(math.floor(y))
    fx, fy = x - j, y - i
    num = den = 0.0
    for di, dj, w in ((0, 0, (1 - fx) * (1 - fy)), (0, 1, fx * (1 - fy)), (1, 0, (1 - fx) * fy), (1, 1, fx * fy)):
        v = U[i + di, j + dj]
        if w > 0 and np.isfinite(v):
            num += w * v
            den += w
    if den == 0:
        raise PreconditionError(f"no solution data near {z}")
    return float(num / den)


def harmonic_measure(z, target, region: GridRegion, method: str = "direct", **kw) -> HarmonicEstimate:
    """omega(z, E, region) for the boundary label(s) ``target``."""
    if not region.contains(z):
        raise PreconditionError(f"{complex(z)} is not an interior point of the region")
    U, res, sweeps = solve_field(region, target, method, **kw)
    value = min(max(interpolate(U, region, z), 0.0), 1.0)
    tgt = (target,) if isinstance(target, str) else tuple(target)
    return HarmonicEstimate(value, region.h, res, complex(z), tgt, method, sweeps)


def harmonic_measure_richardson(z, target, spec: RegionSpec, h: float = 1 / 256) -> HarmonicEstimate:
    """Estimates at h and h/2 combined assuming first-order boundary error."""
    coarse = harmonic_measure(z, target, build_grid_region(spec, h))
    fine = harmonic_measure(z, target, build_grid_region(spec, h / 2))
    fine.richardson = min(max(2 * fine.value - coarse.value, 0.0), 1.0)
    return fine


# ---------------------------------------------------------------------------
# exhaustion


def _elliptic_point(m: sm.SelfMap, p=None) -> complex:
    if m.domain != "disk":
        raise InvalidInput("exhaustions are built for disk maps")
    if p is None:
        from .classification import classify

        c = classify(m)
        if c.kind != "elliptic":
            raise PreconditionError(f"exhaustion needs an elliptic map, got {c.kind}")
        p = c.dw_point
    return complex(p)


def _rho_levels(m: sm.SelfMap, p: complex, Z, N: int):
    """Yield rho(phi_n(z), p) on the disk nodes for n = 1..N."""
    inside = np.abs(Z) < 1
    W = Z[inside]
    for _ in range(N):
        with np.errstate(all="ignore"):
            W = m.fn(W)
        rho = np.full(Z.shape, np.inf)
        ok = np.isfinite(W) & (np.abs(W) < 1)
        vals = np.full(W.shape, np.inf)
        vals[ok] = geo.hyp_dist_disk(W[ok], p, check=False)
        rho[inside] = vals
        yield rho


def sublevel_region(rho, p: complex, t: float, h: float) -> GridRegion:
    """Component of {rho < t} containing p; nodes of the complement inside the disk are labelled F."""
    bad = ~(rho < t)
    return build_grid_region(RegionSpec(p, (CellMask(_Lookup(bad, h), "F"),)), h)


class _Lookup:
    """Predicate reading a precomputed lattice mask back by node position."""

    def __init__(self, mask, h):
        self.mask = mask
        self.h = h
        self.K = (mask.shape[0] - 1) // 2

    def __call__(self, W):
        i = np.rint(W.imag / self.h).astype(np.int64) + self.K
        j = np.rint(W.real / self.h).astype(np.int64) + self.K
        return self.mask[i, j]


def choose_t0(m: sm.SelfMap, h: float = 1 / 256, p=None, min_levels: int = 20) -> float:
    """Largest t in 1, 1/2, 1/4, ... whose Omega_1(t) stays 10h away from the circle."""
    h = check_h(h)
    p = _elliptic_point(m, p)
    Z, _ = lattice(h)
    rho = next(_rho_levels(m, p, Z, 1))
    t = 1.0
    for _ in range(min_levels + 1):
        try:
            region = sublevel_region(rho, p, t, h)
        except InvalidInput:
            region = None
        if region is not None:
            gap = float(np.min(1 - np.abs(region.Z[region.interior])))
            if gap >= 10 * h:
                return t
        t /= 2
    raise GridError("no admissible t0 above 2^-20: the map is too close to the identity for this grid")


@dataclass
class ExhaustionLevel:
    n: int
    region: GridRegion = field(repr=False)
    n_free_cells: int
    n_circle_contacts: int
    max_radius: float
    n_free_components: int

    @property
    def omega(self) -> np.ndarray:
        return self.region.interior

    @property
    def free(self) -> np.ndarray:
        return self.region.label_mask("F")


@dataclass
class Exhaustion:
    map_name: str
    p: complex
    t0: float
    h: float
    levels: list = field(repr=False)
    subset_violations: dict = field(default_factory=dict)
    incl_violations: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not any(self.subset_violations.values()) and not any(self.incl_violations.values())

    def to_dict(self):
        return {
            "map": self.map_name, "p": [self.p.real, self.p.imag], "t0": self.t0, "h": self.h,
            "levels": [{"n": L.n, "interior_cells": L.region.n_interior, "free_cells": L.n_free_cells,
                        "free_components": L.n_free_components, "circle_contacts": L.n_circle_contacts,
                        "max_radius": L.max_radius} for L in self.levels],
            "subset_violations": {str(k): v for k, v in self.subset_violations.items()},
            "incl_violations": {f"{n},{k}": v for (n, k), v in self.incl_violations.items()},
            "ok": self.ok,
        }


def build_exhaustion(m: sm.SelfMap, t0: float, N: int, h: float = 1 / 256, p=None,
                     incl_k: int = 3) -> Exhaustion:
    h = check_h(h)
    p = _elliptic_point(m, p)
    Z, K = lattice(h)
    levels = []
    for n, rho in enumerate(_rho_levels(m, p, Z, N), start=1):
        try:
            region = sublevel_region(rho, p, t0, h)
        except InvalidInput as exc:
            raise GridError(f"component of p vanished at n={n}: t0 too small for this grid") from exc
        free = region.label_mask("F")
        _, ncomp = ndimage.label(free, structure=_EIGHT)
        levels.append(ExhaustionLevel(
            n, region, int(free.sum()), int(region.label_mask(CIRCLE).sum()),
            float(np.max(np.abs(Z[region.interior]))), int(ncomp)))

    ex = Exhaustion(m.name, p, t0, h, levels)
    # Omega_n u F_n inside Omega_{n+1}, up to one cell
    for a, b in zip(levels, levels[1:]):
        grown = ndimage.binary_dilation(b.omega, structure=_EIGHT)
        ex.subset_violations[a.n] = int(np.sum((a.omega | a.free) & ~grown))
    # phi_k(Omega_{n+k}) inside Omega_n, checked on every cell
    for k in range(1, incl_k + 1):
        for a in levels:
            if a.n + k > N:
                continue
            big = levels[a.n + k - 1]
            grown = ndimage.binary_dilation(a.omega, structure=_EIGHT)
            W = Z[big.omega]
            for _ in range(k):
                W = m.fn(W)
            i = np.rint(W.imag / h).astype(np.int64) + K
            j = np.rint(W.real / h).astype(np.int64) + K
            ex.incl_violations[(a.n, k)] = int(np.sum(~grown[i, j]))
    return ex


# ---------------------------------------------------------------------------
# omega decay


@dataclass
class OmegaDecay:
    map_name: str
    h: float
    t0: float
    series: list  # (n, omega, residual, free_cells, circle_contacts)
    alpha_hat: float | None
    first_below: int | None
    nonincreasing_after_first_drop: bool
    exhaustion: Exhaustion = field(repr=False, default=None)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([s[1] for s in self.series])

    def to_dict(self):
        return {"map": self.map_name, "h": self.h, "t0": self.t0,
                "series": [{"n": n, "omega": w, "residual": r, "free_cells": f, "circle_contacts": c}
                           for n, w, r, f, c in self.series],
                "alpha_hat": self.alpha_hat, "first_n_below_0.05": self.first_below,
                "nonincreasing_after_first_drop": self.nonincreasing_after_first_drop,
                "exhaustion": self.exhaustion.to_dict() if self.exhaustion else None}

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["n", "omega", "residual", "h"])
            for n, om, res, _, _ in self.series:
                w.writerow([n, repr(om), repr(res), repr(self.h)])


def _geometric_ratio(values):
    v = np.asarray(values, dtype=float)
    v = v[v > 0]
    if len(v) < 2:
        return None
    slope = np.polyfit(np.arange(len(v)), np.log(v), 1)[0]
    return float(math.exp(slope))


def omega_decay(m: sm.SelfMap, t0: float | None = None, N: int = 10, h: float = 1 / 256, p=None,
                threshold: float = 0.05) -> OmegaDecay:
    """omega_n(p) = omega(p, F_n, Omega_n) for n = 1..N."""
    p = _elliptic_point(m, p)
    if t0 is None:
        t0 = choose_t0(m, h, p)
    ex = build_exhaustion(m, t0, N, h, p)

    def one(level):
        if level.n_free_cells == 0:
            return 0.0, 0.0
        est = harmonic_measure(p, "F", level.region)
        level.region._lu = None  # release the factorisation
        return est.value, est.residual

    with ThreadPoolExecutor(max_workers=min(worker_count(), len(ex.levels))) as pool:
        results = list(pool.map(one, ex.levels))
    series = [(L.n, w, r, L.n_free_cells, L.n_circle_contacts) for L, (w, r) in zip(ex.levels, results)]
    om = [s[1] for s in series]
    first_drop = next((k for k in range(1, len(om)) if om[k] < om[k - 1] - 1e-12), None)
    if first_drop is None:
        nonincr, tail = True, []
    else:
        nonincr = all(om[k] <= om[k - 1] + 1e-12 for k in range(first_drop, len(om)))
        tail = om[first_drop - 1:]
    first_below = next((n for n, w, *_ in series if w < threshold), None)
    return OmegaDecay(m.name, ex.h, t0, series, _geometric_ratio(tail), first_below, nonincr, ex)


# ---------------------------------------------------------------------------
# lemma verifiers


@dataclass
class InequalityReport:
    name: str
    h: float
    eps_grid: float
    points: list
    lhs: list
    rhs: list
    residual: float
    vacuous: bool = False
    notes: dict = field(default_factory=dict)

    @property
    def margins(self) -> np.ndarray:
        return np.asarray(self.rhs) - np.asarray(self.lhs)

    @property
    def violations(self) -> int:
        return int(np.sum(self.margins < -self.eps_grid))

    @property
    def min_margin(self) -> float | None:
        return float(self.margins.min()) if len(self.points) else None

    @property
    def passed(self) -> bool:
        return self.vacuous or self.violations == 0

    def to_dict(self):
        return {"name": self.name, "h": self.h, "eps_grid": self.eps_grid, "vacuous": self.vacuous,
                "pass": self.passed, "violations": self.violations, "min_margin": self.min_margin,
                "residual": self.residual,
                "samples": [{"z": [complex(z).real, complex(z).imag], "lhs": a, "rhs": b, "margin": b - a}
                            for z, a, b in zip(self.points, self.lhs, self.rhs)],
                "notes": self.notes}


def random_disk_points(n: int, rng: np.random.Generator, radius: float = 0.9) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    return r * np.exp(2j * np.pi * rng.random(n))


def verify_schwarz_lemma(m: sm.SelfMap, E: Feature, points=None, h: float = 1 / 256, n_points: int = 50,
                         seed: int = 0) -> InequalityReport:
    """omega(z, phi^-1(E), D minus phi^-1(E)) <= omega(phi(z), E, D minus E)."""
    h = check_h(h)
    pre = Preimage(m.fn, E, "E")
    Z, _ = lattice(h)
    if not pre.removed(Z, h).any():
        return InequalityReport("schwarz", h, eps_grid(h), [], [], [], 0.0, vacuous=True,
                                notes={"reason": "empty preimage"})
    rng = np.random.default_rng(seed)
    if points is None:
        cand = random_disk_points(40 * n_points, rng)
    else:
        cand = np.asarray(points, dtype=complex)

    lhs_region = rhs_region = None
    chosen = []
    for z in cand:
        w = complex(m.fn(complex(z)))
        try:
            if lhs_region is None:
                lhs_region = build_grid_region(RegionSpec(complex(z), (pre,)), h)
            if rhs_region is None:
                rhs_region = build_grid_region(RegionSpec(w, (E,)), h)
        except InvalidInput:
            continue
        if lhs_region.contains(z) and rhs_region.contains(w):
            chosen.append((complex(z), w))
        if points is None and len(chosen) == n_points:
            break
    if not chosen:
        raise PreconditionError("no admissible sample points")
    U, r1, _ = solve_field(lhs_region, "E")
    V, r2, _ = solve_field(rhs_region, "E")
    lhs = [interpolate(U, lhs_region, z) for z, _ in chosen]
    rhs = [interpolate(V, rhs_region, w) for _, w in chosen]
    return InequalityReport("schwarz", h, eps_grid(h), [z for z, _ in chosen], lhs, rhs, max(r1, r2),
                            notes={"skipped": int(len(cand) - len(chosen)) if points is not None else None})


def verify_conditional_probability(z, E, F: Feature, omega_spec: RegionSpec | None = None,
                                   h: float = 1 / 256) -> InequalityReport:
    """omega(z, E, Omega) <= omega(z, F, Omega minus F) * sup_F omega(., E, Omega).

    ``E`` is a boundary Arc or a removed Feature; ``F`` is a removed Feature
    that must separate z from E. ``z`` may be a single point or a sequence of
    points lying in one component of Omega minus F.
    """
    h = check_h(h)
    pts = [complex(w) for w in np.atleast_1d(np.asarray(z, dtype=complex))]
    base = omega_spec or RegionSpec(pts[0])
    if isinstance(E, Arc):
        spec = RegionSpec(pts[0], base.features, base.arcs + (E,))
    else:
        spec = RegionSpec(pts[0], base.features + (E,), base.arcs)
    region = build_grid_region(spec, h)
    split = build_grid_region(RegionSpec(pts[0], spec.features + (F,), spec.arcs), h)
    e_only = split.label_mask(E.tag) & ~split.label_mask(F.tag)
    if e_only.any():
        raise PreconditionError("F does not separate z from E")
    outside = [w for w in pts if not split.contains(w)]
    if outside:
        raise PreconditionError(f"{len(outside)} sample point(s) not in the component of Omega minus F containing "
                                f"{pts[0]}")
    U, r1, _ = solve_field(region, E.tag)
    V, r2, _ = solve_field(split, F.tag)
    on_F = F.removed(region.Z, h) & region.interior
    if not on_F.any():
        raise PreconditionError("F has no cells inside the region")
    sup = float(np.max(U[on_F]))
    lhs = [interpolate(U, region, w) for w in pts]
    via = [interpolate(V, split, w) for w in pts]
    return InequalityReport("conditional_probability", h, eps_grid(h), pts, lhs, [v * sup for v in via],
                            max(r1, r2), notes={"omega_F": via, "sup_F_omega_E": sup})


@dataclass
class SlitComparison:
    h: float
    arc: Arc
    lhs: float
    configs: list  # (n_slits, r, rhs, margin, vacuous)
    residual: float

    @property
    def eps(self) -> float:
        return eps_grid(self.h)

    @property
    def passed(self) -> bool:
        return all(vac or margin >= -self.eps for _, _, _, margin, vac in self.configs)

    @property
    def rhs_decreasing(self) -> bool:
        vals = [rhs for _, _, rhs, _, vac in self.configs if not vac]
        return all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))

    def to_dict(self):
        return {"h": self.h, "arc": [self.arc.start, self.arc.end], "lhs": self.lhs, "eps_grid": self.eps,
                "configs": [{"slits": n, "r": r, "rhs": rhs, "margin": mg, "vacuous": vac}
                            for n, r, rhs, mg, vac in self.configs],
                "pass": self.passed, "rhs_decreasing": self.rhs_decreasing, "residual": self.residual}


def verify_slit_comparison(arc: Arc, configs: Sequence[tuple[int, float]], h: float = 1 / 256,
                           p: complex = 0j) -> SlitComparison:
    """omega(p, A, D) against omega(p, A~, D minus A~) for slit fans (n_slits, r) over A."""
    if not configs:
        raise InvalidInput("slit sample empty")
    h = check_h(h)
    base = harmonic_measure(p, arc.tag, build_grid_region(RegionSpec(p, arcs=(arc,)), h))
    rows, res = [], base.residual
    for n, r in configs:
        if n == 0:
            rows.append((0, r, 0.0, None, True))
            continue
        fan = SlitFan(arc, n, r, "slits")
        est = harmonic_measure(p, "slits", build_grid_region(RegionSpec(p, (fan,)), h))
        res = max(res, est.residual)
        rows.append((n, r, est.value, est.value - base.value, False))
    return SlitComparison(h, arc, base.value, rows, res)

"""Radial boundary limits of iterates, the inner-function test and boundary iteration experiments."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import classification as cl
from . import geometry as geo
from . import selfmaps as sm
from .errors import InvalidInput, MisclassificationError, PreconditionError, UndecidedError

SCHEDULE_DEPTH = 12
SCHEDULE_CAP = 1e-15
LIMIT_TOL = 1e-6
ESCAPE_LIMIT = 1e6
UNIMODULAR_GAP = 1e-6
INTERIOR_GAP = 1e-6
CONVERGED_RADIUS = 0.05
INNER_HI = 1e-3
INNER_LO = 1e-2
PROBE_FLAG = "exploratory - open problem (type II parabolic boundary iteration conjecture)"


def radius_schedule(n: int = 1, depth: int = SCHEDULE_DEPTH, gamma: float = 1.0, cap: float = SCHEDULE_CAP):
    """Distances 1 - r_k = 10^(-k gamma), extended until below 2^-n * 1e-3 (never below ``cap``)."""
    target = 2.0 ** (-n) * 1e-3
    eps = []
    k = 1
    while True:
        e = 10.0 ** (-k * gamma)
        if e < cap:
            break
        eps.append(e)
        if k >= depth and e < target:
            break
        k += 1
    return np.array(eps)


@dataclass(frozen=True)
class StolzAngle:
    """{z : |zeta - z| < kappa (1 - |z|)}."""

    vertex: complex
    kappa: float

    def __post_init__(self):
        if not self.kappa > 1:
            raise InvalidInput("Stolz aperture must exceed 1")
        if abs(abs(self.vertex) - 1) > 1e-12:
            raise InvalidInput("Stolz vertex must be unimodular")

    @classmethod
    def for_dw_point(cls, vertex, p) -> "StolzAngle":
        p = abs(complex(p))
        return cls(complex(vertex), 2 * (1 + p) / (1 - p))

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return np.abs(self.vertex - z) < self.kappa * (1 - np.abs(z))

    def path(self, eps, tilt: float = 0.5):
        """Points vertex*(1 - t e^{i beta}) with |beta| = tilt * arccos(1/kappa), all inside the angle."""
        beta = tilt * math.acos(1 / self.kappa)
        return self.vertex * (1 - np.asarray(eps) * np.exp(1j * beta))


@dataclass
class RadialLimitEstimate:
    zeta: complex
    n: int
    samples: list  # (1 - r, value)
    verdict: str  # converged | escaped | undecided
    limit: complex | None
    error: float

    def to_dict(self):
        lim = None if self.limit is None else [self.limit.real, self.limit.imag]
        return {"zeta": [self.zeta.real, self.zeta.imag], "n": self.n, "verdict": self.verdict, "limit": lim,
                "error": self.error, "samples": [[e, v.real, v.imag] for e, v in self.samples]}


def _approach_points(domain, zetas, eps):
    zetas = np.asarray(zetas, dtype=complex)
    if domain == "disk":
        return (1 - eps)[None, :] * zetas[:, None]
    return zetas.real[:, None] + 1j * eps[None, :]


def _check_directions(domain, zetas):
    zetas = np.asarray(zetas, dtype=complex)
    if domain == "disk" and np.any(np.abs(np.abs(zetas) - 1) > 1e-12):
        raise InvalidInput("boundary direction must be unimodular within 1e-12")
    if domain == "halfplane" and np.any(zetas.imag != 0):
        raise InvalidInput("half-plane boundary points must be real")
    return zetas


def _verdicts(V, domain, tol=LIMIT_TOL):
    """Aitken limits of each row of V (values along the schedule) and their verdicts."""
    a, b, c = V[:, -3], V[:, -2], V[:, -1]
    with np.errstate(all="ignore"):
        d1, d2 = c - b, b - a
        den = d1 - d2
        safe = np.abs(den) > 1e-300
        L = np.where(safe, c - d1 * d1 / np.where(safe, den, 1), c)
        L = np.where(np.isfinite(L), L, c)
        err = np.maximum.reduce([np.abs(a - L), np.abs(b - L), np.abs(c - L)])
    finite = np.isfinite(a) & np.isfinite(b) & np.isfinite(c)
    scale = np.maximum(1.0, np.abs(L))
    converged = finite & (err <= tol * scale)
    verdict = np.full(len(V), "undecided", dtype=object)
    if domain == "halfplane":
        mods = np.abs(V[:, -3:])
        grows = np.all(np.diff(mods, axis=1) > 0, axis=1) & (mods[:, -1] > ESCAPE_LIMIT)
        escaped = ~finite | grows
    else:
        escaped = finite & ~converged & (1 - np.abs(c) < UNIMODULAR_GAP)
    verdict[converged] = "converged"
    verdict[escaped & ~converged] = "escaped"
    return verdict, np.where(converged, L, np.nan), np.where(finite, err, np.inf)


def _radial_values(m: sm.SelfMap, n: int, zetas, eps):
    W = _approach_points(m.domain, zetas, eps)
    with np.errstate(all="ignore"):
        for _ in range(n):
            W = m.fn(W)
    return W


def radial_limit(m: sm.SelfMap, n: int, zeta, schedule=None, depth: int = SCHEDULE_DEPTH) -> RadialLimitEstimate:
    """phi_n*(zeta) = lim_{r -> 1} phi_n(r zeta) (disk) or lim_{y -> 0} phi_n(x + iy) (half-plane)."""
    zetas = _check_directions(m.domain, [zeta])
    eps = radius_schedule(n, depth) if schedule is None else np.asarray(schedule, dtype=float)
    if len(eps) < 3 or np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise InvalidInput("schedule must be at least three strictly decreasing distances 1 - r_k > 0")
    V = _radial_values(m, n, zetas, eps)
    verdict, L, err = _verdicts(V, m.domain)
    lim = complex(L[0]) if verdict[0] == "converged" else None
    return RadialLimitEstimate(complex(zetas[0]), n, list(zip(eps.tolist(), V[0].tolist())), str(verdict[0]), lim,
                               float(err[0]))


def boundary_samples(domain: str, count: int, rng: np.random.Generator, min_abs_x: float = 0.0):
    """Uniform directions on the circle; on the line, their Cayley images (Cauchy distributed)."""
    if domain == "disk":
        return np.exp(2j * np.pi * rng.random(count))
    out = []
    while len(out) < count:
        x = np.tan(np.pi * (rng.random(count) - 0.5))
        out.extend(x[np.abs(x) >= min_abs_x].tolist())
    return np.array(out[:count], dtype=complex)


# ---------------------------------------------------------------------------
# inner test


@dataclass
class InnerTestReport:
    verdict: str  # inner | not-inner | undecided
    samples: int
    decided: int
    fraction_unimodular: float
    fraction_interior: float
    histogram: list
    bin_edges: list

    def to_dict(self):
        return dict(self.__dict__)


def _as_disk(m: sm.SelfMap) -> sm.SelfMap:
    return m if m.domain == "disk" else sm.conjugate(m, 1.0)


def inner_test(m: sm.SelfMap, samples: int = 200, seed: int = 0, depth: int = SCHEDULE_DEPTH) -> InnerTestReport:
    if samples < 100:
        raise InvalidInput("inner test needs at least 100 boundary directions")
    d = _as_disk(m)
    rng = np.random.default_rng(seed)
    zetas = boundary_samples("disk", samples, rng)
    eps = radius_schedule(1, depth)
    verdict, L, _ = _verdicts(_radial_values(d, 1, zetas, eps), "disk")
    mods = np.where(verdict == "escaped", 1.0, np.abs(L))
    decided = verdict != "undecided"
    k = int(decided.sum())
    if k < samples / 2:
        raise UndecidedError("too few decided radial limits for the inner test", {"decided": k, "samples": samples})
    md = mods[decided]
    hi = float(np.mean(md > 1 - INNER_HI))
    lo = float(np.mean(md < 1 - INNER_LO))
    if hi >= 0.99:
        v = "inner"
    elif lo >= 0.01:
        v = "not-inner"
    else:
        v = "undecided"
    hist, edges = np.histogram(np.clip(md, 0.0, 1.0), bins=20, range=(0.0, 1.0))
    return InnerTestReport(v, samples, k, hi, lo, hist.tolist(), edges.tolist())


# ---------------------------------------------------------------------------
# convergence experiment


@dataclass
class ExperimentReport:
    map_name: str
    mode: str  # elliptic | boundary
    n_max: int
    samples: int
    seed: int
    rows: list  # (n, fraction_converged, fraction_mod1, fraction_undecided)
    final: dict
    per_sample: list = field(repr=False, default_factory=list)
    trajectories: list = field(repr=False, default_factory=list)

    def row(self, n: int):
        return self.rows[n - 1]

    def to_dict(self):
        return {"map": self.map_name, "mode": self.mode, "n_max": self.n_max, "samples": self.samples,
                "seed": self.seed,
                "series": [{"n": n, "fraction_converged": a, "fraction_mod1": b, "fraction_undecided": c}
                           for n, a, b, c in self.rows],
                "final": self.final, "per_sample": self.per_sample}

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["n", "fraction_converged", "fraction_mod1", "fraction_undecided"])
            for n, a, b, c in self.rows:
                w.writerow([n, repr(a), repr(b), repr(c)])


def _fractions(hit, mod1, undecided):
    decided = ~undecided
    k = max(int(decided.sum()), 1)
    return float(np.sum(hit & decided) / k), float(np.sum(mod1 & decided) / k), float(np.mean(undecided))


def convergence_experiment(m: sm.SelfMap, n_max: int, samples: int = 500, classification=None, seed: int = 0,
                           escape_modulus: float = 1e3, min_abs_x: float = 0.0, depth: int = SCHEDULE_DEPTH,
                           keep_trajectories: bool = False) -> ExperimentReport:
    """Track phi_n*(zeta) for n = 1..n_max over random boundary samples.

    Once a sample's radial limit is strictly inside, later values come from
    iterating that interior point directly, since phi_{n+k}* = phi_k o phi_n*
    there. Elliptic maps count a sample as converged within 0.05 of p; maps
    with a boundary Denjoy-Wolff point are run on their half-plane standard
    form and count a sample once |phi_n*(x)| has exceeded ``escape_modulus``.
    """
    if classification is None:
        raise PreconditionError("classification missing: classify the map first")
    if classification.kind in ("undecided", "elliptic_automorphism"):
        raise PreconditionError(f"no convergence experiment for kind {classification.kind}")
    elliptic = classification.kind == "elliptic"
    if elliptic:
        if m.domain != "disk":
            raise InvalidInput("elliptic experiments run on disk maps")
        f, p = m, complex(classification.dw_point)
    else:
        f, p = classification.standard_form or m, None
    rng = np.random.default_rng(seed)
    zetas = boundary_samples(f.domain, samples, rng, 0.0 if elliptic else min_abs_x)
    eps = radius_schedule(n_max, depth)
    V = _approach_points(f.domain, zetas, eps)
    current = np.full(samples, np.nan + 0j)
    inside = np.zeros(samples, dtype=bool)
    passed = np.zeros(samples, dtype=bool)
    rows, traj = [], []
    for n in range(1, n_max + 1):
        stuck = ~inside
        with np.errstate(all="ignore"):
            V[stuck] = f.fn(V[stuck])
            current[inside] = f.fn(current[inside])
        verdict, L, _ = _verdicts(V[stuck], f.domain)
        cur = np.where(verdict == "converged", L, np.nan)
        if f.domain == "disk":
            cur = np.where(verdict == "escaped", V[stuck][:, -1] / np.abs(V[stuck][:, -1]), cur)
        else:
            cur = np.where(verdict == "escaped", np.inf, cur)
        current[stuck] = cur
        und = np.zeros(samples, dtype=bool)
        und[np.nonzero(stuck)[0]] = verdict == "undecided"
        if f.domain == "disk":
            newly = stuck & ~und & np.isfinite(current) & (np.abs(current) < 1 - INTERIOR_GAP)
        else:
            newly = stuck & ~und & np.isfinite(current) & (current.imag > INTERIOR_GAP * np.maximum(1, np.abs(current)))
        inside |= newly
        mod = np.abs(current)
        if elliptic:
            hit = np.abs(current - p) < CONVERGED_RADIUS
            mod1 = ~inside & (mod > 1 - INNER_HI)
        else:
            passed |= ~und & (mod > escape_modulus)
            hit = passed.copy()
            mod1 = ~inside & ~und & np.isfinite(mod) & (np.abs(current.imag) <= INTERIOR_GAP * np.maximum(1, mod))
        rows.append((n,) + _fractions(hit, mod1, und))
        if keep_trajectories:
            traj.append(current.copy())
    final_mod = np.abs(current)
    final = {
        "fraction_converged": rows[-1][1], "fraction_mod1": rows[-1][2], "fraction_undecided": rows[-1][3],
        "fraction_interior_shortcut": float(np.mean(inside)),
    }
    if not elliptic:
        dec = ~und
        final["fraction_final_modulus_above"] = float(np.sum(dec & (final_mod > escape_modulus)) / max(dec.sum(), 1))
        final["escape_modulus"] = escape_modulus
    per_sample = [{"zeta": [complex(z).real, complex(z).imag],
                   "value": None if not np.isfinite(c) else [c.real, c.imag],
                   "interior": bool(i), "undecided": bool(u)}
                  for z, c, i, u in zip(zetas, current, inside, und)]
    report = ExperimentReport(m.name, "elliptic" if elliptic else "boundary", n_max, samples, seed, rows, final,
                              per_sample)
    if keep_trajectories:
        report.trajectories = np.array(traj).T.tolist()
    return report


# ---------------------------------------------------------------------------
# type II parabolic probe


def parabolic2_probe(m: sm.SelfMap, n_max: int = 100, samples: int = 200, classification=None, seed: int = 0,
                     escape_modulus: float = 50.0, keep: int = 10) -> dict:
    """Evidence about boundary iteration for zero-step parabolic maps. No pass/fail verdict."""
    if classification is None:
        classification = cl.classify(m)
    if classification.kind != "parabolicII":
        raise MisclassificationError(f"probe needs a type II parabolic map, got {classification.kind}")
    exp = convergence_experiment(m, n_max, samples, classification, seed, escape_modulus,
                                 keep_trajectories=True)
    try:
        inner = inner_test(m, max(samples, 100), seed).to_dict()
    except UndecidedError as e:
        inner = {"verdict": "undecided", "diagnostics": e.diagnostics}
    trajectories = []
    for z, tr in list(zip([s["zeta"] for s in exp.per_sample], exp.trajectories))[:keep]:
        trajectories.append({"x": z[0], "values": [None if not np.isfinite(w) else [w.real, w.imag] for w in tr]})
    return {
        "flag": PROBE_FLAG,
        "map": m.name,
        "n_max": n_max,
        "samples": samples,
        "seed": seed,
        "escape_modulus": escape_modulus,
        "escape_fraction": exp.final["fraction_converged"],
        "boundary_fraction": exp.final["fraction_mod1"],
        "undecided_fraction": exp.final["fraction_undecided"],
        "inner_test": inner,
        "series": exp.to_dict()["series"],
        "trajectories": trajectories,
    }

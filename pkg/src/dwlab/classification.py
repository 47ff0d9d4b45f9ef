"""Denjoy-Wolff point location and dynamical classification."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import selfmaps as sm
from .errors import (
    ClassificationError,
    EllipticAutomorphismError,
    InvalidInput,
    OrbitTooShort,
    UndecidedError,
)

TAU_A = 1e-4
TAU_S = 1e-3
N_MAX = 100_000
FIT_RESIDUAL_MAX = 1e-2
INTERIOR_TOL = 1e-10
DIRECTION_DIAMETER = 1e-6
ESCAPE_RADIUS = 1e3

KINDS = ("elliptic", "hyperbolic", "parabolicI", "parabolicII", "undecided", "elliptic_automorphism")


def base_point(domain: str) -> complex:
    return 0j if domain == "disk" else 1j


@dataclass
class DenjoyWolff:
    point: object  # complex or geo.INF
    location: str  # interior | boundary
    iterations: int
    error: float
    method: str = ""

    def __iter__(self):
        yield self.point
        yield self.location


@dataclass
class Classification:
    kind: str
    domain: str
    dw_point: object
    location: str
    multiplier: complex | float | None = None
    multiplier_error: float | None = None
    s_inf: float | None = None
    b: float | None = None
    thresholds: dict = field(default_factory=lambda: {"tau_A": TAU_A, "tau_s": TAU_S, "N_max": N_MAX})
    diagnostics: dict = field(default_factory=dict)
    standard_form: object = None  # half-plane SelfMap with Denjoy-Wolff point at infinity

    @property
    def decided(self) -> bool:
        return self.kind not in ("undecided", "elliptic_automorphism")

    def to_dict(self) -> dict:
        mult = self.multiplier
        if isinstance(mult, complex):
            mult = [mult.real, mult.imag]
        return {
            "kind": self.kind,
            "domain": self.domain,
            "dw_point": point_json(self.dw_point),
            "location": self.location,
            "multiplier": mult,
            "multiplier_error": self.multiplier_error,
            "s_inf": self.s_inf,
            "b": self.b,
            "thresholds": dict(self.thresholds),
            "diagnostics": _jsonable(self.diagnostics),
        }


def point_json(p):
    if p is None:
        return None
    if p is geo.INF:
        return "inf"
    p = complex(p)
    return [p.real, p.imag]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# ---------------------------------------------------------------------------
# Denjoy-Wolff point


def find_denjoy_wolff(m: sm.SelfMap, n_max: int = N_MAX, z0=None) -> DenjoyWolff:
    """Follow the orbit of the model base point until it settles.

    Interior: geometric Cauchy convergence with a posteriori error below
    1e-10. Boundary: escape to infinity (half-plane), convergence to a real
    point (half-plane), or a settled direction z_n/|z_n| (disk).
    """
    z = base_point(m.domain) if z0 is None else complex(z0)
    if not geo.in_domain(z, m.domain):
        raise InvalidInput(f"start point {z} is outside the {m.domain}")
    fn = m.fn
    pts = [z]
    prev_d = None
    for n in range(1, n_max + 1):
        try:
            w = complex(fn(z))
        except Exception as exc:  # noqa: BLE001 - evaluation failures end the search
            raise UndecidedError(f"evaluation failed along the orbit: {exc}", {"iterations": n})
        d = abs(w - z)
        pts.append(w)
        if d == 0.0:
            return DenjoyWolff(w, "interior", n, 0.0, "fixed")
        if prev_d is not None and prev_d > 0:
            q = d / prev_d
            scale = max(1.0, abs(w))
            err = d * q / (1.0 - q) if q < 1.0 else math.inf
            # the limit must also sit well inside the domain, not on its edge
            room = geo.dist_to_boundary(w, m.domain)
            if err < INTERIOR_TOL * 1e-2 * scale and err < 1e-3 * room:
                return DenjoyWolff(w, "interior", n, err, "cauchy")
            if d < 1e-15 * scale and room > 1e-6:
                return DenjoyWolff(w, "interior", n, d, "stalled")
        prev_d = d
        if m.domain == "disk" and 1.0 - abs(w) < sm.BOUNDARY_EPS:
            break
        if m.domain == "halfplane" and (abs(w) > m.max_modulus or w.imag <= 0):
            break
        z = w
        if n in _CHECKPOINTS:
            found = _boundary_check(m, np.array(pts))
            if found is not None:
                return found
    found = _boundary_check(m, np.array(pts), final=True)
    if found is not None:
        return found
    steps = geo.hyp_dist(np.array(pts[:-1]), np.array(pts[1:]), m.domain, check=False)
    tail = steps[int(0.8 * len(steps)):]
    if len(tail) and np.ptp(tail) <= 1e-9 * max(1.0, float(np.max(tail))) and tail[-1] > 1e-6:
        raise EllipticAutomorphismError(
            "orbit does not converge and its hyperbolic steps are constant (elliptic automorphism?)",
            {"iterations": len(pts) - 1, "step": float(tail[-1])},
        )
    raise UndecidedError(
        f"orbit neither converged nor settled on the boundary within {n_max} iterations",
        {"iterations": len(pts) - 1, "last": complex(pts[-1])},
    )


_CHECKPOINTS = {1000, 5000, 20000, 50000}


def _boundary_check(m, pts, final=False):
    n = len(pts) - 1
    if n < 20:
        return None
    if m.domain == "halfplane":
        mod = np.abs(pts)
        tail = slice(int(0.8 * n), n + 1)
        grows = mod[-1] > ESCAPE_RADIUS and mod[-1] > 1.5 * mod[int(0.5 * n)]
        if grows and np.all(np.diff(pts.imag[tail]) >= -1e-12 * mod[tail][1:]):
            return DenjoyWolff(geo.INF, "boundary", n, 0.0, "escape")
        if final and mod[-1] > m.max_modulus * 0.5:
            return DenjoyWolff(geo.INF, "boundary", n, 0.0, "escape")
        # convergence to a real boundary point
        y = pts.imag[tail]
        if y[-1] < 1e-6 * max(1.0, abs(pts[-1])) and np.all(np.diff(y) <= 0):
            x = pts.real[tail]
            if np.ptp(x) < DIRECTION_DIAMETER:
                return DenjoyWolff(complex(x[-1], 0.0), "boundary", n, float(np.ptp(x)), "real-limit")
        return None
    gap = 1.0 - np.abs(pts)
    if gap[-1] > 1e-2 and not final:
        return None
    if not (gap[-1] < 0.75 * gap[int(0.5 * n)]):
        return None
    p, err, method = _disk_direction(pts)
    if p is None:
        if final:
            raise UndecidedError(
                "orbit approaches the circle but its direction has not settled",
                {"iterations": n, "direction_spread": err},
            )
        return None
    return DenjoyWolff(p, "boundary", n, err, method)


def _disk_direction(pts):
    """Cluster direction of a disk orbit running to the circle.

    Accepts the last direction when its spread over the final 20% is below
    1e-6, else extrapolates the angle as c0 + c1/n + c2/n^2 on two nested
    tail windows and accepts when both fits agree.
    """
    n = len(pts) - 1
    ref = pts[-1] / abs(pts[-1])
    ang = np.angle(pts / ref)
    tail = ang[int(0.8 * n):]
    spread = float(np.ptp(tail))
    if spread < DIRECTION_DIAMETER:
        return complex(ref * cmath.exp(1j * tail[-1])), spread, "direction"
    idx = np.arange(len(pts), dtype=float)
    ests = []
    for lo in (0.5, 0.75):
        sel = slice(max(int(lo * n), 1), n + 1)
        k = idx[sel]
        A = np.stack([np.ones_like(k), 1 / k, 1 / k**2], axis=1)
        coef, *_ = np.linalg.lstsq(A, ang[sel], rcond=None)
        ests.append(coef[0])
    err = abs(ests[0] - ests[1])
    if err < 1e-7:
        return complex(ref * cmath.exp(1j * ests[1])), err, "extrapolated"
    return None, spread, ""


def standard_form(m: sm.SelfMap, dw: DenjoyWolff) -> sm.SelfMap:
    """Half-plane conjugate of m with its boundary Denjoy-Wolff point sent to infinity."""
    if dw.location != "boundary":
        raise InvalidInput("standard form needs a boundary Denjoy-Wolff point")
    if m.domain == "halfplane":
        if dw.point is geo.INF:
            return m
        x0 = complex(dw.point).real
        T = geo.Mobius(0, -1, 1, -x0)  # z -> -1/(z - x0)
        return sm.mobius_conjugate(m, T, "halfplane", f"std({m.name})", max_modulus=1e8)
    p = complex(dw.point)
    return sm.conjugate(m, p / abs(p))


# ---------------------------------------------------------------------------
# multiplier


@dataclass
class MultiplierEstimate:
    value: complex | float
    error: float
    window: tuple = ()


def dilation_estimate(v: np.ndarray) -> MultiplierEstimate:
    """A = lim v_{n+1}/v_n from the tail of an orbit's heights.

    Means of the ratio over [0.8N, N) and [0.4N, 0.5N) are combined by
    Richardson extrapolation assuming a c/n correction; the error bar is
    the size of that correction.
    """
    v = np.asarray(v, dtype=float)
    if len(v) < 11:
        raise OrbitTooShort(f"need at least 11 orbit points for a stable tail, got {len(v)}")
    r = v[1:] / v[:-1]
    N = len(r)
    w1 = np.arange(int(0.8 * N), N)
    w2 = np.arange(int(0.4 * N), max(int(0.5 * N), int(0.4 * N) + 1))
    a1, a2 = r[w1].mean(), r[w2].mean()
    # effective index of a c/n tail over each window
    n1 = 1.0 / np.mean(1.0 / (w1 + 1.0))
    n2 = 1.0 / np.mean(1.0 / (w2 + 1.0))
    if n1 > n2:
        a = (n1 * a1 - n2 * a2) / (n1 - n2)
    else:
        a = a1
    err = abs(a - a1)
    # geometrically converging ratios: the last one plus its Aitken bound beats any window mean
    d1, d2 = abs(r[-1] - r[-2]), abs(r[-2] - r[-3])
    if d1 == 0.0:
        return MultiplierEstimate(float(r[-1]), 0.0, (N - 1, N))
    if d2 > 0 and d1 / d2 < 0.9:
        q = d1 / d2
        geo_err = d1 * q / (1 - q)
        if geo_err < err:
            return MultiplierEstimate(float(r[-1]), float(geo_err), (N - 3, N))
    return MultiplierEstimate(float(a), float(err), (int(w1[0]), N))


def multiplier(m: sm.SelfMap, dw: DenjoyWolff, orbit: sm.Orbit | None = None) -> MultiplierEstimate:
    """lambda = phi'(p) for an interior point, A from the orbit heights otherwise."""
    if dw.location == "interior":
        lam = complex(sm.eval_derivative(m, complex(dw.point)))
        return MultiplierEstimate(lam, 0.0 if m.dfn is not None else 1e-8)
    if orbit is None:
        std = standard_form(m, dw)
        orbit = sm.iterate(std, 1j, 10_000)
    return dilation_estimate(orbit.v)


# ---------------------------------------------------------------------------
# step tail


@dataclass
class StepFit:
    s_inf: float
    c: float
    beta: float
    residual: float


def fit_step_tail(steps: np.ndarray) -> StepFit:
    """Least-squares fit s_n ~ s_inf + c n^-beta over the second half of the steps.

    beta is scanned on a grid; for each beta the fit is linear in (s_inf, c).
    The residual is the RMS misfit relative to the mean tail step.
    """
    s = np.asarray(steps, dtype=float)
    N = len(s)
    if N < 10:
        raise OrbitTooShort("need at least 10 steps to fit the tail")
    n = np.arange(N // 2, N, dtype=float) + 1.0
    y = s[N // 2:]
    scale = max(float(np.mean(np.abs(y))), 1e-300)
    if np.ptp(y) <= 1e-14 * scale:
        return StepFit(float(np.mean(y)), 0.0, 0.0, 0.0)
    best = None
    for beta in np.arange(0.1, 4.0001, 0.05):
        X = np.stack([np.ones_like(n), n ** (-beta)], axis=1)
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        res = float(np.sqrt(np.mean((X @ coef - y) ** 2)) / scale)
        if best is None or res < best.residual:
            best = StepFit(float(coef[0]), float(coef[1]), float(beta), res)
    return best


# ---------------------------------------------------------------------------
# classify


def _standard_start(m: sm.SelfMap, dw: DenjoyWolff, z0) -> complex:
    """Image of z0 in the standard-form coordinates (i when no start point is given)."""
    if z0 is None:
        return 1j
    z0 = complex(z0)
    if m.domain == "disk":
        p = complex(dw.point)
        return complex(geo.cayley(p / abs(p))[0](z0))
    if dw.point is geo.INF:
        return z0
    return -1 / (z0 - complex(dw.point).real)


def classify(m: sm.SelfMap, n_max: int = N_MAX, tau_a: float = TAU_A, tau_s: float = TAU_S,
             z0=None) -> Classification:
    """Verdict from the orbit of the model base point, or of ``z0`` when given."""
    thresholds = {"tau_A": tau_a, "tau_s": tau_s, "N_max": n_max}
    try:
        dw = find_denjoy_wolff(m, n_max, z0)
    except EllipticAutomorphismError as exc:
        return Classification("elliptic_automorphism", m.domain, None, "", thresholds=thresholds,
                              diagnostics={"reason": str(exc), **exc.diagnostics})
    except UndecidedError as exc:
        return Classification("undecided", m.domain, None, "", thresholds=thresholds,
                              diagnostics={"reason": str(exc), **exc.diagnostics})
    diag = {"dw_iterations": dw.iterations, "dw_error": dw.error, "dw_method": dw.method}
    if dw.location == "interior":
        lam = multiplier(m, dw)
        if abs(lam.value) >= 1 - 1e-9:
            return Classification("elliptic_automorphism", m.domain, dw.point, "interior", lam.value,
                                  lam.error, thresholds=thresholds,
                                  diagnostics={**diag, "reason": "|phi'(p)| = 1 at an interior fixed point"})
        return Classification("elliptic", m.domain, dw.point, "interior", lam.value, lam.error,
                              thresholds=thresholds, diagnostics=diag)

    std = standard_form(m, dw)
    start = _standard_start(m, dw, z0)
    N = 1000
    while True:
        orbit = sm.iterate(std, start, N)
        verdict = _boundary_verdict(orbit, tau_a, tau_s)
        verdict.diagnostics = {**diag, **verdict.diagnostics}
        verdict.domain = m.domain
        verdict.dw_point = dw.point
        verdict.thresholds = thresholds
        verdict.standard_form = std
        if verdict.kind != "undecided" or orbit.escaped or N >= n_max:
            return verdict
        N = min(10 * N, n_max)


def _boundary_verdict(orbit: sm.Orbit, tau_a: float, tau_s: float) -> Classification:
    diag = {"orbit_length": orbit.n_iterations, "escaped": orbit.escaped}
    try:
        A = dilation_estimate(orbit.v)
    except OrbitTooShort as exc:
        return Classification("undecided", "halfplane", geo.INF, "boundary",
                              diagnostics={**diag, "reason": str(exc)})
    diag["A_window"] = A.window
    if A.value > 1 + tau_a:
        if A.value - A.error > 1 + tau_a:
            return Classification("hyperbolic", "halfplane", geo.INF, "boundary", A.value, A.error,
                                  diagnostics=diag)
        return Classification("undecided", "halfplane", geo.INF, "boundary", A.value, A.error,
                              diagnostics={**diag, "reason": "dilation not separated from 1 by its error bar"})
    if abs(A.value - 1) > tau_a:
        return Classification("undecided", "halfplane", geo.INF, "boundary", A.value, A.error,
                              diagnostics={**diag, "reason": "dilation below 1"})
    steps = orbit.steps
    fit = fit_step_tail(steps)
    tail = steps[len(steps) // 2:]
    diag.update(step_fit={"s_inf": fit.s_inf, "c": fit.c, "beta": fit.beta, "residual": fit.residual},
                step_tail=tail[-200:].tolist())
    if fit.s_inf > tau_s and fit.residual < FIT_RESIDUAL_MAX:
        b = pommerenke_b(orbit)
        return Classification("parabolicI", "halfplane", geo.INF, "boundary", A.value, A.error,
                              s_inf=fit.s_inf, b=b, diagnostics=diag)
    decreasing = tail[-1] < tail[0] * (1 - 1e-9)
    if steps[-1] < tau_s and decreasing:
        return Classification("parabolicII", "halfplane", geo.INF, "boundary", A.value, A.error,
                              s_inf=0.0, diagnostics=diag)
    return Classification("undecided", "halfplane", geo.INF, "boundary", A.value, A.error,
                          diagnostics={**diag, "reason": "step tail inconclusive", "step_tail": tail.tolist()})


def pommerenke_b(orbit: sm.Orbit, tail_fraction: float = 0.2) -> float:
    """Tail average of (u_{n+1} - u_n) / v_n."""
    u, v = orbit.u, orbit.v
    if orbit.stride != 1:
        raise InvalidInput("b needs a dense orbit")
    q = np.diff(u) / v[:-1]
    start = int((1 - tail_fraction) * len(q))
    return float(np.mean(q[start:]))


# ---------------------------------------------------------------------------
# type II escape


@dataclass
class Type2EscapeReport:
    precondition_ok: bool
    reason: str = ""
    z: complex = 0j
    N: int = 0
    min_im_tail: float | None = None
    im_final: float | None = None
    trend_slope: float | None = None
    rho_to_base: list = field(default_factory=list)  # (n, rho(phi_n(z), phi_n(i)))

    @property
    def rho_final(self):
        return self.rho_to_base[-1][1] if self.rho_to_base else None

    @property
    def rho_decreasing(self) -> bool:
        r = [x[1] for x in self.rho_to_base]
        return all(b <= a + 1e-12 for a, b in zip(r, r[1:]))

    def to_dict(self):
        return {
            "precondition_ok": self.precondition_ok,
            "reason": self.reason,
            "z": [self.z.real, self.z.imag],
            "N": self.N,
            "min_im_tail": self.min_im_tail,
            "im_final": self.im_final,
            "trend_slope": self.trend_slope,
            "rho_to_base": self.rho_to_base,
            "rho_decreasing": self.rho_decreasing if self.rho_to_base else None,
        }


def verify_type2_escape(m: sm.SelfMap, z, N: int = 1000, classification: Classification | None = None
                        ) -> Type2EscapeReport:
    """Im phi_n(z) -> infinity and rho(phi_n(z), phi_n(i)) -> 0 for a zero-step map."""
    z = complex(z)
    if classification is None:
        classification = classify(m)
    if classification.kind != "parabolicII":
        return Type2EscapeReport(False, f"map classified {classification.kind}, not parabolicII", z, N)
    std = classification.standard_form or m
    a = sm.iterate(std, z, N)
    b = sm.iterate(std, 1j, N)
    k = min(len(a.points), len(b.points))
    im = a.v[:k]
    half = k // 2
    ns = np.arange(half, k)
    slope = float(np.polyfit(ns, im[half:], 1)[0]) if k - half >= 2 else None
    rhos = []
    checkpoints = sorted({max(1, k // 8), max(1, k // 4), max(1, k // 2), k - 1})
    for n in checkpoints:
        rhos.append((int(a.indices[n]), float(geo.hyp_dist_halfplane(a.points[n], b.points[n], check=False))))
    return Type2EscapeReport(True, "", z, N, float(im[half:].min()), float(im[-1]), slope, rhos)

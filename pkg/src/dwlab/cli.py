"""Command-line batch runner: ``dwlab <subcommand> [map] [options]``.

Exit codes: 0 pass, 1 usage error, 2 a verified inequality was violated,
3 undecided (insufficient resolution or no verdict).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from importlib import resources

import jsonschema
import numpy as np
from referencing import Registry, Resource

from . import __version__
from . import boundary as bd
from . import classification as cl
from . import conjugation as cj
from . import harmonic as hm
from . import selfmaps as sm
from .errors import (ClassificationError, DWLabError, GridError, InvalidInput, ParseError, PreconditionError,
                     UndecidedError)

SUBCOMMANDS = ("classify", "orbit", "conjugate", "harmonic", "exhaustion", "boundary", "probe-p2")
EXIT_PASS, EXIT_USAGE, EXIT_VIOLATION, EXIT_UNDECIDED = 0, 1, 2, 3

DEFAULT_N = {"classify": cl.N_MAX, "orbit": 1000, "conjugate": None, "harmonic": 8, "exhaustion": 8,
             "boundary": 30, "probe-p2": 100}


class UsageError(DWLabError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class ExperimentConfig:
    source: str
    domain: str = "disk"
    n_max: int | None = None
    samples: int = 500
    grid: int = 256
    t0: float | None = None
    seed: int = 0
    schedule_depth: int = bd.SCHEDULE_DEPTH
    z0: list | None = None
    escape_modulus: float | None = None

    @property
    def h(self) -> float:
        return 1.0 / self.grid

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# schema


def _load_schema(name):
    return json.loads(resources.files("dwlab").joinpath("schemas", name).read_text(encoding="utf-8"))


def _registry():
    reg = Registry()
    for name in ("config.schema.json", "report.schema.json"):
        schema = _load_schema(name)
        reg = reg.with_resource(schema["$id"], Resource.from_contents(schema))
    return reg


def validate_config(cfg: dict):
    jsonschema.Draft202012Validator(_load_schema("config.schema.json")).validate(cfg)


def validate_report(report: dict):
    jsonschema.Draft202012Validator(_load_schema("report.schema.json"), registry=_registry()).validate(report)


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dwlab", description="Denjoy-Wolff iteration experiments.")
    parser.add_argument("--version", action="version", version=f"dwlab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("source", nargs="?", help="catalog:<domain>:<name> or an expression in z")
        p.add_argument("--map", help="map expression in z")
        p.add_argument("--catalog", help="catalog map as <domain>:<name>")
        p.add_argument("--domain", choices=sm.DOMAINS)
        p.add_argument("--n-max", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--grid", type=int, help="lattice spacing h = 1/GRID (128, 256 or 512)")
        p.add_argument("--t0", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir", default=".")
        p.add_argument("--schedule-depth", type=int)
        p.add_argument("--z0", type=complex, help="orbit start, e.g. 0.5+0.25j")
        p.add_argument("--escape-modulus", type=float)
        p.add_argument("--config", help="file of key=value lines; flags take precedence")
    return parser


_INT_KEYS = {"n_max", "samples", "grid", "seed", "schedule_depth"}
_FLOAT_KEYS = {"t0", "escape_modulus"}


def read_config_file(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            try:
                if key in _INT_KEYS:
                    out[key] = int(value)
                elif key in _FLOAT_KEYS:
                    out[key] = float(value)
                elif key == "z0":
                    z = complex(value.replace(" ", ""))
                    out[key] = [z.real, z.imag]
                elif key in ("source", "map", "catalog", "domain"):
                    out[key] = value
                else:
                    raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return out


def make_config(args) -> ExperimentConfig:
    values = read_config_file(args.config) if args.config else {}
    for key in ("map", "catalog", "domain", "n_max", "samples", "grid", "t0", "seed", "schedule_depth",
                "escape_modulus"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    if args.z0 is not None:
        values["z0"] = [args.z0.real, args.z0.imag]
    catalog_flag = values.pop("catalog", None)
    if catalog_flag and not catalog_flag.startswith("catalog:"):
        catalog_flag = "catalog:" + catalog_flag
    sources = [s for s in (args.source, values.pop("map", None), catalog_flag) if s]
    if "source" in values and not sources:
        sources = [values["source"]]
    values.pop("source", None)
    if len(sources) != 1:
        raise UsageError("give exactly one map: positional source, --map or --catalog")
    source = sources[0]
    if source.startswith("catalog:"):
        parts = source.split(":", 2)
        if len(parts) == 3 and parts[1] in sm.DOMAINS:
            values.setdefault("domain", parts[1])
    values.setdefault("n_max", DEFAULT_N[args.subcommand])
    cfg = ExperimentConfig(source=source, **values)
    try:
        validate_config(cfg.to_dict())
    except jsonschema.ValidationError as exc:
        raise UsageError(f"invalid configuration: {exc.message}") from exc
    return cfg


# ---------------------------------------------------------------------------
# output


class Writer:
    """Collects every output file and writes them in one place, in name order."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.files = {}

    def text(self, name, content: str):
        self.files[name] = content.encode("utf-8")

    def binary(self, name, content: bytes):
        self.files[name] = content

    def csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        self.text(name, buf.getvalue())

    def flush(self):
        os.makedirs(self.out_dir, exist_ok=True)
        for name in sorted(self.files):
            with open(os.path.join(self.out_dir, name), "wb") as fh:
                fh.write(self.files[name])


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _json_default(obj):
    return cl._jsonable(obj)


def dumps(report) -> str:
    clean = cl._jsonable(report)
    return json.dumps(clean, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False,
                      default=_json_default) + "\n"


def _check(name, ok, margin=None, detail=None):
    out = {"name": name, "pass": bool(ok), "margin": None if margin is None else float(margin)}
    if detail is not None:
        out["detail"] = detail
    return out


# ---------------------------------------------------------------------------
# subcommands


def _classify(m, cfg):
    return cl.classify(m, n_max=cfg.n_max or cl.N_MAX)


def run_classify(m, cfg, writer, stem):
    c = _classify(m, cfg)
    start = cl.base_point(c.standard_form.domain if c.standard_form is not None else m.domain)
    orbit = sm.iterate(c.standard_form or m, start, 1000)
    writer.csv(stem + ".csv", ["n", "re", "im", "step"], orbit.to_rows())
    return c.to_dict(), [_check("decided", c.decided)], EXIT_PASS if c.decided else EXIT_UNDECIDED


def run_orbit(m, cfg, writer, stem):
    z0 = complex(*cfg.z0) if cfg.z0 else cl.base_point(m.domain)
    orbit = sm.iterate(m, z0, cfg.n_max)
    writer.csv(stem + ".csv", ["n", "re", "im", "step"], orbit.to_rows())
    v = orbit.v
    checks = []
    if m.domain == "halfplane":
        nondecr = bool(np.all(np.diff(v) >= -1e-12 * np.abs(v[1:])))
        checks.append(_check("im_nondecreasing", nondecr))
    result = {"z0": [z0.real, z0.imag], "iterations": orbit.n_iterations, "stride": orbit.stride,
              "escaped": orbit.escaped, "escape_reason": orbit.escape_reason,
              "last": [orbit.last.real, orbit.last.imag]}
    return result, checks, EXIT_PASS


def run_conjugate(m, cfg, writer, stem):
    c = cl.classify(m)
    if c.kind == "elliptic":
        conj = cj.koenigs(m, cfg.n_max or cj.KOENIGS_N, c)
    elif c.kind == "hyperbolic":
        conj = cj.valiron(m, cfg.n_max or cj.VALIRON_N, c)
    elif c.kind == "parabolicI":
        conj = cj.pommerenke(m, cfg.n_max or cj.POMMERENKE_N, c)
    else:
        return {"classification": c.to_dict(), "conjugation": None}, [
            _check("applicable", False, detail=f"no conjugation for kind {c.kind}")], EXIT_UNDECIDED
    rows = ((z.real, z.imag, s.real, s.imag, r)
            for z, s, r in zip(conj.test_points, conj(conj.test_points), conj.residuals))
    writer.csv(stem + ".csv", ["re_z", "im_z", "re_sigma", "im_sigma", "residual"],
               ([float(x) for x in row] for row in rows))
    result = {"classification": c.to_dict(), "conjugation": conj.to_dict()}
    if c.kind == "parabolicI":
        result["asymptotics"] = cj.parabolic_asymptotics(m, conj.N, c)
    return result, [_check("residual_finite", math.isfinite(conj.residual_max), -conj.residual_max)], EXIT_PASS


def _schwarz_target(m):
    w = complex(m.fn(0.3 + 0j))
    return hm.ClosedDisk(w, min(0.1, (1 - abs(w)) / 2))


def run_harmonic(m, cfg, writer, stem):
    if m.domain != "disk":
        raise InvalidInput("harmonic experiments need a disk map")
    h = cfg.h
    checks, result = [], {}
    sch = hm.verify_schwarz_lemma(m, _schwarz_target(m), h=h, seed=cfg.seed)
    result["schwarz"] = sch.to_dict()
    checks.append(_check("schwarz_lemma", sch.passed, sch.min_margin))
    cond = hm.verify_conditional_probability(0j, hm.Arc(0.0, math.pi / 2), hm.CircleCurve(0.5), h=h)
    result["conditional_probability"] = cond.to_dict()
    checks.append(_check("conditional_probability", cond.passed, cond.min_margin))
    slit = hm.verify_slit_comparison(hm.Arc(0.0, math.pi / 2, "A"), [(64, 0.9), (256, 0.999)], h)
    result["slit_comparison"] = slit.to_dict()
    worst = min(mg for *_, mg, vac in slit.configs if not vac)
    checks.append(_check("slit_comparison", slit.passed, worst))
    c = cl.classify(m)
    if c.kind == "elliptic":
        od = hm.omega_decay(m, cfg.t0, cfg.n_max, h, c.dw_point)
        result["omega_decay"] = od.to_dict()
        writer.csv("omega_decay.csv", ["n", "omega", "residual", "h"],
                   ((n, float(w), float(r), h) for n, w, r, _, _ in od.series))
        ex = od.exhaustion
        checks.append(_check("exhaustion_inclusions", ex.ok))
    else:
        result["omega_decay"] = None
    code = EXIT_PASS if all(ch["pass"] for ch in checks) else EXIT_VIOLATION
    return result, checks, code


def run_exhaustion(m, cfg, writer, stem):
    h = cfg.h
    c = cl.classify(m)
    if c.kind != "elliptic":
        raise InvalidInput(f"exhaustions need an elliptic map, got {c.kind}")
    t0 = cfg.t0 if cfg.t0 is not None else hm.choose_t0(m, h, c.dw_point)
    ex = hm.build_exhaustion(m, t0, cfg.n_max, h, c.dw_point)
    for level in ex.levels:
        writer.binary(f"omega_region_n{level.n}.pgm", level.region.to_pgm_bytes())
    writer.csv(stem + ".csv", ["n", "interior_cells", "free_cells", "circle_contacts", "max_radius"],
               ((L.n, L.region.n_interior, L.n_free_cells, L.n_circle_contacts, L.max_radius) for L in ex.levels))
    checks = [_check("subset", not any(ex.subset_violations.values()),
                     -float(sum(ex.subset_violations.values()))),
              _check("incl", not any(ex.incl_violations.values()), -float(sum(ex.incl_violations.values())))]
    return ex.to_dict(), checks, EXIT_PASS if ex.ok else EXIT_VIOLATION


def run_boundary(m, cfg, writer, stem):
    c = cl.classify(m)
    kw = {}
    if cfg.escape_modulus is not None:
        kw["escape_modulus"] = cfg.escape_modulus
    exp = bd.convergence_experiment(m, cfg.n_max, cfg.samples, c, cfg.seed, depth=cfg.schedule_depth, **kw)
    writer.csv(stem + ".csv", ["n", "fraction_converged", "fraction_mod1", "fraction_undecided"], exp.rows)
    result = {"classification": c.to_dict(), "experiment": exp.to_dict()}
    try:
        result["inner_test"] = bd.inner_test(m, max(cfg.samples, 100), cfg.seed, cfg.schedule_depth).to_dict()
    except UndecidedError as e:
        result["inner_test"] = {"verdict": "undecided", "diagnostics": e.diagnostics}
    und = exp.final["fraction_undecided"]
    checks = [_check("decided_majority", und < 0.5, 0.5 - und)]
    return result, checks, EXIT_PASS if und < 0.5 else EXIT_UNDECIDED


def run_probe(m, cfg, writer, stem):
    try:
        rep = bd.parabolic2_probe(m, cfg.n_max, cfg.samples, seed=cfg.seed,
                                  escape_modulus=cfg.escape_modulus or 50.0)
    except ClassificationError as exc:
        if isinstance(exc, UndecidedError):
            raise
        raise InvalidInput(str(exc)) from exc
    writer.csv(stem + ".csv", ["n", "fraction_converged", "fraction_mod1", "fraction_undecided"],
               ((r["n"], r["fraction_converged"], r["fraction_mod1"], r["fraction_undecided"])
                for r in rep["series"]))
    return rep, [], EXIT_PASS


RUNNERS = {"classify": run_classify, "orbit": run_orbit, "conjugate": run_conjugate, "harmonic": run_harmonic,
           "exhaustion": run_exhaustion, "boundary": run_boundary, "probe-p2": run_probe}


def run(subcommand: str, cfg: ExperimentConfig, out_dir: str = ".") -> tuple[int, dict]:
    m = sm.resolve_map(cfg.source, cfg.domain)
    stem = f"{subcommand}-{m.slug}-{cfg.seed}"
    writer = Writer(out_dir)
    try:
        result, checks, code = RUNNERS[subcommand](m, cfg, writer, stem)
    except UndecidedError as exc:
        result, checks, code = {"error": str(exc), "diagnostics": exc.diagnostics}, [], EXIT_UNDECIDED
    status = {EXIT_PASS: "pass", EXIT_VIOLATION: "violation", EXIT_UNDECIDED: "undecided"}[code]
    if subcommand == "probe-p2":
        status = "exploratory"
    report = {
        "tool": "dwlab", "version": __version__, "subcommand": subcommand,
        "map": {"name": m.name, "domain": m.domain, "slug": m.slug},
        "config": cfg.to_dict(), "status": status, "exit_code": code, "checks": checks,
        "files": sorted(list(writer.files) + [stem + ".json"]), "result": result,
    }
    report = json.loads(dumps(report))
    validate_report(report)
    writer.text(stem + ".json", dumps(report))
    writer.flush()
    return code, report


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = make_config(args)
        code, report = run(args.subcommand, cfg, args.out_dir)
    except (UsageError, ParseError, InvalidInput, PreconditionError) as exc:
        print(f"dwlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GridError as exc:
        print(f"dwlab: undecided: {exc}", file=sys.stderr)
        return EXIT_UNDECIDED
    except OSError as exc:
        print(f"dwlab: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    summary = {k: report["result"].get(k) for k in ("kind", "multiplier", "s_inf", "b") if k in report["result"]}
    print(f"{args.subcommand} {report['map']['domain']}:{report['map']['name']} -> {report['status']}"
          + (f" {json.dumps(cl._jsonable(summary))}" if summary else ""))
    return code


if __name__ == "__main__":
    sys.exit(main())

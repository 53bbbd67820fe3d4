"""Command-line surface: reproducible experiment runs with strict config
validation, JSON/CSV artifacts, and a hashed run manifest.

Exit codes: 0 all checks pass, 1 a declared check failed, 2 usage or
config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import barriers, exhaustion, geometry, nonexistence, solver

DEFAULT_SEED = 42


class ConfigError(ValueError):
    """Invalid run configuration; ``locator`` names the offending field."""

    def __init__(self, message, locator=""):
        super().__init__(f"{locator}: {message}" if locator else message)
        self.locator = locator


@dataclass
class RunConfig:
    command: str
    options: dict = dc_field(default_factory=dict)
    out_dir: str = "out"


@dataclass
class RunManifest:
    config: dict
    artifacts: dict
    timings: dict
    summary: dict
    exit_code: int

    def to_dict(self):
        return {"config": self.config, "artifacts": self.artifacts,
                "timings": self.timings, "summary": self.summary,
                "exit_code": self.exit_code}


# ---------------------------------------------------------------------------
# config schema and validation
# ---------------------------------------------------------------------------

def _positive(x):
    return x > 0


_SCHEMAS = {
    "constants": {
        "eps": (float, _positive, 1.0),
    },
    "barrier": {
        "profile": (str, lambda v: v in ("psi", "g", "gp"), "g"),
        "n": (int, lambda v: v >= 2, 2),
        "p": (float, lambda v: v > 1, 2.0),
        "c": (float, _positive, 1.0),
        "eps": (float, _positive, 1.0),
        "amplitude": (float, _positive, None),
        "s_min": (float, _positive, 0.1),
        "s_max": (float, _positive, 10.0),
        "samples": (int, lambda v: v >= 10, 200),
    },
    "solve": {
        "domain": (str, None, "fermi-rect"),
        "s0": (float, None, 0.5),
        "s1": (float, None, 5.0),
        "t0": (float, None, -3.0),
        "t1": (float, None, 3.0),
        "h": (float, _positive, 0.1),
        "phi": (str, None, "gprofile"),
        "p": (float, lambda v: v > 1, None),
        "newton_tol": (float, _positive, 1e-10),
    },
    "solve-asymptotic": {
        "domain": (str, None, "h2"),
        "manifold": (str, None, "h2"),
        "phi": (str, None, "cos"),
        "radii": (list, lambda v: len(v) >= 2, None),
        "h": (float, _positive, 0.1),
        "probes": (list, None, None),
        "theta_conv": (float, _positive, 1e-6),
        "certify": (list, None, []),
        "halfwidth": (float, _positive, 0.25),
    },
    "nonexist": {
        "rho": (float, _positive, 1.0),
        "s": (float, _positive, 1.0),
        "radius": (float, _positive, 8.0),
        "levels": (list, lambda v: len(v) >= 1, [0.1, 0.05, 0.025]),
    },
    "verify": {},
}

_COMMON = {"command": (str, None, None), "out": (str, None, "out"),
           "seed": (int, None, None)}


def _coerce(key, value, kind):
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is list and isinstance(value, (list, tuple)):
        return list(value)
    if kind is str and isinstance(value, str):
        return value
    raise ConfigError(f"expected {kind.__name__}, got {value!r}", locator=key)


def parse_config(obj):
    """Validate a config mapping into a RunConfig.

    Unknown keys are rejected (strict mode); every error names the
    offending field."""
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    if "command" not in obj:
        raise ConfigError("missing required field", locator="command")
    command = obj["command"]
    if command not in _SCHEMAS:
        raise ConfigError(f"unknown command {command!r} (choose from "
                          f"{sorted(_SCHEMAS)})", locator="command")
    schema = _SCHEMAS[command]
    options = {}
    for key, value in obj.items():
        if key in _COMMON:
            continue
        if key not in schema:
            raise ConfigError(f"unknown key for command {command!r}", locator=key)
        kind, check, _ = schema[key]
        value = _coerce(key, value, kind)
        if check is not None and not check(value):
            raise ConfigError(f"value {value!r} out of range", locator=key)
        options[key] = value
    for key, (kind, check, default) in schema.items():
        if key not in options and default is not None:
            options[key] = default
    if "levels" in options and isinstance(obj.get("levels"), int):
        raise ConfigError("levels must be a list of mesh sizes", locator="levels")
    return RunConfig(command=command, options=options,
                     out_dir=str(obj.get("out", "out")))


def _parse_phi(spec_str):
    if spec_str == "cos":
        return exhaustion.phi_cos()
    if spec_str.startswith("const:"):
        return exhaustion.phi_const(float(spec_str[6:]))
    if spec_str.startswith("step:"):
        windows = []
        for part in spec_str[5:].split(";"):
            lo, hi, v = part.split(",")
            windows.append((float(lo), float(hi), float(v)))
        return exhaustion.phi_step(windows)
    if spec_str.startswith("table:"):
        return exhaustion.phi_table(spec_str[6:])
    if spec_str == "gprofile":
        return exhaustion.phi_field(
            lambda s, t: barriers.g_eval(2, s)[0], label="gprofile")
    raise ConfigError(f"unknown phi preset {spec_str!r}", locator="phi")


# ---------------------------------------------------------------------------
# artifact helpers
# ---------------------------------------------------------------------------

def _write_json(path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Run:
    def __init__(self, config):
        self.config = config
        self.out = Path(config.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts = {}
        self.timings = {}

    def emit_json(self, name, payload):
        path = self.out / name
        _write_json(path, payload)
        self.artifacts[name] = _sha256(path)

    def emit_field(self, name, fld):
        path = self.out / name
        solver.field_to_csv(fld, path)
        self.artifacts[name] = _sha256(path)


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------

def _run_constants(run, opts):
    a_min = barriers.min_barrier_constant(opts["eps"])
    payload = {"eps": opts["eps"], "A_min": a_min,
               "B": barriers.universal_constant_B(2)}
    run.emit_json("constants.json", payload)
    return {"A_min": a_min, "pass": True}


def _run_barrier(run, opts):
    n = opts["n"]
    s_grid = np.geomspace(opts["s_min"], opts["s_max"], opts["samples"])
    if opts["profile"] == "g":
        profile = barriers.make_g_profile(n)
        operator = "minimal-surface"
    elif opts["profile"] == "gp":
        profile = barriers.make_gp_profile(n, opts["p"], opts["c"])
        operator = "p-laplace"
    else:
        amp = opts.get("amplitude")
        if amp is None:
            amp = barriers.min_barrier_constant(opts["eps"]) * (1.0 + 1e-6)
        profile = barriers.make_psi_profile(amp)
        operator = "minimal-surface"
    if opts["profile"] == "psi":
        # worst admissible Laplacian for the collar profile is the excess itself
        res = barriers.radial_supersolution_residual(
            profile, operator, np.full_like(s_grid, opts["eps"]), s_grid)
        cert = barriers.SupersolutionCertificate(
            profile_kind="psi", params=dict(profile.params), operator=operator,
            sample_grid=s_grid, residuals=np.atleast_1d(res),
            worst_case_laplacian_used=True, tolerance=1e-10)
    else:
        cert = barriers.certify_supersolution(profile, operator, n, s_grid)
    run.emit_json("barrier_certificate.json", cert.to_dict())
    return {"max_residual": cert.max_residual, "pass": cert.passed}


def _run_solve(run, opts):
    if opts["domain"] != "fermi-rect":
        raise ConfigError("only fermi-rect bounded solves are exposed here; "
                          "use solve-asymptotic for domains", locator="domain")
    man = geometry.hyperbolic_space(2)
    chart = geometry.fermi_chart(man)
    grid = solver.fermi_rect_grid(chart, (opts["s0"], opts["s1"]),
                                  (opts["t0"], opts["t1"]), opts["h"])
    phi = _parse_phi(opts["phi"])
    if phi.field is None:
        raise ConfigError("bounded rectangle solves need field-type data "
                          "(e.g. gprofile or const:<v>)", locator="phi")
    bvals = np.zeros(grid.n_nodes)
    m = grid.boundary_mask()
    bvals[m] = phi.field(grid.node_x1[m], grid.node_x2[m])
    if opts.get("p") is not None:
        params = solver.SolveParams(operator="p-laplace", p=opts["p"],
                                    newton_tol=opts["newton_tol"])
    else:
        params = solver.SolveParams(newton_tol=opts["newton_tol"])
    fld = solver.solve_dirichlet(grid, bvals, params)
    run.emit_field("field.csv", fld)
    meta = solver.solve_metadata(fld)
    run.emit_json("solve_meta.json", meta)
    return {"residual": meta["residual"], "pass": True}


def _run_solve_asymptotic(run, opts):
    man = geometry.manifold_from_id(opts["manifold"])
    domain = geometry.domain_from_id(opts["domain"], man)
    phi = _parse_phi(opts["phi"])
    radii = [float(r) for r in opts["radii"]] if opts.get("radii") else \
        list(np.arange(4.0, 10.0 + 1e-9))
    probes = opts.get("probes")
    if not probes:
        r0 = radii[0]
        probes = [(0.2 * r0, 0.5 * r0, -np.pi + 0.1, np.pi - 0.1)]
    schedule = exhaustion.ExhaustionSchedule(
        radii=radii, h=opts["h"], probes=[tuple(p) for p in probes],
        theta_conv=opts["theta_conv"])
    certify = [(float(a), opts["halfwidth"]) for a in opts.get("certify", [])]
    report = exhaustion.run_exhaustion(domain, phi, schedule, certify=certify)
    for stage, fld in zip(report.stages, report.fields):
        run.emit_field(f"stage_R{stage['R']:g}.csv", fld)
    run.emit_json("asymptotic_report.json", report.to_dict())
    ok = report.converged and all(c.passed for c in report.certificates)
    return {"converged": report.converged,
            "certificates": [c.passed for c in report.certificates],
            "pass": bool(ok)}


def _run_nonexist(run, opts):
    spec = nonexistence.build_counterexample(rho=opts["rho"], s=opts["s"])
    report = nonexistence.run_gap_study(
        spec, levels=tuple(float(h) for h in opts["levels"]),
        radius=opts["radius"], keep_fields=True)
    for row, fld in zip(report.levels, report.fields):
        run.emit_field(f"level_h{row['h']:g}.csv", fld)
    run.emit_json("gap_report.json", report.to_dict())
    return {"verdict": report.verdict,
            "control_attained": report.control["attained"],
            "pass": bool(report.verdict and report.control["attained"])}


def _verify_checks(seed):
    """The fast invariant suite behind ``hypgraph verify``."""
    rng = np.random.default_rng(seed)
    checks = []

    def check(name, fn):
        checks.append((name, fn))

    def psi_values():
        v0 = barriers.psi_eval(0.0)[0]
        v1 = barriers.psi_eval(1.0)[0]
        assert abs(v0 - np.pi / 2) < 1e-14
        assert abs(v1 - np.pi / 6) < 1e-14
        t = np.geomspace(0.1, 50, 60)
        v, d1, _ = barriers.psi_eval(t)
        fd = (barriers.psi_eval(t * 1.0 + 1e-6)[0] - barriers.psi_eval(t - 1e-6)[0]) / 2e-6
        assert np.max(np.abs((fd - d1) / d1)) < 1e-5

    def g_closed_form():
        s = np.geomspace(0.01, 20, 40)
        val = barriers.g_eval(2, s)[0]
        exact = np.log(1.0 / np.tanh(0.5 * s))
        assert np.max(np.abs(val - exact)) < 1e-8

    def constants():
        a1 = barriers.min_barrier_constant(1.0)
        assert abs(a1 - np.sqrt(1.25 + np.sqrt(2.0))) < 1e-9
        assert a1 > 1.0

    def residual_exactness():
        for n in (2, 3, 4):
            prof = barriers.make_g_profile(n)
            s = np.geomspace(0.1, 10, 50)
            res = barriers.radial_supersolution_residual(
                prof, "minimal-surface", (n - 1) * np.tanh(s), s)
            assert np.max(np.abs(res)) < 1e-10

    def curvature_predicate():
        for man in (geometry.hyperbolic_space(2),
                    geometry.sinh_exp_manifold(2, 1.0)):
            r = np.geomspace(1e-3, 20, 100)
            assert np.all(man.curvature(r) <= -1.0 + 1e-12)

    def laplacian_bounds():
        man = geometry.hyperbolic_space(3)
        s = np.geomspace(0.05, 20, 50)
        assert np.all(geometry.laplacian_of_distance(man, "point", s) > man.n - 1)
        hyp = geometry.laplacian_of_distance(man, "hypersurface", s)
        assert np.all((hyp > 0) & (hyp < man.n - 1))

    def comparison_spot():
        man = geometry.hyperbolic_space(2)
        chart = geometry.fermi_chart(man)
        grid = solver.fermi_rect_grid(chart, (0.5, 2.5), (-1.0, 1.0), 0.2)
        m = grid.boundary_mask()
        base = np.where(m, np.sin(grid.node_x2) * 0.5, 0.0)
        lift = np.where(m, 0.3 + 0.2 * rng.random(grid.n_nodes), 0.0)
        u1 = solver.solve_dirichlet(grid, base).values
        u2 = solver.solve_dirichlet(grid, base + lift).values
        assert np.max(u1 - u2) <= 1e-9

    check("psi-values-and-derivatives", psi_values)
    check("g-closed-form-n2", g_closed_form)
    check("threshold-constant-eps1", constants)
    check("radial-residual-exactness", residual_exactness)
    check("curvature-predicate", curvature_predicate)
    check("distance-laplacian-bounds", laplacian_bounds)
    check("comparison-spot-check", comparison_spot)
    return checks


def _run_verify(run, opts, seed):
    results = {}
    ok = True
    for name, fn in _verify_checks(seed):
        t0 = time.perf_counter()
        try:
            fn()
            results[name] = {"pass": True}
        except Exception as err:  # noqa: BLE001 - report, do not crash
            results[name] = {"pass": False, "error": f"{type(err).__name__}: {err}"}
            ok = False
        results[name]["seconds"] = round(time.perf_counter() - t0, 4)
    run.emit_json("verify_manifest.json", {"seed": seed, "checks": results})
    return {"n_checks": len(results), "pass": ok}


_RUNNERS = {
    "constants": _run_constants,
    "barrier": _run_barrier,
    "solve": _run_solve,
    "solve-asymptotic": _run_solve_asymptotic,
    "nonexist": _run_nonexist,
}


def execute(config: RunConfig):
    """Dispatch a validated config, write artifacts, return the manifest."""
    run = _Run(config)
    seed = config.options.get("seed")
    if seed is None:
        seed = int(os.environ.get("HYPGRAPH_SEED", DEFAULT_SEED))
    t0 = time.perf_counter()
    try:
        if config.command == "verify":
            summary = _run_verify(run, config.options, seed)
        else:
            summary = _RUNNERS[config.command](run, config.options)
        exit_code = 0 if summary.get("pass", False) else 1
    except (solver.SolverError, RuntimeError) as err:
        summary = {"error": f"{type(err).__name__}: {err}", "pass": False}
        exit_code = 3
    run.timings["total"] = round(time.perf_counter() - t0, 4)
    manifest = RunManifest(
        config={"command": config.command, **config.options, "out": config.out_dir},
        artifacts=run.artifacts, timings=run.timings, summary=summary,
        exit_code=exit_code)
    _write_json(run.out / "run_manifest.json", manifest.to_dict())
    return manifest


# ---------------------------------------------------------------------------
# argparse front end
# ---------------------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hypgraph",
        description="Minimal-graph Dirichlet problems on negatively curved "
                    "model manifolds")
    parser.add_argument("--config", help="JSON config file (overrides flags)")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("constants", help="threshold amplitude for a Laplacian excess")
    p.add_argument("--eps", type=float, default=1.0)

    p = sub.add_parser("barrier", help="supersolution certificate for a profile")
    p.add_argument("--profile", choices=("psi", "g", "gp"), default="g")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--s-min", dest="s_min", type=float, default=0.1)
    p.add_argument("--s-max", dest="s_max", type=float, default=10.0)

    p = sub.add_parser("solve", help="bounded Dirichlet solve on a Fermi rectangle")
    for name, default in (("s0", 0.5), ("s1", 5.0), ("t0", -3.0), ("t1", 3.0),
                          ("h", 0.1)):
        p.add_argument(f"--{name}", type=float, default=default)
    p.add_argument("--phi", default="gprofile")
    p.add_argument("--p", type=float, default=None)

    p = sub.add_parser("solve-asymptotic", help="exhaustion run with certificates")
    p.add_argument("--domain", default="h2")
    p.add_argument("--manifold", default="h2")
    p.add_argument("--phi", default="cos")
    p.add_argument("--radii", default="4:10",
                   help="lo:hi (unit steps) or comma-separated list")
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--theta-conv", dest="theta_conv", type=float, default=1e-6)
    p.add_argument("--certify", default="",
                   help="comma-separated ideal angles")
    p.add_argument("--halfwidth", type=float, default=0.25)

    p = sub.add_parser("nonexist", help="boundary-gap study on the counterexample")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=8.0)
    p.add_argument("--levels", default="0.1,0.05,0.025")

    sub.add_parser("verify", help="run the fast invariant suite")

    for sp in sub.choices.values():
        sp.add_argument("--out", default="out")
    return parser


def _args_to_config(args):
    if args.config:
        try:
            obj = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config: {err}", locator="--config")
        return parse_config(obj)
    if not args.command:
        raise ConfigError("a command or --config file is required",
                          locator="command")
    obj = {"command": args.command, "out": getattr(args, "out", "out")}
    skip = {"command", "config", "out"}
    for key, value in vars(args).items():
        if key in skip or value is None:
            continue
        if key == "radii":
            if ":" in value:
                lo, hi = value.split(":")
                obj["radii"] = list(np.arange(float(lo), float(hi) + 1e-9))
            else:
                obj["radii"] = [float(v) for v in value.split(",")]
        elif key == "levels":
            obj["levels"] = [float(v) for v in value.split(",")]
        elif key == "certify":
            if value:
                obj["certify"] = [float(v) for v in value.split(",")]
        else:
            obj[key] = value
    return parse_config(obj)


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _args_to_config(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    manifest = execute(config)
    print(json.dumps(manifest.summary, indent=2, sort_keys=True))
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Usage::

    curved-polygons spectrum --n 5
    curved-polygons classify --n 3 --alpha 3
    curved-polygons probe --n 3 --alpha 0 --epsilon 1e-6 --format csv --out probe.csv
    curved-polygons sweep --n-list 3 5 7 --alpha-grid 0 1 2 3 4 5
    curved-polygons simulate --scenario run.json --T 10

Every command reads an optional JSON scenario (``--scenario``) whose fields
are overridden by flags.  Exit codes: 0 success, 1 domain error (a
``CurvedNBodyError``, reported with its class name), 2 input error.
"""

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from curved_polygons import dynamics, families, reduction, spectra
from curved_polygons.errors import CurvedNBodyError
from curved_polygons.geometry import regular_polygon, spherical_to_cartesian
from curved_polygons.potential import equilibrium_residual_cartesian

COMMANDS = (
    "polygon",
    "verify",
    "spectrum",
    "certify",
    "classify",
    "simulate",
    "probe",
    "masses",
    "bifurcate",
    "sweep",
)
INTEGRATOR_FIELDS = {"dt", "T", "sample_stride", "scheme"}


class ParseError(ValueError):
    def __init__(self, message, line=None, column=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}, column {column}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(message + (f" ({'; '.join(where)})" if where else ""))
        self.line, self.column, self.field = line, column, field


class ValidationError(ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


@dataclass
class Scenario:
    n: int
    masses: list = None
    phi: list = None
    theta: list = None
    alpha: float = 0.0
    beta: float = 0.0
    epsilon: float = 1e-6
    direction: str = "unstable-mode"
    integrator: dict = field(default_factory=dict)
    seed: int = None

    def integrator_config(self):
        return dynamics.IntegratorConfig(**{"dt": 1e-3, "T": 100.0, **self.integrator})

    def mass_array(self):
        return np.ones(self.n) if self.masses is None else np.asarray(self.masses, float)

    def angles(self):
        """Explicit ``(phi, theta)`` or the equatorial regular polygon."""
        if self.phi is None:
            poly = regular_polygon(self.n)
            phi, theta = poly.phi, poly.theta
        else:
            phi = np.asarray(self.phi, float)
            theta = np.full(self.n, np.pi / 2) if self.theta is None else np.asarray(self.theta, float)
        return phi, theta


SCENARIO_FIELDS = {f.name for f in fields(Scenario)}


def _number_list(value, name, n):
    if not isinstance(value, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        raise ValidationError(f"{name} must be a list of numbers", field=name)
    if len(value) != n:
        raise ValidationError(f"{name} has {len(value)} entries, expected n = {n}", field=name)
    if not np.all(np.isfinite(value)):
        raise ValidationError(f"{name} must be finite", field=name)
    return [float(x) for x in value]


def validate_scenario(data):
    """Apply defaults and preconditions to a mapping of scenario fields."""
    if not isinstance(data, dict):
        raise ValidationError("scenario must be a JSON object")
    unknown = sorted(set(data) - SCENARIO_FIELDS)
    if unknown:
        raise ValidationError(f"unknown scenario field(s): {', '.join(unknown)}", field=unknown[0])
    if "n" not in data:
        raise ValidationError("scenario requires n", field="n")
    n = data["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        raise ValidationError(f"n must be an integer >= 2, got {n!r}", field="n")

    out = dict(data)
    for name in ("masses", "phi", "theta"):
        if out.get(name) is not None:
            out[name] = _number_list(out[name], name, n)
    if out.get("masses") is not None and min(out["masses"]) <= 0:
        raise ValidationError("masses must be positive", field="masses")
    if out.get("phi") is None and n % 2 == 0:
        raise ValidationError(
            f"the regular polygon is an equilibrium only for odd n; got n = {n}", field="n"
        )
    if out.get("theta") is not None and out.get("phi") is None:
        raise ValidationError("theta requires phi", field="theta")
    for name in ("alpha", "beta", "epsilon"):
        if name in out:
            v = out[name]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
                raise ValidationError(f"{name} must be a finite number", field=name)
            out[name] = float(v)
    if "epsilon" in out and out["epsilon"] <= 0:
        raise ValidationError("epsilon must be positive", field="epsilon")
    if out.get("direction", "unstable-mode") not in ("unstable-mode", "random-shape"):
        raise ValidationError("direction must be unstable-mode or random-shape", field="direction")
    seed = out.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ValidationError("seed must be an integer", field="seed")

    integ = out.get("integrator") or {}
    if not isinstance(integ, dict):
        raise ValidationError("integrator must be an object", field="integrator")
    bad = sorted(set(integ) - INTEGRATOR_FIELDS)
    if bad:
        raise ValidationError(f"unknown integrator field(s): {', '.join(bad)}", field=bad[0])
    try:
        Scenario(n=n, integrator=integ).integrator_config()
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"integrator: {exc}", field="integrator") from exc
    out["integrator"] = dict(integ)
    return Scenario(**out)


def parse_scenario(text):
    """Parse a JSON scenario document into a validated :class:`Scenario`."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    return validate_scenario(data)


@dataclass
class CommandResult:
    exit_code: int
    payload: dict
    # optional (header, rows) rendering for --format csv
    table: tuple = None


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def render(result, fmt):
    if fmt == "json" or result.table is None:
        return json.dumps(_jsonable(result.payload), indent=2, sort_keys=True, allow_nan=False) + "\n"
    header, rows = result.table
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (float, np.floating)):
        # NaN/inf are not valid JSON; an undefined value (e.g. no fitted rate) is null
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# -- commands -----------------------------------------------------------------


def cmd_polygon(sc, opts):
    poly = regular_polygon(sc.n)
    q = poly.cartesian()
    res = equilibrium_residual_cartesian(np.ones(sc.n), q)
    payload = {
        "n": sc.n,
        "phi": poly.phi,
        "theta": poly.theta,
        "cartesian": q,
        "equilibrium_residual": res.max_norm,
    }
    rows = [[k + 1, poly.phi[k], poly.theta[k], *q[k]] for k in range(sc.n)]
    return payload, (["body", "phi", "theta", "x", "y", "z", "w"], rows)


def cmd_verify(sc, opts):
    phi, theta = sc.angles()
    m = sc.mass_array()
    res = equilibrium_residual_cartesian(m, spherical_to_cartesian(phi, theta))
    norms = np.linalg.norm(res.residual_vectors, axis=1)
    payload = {
        "n": sc.n,
        "masses": m,
        "max_residual": res.max_norm,
        "is_equilibrium": res.is_equilibrium,
        "tolerance": res.tol,
        "residual_norms": norms,
        "lambda": res.lam,
    }
    rows = [[k + 1, norms[k], res.lam[k]] for k in range(sc.n)]
    return payload, (["body", "residual_norm", "lambda"], rows)


def cmd_spectrum(sc, opts):
    rep = spectra.spectrum_report(sc.n)
    rows = [
        [k + 1, rep.gamma[k], rep.phi_evals[k], rep.theta_evals[k]] for k in range(sc.n)
    ]
    return rep.as_dict(), (["k", "gamma", "phi_eval", "theta_eval"], rows)


def cmd_certify(sc, opts):
    cert = spectra.certify_sequences(sc.n)
    d = cert.as_dict()
    rows = [[name, c["holds"], c["worst_margin"], c["count"]] for name, c in d["chains"].items()]
    return d, (["chain", "holds", "worst_margin", "count"], rows)


def cmd_classify(sc, opts):
    manifold = opts.get("manifold") or "S2"
    if manifold == "S1":
        v = reduction.classify_stability(sc.n, sc.alpha, manifold="S1")
        payload = {"n": sc.n, "alpha": sc.alpha, "manifold": "S1", "verdict": str(v)}
        return payload, (["n", "alpha", "manifold", "verdict"], [[sc.n, sc.alpha, "S1", str(v)]])
    rep = reduction.linearize_at_Y(sc.n, sc.alpha)
    d = rep.as_dict()
    d["manifold"] = "S2"
    rows = []
    for ec in rep.eigen_classes:
        z1, z2 = ec.eigenvalues
        rows.append([ec.part, ec.lam, ec.kind, z1.real, z1.imag, z2.real, z2.imag])
    return d, (["part", "lambda", "kind", "re1", "im1", "re2", "im2"], rows)


def _initial_state(sc):
    m = sc.mass_array()
    if sc.phi is None and sc.masses is None:
        state = dynamics.relative_equilibrium_trajectory(sc.n, sc.alpha, sc.beta, 0.0)
    else:
        phi, theta = sc.angles()
        state = dynamics.spherical_to_phase(
            m, phi, theta, m * sc.alpha * np.sin(theta) ** 2, np.zeros(sc.n)
        )
    if sc.seed is not None:
        rng = np.random.default_rng(sc.seed)
        phi, theta, pphi, pth = dynamics.phase_to_spherical(state)
        d = rng.standard_normal((4, sc.n))
        d *= sc.epsilon / np.max(np.abs(d))
        state = dynamics.spherical_to_phase(m, phi + d[0], theta + d[1], pphi + d[2], pth + d[3])
    return m, state


def cmd_simulate(sc, opts):
    m, state = _initial_state(sc)
    rec = dynamics.integrate(m, state, sc.integrator_config())
    payload = {"n": sc.n, "alpha": sc.alpha, "beta": sc.beta, "seed": sc.seed, **rec.summary()}
    return payload, (rec.csv_header(), rec.spherical_rows())


def cmd_probe(sc, opts):
    cfg = sc.integrator_config()
    rep = dynamics.stability_probe(
        sc.n, sc.alpha, epsilon=sc.epsilon, direction=sc.direction, cfg=cfg, seed=sc.seed
    )
    rec = rep.record
    rows = [[t, d] for t, d in zip(rec.times, rec.shape_deviation)]
    return rep.as_dict(), (["t", "shape_deviation"], rows)


def cmd_masses(sc, opts):
    if sc.phi is None:
        phi = regular_polygon(sc.n).phi
    else:
        phi = np.asarray(sc.phi, float)
    bound = opts.get("max_perturbation", 0.05)
    res = families.solve_masses(phi, max_perturbation=bound)
    d = res.as_dict()
    d["phi"] = phi
    d["threshold_alpha_sq"] = families.near_polygon_threshold(phi, res.masses)
    rows = [[k + 1, phi[k], res.masses[k]] for k in range(phi.size)]
    return d, (["body", "phi", "mass"], rows)


def cmd_bifurcate(sc, opts):
    points = int(opts.get("points") or 99)
    if points < 1:
        raise ValidationError("--points must be positive", field="points")
    grid = np.linspace(0.0, np.pi, points + 2)[1:-1]
    scan = families.bifurcation_scan(sc.n, grid)
    payload = {
        "n": sc.n,
        "critical_alpha_sq": scan.critical_alpha_sq,
        "equator_alpha_sq": scan.equator_alpha_sq,
        "gap": scan.gap,
        "theta": grid,
        "alpha_sq": [p.alpha_sq for p in scan.points],
    }
    rows = [[p.theta, p.alpha_sq, p.alpha] for p in scan.points]
    return payload, (["theta", "alpha_sq", "alpha"], rows)


def cmd_sweep(sc, opts):
    n_list = opts.get("n_list") or [sc.n]
    grid = opts.get("alpha_grid")
    if grid is None:
        grid = np.linspace(0.0, 2.0 * np.sqrt(spectra.critical_alpha_sq(max(n_list))), 11)
    cells = []
    for n in n_list:
        t1 = spectra.critical_alpha_sq(n)
        for a in grid:
            v = reduction.classify_stability(n, float(a))
            cells.append([n, float(a), float(a) ** 2, t1, float(a) ** 2 - t1, str(v)])
    header = ["n", "alpha", "alpha_sq", "theta1", "margin", "verdict"]
    return {"cells": [dict(zip(header, c)) for c in cells]}, (header, cells)


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def execute(command, scenario, opts=None):
    """Run a command; module errors become exit code 1, input errors exit code 2."""
    opts = opts or {}
    try:
        payload, table = HANDLERS[command](scenario, opts)
    except CurvedNBodyError as exc:
        return CommandResult(1, _error_payload(exc, getattr(exc, "details", {})))
    except ArithmeticError as exc:
        return CommandResult(1, _error_payload(exc, {}))
    except ValueError as exc:
        return CommandResult(2, _error_payload(exc, {}))
    return CommandResult(0, payload, table)


def _error_payload(exc, details):
    return {"error": type(exc).__name__, "message": str(exc), "details": _jsonable(details)}


# -- argument handling ----------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="JSON scenario file; flags override its fields")
    common.add_argument("--n", type=int, help="number of bodies")
    common.add_argument("--masses", type=float, nargs="+")
    common.add_argument("--phi", type=float, nargs="+", help="longitudes (radians)")
    common.add_argument("--theta", type=float, nargs="+", help="colatitudes (radians)")
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--direction", choices=["unstable-mode", "random-shape"])
    common.add_argument("--seed", type=int)
    common.add_argument("--dt", type=float)
    common.add_argument("--T", type=float)
    common.add_argument("--stride", type=int, dest="sample_stride")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--out", help="write output here instead of stdout")

    ap = argparse.ArgumentParser(
        prog="curved-polygons",
        description="Regular-polygon equilibria of the curved n-body problem on S^3.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "classify":
            p.add_argument("--manifold", choices=["S1", "S2"], default="S2")
        elif name == "masses":
            p.add_argument("--max-perturbation", type=float, default=0.05)
        elif name == "bifurcate":
            p.add_argument("--points", type=int, default=99)
        elif name == "sweep":
            p.add_argument("--n-list", type=int, nargs="+")
            p.add_argument("--alpha-grid", type=float, nargs="+")
    return ap


def _scenario_from_args(args):
    data = {}
    if args.scenario:
        try:
            with open(args.scenario, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ParseError(f"cannot read scenario: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc
        if not isinstance(data, dict):
            raise ValidationError("scenario must be a JSON object")
    for name in ("n", "masses", "phi", "theta", "alpha", "beta", "epsilon", "direction", "seed"):
        v = getattr(args, name)
        if v is not None:
            data[name] = v
    integ = dict(data.get("integrator") or {})
    for name in ("dt", "T", "sample_stride"):
        v = getattr(args, name)
        if v is not None:
            integ[name] = v
    if integ:
        data["integrator"] = integ
    if "n" not in data:
        if args.command == "sweep" and args.n_list:
            data["n"] = args.n_list[0]
        elif data.get("phi") is not None:
            data["n"] = len(data["phi"])
    return validate_scenario(data)


def main(argv=None):
    args = build_parser().parse_args(argv)
    opts = {
        k: getattr(args, k)
        for k in ("manifold", "max_perturbation", "points", "n_list", "alpha_grid")
        if hasattr(args, k)
    }
    try:
        sc = _scenario_from_args(args)
    except ValueError as exc:
        result = CommandResult(2, _error_payload(exc, {"field": getattr(exc, "field", None)}))
    else:
        result = execute(args.command, sc, opts)

    text = render(result, args.format if result.exit_code == 0 else "json")
    if args.out and result.exit_code == 0:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        (sys.stdout if result.exit_code == 0 else sys.stderr).write(text)
    return result.exit_code


if __name__ == "__main__":
    raise SystemExit(main())

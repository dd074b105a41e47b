"""Scenario files: schema, loading and the runners behind ``toriclab run``."""
from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Dict, List

import jsonschema
import numpy as np

from . import herm, quantize, raycurve, toricpotential
from .errors import ScenarioError
from .geometry import ConvexBody, Polytope, parse_number

KINDS = ("herm_slope", "energy_duality", "bonavero", "lkna_convergence", "quantization", "filtration_curve")

_NUMBER = {"oneOf": [{"type": "number"}, {"type": "string", "pattern": r"^\s*-?\d+(\s*/\s*\d+)?\s*$"}]}
_POINT = {"oneOf": [_NUMBER, {"type": "array", "items": _NUMBER, "minItems": 1, "maxItems": 2}]}
_VERTICES = {"type": "array", "items": _POINT, "minItems": 1}
_PIECES = {"type": "array", "items": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 3},
           "minItems": 1}

POTENTIAL_SCHEMA = {
    "type": "object",
    "required": ["vertices"],
    "properties": {
        "name": {"type": "string"},
        "vertices": _VERTICES,
        "body_vertices": _VERTICES,
        "h": {"type": "number", "exclusiveMinimum": 0},
        "g_pl_pieces": _PIECES,
        "g_poly": {"type": "array", "items": {"type": "number"}, "minItems": 1},
    },
    "additionalProperties": False,
}

RAY_SCHEMA = {
    "type": "object",
    "required": ["vertices", "speed_pl_pieces"],
    "properties": {
        "name": {"type": "string"},
        "vertices": _VERTICES,
        "h": {"type": "number", "exclusiveMinimum": 0},
        "speed_pl_pieces": _PIECES,
        "expected_slope": {"type": "number"},
    },
    "additionalProperties": False,
}

_K_LIST = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}

INPUT_SCHEMAS = {
    "herm_slope": {
        "type": "object",
        "required": ["check"],
        "properties": {
            "check": {"enum": ["det_slope", "d1v_axioms"]},
            "families": {"type": "integer", "minimum": 1},
            "max_dim": {"type": "integer", "minimum": 1, "maximum": 64},
        },
        "additionalProperties": False,
    },
    "energy_duality": {
        "type": "object",
        "required": ["check"],
        "properties": {
            "check": {"enum": ["energy_slope", "involution"]},
            "rays": {"type": "array", "items": RAY_SCHEMA, "minItems": 1},
            "curves_1d": {"type": "integer", "minimum": 0},
            "curves_2d": {"type": "integer", "minimum": 0},
        },
        "additionalProperties": False,
    },
    "bonavero": {
        "type": "object",
        "required": ["check", "potentials", "k_list"],
        "properties": {
            "check": {"enum": ["limit", "lower_bound", "envelope"]},
            "potentials": {"type": "array", "items": POTENTIAL_SCHEMA, "minItems": 1},
            "k_list": _K_LIST,
        },
        "additionalProperties": False,
    },
    "lkna_convergence": {
        "type": "object",
        "required": ["check", "rays"],
        "properties": {
            "check": {"enum": ["expansion", "slope_bridge", "exponent_bridge"]},
            "rays": {"type": "array", "items": RAY_SCHEMA, "minItems": 1},
            "k_list": _K_LIST,
            "k": {"type": "integer", "minimum": 1},
        },
        "additionalProperties": False,
    },
    "quantization": {
        "type": "object",
        "required": ["potential", "k_list"],
        "properties": {
            "potential": POTENTIAL_SCHEMA,
            "partner": POTENTIAL_SCHEMA,
            "k_list": _K_LIST,
        },
        "additionalProperties": False,
    },
    "filtration_curve": {
        "type": "object",
        "required": ["vertices", "k", "weights"],
        "properties": {
            "vertices": _VERTICES,
            "k": {"type": "integer", "minimum": 1},
            "weights": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "probe_tau": {"type": "number"},
            "expected_body": _VERTICES,
        },
        "additionalProperties": False,
    },
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["name", "kind", "inputs"],
    "properties": {
        "name": {"type": "string", "pattern": r"^[A-Za-z0-9_\-]+$"},
        "kind": {"enum": list(KINDS)},
        "description": {"type": "string"},
        "anchor": {"type": "string", "minLength": 1},
        "inputs": {"type": "object"},
        "params": {
            "type": "object",
            "properties": {
                "seed": {"type": "integer", "minimum": 0},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "max_seconds": {"type": "number", "exclusiveMinimum": 0},
                "threads": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


# --------------------------------------------------------------------------- loading

def _describe(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return f"{where}: {err.message}"


def validate(obj) -> dict:
    try:
        jsonschema.validate(obj, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as err:
        raise ScenarioError(_describe(err)) from None
    try:
        jsonschema.validate(obj["inputs"], INPUT_SCHEMAS[obj["kind"]])
    except jsonschema.ValidationError as err:
        raise ScenarioError("inputs/" + _describe(err)) from None
    return obj


def load(path) -> dict:
    """Read and validate a scenario file; a bare name refers to a bundled scenario."""
    p = Path(path)
    if not p.exists() and p.suffix == "":
        p = bundled_dir() / f"{path}.json"
    try:
        text = p.read_text()
    except OSError as err:
        raise ScenarioError(f"cannot read {path}: {err.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError(f"{p.name}: line {err.lineno} column {err.colno}: {err.msg}") from None
    return validate(obj)


def bundled_dir() -> Path:
    return Path(str(resources.files("toriclab") / "scenarios"))


def catalog() -> List[dict]:
    out = []
    for p in sorted(bundled_dir().glob("*.json")):
        obj = json.loads(p.read_text())
        out.append({"name": obj["name"], "kind": obj["kind"], "description": obj.get("description", ""),
                    "anchor": obj.get("anchor", "")})
    return out


# --------------------------------------------------------------------------- inputs

def _vertices(raw):
    return np.array([[parse_number(c) for c in np.atleast_1d(v)] for v in raw], dtype=float)


def build_potential(spec: dict) -> toricpotential.DualPotential:
    P = Polytope(_vertices(spec["vertices"]))
    h = spec.get("h")
    body = ConvexBody.hull(_vertices(spec["body_vertices"]), P.dim) if "body_vertices" in spec else None
    if "g_poly" in spec:
        coef = np.asarray(spec["g_poly"], dtype=float)
        if P.dim != 1:
            raise ScenarioError("g_poly is supported for n = 1 only")
        return toricpotential.DualPotential.from_function(
            P, lambda p: np.polynomial.polynomial.polyval(p[:, 0], coef), body, h)
    if "g_pl_pieces" in spec:
        pieces = [[parse_number(c) for c in row] for row in spec["g_pl_pieces"]]
        return toricpotential.DualPotential.from_pieces(P, pieces, body, h)
    return toricpotential.DualPotential.from_function(P, None, body, h)


def build_ray(spec: dict) -> raycurve.Ray:
    P = Polytope(_vertices(spec["vertices"]))
    pieces = np.array([[parse_number(c) for c in row] for row in spec["speed_pl_pieces"]], dtype=float)
    if pieces.shape[1] != P.dim + 1:
        raise ScenarioError(f"speed pieces need {P.dim + 1} coefficients")
    A, b = pieces[:, :-1], pieces[:, -1]
    return raycurve.Ray.geodesic(P, lambda p: np.max(p @ A.T + b, axis=1), spec.get("h"))


# --------------------------------------------------------------------------- results

@dataclass
class Assertion:
    name: str
    measured: float
    tolerance: float
    passed: bool
    row: dict = field(default_factory=dict)

    def to_json(self):
        return {"name": self.name, "passed": bool(self.passed), "measured": _num(self.measured),
                "tolerance": _num(self.tolerance), "row": {k: _num(v) for k, v in self.row.items()}}


@dataclass
class Result:
    columns: List[str]
    rows: List[list]
    assertions: List[Assertion]

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)


def _num(x):
    if isinstance(x, (bool, str)) or x is None:
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _within(name, measured, tol, row=None):
    return Assertion(name, float(measured), float(tol), bool(measured <= tol), row or {})


def _at_least(name, measured, bound, row=None):
    return Assertion(name, float(measured), float(bound), bool(measured >= bound), row or {})


# --------------------------------------------------------------------------- runners

def _run_herm(inputs, tol, rng) -> Result:
    rows, worst = [], 0.0
    max_dim = inputs.get("max_dim", 8)
    count = inputs.get("families", 50)
    if inputs["check"] == "det_slope":
        for i in range(count):
            n = int(rng.integers(1, max_dim + 1))
            F, _ = herm.random_positive_family(rng, n)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", herm.ConvergenceWarning)
                a = herm.det_slope(F)
                b = herm.stieltjes_integral(herm.filtration_of(F))
            rows.append([i, n, a, b, abs(a - b)])
        err = max(r[-1] for r in rows)
        bad = max(rows, key=lambda r: r[-1])
        return Result(["family", "dim", "det_slope", "stieltjes", "error"], rows,
                      [_within("det_slope_vs_stieltjes", err, tol, dict(zip(["family", "dim"], bad[:2])))])
    for i in range(count):
        n = int(rng.integers(1, max_dim + 1))
        U = [_random_metric(rng, n) for _ in range(3)]
        d = herm.d1v_distance
        dab, dba, dbc, dac = d(U[0], U[1]), d(U[1], U[0]), d(U[1], U[2]), d(U[0], U[2])
        dual = d(herm.dualize(U[0]), herm.dualize(U[1]))
        defects = [abs(dab - dba), abs(d(U[0], U[0])), abs(dual - dab), max(0.0, dac - dab - dbc)]
        rows.append([i, n, dab, dual, max(defects)])
        worst = max(worst, max(defects))
    return Result(["sample", "dim", "d1v", "d1v_dual", "defect"], rows, [_within("d1v_axioms", worst, tol)])


def _random_metric(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return herm.HermitianMetric(a.conj().T @ a + 0.5 * np.eye(n))


def _run_energy(inputs, tol, rng) -> Result:
    if inputs["check"] == "energy_slope":
        rows, out = [], []
        for spec in inputs.get("rays", []):
            r = build_ray(spec)
            e = raycurve.ray_energy_slope(r)
            rows.append([spec.get("name", ""), e.linear, e.integral, e.riemann, e.deviation])
            out.append(_within(f"methods_agree[{spec.get('name', '')}]", e.deviation, tol))
            if "expected_slope" in spec:
                miss = max(abs(v - spec["expected_slope"]) for v in e.values)
                out.append(_within(f"expected_slope[{spec.get('name', '')}]", miss, tol,
                                   {"expected": spec["expected_slope"]}))
        return Result(["ray", "linear", "integral", "riemann", "deviation"], rows, out)
    rows, out = [], []
    cases = [(Polytope.interval(0, 1), 1e-3, 2.0 ** -10)] * inputs.get("curves_1d", 20)
    cases += [(Polytope.simplex(2), 1 / 32, 2.0 ** -6)] * inputs.get("curves_2d", 5)
    for i, (P, h, step) in enumerate(cases):
        psi = raycurve.random_test_curve(rng, P, h, step)
        rep = raycurve.involution_errors(psi)
        bound = tol * step
        rows.append([i, P.dim, rep.curve_error, rep.ray_error, bound])
        out.append(_within(f"involution[{i}]", max(rep.curve_error, rep.ray_error), bound, {"dim": P.dim}))
    return Result(["curve", "dim", "hat_check_error", "check_hat_error", "bound"], rows, out)


def _run_bonavero(inputs, tol, rng) -> Result:
    rows, out = [], []
    check = inputs["check"]
    for spec in inputs["potentials"]:
        u = build_potential(spec)
        name = spec.get("name", "")
        n = u.dim
        if check == "envelope":
            env = toricpotential.i_envelope(u)
            model = toricpotential.model_envelope(u)
            same = float(np.max(np.abs(np.where(env.finite, env.values, 0) - np.where(model.finite, model.values, 0))))
            same += float(np.count_nonzero(env.finite != model.finite))
            idem = float(np.count_nonzero(toricpotential.i_envelope(env).values != env.values))
            gap = toricpotential.mixed_mass_gap(u, env).gap
            rows.append([name, same, idem, gap])
            out.append(_within(f"envelope[{name}]", max(same, idem, abs(gap)), tol))
            continue
        m = toricpotential.mass(u)
        for k in inputs["k_list"]:
            ratio = math.factorial(n) * quantize.h0_count(u, k) / k ** n
            if check == "limit":
                err = abs(ratio - m) / (m if n == 2 else 1.0)
                rows.append([name, k, ratio, m, err])
            else:
                rows.append([name, k, ratio, m, ratio - (m - 2.0 / k)])
        last = rows[-1]
        if check == "limit":
            out.append(_within(f"limit[{name}]", last[-1], tol, {"k": last[1]}))
        else:
            worst = min((r for r in rows if r[0] == name), key=lambda r: r[-1])
            out.append(_at_least(f"lower_bound[{name}]", worst[-1], 0.0, {"k": worst[1]}))
    if check == "envelope":
        return Result(["potential", "envelope_mismatch", "idempotence_defect", "mass_gap"], rows, out)
    tail = "error" if check == "limit" else "slack"
    return Result(["potential", "k", "normalized_count", "mass", tail], rows, out)


def _run_lkna(inputs, tol, rng) -> Result:
    rows, out = [], []
    check = inputs["check"]
    for spec in inputs["rays"]:
        r = build_ray(spec)
        name = spec.get("name", "")
        n = r.polytope.dim
        if check == "expansion":
            psi = raycurve.hat_curve(r)
            ks = inputs.get("k_list", [8, 16, 32, 64, 128])
            for k in ks:
                v = math.factorial(n) * quantize.lkna(psi, k) / k ** n
                rows.append([name, k, v, -(k + 1) / (2 * k), abs(v + (k + 1) / (2 * k))])
            limit = quantize.ina(r, ks)
            target = spec.get("expected_slope", -0.5)
            rows.append([name, "limit", limit, target, abs(limit - target)])
            out.append(_within(f"ina[{name}]", abs(limit - target), tol))
        elif check == "slope_bridge":
            k = inputs.get("k", 16)
            a, b = quantize.lk_ray_bridge(r, k)
            rows.append([name, k, a, b, abs(a - b)])
            out.append(_within(f"slope_bridge[{name}]", abs(a - b), tol, {"k": k}))
        else:
            k = inputs.get("k", 8)
            table = quantize.exponent_bridge_table(r, k)
            alphas = quantize.lattice_points(r.polytope, k)[:, 0]
            for al, (a, b) in zip(alphas, table):
                rows.append([name, int(al), a, b, abs(a - b)])
            j = int(np.argmax(np.abs(table[:, 0] - table[:, 1])))
            out.append(_within(f"exponent_bridge[{name}]", abs(table[j, 0] - table[j, 1]), tol,
                               {"alpha": int(alphas[j])}))
    return Result(["ray", "k", "value", "target", "error"], rows, out)


def _run_quantization(inputs, tol, rng) -> Result:
    u = build_potential(inputs["potential"])
    v = build_potential(inputs["partner"]) if "partner" in inputs else toricpotential.DualPotential.reference(
        u.polytope, u.h)
    ks = inputs["k_list"]
    lrows = quantize.quantization_table(u, ks)
    drows = quantize.d1k_table(u, v, ks)
    rows = [["Lk", r.k, r.value, r.target, r.error] for r in lrows]
    rows += [["d1k", r.k, r.value, r.target, r.error] for r in drows]
    last = lrows[-1]
    rel = last.error / max(abs(last.target), 1e-300)
    errs = [r.error for r in drows]
    rise = max([b - a for a, b in zip(errs[:-1], errs[1:])], default=0.0)
    return Result(["quantity", "k", "value", "target", "error"], rows,
                  [_within("lk_relative_error", rel, tol, {"k": last.k}),
                   _within("d1k_error_nonincreasing", max(rise, 0.0), 0.0)])


def _run_filtration(inputs, tol, rng) -> Result:
    P = Polytope(_vertices(inputs["vertices"]))
    k = inputs["k"]
    psi = raycurve.from_filtration(P, k, np.asarray(inputs["weights"], dtype=float))
    rows, out = [], []
    for tau in psi.tau_grid[::max(1, psi.tau_grid.size // 16)]:
        rows.append(["mass", float(tau), raycurve.mass_curve(psi)(tau), "", ""])
    if "probe_tau" in inputs:
        body = psi.body(inputs["probe_tau"])
        expected = ConvexBody.hull(_vertices(inputs["expected_body"]), P.dim)
        ok = body.same_as(expected, tol=1e-9)
        rows.append(["body", inputs["probe_tau"], body.volume, expected.volume, 0.0 if ok else 1.0])
        out.append(_within("probe_body", 0.0 if ok else 1.0, 0.0))
    a, b = quantize.lkna(psi, k), quantize.lkna_integral(psi, k)
    rows.append(["lkna", k, a, b, abs(a - b)])
    out.append(_within("stieltjes_forms_agree", abs(a - b), tol))
    return Result(["quantity", "at", "value", "target", "error"], rows, out)


RUNNERS: Dict[str, Callable] = {
    "herm_slope": _run_herm,
    "energy_duality": _run_energy,
    "bonavero": _run_bonavero,
    "lkna_convergence": _run_lkna,
    "quantization": _run_quantization,
    "filtration_curve": _run_filtration,
}


def execute(scenario: dict, seed=None, tolerance_scale: float = 1.0):
    """Run a validated scenario; returns (Result, elapsed seconds)."""
    params = scenario.get("params", {})
    seed = params.get("seed", 0) if seed is None else seed
    tol = params.get("tolerance", 1e-9) * tolerance_scale
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    result = RUNNERS[scenario["kind"]](scenario["inputs"], tol, rng)
    elapsed = time.perf_counter() - start
    if "max_seconds" in params:
        result.assertions.append(_within("runtime_seconds", elapsed, params["max_seconds"] * tolerance_scale))
    return result, elapsed

"""Problem-file ingestion: JSON schema, operator/prox builders, assembly.

A problem file describes either an inclusion system directly (resolvent
slots ``A``/``B``/``D`` plus a coupling) or a minimization instance
(``f``/``smooth``/``g``/``ell``); both share the layout, offsets, linear
operators, solver configuration and error-schedule sections.

Dense operators are row-major nested arrays; matrix-free operators come
from a named builder catalog.  Schema violations are reported with
JSON-pointer style paths.
"""

import json

import numpy as np
from jsonschema import Draft202012Validator

from .errors import ConfigurationError
from .imaging import (
    box_blur_op,
    gaussian_blur_op,
    gradient_op,
    haar_analysis_op,
    second_gradient_op,
)
from .linops import dense_op, identity_op, scaled_identity_op, zero_op
from .minimization import (
    MinimizationSpec,
    build_system,
    quadratic_smooth,
    zero_smooth,
)
from .prox import make_function, zero_coupling
from .solver import geometric_schedule, zero_schedule
from .system import SpaceLayout, SystemSpec

PROBLEM_VERSION = 1

_OPERATOR_SCHEMA = {
    "type": "object",
    "oneOf": [
        {"required": ["dense"]},
        {"required": ["builder"]},
    ],
    "properties": {
        "dense": {"type": "array", "items": {"type": "array",
                                             "items": {"type": "number"}}},
        "builder": {"type": "string"},
        "params": {"type": "object"},
    },
    "additionalProperties": False,
}

_PROX_SCHEMA = {
    "type": "object",
    "required": ["prox"],
    "properties": {
        "prox": {"type": "string"},
        "params": {"type": "object"},
    },
    "additionalProperties": False,
}

_NAMED_SCHEMA = {
    "type": "object",
    "required": ["name"],
    "properties": {
        "name": {"type": "string"},
        "params": {"type": "object"},
    },
    "additionalProperties": False,
}

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "kind", "layout"],
    "properties": {
        "version": {"const": PROBLEM_VERSION},
        "kind": {"enum": ["inclusion", "minimization"]},
        "layout": {
            "type": "object",
            "required": ["m", "s", "h_dims", "g_dims", "y_dims", "x_dims"],
            "properties": {
                "m": {"type": "integer", "minimum": 1},
                "s": {"type": "integer", "minimum": 1},
                "h_dims": {"type": "array",
                           "items": {"type": "integer", "minimum": 1}},
                "g_dims": {"type": "array",
                           "items": {"type": "integer", "minimum": 1}},
                "y_dims": {"type": "array",
                           "items": {"type": "integer", "minimum": 1}},
                "x_dims": {"type": "array",
                           "items": {"type": "integer", "minimum": 1}},
            },
            "additionalProperties": False,
        },
        "z": {"type": ["array", "null"],
              "items": {"type": "array", "items": {"type": "number"}}},
        "r": {"type": ["array", "null"],
              "items": {"type": "array", "items": {"type": "number"}}},
        "operators": {
            "type": "object",
            "required": ["M", "N", "L"],
            "properties": {
                "M": {"type": "array", "items": _OPERATOR_SCHEMA},
                "N": {"type": "array", "items": _OPERATOR_SCHEMA},
                "L": {"type": "array",
                      "items": {"type": "array", "items": _OPERATOR_SCHEMA}},
            },
            "additionalProperties": False,
        },
        "functions": {
            "type": "object",
            "properties": {
                "f": {"type": "array", "items": _PROX_SCHEMA},
                "smooth": _NAMED_SCHEMA,
                "g": {"type": "array", "items": _PROX_SCHEMA},
                "ell": {"type": "array", "items": _PROX_SCHEMA},
                "A": {"type": "array", "items": _PROX_SCHEMA},
                "coupling": _NAMED_SCHEMA,
                "B": {"type": "array", "items": _PROX_SCHEMA},
                "D": {"type": "array", "items": _PROX_SCHEMA},
            },
            "additionalProperties": False,
        },
        "solver": {
            "type": "object",
            "properties": {
                "epsilon": {"type": ["number", "null"]},
                "gamma": {"type": ["number", "null"]},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer"},
                "trace_every": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "errors": _NAMED_SCHEMA,
    },
    "additionalProperties": False,
}

DEFAULT_SOLVER_CONFIG = {
    "epsilon": None,
    "gamma": None,
    "tol": 1e-8,
    "max_iter": 100_000,
    "seed": 42,
    "trace_every": 10,
}

_validator = Draft202012Validator(PROBLEM_SCHEMA)


def _schema_errors(doc):
    msgs = []
    for err in sorted(_validator.iter_errors(doc), key=lambda e: list(e.path)):
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        msgs.append(f"{pointer}: {err.message}")
    return msgs


def build_operator(entry, in_dim, out_dim, where):
    """Materialize one operator entry and check its dimensions."""
    if "dense" in entry:
        op = dense_op(entry["dense"], tag=where)
    else:
        name = entry["builder"]
        params = entry.get("params", {})
        builders = {
            "identity": lambda p: identity_op(int(p["dim"])),
            "scaled_identity": lambda p: scaled_identity_op(
                int(p["dim"]), float(p["scale"])),
            "zero": lambda p: zero_op(int(p["in_dim"]), int(p["out_dim"])),
            "gradient": lambda p: gradient_op(int(p["height"]), int(p["width"])),
            "second_gradient": lambda p: second_gradient_op(
                int(p["height"]), int(p["width"])),
            "haar": lambda p: haar_analysis_op(int(p["height"]), int(p["width"])),
            "box_blur": lambda p: box_blur_op(
                int(p["height"]), int(p["width"]), int(p.get("size", 3))),
            "gaussian_blur": lambda p: gaussian_blur_op(
                int(p["height"]), int(p["width"]),
                float(p.get("sigma", 1.0)), int(p.get("radius", 2))),
        }
        if name not in builders:
            raise ConfigurationError(
                f"{where}: unknown operator builder '{name}'"
            )
        try:
            op = builders[name](params)
        except KeyError as exc:
            raise ConfigurationError(
                f"{where}: builder '{name}' missing parameter {exc}"
            ) from exc
    if (op.in_dim, op.out_dim) != (in_dim, out_dim):
        raise ConfigurationError(
            f"{where}: operator has dims {op.in_dim}->{op.out_dim}, "
            f"layout requires {in_dim}->{out_dim}"
        )
    return op


def _build_prox_list(entries, dims, where):
    if len(entries) != len(dims):
        raise ConfigurationError(
            f"/functions/{where}: expected {len(dims)} entries, got {len(entries)}"
        )
    out = []
    for j, (entry, dim) in enumerate(zip(entries, dims)):
        try:
            out.append(make_function(entry["prox"], entry.get("params", {}), dim))
        except ConfigurationError as exc:
            raise ConfigurationError(f"/functions/{where}/{j}: {exc}") from exc
    return out


def _quadratic_terms(params):
    terms = []
    for t in params.get("terms", []):
        term = {"weight": float(t.get("weight", 1.0))}
        term["matrix"] = np.asarray(t["matrix"], dtype=float)
        if "offset" in t:
            term["offset"] = np.asarray(t["offset"], dtype=float)
        else:
            term["offset"] = np.zeros(term["matrix"].shape[0])
        terms.append(term)
    return terms


def _build_smooth(entry, dim, where):
    name = entry.get("name", "zero") if entry else "zero"
    if name == "zero":
        return zero_smooth(dim)
    if name == "quadratic_fidelity":
        return quadratic_smooth(_quadratic_terms(entry.get("params", {})), dim)
    raise ConfigurationError(f"{where}: unknown smooth builder '{name}'")


def _build_coupling(entry, block_dims, where):
    from .prox import gradient_coupling

    name = entry.get("name", "zero") if entry else "zero"
    if name == "zero":
        return zero_coupling(block_dims)
    if name == "quadratic_gradient":
        smooth = quadratic_smooth(
            _quadratic_terms(entry.get("params", {})), int(sum(block_dims)))
        return gradient_coupling(smooth.gradient, smooth.lipschitz,
                                 block_dims, tag="quad_grad")
    raise ConfigurationError(f"{where}: unknown coupling builder '{name}'")


def _vectors(entries, dims, where):
    if entries is None:
        return [np.zeros(d) for d in dims]
    if len(entries) != len(dims):
        raise ConfigurationError(
            f"/{where}: expected {len(dims)} vectors, got {len(entries)}"
        )
    out = []
    for j, (entry, dim) in enumerate(zip(entries, dims)):
        vec = np.asarray(entry, dtype=float)
        if vec.shape != (dim,):
            raise ConfigurationError(
                f"/{where}/{j}: expected length {dim}, got {vec.size}"
            )
        out.append(vec)
    return out


def parse_problem(doc):
    """Validate a problem document and assemble the runnable pieces.

    Returns a dict with keys ``kind``, ``system``, ``min_spec`` (None for
    inclusion files), ``solver`` (config dict with defaults filled) and
    ``errors`` (an ErrorSchedule).
    """
    msgs = _schema_errors(doc)
    if msgs:
        raise ConfigurationError("problem file is invalid:\n  "
                                 + "\n  ".join(msgs))
    lay = doc["layout"]
    if lay["m"] != len(lay["h_dims"]):
        raise ConfigurationError("/layout/m: does not match len(h_dims)")
    for key in ("g_dims", "y_dims", "x_dims"):
        if lay["s"] != len(lay[key]):
            raise ConfigurationError(f"/layout/s: does not match len({key})")
    layout = SpaceLayout(lay["h_dims"], lay["g_dims"], lay["y_dims"],
                         lay["x_dims"])

    z = _vectors(doc.get("z"), layout.h_dims, "z")
    r = _vectors(doc.get("r"), layout.g_dims, "r")

    ops = doc.get("operators")
    if ops is None:
        raise ConfigurationError("/operators: section is required")
    for key in ("M", "N", "L"):
        if len(ops[key]) != layout.s:
            raise ConfigurationError(
                f"/operators/{key}: expected {layout.s} entries"
            )
    M = [build_operator(ops["M"][k], layout.g_dims[k], layout.y_dims[k],
                        f"/operators/M/{k}") for k in range(layout.s)]
    N = [build_operator(ops["N"][k], layout.g_dims[k], layout.x_dims[k],
                        f"/operators/N/{k}") for k in range(layout.s)]
    L = []
    for k in range(layout.s):
        if len(ops["L"][k]) != layout.m:
            raise ConfigurationError(
                f"/operators/L/{k}: expected {layout.m} entries"
            )
        L.append([
            build_operator(ops["L"][k][i], layout.h_dims[i], layout.g_dims[k],
                           f"/operators/L/{k}/{i}")
            for i in range(layout.m)
        ])

    funcs = doc.get("functions", {})
    kind = doc["kind"]
    min_spec = None
    if kind == "minimization":
        f = _build_prox_list(funcs.get("f", []), layout.h_dims, "f")
        g = _build_prox_list(funcs.get("g", []), layout.y_dims, "g")
        ell = _build_prox_list(funcs.get("ell", []), layout.x_dims, "ell")
        phi = _build_smooth(funcs.get("smooth"), int(sum(layout.h_dims)),
                            "/functions/smooth")
        min_spec = MinimizationSpec(layout=layout, f=f, phi=phi, g=g, ell=ell,
                                    M=M, N=N, L=L, z=z, r=r)
        system = build_system(min_spec)
    else:
        A = [fn.operator for fn in
             _build_prox_list(funcs.get("A", []), layout.h_dims, "A")]
        B = [fn.operator for fn in
             _build_prox_list(funcs.get("B", []), layout.y_dims, "B")]
        D = [fn.operator for fn in
             _build_prox_list(funcs.get("D", []), layout.x_dims, "D")]
        C = _build_coupling(funcs.get("coupling"), layout.h_dims,
                            "/functions/coupling")
        system = SystemSpec(layout=layout, z=z, r=r, A=A, C=C, B=B, D=D,
                            M=M, N=N, L=L)

    solver_cfg = dict(DEFAULT_SOLVER_CONFIG)
    solver_cfg.update(doc.get("solver", {}))

    err_entry = doc.get("errors", {"name": "zero"})
    err_name = err_entry.get("name", "zero")
    if err_name == "zero":
        schedule = zero_schedule()
    elif err_name == "geometric":
        params = err_entry.get("params", {})
        schedule = geometric_schedule(
            float(params.get("rho", 0.9)),
            float(params.get("amplitude", 0.1)),
            seed=int(solver_cfg["seed"]),
        )
    else:
        raise ConfigurationError(f"/errors/name: unknown schedule '{err_name}'")

    return {
        "kind": kind,
        "system": system,
        "min_spec": min_spec,
        "solver": solver_cfg,
        "errors": schedule,
    }


def load_problem(path):
    """Read and parse a problem file from disk."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"not valid JSON: {exc}") from exc
    return parse_problem(doc)

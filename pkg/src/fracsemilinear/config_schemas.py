"""JSON schemas of the command-line experiment configs.

Every schema rejects unknown keys.  ``defaults`` fills optional keys after
validation so that the config hash covers the values actually used.
"""

from __future__ import annotations

import copy

_ALPHA = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 2}
_DIM = {"type": "integer", "enum": [2, 3]}
_RADIUS = {"type": "number", "exclusiveMinimum": 0, "default": 1.0}
_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 3}
_POS = {"type": "number", "exclusiveMinimum": 0}


def _numbers(item=None):
    item = item or {"type": "number"}
    return {"anyOf": [item, {"type": "array", "items": item, "minItems": 1}]}


def _obj(props: dict, required: list) -> dict:
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "properties": props,
        "required": required,
        "additionalProperties": False,
    }


SCHEMAS = {
    "kernel-eval": _obj(
        {
            "alpha": _ALPHA,
            "dim": _DIM,
            "radius": _RADIUS,
            "kind": {"enum": ["green", "poisson", "martin", "modified_martin", "killing"]},
            "points": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "properties": {"x": _POINT, "y": _POINT},
                    "required": ["x"],
                    "additionalProperties": False,
                },
            },
        },
        ["alpha", "dim", "kind", "points"],
    ),
    "audit": _obj(
        {
            "alpha": _ALPHA,
            "dim": _DIM,
            "radius": _RADIUS,
            "kinds": {
                "type": "array",
                "minItems": 1,
                "items": {"enum": ["green", "poisson", "martin", "killing", "mdsigma", "green_profile",
                                   "poisson_profile"]},
            },
            "delta_floor": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1, "default": 1e-3},
            "samples": {"type": "integer", "minimum": 8, "default": 1000},
        },
        ["alpha", "dim", "kinds"],
    ),
    "profile": _obj(
        {
            "alpha": _ALPHA,
            "dim": _DIM,
            "radius": _RADIUS,
            "which": {"enum": ["green", "poisson", "regimes"]},
            "betas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "deltas": {"type": "array", "items": _POS, "minItems": 2,
                       "default": [1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1]},
        },
        ["alpha", "dim", "which", "betas"],
    ),
    "kato": _obj(
        {
            "alpha": _ALPHA,
            "dim": _DIM,
            "radius": _RADIUS,
            "beta": {"type": "number"},
            "eps": {"type": "array", "items": _POS, "minItems": 2, "default": [0.02, 0.04, 0.08, 0.16, 0.32]},
        },
        ["alpha", "dim", "beta"],
    ),
    "criteria": _obj(
        {
            "alpha": _numbers(_ALPHA),
            "W_beta": _numbers(),
            "Lambda_p": _numbers({"type": "number", "minimum": 0}),
            "beta2": _numbers(),
            "which": {
                "type": "array",
                "minItems": 1,
                "items": {"enum": ["boundary_decay", "integral", "U_interior", "exterior_finite",
                                   "exterior_dominated", "U_exterior", "green_dominated"]},
            },
            "method": {"enum": ["auto", "exponent", "quadrature"], "default": "auto"},
        },
        ["alpha", "W_beta"],
    ),
    "solve": _obj(
        {
            "alpha": _ALPHA,
            "dim": _DIM,
            "radius": _RADIUS,
            "sign": {"enum": ["nonnegative-f", "nonpositive-f", "general"], "default": "nonnegative-f"},
            "W": {
                "type": "object",
                "properties": {"type": {"const": "power"}, "beta": {"type": "number"}},
                "required": ["beta"],
                "additionalProperties": False,
            },
            "Lambda": {
                "oneOf": [
                    {"type": "object", "properties": {"type": {"const": "zero"}}, "required": ["type"],
                     "additionalProperties": False},
                    {"type": "object", "properties": {"type": {"const": "power"}, "p": {"type": "number",
                                                                                      "minimum": 0}},
                     "required": ["type", "p"], "additionalProperties": False},
                ]
            },
            "exterior": {
                "type": "object",
                "properties": {"beta2": {"type": "number"}},
                "required": ["beta2"],
                "additionalProperties": False,
            },
            "boundary": {
                "type": "object",
                "properties": {"h": {"type": "number", "minimum": 0}},
                "required": ["h"],
                "additionalProperties": False,
            },
            "m": {"type": "number", "minimum": 0},
            "m_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "scheme": {"enum": ["auto", "monotone", "picard"], "default": "auto"},
            "tol": {"type": "number", "exclusiveMinimum": 0, "default": 1e-6},
            "k_max": {"type": "integer", "minimum": 1, "default": 200},
            "grid_points": {"type": "integer", "minimum": 8, "default": 64},
        },
        ["alpha", "dim"],
    ),
    "threshold-scan": _obj(
        {
            "alphas": {"type": "array", "items": _ALPHA, "minItems": 1},
            "dim": {**_DIM, "default": 3},
            "offsets": {"type": "array", "items": {"type": "number"}, "minItems": 1,
                        "default": [-0.1, 0.0, 0.1]},
        },
        ["alphas"],
    ),
    "trace": _obj(
        {
            "alpha": _ALPHA,
            "dim": _DIM,
            "radius": _RADIUS,
            "field": {"enum": ["martin_sigma", "green_one", "poisson_power"]},
            "beta2": {"type": "number"},
            "ks": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 12}, "minItems": 1,
                   "default": [2, 4, 6, 8]},
        },
        ["alpha", "dim", "field"],
    ),
    "dv": _obj(
        {
            "alpha": _ALPHA,
            "dim": _DIM,
            "radius": _RADIUS,
            "z": _POINT,
            "bumps": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "properties": {"center": _POINT, "radius": _POS},
                    "required": ["center", "radius"],
                    "additionalProperties": False,
                },
            },
        },
        ["alpha", "dim", "z", "bumps"],
    ),
    "mc": _obj(
        {
            "alpha": _ALPHA,
            "dim": _DIM,
            "radius": _RADIUS,
            "kind": {"enum": ["green", "poisson"]},
            "beta2": {"type": "number", "default": 0.0},
            "points": {"type": "array", "items": _POINT, "minItems": 1},
            "samples": {"type": "integer", "minimum": 2, "default": 100000},
            "max_steps": {"type": "integer", "minimum": 1, "default": 10000},
            "seed": {"type": "integer", "minimum": 0, "default": 0},
        },
        ["alpha", "dim", "kind", "points"],
    ),
    "regress": _obj(
        {"names": {"type": "array", "items": {"type": "string"}, "minItems": 1}},
        [],
    ),
}


def schema(name: str) -> dict:
    return copy.deepcopy(SCHEMAS[name])


def defaults(name: str, doc: dict) -> dict:
    """Copy of ``doc`` with top-level defaults filled in."""
    out = dict(doc)
    for key, sub in SCHEMAS[name]["properties"].items():
        if key not in out and "default" in sub:
            out[key] = copy.deepcopy(sub["default"])
    return out

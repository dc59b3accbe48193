"""JSON schemas for every document the command-line tool emits."""

from __future__ import annotations

import jsonschema

FRACTION = {"type": "string", "pattern": r"^-?\d+/\d+$"}
NUMBER = {"type": "number"}
BOUND = {"type": "number", "minimum": 0}

APPROX = {
    "type": "object",
    "required": ["value", "error_bound"],
    "properties": {"value": {"anyOf": [NUMBER, FRACTION]}, "error_bound": BOUND},
}

PROB_CELL = {
    "type": "object",
    "required": ["key", "prob"],
    "properties": {"prob": {"anyOf": [FRACTION, NUMBER]}, "bound": BOUND},
}

COUNT_CELL = {
    "type": "object",
    "required": ["key", "count"],
    "properties": {"count": {"type": "integer", "minimum": 0}},
}

TABLE = {
    "type": "object",
    "required": ["p", "L", "k", "mode", "cells", "overflow", "deficit_bound"],
    "properties": {
        "cells": {"type": "array", "items": {"allOf": [PROB_CELL, {"required": ["bound"]}]}},
        "overflow": NUMBER,
        "deficit_bound": BOUND,
    },
}

EMPIRICAL = {
    "type": "object",
    "required": ["kind", "mode", "primes", "levels", "k", "n", "total", "cells", "provenance"],
    "properties": {
        "kind": {"const": "empirical"},
        "total": {"type": "integer", "minimum": 1},
        "cells": {"type": "array", "items": COUNT_CELL},
    },
}

EXACT = {
    "type": "object",
    "required": ["kind", "mode", "p", "L", "k", "n", "cells"],
    "properties": {
        "kind": {"const": "exact"},
        "cells": {"type": "array", "items": {"type": "object", "required": ["key", "prob"], "properties": {"prob": FRACTION}}},
    },
}

COMPARE = {
    "type": "object",
    "required": ["mode", "tv", "tv_interior", "overflow", "max_abs_z", "pass", "cells"],
    "properties": {
        "tv": {"type": "number", "minimum": 0, "maximum": 1},
        "tv_interior": {"type": "number", "minimum": 0, "maximum": 1},
        "pass": {"type": "boolean"},
        "cells": {
            "type": "array",
            "items": {"type": "object", "required": ["key", "theory", "error_bound", "freq", "stderr", "z"]},
        },
    },
}

MOMENT = {
    "type": "object",
    "required": ["targets", "mean", "stderr", "error_bound", "samples"],
    "properties": {"mean": {"anyOf": [NUMBER, FRACTION]}, "stderr": BOUND, "error_bound": BOUND},
}

SEQ_CLASS = {
    "type": "object",
    "required": ["size", "aut_count", "measure", "error_bound", "representative"],
    "properties": {
        "size": {"type": "integer", "minimum": 1},
        "aut_count": {"type": "integer", "minimum": 1},
        "measure": NUMBER,
        "error_bound": BOUND,
    },
}

RESULTS = {
    "theory corank": {"type": "object", "required": ["prob", "bound", "error_bound"]},
    "theory single-corank": {"type": "object", "required": ["prob", "bound", "error_bound"]},
    "theory rank-step": {"type": "object", "required": ["prob"], "properties": {"prob": FRACTION}},
    "theory cok-prod": {"type": "object", "required": ["prob", "bound", "error_bound"]},
    "theory cok-joint": {"type": "object", "required": ["prob", "bound", "error_bound"]},
    "theory table": TABLE,
    "simulate": EMPIRICAL,
    "oracle exhaustive": EXACT,
    "oracle snf": {"type": "object", "required": ["type"]},
    "oracle chain": {"type": "object", "required": ["types"]},
    "oracle rank": {"type": "object", "required": ["rank"]},
    "oracle counts": {"type": "object", "required": ["value"], "properties": {"value": {"type": "integer"}}},
    "oracle census": {"type": "object", "required": ["order", "n_subgroups"]},
    "compare": COMPARE,
    "hl eval": APPROX,
    "hl principal": APPROX,
    "hl measure-prod": APPROX,
    "hl measure-joint": APPROX,
    "seq classify": {"type": "object", "required": ["classes"], "properties": {"classes": {"type": "array", "items": SEQ_CLASS}}},
    "seq marginal": {"type": "object", "required": ["lhs", "rhs", "pass"], "properties": {"lhs": FRACTION, "rhs": FRACTION}},
    "seq isomorphic": {"type": "object", "required": ["isomorphic"]},
    "moments": {"type": "object", "required": ["estimates"], "properties": {"estimates": {"type": "array", "items": MOMENT}}},
}

ENVELOPE = {
    "type": "object",
    "required": ["command", "provenance", "result"],
    "properties": {
        "command": {"enum": sorted(RESULTS)},
        "provenance": {
            "type": "object",
            "required": ["tool", "version", "config_hash", "seed"],
            "properties": {
                "tool": {"const": "coklab"},
                "version": {"type": "string"},
                "config_hash": {"type": "string"},
                "seed": {"type": ["integer", "null"]},
            },
        },
    },
}


def validate_document(doc: dict) -> None:
    """Raise jsonschema.ValidationError unless ``doc`` is a well-formed tool result."""
    jsonschema.validate(doc, ENVELOPE)
    jsonschema.validate(doc["result"], RESULTS[doc["command"]])

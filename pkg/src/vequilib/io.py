"""Problem files and numeric serialization.

Problem documents are JSON with keys ``d``, ``C`` (row-major), ``supports``
(list per component of pieces {type: segment|ray, a, b|u}), ``fields``
(list of {kind, params, declared_growth}), ``masses``, ``constraints``.
Complex numbers are encoded as [re, im].  Matrix entries and masses may
be written as rational strings ("2/3") to keep downstream mass couplings
exact; plain numbers are accepted everywhere.

All numeric output is serialized with 17 significant digits, which
round-trips IEEE doubles exactly, so reruns with identical configuration
produce byte-identical artifacts.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from typing import IO

import numpy as np

from .problem import (
    ExternalField,
    InteractionMatrix,
    MassVector,
    ProblemSpec,
    Ray,
    Segment,
    SupportSet,
    UpperConstraint,
)


def fmt17(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return f"{x:.17g}"


def dumps17(obj, indent: int = 0) -> str:
    """JSON text with floats at 17 significant digits."""
    pad = " " * indent
    inner = " " * (indent + 2)
    if obj is None:
        return "null"
    if obj is True or obj is False:
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt17(float(obj))
    if isinstance(obj, Fraction):
        return json.dumps(_encode_number(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps17(obj.tolist(), indent)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}{json.dumps(str(k))}: {dumps17(v, indent + 2)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        flat = all(isinstance(v, (int, float, np.integer, np.floating)) for v in obj)
        if flat:
            return "[" + ", ".join(dumps17(v) for v in obj) + "]"
        items = [f"{inner}{dumps17(v, indent + 2)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _encode_number(v):
    """Exact values become rational strings; floats stay numbers."""
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def _decode_number(v):
    if isinstance(v, bool):
        raise ValueError("booleans are not numbers here")
    if isinstance(v, (int, float)):
        return v
    if isinstance(v, str):
        if v == "inf":
            return math.inf
        if v == "-inf":
            return -math.inf
        return Fraction(v)
    raise ValueError(f"expected a number or rational string, got {v!r}")


def _encode_complex(z: complex):
    return [float(np.real(z)), float(np.imag(z))]


def _decode_complex(v) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float)):
        return complex(float(v), 0.0)
    raise ValueError(f"expected [re, im], got {v!r}")


def _encode_growth(g):
    if g is None:
        return None
    if g == math.inf:
        return "inf"
    return float(g)


def _decode_growth(v):
    if v is None:
        return None
    if v == "inf":
        return math.inf
    return float(v)


_FIELD_BUILDERS = {
    "zero": lambda p: ExternalField.zero(),
    "poly": lambda p: ExternalField.poly(p["coeffs"], axis=_decode_complex(p.get("axis", [1, 0]))),
    "logquad": lambda p: ExternalField.logquad(
        p.get("log_coeff", 0.0), p.get("quad_coeff", 0.0), p.get("offset", 0.0),
        axis=_decode_complex(p.get("axis", [1, 0]))),
    "table": lambda p: ExternalField.table(
        p["knots"], p["values"], axis=_decode_complex(p.get("axis", [1, 0]))),
}


def _field_to_dict(f: ExternalField) -> dict:
    if f.kind is None:
        raise ValueError("custom evaluator fields cannot be serialized")
    params = {}
    for k, v in (f.params or {}).items():
        params[k] = _encode_complex(v) if isinstance(v, complex) else v
    return {"kind": f.kind, "params": params, "declared_growth": _encode_growth(f.declared_growth)}


def _field_from_dict(d: dict) -> ExternalField:
    kind = d["kind"]
    if kind not in _FIELD_BUILDERS:
        raise ValueError(f"unknown field kind {kind!r}")
    f = _FIELD_BUILDERS[kind](d.get("params", {}))
    growth = _decode_growth(d.get("declared_growth", f.declared_growth))
    if growth != f.declared_growth:
        f = ExternalField(f.evaluator, growth, f.kind, f.params)
    return f


def _piece_to_dict(p) -> dict:
    if isinstance(p, Segment):
        return {"type": "segment", "a": _encode_complex(p.a), "b": _encode_complex(p.b)}
    return {"type": "ray", "a": _encode_complex(p.a), "u": _encode_complex(p.u)}


def _piece_from_dict(d: dict):
    if d["type"] == "segment":
        return Segment(_decode_complex(d["a"]), _decode_complex(d.get("b", d.get("b_or_u"))))
    if d["type"] == "ray":
        return Ray(_decode_complex(d["a"]), _decode_complex(d.get("u", d.get("b_or_u"))))
    raise ValueError(f"unknown piece type {d['type']!r}")


def spec_to_dict(spec: ProblemSpec) -> dict:
    C_rows = spec.C.exact if spec.C.exact is not None else spec.C.matrix.tolist()
    masses = spec.masses.exact if spec.masses.exact is not None else spec.masses.values.tolist()
    constraints = []
    for con in spec.constraints:
        if callable(con.density):
            raise ValueError("callable constraint densities cannot be serialized")
        dens = float(con.density)
        constraints.append({"component": con.component,
                            "density": "inf" if math.isinf(dens) else dens})
    return {
        "d": spec.d,
        "C": [[_encode_number(v) for v in row] for row in C_rows],
        "supports": [[_piece_to_dict(p) for p in s.pieces] for s in spec.supports],
        "fields": [_field_to_dict(f) for f in spec.fields],
        "masses": [_encode_number(v) for v in masses],
        "constraints": constraints,
    }


def spec_from_dict(doc: dict) -> ProblemSpec:
    d = int(doc["d"])
    C = InteractionMatrix.from_rows([[_decode_number(v) for v in row] for row in doc["C"]])
    supports = tuple(SupportSet(tuple(_piece_from_dict(p) for p in pieces))
                     for pieces in doc["supports"])
    fields = tuple(_field_from_dict(f) for f in doc["fields"])
    masses = MassVector.from_values([_decode_number(v) for v in doc["masses"]])
    constraints = tuple(
        UpperConstraint(int(c["component"]), float(_decode_number(c["density"])))
        for c in doc.get("constraints", []))
    spec = ProblemSpec(C, supports, fields, masses, constraints)
    if spec.d != d:
        raise ValueError(f"declared d={d} does not match matrix size {spec.d}")
    return spec


def dump_problem(spec: ProblemSpec, fp: IO[str] | str) -> None:
    text = dumps17(spec_to_dict(spec)) + "\n"
    if isinstance(fp, str):
        with open(fp, "w") as handle:
            handle.write(text)
    else:
        fp.write(text)


def load_problem(fp: IO[str] | str) -> ProblemSpec:
    if isinstance(fp, str):
        with open(fp) as handle:
            doc = json.load(handle)
    else:
        doc = json.load(fp)
    return spec_from_dict(doc)

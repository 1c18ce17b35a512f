"""Instance file schema, experiment rows and report aggregation.

Reals are serialized as C99 hex-float strings so write-then-read is
bit-identical; the reader also accepts plain JSON numbers for hand-written
files.  Unknown fields are rejected with a field-path diagnostic.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import lattice
from .errors import PathError, SchemaError
from .forms import Instance, lambda_array
from .lattice import build_system
from .stopping import StoppingFamily

SCHEMA_VERSION = "dyadlab-instance/1"

_FIELDS = ("version", "p", "dimension", "depth", "sigma", "omega", "mu", "lambda")


def _fmt(x: float) -> str:
    return float(x).hex()


def _parse_real(value, path: str, positive: bool = False) -> float:
    if isinstance(value, bool):
        raise SchemaError(path, "expected a real number")
    if isinstance(value, (int, float)):
        x = float(value)
    elif isinstance(value, str):
        try:
            x = float.fromhex(value)
        except ValueError:
            raise SchemaError(path, f"not a hex-float literal: {value!r}")
    else:
        raise SchemaError(path, f"expected a real number, got {type(value).__name__}")
    if math.isnan(x) or math.isinf(x):
        raise SchemaError(path, "value must be finite")
    if positive:
        if not x > 0:
            raise SchemaError(path, "value must be positive")
    elif x < 0:
        raise SchemaError(path, "value must be nonnegative")
    return x


def _parse_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(path, "expected an integer")
    return value


def instance_to_dict(inst: Instance) -> dict:
    sys = inst.sys
    lam_map = {}
    for lin in range(sys.num_cubes):
        if inst.lam[lin] != 0.0:
            lam_map[lattice.path_of(sys, sys.cube_at(lin))] = _fmt(inst.lam[lin])
    return {
        "version": SCHEMA_VERSION,
        "p": _fmt(inst.p),
        "dimension": sys.dimension,
        "depth": sys.depth,
        "sigma": [_fmt(v) for v in inst.sigma],
        "omega": [_fmt(v) for v in inst.omega],
        "mu": [[_fmt(v) for v in row] for row in inst.mu],
        "lambda": lam_map,
    }


def instance_from_dict(data) -> Instance:
    if not isinstance(data, dict):
        raise SchemaError("$", "instance file must be a JSON object")
    unknown = set(data) - set(_FIELDS)
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown field")
    for name in _FIELDS:
        if name not in data:
            raise SchemaError(name, "missing field")
    if data["version"] != SCHEMA_VERSION:
        raise SchemaError("version", f"expected {SCHEMA_VERSION!r}, got {data['version']!r}")
    dimension = _parse_int(data["dimension"], "dimension")
    depth = _parse_int(data["depth"], "depth")
    sys = build_system(dimension, depth)

    p = _parse_real(data["p"], "p", positive=True)
    if not p > 1.0:
        raise SchemaError("p", f"exponent must exceed 1, got {p}")

    def _array(name, expect_len):
        arr = data[name]
        if not isinstance(arr, list) or len(arr) != expect_len:
            raise SchemaError(name, f"expected an array of {expect_len} reals")
        return np.array(
            [_parse_real(v, f"{name}[{i}]") for i, v in enumerate(arr)]
        )

    sigma = _array("sigma", sys.num_atoms)
    omega = _array("omega", sys.num_atoms)

    mu_rows = data["mu"]
    if not isinstance(mu_rows, list) or len(mu_rows) != sys.num_levels:
        raise SchemaError("mu", f"expected {sys.num_levels} level rows")
    mu = np.zeros((sys.num_levels, sys.num_atoms))
    for j, row in enumerate(mu_rows):
        if not isinstance(row, list) or len(row) != sys.num_atoms:
            raise SchemaError(f"mu[{j}]", f"expected an array of {sys.num_atoms} reals")
        mu[j] = [_parse_real(v, f"mu[{j}][{i}]") for i, v in enumerate(row)]

    lam_map = data["lambda"]
    if not isinstance(lam_map, dict):
        raise SchemaError("lambda", "expected a path-to-real mapping")
    parsed = {}
    for path, value in lam_map.items():
        where = f"lambda[{path!r}]"
        try:
            lattice.cube_from_path(sys, path)
        except PathError as exc:
            raise SchemaError(where, str(exc))
        parsed[path] = _parse_real(value, where)
    lam = lambda_array(sys, parsed)
    return Instance(sys, p, sigma, omega, mu, lam)


def canonical_bytes(inst: Instance) -> bytes:
    return json.dumps(instance_to_dict(inst), sort_keys=True, separators=(",", ":")).encode()


def digest(inst: Instance) -> str:
    return hashlib.sha256(canonical_bytes(inst)).hexdigest()


def write_instance(inst: Instance, fp) -> None:
    json.dump(instance_to_dict(inst), fp, indent=1)
    fp.write("\n")


def read_instance(fp) -> Instance:
    try:
        data = json.load(fp)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}")
    return instance_from_dict(data)


# -- experiment rows ---------------------------------------------------------

REPORT_COLUMNS = (
    "instance_id",
    "seed",
    "p",
    "dimension",
    "depth",
    "T",
    "Tstar",
    "lambda_norm_lb",
    "oracle_value",
    "oracle_kind",
    "ratio_upper",
    "ratio_lower",
    "prop2_ratio",
    "carleson_Cemp_over_Cprime",
    "g_family_carleson",
    "f_family_sparse_max",
    "iterations",
    "restarts",
    "wall_time_ms",
)


@dataclass(frozen=True)
class ReportRow:
    instance_id: str
    seed: int
    p: float
    dimension: int
    depth: int
    T: float
    Tstar: float
    lambda_norm_lb: float
    oracle_value: Optional[float]
    oracle_kind: Optional[str]
    ratio_upper: Optional[float]
    ratio_lower: Optional[float]
    prop2_ratio: Optional[float]
    carleson_Cemp_over_Cprime: Optional[float]
    g_family_carleson: float
    f_family_sparse_max: float
    iterations: int
    restarts: int
    wall_time_ms: int


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_rows(rows, fp, fmt: str = "csv") -> None:
    rows = sorted(rows, key=lambda r: r.instance_id)
    if fmt == "json":
        payload = [
            {name: getattr(r, name) for name in REPORT_COLUMNS} for r in rows
        ]
        json.dump(payload, fp, indent=1)
        fp.write("\n")
        return
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in rows:
        writer.writerow([_cell(getattr(r, name)) for name in REPORT_COLUMNS])


def read_rows(fp) -> list[ReportRow]:
    reader = csv.DictReader(fp)
    out = []
    for record in reader:
        kwargs = {}
        for f in fields(ReportRow):
            raw = record.get(f.name, "")
            if raw == "" and f.name != "instance_id":
                kwargs[f.name] = None
                continue
            if f.type in ("float", "Optional[float]"):
                kwargs[f.name] = float(raw)
            elif f.type == "int":
                kwargs[f.name] = int(raw)
            elif f.type == "Optional[str]":
                kwargs[f.name] = raw
            else:
                kwargs[f.name] = raw
        out.append(ReportRow(**kwargs))
    return out


def summarize_rows(rows) -> list[dict]:
    """Quantiles of ratio_upper and prop2_ratio per (p, depth) group."""
    groups: dict[tuple[float, int], list[ReportRow]] = {}
    for r in rows:
        groups.setdefault((r.p, r.depth), []).append(r)
    out = []
    for (p, depth), members in sorted(groups.items()):
        entry = {"p": p, "depth": depth, "rows": len(members)}
        for field_name in ("ratio_upper", "prop2_ratio"):
            values = [getattr(m, field_name) for m in members]
            values = [v for v in values if v is not None and not math.isnan(v)]
            if not values:
                continue
            arr = np.array(values)
            for label, frac in (("min", 0.0), ("q25", 0.25), ("median", 0.5), ("q75", 0.75), ("max", 1.0)):
                entry[f"{field_name}_{label}"] = float(np.quantile(arr, frac))
        out.append(entry)
    return out


def summary_to_csv(summary: list[dict]) -> str:
    cols: list[str] = []
    for entry in summary:
        for key in entry:
            if key not in cols:
                cols.append(key)
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for entry in summary:
        writer.writerow([_cell(entry.get(c)) for c in cols])
    return buf.getvalue()


def family_to_dict(sys, family: StoppingFamily) -> dict:
    members = []
    for m in family.members:
        cube = sys.cube_at(m)
        entry = {
            "path": lattice.path_of(sys, cube),
            "stat": family.stats[m],
        }
        if m in family.parent:
            entry["parent"] = lattice.path_of(sys, sys.cube_at(family.parent[m]))
        if family.phi_mass:
            entry["test_input_mass"] = family.phi_mass[m]
        members.append(entry)
    edges = [
        [lattice.path_of(sys, sys.cube_at(m)), lattice.path_of(sys, sys.cube_at(c))]
        for m in family.members
        for c in family.children[m]
    ]
    return {
        "kind": family.kind,
        "top": lattice.path_of(sys, sys.cube_at(family.top)),
        "params": dict(family.params),
        "members": members,
        "edges": edges,
    }

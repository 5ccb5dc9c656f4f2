"""Model files: self-describing, versioned JSON documents.

A model file carries the spec, the fitted parameters (dense matrix or
low-rank factors), the standardization constants, the originating column
names, and the solve report.  Floats survive the JSON round trip exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .bases import BasisFunction, FactorSplineSpec, KnotVector
from .data import ColumnScale, Standardizer, atomic_write_text
from .exceptions import ConfigurationError
from .model import LowRankParams, ModelSpec

SCHEMA_VERSION = 1


def knots_to_dict(kv: KnotVector) -> dict:
    return {
        "lower": kv.lower,
        "upper": kv.upper,
        "interior": list(kv.interior),
        "degree": kv.degree,
    }


def knots_from_dict(d: dict) -> KnotVector:
    return KnotVector(d["lower"], d["upper"], tuple(d["interior"]), d["degree"])


def basis_to_dict(fn: BasisFunction) -> dict:
    out = {"kind": fn.kind}
    if fn.kind in ("exp_right", "exp_left"):
        out["p0"] = fn.p0
    if fn.kind == "ispline":
        out["index"] = fn.index
        out["knots"] = knots_to_dict(fn.knots)
    return out


def basis_from_dict(d: dict) -> BasisFunction:
    kind = d["kind"]
    if kind in ("exp_right", "exp_left"):
        return BasisFunction(kind, p0=d.get("p0", 0.75 if kind == "exp_right" else 0.25))
    if kind == "ispline":
        return BasisFunction.ispline(knots_from_dict(d["knots"]), d["index"])
    return BasisFunction(kind)


def spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "mode": spec.mode,
        "level_bases": [basis_to_dict(fn) for fn in spec.quantile_bases],
        "factor_splines": [
            {"knots": knots_to_dict(fs.knots), "extrapolation": fs.extrapolation}
            for fs in spec.factor_specs
        ],
    }


def spec_from_dict(d: dict) -> ModelSpec:
    bases = tuple(basis_from_dict(b) for b in d["level_bases"])
    splines = tuple(
        FactorSplineSpec(knots_from_dict(fs["knots"]), fs["extrapolation"])
        for fs in d["factor_splines"]
    )
    return ModelSpec(bases, splines, d["mode"])


def params_to_dict(params) -> dict:
    if isinstance(params, LowRankParams):
        return {
            "kind": "lowrank",
            "rank": params.rank,
            "shift": params.shift,
            "factors": [u.tolist() for u in params.factors],
        }
    return {"kind": "dense", "values": np.asarray(params, dtype=float).tolist()}


def params_from_dict(d: dict):
    if d["kind"] == "lowrank":
        return LowRankParams(tuple(np.array(u) for u in d["factors"]), shift=d["shift"])
    if d["kind"] == "dense":
        return np.array(d["values"], dtype=float)
    raise ConfigurationError(f"unknown parameter kind {d['kind']!r}")


def standardizer_to_dict(std: Standardizer | None):
    if std is None:
        return None
    return {
        "response": {"median": std.response.median, "iqr": std.response.iqr},
        "factors": [{"median": c.median, "iqr": c.iqr} for c in std.factors],
    }


def standardizer_from_dict(d):
    if d is None:
        return None
    return Standardizer(
        ColumnScale(d["response"]["median"], d["response"]["iqr"]),
        tuple(ColumnScale(c["median"], c["iqr"]) for c in d["factors"]),
    )


@dataclass(frozen=True)
class ModelBundle:
    """Everything needed to evaluate a fitted model on new data."""

    spec: ModelSpec
    params: object  # dense ndarray or LowRankParams
    standardizer: Standardizer | None = None
    columns: dict | None = None
    report: dict | None = None
    created: str | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "created": self.created or datetime.now(timezone.utc).isoformat(),
            "spec": spec_to_dict(self.spec),
            "params": params_to_dict(self.params),
            "standardizer": standardizer_to_dict(self.standardizer),
            "columns": self.columns,
            "report": self.report,
        }


def save_model(path, bundle: ModelBundle):
    atomic_write_text(path, json.dumps(bundle.to_dict(), indent=2) + "\n")


def load_model(path) -> ModelBundle:
    with open(path) as fh:
        d = json.load(fh)
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigurationError(
            f"unrecognized model schema version {version!r} (expected {SCHEMA_VERSION})"
        )
    return ModelBundle(
        spec=spec_from_dict(d["spec"]),
        params=params_from_dict(d["params"]),
        standardizer=standardizer_from_dict(d.get("standardizer")),
        columns=d.get("columns"),
        report=d.get("report"),
        created=d.get("created"),
    )

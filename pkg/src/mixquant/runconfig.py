"""Declarative run configuration for the command-line workflow.

A single JSON document drives every command; individual CLI flags override
config values (precedence: config < flags).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .bases import BasisFunction
from .calibrate import CalibrationConfig, PenaltySpec
from .exceptions import ConfigurationError
from .model import ModelConfig
from .scoring import DEFAULT_INTERVALS, CRPSConfig

SCHEMA_VERSION = 1


def _build_bases(entries, mode) -> tuple[BasisFunction, ...]:
    out = []
    for e in entries:
        kind = e["kind"]
        if kind == "ispline_family":
            out.extend(
                BasisFunction.ispline_family(e.get("interior_knots", 5), e.get("degree", 3))
            )
        elif kind in ("exp_right", "exp_left"):
            default = 0.75 if kind == "exp_right" else 0.25
            out.append(BasisFunction(kind, p0=e.get("p0", default)))
        else:
            out.append(BasisFunction(kind))
    if not out or out[0].kind != "constant":
        out.insert(0, BasisFunction.constant())
    return tuple(out)


def _penalty_from_dict(d) -> PenaltySpec:
    if not d:
        return PenaltySpec.none()
    return PenaltySpec(d.get("kind", "none"), d.get("order", 1), d.get("lam", 0.0))


@dataclass(frozen=True)
class RunConfig:
    data_path: str | None
    response: str | None
    factors: tuple[str, ...]
    model: ModelConfig
    calibration: CalibrationConfig
    crps: CRPSConfig
    intervals: tuple
    cv_k: int = 10
    cv_paper_mode: bool = False
    seed: int = 0
    als_rank: int = 1
    als_ranks: tuple[int, ...] = ()
    als_steps: int = 21
    als_epsilon: float = 1e-6
    als_max_sweeps: int = 50
    als_init: str = "random"
    output_dir: str = "."
    fetch_series_ids: tuple[str, ...] = ()
    fetch_cache_dir: str = "fred-cache"
    fetch_transform: str = "none"
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigurationError(f"unrecognized config schema version {version!r}")
        data = d.get("data", {})
        model_d = d.get("model", {})
        mode = model_d.get("mode", "quantile")
        spline = model_d.get("spline", {})
        model = ModelConfig(
            quantile_bases=_build_bases(model_d.get("bases", [{"kind": "normal"}]), mode),
            spline_degree=spline.get("degree", 3),
            spline_interior_knots=spline.get("interior_knots", 6),
            placement=spline.get("placement", "equidistant"),
            extrapolation=spline.get("extrapolation", "clamp"),
            mode=mode,
        )
        cal = d.get("calibration", {})
        kwargs = {}
        if "levels" in cal:
            kwargs["levels"] = tuple(cal["levels"])
        if "weights" in cal:
            kwargs["weights"] = tuple(cal["weights"])
        calibration = CalibrationConfig(
            penalty=_penalty_from_dict(cal.get("penalty")),
            nonneg=cal.get("nonneg", True),
            error=cal.get("error", "pinball"),
            beta_grid_size=cal.get("beta_grid_size", 50),
            method=cal.get("method", "highs"),
            seed=d.get("seed", 0),
            **kwargs,
        )
        scoring = d.get("scoring", {})
        crps_cfg = CRPSConfig(nodes=scoring.get("crps_nodes", 999))
        intervals = tuple(
            (float(lo), float(hi)) for lo, hi in scoring.get("intervals", DEFAULT_INTERVALS)
        )
        cv = d.get("cv", {})
        als = d.get("als", {})
        fetch = d.get("fetch", {})
        return cls(
            data_path=data.get("path"),
            response=data.get("response"),
            factors=tuple(data.get("factors", ())),
            model=model,
            calibration=calibration,
            crps=crps_cfg,
            intervals=intervals,
            cv_k=cv.get("k", 10),
            cv_paper_mode=cv.get("paper_mode", False),
            seed=d.get("seed", 0),
            als_rank=als.get("rank", 1),
            als_ranks=tuple(als.get("ranks", ())),
            als_steps=als.get("steps", 21),
            als_epsilon=als.get("epsilon", 1e-6),
            als_max_sweeps=als.get("max_sweeps", 50),
            als_init=als.get("init", "random"),
            output_dir=d.get("output_dir", "."),
            fetch_series_ids=tuple(fetch.get("series", ())),
            fetch_cache_dir=fetch.get("cache_dir", "fred-cache"),
            fetch_transform=fetch.get("transform", "none"),
            raw=d,
        )


def load_config(path) -> RunConfig:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(d, dict):
        raise ConfigurationError(f"{path}: config must be a JSON object")
    return RunConfig.from_dict(d)

"""Experiment configuration files and run-record persistence.

Configurations are JSON with a canonical emission (sorted keys, two-space
indent, trailing newline) so that parse -> emit round-trips byte-identically.
Run records serialize to JSON with a format-version field; monitor series
additionally to CSV with the stable column schema

    t, L_accum, L_recomputed, max_res, l2_res, min_eig, trace_check.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bundle import HiggsBundleConfig, preset
from .errors import ValidationError
from .fieldio import read_field
from .flow import FlowOpts, RunRecord, Sample
from .geometry import TorusGeometry, build_torus
from .metric import HermitianMetric
from .random_fields import random_metric

CSV_COLUMNS = ["t", "L_accum", "L_recomputed", "max_res", "l2_res", "min_eig", "trace_check"]


@dataclass
class ExperimentConfig:
    geometry: dict
    preset: dict
    initial_metric: dict = field(default_factory=lambda: {"kind": "identity"})
    flow: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    format_version: int = 1


def _need(mapping: dict, key: str, where: str, kind=None):
    if key not in mapping:
        raise ValidationError(f"missing field {where}.{key}")
    val = mapping[key]
    if kind is not None:
        try:
            val = kind(val)
        except (TypeError, ValueError):
            raise ValidationError(f"field {where}.{key} has invalid value {val!r}")
    return val


def parse_experiment(text: str) -> ExperimentConfig:
    """Strict parse with diagnostics naming the offending field."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValidationError(f"config is not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise ValidationError("config root must be a JSON object")
    geo = _need(data, "geometry", "config")
    tau_im = _need(geo, "tau_im", "geometry", float)
    if tau_im <= 0:
        raise ValidationError("field geometry.tau_im must be positive")
    lam = _need(geo, "lambda", "geometry", float)
    if lam <= 0:
        raise ValidationError("field geometry.lambda must be positive")
    n_grid = _need(geo, "n_grid", "geometry", int)
    if n_grid < 8 or n_grid % 2:
        raise ValidationError("field geometry.n_grid must be even and >= 8")
    geometry = {
        "tau_re": float(geo.get("tau_re", 0.0)),
        "tau_im": tau_im,
        "lambda": lam,
        "n_grid": n_grid,
    }
    pre = _need(data, "preset", "config")
    kind = _need(pre, "kind", "preset", str)
    preset_spec = {"kind": kind, "params": dict(pre.get("params", {}))}
    init = dict(data.get("initial_metric", {"kind": "identity"}))
    ik = init.get("kind", "identity")
    if ik not in ("identity", "random", "file"):
        raise ValidationError("field initial_metric.kind must be identity|random|file")
    if ik == "random":
        init = {
            "kind": "random",
            "seed": int(init.get("seed", 0)),
            "amplitude": float(init.get("amplitude", 0.5)),
        }
    elif ik == "file":
        init = {"kind": "file", "path": _need(init, "path", "initial_metric", str)}
    else:
        init = {"kind": "identity"}
    fl = dict(data.get("flow", {}))
    flow_spec = {
        "t_max": _need(fl, "t_max", "flow", float),
        "eps_target": float(fl.get("eps_target", 0.0)),
        "dt": fl.get("dt", "auto"),
        "sample_every": int(fl.get("sample_every", 10)),
        "safety": float(fl.get("safety", 0.2)),
    }
    if flow_spec["dt"] != "auto":
        flow_spec["dt"] = float(flow_spec["dt"])
        if flow_spec["dt"] <= 0:
            raise ValidationError("field flow.dt must be positive or 'auto'")
    out = dict(data.get("output", {}))
    return ExperimentConfig(
        geometry=geometry,
        preset=preset_spec,
        initial_metric=init,
        flow=flow_spec,
        output={k: str(v) for k, v in out.items()},
        format_version=int(data.get("format_version", 1)),
    )


def emit_experiment(cfg: ExperimentConfig) -> str:
    data = {
        "format_version": cfg.format_version,
        "geometry": cfg.geometry,
        "preset": cfg.preset,
        "initial_metric": cfg.initial_metric,
        "flow": cfg.flow,
        "output": cfg.output,
    }
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


# -- builders ---------------------------------------------------------------------


def make_geometry(exp: ExperimentConfig) -> TorusGeometry:
    g = exp.geometry
    return build_torus(complex(g["tau_re"], g["tau_im"]), g["lambda"], g["n_grid"])


def make_bundle(exp: ExperimentConfig, geometry: TorusGeometry) -> HiggsBundleConfig:
    return preset(geometry, exp.preset["kind"], **exp.preset["params"])


def make_initial_metric(
    exp: ExperimentConfig, cfg: HiggsBundleConfig
) -> HermitianMetric:
    init = exp.initial_metric
    if init["kind"] == "identity":
        return HermitianMetric.identity(cfg)
    if init["kind"] == "random":
        rng = np.random.default_rng(init["seed"])
        return random_metric(cfg, rng, amplitude=init["amplitude"])
    obj = read_field(init["path"], cfg.geometry)
    if not isinstance(obj, HermitianMetric):
        raise ValidationError(f"{init['path']} does not hold a metric")
    if obj.rank != cfg.rank:
        raise ValidationError("initial metric rank does not match the bundle")
    return obj


def make_flow_opts(exp: ExperimentConfig) -> FlowOpts:
    f = exp.flow
    return FlowOpts(
        t_max=f["t_max"],
        eps_target=f["eps_target"],
        dt=f["dt"],
        sample_every=f["sample_every"],
        safety=f["safety"],
    )


# -- run records --------------------------------------------------------------------


def record_to_dict(record: RunRecord) -> dict:
    out = {
        "format_version": record.format_version,
        "config_label": record.config_label,
        "tau_re": record.tau_re,
        "tau_im": record.tau_im,
        "lambda": record.lam,
        "n_grid": record.n_grid,
        "t_max": record.t_max,
        "eps_target": record.eps_target,
        "dt": record.dt,
        "sample_every": record.sample_every,
        "stop_reason": record.stop_reason,
        "wall_time": record.wall_time,
        "samples": [asdict(s) for s in record.samples],
    }
    for s in out["samples"]:
        if math.isnan(s["L_recomputed"]):
            s["L_recomputed"] = None
    return out


def record_from_dict(data: dict) -> RunRecord:
    rec = RunRecord(
        format_version=int(data["format_version"]),
        config_label=data["config_label"],
        tau_re=float(data["tau_re"]),
        tau_im=float(data["tau_im"]),
        lam=float(data["lambda"]),
        n_grid=int(data["n_grid"]),
        t_max=float(data["t_max"]),
        eps_target=float(data["eps_target"]),
        dt=float(data["dt"]),
        sample_every=int(data["sample_every"]),
        stop_reason=data.get("stop_reason", ""),
        wall_time=float(data.get("wall_time", 0.0)),
    )
    for s in data["samples"]:
        s = dict(s)
        if s.get("L_recomputed") is None:
            s["L_recomputed"] = math.nan
        rec.samples.append(Sample(**s))
    return rec


def record_json(record: RunRecord) -> str:
    return json.dumps(record_to_dict(record), sort_keys=True, indent=2) + "\n"


def monitor_csv(record: RunRecord) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for s in record.samples:
        writer.writerow(
            [
                repr(float(s.t)),
                repr(float(s.L_accum)),
                "" if math.isnan(s.L_recomputed) else repr(float(s.L_recomputed)),
                repr(float(s.max_res)),
                repr(float(s.l2_res)),
                repr(float(s.min_eig)),
                repr(float(s.trace_check)),
            ]
        )
    return buf.getvalue()

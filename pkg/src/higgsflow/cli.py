"""Command-line interface: run, check, functional, presets.

Exit codes for `run`: 0 on completion (including an OBSTRUCTED verdict after
a finished run), 1 on configuration errors, 2 when the flow integrator
aborts.  Diagnostics go to standard error as structured `error: ...` lines;
machine-readable results go to standard output.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import catalog, checks
from .errors import FlowAbortError, HiggsFlowError, ValidationError


def _fail(reason: str, code: int = 1) -> int:
    print(f"error: {reason}", file=sys.stderr)
    return code


def cmd_run(config_path: str) -> int:
    from . import experiment as E
    from . import flow as F
    from .fieldio import write_field

    try:
        text = Path(config_path).read_text(encoding="utf-8")
    except OSError as err:
        return _fail(f"cannot read config: {err}")
    try:
        exp = E.parse_experiment(text)
        geometry = E.make_geometry(exp)
        cfg = E.make_bundle(exp, geometry)
        h0 = E.make_initial_metric(exp, cfg)
        opts = E.make_flow_opts(exp)
    except HiggsFlowError as err:
        return _fail(str(err))
    out = exp.output
    record_path = out.get("record_json", "run_record.json")
    csv_path = out.get("monitor_csv", "monitor.csv")
    metric_path = out.get("final_metric", "final_metric.hbf1")

    def write_outputs(record, final_metric=None):
        data = E.record_to_dict(record)
        rep = F.analyze_run(record)
        data["verdict"] = asdict(rep)
        Path(record_path).write_text(
            json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        Path(csv_path).write_text(E.monitor_csv(record), encoding="utf-8")
        if final_metric is not None:
            write_field(metric_path, final_metric, geometry)
        return rep

    try:
        record = F.run_flow(cfg, h0, opts)
    except FlowAbortError as err:
        record = getattr(err, "record", None)
        if record is not None:
            write_outputs(record)
        print(f"error: flow aborted: {err}", file=sys.stderr)
        return 2
    rep = write_outputs(record, record.final_state.h)
    print(
        json.dumps(
            {
                "stop_reason": record.stop_reason,
                "t_final": record.final_state.t,
                "max_res": record.final_state.max_res,
                "verdict": rep.verdict,
                "record": record_path,
                "monitor": csv_path,
                "final_metric": metric_path,
            },
            sort_keys=True,
        )
    )
    return 0


def cmd_check(suite: str) -> int:
    try:
        ok, rows = checks.run_suite(suite)
    except ValidationError as err:
        return _fail(str(err))
    for name, passed, detail in rows:
        print(f"{'PASS' if passed else 'FAIL'}  {name}  ({detail})")
    print(
        json.dumps(
            {
                "suite": suite,
                "passed": sum(1 for _, p, _ in rows if p),
                "failed": sum(1 for _, p, _ in rows if not p),
                "ok": ok,
            },
            sort_keys=True,
        )
    )
    return 0 if ok else 1


def cmd_functional(config_path: str, h_path: str, k_path: str) -> int:
    from . import experiment as E
    from .donaldson import eval_L
    from .fieldio import read_field
    from .metric import HermitianMetric

    try:
        exp = E.parse_experiment(Path(config_path).read_text(encoding="utf-8"))
        geometry = E.make_geometry(exp)
        cfg = E.make_bundle(exp, geometry)
        h = read_field(h_path, geometry)
        k = read_field(k_path, geometry)
        if not isinstance(h, HermitianMetric) or not isinstance(k, HermitianMetric):
            raise ValidationError("functional expects two metric files")
        report = eval_L(h, k, cfg)
    except (HiggsFlowError, OSError) as err:
        return _fail(str(err))
    print(json.dumps(report.as_dict(), sort_keys=True))
    return 0


def cmd_presets_list() -> int:
    for desc in catalog.registry():
        verdict = catalog.expected_behavior(desc)
        level = (
            f" obstruction={verdict.obstruction_level:.6f}"
            if verdict.obstruction_level is not None
            else ""
        )
        print(f"{desc.key():28s} {verdict.stability:20s} {verdict.expected_flow}{level}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="higgsflow",
        description="Hermitian-Yang-Mills heat flow for Higgs bundles on flat tori",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="integrate a flow experiment from a JSON config")
    p_run.add_argument("config")
    p_check = sub.add_parser("check", help="run an invariant suite")
    p_check.add_argument("suite", help=f"one of {', '.join(checks.SUITES)}")
    p_fun = sub.add_parser("functional", help="evaluate L(h, k) between two metric files")
    p_fun.add_argument("--config", required=True, help="experiment JSON fixing geometry and preset")
    p_fun.add_argument("h")
    p_fun.add_argument("k")
    p_pre = sub.add_parser("presets", help="preset registry")
    p_pre.add_argument("action", choices=["list"])
    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "check":
        return cmd_check(args.suite)
    if args.command == "functional":
        return cmd_functional(args.config, args.h, args.k)
    if args.command == "presets":
        return cmd_presets_list()
    return 1


if __name__ == "__main__":
    sys.exit(main())

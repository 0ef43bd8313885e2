"""Command-line front end.

Thin client of the HTTP service: scenario files are parsed locally,
shipped to the service as JSON, and the response is rendered to CSV
traces and text reports.  By default the client drives the ASGI app
in-process (no server needed); pass --server to target a running
instance instead.

Exit codes: 0 success, 1 in-scenario check failed, 2 configuration
error, 3 runtime/server error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import httpx

from .config import load_scenario_file
from .errors import ConfigError, ParameterError
from .schemas import (RunReportModel, RunRequest, SweepRequest, VerifyRequest)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ServiceClient:
    """Uniform POST/GET against either the in-process app or a remote URL."""

    def __init__(self, server: str = None):
        if server:
            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
        else:
            import warnings
            with warnings.catch_warnings():
                # this starlette wants a not-yet-published httpx successor
                warnings.simplefilter("ignore")
                from starlette.testclient import TestClient

            from .service import app
            self._client = TestClient(app, raise_server_exceptions=False)

    def post(self, path: str, payload: dict):
        return self._client.post(path, json=payload)

    def close(self):
        self._client.close()


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _apply_overrides(spec, args):
    if getattr(args, "dt", None) is not None:
        spec.sim.dt = args.dt
    if getattr(args, "decimate", None) is not None:
        spec.sim.decimate = args.decimate
    return spec


def _report_text(report: RunReportModel) -> str:
    lines = [f"scenario: {report.scenario}",
             f"records:  {report.n_records}",
             ""]
    lines.append(f"{'phase':<16} {'R (ohm)':>8} {'Q_r (C)':>9} {'final Q (C)':>12} "
                 f"{'final v (V)':>12} {'settle (s)':>11} {'sat':>4}")
    for ph in report.phases:
        settle = f"{ph.settling_time:.4f}" if ph.settling_time is not None else "-"
        lines.append(f"[{ph.t_start:>6.3f},{ph.t_end:>6.3f}] {ph.R:>8.3g} "
                     f"{ph.Q_r:>9.4g} {ph.final_Q:>12.6g} {ph.final_v:>12.6g} "
                     f"{settle:>11} {ph.saturation_steps:>4}")
    if report.checks:
        lines.append("")
        lines.append(f"{'check':<28} {'value':>12} {'threshold':>12}  status")
        for c in report.checks:
            status = "pass" if c.passed else "FAIL"
            lines.append(f"{c.name:<28} {c.value:>12.4e} {c.threshold:>12.4e}  {status}")
    lines.append("")
    lines.append("result: " + ("PASS" if report.passed else "FAIL"))
    return "\n".join(lines)


def cmd_run(args) -> int:
    try:
        spec = _apply_overrides(load_scenario_file(args.config), args)
    except (ConfigError, ParameterError) as exc:
        return _fail(EXIT_CONFIG, str(exc))

    client = ServiceClient(args.server)
    try:
        resp = client.post("/run", RunRequest(scenario=spec).model_dump(mode="json"))
    finally:
        client.close()
    if resp.status_code == 400 or resp.status_code == 422:
        return _fail(EXIT_CONFIG, resp.text)
    if resp.status_code != 200:
        return _fail(EXIT_RUNTIME, f"service returned {resp.status_code}: {resp.text}")

    body = resp.json()
    report = RunReportModel.model_validate(body["report"])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / f"{report.scenario}_trace.csv"
    metrics_path = out / f"{report.scenario}_metrics.txt"
    text = _report_text(report)
    if body.get("trace_csv"):
        trace_path.write_text(body["trace_csv"])
        report.artifacts.append(str(trace_path))
    metrics_path.write_text(text + "\n")
    report.artifacts.append(str(metrics_path))

    print(text)
    for p in report.artifacts:
        print(f"wrote {p}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_verify(args) -> int:
    client = ServiceClient(args.server)
    try:
        resp = client.post("/verify", VerifyRequest(
            draws=args.draws, seed=args.seed).model_dump(mode="json"))
    finally:
        client.close()
    if resp.status_code != 200:
        return _fail(EXIT_RUNTIME, f"service returned {resp.status_code}: {resp.text}")
    body = resp.json()
    print(body["table"])
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify_report.txt").write_text(body["table"] + "\n")
        print(f"wrote {out / 'verify_report.txt'}")
    print("result: " + ("PASS" if body["passed"] else "FAIL"))
    return EXIT_OK if body["passed"] else EXIT_CHECK_FAILED


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.values:
        return _fail(EXIT_CONFIG, "sweep needs at least one value")
    try:
        spec = _apply_overrides(load_scenario_file(args.config), args)
    except (ConfigError, ParameterError) as exc:
        return _fail(EXIT_CONFIG, str(exc))

    client = ServiceClient(args.server)
    try:
        resp = client.post("/sweep", SweepRequest(
            scenario=spec, parameter=args.parameter,
            values=args.values).model_dump(mode="json"))
    finally:
        client.close()
    if resp.status_code == 400 or resp.status_code == 422:
        return _fail(EXIT_CONFIG, resp.text)
    if resp.status_code != 200:
        return _fail(EXIT_RUNTIME, f"service returned {resp.status_code}: {resp.text}")

    body = resp.json()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{spec.name}_sweep_{args.parameter}.csv"
    csv_path.write_text(body["csv"])

    print(f"{args.parameter:>12} {'final Q (C)':>12} {'rel err':>10} {'sat':>4}  status")
    for row in body["rows"]:
        status = "pass" if row["passed"] else "FAIL"
        print(f"{row['value']:>12.6g} {row['final_Q']:>12.6g} "
              f"{row['Q_rel_err']:>10.2e} {row['saturation_steps']:>4}  {status}")
    print(f"wrote {csv_path}")
    print("result: " + ("PASS" if body["passed"] else "FAIL"))
    return EXIT_OK if body["passed"] else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parbuck",
        description="Simulate and verify decoupled control of parallel buck banks")
    parser.add_argument("--server", default=None,
                        help="URL of a running service; default runs in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario file")
    p_run.add_argument("--config", required=True, help="scenario YAML file")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--dt", type=float, default=None, help="override step (s)")
    p_run.add_argument("--decimate", type=int, default=None,
                       help="override trace decimation")
    p_run.set_defaults(func=cmd_run)

    p_ver = sub.add_parser("verify", help="run the randomized structural suite")
    p_ver.add_argument("--draws", type=int, default=100)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--out", default=None, help="also write the table here")
    p_ver.set_defaults(func=cmd_verify)

    p_srv = sub.add_parser("serve", help="start the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.set_defaults(func=cmd_serve)

    p_sw = sub.add_parser("sweep", help="rerun a scenario over parameter values")
    p_sw.add_argument("--config", required=True)
    p_sw.add_argument("--parameter", required=True,
                      choices=["R", "k_d", "k_i", "k_mu", "K_lambda", "r_scale"])
    p_sw.add_argument("--values", type=float, nargs="+", required=True)
    p_sw.add_argument("--out", default=".")
    p_sw.add_argument("--dt", type=float, default=None)
    p_sw.add_argument("--decimate", type=int, default=None)
    p_sw.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except httpx.HTTPError as exc:
        return _fail(EXIT_RUNTIME, f"cannot reach service: {exc}")


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: a thin client of the fusion service.

By default requests are served by an in-process application instance, so no
server needs to be running; ``--server URL`` sends the same requests to a
remote instance instead.  Exit codes: 0 on success, 1 when a property or
convergence check fails, 2 for usage and I/O errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .config import load_config_file, resolve_config

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _thread_cap() -> None:
    """Honor HSSTV_THREADS by capping the numeric libraries' thread pools."""
    cap = os.environ.get("HSSTV_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def _make_client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _post(client, path: str, payload: dict) -> tuple[int, dict]:
    resp = client.post(path, json=payload)
    try:
        body = resp.json()
    except (ValueError, json.JSONDecodeError):
        body = {"detail": resp.text}
    return resp.status_code, body


def _resolved_payload(args, extra_overrides: dict) -> dict:
    """Merge defaults < preset < config file < flags, then emit every field."""
    file_values = {}
    if args.config:
        try:
            file_values = load_config_file(args.config)
        except (OSError, ValueError) as exc:
            raise SystemExit(_usage_error(f"config file: {exc}"))
    overrides = dict(extra_overrides)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    if getattr(args, "gamma", None):
        overrides["gamma"] = args.gamma
    try:
        cfg = resolve_config(
            preset=args.preset, file_values=file_values, overrides=overrides
        )
    except (KeyError, ValueError) as exc:
        raise SystemExit(_usage_error(str(exc)))
    payload = dataclasses.asdict(cfg)
    return {k: v for k, v in payload.items() if v is not None}


def _usage_error(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def _report_http_error(status: int, body: dict) -> int:
    detail = body.get("detail", body)
    print(f"error: {detail}", file=sys.stderr)
    if status in (400, 404, 422):
        return EXIT_USAGE
    return EXIT_FAILURE


def _print_warnings(body: dict) -> None:
    for w in body.get("warnings", []):
        print(f"warning: {w}", file=sys.stderr)


def cmd_simulate(args) -> int:
    payload = _resolved_payload(args, {"truth": args.truth} if args.truth else {})
    if "truth" not in payload:
        return _usage_error("simulate needs a truth cube (--truth or config [paths] truth)")
    with _make_client(args.server) as client:
        status, body = _post(client, "/simulate", payload)
    if status != 200:
        return _report_http_error(status, body)
    _print_warnings(body)
    print(f"wrote {body['v_path']}, {body['g_path']}, {body['meta_path']}")
    print(f"oracle radii: epsilon={body['epsilon']:.6g} eta={body['eta']:.6g}")
    return EXIT_OK


def cmd_fuse(args) -> int:
    extra = {}
    for name in ("v", "g", "truth", "meta"):
        val = getattr(args, name)
        if val:
            extra[name] = val
    payload = _resolved_payload(args, extra)
    with _make_client(args.server) as client:
        status, body = _post(client, "/fuse", payload)
    if status != 200:
        return _report_http_error(status, body)
    _print_warnings(body)
    print(
        f"status={body['status']} iterations={body['iterations']} "
        f"gamma=({body['gamma1']:.6g}, {body['gamma2']:.6g}) "
        f"epsilon={body['epsilon']:.6g} eta={body['eta']:.6g} "
        f"wall={body['wall_time_s']:.2f}s"
    )
    if body["status"] == "diverged":
        print(f"solver diverged; partial trace at {body['trace_path']}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"wrote {body['u_path']}, {body['q_path']}, {body['trace_path']}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    payload = {
        "estimate": args.estimate,
        "truth": args.truth,
        "r": args.r,
        "per_band": args.per_band,
    }
    if args.out:
        payload["out_dir"] = args.out
    with _make_client(args.server) as client:
        status, body = _post(client, "/evaluate", payload)
    if status != 200:
        return _report_http_error(status, body)
    print("psnr_db,sam_deg,ergas")
    print(f"{body['psnr_db']:.6f},{body['sam_deg']:.6f},{body['ergas']:.6f}")
    if body.get("csv_path"):
        print(f"wrote {body['csv_path']}")
    if body.get("per_band_path"):
        print(f"wrote {body['per_band_path']}")
    return EXIT_OK


def cmd_check(args) -> int:
    payload = {}
    if args.perturb:
        payload["perturb"] = args.perturb
    with _make_client(args.server) as client:
        status, body = _post(client, "/check", payload)
    if status != 200:
        return _report_http_error(status, body)
    for item in body["checks"]:
        mark = "PASS" if item["passed"] else "FAIL"
        line = f"{mark} {item['name']}"
        if item["detail"] and not item["passed"]:
            line += f" ({item['detail']})"
        print(line)
    if not body["passed"]:
        print(f"failed: {', '.join(body['failures'])}", file=sys.stderr)
        return EXIT_FAILURE
    print("all checks passed")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsfuse",
        description="Hyperspectral image fusion with simultaneous guide denoising.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, gamma=False):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--preset", help="named parameter preset, e.g. pan-r2")
        p.add_argument("--seed", type=int, help="RNG seed override")
        p.add_argument("--out", help="output directory")
        if gamma:
            p.add_argument("--gamma", help="'auto' or explicit 'g1,g2' step sizes")
        p.add_argument("--server", help="remote service URL (default: in-process)")

    p = sub.add_parser("simulate", help="degrade a truth cube into v.hsc and g.hsc")
    common(p)
    p.add_argument("--truth", help="ground-truth .hsc cube")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fuse", help="solve the fusion program for (v, g)")
    common(p, gamma=True)
    p.add_argument("--v", help="low-resolution cube (.hsc)")
    p.add_argument("--g", help="guide image (.hsc)")
    p.add_argument("--truth", help="truth cube for oracle radii")
    p.add_argument("--meta", help="simulate metadata file for oracle radii")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("evaluate", help="compare an estimate against ground truth")
    p.add_argument("--estimate", required=True, help="estimated cube (.hsc)")
    p.add_argument("--truth", required=True, help="ground-truth cube (.hsc)")
    p.add_argument("-r", type=int, default=2, help="resolution ratio for ERGAS")
    p.add_argument("--out", help="directory for metrics.csv")
    p.add_argument("--per-band", action="store_true", help="also write per-band MSE")
    p.add_argument("--server", help="remote service URL (default: in-process)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("check", help="run the self-test battery")
    p.add_argument("--perturb", help="intentionally corrupt the named operator")
    p.add_argument("--server", help="remote service URL (default: in-process)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    _thread_cap()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE
    except ConnectionError as exc:
        return _usage_error(f"cannot reach server: {exc}")


if __name__ == "__main__":
    sys.exit(main())

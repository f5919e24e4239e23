"""Command-line interface: a thin client of the leafkit service.

Subcommands build a request, send it to the FastAPI app (in-process by
default, or to a remote `--server` URL), and print the response.  Because
the embedded transport runs the service in this process, file outputs land
on the local filesystem exactly as a direct library call would.

Exit codes: 0 success, 1 validation error, 2 runtime/numerics error (a
failing grad-check gate also exits 2).
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ExperimentConfig, load_config, with_overrides
from .errors import ConfigError


class _EmbeddedClient:
    """Synchronous wrapper around the in-process ASGI app."""

    def __init__(self):
        from .service import app

        self._app = app

    def post(self, path, json=None):
        import asyncio

        import httpx

        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://leafkit.local", timeout=None
            ) as client:
                return await client.post(path, json=json)

        return asyncio.run(go())

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=3600.0)
    return _EmbeddedClient()


def _post(client, path, payload):
    response = client.post(path, json=payload)
    body = response.json()
    if response.status_code >= 400:
        detail = body.get("error") or body.get("detail") or body
        print(f"error: {json.dumps(detail)}", file=sys.stderr)
        return None, 1 if response.status_code < 500 else 2
    return body, 0


def _load_cfg(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return with_overrides(
        cfg,
        seed=getattr(args, "seed", None),
        out_dir=getattr(args, "out", None),
        fixed_fb=True if getattr(args, "fixed_fb", False) else None,
        init_kind=getattr(args, "init_kind", None),
    )


def _cfg_payload(cfg: ExperimentConfig) -> dict:
    from .service import ConfigModel

    return ConfigModel.from_core(cfg).model_dump()


def cmd_init_fb(args) -> int:
    cfg = _load_cfg(args)
    out_dir = args.out or cfg.output.dir
    with _client(args.server) as client:
        body, code = _post(client, "/filterbank/init", {
            "config": _cfg_payload(cfg), "out_dir": out_dir, "overwrite": args.overwrite,
        })
    if code:
        return code
    print(f"wrote {len(body['rows'])}-filter {cfg.init.kind} bank:")
    for f in body["files"]:
        print(f"  {f}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    with _client(args.server) as client:
        body, code = _post(client, "/train", {
            "config": _cfg_payload(cfg), "overwrite": args.overwrite,
        })
    if code:
        return code
    print(f"run complete: {body['run_dir']}")
    print(
        f"  init={body['init_kind']} fixed_fb={body['fixed_fb']} epochs={body['epochs']}\n"
        f"  final val loss={body['final_val_loss']:.4f} "
        f"acc={body['final_val_accuracy']:.4f} (best {body['best_val_accuracy']:.4f})"
    )
    return 0


def cmd_analyze(args) -> int:
    with _client(args.server) as client:
        body, code = _post(client, "/analyze", {
            "run_dir": args.run_dir, "bins": args.bins, "use_power": args.use_power,
        })
    if code:
        return code
    print(f"analyzed {body['epochs']} epochs in {body['run_dir']}")
    print(f"  mean final JSD = {body['mean_final_jsd']:.4f} "
          f"(most-moved filter: {body['max_moving_filter']})")
    for f in body["files"]:
        print(f"  {f}")
    return 0


def cmd_grad_check(args) -> int:
    cfg = _load_cfg(args)
    with _client(args.server) as client:
        body, code = _post(client, "/gradcheck", {
            "config": _cfg_payload(cfg), "seed": args.seed if args.seed is not None else 0,
            "h": args.h, "coords_per_group": args.coords, "tolerance": args.tolerance,
        })
    if code:
        return code
    for g in body["groups"]:
        mark = "ok  " if g["passed"] else "FAIL"
        print(f"  [{mark}] {g['group']:12s} max_rel_err={g['max_rel_err']:.3e} "
              f"checked={g['n_checked']} skipped={g['n_skipped']}")
    print(f"grad-check {'PASSED' if body['passed'] else 'FAILED'} "
          f"(max {body['max_rel_err']:.3e} vs tolerance {body['tolerance']:.1e})")
    return 0 if body["passed"] else 2


def _parse_filter(text: str):
    try:
        eta, sigma = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected 'eta,sigma_bw', got {text!r}") from exc
    return eta, sigma


def cmd_jsd(args) -> int:
    payload = {"bins": args.bins, "use_power": args.use_power}
    if args.a and args.b:
        payload["filter_a"] = _parse_filter(args.a)
        payload["filter_b"] = _parse_filter(args.b)
    elif args.p and args.q:
        payload["p"] = [float(v) for v in args.p.split(",")]
        payload["q"] = [float(v) for v in args.q.split(",")]
    else:
        print("error: provide --a/--b filter params or --p/--q pmf vectors", file=sys.stderr)
        return 1
    with _client(args.server) as client:
        body, code = _post(client, "/jsd", payload)
    if code:
        return code
    print(f"jsd = {body['jsd']:.6f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leafkit",
        description="Learnable Gabor-filterbank frontend experiments and analysis",
    )
    parser.add_argument("--server", default=None,
                        help="base URL of a running leafkit service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-fb", help="build a filterbank; write CSV + response SVG")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--overwrite", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_init_fb)

    p = sub.add_parser("train", help="run a training experiment")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None, help="override output.dir")
    p.add_argument("--overwrite", action="store_true")
    p.add_argument("--seed", type=int, default=None, help="override train.seed")
    p.add_argument("--fixed-fb", dest="fixed_fb", action="store_true",
                   help="freeze the filterbank (PCEN stays trainable)")
    p.add_argument("--init-kind", dest="init_kind", default=None,
                   choices=("linear", "mel", "bark", "random"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("analyze", help="JSD trajectory + figures for a finished run")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--use-power", dest="use_power", action="store_true", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("grad-check", help="finite-difference gradient gate")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--h", type=float, default=2e-5, help="finite-difference step")
    p.add_argument("--coords", type=int, default=8, help="coordinates per group")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("jsd", help="ad-hoc pair distance")
    p.add_argument("--a", default=None, help="first filter as 'eta,sigma_bw'")
    p.add_argument("--b", default=None, help="second filter as 'eta,sigma_bw'")
    p.add_argument("--p", default=None, help="first pmf as comma-joined values")
    p.add_argument("--q", default=None, help="second pmf as comma-joined values")
    p.add_argument("--bins", type=int, default=1024)
    p.add_argument("--use-power", dest="use_power", action="store_true")
    p.set_defaults(func=cmd_jsd)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Launch the bridge: `tabpfn-bridge --stdio` or `tabpfn-bridge --tcp PORT`."""

from __future__ import annotations

import argparse
import logging
import sys

from .backends import BackendError, make_backend
from .server import serve_stdio, serve_tcp


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tabpfn-bridge", description=__doc__)
    transport = parser.add_mutually_exclusive_group(required=True)
    transport.add_argument("--stdio", action="store_true", help="serve on stdin/stdout")
    transport.add_argument("--tcp", type=int, metavar="PORT", help="serve on a TCP port")
    parser.add_argument("--n-estimators", type=int, default=32, help="TabPFN ensemble size")
    parser.add_argument("--device", default="cpu", help="inference device name")
    parser.add_argument("--backend", choices=("tabpfn", "stub"), default="tabpfn",
                        help="'stub' serves a deterministic formula for protocol testing")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        backend = make_backend(args.backend, n_estimators=args.n_estimators, device=args.device)
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.stdio:
        serve_stdio(backend)
        return 0
    serve_tcp(backend, args.tcp)
    return 0


if __name__ == "__main__":
    sys.exit(main())

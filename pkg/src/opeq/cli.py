"""Command-line front end: a thin client over the service pipelines.

    opeq solve <file>      solve the problem in a JSON file
    opeq check <file>      run the hypothesis checks on it
    opeq reproduce <id>    run an embedded canonical instance end to end
    opeq serve             start the HTTP service

By default the pipelines run in-process; with --server URL the same request
is POSTed to a running service and the returned report bytes are written
unchanged, so local and remote runs produce identical files.

Exit codes: 0 success, 1 input error, 2 solver failure / erroring check.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .problems import (
    ProblemInputError,
    apply_overrides,
    canonical_example,
    validate_problem_data,
)
from .runner import run_check, run_reproduce, run_solve

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_FAILURE = 2


class _Parser(argparse.ArgumentParser):
    # bad flags are input errors: keep the documented exit-code set {0, 1, 2}
    def error(self, message):
        self.exit(EXIT_INPUT_ERROR, f"{self.prog}: error: {message}\n")


def _add_common_flags(sub: argparse.ArgumentParser, with_method: bool = True) -> None:
    sub.add_argument("--output", default="report.json", help="report file path (default report.json)")
    sub.add_argument("--tol", type=float, default=None, help="override solver tolerance")
    sub.add_argument("--nodes", type=int, default=None, help="override quadrature nodes per dimension")
    sub.add_argument("--seed", type=int, default=None, help="override the random seed")
    if with_method:
        sub.add_argument(
            "--method",
            choices=("picard", "newton"),
            default=None,
            help="override the solver method from the file",
        )
    sub.add_argument("--quiet", action="store_true", help="suppress stdout summary")
    sub.add_argument(
        "--server",
        default=None,
        metavar="URL",
        help="POST the request to a running opeq service instead of solving in-process",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="opeq", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="solve f(u) = v from a problem file")
    solve.add_argument("file", help="problem JSON file")
    _add_common_flags(solve)

    check = commands.add_parser("check", help="run hypothesis checks from a problem file")
    check.add_argument("file", help="problem JSON file")
    _add_common_flags(check)

    reproduce = commands.add_parser("reproduce", help="run an embedded canonical instance")
    reproduce.add_argument("example_id", help="example1 or example2")
    _add_common_flags(reproduce)

    serve = commands.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _fail_input(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_INPUT_ERROR


def _load_model(path: str):
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemInputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProblemInputError(f"{path} is not valid JSON: {exc}") from exc
    return validate_problem_data(data)


def _write_report(path: str, body: bytes, quiet: bool) -> None:
    Path(path).write_bytes(body)
    if not quiet:
        print(f"report written to {path}")


def _remote_request(server: str, endpoint: str, payload: dict):
    import httpx

    url = server.rstrip("/") + endpoint
    response = httpx.post(url, json=payload, timeout=300.0)
    if response.status_code in (400, 404, 422):
        detail = response.json().get("detail", response.text)
        raise ProblemInputError(f"{detail}")
    response.raise_for_status()
    return response.content, int(response.headers.get("X-Exit-Code", "0"))


def _overrides_payload(args) -> dict:
    payload = {}
    for key in ("tol", "nodes", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            payload[key] = value
    if getattr(args, "method", None) is not None:
        payload["method"] = args.method
    return payload


def _run_local(kind: str, args) -> tuple[bytes, int, list[str]]:
    if kind == "reproduce":
        model = canonical_example(args.example_id)
    else:
        model = _load_model(args.file)
    model = apply_overrides(
        model,
        tol=args.tol,
        nodes=args.nodes,
        seed=args.seed,
        method=getattr(args, "method", None),
    )
    pipeline = {"solve": run_solve, "check": run_check, "reproduce": run_reproduce}[kind]
    outcome = pipeline(model)
    return outcome.body, outcome.exit_code, outcome.summary


def _run_remote(kind: str, args) -> tuple[bytes, int, list[str]]:
    payload = _overrides_payload(args)
    if kind == "reproduce":
        payload["example_id"] = args.example_id
    else:
        model = _load_model(args.file)
        payload["problem"] = model.model_dump(mode="json")
    body, exit_code = _remote_request(args.server, f"/{kind}", payload)
    return body, exit_code, [f"remote {kind} via {args.server}"]


def _run_command(kind: str, args) -> int:
    try:
        if args.server:
            body, exit_code, summary = _run_remote(kind, args)
        else:
            body, exit_code, summary = _run_local(kind, args)
    except ProblemInputError as exc:
        return _fail_input(str(exc))
    if not args.quiet:
        for line in summary:
            print(line)
    _write_report(args.output, body, args.quiet)
    return exit_code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK
    return _run_command(args.command, args)


if __name__ == "__main__":
    sys.exit(main())

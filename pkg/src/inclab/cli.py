"""Command-line client for the laboratory service.

Every subcommand posts one request to the HTTP service and renders the
response: JSON artifacts via ``--out``, CSV tables via ``--csv-out``, and a
short summary on stdout.  By default the service runs in-process; pass
``--server URL`` to talk to a remote instance instead.

Exit codes: 0 success; 2 a validation assertion failed (spacing constant
over threshold, slope outside tolerance, structural check false); 1 usage,
IO, or request errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import httpx

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2


class CliError(Exception):
    """A usage/IO/request failure: message printed, exit code 1."""


class _ArgumentParser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for
    validation-assertion failures, so usage errors exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# client plumbing
# ---------------------------------------------------------------------------

def make_client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient
    from inclab.service import create_app
    return TestClient(create_app())


def _detail(resp) -> str:
    try:
        detail = resp.json().get("detail")
    except Exception:
        return resp.text[:500]
    if isinstance(detail, list):
        return "; ".join(str(item.get("msg", item)) if isinstance(item, dict)
                         else str(item) for item in detail)
    return str(detail)


def request(client, path: str, payload: dict) -> dict:
    try:
        resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        raise CliError(f"request to {path} failed: {exc}")
    if resp.status_code != 200:
        raise CliError(f"HTTP {resp.status_code}: {_detail(resp)}")
    return resp.json()


# ---------------------------------------------------------------------------
# artifact IO
# ---------------------------------------------------------------------------

def write_json(path: str, data: dict) -> None:
    text = json.dumps(data, sort_keys=True, indent=2) + "\n"
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}")


def write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}")


def read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}")


def read_csv_rows(path: str) -> list[dict]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")


def _fmt(value: float) -> str:
    return "%.17g" % value


def profiles_csv(report: dict) -> str:
    """Spacing profiles of a validate response as one CSV table."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "level_n", "w", "max_count", "implied_K",
                     "witness"])
    for kind, key in (("ball", "ball_levels"), ("tube", "tube_levels")):
        for row in report[key]:
            writer.writerow([kind, row["level_n"], _fmt(row["w"]),
                             row["max_count"], _fmt(row["implied_K"]),
                             row["witness"]])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args, client) -> int:
    payload = {"construction": args.construction, "k": args.k,
               "alpha": args.alpha, "beta": args.beta, "lam": args.lam}
    cfg = request(client, "/generate", payload)
    if args.out:
        write_json(args.out, cfg)
        print(f"construction {args.construction} k={args.k}: "
              f"{len(cfg['balls'])} balls, {len(cfg['tubes'])} tubes "
              f"-> {args.out}")
    else:
        write_json("-", cfg)
    return EXIT_OK


def cmd_validate(args, client) -> int:
    cfg = read_json(args.infile)
    payload = {"config": cfg, "alpha": args.alpha, "beta": args.beta,
               "threshold": args.threshold}
    rep = request(client, "/validate", payload)
    print(f"k={rep['k']} n_balls={rep['n_balls']} n_tubes={rep['n_tubes']} "
          f"alpha={rep['alpha']:g} beta={rep['beta']:g}")
    print(f"K_alpha={rep['K_alpha']:.6g} K_beta={rep['K_beta']:.6g} "
          f"threshold={rep['threshold']:g}")
    print(f"max_overlap_degree_tubes={rep['max_overlap_degree_tubes']} "
          f"max_intersect_degree_balls={rep['max_intersect_degree_balls']}")
    print(f"ok={str(rep['ok']).lower()}")
    if args.out:
        write_json(args.out, rep)
    if args.csv_out:
        write_text(args.csv_out, profiles_csv(rep))
    return EXIT_OK if rep["ok"] else EXIT_VALIDATION


def cmd_count(args, client) -> int:
    cfg = read_json(args.infile)
    payload = {"config": cfg, "method": args.method, "threads": args.threads,
               "include_vectors": args.vectors}
    rep = request(client, "/count", payload)
    print(f"I={rep['count']} method={rep['method']} "
          f"n_balls={rep['n_balls']} n_tubes={rep['n_tubes']}")
    if args.out:
        write_json(args.out, rep)
    return EXIT_OK


def cmd_sweep(args, client) -> int:
    payload = {"construction": args.construction, "alpha": args.alpha,
               "beta": args.beta, "k_min": args.k_min, "k_max": args.k_max,
               "method": args.method, "threads": args.threads,
               "check_upper": not args.no_check_upper}
    rep = request(client, "/sweep", payload)
    print(f"construction {args.construction} (alpha={args.alpha:g}, "
          f"beta={args.beta:g}) k={args.k_min}..{args.k_max}: "
          f"slope={rep['slope']:.6g} r2={rep['r2']:.6g}")
    for name in sorted(rep.get("upper", {})):
        info = rep["upper"][name]
        print(f"bound {name}: ratio_slope={info['slope']:.6g} "
              f"ok={str(info['ok']).lower()}")
    if args.csv_out:
        write_text(args.csv_out, rep["csv"])
    if args.out:
        write_json(args.out, {k: v for k, v in rep.items() if k != "csv"})
    if rep.get("upper") is not None and not rep.get("upper_ok", True):
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_fit(args, client) -> int:
    rows = read_csv_rows(args.infile)
    if not rows:
        raise CliError(f"{args.infile} has no data rows")
    for col in (args.x_col, args.y_col):
        if col not in rows[0]:
            raise CliError(f"{args.infile} has no column {col!r} "
                           f"(columns: {', '.join(rows[0])})")
    xs = [float(r[args.x_col]) for r in rows]
    ys = [float(r[args.y_col]) for r in rows]
    if not args.no_log2:
        if any(y <= 0 for y in ys):
            raise CliError(f"column {args.y_col!r} has non-positive values; "
                           f"cannot take log2 (use --no-log2)")
        ys = [math.log2(y) for y in ys]
    rep = request(client, "/fit", {"xs": xs, "ys": ys})
    print(f"slope={rep['slope']:.6g} intercept={rep['intercept']:.6g} "
          f"r2={rep['r2']:.6g} n={rep['n_points']}")
    if args.out:
        write_json(args.out, rep)
    return EXIT_OK


def cmd_furstenberg(args, client) -> int:
    payload = {"u": args.u, "v": args.v, "k_min": args.k_min,
               "k_max": args.k_max, "product_k_max": args.product_k_max}
    rep = request(client, "/furstenberg", payload)
    print(f"u={rep['u']:g} v={rep['v']:g} bound={rep['bound']:.6g}")
    print(f"config_slope={rep['config_slope']:.6g} "
          f"config_ok={str(rep['config_ok']).lower()}")
    if "product_slope" in rep:
        print(f"product_slope={rep['product_slope']:.6g} "
              f"product_ok={str(rep['product_ok']).lower()}")
    if args.out:
        write_json(args.out, rep)
    return EXIT_OK if rep["ok"] else EXIT_VALIDATION


def cmd_sumproduct(args, client) -> int:
    payload = {"kind": args.kind, "s": args.s}
    if args.k is not None:
        payload["k"] = args.k
    if args.k_min is not None:
        payload["k_min"] = args.k_min
    if args.k_max is not None:
        payload["k_max"] = args.k_max
    rep = request(client, "/sumproduct", payload)
    if rep["mode"] == "verify":
        print(f"kind={rep['kind']} k={rep['k']}: |A|={rep['n_A']} "
              f"tubes={rep['n_tubes']} |X|={rep['n_X']} |Y|={rep['n_Y']}")
        print(f"tube_count_ok={str(rep['tube_count_ok']).lower()} "
              f"fibers_incident={str(rep['fibers_incident']).lower()} "
              f"fibers_valid={str(rep['fibers_valid']).lower()}")
        print(f"lhs={rep['lhs']:.6g} rhs={rep['rhs']:.6g} "
              f"ratio={rep['ratio']:.6g}")
    else:
        print(f"kind={rep['kind']} sweep: lhs_slope={rep['lhs_slope']:.6g} "
              f"rhs_slope={rep['rhs_slope']:.6g} margin={rep['margin']:.6g}")
    print(f"ok={str(rep['ok']).lower()}")
    if args.out:
        write_json(args.out, rep)
    return EXIT_OK if rep["ok"] else EXIT_VALIDATION


def cmd_surface(args, client) -> int:
    rep = request(client, "/surface", {"alpha": args.alpha,
                                       "beta": args.beta})
    print(format(rep["f"], "g"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _default_threads() -> int:
    return os.cpu_count() or 1


def build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(
        prog="inclab",
        description="Incidence-geometry laboratory: generate extremal "
                    "ball/tube configurations, certify spacing, count "
                    "incidences, and fit exponent sweeps.")
    parser.add_argument("--server", default=None, metavar="URL",
                        help="base URL of a running service "
                             "(default: run in-process)")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("generate", help="emit a construction as JSON")
    p.add_argument("--construction", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--lam", type=float, default=None,
                   help="interpolation weight for construction 1")
    p.add_argument("--out", default=None, help="output JSON path "
                                               "(default: stdout)")
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("validate",
                       help="certify ball/tube spacing of a configuration")
    p.add_argument("--in", dest="infile", required=True,
                   help="configuration JSON")
    p.add_argument("--alpha", type=float, default=None,
                   help="tube exponent (default: stored in the file)")
    p.add_argument("--beta", type=float, default=None,
                   help="ball exponent (default: stored in the file)")
    p.add_argument("--threshold", type=float, default=64.0,
                   help="largest acceptable spacing constant (default 64)")
    p.add_argument("--out", default=None, help="report JSON path")
    p.add_argument("--csv-out", default=None,
                   help="spacing-profile CSV path")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("count", help="count ball-tube incidences")
    p.add_argument("--in", dest="infile", required=True,
                   help="configuration JSON")
    p.add_argument("--method", choices=("grid", "brute"), default="grid")
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--vectors", action="store_true",
                   help="include per-object tallies in the report")
    p.add_argument("--out", default=None, help="report JSON path")
    p.set_defaults(handler=cmd_count)

    p = sub.add_parser("sweep",
                       help="sweep a construction over scales and fit "
                            "the incidence exponent")
    p.add_argument("--construction", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--k-min", type=int, required=True)
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--method", choices=("grid", "brute"), default="grid")
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--no-check-upper", action="store_true",
                   help="skip the upper-bound ratio checks")
    p.add_argument("--out", default=None, help="summary JSON path")
    p.add_argument("--csv-out", default=None, help="sweep table CSV path")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("fit", help="least-squares slope of a sweep CSV")
    p.add_argument("--in", dest="infile", required=True, help="sweep CSV")
    p.add_argument("--x-col", default="k")
    p.add_argument("--y-col", default="I")
    p.add_argument("--no-log2", action="store_true",
                   help="fit the y column raw instead of log2(y)")
    p.add_argument("--out", default=None, help="fit JSON path")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("furstenberg",
                       help="slope checks for the point-set and product "
                            "examples")
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--v", type=float, required=True)
    p.add_argument("--k-min", type=int, required=True)
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--product-k-max", type=int, default=None)
    p.add_argument("--out", default=None, help="report JSON path")
    p.set_defaults(handler=cmd_furstenberg)

    p = sub.add_parser("sumproduct",
                       help="structural verification or scale sweep of the "
                            "sum-product instance")
    p.add_argument("--kind", choices=("ap", "cantor"), required=True)
    p.add_argument("--k", type=int, default=None,
                   help="single-scale structural verification")
    p.add_argument("--k-min", type=int, default=None)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--s", type=float, default=0.8,
                   help="cantor exponent (default 0.8)")
    p.add_argument("--out", default=None, help="report JSON path")
    p.set_defaults(handler=cmd_sumproduct)

    p = sub.add_parser("surface",
                       help="evaluate the incidence exponent f(alpha, beta)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.set_defaults(handler=cmd_surface)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else EXIT_USAGE
    client = None
    try:
        client = make_client(args.server)
        return args.handler(args, client)
    except CliError as exc:
        print(f"inclab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if client is not None:
            client.close()


if __name__ == "__main__":
    sys.exit(main())

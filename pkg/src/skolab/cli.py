"""``skolab`` command line.

Exit codes: 0 success, 1 domain error (bad path data, bad parameters),
2 usage error (unknown verb or flag, unreadable input).  Heavy modules
are imported inside the handlers so ``--help`` and small runs start fast.
"""

from __future__ import annotations

import argparse
import json
import sys

USAGE_EXIT = 2
DOMAIN_EXIT = 1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _read_path(filename):
    from .paths import read_path

    try:
        return read_path(filename)
    except FileNotFoundError as e:
        raise _UsageError(f"cannot read {filename!r}: {e.strerror}") from None


def _emit(text: str, out: str | None):
    if out:
        from .errors import SinkError

        try:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text if text.endswith("\n") else text + "\n")
        except OSError as e:
            raise SinkError(f"cannot write {out!r}: {e}") from e
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1)


def _params(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise _UsageError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def cmd_generate(a):
    from .paths import to_json
    from .processes import construct

    c = construct(a.construction, a.n, a.seed, **_params(a.param))
    if a.role not in c.paths:
        raise _UsageError(f"construction provides roles {sorted(c.paths)}, not {a.role!r}")
    _emit(to_json(c.paths[a.role]), a.output)


def cmd_metric(a):
    from . import metrics as m

    x, y = _read_path(a.a), _read_path(a.b)
    opts = m.MetricOptions(tolerance=a.tol)
    if a.kind == "uniform":
        value = m.uniform_distance(x, y, a.T)
    elif a.kind == "j1":
        value = m.j1_distance(x, y, a.T, opts)
    elif a.kind == "m1":
        value = m.m1_distance(x, y, a.T, opts)
    else:
        value = m.halfline_distance(x, y, opts)
    _emit(_dump({"metric": a.kind, "T": a.T, "value": float(value)}), a.output)


def cmd_integrate(a):
    from .integrals import simple_integral

    h, x = _read_path(a.h), _read_path(a.x)
    value = simple_integral(h, x, a.t)
    _emit(_dump({"t": a.t if a.t is not None else x.horizon, "value": [float(v) for v in value]}), a.output)


def cmd_experiment(a):
    from .montecarlo import ExperimentSpec, run_experiment

    try:
        with open(a.spec, encoding="utf-8") as fh:
            d = json.load(fh)
    except FileNotFoundError as e:
        raise _UsageError(f"cannot read {a.spec!r}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise _UsageError(f"{a.spec!r} is not valid JSON: {e}") from None
    spec = ExperimentSpec.from_dict(d)
    report = run_experiment(spec)
    _emit(report.to_csv() if a.csv else report.to_json(), a.output)


def cmd_reproduce(a):
    from .reproduce import format_table, run

    spec, report, checks = run(a.example, a.n, a.seed, a.replicas)
    if a.report:
        report.write(a.report)
    if a.csv:
        _emit(report.to_csv(), a.output)
    elif a.table:
        _emit(format_table(a.example, spec.spec_hash, checks), a.output)
    else:
        doc = {
            "example": a.example,
            "spec_hash": spec.spec_hash,
            "n_grid": list(spec.n_grid),
            "replicas": spec.replicas,
            "seed": spec.seed,
            "checks": [c._asdict() for c in checks],
            "passed": all(c.passed is not False for c in checks),
        }
        _emit(_dump(doc), a.output)


def cmd_validate(a):
    p = _read_path(a.path)
    _emit(_dump({"valid": True, "dim": p.dim, "horizon": p.horizon, "breakpoints": int(p.breakpoints.size)}), a.output)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="skolab", description="Step paths, Skorokhod metrics and stochastic integral diagnostics.")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="draw one sample path of a construction")
    g.add_argument("construction")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--role", default="X", help="which path of the construction to write (X, H, M, A, ...)")
    g.add_argument("--param", action="append", metavar="KEY=VALUE", help="construction parameter; value parsed as JSON")
    g.add_argument("-o", "--output")
    g.set_defaults(fn=cmd_generate)

    m = sub.add_parser("metric", help="distance between two path files")
    m.add_argument("kind", choices=["j1", "m1", "uniform", "halfline"])
    m.add_argument("a")
    m.add_argument("b")
    m.add_argument("--T", type=float)
    m.add_argument("--tol", type=float, default=1e-6)
    m.add_argument("-o", "--output")
    m.set_defaults(fn=cmd_metric)

    i = sub.add_parser("integrate", help="simple integral of h against x")
    i.add_argument("h")
    i.add_argument("x")
    i.add_argument("--t", type=float)
    i.add_argument("-o", "--output")
    i.set_defaults(fn=cmd_integrate)

    e = sub.add_parser("experiment", help="run an experiment spec")
    e.add_argument("spec")
    e.add_argument("--csv", action="store_true", help="long CSV instead of JSON")
    e.add_argument("-o", "--output")
    e.set_defaults(fn=cmd_experiment)

    from .reproduce import REPRODUCE_IDS

    r = sub.add_parser("reproduce", help="run a pinned example and check it")
    r.add_argument("example", choices=REPRODUCE_IDS)
    r.add_argument("--n", type=int, nargs="+", help="override the n grid")
    r.add_argument("--seed", type=int)
    r.add_argument("--replicas", type=int)
    fmt = r.add_mutually_exclusive_group()
    fmt.add_argument("--table", action="store_true", help="human-readable table")
    fmt.add_argument("--csv", action="store_true", help="long CSV of the report")
    r.add_argument("--report", metavar="PATH", help="also write the full report (.json or .csv)")
    r.add_argument("-o", "--output")
    r.set_defaults(fn=cmd_reproduce)

    v = sub.add_parser("validate", help="check a path file")
    v.add_argument("path")
    v.add_argument("-o", "--output")
    v.set_defaults(fn=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from .errors import SkolabError, SinkError

    try:
        args.fn(args)
    except _UsageError as e:
        print(f"skolab: error: {e}", file=sys.stderr)
        return USAGE_EXIT
    except SinkError as e:
        print(f"skolab: {type(e).__name__}: {e}", file=sys.stderr)
        return DOMAIN_EXIT
    except (SkolabError, ValueError) as e:
        print(f"skolab: {type(e).__name__}: {e}", file=sys.stderr)
        return DOMAIN_EXIT
    return 0


if __name__ == "__main__":
    sys.exit(main())

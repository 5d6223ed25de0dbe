"""Command line front end: spec files in, residual tables and JSON reports out.

Exit codes: 0 success, 1 validation failure, 2 parse error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import dataclass, field
from importlib import metadata

from . import catalog, verify
from .errors import (
    DimensionMismatch,
    DomainError,
    InvalidRank,
    ParseError,
    SolverError,
    SpecFileError,
    ValidationError,
)
from .exprdsl import parse
from .fields import ChartSpec, MetricField, OneOneField, sample_points
from .golden import GoldenPair

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PARSE = 2
EXIT_SOLVER = 3

DEFAULT_OPTIONS = {"points": 20, "seed": 42, "tol": 1e-8, "curvature_tol": 1e-4, "fd_step": 1e-5}


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# ---------------------------------------------------------------------------
# Spec files
# ---------------------------------------------------------------------------


@dataclass
class SpecFile:
    path: str
    chart: ChartSpec
    g: MetricField
    kind: str
    structure: OneOneField
    options: dict = field(default_factory=dict)

    def pair(self, points=None) -> GoldenPair:
        if points is None:
            points = sample_points(self.chart, self.options["points"], self.options["seed"])
        fd = self.options["fd_step"]
        if self.kind == "golden":
            return GoldenPair(self.structure, self.g, points, fd_step=fd)
        return GoldenPair.from_product(self.structure, self.g, points, fd_step=fd)


def _line_of(text: str, table: str, needle: str | None = None) -> int | None:
    """1-based line of ``needle`` inside ``[table]`` (or of the header itself)."""
    lines = text.splitlines()
    start = None
    for k, line in enumerate(lines):
        if re.match(rf"\s*\[{re.escape(table)}\]\s*(#.*)?$", line):
            start = k
            break
    if start is None:
        return None
    if needle is None:
        return start + 1
    for k in range(start + 1, len(lines)):
        if re.match(r"\s*\[[^\[\]\"]+\]\s*(#.*)?$", lines[k]):
            break
        if needle in lines[k]:
            return k + 1
    return start + 1


def _matrix(text, path, table, key, value, n):
    if not (isinstance(value, list) and len(value) == n and all(isinstance(r, list) and len(r) == n for r in value)):
        raise SpecFileError(f"[{table}] {key} must be a {n}x{n} array", path, _line_of(text, table, key))
    for row in value:
        for v in row:
            if not isinstance(v, (str, int, float)) or isinstance(v, bool):
                raise SpecFileError(f"[{table}] {key} entries must be expression strings", path, _line_of(text, table, key))
    return [[str(v) for v in row] for row in value]


def _parse_fields(text, path, table, key, rows, chart, cls):
    try:
        return cls.from_strings(chart, rows)
    except ParseError as err:
        bad = None
        for row in rows:
            for t in row:
                try:
                    parse(t, chart.coords)
                except ParseError:
                    bad = t
                    break
            if bad is not None:
                break
        line = _line_of(text, table, f'"{bad}"' if bad is not None else key)
        raise SpecFileError(f"[{table}] {key}: {err}", path, line) from err


def parse_spec(text: str, path: str = "<string>") -> SpecFile:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        m = re.search(r"line (\d+)", str(err))
        raise SpecFileError(f"invalid TOML: {err}", path, int(m.group(1)) if m else None) from err
    for table in ("manifold", "metric", "structure"):
        if not isinstance(doc.get(table), dict):
            raise SpecFileError(f"missing table [{table}]", path, None)
    man = doc["manifold"]
    try:
        dim = man["dim"]
        coords = man["coords"]
    except KeyError as err:
        raise SpecFileError(f"[manifold] missing key {err.args[0]!r}", path, _line_of(text, "manifold")) from None
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise SpecFileError("[manifold] dim must be a positive integer", path, _line_of(text, "manifold", "dim"))
    if not (isinstance(coords, list) and all(isinstance(c, str) for c in coords)):
        raise SpecFileError("[manifold] coords must be an array of strings", path, _line_of(text, "manifold", "coords"))
    box = man.get("sample_box", [])
    try:
        chart = ChartSpec(dim, tuple(coords), tuple(tuple(b) for b in box))
    except (ValueError, TypeError) as err:
        raise SpecFileError(f"[manifold] {err}", path, _line_of(text, "manifold")) from None

    if "g" not in doc["metric"]:
        raise SpecFileError("[metric] missing key 'g'", path, _line_of(text, "metric"))
    g_rows = _matrix(text, path, "metric", "g", doc["metric"]["g"], dim)
    g = _parse_fields(text, path, "metric", "g", g_rows, chart, MetricField)

    st = doc["structure"]
    kind = st.get("kind")
    if kind not in ("golden", "product"):
        raise SpecFileError('[structure] kind must be "golden" or "product"', path, _line_of(text, "structure", "kind"))
    present = [k for k in ("phi", "J") if k in st]
    expected = "phi" if kind == "golden" else "J"
    if present != [expected]:
        raise SpecFileError(
            f'[structure] kind = "{kind}" requires exactly one key {expected!r}, found {present}',
            path,
            _line_of(text, "structure"),
        )
    s_rows = _matrix(text, path, "structure", expected, st[expected], dim)
    structure = _parse_fields(text, path, "structure", expected, s_rows, chart, OneOneField)

    options = dict(DEFAULT_OPTIONS)
    for k, v in doc.get("options", {}).items():
        if k not in DEFAULT_OPTIONS:
            raise SpecFileError(f"[options] unknown option {k!r}", path, _line_of(text, "options", k))
        want = int if k in ("points", "seed") else float
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (want is int and not isinstance(v, int)):
            raise SpecFileError(f"[options] {k} must be a number", path, _line_of(text, "options", k))
        options[k] = want(v)
    if options["points"] < 1:
        raise SpecFileError("[options] points must be positive", path, _line_of(text, "options", "points"))
    return SpecFile(path, chart, g, kind, structure, options)


def load_spec(path: str) -> SpecFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise SpecFileError(f"cannot read spec file: {err.strerror}", path, None) from None
    return parse_spec(text, path)


# ---------------------------------------------------------------------------
# JSON with fixed float formatting
# ---------------------------------------------------------------------------


def _json_value(v, indent: int) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            return '"' + repr(v) + '"'
        return format(v, ".17g")
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{pad}{_json_value(str(k), 0)}: {_json_value(x, indent + 1)}" for k, x in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(v, (list, tuple)):
        if not v:
            return "[]"
        if all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            return "[" + ", ".join(_json_value(float(x) if isinstance(x, float) else x, 0) for x in v) + "]"
        return "[\n" + ",\n".join(pad + _json_value(x, indent + 1) for x in v) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(v).__name__}")


def dumps(doc) -> str:
    """Deterministic JSON; floats carry 17 significant digits."""
    return _json_value(doc, 0) + "\n"


def report_document(report: verify.VerificationReport) -> dict:
    s = report.structure
    return {
        "schema_version": verify.SCHEMA_VERSION,
        "structure": {
            "dim": int(s["dim"]),
            "r": int(s["r"]),
            "s": int(s["s"]),
            "golden_residual": float(s["golden_residual"]),
            "purity_residual": float(s["purity_residual"]),
        },
        "checks": [
            {
                "id": c.id,
                "anchor": c.anchor,
                "residual": float(c.residual),
                "tol": float(c.tol),
                "pass": bool(c.passed),
                "worst_point": [float(x) for x in c.worst_point],
            }
            for c in report.checks
        ],
        "verdicts": {k: bool(v) for k, v in report.verdicts.items()},
        "coincidence": {
            "labels": list(report.coincidence["labels"]),
            "distances": [[float(x) for x in row] for row in report.coincidence["distances"]],
        },
        "meta": {
            "seed": report.meta.get("seed"),
            "points": int(report.meta["points"]),
            "tool_version": report.meta.get("tool_version", tool_version()),
        },
    }


def run_report(spec: SpecFile) -> verify.VerificationReport:
    opts = spec.options
    pair = spec.pair()
    meta = {"seed": opts["seed"], "points": opts["points"], "tool_version": tool_version()}
    return verify.build_report(pair, pair.points, opts["tol"], opts["curvature_tol"], meta)


# ---------------------------------------------------------------------------
# Human output
# ---------------------------------------------------------------------------


def _fmt_point(p) -> str:
    return "(" + ", ".join(f"{x:.4g}" for x in p) + ")"


def _print_checks(checks, out):
    width = max(len(c.id) for c in checks)
    for c in checks:
        out.write(f"  {c.id:<{width}}  {c.residual:10.3e}  tol {c.tol:8.1e}  {c.status():9s}  {c.anchor}\n")
        if not c.passed:
            out.write(f"  {'':<{width}}  worst point {_fmt_point(c.worst_point)}\n")


def _print_structure(summary, out):
    out.write(
        f"structure: dim {summary['dim']}, ranks (r, s) = ({summary['r']}, {summary['s']}), "
        f"golden residual {summary['golden_residual']:.3e}, purity residual {summary['purity_residual']:.3e}\n"
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _apply_flags(spec: SpecFile, args) -> SpecFile:
    for k in ("points", "seed", "tol", "fd_step"):
        v = getattr(args, k, None)
        if v is not None:
            spec.options[k] = v
    return spec


def cmd_validate(args, out) -> int:
    spec = _apply_flags(load_spec(args.path), args)
    pair = spec.pair()
    _print_structure(pair.summary, out)
    out.write(f"  quadratic purity residual {pair.summary['purity_residual_quadratic']:.3e}\n")
    out.write(f"  J^2 = I residual {pair.summary['product_residual']:.3e}\n")
    out.write("valid almost Golden Riemannian structure\n")
    return EXIT_OK


def cmd_report(args, out) -> int:
    spec = _apply_flags(load_spec(args.path), args)
    report = run_report(spec)
    doc = report_document(report)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(dumps(doc))
    _print_structure(report.structure, out)
    out.write("checks:\n")
    _print_checks(report.checks, out)
    out.write("verdicts:\n")
    for k, v in report.verdicts.items():
        out.write(f"  {k:<32} {str(v).lower()}\n")
    out.write("coincidence (sup |Gamma_a - Gamma_b|):\n")
    labels = report.coincidence["labels"]
    out.write("  " + " " * 16 + "".join(f"{lab:>17}" for lab in labels) + "\n")
    for lab, row in zip(labels, report.coincidence["distances"]):
        out.write(f"  {lab:<16}" + "".join(f"{x:17.3e}" for x in row) + "\n")
    bad = [c for c in report.universal_checks if not c.passed and not c.tolerance_bound]
    return EXIT_VALIDATION if bad else EXIT_OK


def cmd_lemmas(args, out) -> int:
    spec = _apply_flags(load_spec(args.path), args)
    pair = spec.pair()
    checks = verify.lemma_checks(pair, pair.points, spec.options["tol"])
    _print_structure(pair.summary, out)
    _print_checks(checks, out)
    if any(c.tolerance_bound for c in checks):
        out.write("tol-bound: residual is at rounding level; the tolerance is below what double precision resolves\n")
    bad = [c for c in checks if not c.passed and not c.tolerance_bound]
    return EXIT_VALIDATION if bad else EXIT_OK


ALGEBRAS = {
    "o": lambda a: verify.orthogonal_algebra(a.n),
    "gl": lambda a: verify.general_linear_algebra(a.n),
    "oxo": lambda a: verify.orthogonal_block_algebra(a.r, a.s),
    "glxgl": lambda a: verify.general_linear_block_algebra(a.r, a.s),
}


def cmd_prolongation(args, out) -> int:
    if args.algebra in ("o", "gl"):
        if args.n is None or args.n < 1:
            raise InvalidRank(f"--algebra {args.algebra} needs --n >= 1")
    elif args.r is None or args.s is None:
        raise InvalidRank(f"--algebra {args.algebra} needs --r and --s")
    alg = ALGEBRAS[args.algebra](args)
    res = verify.first_prolongation_dim(alg)
    out.write(f"algebra {alg.name} in gl({alg.n}), dimension {alg.dim}\n")
    out.write(f"first prolongation dimension: {res['dimension']}\n")
    out.write(f"transpose invariant: {str(res['transpose_invariant']).lower()}\n")
    if res["dimension"] == 0 and res["transpose_invariant"]:
        out.write("verdict: functorial connection exists\n")
    elif res["dimension"] > 0:
        out.write("verdict: first prolongation does not vanish; such structures do not admit a functorial connection\n")
    else:
        out.write("verdict: inconclusive (prolongation vanishes but the algebra is not transpose invariant)\n")
    return EXIT_OK


def cmd_catalog_export(args, out) -> int:
    try:
        entry = catalog.get(args.name)
    except KeyError as err:
        raise SpecFileError(err.args[0], "<catalog>", None) from None
    text = catalog.export(entry)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="goldenconn", description="Almost Golden Riemannian structures and their connections.")
    sub = p.add_subparsers(dest="command", required=True)

    def spec_cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("path", help="spec file (TOML)")
        sp.add_argument("--points", type=int, help="number of sample points")
        sp.add_argument("--seed", type=int, help="seed of the sample points")
        sp.add_argument("--tol", type=float, help="identity tolerance")
        sp.add_argument("--fd-step", dest="fd_step", type=float, help="finite difference step for solved laws")
        return sp

    spec_cmd("validate", "check that the spec describes a valid structure")
    rp = spec_cmd("report", "run every check and print the report")
    rp.add_argument("--json", help="also write the JSON report to this path")
    spec_cmd("lemmas", "run only the identities that hold for every structure")

    pp = sub.add_parser("prolongation", help="first prolongation of a matrix Lie algebra")
    pp.add_argument("--algebra", choices=sorted(ALGEBRAS), required=True)
    pp.add_argument("--n", type=int)
    pp.add_argument("--r", type=int)
    pp.add_argument("--s", type=int)

    cp = sub.add_parser("catalog", help="built-in structures")
    csub = cp.add_subparsers(dest="catalog_command", required=True)
    ep = csub.add_parser("export", help="write a catalog entry as a spec file")
    ep.add_argument("name", help="entry name or random:<n>:<r>:<seed>")
    ep.add_argument("--output", "-o", help="write to this path instead of standard output")
    return p


COMMANDS = {
    "validate": cmd_validate,
    "report": cmd_report,
    "lemmas": cmd_lemmas,
    "prolongation": cmd_prolongation,
    "catalog": cmd_catalog_export,
}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args, out)
    except ParseError as exc:
        err.write(f"parse error: {exc}\n")
        return EXIT_PARSE
    except SolverError as exc:
        err.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER
    except (ValidationError, DimensionMismatch, DomainError) as exc:
        err.write(f"validation failure: {exc}\n")
        point = getattr(exc, "point", None)
        if point is not None:
            err.write(f"  worst point {_fmt_point(point)}\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

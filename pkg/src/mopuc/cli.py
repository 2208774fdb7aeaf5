"""Command-line front end.

    mopuc verblunsky   --measure m.json --n 8
    mopuc szego-report --alphas a.json --n 12 --format csv
    mopuc entropy      --measure m.json
    mopuc bs-density   --alphas a.json --grid 1024
    mopuc hl           --measure m.json --n 6
    mopuc roundtrip    --alphas a.json

Exit codes: 0 success, 1 usage, 2 invalid input, 3 numerical breakdown.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mopuc.config import DEFAULT_TOLERANCES, Tolerances
from mopuc.errors import MopucError, NumericalError, ParseError, ValidationError
from mopuc.matlin import spectral_norm
from mopuc.measure import (
    MatrixMeasure,
    decode_matrix,
    encode_matrix,
    grid_angles,
    load_measure,
    measure_from_alphas,
    measure_to_dict,
    moments,
)
from mopuc.polynomials import VerblunskySequence, verblunsky_from_moments
from mopuc.szego import MINUS_INFINITY, entropy_integral, entropy_trace, hl_distance, hl_infimum_sequence, szego_report

COMMANDS = ("verblunsky", "szego-report", "entropy", "bs-density", "hl", "roundtrip")
ROUNDTRIP_TOL = 1e-6

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    measure_path: Path | None = None
    alphas_path: Path | None = None
    n: int = 8
    grid: int = DEFAULT_TOLERANCES.default_grid
    out: Path | None = None
    format: str = "json"
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if (self.measure_path is None) == (self.alphas_path is None):
            raise UsageError("exactly one of --measure / --alphas is required")
        if self.n < 0:
            raise UsageError("--n must be nonnegative")
        if self.grid < 64 or self.grid & (self.grid - 1):
            raise UsageError("--grid must be a power of two >= 64")
        if self.format not in ("csv", "json"):
            raise UsageError("--format must be csv or json")


# ------------------------------------------------------------------ output


def _num(x) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(x, ".17g")


def dumps(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = "\n" + " " * (indent * (_level + 1))
    end = "\n" + " " * (indent * _level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        if not obj:
            return "[]"
        return "[" + pad + ("," + pad).join(dumps(v, indent, _level + 1) for v in obj) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, (int, str)) else _num(v) for v in row])
    return buf.getvalue()


def _matrix_rows(prefix, mats):
    """Long-format rows (prefix..., i, j, re, im) for a stack of matrices."""
    for key, m in zip(prefix, mats):
        for (i, j), z in np.ndenumerate(np.asarray(m)):
            yield (*key, i, j, z.real, z.imag)


# ------------------------------------------------------------------- input


def load_alphas(path) -> VerblunskySequence:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read alphas file {path}: {exc}") from None
    try:
        ell = doc["ell"]
        if not isinstance(ell, int) or ell < 1:
            raise ParseError(f"'ell' must be a positive integer, got {ell!r}")
        mats = [decode_matrix(a, ell) for a in doc["alphas"]]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed alphas document: {exc!r}") from None
    return VerblunskySequence(np.array(mats, dtype=np.complex128).reshape(len(mats), ell, ell))


def alphas_to_dict(seq: VerblunskySequence) -> dict:
    return {"ell": seq.dim, "alphas": [encode_matrix(a) for a in seq.alphas]}


def _measure(cfg: RunConfig) -> MatrixMeasure:
    if cfg.measure_path is not None:
        return load_measure(cfg.measure_path, cfg.tol)
    return measure_from_alphas(load_alphas(cfg.alphas_path), cfg.grid, cfg.tol)


def _alphas_only(cfg: RunConfig) -> VerblunskySequence:
    if cfg.alphas_path is None:
        raise UsageError(f"{cfg.command} needs --alphas")
    return load_alphas(cfg.alphas_path)


# ---------------------------------------------------------------- commands


def cmd_verblunsky(cfg: RunConfig) -> tuple[int, str]:
    seq = verblunsky_from_moments(moments(_measure(cfg), cfg.n), cfg.n, cfg.tol)
    if cfg.format == "csv":
        return EXIT_OK, _csv(("k", "i", "j", "re", "im"), _matrix_rows([(k,) for k in range(len(seq))], seq.alphas))
    return EXIT_OK, dumps(alphas_to_dict(seq))


def cmd_szego_report(cfg: RunConfig) -> tuple[int, str]:
    report = szego_report(_measure(cfg), cfg.n, cfg.grid, cfg.tol)
    return EXIT_OK, report.to_csv() if cfg.format == "csv" else dumps(report.to_dict())


def cmd_entropy(cfg: RunConfig) -> tuple[int, str]:
    measure = _measure(cfg)
    ent = entropy_integral(measure, cfg.grid, cfg.tol)
    if cfg.format == "csv":
        if ent is MINUS_INFINITY:
            return EXIT_OK, _csv(("i", "j", "re", "im"), [])
        return EXIT_OK, _csv(("i", "j", "re", "im"), (r[1:] for r in _matrix_rows([(0,)], [ent])))
    return EXIT_OK, dumps(
        {
            "ell": measure.dim,
            "grid": cfg.grid,
            "entropy": None if ent is MINUS_INFINITY else encode_matrix(ent),
            "trace": entropy_trace(ent),
        }
    )


def cmd_bs_density(cfg: RunConfig) -> tuple[int, str]:
    measure = measure_from_alphas(_alphas_only(cfg), cfg.grid, cfg.tol)
    if cfg.format == "csv":
        theta = grid_angles(cfg.grid)
        ell = measure.dim
        header = ("theta",) + tuple(f"{p}{i}{j}" for i in range(ell) for j in range(ell) for p in ("re", "im"))
        rows = ([t] + [v for z in s.ravel() for v in (z.real, z.imag)] for t, s in zip(theta, measure.samples))
        return EXIT_OK, _csv(header, rows)
    return EXIT_OK, dumps(measure_to_dict(measure))


def cmd_hl(cfg: RunConfig) -> tuple[int, str]:
    measure = _measure(cfg)
    lhs, rhs = hl_infimum_sequence(measure, cfg.n, cfg.grid, cfg.tol)
    seq = verblunsky_from_moments(moments(measure, cfg.n), cfg.n, cfg.tol)
    dist = [hl_distance(seq, k) for k in range(cfg.n + 1)]
    if cfg.format == "csv":
        rows = ((k, float(np.trace(d).real), lhs, r) for k, (d, r) in enumerate(zip(dist, rhs)))
        return EXIT_OK, _csv(("n", "distance_trace", "lhs", "rhs"), rows)
    return EXIT_OK, dumps(
        {
            "ell": measure.dim,
            "n": cfg.n,
            "distance": encode_matrix(dist[-1]),
            "infimum": {"lhs": lhs, "rhs": float(rhs[-1])},
            "rhs_sequence": [float(r) for r in rhs],
        }
    )


def cmd_roundtrip(cfg: RunConfig) -> tuple[int, str]:
    seq = _alphas_only(cfg)
    order = max(cfg.n, len(seq))
    measure = measure_from_alphas(seq, cfg.grid, cfg.tol)
    got = verblunsky_from_moments(moments(measure, order), order, cfg.tol)
    want = seq.padded(order)
    errs = [spectral_norm(a - b, cfg.tol) for a, b in zip(got.alphas, want.alphas)]
    worst = max(errs, default=0.0)
    code = EXIT_OK if worst < ROUNDTRIP_TOL else EXIT_NUMERIC
    if cfg.format == "csv":
        return code, _csv(("k", "error"), enumerate(errs))
    return code, dumps({"max_error": worst, "passed": code == EXIT_OK, "errors": errs, **alphas_to_dict(got)})


HANDLERS = {
    "verblunsky": cmd_verblunsky,
    "szego-report": cmd_szego_report,
    "entropy": cmd_entropy,
    "bs-density": cmd_bs_density,
    "hl": cmd_hl,
    "roundtrip": cmd_roundtrip,
}


# ------------------------------------------------------------------ driver


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mopuc", description="Matrix orthogonal polynomials on the unit circle.")
    parser.add_argument("command", choices=COMMANDS)
    src = parser.add_mutually_exclusive_group()
    src.add_argument("--measure", type=Path, help="measure JSON file")
    src.add_argument("--alphas", type=Path, help="Verblunsky JSON file")
    parser.add_argument("--n", type=int, default=8, help="order (default 8)")
    parser.add_argument("--grid", type=int, default=DEFAULT_TOLERANCES.default_grid, help="quadrature grid size")
    parser.add_argument("--out", type=Path, help="output file (default stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="json")
    parser.add_argument(
        "--tol", action="append", default=[], metavar="NAME=VALUE", help="override a tolerance, e.g. eig_tol=1e-9"
    )
    return parser


def _tolerances(pairs: list[str]) -> Tolerances:
    known = {f.name: f.type for f in dataclasses.fields(Tolerances)}
    overrides = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep or name not in known:
            raise UsageError(f"bad tolerance override {pair!r}")
        try:
            overrides[name] = int(value) if known[name] in (int, "int") else float(value)
        except ValueError:
            raise UsageError(f"bad tolerance value {pair!r}") from None
    return DEFAULT_TOLERANCES.with_overrides(**overrides)


def parse_config(argv: list[str] | None) -> RunConfig:
    args = build_parser().parse_args(argv)
    return RunConfig(
        command=args.command,
        measure_path=args.measure,
        alphas_path=args.alphas,
        n=args.n,
        grid=args.grid,
        out=args.out,
        format=args.format,
        tol=_tolerances(args.tol),
    )


def _thread_limit():
    raw = os.environ.get("MOPUC_THREADS")
    if not raw:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, int(raw)))


def run(cfg: RunConfig) -> int:
    try:
        with _thread_limit():
            code, text = HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        print(f"mopuc: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"mopuc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"mopuc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MopucError as exc:  # pragma: no cover - every error derives from one of the two above
        print(f"mopuc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not text.endswith("\n"):
        text += "\n"
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.write_text(text)
    if code == EXIT_NUMERIC:
        print("mopuc: roundtrip error above tolerance", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"mopuc: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

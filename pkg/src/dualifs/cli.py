"""Command-line front end: spec files in, JSON/CSV/text reports out."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import jsonschema

from .errors import DualIFSError, ExprSyntaxError, InvalidMap, InvalidProbability
from .maps import DEFAULT_EPSILON, IFS, AnalyticMap

EXIT_OK, EXIT_NEGATIVE, EXIT_INCONCLUSIVE, EXIT_INPUT = 0, 1, 2, 3
THREADS_ENV = "DUALIFS_THREADS"

SPEC_SCHEMA = {
    "type": "object",
    "required": ["maps"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "maps": {"type": "array", "minItems": 1, "items": {"type": "string", "minLength": 1}},
        "weights": {"type": "array", "minItems": 1, "items": {"type": "number"}},
    },
}

# keys that would break byte-identical output; kept only with --timing
TIMING_KEYS = {"runtime_seconds", "wall_time_seconds"}


class SpecError(DualIFSError, ValueError):
    """A spec file that does not match the schema; ``path`` locates the field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------- spec files


@dataclass(frozen=True)
class IfsSpec:
    maps: tuple[str, ...]
    epsilon: float = DEFAULT_EPSILON
    weights: tuple[float, ...] | None = None
    name: str = ""
    description: str = ""

    def to_dict(self) -> dict:
        d: dict[str, Any] = {}
        if self.name:
            d["name"] = self.name
        if self.description:
            d["description"] = self.description
        d["epsilon"] = self.epsilon
        d["maps"] = list(self.maps)
        if self.weights is not None:
            d["weights"] = list(self.weights)
        return d

    def build(self, validate: bool = True) -> IFS:
        maps = []
        for i, src in enumerate(self.maps):
            try:
                maps.append(AnalyticMap.from_source(src, self.epsilon))
            except ExprSyntaxError as e:
                raise SpecError(f"maps[{i}]", str(e)) from e
            except DualIFSError as e:
                raise SpecError(f"maps[{i}]", str(e)) from e
        weights = None
        if self.weights is not None:
            from .dimension import ProbabilityVector

            if len(self.weights) != len(maps):
                raise SpecError("weights", f"{len(self.weights)} weights for {len(maps)} maps")
            try:
                weights = tuple(ProbabilityVector(self.weights))
            except InvalidProbability as e:
                raise SpecError("weights", str(e)) from e
        return IFS.from_maps(maps, validate=validate, weights=weights, name=self.name,
                             description=self.description)


def parse_spec(data: Any) -> IfsSpec:
    try:
        jsonschema.validate(data, SPEC_SCHEMA)
    except jsonschema.ValidationError as e:
        path = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in e.absolute_path)
        raise SpecError(path, e.message) from None
    w = data.get("weights")
    return IfsSpec(tuple(data["maps"]), float(data.get("epsilon", DEFAULT_EPSILON)),
                   None if w is None else tuple(float(v) for v in w),
                   data.get("name", ""), data.get("description", ""))


def read_spec(path: str | Path) -> tuple[IfsSpec, str]:
    """Parsed spec and the sha256 of the file bytes."""
    raw = Path(path).read_bytes()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        raise SpecError("$", f"invalid JSON: {e}") from None
    return parse_spec(data), hashlib.sha256(raw).hexdigest()


def load_spec(path: str | Path, validate: bool = True) -> IFS:
    return read_spec(path)[0].build(validate)


def spec_of(ifs: IFS, epsilon: float | None = None) -> IfsSpec:
    eps = epsilon if epsilon is not None else ifs.maps[0].epsilon
    return IfsSpec(tuple(ifs.sources), eps, ifs.weights, ifs.name, ifs.description)


def example_spec_path() -> Path:
    return Path(str(resources.files("dualifs") / "data" / "paper_example.json"))


# ---------------------------------------------------------------- output


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits; non-finite floats become strings."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return dumps(obj.item(), indent, _level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _strip_timing(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def _text(obj: Any, prefix: str = "") -> list[str]:
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{prefix}{k}:")
                lines.extend(_text(v, prefix + "  "))
            else:
                lines.append(f"{prefix}{k}: {_scalar_text(v)}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)):
                lines.append(f"{prefix}-")
                lines.extend(_text(v, prefix + "  "))
            else:
                lines.append(f"{prefix}- {_scalar_text(v)}")
    else:
        lines.append(prefix + _scalar_text(obj))
    return lines


def _scalar_text(v: Any) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (dict, list)):
        return "{}" if isinstance(v, dict) else "[]"
    return str(v)


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "0+unknown"


@dataclass
class Outcome:
    """What a subcommand produced: report body, optional CSV series and the exit code."""

    verdict: str
    exit_code: int
    result: dict
    evidence: dict
    csv: str | None = None


def run_report(command: str, digest: str, params: dict, out: Outcome, wall: float | None) -> dict:
    rep = {
        "command": command,
        "input_sha256": digest,
        "parameters": params,
        "verdict": out.verdict,
        "exit_code": out.exit_code,
        "evidence": out.evidence,
        "result": out.result,
        "tool_version": _version(),
    }
    if wall is not None:
        rep["wall_time_seconds"] = wall
    return rep


# ---------------------------------------------------------------- subcommands


def _cmd_validate(ifs: IFS, args) -> Outcome:
    reports = [r.to_dict() for r in ifs.reports]
    return Outcome("VALID", EXIT_OK, {"maps": reports},
                   {"checks": {"method": "enclosure", "tolerance": 1e-10}})


def _cmd_sesc(ifs: IFS, args) -> Outcome:
    from .separation import CertVerdict, sesc_certify

    cert = sesc_certify(ifs, grid=args.grid)
    code = {CertVerdict.ACCEPT: EXIT_OK, CertVerdict.REJECT_CRITERION: EXIT_NEGATIVE,
            CertVerdict.INCONCLUSIVE: EXIT_INCONCLUSIVE}[cert.verdict]
    return Outcome(cert.verdict.value, code, cert.to_dict(), {
        "c_max": {"method": "enclosure", "tolerance": 1e-12},
        "beta": {"method": "enclosure", "tolerance": 1e-12},
        "alpha": {"method": "enclosure at grid-searched witness points", "tolerance": 0.0},
        "margin": {"method": "enclosure", "tolerance": 0.0},
    })


def _cmd_dual_ssc(ifs: IFS, args) -> Outcome:
    from .dual import SSCStatus, dual_ssc_check

    rep = dual_ssc_check(ifs, args.depth, grid=args.grid, threads=args.threads)
    code = {SSCStatus.PASS: EXIT_OK, SSCStatus.FAIL: EXIT_NEGATIVE,
            SSCStatus.INCONCLUSIVE: EXIT_INCONCLUSIVE}[rep.status]
    d = rep.to_dict(include_pairs=args.pairs)
    if args.depth == 0:
        d["note"] = "depth 0 has no word pairs; the check passes vacuously"
    return Outcome(rep.status.value, code, d, {
        "envelope": {"method": "enclosure", "tolerance": 0.0},
        "min_gap": {"method": "enclosure at grid-searched witness points", "tolerance": 0.0},
    })


def _cmd_scan(ifs: IFS, args) -> Outcome:
    from .separation import separation_scan

    s = separation_scan(ifs, args.max_depth, args.grid)
    overlap = s.overlap_depth is not None
    return Outcome("EXACT_OVERLAP" if overlap else "SEPARATED", EXIT_NEGATIVE if overlap else EXIT_OK,
                   s.to_dict(), {"delta": {"method": "grid", "grid": args.grid,
                                           "tolerance": "delta_upper - delta"}}, s.to_csv())


def _parse_weights(text: str | None, ifs: IFS):
    from .dimension import ProbabilityVector

    if text is None:
        return ProbabilityVector(ifs.weights) if ifs.weights else None
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise SpecError("--weights", "expected comma separated numbers") from None
    if len(vals) != ifs.arity:
        raise SpecError("--weights", f"{len(vals)} weights for {ifs.arity} maps")
    return ProbabilityVector(vals)


def _cmd_dimension(ifs: IFS, args) -> Outcome:
    import numpy as np

    from .dimension import dimension_bounds, pressure_csv

    p = _parse_weights(args.weights, ifs)
    rep = dimension_bounds(ifs, p, depth=args.depth, samples=args.samples, seed=args.seed,
                           threads=args.threads)
    ts = np.linspace(0.0, 2.0 * max(rep.s_phi.value, 0.5), 41)
    return Outcome("BOUNDS_ATTAINED" if rep.bounds_attained else "UPPER_BOUNDS", EXIT_OK, rep.to_dict(), {
        "conformality_dimension": {"method": "grid pressure root", "tolerance": 1e-10},
        "lyapunov": {"method": "Monte-Carlo", "tolerance": "stderr"},
        "entropy": {"method": "closed form", "tolerance": 1e-12},
    }, pressure_csv(ifs, args.depth, ts))


def _cmd_conjugacy(ifs: IFS, args) -> Outcome:
    from .conjugation import ConjugacyKind, conjugacy_test

    v = conjugacy_test(ifs, tol=args.tol, max_word_len=args.max_word_len)
    # not detecting a conjugacy is evidence, not proof
    code = EXIT_INCONCLUSIVE if v.kind == ConjugacyKind.NOT_DETECTED else EXIT_OK
    d = v.to_dict()
    d["text"] = v.text
    return Outcome(v.kind.value, code, d, {
        "discrepancy": {"method": "grid", "grid": 101, "tolerance": args.tol},
    })


def _cmd_perturb(ifs: IFS, args) -> Outcome:
    from .perturbation import perturb_to_dual_ssc

    rep = perturb_to_dual_ssc(ifs, args.depth, args.delta, args.eps, seed=args.seed, threads=args.threads)
    code = {"PASS": EXIT_OK, "FAIL": EXIT_NEGATIVE}.get(rep.final_status, EXIT_INCONCLUSIVE)
    d = rep.to_dict()
    if args.output:
        eps = ifs.maps[0].epsilon
        spec = IfsSpec(tuple(d["perturbed_maps"]), eps, ifs.weights, ifs.name + " (perturbed)" if ifs.name else "")
        Path(args.output).write_text(dumps(spec.to_dict()) + "\n")
    return Outcome(rep.final_status, code, d, {
        "interpolation_residual": {"method": "point evaluation", "tolerance": 1e-9},
        "repaired_gaps": {"method": "enclosure", "tolerance": 0.0},
        "d2": {"method": "enclosure", "tolerance": 1e-9},
    })


def _cmd_report(ifs: IFS, args) -> Outcome:
    """Validation, the certificate, a separation scan and the dual check in one document."""
    from .dual import dual_ssc_check
    from .separation import separation_scan, sesc_certify

    cert = sesc_certify(ifs) if ifs.arity >= 2 else None
    scan = separation_scan(ifs, args.max_depth, args.grid)
    dssc = dual_ssc_check(ifs, args.depth, threads=args.threads)
    res = {
        "validation": [r.to_dict() for r in ifs.reports],
        "sesc_certificate": cert.to_dict() if cert else None,
        "separation_scan": scan.to_dict(),
        "dual_ssc": dssc.to_dict(),
    }
    return Outcome(dssc.status.value, EXIT_OK, res, {
        "sesc_certificate": {"method": "enclosure", "tolerance": 1e-12},
        "separation_scan": {"method": "grid", "grid": args.grid},
        "dual_ssc": {"method": "enclosure", "tolerance": 0.0},
    }, scan.to_csv())


COMMANDS: dict[str, Callable] = {
    "validate": _cmd_validate,
    "sesc-certify": _cmd_sesc,
    "dual-ssc": _cmd_dual_ssc,
    "separation-scan": _cmd_scan,
    "dimension": _cmd_dimension,
    "conjugacy": _cmd_conjugacy,
    "perturb": _cmd_perturb,
    "report": _cmd_report,
}


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("spec", help="IFS spec file (JSON); use 'example' for the bundled three-map system")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="format", action="store_const", const="json", help="JSON report (default)")
    fmt.add_argument("--csv", dest="format", action="store_const", const="csv", help="CSV series")
    fmt.add_argument("--text", dest="format", action="store_const", const="text", help="plain text")
    common.add_argument("--threads", type=int, default=_default_threads(),
                        help=f"worker cap for scans (default from ${THREADS_ENV}, else 1)")
    common.add_argument("--timing", action="store_true", help="include wall-clock timings in the report")
    common.add_argument("-o", "--out", help="write the report here instead of stdout")
    common.set_defaults(format="json")

    p = argparse.ArgumentParser(prog="dualifs", description="Separation, dimension and conjugacy tools "
                                "for analytic iterated function systems on [0,1].")
    p.add_argument("--version", action="version", version=_version())
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sub.add_parser("validate", parents=[common], help="check every map")

    s = sub.add_parser("sesc-certify", parents=[common], help="second-derivative-ratio certificate")
    s.add_argument("--grid", type=int, default=65)

    s = sub.add_parser("dual-ssc", parents=[common], help="dual cylinder disjointness at a depth")
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--grid", type=int, default=64)
    s.add_argument("--pairs", action="store_true", help="list every pair in the report")

    s = sub.add_parser("separation-scan", parents=[common], help="minimal distance between compositions")
    s.add_argument("--max-depth", type=int, default=6)
    s.add_argument("--grid", type=int, default=257)

    s = sub.add_parser("dimension", parents=[common], help="conformality dimension and measure bounds")
    s.add_argument("--weights", help="comma separated probabilities")
    s.add_argument("--depth", type=int, default=6)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("conjugacy", parents=[common], help="test for an analytic conjugacy to a similarity IFS")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--max-word-len", type=int, default=4)

    s = sub.add_parser("perturb", parents=[common], help="perturb into the dual separated class")
    s.add_argument("--depth", type=int)
    s.add_argument("--delta", type=float, default=1e-3)
    s.add_argument("--eps", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", help="write the perturbed system as a spec file")

    s = sub.add_parser("report", parents=[common], help="validation, certificate, scan and dual check")
    s.add_argument("--depth", type=int, default=2)
    s.add_argument("--max-depth", type=int, default=4)
    s.add_argument("--grid", type=int, default=257)
    return p


def _params(args) -> dict:
    skip = {"spec", "format", "out", "command", "timing", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _render(report: dict, out: Outcome, fmt: str) -> str:
    if fmt == "csv":
        if out.csv is None:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["command", "verdict", "exit_code"])
            w.writerow([report["command"], report["verdict"], report["exit_code"]])
            return buf.getvalue()
        return out.csv
    if fmt == "text":
        return "\n".join(_text(report)) + "\n"
    return dumps(report) + "\n"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        path = example_spec_path() if args.spec == "example" else Path(args.spec)
        spec, digest = read_spec(path)
        ifs = spec.build(validate=True)
        args.threads = max(1, args.threads)
        out = COMMANDS[args.command](ifs, args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (SpecError, InvalidMap, InvalidProbability) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except DualIFSError as e:
        # numerics gave up (tolerance, envelope, exhausted search)
        print(f"inconclusive: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    wall = time.perf_counter() - t0 if args.timing else None
    report = run_report(args.command, digest, _params(args), out, wall)
    if not args.timing:
        report = _strip_timing(report)
    text = _render(report, out, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return out.exit_code


if __name__ == "__main__":
    sys.exit(main())
